//! Subcommand implementations. Every run writes a resolved-config dump and
//! enough artifacts to reproduce or re-evaluate it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use frwkv_core::data::{load_csv, split, synth_periodic, windows, write_csv, DatasetKind, SplitName};
use frwkv_core::error::{Error, Result};
use frwkv_core::harness::{analyze, fnv1a_hex, render_csv, render_text, GridSpec, RecordStore, RunRecord};
use frwkv_core::model::Forecaster;
use frwkv_core::tensor::no_grad;
use frwkv_core::train::{eval_metrics, train, OptimConfig};
use frwkv_core::variant::REGISTRY;

use crate::cfg::{GridConfig, RunConfig};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn metrics_json(mse: f64, mae: f64, epochs_run: usize, train_seconds: f64) -> String {
    serde_json::json!({
        "mse": mse,
        "mae": mae,
        "epochs_run": epochs_run,
        "train_seconds": train_seconds,
    })
    .to_string()
}

fn epochs_csv(log: &[frwkv_core::train::EpochRecord]) -> String {
    let mut out = String::from("epoch,lr,train_loss,val_loss,stopped\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.lr, r.train_loss, r.val_loss, r.stopped as u8
        ));
    }
    out
}

pub fn cmd_train(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let cfg = RunConfig::parse(&text)?;
    cfg.model.variant.validate()?;
    let table = load_csv(&cfg.data_path)?;
    let spec = split(&table, cfg.kind, cfg.model.input_len, cfg.horizon)?;
    let train_set = windows(&table, &spec, SplitName::Train)?;
    let val_set = windows(&table, &spec, SplitName::Val)?;
    let test_set = windows(&table, &spec, SplitName::Test)?;

    let model_cfg = cfg
        .model
        .to_model_config(table.n_vars, cfg.horizon, cfg.optim.seed);
    let model = Forecaster::init(model_cfg)?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write_file(&cfg.out_dir.join("resolved.cfg"), &cfg.resolved_dump())?;

    let started = Instant::now();
    let outcome = train(&model, &train_set, &val_set, &cfg.optim)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let (mse, mae) = eval_metrics(&model, &test_set, cfg.optim.batch_size)?;

    model.save(&cfg.out_dir.join("model.ckpt"))?;
    write_file(&cfg.out_dir.join("epochs.csv"), &epochs_csv(&outcome.log))?;
    write_file(
        &cfg.out_dir.join("metrics.json"),
        &metrics_json(mse, mae, outcome.epochs_run, train_seconds),
    )?;
    println!(
        "trained {} for {} epochs in {:.1}s: test mse {:.6}, mae {:.6} -> {}",
        model.config.variant.kind.name(),
        outcome.epochs_run,
        train_seconds,
        mse,
        mae,
        cfg.out_dir.display()
    );
    Ok(())
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub split: SplitName,
    pub kind: DatasetKind,
    pub export_preds: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model = Forecaster::load(&args.checkpoint)?;
    let table = load_csv(&args.data)?;
    if table.n_vars != model.config.n_vars {
        return Err(Error::Config(format!(
            "checkpoint expects {} variables, dataset has {}",
            model.config.n_vars, table.n_vars
        )));
    }
    let spec = split(&table, args.kind, model.config.input_len, model.config.horizon)?;
    let set = windows(&table, &spec, args.split)?;
    let (mse, mae) = eval_metrics(&model, &set, 32)?;
    println!("{}", metrics_json(mse, mae, 0, 0.0));

    if let Some(path) = &args.export_preds {
        let mut out = String::from("window");
        let (h, n) = (model.config.horizon, model.config.n_vars);
        for step in 0..h {
            for var in 0..n {
                out.push_str(&format!(",pred_h{step}_{}", table.columns[var]));
            }
        }
        for step in 0..h {
            for var in 0..n {
                out.push_str(&format!(",true_h{step}_{}", table.columns[var]));
            }
        }
        out.push('\n');
        for i in 0..set.count() {
            let (x, y) = set.batch(&[i]);
            let pred = no_grad(|| model.forward(&x))?;
            out.push_str(&format!("{i}"));
            for v in pred.to_vec() {
                out.push_str(&format!(",{v}"));
            }
            for v in y.to_vec() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        write_file(path, &out)?;
        println!("wrote {} prediction rows to {}", set.count(), path.display());
    }
    Ok(())
}

pub fn cmd_ablate(grid_path: &Path, workers: usize) -> Result<()> {
    let text = std::fs::read_to_string(grid_path).map_err(|e| Error::io(grid_path, e))?;
    let grid_cfg = GridConfig::parse(&text)?;
    for v in &grid_cfg.variants {
        v.validate()?;
    }

    // resolve every dataset up front
    let mut tables = Vec::new();
    for ds in &grid_cfg.datasets {
        let table = load_csv(&ds.path)?;
        tables.push((ds.name.clone(), table, ds.kind));
    }

    let mut settings = Vec::new();
    for ds in &grid_cfg.datasets {
        for &h in &grid_cfg.horizons {
            settings.push((ds.name.clone(), h));
        }
    }
    let grid = GridSpec {
        settings,
        variants: grid_cfg.variants.iter().map(|v| v.kind.name().to_string()).collect(),
        seeds: grid_cfg.seeds.clone(),
    };

    std::fs::create_dir_all(&grid_cfg.out_dir).map_err(|e| Error::io(&grid_cfg.out_dir, e))?;
    let store = RecordStore::new(grid_cfg.out_dir.join("records.jsonl"));

    let model_section = &grid_cfg.model;
    let optim_base = &grid_cfg.optim;
    let records = frwkv_core::harness::run_grid(&grid, &store, workers, |cell| {
        let (_, table, kind) = tables
            .iter()
            .find(|(name, _, _)| *name == cell.dataset)
            .expect("grid cell references a loaded dataset");
        let spec = split(table, *kind, model_section.input_len, cell.horizon)?;
        let train_set = windows(table, &spec, SplitName::Train)?;
        let val_set = windows(table, &spec, SplitName::Val)?;
        let test_set = windows(table, &spec, SplitName::Test)?;

        let mut model_cfg = model_section.to_model_config(table.n_vars, cell.horizon, cell.seed);
        model_cfg.variant = *grid_cfg
            .variants
            .iter()
            .find(|v| v.kind.name() == cell.variant)
            .expect("grid cell references a configured variant");
        let optim = OptimConfig {
            seed: cell.seed,
            ..optim_base.clone()
        };
        let config_hash = fnv1a_hex(&format!(
            "{}|{}|{}|{}|{:?}|{:?}",
            cell.dataset, cell.horizon, cell.variant, cell.seed, model_cfg, optim
        ));

        let model = Forecaster::init(model_cfg)?;
        let started = Instant::now();
        let outcome = train(&model, &train_set, &val_set, &optim)?;
        let (mse, mae) = eval_metrics(&model, &test_set, optim.batch_size)?;
        Ok(RunRecord {
            dataset: cell.dataset.clone(),
            horizon: cell.horizon,
            variant: cell.variant.clone(),
            seed: cell.seed,
            mse,
            mae,
            epochs_run: outcome.epochs_run,
            train_seconds: started.elapsed().as_secs_f64(),
            config_hash,
        })
    })?;

    write_report(&grid, &records, &grid_cfg.out_dir)?;
    println!(
        "ablation complete: {} records -> {}",
        records.len(),
        grid_cfg.out_dir.display()
    );
    Ok(())
}

fn write_report(grid: &GridSpec, records: &[RunRecord], out_dir: &Path) -> Result<()> {
    let analysis = analyze(grid, records)?;
    let text = render_text(&analysis);
    let (summary, per_dataset) = render_csv(&analysis);
    write_file(&out_dir.join("report.txt"), &text)?;
    write_file(&out_dir.join("summary.csv"), &summary)?;
    write_file(&out_dir.join("dataset_averages.csv"), &per_dataset)?;
    print!("{text}");
    Ok(())
}

/// Reconstruct the planned grid from a record set: the full cross product of
/// the observed settings, variants, and seeds.
fn grid_from_records(records: &[RunRecord]) -> GridSpec {
    let mut settings = Vec::new();
    let mut variants: Vec<String> = Vec::new();
    let mut seeds = Vec::new();
    for r in records {
        let setting = (r.dataset.clone(), r.horizon);
        if !settings.contains(&setting) {
            settings.push(setting);
        }
        if !variants.contains(&r.variant) {
            variants.push(r.variant.clone());
        }
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    settings.sort();
    seeds.sort_unstable();
    // registry order first, anything unknown after it alphabetically
    variants.sort_by_key(|name| {
        REGISTRY
            .iter()
            .position(|k| k.name() == name)
            .map_or_else(|| (1, name.clone()), |i| (0, format!("{i:02}")))
    });
    GridSpec {
        settings,
        variants,
        seeds,
    }
}

pub fn cmd_report(store_path: &Path, out_dir: &Path) -> Result<()> {
    let store = RecordStore::new(store_path);
    let (records, skipped) = store.load()?;
    if skipped > 0 {
        eprintln!("note: skipped {skipped} corrupt store lines");
    }
    if records.is_empty() {
        return Err(Error::Store(format!(
            "{} holds no records",
            store_path.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let grid = grid_from_records(&records);
    write_report(&grid, &records, out_dir)
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub vars: usize,
    pub len: usize,
    pub period: usize,
    pub noise: f64,
    pub jitter: f64,
    pub seed: u64,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let table = synth_periodic(args.vars, args.len, args.period, args.jitter, args.noise, args.seed);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    write_csv(&table, &args.out)?;
    println!(
        "wrote {} rows x {} vars (period {}, noise {}) to {}",
        args.len,
        args.vars,
        args.period,
        args.noise,
        args.out.display()
    );
    Ok(())
}
