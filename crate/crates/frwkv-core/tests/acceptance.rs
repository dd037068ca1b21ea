//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers. Run with
//! `cargo test --test acceptance -- --nocapture` to see the details.

use frwkv_core::data::{split, synth_periodic, windows, DatasetKind, SeriesTable, SplitName};
use frwkv_core::fft::{bin_count, irfft_time, rfft_time, Spectrum};
use frwkv_core::gates::{self, BranchContexts, GateParams};
use frwkv_core::gradcheck::GradCheck;
use frwkv_core::harness::{analyze, GridSpec, RunRecord};
use frwkv_core::model::{Forecaster, ModelConfig};
use frwkv_core::nn::Mlp2;
use frwkv_core::tensor::{no_grad, Tensor};
use frwkv_core::train::{
    eval_metrics, horizon_weights, mse_mae, repeat_last_metrics, train, weighted_l1_loss,
    EarlyStop, OptimConfig,
};
use frwkv_core::variant::{GateStrategy, Variant, VariantKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn toy_config(kind: VariantKind) -> ModelConfig {
    // B=2, T=8, H=4, N=2, D=4, hidden=8, heads=1, layers=1, P=4, R=2
    let mut cfg = ModelConfig::toy(kind);
    cfg.input_len = 8;
    cfg.horizon = 4;
    cfg.n_vars = 2;
    cfg.embed_dim = 4;
    cfg.hidden = 8;
    cfg.heads = 1;
    cfg.layers = 1;
    cfg.period_len = 4;
    cfg.routers = 2;
    cfg
}

#[test]
fn c01_fft_against_naive_dft() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let lengths = [7usize, 8, 16, 96];
    let mut max_fwd: f64 = 0.0;
    let mut max_round: f64 = 0.0;
    for i in 0..100 {
        let t = lengths[i % lengths.len()];
        let x: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let tensor = Tensor::new(x.clone(), &[1, 1, t, 1]);
        let spec = rfft_time(&tensor);
        let (re, im) = (spec.real.to_vec(), spec.imag.to_vec());

        // independent O(T^2) oracle
        for k in 0..bin_count(t) {
            let mut re_o = 0.0;
            let mut im_o = 0.0;
            for (n, &v) in x.iter().enumerate() {
                let theta = 2.0 * std::f64::consts::PI * (k * n) as f64 / t as f64;
                re_o += v * theta.cos();
                im_o -= v * theta.sin();
            }
            max_fwd = max_fwd.max((re[k] - re_o).abs()).max((im[k] - im_o).abs());
        }

        let back = irfft_time(&spec).to_vec();
        for (a, b) in back.iter().zip(&x) {
            max_round = max_round.max((a - b).abs());
        }

        // irfft agrees with the naive synthesis formula on a random spectrum
        let f = bin_count(t);
        let mut zr: Vec<f64> = (0..f).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut zi: Vec<f64> = (0..f).map(|_| rng.gen_range(-2.0..2.0)).collect();
        zi[0] = 0.0;
        if t % 2 == 0 {
            zi[f - 1] = 0.0;
        }
        let synth = irfft_time(&Spectrum {
            real: Tensor::new(zr.clone(), &[1, 1, 1, f]),
            imag: Tensor::new(zi.clone(), &[1, 1, 1, f]),
            original_len: t,
        })
        .to_vec();
        zr.resize(f, 0.0);
        for (n, got) in synth.iter().enumerate() {
            let mut want = 0.0;
            for k in 0..f {
                let weight = if k == 0 || (t % 2 == 0 && k == f - 1) { 1.0 } else { 2.0 };
                let theta = 2.0 * std::f64::consts::PI * (k * n) as f64 / t as f64;
                want += weight * (zr[k] * theta.cos() - zi[k] * theta.sin());
            }
            want /= t as f64;
            max_fwd = max_fwd.max((got - want).abs());
        }
    }
    assert!(max_fwd < 1e-9, "DFT disagreement {max_fwd}");
    assert!(max_round < 1e-9, "roundtrip error {max_round}");
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 5.0, "FFT oracle took {secs:.2}s (budget 5s)");
    println!("ACCEPTANCE fft_oracle: PASS (fwd err {max_fwd:.2e}, roundtrip {max_round:.2e}, {secs:.2}s)");
}

#[test]
fn c02_full_model_gradient_suite() {
    let started = Instant::now();
    let model = Forecaster::init(toy_config(VariantKind::FrwkvPlus)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let x = Tensor::new(
        (0..2 * 8 * 2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        &[2, 8, 2],
    );
    let target = Tensor::new(
        (0..2 * 4 * 2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        &[2, 4, 2],
    );
    let params = model.params();
    let total: usize = params.iter().map(|p| p.tensor.numel()).sum();
    let refs: Vec<(&str, &Tensor)> = params.iter().map(|p| (p.name.as_str(), &p.tensor)).collect();
    let check = GradCheck::default(); // step 1e-5, rel 1e-4
    let bad = check.check(&refs, || {
        model.forward(&x).unwrap().sub(&target).square().mean_all()
    });
    assert!(
        bad.is_empty(),
        "{} of {total} parameter gradients disagree; first: {}",
        bad.len(),
        bad[0]
    );
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 120.0, "gradient suite took {secs:.1}s (budget 120s)");
    println!("ACCEPTANCE gradient_suite: PASS ({total} parameters checked, {secs:.1}s)");
}

/// The plus-model composition with the base gates forced to zero; combined
/// with alpha = 0 parameter surgery this must reproduce plain FRWKV.
struct ForcedZeroBase;

impl GateStrategy for ForcedZeroBase {
    fn name(&self) -> &'static str {
        "frwkv_plus_zero_base"
    }
    fn kind(&self) -> VariantKind {
        VariantKind::FrwkvPlus
    }
    fn wants_periodic_context(&self) -> bool {
        true
    }
    fn gates(&self, params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor) {
        let zero = Tensor::zeros(ctx.real.shape());
        let c_pos = ctx.periodic_or_zeros();
        let delta = gates::deltas(params, &ctx.real, &ctx.imag, &c_pos, false, false);
        let trust = gates::trust(params, &ctx.real, &ctx.imag, &c_pos, false);
        gates::final_gates(
            VariantKind::FrwkvPlus,
            (&zero, &zero),
            (&delta.0, &delta.1),
            (&trust.0, &trust.1),
            params.alpha.as_ref().expect("plus variant carries alpha"),
        )
    }
}

#[test]
fn c03_zero_init_equivalence() {
    let started = Instant::now();
    let plus = Forecaster::init(toy_config(VariantKind::FrwkvPlus)).unwrap();
    let gate = plus.with_variant(Variant::new(VariantKind::CrossBranchGate)).unwrap();
    let frwkv = plus.with_variant(Variant::new(VariantKind::Frwkv)).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut max_gate_diff: f64 = 0.0;
    let mut max_frwkv_diff: f64 = 0.0;
    for _ in 0..8 {
        let x = Tensor::new(
            (0..2 * 8 * 2).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            &[2, 8, 2],
        );
        // at init the correction MLPs are exactly zero, so plus == gate
        let y_plus = no_grad(|| plus.forward(&x)).unwrap().to_vec();
        let y_gate = no_grad(|| gate.forward(&x)).unwrap().to_vec();
        for (a, b) in y_plus.iter().zip(&y_gate) {
            max_gate_diff = max_gate_diff.max((a - b).abs());
        }

        // base gates forced to zero and alpha = 0: plus == frwkv
        let alpha = plus.gates.alpha.as_ref().unwrap();
        let saved = alpha.to_vec();
        alpha.data_mut()[0] = 0.0;
        let y_surgery = no_grad(|| plus.forward_with_strategy(&x, &ForcedZeroBase))
            .unwrap()
            .to_vec();
        alpha.data_mut().copy_from_slice(&saved);
        let y_frwkv = no_grad(|| frwkv.forward(&x)).unwrap().to_vec();
        for (a, b) in y_surgery.iter().zip(&y_frwkv) {
            max_frwkv_diff = max_frwkv_diff.max((a - b).abs());
        }
    }
    assert!(max_gate_diff < 1e-12, "plus vs branch-gate diff {max_gate_diff}");
    assert!(max_frwkv_diff < 1e-12, "surgery vs frwkv diff {max_frwkv_diff}");
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "equivalence check took {secs:.2}s (budget 10s)");
    println!(
        "ACCEPTANCE zero_init_equivalence: PASS (gate diff {max_gate_diff:.2e}, frwkv diff {max_frwkv_diff:.2e}, {secs:.2}s)"
    );
}

#[test]
fn c04_range_invariants_on_random_draws() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let d = 4;
    let draws = 10_000;
    // random (non-zero-init) gate parameters so every path is exercised
    let mut params = GateParams::init(&mut rng, d, VariantKind::FrwkvPlus, 0.0, -3.0);
    params.delta_i2r = Some(Mlp2::init(&mut rng, 2 * d, d, d));
    params.delta_r2i = Some(Mlp2::init(&mut rng, 2 * d, d, d));
    params.alpha.as_ref().unwrap().data_mut()[0] = rng.gen_range(-1.0..1.0);

    let mk = |rng: &mut ChaCha8Rng| {
        Tensor::new(
            (0..draws * d).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            &[draws, 1, d],
        )
    };
    let (c_r, c_i, c_pos) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
    let (g0_a, g0_b) = gates::base_gates(&params, &c_r, &c_i);
    let (d_a, d_b) = gates::deltas(&params, &c_r, &c_i, &c_pos, false, false);
    let (t_a, t_b) = gates::trust(&params, &c_r, &c_i, &c_pos, false);
    let alpha = gates::clipped_alpha(params.alpha.as_ref().unwrap()).item();
    let (gate_a, gate_b) = gates::final_gates(
        VariantKind::FrwkvPlus,
        (&g0_a, &g0_b),
        (&d_a, &d_b),
        (&t_a, &t_b),
        params.alpha.as_ref().unwrap(),
    );

    for v in g0_a.to_vec().iter().chain(g0_b.to_vec().iter()) {
        assert!(*v > 0.0 && *v < 1.0, "base gate {v} outside (0,1)");
    }
    for v in t_a.to_vec().iter().chain(t_b.to_vec().iter()) {
        assert!(*v > 0.0 && *v < 1.0, "trust {v} outside (0,1)");
    }
    for v in d_a.to_vec().iter().chain(d_b.to_vec().iter()) {
        assert!(*v > -1.0 && *v < 1.0, "delta {v} outside (-1,1)");
    }
    assert!((0.0..=0.20).contains(&alpha), "clip(alpha) = {alpha}");
    for v in gate_a.to_vec().iter().chain(gate_b.to_vec().iter()) {
        assert!(*v > 0.8 && *v < 2.2, "final gate {v} outside (0.8, 2.2)");
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "range sweep took {secs:.2}s (budget 10s)");
    println!("ACCEPTANCE range_invariants: PASS ({draws} draws, clip(alpha) = {alpha:.3}, {secs:.2}s)");
}

#[test]
fn c05_trust_bias_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let params = GateParams::init(&mut rng, 5, VariantKind::FrwkvPlus, 0.05, -4.0);
    let zero = Tensor::zeros(&[3, 2, 5]);
    let (t_r, t_i) = gates::trust(&params, &zero, &zero, &zero, false);
    let want = 0.017986209962091555; // sigma(-4)
    let mut max_diff: f64 = 0.0;
    for v in t_r.to_vec().iter().chain(t_i.to_vec().iter()) {
        max_diff = max_diff.max((v - want).abs());
    }
    assert!(max_diff < 1e-9, "trust at zero context off by {max_diff}");
    println!("ACCEPTANCE trust_bias: PASS (sigma(-4) reproduced within {max_diff:.2e})");
}

#[test]
fn c06_loss_weights_and_mae_reduction() {
    for h in [1usize, 4, 12, 96] {
        let w = horizon_weights(h, 0.5);
        for (t, wt) in w.iter().enumerate() {
            let exact = ((t + 1) as f64).powf(-0.5);
            assert_eq!(*wt, exact, "weight at t={t} is not (t+1)^-0.5 exactly");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_diff: f64 = 0.0;
    for _ in 0..20 {
        let pred = Tensor::new((0..30).map(|_| rng.gen_range(-4.0..4.0)).collect(), &[2, 5, 3]);
        let target = Tensor::new((0..30).map(|_| rng.gen_range(-4.0..4.0)).collect(), &[2, 5, 3]);
        let l1 = weighted_l1_loss(&pred, &target, 0.0).item();
        let (_, mae) = mse_mae(&pred, &target);
        max_diff = max_diff.max((l1 - mae).abs());
    }
    assert!(max_diff < 1e-12, "alpha=0 loss vs MAE diff {max_diff}");
    println!("ACCEPTANCE loss_weights: PASS (exact weights; alpha=0 matches MAE within {max_diff:.2e})");
}

#[test]
fn c07_early_stopping_trace() {
    let mut stopper = EarlyStop::new(30, 5);
    let mut stopped_at = None;
    for epoch in 1..=30 {
        let (_, stop) = stopper.update(epoch, 1.0);
        if stop {
            stopped_at = Some(epoch);
            break;
        }
    }
    assert_eq!(stopped_at, Some(15), "flat losses must stop exactly at epoch 15");
    println!("ACCEPTANCE early_stopping: PASS (flat trace stopped at epoch 15)");
}

fn sanity_model_config(seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::toy(VariantKind::FrwkvPlus);
    cfg.input_len = 48;
    cfg.horizon = 12;
    cfg.n_vars = 2;
    cfg.embed_dim = 4;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.period_len = 24;
    cfg.routers = 2;
    cfg.seed = seed;
    cfg
}

fn sanity_optim(seed: u64, epochs: usize) -> OptimConfig {
    OptimConfig {
        lr: 3e-3,
        epochs_max: epochs,
        patience: epochs,
        batch_size: 32,
        seed,
        ..OptimConfig::default()
    }
}

#[test]
fn c08_learning_sanity_beats_repeat_last() {
    let started = Instant::now();
    let mut results = Vec::new();
    for seed in [2024u64, 2025, 2026] {
        let table = synth_periodic(2, 480, 24, 1.0, 0.05, seed);
        let spec = split(&table, DatasetKind::Ratio, 48, 12).unwrap();
        let train_set = windows(&table, &spec, SplitName::Train).unwrap();
        let val_set = windows(&table, &spec, SplitName::Val).unwrap();
        let test_set = windows(&table, &spec, SplitName::Test).unwrap();

        let model = Forecaster::init(sanity_model_config(seed)).unwrap();
        let outcome = train(&model, &train_set, &val_set, &sanity_optim(seed, 50)).unwrap();
        assert!(outcome.epochs_run <= 50);

        let (model_mse, _) = eval_metrics(&model, &test_set, 32).unwrap();
        let (baseline_mse, _) = repeat_last_metrics(&test_set);
        let improvement = 1.0 - model_mse / baseline_mse;
        assert!(
            improvement >= 0.20,
            "seed {seed}: model {model_mse:.4} vs baseline {baseline_mse:.4} ({:.0}% better, need 20%)",
            improvement * 100.0
        );
        results.push((seed, model_mse, baseline_mse, improvement));
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 300.0, "learning sanity took {secs:.0}s (budget 300s)");
    let detail: Vec<String> = results
        .iter()
        .map(|(s, m, b, i)| format!("seed {s}: {m:.3} vs {b:.3} ({:.0}%)", i * 100.0))
        .collect();
    println!("ACCEPTANCE learning_sanity: PASS 3/3 ({}; {secs:.0}s)", detail.join("; "));
}

fn run_variant(table: &SeriesTable, kind: VariantKind, seed: u64, epochs: usize) -> f64 {
    let spec = split(table, DatasetKind::Ratio, 48, 12).unwrap();
    let train_set = windows(table, &spec, SplitName::Train).unwrap();
    let val_set = windows(table, &spec, SplitName::Val).unwrap();
    let test_set = windows(table, &spec, SplitName::Test).unwrap();
    let mut cfg = sanity_model_config(seed);
    cfg.variant = Variant::new(kind);
    // correction strength and trust bias from the top of the recipe ranges,
    // so the mechanism has visible influence at this tiny scale
    cfg.alpha_init = 0.10;
    cfg.trust_bias_init = -2.0;
    let model = Forecaster::init(cfg).unwrap();
    train(&model, &train_set, &val_set, &sanity_optim(seed, epochs)).unwrap();
    let (mse, _) = eval_metrics(&model, &test_set, 32).unwrap();
    mse
}

/// Run matched (plus, gate) cells per seed; single-threaded on purpose so
/// this long criterion does not starve whatever the test harness schedules
/// beside it.
fn run_matched_pairs(
    make_table: impl Fn(u64) -> SeriesTable,
    seeds: &[u64],
    epochs: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut plus = Vec::new();
    let mut gate = Vec::new();
    for &seed in seeds {
        let table = make_table(seed);
        plus.push(run_variant(&table, VariantKind::FrwkvPlus, seed, epochs));
        gate.push(run_variant(&table, VariantKind::CrossBranchGate, seed, epochs));
    }
    (plus, gate)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    (mean, var.sqrt())
}

fn pure_noise_table(total_t: usize, n_vars: usize, seed: u64) -> SeriesTable {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let values: Vec<f64> = (0..total_t * n_vars).map(|_| normal.sample(&mut rng)).collect();
    let columns = (0..n_vars).map(|j| format!("var{j}")).collect();
    SeriesTable::new(columns, values, None)
}

#[test]
fn c09_selective_correction_direction() {
    let started = Instant::now();
    let seeds = [2024u64, 2025, 2026, 2027, 2028];

    // strongly periodic regime: matched seeds, plus vs branch-gate
    let (plus_periodic, gate_periodic) = run_matched_pairs(
        |seed| synth_periodic(2, 480, 24, 1.0, 0.03, 9000 + seed),
        &seeds,
        40,
    );
    let (plus_mean, plus_std) = mean_std(&plus_periodic);
    let (gate_mean, gate_std) = mean_std(&gate_periodic);
    assert!(
        plus_mean <= gate_mean,
        "periodic regime: plus {plus_mean:.6} +- {plus_std:.6} vs gate {gate_mean:.6} +- {gate_std:.6}\nplus {plus_periodic:.6?}\ngate {gate_periodic:.6?}"
    );

    // pure-noise regime: the two must be statistically indistinguishable
    let (plus_noise, gate_noise) =
        run_matched_pairs(|seed| pure_noise_table(480, 2, 7000 + seed), &seeds, 15);
    let (pn_mean, pn_std) = mean_std(&plus_noise);
    let (gn_mean, gn_std) = mean_std(&gate_noise);
    let overlap = (pn_mean - pn_std).max(gn_mean - gn_std) <= (pn_mean + pn_std).min(gn_mean + gn_std);
    assert!(
        overlap,
        "noise regime: non-overlapping bands plus {pn_mean:.5} +- {pn_std:.5} vs gate {gn_mean:.5} +- {gn_std:.5}"
    );

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 900.0, "direction check took {secs:.0}s (budget 900s)");
    println!(
        "ACCEPTANCE selective_correction: PASS (periodic: plus {plus_mean:.6} <= gate {gate_mean:.6}, paired wins {}/{}; noise bands overlap: {pn_mean:.4}+-{pn_std:.4} vs {gn_mean:.4}+-{gn_std:.4}; {secs:.0}s)",
        plus_periodic
            .iter()
            .zip(&gate_periodic)
            .filter(|(p, g)| p <= g)
            .count(),
        seeds.len()
    );
}

#[test]
fn c10_harness_analytics_hand_fixture() {
    // 3 variants x 4 settings x 2 seeds, with one exact MSE tie.
    let grid = GridSpec {
        settings: vec![
            ("dA".into(), 1),
            ("dA".into(), 2),
            ("dB".into(), 1),
            ("dB".into(), 2),
        ],
        variants: vec!["a".into(), "b".into(), "c".into()],
        seeds: vec![1, 2],
    };
    // per-setting seed-mean MSE (exact binary fractions; seeds at +-0.125):
    //   (dA,1): a 0.25, b 0.50, c 0.75      -> a wins
    //   (dA,2): a 0.50, b 0.50, c 1.00      -> a/b tie, 0.5 each
    //   (dB,1): b 0.25, c 0.50, a 0.75      -> b wins
    //   (dB,2): c 0.25, b 0.50, a 0.75      -> c wins
    // per-setting seed-mean MAE: b 0.25, a 0.50, c 0.75 everywhere.
    let mse_table: &[(&str, usize, &str, f64)] = &[
        ("dA", 1, "a", 0.25), ("dA", 1, "b", 0.50), ("dA", 1, "c", 0.75),
        ("dA", 2, "a", 0.50), ("dA", 2, "b", 0.50), ("dA", 2, "c", 1.00),
        ("dB", 1, "a", 0.75), ("dB", 1, "b", 0.25), ("dB", 1, "c", 0.50),
        ("dB", 2, "a", 0.75), ("dB", 2, "b", 0.50), ("dB", 2, "c", 0.25),
    ];
    let mut records = Vec::new();
    for (dataset, horizon, variant, mse_mean) in mse_table {
        let mae_mean = match *variant {
            "a" => 0.50,
            "b" => 0.25,
            _ => 0.75,
        };
        for (seed, offset) in [(1u64, -0.125), (2u64, 0.125)] {
            records.push(RunRecord {
                dataset: dataset.to_string(),
                horizon: *horizon,
                variant: variant.to_string(),
                seed,
                mse: mse_mean + offset,
                mae: mae_mean + offset,
                epochs_run: 1,
                train_seconds: 0.0,
                config_hash: "fixture".into(),
            });
        }
    }

    let analysis = analyze(&grid, &records).unwrap();
    // winner counts, including the fractional tie split
    assert_eq!(analysis.winners_mse, vec![("a".into(), 1.5), ("b".into(), 1.5), ("c".into(), 1.0)]);
    assert_eq!(analysis.winners_mae, vec![("a".into(), 0.0), ("b".into(), 4.0), ("c".into(), 0.0)]);
    // average ranks: a (1 + 1.5 + 3 + 3)/4, b (2 + 1.5 + 1 + 2)/4, c (3 + 3 + 2 + 1)/4
    assert_eq!(analysis.ranks_mse, vec![("a".into(), 2.125), ("b".into(), 1.625), ("c".into(), 2.25)]);
    assert_eq!(analysis.ranks_mae, vec![("a".into(), 2.0), ("b".into(), 1.0), ("c".into(), 3.0)]);
    // dataset-level averages (seed mean, equal-weight horizons)
    let avg = |dataset: &str, variant: &str| {
        analysis
            .dataset_avgs
            .iter()
            .find(|r| r.dataset == dataset && r.variant == variant)
            .unwrap()
    };
    assert_eq!(avg("dA", "a").mse, 0.375);
    assert_eq!(avg("dA", "b").mse, 0.50);
    assert_eq!(avg("dA", "c").mse, 0.875);
    assert_eq!(avg("dB", "a").mse, 0.75);
    assert_eq!(avg("dB", "b").mse, 0.375);
    assert_eq!(avg("dB", "c").mse, 0.375);
    assert_eq!(avg("dA", "b").mae, 0.25);
    println!("ACCEPTANCE harness_analytics: PASS (wins, ranks, and averages match hand computation)");
}

#[test]
fn c11_full_recipe_parameter_count() {
    let plus_cfg = ModelConfig::full_recipe(VariantKind::FrwkvPlus, 96, 96, 7);
    let plus = Forecaster::init(plus_cfg).unwrap();
    let plus_count = plus.param_count();

    let gate_cfg = ModelConfig::full_recipe(VariantKind::CrossBranchGate, 96, 96, 7);
    let gate_count = gate_cfg.expected_param_count();

    let reference = 14_370_000.0;
    let rel = (plus_count as f64 - reference).abs() / reference;
    assert!(
        rel <= 0.05,
        "full recipe has {plus_count} parameters, {:.1}% from 14.37M",
        rel * 100.0
    );
    let overhead = plus_count as isize - gate_count as isize;
    assert!(
        overhead >= 0 && overhead <= 50_000,
        "correction path adds {overhead} parameters (budget 50k)"
    );
    println!(
        "ACCEPTANCE parameter_count: PASS ({plus_count} params, {:.2}% from 14.37M; +{overhead} over branch-gate)",
        rel * 100.0
    );
}

/// Full-scale single-seed smoke run; needs the real ETTh2 benchmark CSV and
/// hours of CPU, so it never gates the suite.
#[test]
#[ignore = "full-scale run: set FRWKV_ETTH2_CSV to the ETTh2.csv path and allow several hours"]
fn c12_optional_etth2_full_recipe() {
    let path = std::env::var("FRWKV_ETTH2_CSV").expect("FRWKV_ETTH2_CSV not set");
    let table = frwkv_core::data::load_csv(std::path::Path::new(&path)).unwrap();
    let spec = split(&table, DatasetKind::EttHour, 96, 96).unwrap();
    let train_set = windows(&table, &spec, SplitName::Train).unwrap();
    let val_set = windows(&table, &spec, SplitName::Val).unwrap();
    let test_set = windows(&table, &spec, SplitName::Test).unwrap();

    let mut cfg = ModelConfig::full_recipe(VariantKind::FrwkvPlus, 96, 96, table.n_vars);
    cfg.seed = 2024;
    let model = Forecaster::init(cfg).unwrap();
    let optim = OptimConfig {
        epochs_max: 30,
        patience: 8,
        seed: 2024,
        ..OptimConfig::default()
    };
    train(&model, &train_set, &val_set, &optim).unwrap();
    let (mse, mae) = eval_metrics(&model, &test_set, 32).unwrap();
    assert!(mse <= 0.45, "ETTh2-96 test MSE {mse} above the 0.45 sanity bound");
    println!("ACCEPTANCE etth2_full_recipe: PASS (mse {mse:.4}, mae {mae:.4})");
}
