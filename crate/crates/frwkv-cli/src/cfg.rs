//! Sectioned key-value config files: strict parsing (unknown or duplicate
//! keys are errors) and a resolved dump that records every default actually
//! used, so a run can be reproduced from its artifacts alone.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use frwkv_core::data::DatasetKind;
use frwkv_core::error::{Error, Result};
use frwkv_core::model::ModelConfig;
use frwkv_core::revin::ProjectionMethod;
use frwkv_core::train::OptimConfig;
use frwkv_core::variant::{lookup, known_names, Variant, VariantFlags};

/// One parsed `[section]` with take-or-default access; leftovers are errors.
pub struct SectionView {
    name: String,
    entries: BTreeMap<String, String>,
}

impl SectionView {
    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take_parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!(
                    "[{}] {key} = {raw:?} cannot be parsed as {}",
                    self.name,
                    std::any::type_name::<T>()
                ))
            }),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take_parse(key)?
            .ok_or_else(|| Error::Config(format!("[{}] is missing required key {key}", self.name)))
    }

    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config(format!(
                "[{}] has unknown key {key:?}",
                self.name
            )));
        }
        Ok(())
    }
}

/// Parse `[section]` / `key = value` text. Comments start with '#'.
pub fn parse_sections(text: &str) -> Result<BTreeMap<String, SectionView>> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Config(format!("line {}: malformed section header {line:?}", lineno + 1)));
            }
            let name = line[1..line.len() - 1].trim().to_string();
            if sections.contains_key(&name) {
                return Err(Error::Config(format!("line {}: duplicate section [{name}]", lineno + 1)));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1)));
        };
        let Some(section) = &current else {
            return Err(Error::Config(format!("line {}: key outside any [section]", lineno + 1)));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let entries = sections.get_mut(section).unwrap();
        if entries.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key:?} in [{section}]",
                lineno + 1
            )));
        }
    }
    Ok(sections
        .into_iter()
        .map(|(name, entries)| {
            (
                name.clone(),
                SectionView {
                    name,
                    entries,
                },
            )
        })
        .collect())
}

fn parse_bool(section: &str, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("[{section}] {key} = {other:?} is not a bool"))),
    }
}

/// The `[model]` block: everything the architecture needs except the
/// variable count (taken from the data) and per-cell overrides.
#[derive(Clone, Debug)]
pub struct ModelSection {
    pub variant: Variant,
    pub input_len: usize,
    pub horizon: Option<usize>,
    pub embed_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: Option<usize>,
    pub period_len: usize,
    pub routers: usize,
    pub alpha_init: f64,
    pub trust_bias_init: f64,
    pub projection: ProjectionMethod,
    pub revin_affine: bool,
    pub patch_len: Option<usize>,
    pub patch_stride: Option<usize>,
}

impl ModelSection {
    pub fn parse(mut section: SectionView) -> Result<ModelSection> {
        let variant_name = section.take("variant").unwrap_or_else(|| "frwkv_plus".into());
        let kind = lookup(&variant_name).ok_or_else(|| {
            Error::Config(format!(
                "unknown variant {variant_name:?}; known: {}",
                known_names().join(", ")
            ))
        })?;
        let mut flags = VariantFlags::default();
        if let Some(raw) = section.take("zero_periodic_context") {
            flags.zero_periodic_context = parse_bool("model", "zero_periodic_context", &raw)?;
        }
        if let Some(raw) = section.take("positive_only_delta") {
            flags.positive_only_delta = parse_bool("model", "positive_only_delta", &raw)?;
        }
        if let Some(raw) = section.take("fixed_trust") {
            flags.fixed_trust = parse_bool("model", "fixed_trust", &raw)?;
        }
        let projection = match section.take("projection").as_deref() {
            None | Some("mean_embed") => ProjectionMethod::MeanEmbed,
            Some("flatten") => ProjectionMethod::Flatten,
            Some(other) => {
                return Err(Error::Config(format!(
                    "[model] projection = {other:?} (expected mean_embed or flatten)"
                )))
            }
        };
        let revin_affine = match section.take("revin_affine") {
            None => true,
            Some(raw) => parse_bool("model", "revin_affine", &raw)?,
        };
        let out = ModelSection {
            variant: Variant { kind, flags },
            input_len: section.require("input_len")?,
            horizon: section.take_parse("horizon")?,
            embed_dim: section.take_parse("embed_dim")?.unwrap_or(16),
            hidden: section.take_parse("hidden")?.unwrap_or(512),
            heads: section.take_parse("heads")?.unwrap_or(8),
            layers: section.take_parse("layers")?.unwrap_or(2),
            ff_dim: section.take_parse("ff_dim")?,
            period_len: section.take_parse("period_len")?.unwrap_or(24),
            routers: section.take_parse("routers")?.unwrap_or(8),
            alpha_init: section.take_parse("alpha_init")?.unwrap_or(0.05),
            trust_bias_init: section.take_parse("trust_bias_init")?.unwrap_or(-4.0),
            projection,
            revin_affine,
            patch_len: section.take_parse("patch_len")?,
            patch_stride: section.take_parse("patch_stride")?,
        };
        section.finish()?;
        Ok(out)
    }

    pub fn to_model_config(&self, n_vars: usize, horizon: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            input_len: self.input_len,
            horizon,
            n_vars,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            heads: self.heads,
            layers: self.layers,
            ff_dim: self.ff_dim,
            period_len: self.period_len,
            routers: self.routers,
            alpha_init: self.alpha_init,
            trust_bias_init: self.trust_bias_init,
            projection: self.projection,
            revin_affine: self.revin_affine,
            seed,
            patch_len: self.patch_len,
            patch_stride: self.patch_stride,
        }
    }

    fn dump(&self, out: &mut String, horizon: usize) {
        out.push_str("[model]\n");
        out.push_str(&format!("variant = {}\n", self.variant.kind.name()));
        let flags = self.variant.flags;
        out.push_str(&format!("zero_periodic_context = {}\n", flags.zero_periodic_context));
        out.push_str(&format!("positive_only_delta = {}\n", flags.positive_only_delta));
        out.push_str(&format!("fixed_trust = {}\n", flags.fixed_trust));
        out.push_str(&format!("input_len = {}\n", self.input_len));
        out.push_str(&format!("horizon = {horizon}\n"));
        out.push_str(&format!("embed_dim = {}\n", self.embed_dim));
        out.push_str(&format!("hidden = {}\n", self.hidden));
        out.push_str(&format!("heads = {}\n", self.heads));
        out.push_str(&format!("layers = {}\n", self.layers));
        if let Some(ff) = self.ff_dim {
            out.push_str(&format!("ff_dim = {ff}\n"));
        }
        out.push_str(&format!("period_len = {}\n", self.period_len));
        out.push_str(&format!("routers = {}\n", self.routers));
        out.push_str(&format!("alpha_init = {}\n", self.alpha_init));
        out.push_str(&format!("trust_bias_init = {}\n", self.trust_bias_init));
        out.push_str(&format!(
            "projection = {}\n",
            match self.projection {
                ProjectionMethod::MeanEmbed => "mean_embed",
                ProjectionMethod::Flatten => "flatten",
            }
        ));
        out.push_str(&format!("revin_affine = {}\n", self.revin_affine));
        if let Some(p) = self.patch_len {
            out.push_str(&format!("patch_len = {p}\n"));
        }
        if let Some(p) = self.patch_stride {
            out.push_str(&format!("patch_stride = {p}\n"));
        }
    }
}

fn parse_train(mut section: SectionView) -> Result<OptimConfig> {
    let defaults = OptimConfig::default();
    let out = OptimConfig {
        lr: section.take_parse("lr")?.unwrap_or(defaults.lr),
        weight_decay: section
            .take_parse("weight_decay")?
            .unwrap_or(defaults.weight_decay),
        beta1: section.take_parse("beta1")?.unwrap_or(defaults.beta1),
        beta2: section.take_parse("beta2")?.unwrap_or(defaults.beta2),
        eps: section.take_parse("eps")?.unwrap_or(defaults.eps),
        epochs_max: section.take_parse("epochs_max")?.unwrap_or(defaults.epochs_max),
        patience: section.take_parse("patience")?.unwrap_or(defaults.patience),
        batch_size: section.take_parse("batch_size")?.unwrap_or(defaults.batch_size),
        loss_alpha: section.take_parse("loss_alpha")?.unwrap_or(defaults.loss_alpha),
        seed: section.take_parse("seed")?.unwrap_or(defaults.seed),
    };
    section.finish()?;
    out.validate()?;
    Ok(out)
}

fn dump_train(cfg: &OptimConfig, out: &mut String) {
    out.push_str("[train]\n");
    out.push_str(&format!("lr = {}\n", cfg.lr));
    out.push_str(&format!("weight_decay = {}\n", cfg.weight_decay));
    out.push_str(&format!("beta1 = {}\n", cfg.beta1));
    out.push_str(&format!("beta2 = {}\n", cfg.beta2));
    out.push_str(&format!("eps = {}\n", cfg.eps));
    out.push_str(&format!("epochs_max = {}\n", cfg.epochs_max));
    out.push_str(&format!("patience = {}\n", cfg.patience));
    out.push_str(&format!("batch_size = {}\n", cfg.batch_size));
    out.push_str(&format!("loss_alpha = {}\n", cfg.loss_alpha));
    out.push_str(&format!("seed = {}\n", cfg.seed));
}

/// Resolve the output directory against FRWKV_OUT_ROOT when relative.
pub fn resolve_out_dir(dir: &str) -> PathBuf {
    let path = PathBuf::from(dir);
    if path.is_absolute() {
        return path;
    }
    match std::env::var("FRWKV_OUT_ROOT") {
        Ok(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path,
    }
}

/// A full training-run config file.
#[derive(Debug)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub kind: DatasetKind,
    pub model: ModelSection,
    pub horizon: usize,
    pub optim: OptimConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut sections = parse_sections(text)?;
        let mut data = sections
            .remove("data")
            .ok_or_else(|| Error::Config("missing [data] section".into()))?;
        let data_path = PathBuf::from(data.require::<String>("path")?);
        let kind = DatasetKind::parse(&data.take("kind").unwrap_or_else(|| "ratio".into()))?;
        data.finish()?;

        let model = ModelSection::parse(
            sections
                .remove("model")
                .ok_or_else(|| Error::Config("missing [model] section".into()))?,
        )?;
        let horizon = model
            .horizon
            .ok_or_else(|| Error::Config("[model] is missing required key horizon".into()))?;

        let optim = match sections.remove("train") {
            Some(section) => parse_train(section)?,
            None => OptimConfig::default(),
        };

        let out_dir = match sections.remove("out") {
            Some(mut section) => {
                let dir = section.require::<String>("dir")?;
                section.finish()?;
                resolve_out_dir(&dir)
            }
            None => resolve_out_dir("runs/run"),
        };

        if let Some(name) = sections.keys().next() {
            return Err(Error::Config(format!("unknown section [{name}]")));
        }
        Ok(RunConfig {
            data_path,
            kind,
            model,
            horizon,
            optim,
            out_dir,
        })
    }

    /// Every value in effect, defaults included; parses back to the same run.
    pub fn resolved_dump(&self) -> String {
        let mut out = String::new();
        out.push_str("[data]\n");
        out.push_str(&format!("path = {}\n", self.data_path.display()));
        out.push_str(&format!("kind = {}\n", self.kind.name()));
        self.model.dump(&mut out, self.horizon);
        dump_train(&self.optim, &mut out);
        out.push_str("[out]\n");
        out.push_str(&format!("dir = {}\n", self.out_dir.display()));
        out
    }
}

/// One dataset entry of a grid file: `name:path:kind`.
#[derive(Clone, Debug)]
pub struct GridDataset {
    pub name: String,
    pub path: PathBuf,
    pub kind: DatasetKind,
}

/// A family-ablation grid file.
pub struct GridConfig {
    pub datasets: Vec<GridDataset>,
    pub horizons: Vec<usize>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub model: ModelSection,
    pub optim: OptimConfig,
    pub out_dir: PathBuf,
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl GridConfig {
    pub fn parse(text: &str) -> Result<GridConfig> {
        let mut sections = parse_sections(text)?;
        let mut grid = sections
            .remove("grid")
            .ok_or_else(|| Error::Config("missing [grid] section".into()))?;

        let mut datasets = Vec::new();
        for entry in split_list(&grid.require::<String>("datasets")?) {
            let first = entry.find(':').ok_or_else(|| {
                Error::Config(format!("dataset entry {entry:?} is not name:path:kind"))
            })?;
            let last = entry.rfind(':').unwrap();
            if first == last {
                return Err(Error::Config(format!(
                    "dataset entry {entry:?} is not name:path:kind"
                )));
            }
            datasets.push(GridDataset {
                name: entry[..first].to_string(),
                path: PathBuf::from(&entry[first + 1..last]),
                kind: DatasetKind::parse(&entry[last + 1..])?,
            });
        }

        let mut horizons = Vec::new();
        for h in split_list(&grid.require::<String>("horizons")?) {
            horizons.push(h.parse::<usize>().map_err(|_| {
                Error::Config(format!("horizon {h:?} is not an integer"))
            })?);
        }

        let mut variants = Vec::new();
        for name in split_list(&grid.require::<String>("variants")?) {
            let kind = lookup(&name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant {name:?}; known: {}",
                    known_names().join(", ")
                ))
            })?;
            variants.push(Variant::new(kind));
        }

        // absent seed list -> the standard 16 matched seeds
        let seeds = match grid.take("seeds") {
            None => frwkv_core::harness::matched_seeds(),
            Some(raw) => {
                let mut seeds = Vec::new();
                for s in split_list(&raw) {
                    seeds.push(s.parse::<u64>().map_err(|_| {
                        Error::Config(format!("seed {s:?} is not an integer"))
                    })?);
                }
                seeds
            }
        };
        grid.finish()?;

        if datasets.is_empty() || horizons.is_empty() || variants.is_empty() || seeds.is_empty() {
            return Err(Error::Config("grid lists must be non-empty".into()));
        }

        let model = ModelSection::parse(
            sections
                .remove("model")
                .ok_or_else(|| Error::Config("missing [model] section".into()))?,
        )?;
        let optim = match sections.remove("train") {
            Some(section) => parse_train(section)?,
            None => OptimConfig::default(),
        };
        let out_dir = match sections.remove("out") {
            Some(mut section) => {
                let dir = section.require::<String>("dir")?;
                section.finish()?;
                resolve_out_dir(&dir)
            }
            None => resolve_out_dir("runs/ablation"),
        };
        if let Some(name) = sections.keys().next() {
            return Err(Error::Config(format!("unknown section [{name}]")));
        }
        Ok(GridConfig {
            datasets,
            horizons,
            variants,
            seeds,
            model,
            optim,
            out_dir,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use frwkv_core::variant::VariantKind;

    const RUN: &str = "\
[data]
path = data/sine.csv
kind = ratio
[model]
variant = frwkv_plus
input_len = 48
horizon = 12
embed_dim = 4
hidden = 16
heads = 2
layers = 1
period_len = 24
routers = 2
[train]
lr = 0.003
epochs_max = 5
seed = 7
[out]
dir = /tmp/frwkv-demo
";

    #[test]
    fn run_config_parses_and_dumps_reproducibly() {
        let cfg = RunConfig::parse(RUN).unwrap();
        assert_eq!(cfg.kind, DatasetKind::Ratio);
        assert_eq!(cfg.model.variant.kind, VariantKind::FrwkvPlus);
        assert_eq!(cfg.horizon, 12);
        assert_eq!(cfg.optim.seed, 7);
        // defaults are materialized in the dump and the dump re-parses to
        // the same resolved dump
        let dump = cfg.resolved_dump();
        assert!(dump.contains("patience = 8"));
        assert!(dump.contains("trust_bias_init = -4"));
        let again = RunConfig::parse(&dump).unwrap();
        assert_eq!(again.resolved_dump(), dump);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = RUN.replace("[train]", "[train]\nmystery = 1");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("mystery"), "got: {err}");
        let bad_section = format!("{RUN}[extra]\nx = 1\n");
        assert!(RunConfig::parse(&bad_section).is_err());
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let bad = RUN.replace("lr = 0.003", "lr = 0.003\nlr = 0.004");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn component_flags_require_the_full_model() {
        let bad = RUN
            .replace("variant = frwkv_plus", "variant = frwkv\nfixed_trust = true");
        let cfg = RunConfig::parse(&bad).unwrap();
        assert!(cfg.model.variant.validate().is_err());
    }

    #[test]
    fn grid_without_seeds_uses_the_sixteen_matched_seeds() {
        let text = "\
[grid]
datasets = sine:/tmp/sine.csv:ratio
horizons = 6
variants = frwkv
[model]
input_len = 24
";
        let grid = GridConfig::parse(text).unwrap();
        assert_eq!(grid.seeds, (2024..2040).collect::<Vec<u64>>());
    }

    #[test]
    fn grid_config_parses_dataset_triples() {
        let text = "\
[grid]
datasets = sine:/tmp/sine.csv:ratio, noise:/tmp/noise.csv:ratio
horizons = 6, 12
variants = frwkv, frwkv_plus
seeds = 1, 2
[model]
input_len = 24
embed_dim = 2
hidden = 4
heads = 1
layers = 1
period_len = 8
routers = 1
[out]
dir = /tmp/frwkv-grid
";
        let grid = GridConfig::parse(text).unwrap();
        assert_eq!(grid.datasets.len(), 2);
        assert_eq!(grid.datasets[1].name, "noise");
        assert_eq!(grid.horizons, vec![6, 12]);
        assert_eq!(grid.variants.len(), 2);
        assert_eq!(grid.seeds, vec![1, 2]);
    }
}
