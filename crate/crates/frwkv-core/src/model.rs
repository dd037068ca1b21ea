//! The full forecaster: RevIN -> embedding lift -> rFFT -> per-stream RWKV
//! encoders -> branch contexts -> gate strategy -> inverse FFT -> residual
//! -> horizon head -> RevIN inversion.
//!
//! A `Forecaster` owns all parameters plus the gate strategy selected by the
//! configured variant. Initialization is fully determined by the seed, and
//! the parameter count is a pure function of the config (asserted at init).

use std::io::Read as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{irfft_time, mean_freq, rfft_time, Spectrum};
use crate::gates::{apply_gates, BranchContexts, GateParams};
use crate::nn::{uniform_init, zeros_param, ParamVisitor};
use crate::periodic::{periodic_context, PeriodicRouterParams};
use crate::revin::{
    horizon_project, revin_denormalize, revin_normalize, token_embed, EmbedParams, HeadParams,
    ProjectionMethod, RevinParams,
};
use crate::rwkv::BranchParams;
use crate::tensor::Tensor;
use crate::variant::{GateStrategy, Variant, VariantKind};

const CHECKPOINT_MAGIC: &[u8; 8] = b"FRWKVCP1";

fn default_revin_affine() -> bool {
    true
}

/// Architecture plus initialization hyperparameters. `seed` fully determines
/// the initial parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub input_len: usize,
    pub horizon: usize,
    pub n_vars: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    /// Channel-mix width; defaults to 2 * hidden when absent.
    #[serde(default)]
    pub ff_dim: Option<usize>,
    pub period_len: usize,
    pub routers: usize,
    pub alpha_init: f64,
    pub trust_bias_init: f64,
    pub projection: ProjectionMethod,
    #[serde(default = "default_revin_affine")]
    pub revin_affine: bool,
    pub seed: u64,
    /// Recipe provenance only; no mechanism consumes these.
    #[serde(default)]
    pub patch_len: Option<usize>,
    #[serde(default)]
    pub patch_stride: Option<usize>,
}

impl ModelConfig {
    /// A small default useful for tests and synthetic-data runs.
    pub fn toy(variant: VariantKind) -> ModelConfig {
        ModelConfig {
            variant: Variant::new(variant),
            input_len: 8,
            horizon: 4,
            n_vars: 2,
            embed_dim: 4,
            hidden: 8,
            heads: 1,
            layers: 1,
            ff_dim: None,
            period_len: 4,
            routers: 2,
            alpha_init: 0.05,
            trust_bias_init: -4.0,
            projection: ProjectionMethod::MeanEmbed,
            revin_affine: true,
            seed: 2024,
            patch_len: None,
            patch_stride: None,
        }
    }

    /// The full-scale recipe dims (hidden 512, 8 heads, embed 16, 2 layers).
    pub fn full_recipe(variant: VariantKind, input_len: usize, horizon: usize, n_vars: usize) -> ModelConfig {
        ModelConfig {
            variant: Variant::new(variant),
            input_len,
            horizon,
            n_vars,
            embed_dim: 16,
            hidden: 512,
            heads: 8,
            layers: 2,
            ff_dim: None,
            period_len: 24,
            routers: 8,
            alpha_init: 0.05,
            trust_bias_init: -4.0,
            projection: ProjectionMethod::MeanEmbed,
            revin_affine: true,
            seed: 2024,
            patch_len: Some(16),
            patch_stride: Some(8),
        }
    }

    pub fn ff_dim(&self) -> usize {
        self.ff_dim.unwrap_or(2 * self.hidden)
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        let positive = [
            ("input_len", self.input_len),
            ("horizon", self.horizon),
            ("n_vars", self.n_vars),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("layers", self.layers),
            ("period_len", self.period_len),
            ("routers", self.routers),
            ("ff_dim", self.ff_dim()),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.input_len < 2 {
            return Err(Error::Config("input_len must be >= 2 for instance statistics".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "heads {} must divide hidden {}",
                self.heads, self.hidden
            )));
        }
        if !(self.alpha_init.is_finite() && self.trust_bias_init.is_finite()) {
            return Err(Error::Config("alpha_init / trust_bias_init must be finite".into()));
        }
        Ok(())
    }

    /// Closed-form parameter count implied by the config.
    pub fn expected_param_count(&self) -> usize {
        let d = self.embed_dim;
        let dense = |i: usize, o: usize| i * o + o;
        let kind = self.variant.kind;
        let mut n = 0;
        if self.revin_affine {
            n += 2 * self.n_vars;
        }
        n += d; // embedding vector
        n += 2 * BranchParams::expected_param_count(d, self.hidden, self.ff_dim(), self.layers);
        if kind.has_periodic_router() {
            n += PeriodicRouterParams::expected_param_count(d, self.routers);
        }
        if kind.has_base_gates() {
            n += 2 * (dense(d, d) + dense(d, d));
        }
        if kind.has_correction() {
            n += 2 * (dense(kind.delta_input_width(d), d) + dense(d, d)) + 1;
        }
        if kind.has_trust_mlps() {
            n += 2 * (dense(3 * d, d) + dense(d, d));
        }
        n += dense(self.projection.weight_rows(self.input_len, d), self.horizon);
        n
    }
}

/// A named parameter handle plus its weight-decay eligibility.
pub struct NamedParam {
    pub name: String,
    pub tensor: Tensor,
    pub decay: bool,
}

pub struct Forecaster {
    pub config: ModelConfig,
    pub revin: RevinParams,
    pub embed: EmbedParams,
    pub branch_real: BranchParams,
    pub branch_imag: BranchParams,
    pub router: Option<PeriodicRouterParams>,
    pub gates: GateParams,
    pub head: HeadParams,
    strategy: Box<dyn GateStrategy>,
}

impl Forecaster {
    /// Reproducible initialization from the config seed.
    pub fn init(config: ModelConfig) -> Result<Forecaster> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.embed_dim;
        let kind = config.variant.kind;

        let revin = RevinParams::new(config.n_vars, config.revin_affine);
        let embed = EmbedParams {
            e: uniform_init(&mut rng, &[d], 1),
        };
        let branch_real = BranchParams::init(
            &mut rng,
            d,
            config.hidden,
            config.heads,
            config.ff_dim(),
            config.layers,
        );
        let branch_imag = BranchParams::init(
            &mut rng,
            d,
            config.hidden,
            config.heads,
            config.ff_dim(),
            config.layers,
        );
        let router = kind
            .has_periodic_router()
            .then(|| PeriodicRouterParams::init(&mut rng, d, config.period_len, config.routers));
        let gates = GateParams::init(&mut rng, d, kind, config.alpha_init, config.trust_bias_init);
        let rows = config.projection.weight_rows(config.input_len, d);
        let head = HeadParams {
            method: config.projection,
            weight: uniform_init(&mut rng, &[rows, config.horizon], rows),
            bias: zeros_param(&[config.horizon]),
        };

        let strategy = config.variant.strategy();
        let model = Forecaster {
            config,
            revin,
            embed,
            branch_real,
            branch_imag,
            router,
            gates,
            head,
            strategy,
        };
        assert_eq!(
            model.param_count(),
            model.config.expected_param_count(),
            "parameter count is not the closed-form function of the config"
        );
        Ok(model)
    }

    pub fn visit_params(&self, f: &mut ParamVisitor) {
        if self.config.revin_affine {
            f("revin.gamma".into(), &self.revin.gamma, false);
            f("revin.beta".into(), &self.revin.beta, false);
        }
        f("embed.e".into(), &self.embed.e, true);
        self.branch_real.visit("branch_real", f);
        self.branch_imag.visit("branch_imag", f);
        if let Some(router) = &self.router {
            router.visit("router", f);
        }
        self.gates.visit("gates", f);
        f("head.weight".into(), &self.head.weight, true);
        f("head.bias".into(), &self.head.bias, false);
    }

    pub fn params(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.visit_params(&mut |name, t, decay| {
            out.push(NamedParam {
                name,
                tensor: t.clone(),
                decay,
            })
        });
        out
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t, _| n += t.numel());
        n
    }

    pub fn strategy(&self) -> &dyn GateStrategy {
        self.strategy.as_ref()
    }

    /// Forecast `[B, input_len, N] -> [B, horizon, N]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with_strategy(x, self.strategy.as_ref())
    }

    /// Forward pass with an injected gate mechanism (parameter-surgery tests
    /// and mechanism probes).
    pub fn forward_with_strategy(&self, x: &Tensor, strategy: &dyn GateStrategy) -> Result<Tensor> {
        let cfg = &self.config;
        if x.rank() != 3 || x.shape()[1] != cfg.input_len || x.shape()[2] != cfg.n_vars {
            return Err(Error::Config(format!(
                "forward: input shape {:?} does not match [B, {}, {}]",
                x.shape(),
                cfg.input_len,
                cfg.n_vars
            )));
        }

        let (normed, state) = revin_normalize(x, &self.revin).map_err(|e| e.at_stage("revin_normalize"))?;
        let x_emb = token_embed(&normed, &self.embed);
        let spectrum = rfft_time(&x_emb);
        let enc_real = self
            .branch_real
            .encode(&spectrum.real)
            .map_err(|e| e.at_stage("branch_real"))?;
        let enc_imag = self
            .branch_imag
            .encode(&spectrum.imag)
            .map_err(|e| e.at_stage("branch_imag"))?;

        let periodic = (strategy.wants_periodic_context() && self.router.is_some())
            .then(|| periodic_context(&x_emb, self.router.as_ref().unwrap()));
        let ctx = BranchContexts {
            real: mean_freq(&enc_real),
            imag: mean_freq(&enc_imag),
            periodic,
        };
        let (gate_r, gate_i) = strategy.gates(&self.gates, &ctx);

        let recombined = irfft_time(&Spectrum {
            real: apply_gates(&enc_real, &gate_r),
            imag: apply_gates(&enc_imag, &gate_i),
            original_len: spectrum.original_len,
        });
        let fused = x_emb.add(&recombined);
        let projected = horizon_project(&fused, &self.head);
        let out = revin_denormalize(&projected, &state, &self.revin)
            .map_err(|e| e.at_stage("revin_denormalize"))?;
        if !out.is_finite() {
            return Err(Error::Divergence("forward produced non-finite values".into()));
        }
        Ok(out)
    }

    /// Rebuild with another variant, carrying over every parameter the two
    /// variants share (matched by name and shape); the rest are freshly
    /// initialized from the same seed.
    pub fn with_variant(&self, variant: Variant) -> Result<Forecaster> {
        let mut config = self.config.clone();
        config.variant = variant;
        let target = Forecaster::init(config)?;
        let mut source: Vec<(String, Tensor)> = Vec::new();
        self.visit_params(&mut |name, t, _| source.push((name, t.clone())));
        target.visit_params(&mut |name, t, _| {
            if let Some((_, src)) = source.iter().find(|(n, _)| *n == name) {
                if src.shape() == t.shape() {
                    t.data_mut().copy_from_slice(&src.data());
                }
            }
        });
        Ok(target)
    }

    // ---- checkpoint ---------------------------------------------------------

    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            config: &'a ModelConfig,
            params: Vec<ParamMeta>,
        }
        let params = self.params();
        let header = Header {
            config: &self.config,
            params: params
                .iter()
                .map(|p| ParamMeta {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                })
                .collect(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::Checkpoint(format!("header encode: {e}")))?;
        let mut bytes = Vec::with_capacity(16 + header_json.len());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&header_json);
        for p in &params {
            for v in p.tensor.data().iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Forecaster> {
        #[derive(Deserialize)]
        struct Header {
            config: ModelConfig,
            params: Vec<ParamMeta>,
        }
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "{} is not a checkpoint (bad magic)",
                path.display()
            )));
        }
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_json = vec![0u8; header_len];
        file.read_exact(&mut header_json).map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_slice(&header_json)
            .map_err(|e| Error::Checkpoint(format!("header decode: {e}")))?;

        let model = Forecaster::init(header.config)?;
        let mut by_name: Vec<(String, Tensor)> = Vec::new();
        model.visit_params(&mut |name, t, _| by_name.push((name, t.clone())));
        let mut filled = 0usize;
        for meta in &header.params {
            let numel: usize = meta.shape.iter().product();
            let mut raw = vec![0u8; numel * 8];
            file.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let Some((_, tensor)) = by_name.iter().find(|(n, _)| *n == meta.name) else {
                return Err(Error::Checkpoint(format!(
                    "checkpoint parameter {} does not exist in this architecture",
                    meta.name
                )));
            };
            if tensor.shape() != meta.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "checkpoint parameter {} has shape {:?}, model expects {:?}",
                    meta.name,
                    meta.shape,
                    tensor.shape()
                )));
            }
            tensor.data_mut().copy_from_slice(&values);
            filled += 1;
        }
        if filled != by_name.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, model has {}",
                filled,
                by_name.len()
            )));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
}
