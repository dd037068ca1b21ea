//! The model family as interchangeable gate mechanisms.
//!
//! Every variant is a [`GateStrategy`]: given the gate parameters and the
//! branch contexts it produces the final multiplicative gates for the real
//! and imaginary streams. Variants are registered by name and selected at
//! runtime from config; component-study switches (zeroed periodic context,
//! positive-only correction, fixed trust) are flags on the full model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{self, BranchContexts, GateParams};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    Frwkv,
    CrossBranchGate,
    CrossBranchPhaseGate,
    FullContextDelta,
    FrwkvPlus,
}

impl VariantKind {
    pub fn name(&self) -> &'static str {
        match self {
            VariantKind::Frwkv => "frwkv",
            VariantKind::CrossBranchGate => "cross_branch_gate",
            VariantKind::CrossBranchPhaseGate => "cross_branch_phase_gate",
            VariantKind::FullContextDelta => "full_context_delta",
            VariantKind::FrwkvPlus => "frwkv_plus",
        }
    }

    /// Human-facing label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            VariantKind::Frwkv => "FRWKV",
            VariantKind::CrossBranchGate => "CrossBranchGate",
            VariantKind::CrossBranchPhaseGate => "CrossBranchPhaseGate",
            VariantKind::FullContextDelta => "FullContextDelta",
            VariantKind::FrwkvPlus => "FRWKV+",
        }
    }

    pub fn has_base_gates(&self) -> bool {
        !matches!(self, VariantKind::Frwkv)
    }

    pub fn has_correction(&self) -> bool {
        matches!(
            self,
            VariantKind::CrossBranchPhaseGate
                | VariantKind::FullContextDelta
                | VariantKind::FrwkvPlus
        )
    }

    pub fn has_trust_mlps(&self) -> bool {
        matches!(self, VariantKind::FullContextDelta | VariantKind::FrwkvPlus)
    }

    pub fn has_periodic_router(&self) -> bool {
        self.has_correction()
    }

    fn full_context_delta(&self) -> bool {
        matches!(self, VariantKind::FullContextDelta)
    }

    pub fn delta_input_width(&self, embed_dim: usize) -> usize {
        if self.full_context_delta() {
            3 * embed_dim
        } else {
            2 * embed_dim
        }
    }
}

/// Component-study switches; only meaningful on the full model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantFlags {
    /// Zero the periodic-position context while keeping the correction and
    /// trust structure.
    #[serde(default)]
    pub zero_periodic_context: bool,
    /// Constrain the signed correction to a nonnegative magnitude (|tanh|).
    #[serde(default)]
    pub positive_only_delta: bool,
    /// Replace learned trust with 1.
    #[serde(default)]
    pub fixed_trust: bool,
}

impl VariantFlags {
    pub fn any(&self) -> bool {
        self.zero_periodic_context || self.positive_only_delta || self.fixed_trust
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub kind: VariantKind,
    #[serde(default)]
    pub flags: VariantFlags,
}

impl Variant {
    pub fn new(kind: VariantKind) -> Variant {
        Variant {
            kind,
            flags: VariantFlags::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.flags.any() && self.kind != VariantKind::FrwkvPlus {
            return Err(Error::Config(format!(
                "component flags are only valid with frwkv_plus, not {}",
                self.kind.name()
            )));
        }
        Ok(())
    }

    pub fn strategy(&self) -> Box<dyn GateStrategy> {
        match self.kind {
            VariantKind::Frwkv => Box::new(FrwkvStrategy),
            VariantKind::CrossBranchGate => Box::new(CrossBranchGateStrategy),
            VariantKind::CrossBranchPhaseGate => Box::new(CrossBranchPhaseGateStrategy),
            VariantKind::FullContextDelta => Box::new(FullContextDeltaStrategy),
            VariantKind::FrwkvPlus => Box::new(FrwkvPlusStrategy { flags: self.flags }),
        }
    }
}

/// One interchangeable gate mechanism.
pub trait GateStrategy {
    fn name(&self) -> &'static str;
    fn kind(&self) -> VariantKind;

    /// Does the forward pass need the periodic-position context computed?
    fn wants_periodic_context(&self) -> bool {
        false
    }

    /// Final multiplicative gates (real, imag), each shaped like a context.
    fn gates(&self, params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor);
}

struct FrwkvStrategy;

impl GateStrategy for FrwkvStrategy {
    fn name(&self) -> &'static str {
        VariantKind::Frwkv.name()
    }
    fn kind(&self) -> VariantKind {
        VariantKind::Frwkv
    }
    fn gates(&self, _params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor) {
        (
            Tensor::ones(ctx.real.shape()),
            Tensor::ones(ctx.imag.shape()),
        )
    }
}

struct CrossBranchGateStrategy;

impl GateStrategy for CrossBranchGateStrategy {
    fn name(&self) -> &'static str {
        VariantKind::CrossBranchGate.name()
    }
    fn kind(&self) -> VariantKind {
        VariantKind::CrossBranchGate
    }
    fn gates(&self, params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor) {
        let (g0_i2r, g0_r2i) = gates::base_gates(params, &ctx.real, &ctx.imag);
        (g0_i2r.add_scalar(1.0), g0_r2i.add_scalar(1.0))
    }
}

/// Shared composition for the three correction-bearing variants.
fn corrected_gates(
    kind: VariantKind,
    params: &GateParams,
    ctx: &BranchContexts,
    c_pos: &Tensor,
    positive_only: bool,
    fixed_trust: bool,
) -> (Tensor, Tensor) {
    let g0 = gates::base_gates(params, &ctx.real, &ctx.imag);
    let delta = gates::deltas(
        params,
        &ctx.real,
        &ctx.imag,
        c_pos,
        kind == VariantKind::FullContextDelta,
        positive_only,
    );
    let trust = gates::trust(params, &ctx.real, &ctx.imag, c_pos, fixed_trust);
    let alpha = params
        .alpha
        .as_ref()
        .expect("correction variants carry alpha");
    gates::final_gates(kind, (&g0.0, &g0.1), (&delta.0, &delta.1), (&trust.0, &trust.1), alpha)
}

struct CrossBranchPhaseGateStrategy;

impl GateStrategy for CrossBranchPhaseGateStrategy {
    fn name(&self) -> &'static str {
        VariantKind::CrossBranchPhaseGate.name()
    }
    fn kind(&self) -> VariantKind {
        VariantKind::CrossBranchPhaseGate
    }
    fn wants_periodic_context(&self) -> bool {
        true
    }
    fn gates(&self, params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor) {
        let c_pos = ctx.periodic_or_zeros();
        // phase correction without the adaptive trust MLP: trust fixed at 1
        corrected_gates(self.kind(), params, ctx, &c_pos, false, true)
    }
}

struct FullContextDeltaStrategy;

impl GateStrategy for FullContextDeltaStrategy {
    fn name(&self) -> &'static str {
        VariantKind::FullContextDelta.name()
    }
    fn kind(&self) -> VariantKind {
        VariantKind::FullContextDelta
    }
    fn wants_periodic_context(&self) -> bool {
        true
    }
    fn gates(&self, params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor) {
        let c_pos = ctx.periodic_or_zeros();
        corrected_gates(self.kind(), params, ctx, &c_pos, false, false)
    }
}

struct FrwkvPlusStrategy {
    flags: VariantFlags,
}

impl GateStrategy for FrwkvPlusStrategy {
    fn name(&self) -> &'static str {
        VariantKind::FrwkvPlus.name()
    }
    fn kind(&self) -> VariantKind {
        VariantKind::FrwkvPlus
    }
    fn wants_periodic_context(&self) -> bool {
        !self.flags.zero_periodic_context
    }
    fn gates(&self, params: &GateParams, ctx: &BranchContexts) -> (Tensor, Tensor) {
        let c_pos = if self.flags.zero_periodic_context {
            Tensor::zeros(ctx.real.shape())
        } else {
            ctx.periodic_or_zeros()
        };
        corrected_gates(
            self.kind(),
            params,
            ctx,
            &c_pos,
            self.flags.positive_only_delta,
            self.flags.fixed_trust,
        )
    }
}

/// Name registry of the family, in report column order.
pub const REGISTRY: &[VariantKind] = &[
    VariantKind::FrwkvPlus,
    VariantKind::FullContextDelta,
    VariantKind::CrossBranchPhaseGate,
    VariantKind::CrossBranchGate,
    VariantKind::Frwkv,
];

/// Look a variant up by its registered name.
pub fn lookup(name: &str) -> Option<VariantKind> {
    REGISTRY.iter().copied().find(|k| k.name() == name)
}

pub fn known_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|k| k.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn contexts(rng: &mut ChaCha8Rng, with_pos: bool) -> BranchContexts {
        let mk = |rng: &mut ChaCha8Rng| {
            Tensor::new((0..12).map(|_| rng.gen_range(-1.5..1.5)).collect(), &[2, 2, 3])
        };
        BranchContexts {
            real: mk(rng),
            imag: mk(rng),
            periodic: with_pos.then(|| mk(rng)),
        }
    }

    #[test]
    fn registry_round_trips_names() {
        for kind in REGISTRY {
            assert_eq!(lookup(kind.name()), Some(*kind));
        }
        assert_eq!(lookup("nope"), None);
        assert_eq!(known_names().len(), 5);
    }

    #[test]
    fn flags_only_valid_on_full_model() {
        let mut v = Variant::new(VariantKind::CrossBranchGate);
        v.flags.fixed_trust = true;
        assert!(v.validate().is_err());
        let mut ok = Variant::new(VariantKind::FrwkvPlus);
        ok.flags.fixed_trust = true;
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn zero_init_plus_equals_branch_gate_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let params = GateParams::init(&mut rng, 3, VariantKind::FrwkvPlus, 0.08, -3.0);
        let ctx = contexts(&mut rng, true);
        let plus = Variant::new(VariantKind::FrwkvPlus).strategy();
        let gate = Variant::new(VariantKind::CrossBranchGate).strategy();
        let (pr, pi) = plus.gates(&params, &ctx);
        let (gr, gi) = gate.gates(&params, &ctx);
        assert_eq!(pr.to_vec(), gr.to_vec());
        assert_eq!(pi.to_vec(), gi.to_vec());
    }

    #[test]
    fn frwkv_strategy_ignores_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = GateParams::init(&mut rng, 3, VariantKind::Frwkv, 0.05, -4.0);
        let ctx = contexts(&mut rng, false);
        let (gr, gi) = Variant::new(VariantKind::Frwkv).strategy().gates(&params, &ctx);
        assert!(gr.to_vec().iter().all(|v| *v == 1.0));
        assert!(gi.to_vec().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn phase_gate_uses_unit_trust() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        // CrossBranchPhaseGate has no trust MLPs; randomize deltas so the
        // correction term is active, then verify against the composition with
        // trust forced to one.
        let mut params = GateParams::init(&mut rng, 2, VariantKind::CrossBranchPhaseGate, 0.1, -4.0);
        params.delta_i2r = Some(crate::nn::Mlp2::init(&mut rng, 4, 2, 2));
        params.delta_r2i = Some(crate::nn::Mlp2::init(&mut rng, 4, 2, 2));
        assert!(params.trust_r.is_none());
        let ctx = BranchContexts {
            real: Tensor::new(vec![0.5, -0.2], &[1, 1, 2]),
            imag: Tensor::new(vec![-1.0, 0.3], &[1, 1, 2]),
            periodic: Some(Tensor::new(vec![0.8, 0.1], &[1, 1, 2])),
        };
        let (gr, _) = Variant::new(VariantKind::CrossBranchPhaseGate)
            .strategy()
            .gates(&params, &ctx);

        let g0 = crate::gates::base_gates(&params, &ctx.real, &ctx.imag);
        let d = crate::gates::deltas(
            &params,
            &ctx.real,
            &ctx.imag,
            ctx.periodic.as_ref().unwrap(),
            false,
            false,
        );
        let alpha = crate::gates::clipped_alpha(params.alpha.as_ref().unwrap());
        for j in 0..2 {
            let want = 1.0 + g0.0.at(&[0, 0, j]) + alpha.item() * d.0.at(&[0, 0, j]);
            assert!((gr.at(&[0, 0, j]) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_periodic_flag_matches_handing_in_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut params = GateParams::init(&mut rng, 3, VariantKind::FrwkvPlus, 0.05, -2.5);
        params.delta_i2r = Some(crate::nn::Mlp2::init(&mut rng, 6, 3, 3));
        params.delta_r2i = Some(crate::nn::Mlp2::init(&mut rng, 6, 3, 3));
        let ctx = contexts(&mut rng, true);
        let mut flagged = Variant::new(VariantKind::FrwkvPlus);
        flagged.flags.zero_periodic_context = true;
        let (fr, fi) = flagged.strategy().gates(&params, &ctx);

        let zero_ctx = BranchContexts {
            real: ctx.real.clone(),
            imag: ctx.imag.clone(),
            periodic: Some(Tensor::zeros(&[2, 2, 3])),
        };
        let (zr, zi) = Variant::new(VariantKind::FrwkvPlus).strategy().gates(&params, &zero_ctx);
        assert_eq!(fr.to_vec(), zr.to_vec());
        assert_eq!(fi.to_vec(), zi.to_vec());
    }

    #[test]
    fn strategies_report_context_needs() {
        assert!(!Variant::new(VariantKind::Frwkv).strategy().wants_periodic_context());
        assert!(!Variant::new(VariantKind::CrossBranchGate)
            .strategy()
            .wants_periodic_context());
        assert!(Variant::new(VariantKind::FrwkvPlus)
            .strategy()
            .wants_periodic_context());
        let mut no_pos = Variant::new(VariantKind::FrwkvPlus);
        no_pos.flags.zero_periodic_context = true;
        assert!(!no_pos.strategy().wants_periodic_context());
    }
}
