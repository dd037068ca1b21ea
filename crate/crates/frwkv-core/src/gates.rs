//! Cross-branch gates, signed periodic-position corrections, and trust
//! scores: the machinery that couples the encoded real and imaginary
//! frequency streams.
//!
//! Base gates: G0_{i->r} = sigma(MLP(C_i)), G0_{r->i} = sigma(MLP(C_r)) -
//! each stream's context gates the opposite stream. The phase variants add a
//! signed correction Delta = tanh(MLP([context, C_pos])) scaled by a clipped
//! strength alpha and a per-channel trust score in (0,1):
//!
//!   G_r = 1 + G0_{i->r} + clip(alpha) * T_r * Delta_{i->r}
//!
//! Correction MLPs start with exactly-zero output layers and trust MLPs with
//! a low output bias, so the richer variants begin as the plain
//! cross-branch-gate model.

use rand_chacha::ChaCha8Rng;

use crate::nn::{Mlp2, ParamVisitor};
use crate::tensor::Tensor;
use crate::variant::VariantKind;

/// Upper clip bound for the correction strength.
pub const ALPHA_MAX: f64 = 0.20;

/// Frequency-mean contexts of the two encoded streams, plus the
/// periodic-position context when the variant computes one. All [B,N,D].
pub struct BranchContexts {
    pub real: Tensor,
    pub imag: Tensor,
    pub periodic: Option<Tensor>,
}

impl BranchContexts {
    /// Periodic context or zeros of the context shape.
    pub fn periodic_or_zeros(&self) -> Tensor {
        self.periodic
            .clone()
            .unwrap_or_else(|| Tensor::zeros(self.real.shape()))
    }
}

/// Gate-path parameters. Which pieces exist depends on the variant; absent
/// pieces contribute no parameters (they are also absent from checkpoints).
pub struct GateParams {
    pub base_i2r: Option<Mlp2>,  // D -> D -> D
    pub base_r2i: Option<Mlp2>,
    pub delta_i2r: Option<Mlp2>, // (2D or 3D) -> D -> D, zero output layer
    pub delta_r2i: Option<Mlp2>,
    pub trust_r: Option<Mlp2>,   // 3D -> D -> D, low output bias
    pub trust_i: Option<Mlp2>,
    pub alpha: Option<Tensor>,   // scalar, clipped on read
}

impl GateParams {
    pub fn init(
        rng: &mut ChaCha8Rng,
        embed_dim: usize,
        kind: VariantKind,
        alpha_init: f64,
        trust_bias_init: f64,
    ) -> GateParams {
        let d = embed_dim;
        let hidden = d; // smallest nontrivial MLP: one hidden layer of width D
        let base = kind.has_base_gates();
        let correction = kind.has_correction();
        let trust = kind.has_trust_mlps();
        let delta_in = kind.delta_input_width(d);

        let trust_mlp = |rng: &mut ChaCha8Rng| {
            let mlp = Mlp2::init(rng, 3 * d, hidden, d);
            mlp.out.bias.data_mut().fill(trust_bias_init);
            mlp
        };

        GateParams {
            base_i2r: base.then(|| Mlp2::init(rng, d, hidden, d)),
            base_r2i: base.then(|| Mlp2::init(rng, d, hidden, d)),
            delta_i2r: correction.then(|| Mlp2::init_zero_out(rng, delta_in, hidden, d)),
            delta_r2i: correction.then(|| Mlp2::init_zero_out(rng, delta_in, hidden, d)),
            trust_r: trust.then(|| trust_mlp(rng)),
            trust_i: trust.then(|| trust_mlp(rng)),
            alpha: correction.then(|| Tensor::param(vec![alpha_init], &[])),
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("gates", &mut |_, t, _| n += t.numel());
        n
    }

    pub fn visit(&self, name: &str, f: &mut ParamVisitor) {
        if let Some(m) = &self.base_i2r {
            m.visit(&format!("{name}.base_i2r"), f);
        }
        if let Some(m) = &self.base_r2i {
            m.visit(&format!("{name}.base_r2i"), f);
        }
        if let Some(m) = &self.delta_i2r {
            m.visit(&format!("{name}.delta_i2r"), f);
        }
        if let Some(m) = &self.delta_r2i {
            m.visit(&format!("{name}.delta_r2i"), f);
        }
        if let Some(m) = &self.trust_r {
            m.visit(&format!("{name}.trust_r"), f);
        }
        if let Some(m) = &self.trust_i {
            m.visit(&format!("{name}.trust_i"), f);
        }
        if let Some(a) = &self.alpha {
            f(format!("{name}.alpha"), a, false);
        }
    }
}

/// Base cross-branch gates in (0,1): the source context gates the opposite
/// branch.
pub fn base_gates(params: &GateParams, c_r: &Tensor, c_i: &Tensor) -> (Tensor, Tensor) {
    let i2r = params
        .base_i2r
        .as_ref()
        .expect("variant has no base gate MLPs");
    let r2i = params
        .base_r2i
        .as_ref()
        .expect("variant has no base gate MLPs");
    (i2r.apply(c_i).sigmoid(), r2i.apply(c_r).sigmoid())
}

/// Signed corrections in (-1,1). `full_context` feeds [C_r, C_i, C_pos] to
/// both MLPs; otherwise each direction sees [source context, C_pos].
/// `positive_only` post-composes |.|, keeping magnitude but dropping sign.
pub fn deltas(
    params: &GateParams,
    c_r: &Tensor,
    c_i: &Tensor,
    c_pos: &Tensor,
    full_context: bool,
    positive_only: bool,
) -> (Tensor, Tensor) {
    let axis = c_r.rank() - 1;
    let mlp_i2r = params
        .delta_i2r
        .as_ref()
        .expect("variant has no correction MLPs");
    let mlp_r2i = params
        .delta_r2i
        .as_ref()
        .expect("variant has no correction MLPs");
    let (in_i2r, in_r2i) = if full_context {
        let joint = Tensor::cat(&[c_r.clone(), c_i.clone(), c_pos.clone()], axis);
        (joint.clone(), joint)
    } else {
        (
            Tensor::cat(&[c_i.clone(), c_pos.clone()], axis),
            Tensor::cat(&[c_r.clone(), c_pos.clone()], axis),
        )
    };
    let mut d_i2r = mlp_i2r.apply(&in_i2r).tanh();
    let mut d_r2i = mlp_r2i.apply(&in_r2i).tanh();
    if positive_only {
        d_i2r = d_i2r.abs();
        d_r2i = d_r2i.abs();
    }
    (d_i2r, d_r2i)
}

/// Trust scores in (0,1); `fixed` yields all-ones (correction admitted
/// unconditionally).
pub fn trust(
    params: &GateParams,
    c_r: &Tensor,
    c_i: &Tensor,
    c_pos: &Tensor,
    fixed: bool,
) -> (Tensor, Tensor) {
    if fixed {
        return (Tensor::ones(c_r.shape()), Tensor::ones(c_r.shape()));
    }
    let axis = c_r.rank() - 1;
    let joint = Tensor::cat(&[c_r.clone(), c_i.clone(), c_pos.clone()], axis);
    let t_r = params
        .trust_r
        .as_ref()
        .expect("variant has no trust MLPs")
        .apply(&joint)
        .sigmoid();
    let t_i = params
        .trust_i
        .as_ref()
        .expect("variant has no trust MLPs")
        .apply(&joint)
        .sigmoid();
    (t_r, t_i)
}

/// Correction strength clipped to [0, ALPHA_MAX] on read.
pub fn clipped_alpha(alpha_raw: &Tensor) -> Tensor {
    alpha_raw.clip(0.0, ALPHA_MAX)
}

/// Final gate composition per variant kind:
/// FRWKV -> 1; CrossBranchGate -> 1 + G0; phase variants -> 1 + G0 +
/// clip(alpha) * T (.) Delta.
pub fn final_gates(
    kind: VariantKind,
    g0: (&Tensor, &Tensor),
    delta: (&Tensor, &Tensor),
    trust: (&Tensor, &Tensor),
    alpha_raw: &Tensor,
) -> (Tensor, Tensor) {
    match kind {
        VariantKind::Frwkv => (Tensor::ones(g0.0.shape()), Tensor::ones(g0.1.shape())),
        VariantKind::CrossBranchGate => (g0.0.add_scalar(1.0), g0.1.add_scalar(1.0)),
        VariantKind::CrossBranchPhaseGate
        | VariantKind::FullContextDelta
        | VariantKind::FrwkvPlus => {
            let alpha = clipped_alpha(alpha_raw);
            let corr_r = trust.0.mul(delta.0).mul(&alpha);
            let corr_i = trust.1.mul(delta.1).mul(&alpha);
            (
                g0.0.add_scalar(1.0).add(&corr_r),
                g0.1.add_scalar(1.0).add(&corr_i),
            )
        }
    }
}

/// Modulate the encoded streams: gates are per (sample, variable, channel)
/// and broadcast across frequency bins.
pub fn apply_gates(y: &Tensor, gate: &Tensor) -> Tensor {
    assert_eq!(y.rank(), 4, "apply_gates expects [B,N,D,F], got {:?}", y.shape());
    assert_eq!(
        gate.shape(),
        &y.shape()[..3],
        "gate shape {:?} does not match stream {:?}",
        gate.shape(),
        y.shape()
    );
    let mut col = gate.shape().to_vec();
    col.push(1);
    y.mul(&gate.reshape(&col))
}

/// Trust output-layer bias initialization range from the training recipes.
pub const TRUST_BIAS_RANGE: (f64, f64) = (-4.0, -2.0);
