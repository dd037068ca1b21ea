//! Periodic-position context: fold the embedded window into positions inside
//! a chosen period (circular padding, mean over repetitions), then compress
//! the position tokens through a small set of learnable router tokens with
//! two softmax stages, yielding one context vector per (sample, variable).

use rand_chacha::ChaCha8Rng;

use crate::nn::{normal_init, uniform_init, zeros_param, ParamVisitor};
use crate::tensor::Tensor;

const LN_EPS: f64 = 1e-5;

pub struct PeriodicRouterParams {
    pub period_len: usize,     // P
    pub router_tokens: Tensor, // [R, D]
    pub w_q: Tensor,           // [D, D], no bias
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
    pub ln_scale: Tensor, // [D]
    pub ln_shift: Tensor, // [D]
}

impl PeriodicRouterParams {
    pub fn init(
        rng: &mut ChaCha8Rng,
        embed_dim: usize,
        period_len: usize,
        routers: usize,
    ) -> PeriodicRouterParams {
        assert!(period_len >= 1, "period length must be >= 1");
        assert!(routers >= 1, "router count must be >= 1");
        PeriodicRouterParams {
            period_len,
            router_tokens: normal_init(rng, &[routers, embed_dim], 0.02),
            w_q: uniform_init(rng, &[embed_dim, embed_dim], embed_dim),
            w_k: uniform_init(rng, &[embed_dim, embed_dim], embed_dim),
            w_v: uniform_init(rng, &[embed_dim, embed_dim], embed_dim),
            w_o: uniform_init(rng, &[embed_dim, embed_dim], embed_dim),
            ln_scale: Tensor::param(vec![1.0; embed_dim], &[embed_dim]),
            ln_shift: zeros_param(&[embed_dim]),
        }
    }

    pub fn expected_param_count(embed_dim: usize, routers: usize) -> usize {
        4 * embed_dim * embed_dim + routers * embed_dim + 2 * embed_dim
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("router", &mut |_, t, _| n += t.numel());
        n
    }

    pub fn visit(&self, name: &str, f: &mut ParamVisitor) {
        f(format!("{name}.tokens"), &self.router_tokens, false);
        f(format!("{name}.w_q"), &self.w_q, true);
        f(format!("{name}.w_k"), &self.w_k, true);
        f(format!("{name}.w_v"), &self.w_v, true);
        f(format!("{name}.w_o"), &self.w_o, true);
        f(format!("{name}.ln_scale"), &self.ln_scale, false);
        f(format!("{name}.ln_shift"), &self.ln_shift, false);
    }
}

/// Group `[B,N,T,D]` by position inside a period of length P: circularly pad
/// (repeating from the start) to a multiple of P, then average the
/// M = ceil(T/P) repetitions. Output `[B,N,P,D]`.
pub fn period_fold(x_emb: &Tensor, period_len: usize) -> Tensor {
    let s = x_emb.shape();
    assert_eq!(s.len(), 4, "period_fold expects [B,N,T,D], got {:?}", s);
    assert!(period_len >= 1, "period length must be >= 1");
    let (b, n, t, d) = (s[0], s[1], s[2], s[3]);
    let m = t.div_ceil(period_len);
    let padded_len = m * period_len;

    let mut padded = x_emb.clone();
    let mut missing = padded_len - t;
    let mut parts = vec![x_emb.clone()];
    while missing > 0 {
        let take = missing.min(t);
        parts.push(x_emb.narrow(2, 0, take));
        missing -= take;
    }
    if parts.len() > 1 {
        padded = Tensor::cat(&parts, 2);
    }
    padded
        .reshape(&[b, n, m, period_len, d])
        .mean_axes(&[2], false)
}

/// Attention internals exposed for tests and inspection.
pub struct RouterDetails {
    pub to_router: Tensor,   // [BN, R, P] rows over positions
    pub to_tokens: Tensor,   // [BN, P, R] rows over routers
    pub buffers: Tensor,     // [BN, R, D]
    pub context: Tensor,     // [B, N, D]
}

/// Two-stage router attention over period-position tokens `[B,N,P,D]`.
pub fn router_details(phi: &Tensor, params: &PeriodicRouterParams) -> RouterDetails {
    let s = phi.shape();
    assert_eq!(s.len(), 4, "router input must be [B,N,P,D], got {:?}", s);
    let (b, n, p, d) = (s[0], s[1], s[2], s[3]);
    let scale = 1.0 / (d as f64).sqrt();

    let flat = phi.reshape(&[b * n, p, d]);
    let normed = flat
        .layer_norm(2, LN_EPS)
        .mul(&params.ln_scale)
        .add(&params.ln_shift);
    let q = normed.matmul(&params.w_q);
    let k = normed.matmul(&params.w_k);
    let v = normed.matmul(&params.w_v);

    // routers gather position evidence
    let to_router = params
        .router_tokens
        .matmul(&k.transpose())
        .mul_scalar(scale)
        .softmax(2); // [BN, R, P]
    let buffers = to_router.matmul(&v); // [BN, R, D]

    // positions read the router buffers back
    let to_tokens = q
        .matmul(&buffers.transpose())
        .mul_scalar(scale)
        .softmax(2); // [BN, P, R]
    let routed = to_tokens.matmul(&buffers); // [BN, P, D]

    let context = routed
        .mean_axes(&[1], false)
        .matmul(&params.w_o)
        .reshape(&[b, n, d]);
    RouterDetails {
        to_router,
        to_tokens,
        buffers,
        context,
    }
}

/// `[B,N,P,D] -> [B,N,D]` context vector.
pub fn router_context(phi: &Tensor, params: &PeriodicRouterParams) -> Tensor {
    router_details(phi, params).context
}

/// Full periodic-position context: fold then route.
pub fn periodic_context(x_emb: &Tensor, params: &PeriodicRouterParams) -> Tensor {
    router_context(&period_fold(x_emb, params.period_len), params)
}
