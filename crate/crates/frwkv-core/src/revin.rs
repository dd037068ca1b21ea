//! Reversible instance normalization and the embedding lift / horizon
//! projection that bracket the frequency module.
//!
//! Normalization statistics are per (sample, variable) over the time axis and
//! are kept so the forecast can be mapped back to the input scale exactly.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const REVIN_EPS: f64 = 1e-5;

/// Learnable per-variable affine applied after standardization.
pub struct RevinParams {
    pub gamma: Tensor, // [N]
    pub beta: Tensor,  // [N]
    pub eps: f64,
}

impl RevinParams {
    pub fn new(n_vars: usize, affine: bool) -> RevinParams {
        let gamma = vec![1.0; n_vars];
        let beta = vec![0.0; n_vars];
        RevinParams {
            gamma: if affine {
                Tensor::param(gamma, &[n_vars])
            } else {
                Tensor::new(gamma, &[n_vars])
            },
            beta: if affine {
                Tensor::param(beta, &[n_vars])
            } else {
                Tensor::new(beta, &[n_vars])
            },
            eps: REVIN_EPS,
        }
    }
}

/// Per-window statistics retained for exact inversion.
pub struct RevinState {
    pub mu: Tensor,    // [B,1,N]
    pub sigma: Tensor, // [B,1,N], sqrt(population var + eps)
}

/// Standardize `[B,T,N]` per (sample, variable) over time, then apply the
/// learnable affine. Population (biased) variance.
pub fn revin_normalize(x: &Tensor, params: &RevinParams) -> Result<(Tensor, RevinState)> {
    assert_eq!(x.rank(), 3, "revin_normalize expects [B,T,N], got {:?}", x.shape());
    let t_len = x.shape()[1];
    if t_len < 2 {
        return Err(Error::Config(format!(
            "revin_normalize: window length {t_len} < 2, variance undefined"
        )));
    }
    let mu = x.mean_axes(&[1], true);
    let centered = x.sub(&mu);
    let sigma = centered
        .square()
        .mean_axes(&[1], true)
        .add_scalar(params.eps)
        .sqrt();
    let standardized = centered.div(&sigma);
    let out = standardized.mul(&params.gamma).add(&params.beta);
    Ok((out, RevinState { mu, sigma }))
}

/// Invert affine then statistics: ((y - beta) / gamma) * sigma + mu.
pub fn revin_denormalize(y: &Tensor, state: &RevinState, params: &RevinParams) -> Result<Tensor> {
    assert_eq!(y.rank(), 3, "revin_denormalize expects [B,H,N], got {:?}", y.shape());
    if params.gamma.data().iter().any(|g| g.abs() < 1e-12) {
        return Err(Error::Divergence(
            "revin_denormalize: |gamma| below 1e-12, scale is degenerate".into(),
        ));
    }
    Ok(y.sub(&params.beta)
        .div(&params.gamma)
        .mul(&state.sigma)
        .add(&state.mu))
}

/// Learnable embedding vector lifting each scalar into D channels.
pub struct EmbedParams {
    pub e: Tensor, // [D]
}

/// `[B,T,N] -> [B,N,T,D]` via the pure outer product with `e`.
pub fn token_embed(x: &Tensor, embed: &EmbedParams) -> Tensor {
    assert_eq!(x.rank(), 3, "token_embed expects [B,T,N], got {:?}", x.shape());
    let d = embed.e.shape()[0];
    let (b, t, n) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    x.permute(&[0, 2, 1])
        .reshape(&[b, n, t, 1])
        .mul(&embed.e)
        .reshape(&[b, n, t, d])
}

/// How the horizon head consumes the embedding axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ProjectionMethod {
    /// Collapse D by mean, then a dense T -> H map shared across variables.
    MeanEmbed,
    /// Flatten T*D, then a dense T*D -> H map shared across variables.
    Flatten,
}

impl ProjectionMethod {
    pub fn weight_rows(&self, input_len: usize, embed_dim: usize) -> usize {
        match self {
            ProjectionMethod::MeanEmbed => input_len,
            ProjectionMethod::Flatten => input_len * embed_dim,
        }
    }
}

pub struct HeadParams {
    pub method: ProjectionMethod,
    pub weight: Tensor, // [T, H] or [T*D, H]
    pub bias: Tensor,   // [H]
}

/// Project `[B,N,T,D]` to the forecast layout `[B,H,N]`.
pub fn horizon_project(x: &Tensor, head: &HeadParams) -> Tensor {
    assert_eq!(x.rank(), 4, "horizon_project expects [B,N,T,D], got {:?}", x.shape());
    let (b, n, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let flat = match head.method {
        ProjectionMethod::MeanEmbed => x.mean_axes(&[3], false), // [B,N,T]
        ProjectionMethod::Flatten => x.reshape(&[b, n, t * d]),
    };
    flat.matmul(&head.weight).add(&head.bias).permute(&[0, 2, 1])
}
