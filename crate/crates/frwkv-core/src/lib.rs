//! Frequency-space long-horizon forecasting with RWKV branch encoders.
//!
//! The model family implemented here (FRWKV, CrossBranchGate,
//! CrossBranchPhaseGate, FullContextDelta, FRWKV+) normalizes a multivariate
//! window with RevIN, lifts it into a small embedding, runs a real FFT along
//! time, encodes the real and imaginary spectra with linear state-update
//! (RWKV-style) branch encoders, and recombines them through cross-branch
//! gates. The richer variants correct those gates with a signed,
//! trust-controlled signal derived from a periodic-position context encoder,
//! then reconstruct the time domain by inverse FFT and project to the
//! forecast horizon.
//!
//! Everything runs on a self-contained f64 tensor engine with tape-based
//! reverse-mode differentiation; no external numeric backends.

pub mod data;
pub mod error;
pub mod fft;
pub mod gates;
pub mod gradcheck;
pub mod harness;
pub mod model;
pub mod nn;
pub mod periodic;
pub mod revin;
pub mod rwkv;
pub mod tensor;
pub mod train;
pub mod variant;

pub use error::{Error, Result};
pub use tensor::Tensor;
