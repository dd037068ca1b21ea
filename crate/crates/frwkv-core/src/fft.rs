//! Real FFT along the temporal axis, differentiable through the tape.
//!
//! The transform is a pair of matmuls against constant cosine/sine matrices
//! (a dense O(T^2) DFT). At the window lengths this crate targets (T <= 96)
//! that is both fast enough and exactly linear, so gradients come from the
//! matmul backward with no special handling. Structurally-imaginary bins (DC,
//! and Nyquist for even T) have exactly-zero rows in the synthesis matrices,
//! so arbitrary values written there after gating are silently discarded and
//! receive zero gradient.
//!
//! An iterative radix-2 complex FFT is provided for power-of-two lengths as
//! an independent cross-check of the dense path; the model always uses the
//! dense path.

use crate::tensor::Tensor;

/// Number of real-FFT bins for a length-T signal.
pub fn bin_count(t: usize) -> usize {
    t / 2 + 1
}

/// cos/sin of 2*pi*(k*t mod T)/T with exact values at the half-turn points,
/// so Hermitian-forced entries are exactly zero.
fn unit_angle(k: usize, t: usize, len: usize) -> (f64, f64) {
    let r = (k * t) % len;
    if r == 0 {
        (1.0, 0.0)
    } else if 2 * r == len {
        (-1.0, 0.0)
    } else {
        let theta = 2.0 * std::f64::consts::PI * r as f64 / len as f64;
        (theta.cos(), theta.sin())
    }
}

/// Analysis matrices: real part = x . cos_mat, imag part = x . sin_mat,
/// both [T, F] (the sine matrix already carries the minus sign).
fn analysis_matrices(t_len: usize) -> (Tensor, Tensor) {
    let f = bin_count(t_len);
    let mut cos_m = vec![0.0; t_len * f];
    let mut sin_m = vec![0.0; t_len * f];
    for t in 0..t_len {
        for k in 0..f {
            let (c, s) = unit_angle(k, t, t_len);
            cos_m[t * f + k] = c;
            sin_m[t * f + k] = -s;
        }
    }
    (
        Tensor::new(cos_m, &[t_len, f]),
        Tensor::new(sin_m, &[t_len, f]),
    )
}

/// Synthesis matrices [F, T] carrying the 1/T normalization and the
/// Hermitian doubling weights.
fn synthesis_matrices(t_len: usize) -> (Tensor, Tensor) {
    let f = bin_count(t_len);
    let norm = 1.0 / t_len as f64;
    let mut cos_m = vec![0.0; f * t_len];
    let mut sin_m = vec![0.0; f * t_len];
    for k in 0..f {
        let weight = if k == 0 || (t_len % 2 == 0 && k == f - 1) {
            1.0
        } else {
            2.0
        };
        for t in 0..t_len {
            let (c, s) = unit_angle(k, t, t_len);
            cos_m[k * t_len + t] = weight * norm * c;
            sin_m[k * t_len + t] = -weight * norm * s;
        }
    }
    (
        Tensor::new(cos_m, &[f, t_len]),
        Tensor::new(sin_m, &[f, t_len]),
    )
}

/// Real/imaginary streams of a real FFT, laid out [B, N, D, F].
pub struct Spectrum {
    pub real: Tensor,
    pub imag: Tensor,
    pub original_len: usize,
}

impl Spectrum {
    pub fn bin_count(&self) -> usize {
        bin_count(self.original_len)
    }
}

/// Real FFT over the time axis of `[B, N, T, D]`, producing `[B, N, D, F]`
/// streams. Bin k holds sum_t x_t * exp(-2*pi*i*k*t/T); no forward
/// normalization.
pub fn rfft_time(x: &Tensor) -> Spectrum {
    assert_eq!(x.rank(), 4, "rfft_time expects [B,N,T,D], got {:?}", x.shape());
    let t_len = x.shape()[2];
    assert!(t_len >= 1, "rfft_time needs at least one sample");
    let (cos_m, sin_m) = analysis_matrices(t_len);
    let xt = x.permute(&[0, 1, 3, 2]); // [B,N,D,T]
    Spectrum {
        real: xt.matmul(&cos_m),
        imag: xt.matmul(&sin_m),
        original_len: t_len,
    }
}

/// Inverse real FFT back to `[B, N, T, D]`. Values sitting in the
/// structurally-imaginary bins are ignored rather than rejected.
pub fn irfft_time(z: &Spectrum) -> Tensor {
    let t_len = z.original_len;
    let f = bin_count(t_len);
    assert_eq!(
        z.real.shape(),
        z.imag.shape(),
        "spectrum stream shapes differ: {:?} vs {:?}",
        z.real.shape(),
        z.imag.shape()
    );
    assert_eq!(
        z.real.shape().last(),
        Some(&f),
        "spectrum has {} bins, expected {} for T={}",
        z.real.shape().last().unwrap_or(&0),
        f,
        t_len
    );
    let (cos_m, sin_m) = synthesis_matrices(t_len);
    let x = z.real.matmul(&cos_m).add(&z.imag.matmul(&sin_m)); // [B,N,D,T]
    x.permute(&[0, 1, 3, 2])
}

/// Mean over the frequency-bin axis: `[B, N, D, F] -> [B, N, D]`.
pub fn mean_freq(y: &Tensor) -> Tensor {
    assert_eq!(y.rank(), 4, "mean_freq expects [B,N,D,F], got {:?}", y.shape());
    y.mean_axes(&[3], false)
}

/// In-place iterative radix-2 complex FFT (forward for `invert = false`).
/// Length must be a power of two. Unnormalized forward; inverse applies 1/n.
pub fn fft_radix2(re: &mut [f64], im: &mut [f64], invert: bool) {
    let n = re.len();
    assert_eq!(n, im.len(), "fft_radix2 stream lengths differ");
    assert!(n.is_power_of_two(), "fft_radix2 length {} is not a power of two", n);
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if invert { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let (mut cr, mut ci) = (1.0, 0.0);
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr, vi) = (
                    re[i + k + len / 2] * cr - im[i + k + len / 2] * ci,
                    re[i + k + len / 2] * ci + im[i + k + len / 2] * cr,
                );
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let next_cr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = next_cr;
            }
            i += len;
        }
        len <<= 1;
    }
    if invert {
        let inv = 1.0 / n as f64;
        for v in re.iter_mut() {
            *v *= inv;
        }
        for v in im.iter_mut() {
            *v *= inv;
        }
    }
}

/// Radix-2 real FFT of one series (power-of-two length): returns the
/// F = T/2+1 real/imaginary bins under the same convention as [`rfft_time`].
pub fn rfft_radix2(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut re = x.to_vec();
    let mut im = vec![0.0; n];
    fft_radix2(&mut re, &mut im, false);
    let f = bin_count(n);
    (re[..f].to_vec(), im[..f].to_vec())
}
