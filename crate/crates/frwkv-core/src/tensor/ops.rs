//! Tensor operations: elementwise arithmetic with trailing-axis broadcasting,
//! batched matmul, reductions, shape moves, nonlinearities, and the softmax /
//! layer-norm composites. Each differentiable op records a backward closure
//! working on raw slices, so the reverse pass never re-enters the tape.

use super::tape::{self, BackwardFn};
use super::{strides_of, Tensor};

/// Trailing-aligned broadcast of two shapes.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => panic!("shapes {:?} and {:?} are not broadcast-compatible", a, b),
        };
    }
    out
}

/// Strides of `shape` aligned to `full`, with 0 on broadcast axes.
fn bcast_strides(shape: &[usize], full: &[usize]) -> Vec<usize> {
    let native = strides_of(shape);
    let mut out = vec![0usize; full.len()];
    let off = full.len() - shape.len();
    for (i, (&dim, &stride)) in shape.iter().zip(&native).enumerate() {
        if dim != 1 {
            assert_eq!(dim, full[off + i], "internal broadcast stride mismatch");
            out[off + i] = stride;
        }
    }
    out
}

/// Iterate row-major over `shape`, maintaining one flat offset per stride
/// vector. The closure receives (linear index, offsets).
fn for_each_offsets(shape: &[usize], strides: &[&[usize]], mut f: impl FnMut(usize, &[usize])) {
    let rank = shape.len();
    let total: usize = shape.iter().product();
    let mut counters = vec![0usize; rank];
    let mut offs = vec![0usize; strides.len()];
    for lin in 0..total {
        f(lin, &offs);
        for ax in (0..rank).rev() {
            counters[ax] += 1;
            for (o, s) in offs.iter_mut().zip(strides) {
                *o += s[ax];
            }
            if counters[ax] < shape[ax] {
                break;
            }
            for (o, s) in offs.iter_mut().zip(strides) {
                *o -= s[ax] * shape[ax];
            }
            counters[ax] = 0;
        }
    }
}

/// Sum `src` (laid out over `full`) down to `target` (trailing-aligned).
fn reduce_to(src: &[f64], full: &[usize], target: &[usize]) -> Vec<f64> {
    if full == target {
        return src.to_vec();
    }
    let ts = bcast_strides(target, full);
    let mut out = vec![0.0; target.iter().product()];
    for_each_offsets(full, &[&ts], |lin, offs| {
        out[offs[0]] += src[lin];
    });
    out
}

fn want_grad(inputs: &[&Tensor]) -> bool {
    tape::recording() && inputs.iter().any(|t| t.requires_grad())
}

impl Tensor {
    // ---- elementwise binary -------------------------------------------------

    fn binary_elementwise(
        &self,
        other: &Tensor,
        f: impl Fn(f64, f64) -> f64,
        make_backward: impl FnOnce(Vec<usize>) -> BackwardFn,
    ) -> Tensor {
        let out_shape = broadcast_shape(self.shape(), other.shape());
        let a = self.data();
        let b = other.data();
        let data = if self.shape() == other.shape() {
            a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let sa = bcast_strides(self.shape(), &out_shape);
            let sb = bcast_strides(other.shape(), &out_shape);
            let mut data = vec![0.0; out_shape.iter().product()];
            for_each_offsets(&out_shape, &[&sa, &sb], |lin, offs| {
                data[lin] = f(a[offs[0]], b[offs[1]]);
            });
            data
        };
        drop(a);
        drop(b);
        let rg = want_grad(&[self, other]);
        let out = Tensor::with_grad_flag(data, &out_shape, rg);
        if rg {
            tape::record(&out, &[self, other], make_backward(out_shape));
        }
        out
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        let (a_shape, b_shape) = (self.shape().to_vec(), other.shape().to_vec());
        let (a_rg, b_rg) = (self.requires_grad(), other.requires_grad());
        self.binary_elementwise(other, |x, y| x + y, move |out_shape| {
            Box::new(move |g| {
                vec![
                    a_rg.then(|| reduce_to(g, &out_shape, &a_shape)),
                    b_rg.then(|| reduce_to(g, &out_shape, &b_shape)),
                ]
            })
        })
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        let (a_shape, b_shape) = (self.shape().to_vec(), other.shape().to_vec());
        let (a_rg, b_rg) = (self.requires_grad(), other.requires_grad());
        self.binary_elementwise(other, |x, y| x - y, move |out_shape| {
            Box::new(move |g| {
                vec![
                    a_rg.then(|| reduce_to(g, &out_shape, &a_shape)),
                    b_rg.then(|| {
                        let mut d = reduce_to(g, &out_shape, &b_shape);
                        d.iter_mut().for_each(|v| *v = -*v);
                        d
                    }),
                ]
            })
        })
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        let (a_shape, b_shape) = (self.shape().to_vec(), other.shape().to_vec());
        let (a_rg, b_rg) = (self.requires_grad(), other.requires_grad());
        let (a_data, b_data) = (self.to_vec(), other.to_vec());
        self.binary_elementwise(other, |x, y| x * y, move |out_shape| {
            let sa = bcast_strides(&a_shape, &out_shape);
            let sb = bcast_strides(&b_shape, &out_shape);
            Box::new(move |g| {
                let mut da = a_rg.then(|| vec![0.0; a_data.len()]);
                let mut db = b_rg.then(|| vec![0.0; b_data.len()]);
                for_each_offsets(&out_shape, &[&sa, &sb], |lin, offs| {
                    if let Some(da) = da.as_mut() {
                        da[offs[0]] += g[lin] * b_data[offs[1]];
                    }
                    if let Some(db) = db.as_mut() {
                        db[offs[1]] += g[lin] * a_data[offs[0]];
                    }
                });
                vec![da, db]
            })
        })
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        let (a_shape, b_shape) = (self.shape().to_vec(), other.shape().to_vec());
        let (a_rg, b_rg) = (self.requires_grad(), other.requires_grad());
        let (a_data, b_data) = (self.to_vec(), other.to_vec());
        self.binary_elementwise(other, |x, y| x / y, move |out_shape| {
            let sa = bcast_strides(&a_shape, &out_shape);
            let sb = bcast_strides(&b_shape, &out_shape);
            Box::new(move |g| {
                let mut da = a_rg.then(|| vec![0.0; a_data.len()]);
                let mut db = b_rg.then(|| vec![0.0; b_data.len()]);
                for_each_offsets(&out_shape, &[&sa, &sb], |lin, offs| {
                    let bv = b_data[offs[1]];
                    if let Some(da) = da.as_mut() {
                        da[offs[0]] += g[lin] / bv;
                    }
                    if let Some(db) = db.as_mut() {
                        db[offs[1]] -= g[lin] * a_data[offs[0]] / (bv * bv);
                    }
                });
                vec![da, db]
            })
        })
    }

    // ---- scalar and unary ---------------------------------------------------

    fn unary(
        &self,
        f: impl Fn(f64) -> f64,
        backward: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + 'static,
        save_output: bool,
    ) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&v| f(v)).collect();
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(data, self.shape(), rg);
        if rg {
            let x = self.to_vec();
            let y = if save_output { out.to_vec() } else { Vec::new() };
            tape::record(
                &out,
                &[self],
                Box::new(move |g| vec![Some(backward(g, &x, &y))]),
            );
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.unary(|v| v + c, |g, _, _| g.to_vec(), false)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        self.unary(move |v| v * c, move |g, _, _| g.iter().map(|gi| gi * c).collect(), false)
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(
            |v| v.tanh(),
            |g, _, y| g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect(),
            true,
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(
            |v| {
                // overflow-safe in both tails
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            },
            |g, _, y| g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect(),
            true,
        )
    }

    pub fn exp(&self) -> Tensor {
        self.unary(
            |v| v.exp(),
            |g, _, y| g.iter().zip(y).map(|(gi, yi)| gi * yi).collect(),
            true,
        )
    }

    pub fn sqrt(&self) -> Tensor {
        self.unary(
            |v| v.sqrt(),
            |g, _, y| g.iter().zip(y).map(|(gi, yi)| gi * 0.5 / yi).collect(),
            true,
        )
    }

    /// |x|, with subgradient 0 at x = 0.
    pub fn abs(&self) -> Tensor {
        self.unary(
            |v| v.abs(),
            |g, x, _| {
                g.iter()
                    .zip(x)
                    .map(|(gi, xi)| {
                        if *xi > 0.0 {
                            *gi
                        } else if *xi < 0.0 {
                            -*gi
                        } else {
                            0.0
                        }
                    })
                    .collect()
            },
            false,
        )
    }

    pub fn relu(&self) -> Tensor {
        self.unary(
            |v| v.max(0.0),
            |g, x, _| g.iter().zip(x).map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 }).collect(),
            false,
        )
    }

    pub fn square(&self) -> Tensor {
        self.mul(self)
    }

    /// Clamp to [lo, hi]; gradient passes through strictly inside the interval
    /// and at its endpoints.
    pub fn clip(&self, lo: f64, hi: f64) -> Tensor {
        assert!(lo <= hi, "clip bounds out of order: [{lo}, {hi}]");
        self.unary(
            move |v| v.clamp(lo, hi),
            move |g, x, _| {
                g.iter()
                    .zip(x)
                    .map(|(gi, xi)| if *xi >= lo && *xi <= hi { *gi } else { 0.0 })
                    .collect()
            },
            false,
        )
    }

    // ---- matmul ---------------------------------------------------------------

    /// Batched matrix product `[.., m, k] x [.., k, n] -> [.., m, n]` with
    /// trailing-aligned broadcast over the leading axes.
    pub fn matmul(&self, rhs: &Tensor) -> Tensor {
        let a_shape = self.shape().to_vec();
        let b_shape = rhs.shape().to_vec();
        assert!(
            a_shape.len() >= 2 && b_shape.len() >= 2,
            "matmul requires rank >= 2: lhs {:?} rhs {:?}",
            a_shape,
            b_shape
        );
        let (m, k) = (a_shape[a_shape.len() - 2], a_shape[a_shape.len() - 1]);
        let (kb, n) = (b_shape[b_shape.len() - 2], b_shape[b_shape.len() - 1]);
        assert_eq!(
            k, kb,
            "matmul inner dimension mismatch: lhs {:?} rhs {:?}",
            a_shape, b_shape
        );
        let a_batch = &a_shape[..a_shape.len() - 2];
        let b_batch = &b_shape[..b_shape.len() - 2];
        let batch = broadcast_shape(a_batch, b_batch);
        let mut out_shape = batch.clone();
        out_shape.push(m);
        out_shape.push(n);

        // strides over batch axes, in elements (scaled by matrix size)
        let scale = |s: Vec<usize>, mat: usize| s.into_iter().map(|v| v * mat).collect::<Vec<_>>();
        let sa = scale(bcast_strides(a_batch, &batch), m * k);
        let sb = scale(bcast_strides(b_batch, &batch), k * n);

        let a = self.to_vec();
        let b = rhs.to_vec();
        let n_batch: usize = batch.iter().product();
        let mut data = vec![0.0; n_batch * m * n];
        for_each_offsets(&batch, &[&sa, &sb], |lin, offs| {
            mm_block(&a[offs[0]..offs[0] + m * k], &b[offs[1]..offs[1] + k * n], &mut data[lin * m * n..(lin + 1) * m * n], m, k, n);
        });

        let rg = want_grad(&[self, rhs]);
        let out = Tensor::with_grad_flag(data, &out_shape, rg);
        if rg {
            let (a_rg, b_rg) = (self.requires_grad(), rhs.requires_grad());
            let (a_len, b_len) = (a.len(), b.len());
            tape::record(
                &out,
                &[self, rhs],
                Box::new(move |g| {
                    let mut da = a_rg.then(|| vec![0.0; a_len]);
                    let mut db = b_rg.then(|| vec![0.0; b_len]);
                    for_each_offsets(&batch, &[&sa, &sb], |lin, offs| {
                        let gm = &g[lin * m * n..(lin + 1) * m * n];
                        if let Some(da) = da.as_mut() {
                            // da += g . b^T
                            let bm = &b[offs[1]..offs[1] + k * n];
                            let dam = &mut da[offs[0]..offs[0] + m * k];
                            for i in 0..m {
                                for p in 0..k {
                                    let mut s = 0.0;
                                    for j in 0..n {
                                        s += gm[i * n + j] * bm[p * n + j];
                                    }
                                    dam[i * k + p] += s;
                                }
                            }
                        }
                        if let Some(db) = db.as_mut() {
                            // db += a^T . g
                            let am = &a[offs[0]..offs[0] + m * k];
                            let dbm = &mut db[offs[1]..offs[1] + k * n];
                            for i in 0..m {
                                for p in 0..k {
                                    let av = am[i * k + p];
                                    if av == 0.0 {
                                        continue;
                                    }
                                    for j in 0..n {
                                        dbm[p * n + j] += av * gm[i * n + j];
                                    }
                                }
                            }
                        }
                    });
                    vec![da, db]
                }),
            );
        }
        out
    }

    /// Outer product over the trailing axis: `[.., p] x [.., q] -> [.., p, q]`.
    pub fn outer(&self, other: &Tensor) -> Tensor {
        let mut a_shape = self.shape().to_vec();
        let p = a_shape.pop().expect("outer on rank-0 tensor");
        a_shape.push(p);
        a_shape.push(1);
        let mut b_shape = other.shape().to_vec();
        let q = b_shape.pop().expect("outer on rank-0 tensor");
        b_shape.push(1);
        b_shape.push(q);
        self.reshape(&a_shape).matmul(&other.reshape(&b_shape))
    }

    // ---- reductions ------------------------------------------------------------

    pub fn sum_axes(&self, axes: &[usize], keepdim: bool) -> Tensor {
        let in_shape = self.shape().to_vec();
        for &ax in axes {
            assert!(ax < in_shape.len(), "sum axis {} out of range for {:?}", ax, in_shape);
        }
        let mut kept = in_shape.clone();
        for &ax in axes {
            kept[ax] = 1;
        }
        let out_shape: Vec<usize> = if keepdim {
            kept.clone()
        } else {
            in_shape
                .iter()
                .enumerate()
                .filter(|(i, _)| !axes.contains(i))
                .map(|(_, &d)| d)
                .collect()
        };
        let ks = bcast_strides(&kept, &in_shape);
        let x = self.data();
        let mut data = vec![0.0; kept.iter().product()];
        for_each_offsets(&in_shape, &[&ks], |lin, offs| {
            data[offs[0]] += x[lin];
        });
        drop(x);
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(data, &out_shape, rg);
        if rg {
            tape::record(
                &out,
                &[self],
                Box::new(move |g| {
                    let mut dx = vec![0.0; in_shape.iter().product()];
                    for_each_offsets(&in_shape, &[&ks], |lin, offs| {
                        dx[lin] = g[offs[0]];
                    });
                    vec![Some(dx)]
                }),
            );
        }
        out
    }

    pub fn mean_axes(&self, axes: &[usize], keepdim: bool) -> Tensor {
        let count: usize = axes.iter().map(|&ax| self.shape()[ax]).product();
        self.sum_axes(axes, keepdim).mul_scalar(1.0 / count as f64)
    }

    pub fn sum_all(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(vec![total], &[], rg);
        if rg {
            let numel = self.numel();
            tape::record(
                &out,
                &[self],
                Box::new(move |g| vec![Some(vec![g[0]; numel])]),
            );
        }
        out
    }

    pub fn mean_all(&self) -> Tensor {
        self.sum_all().mul_scalar(1.0 / self.numel() as f64)
    }

    /// Per-slice maximum along `axis` (keepdim), detached from the tape.
    pub fn max_axis_detached(&self, axis: usize) -> Tensor {
        let in_shape = self.shape().to_vec();
        let mut kept = in_shape.clone();
        kept[axis] = 1;
        let ks = bcast_strides(&kept, &in_shape);
        let x = self.data();
        let mut data = vec![f64::NEG_INFINITY; kept.iter().product()];
        for_each_offsets(&in_shape, &[&ks], |lin, offs| {
            if x[lin] > data[offs[0]] {
                data[offs[0]] = x[lin];
            }
        });
        drop(x);
        Tensor::new(data, &kept)
    }

    // ---- shape moves ------------------------------------------------------------

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            self.numel(),
            "reshape from {:?} to {:?} changes element count",
            self.shape(),
            shape
        );
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(self.to_vec(), shape, rg);
        if rg {
            tape::record(&out, &[self], Box::new(move |g| vec![Some(g.to_vec())]));
        }
        out
    }

    pub fn permute(&self, perm: &[usize]) -> Tensor {
        let in_shape = self.shape().to_vec();
        assert_eq!(perm.len(), in_shape.len(), "permute rank mismatch");
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            assert!(p < perm.len() && !seen[p], "invalid permutation {:?}", perm);
            seen[p] = true;
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
        let in_strides = strides_of(&in_shape);
        let permuted_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let x = self.data();
        let mut data = vec![0.0; x.len()];
        for_each_offsets(&out_shape, &[&permuted_strides], |lin, offs| {
            data[lin] = x[offs[0]];
        });
        drop(x);
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(data, &out_shape, rg);
        if rg {
            let numel = self.numel();
            tape::record(
                &out,
                &[self],
                Box::new(move |g| {
                    let mut dx = vec![0.0; numel];
                    for_each_offsets(&out_shape, &[&permuted_strides], |lin, offs| {
                        dx[offs[0]] = g[lin];
                    });
                    vec![Some(dx)]
                }),
            );
        }
        out
    }

    /// Swap the last two axes.
    pub fn transpose(&self) -> Tensor {
        let rank = self.rank();
        assert!(rank >= 2, "transpose requires rank >= 2, got {:?}", self.shape());
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(rank - 1, rank - 2);
        self.permute(&perm)
    }

    pub fn broadcast_to(&self, target: &[usize]) -> Tensor {
        let in_shape = self.shape().to_vec();
        let check = broadcast_shape(&in_shape, target);
        assert_eq!(
            check, target,
            "cannot broadcast {:?} to {:?}",
            in_shape, target
        );
        let ss = bcast_strides(&in_shape, target);
        let x = self.data();
        let mut data = vec![0.0; target.iter().product()];
        for_each_offsets(target, &[&ss], |lin, offs| {
            data[lin] = x[offs[0]];
        });
        drop(x);
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(data, target, rg);
        if rg {
            let target = target.to_vec();
            tape::record(
                &out,
                &[self],
                Box::new(move |g| vec![Some(reduce_to(g, &target, &in_shape))]),
            );
        }
        out
    }

    /// Contiguous slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Tensor {
        let in_shape = self.shape().to_vec();
        assert!(axis < in_shape.len(), "narrow axis {} out of range for {:?}", axis, in_shape);
        assert!(
            start + len <= in_shape[axis],
            "narrow [{start}, {}) exceeds axis {axis} of {:?}",
            start + len,
            in_shape
        );
        let mut out_shape = in_shape.clone();
        out_shape[axis] = len;
        let in_strides = strides_of(&in_shape);
        let base = start * in_strides[axis];
        let x = self.data();
        let mut data = vec![0.0; out_shape.iter().product()];
        for_each_offsets(&out_shape, &[&in_strides], |lin, offs| {
            data[lin] = x[base + offs[0]];
        });
        drop(x);
        let rg = want_grad(&[self]);
        let out = Tensor::with_grad_flag(data, &out_shape, rg);
        if rg {
            let numel = self.numel();
            tape::record(
                &out,
                &[self],
                Box::new(move |g| {
                    let mut dx = vec![0.0; numel];
                    for_each_offsets(&out_shape, &[&in_strides], |lin, offs| {
                        dx[base + offs[0]] = g[lin];
                    });
                    vec![Some(dx)]
                }),
            );
        }
        out
    }

    /// Pick one index along `axis`, dropping that axis.
    pub fn select(&self, axis: usize, index: usize) -> Tensor {
        let mut out_shape = self.shape().to_vec();
        out_shape.remove(axis);
        self.narrow(axis, index, 1).reshape(&out_shape)
    }

    /// Concatenate along `axis`; all other axes must agree.
    pub fn cat(parts: &[Tensor], axis: usize) -> Tensor {
        assert!(!parts.is_empty(), "cat of zero tensors");
        let first = parts[0].shape().to_vec();
        assert!(axis < first.len(), "cat axis {} out of range for {:?}", axis, first);
        let mut axis_total = 0;
        for p in parts {
            let s = p.shape();
            assert_eq!(s.len(), first.len(), "cat rank mismatch: {:?} vs {:?}", s, first);
            for (i, (&a, &b)) in s.iter().zip(&first).enumerate() {
                assert!(
                    i == axis || a == b,
                    "cat shape mismatch on axis {}: {:?} vs {:?}",
                    i,
                    s,
                    first
                );
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let out_block = axis_total * inner;
        let mut data = vec![0.0; outer * out_block];
        let mut lens = Vec::with_capacity(parts.len());
        let mut running = 0usize;
        for p in parts {
            let len = p.shape()[axis];
            let block = len * inner;
            let src = p.data();
            for o in 0..outer {
                let dst = o * out_block + running * inner;
                data[dst..dst + block].copy_from_slice(&src[o * block..(o + 1) * block]);
            }
            lens.push(len);
            running += len;
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        let rg = want_grad(&refs);
        let out = Tensor::with_grad_flag(data, &out_shape, rg);
        if rg {
            tape::record(
                &out,
                &refs,
                Box::new(move |g| {
                    let mut grads = Vec::with_capacity(lens.len());
                    let mut running = 0usize;
                    for &len in &lens {
                        let block = len * inner;
                        let mut dp = vec![0.0; outer * block];
                        for o in 0..outer {
                            let src = o * out_block + running * inner;
                            dp[o * block..(o + 1) * block].copy_from_slice(&g[src..src + block]);
                        }
                        grads.push(Some(dp));
                        running += len;
                    }
                    grads
                }),
            );
        }
        out
    }

    // ---- composites -------------------------------------------------------------

    /// Numerically stable softmax along `axis` (max-subtraction; the shift is
    /// detached, which is exact because softmax is shift-invariant).
    pub fn softmax(&self, axis: usize) -> Tensor {
        let shifted = self.sub(&self.max_axis_detached(axis));
        let e = shifted.exp();
        let s = e.sum_axes(&[axis], true);
        e.div(&s)
    }

    /// Standardize along `axis`: (x - mean) / sqrt(var + eps), population
    /// variance. Affine terms are the caller's business.
    pub fn layer_norm(&self, axis: usize, eps: f64) -> Tensor {
        let mean = self.mean_axes(&[axis], true);
        let centered = self.sub(&mean);
        let var = centered.square().mean_axes(&[axis], true);
        centered.div(&var.add_scalar(eps).sqrt())
    }
}

fn mm_block(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
}
