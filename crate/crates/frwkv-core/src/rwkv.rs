//! RWKV-style linear state-update blocks and the branch encoder that applies
//! them along the frequency axis of one spectral stream.
//!
//! Each block derives seven streams (receptance, removal key, replacement
//! key, value, output gate, interpolation, decay) from token-shift-mixed
//! inputs. The recurrent state holds one d_h x d_h matrix per head; a step
//! applies a decay-and-removal transition and writes the value under the
//! replacement key:
//!
//!   S_l = (diag(d_l) - khat_l (khat_l * eta_l)^T) S_{l-1} + v_l (k_l^rep)^T
//!
//! with khat the per-head unit-normalized removal key. The receptance reads
//! S_l r_l, which is group-normalized per head, gated, and projected. Block
//! output projections start at zero, so every block (and the whole branch)
//! is the identity at initialization.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{zeros_param, Linear, ParamVisitor};
use crate::tensor::Tensor;

const GROUPNORM_EPS: f64 = 1e-5;
const KEY_NORM_EPS: f64 = 1e-12;

/// Stream order inside `tm_mix` / `tm_proj`.
const R: usize = 0;
const K_REM: usize = 1;
const K_REP: usize = 2;
const V: usize = 3;
const G: usize = 4;
const ETA: usize = 5;
const DECAY: usize = 6;
const STREAMS: usize = 7;

/// Per-step inputs to the state update, all `[rows, heads, d_h]`.
/// `decay` and `interp` are already in (0,1); `removal_key` is raw (it is
/// unit-normalized inside the update); `out_gate` is a raw logit.
pub struct StepStreams {
    pub receptance: Tensor,
    pub removal_key: Tensor,
    pub replacement_key: Tensor,
    pub value: Tensor,
    pub out_gate: Tensor,
    pub interp: Tensor,
    pub decay: Tensor,
}

/// One recurrence step on the `[rows, heads, d_h, d_h]` state.
pub fn rwkv_state_update(state: &Tensor, streams: &StepStreams) -> Tensor {
    let s = state.shape();
    assert_eq!(s.len(), 4, "state must be [rows, heads, d_h, d_h], got {:?}", s);
    let (rows, heads, dh) = (s[0], s[1], s[2]);
    assert_eq!(s[2], s[3], "state must be square per head, got {:?}", s);
    for (name, t) in [
        ("receptance", &streams.receptance),
        ("removal_key", &streams.removal_key),
        ("replacement_key", &streams.replacement_key),
        ("value", &streams.value),
        ("interp", &streams.interp),
        ("decay", &streams.decay),
    ] {
        assert_eq!(
            t.shape(),
            &[rows, heads, dh],
            "{name} shape {:?} does not match state {:?}",
            t.shape(),
            s
        );
    }

    let decayed = state.mul(&streams.decay.reshape(&[rows, heads, dh, 1]));
    let norm = streams
        .removal_key
        .square()
        .sum_axes(&[2], true)
        .add_scalar(KEY_NORM_EPS)
        .sqrt();
    let k_hat = streams.removal_key.div(&norm);
    let removal_read = k_hat
        .mul(&streams.interp)
        .reshape(&[rows, heads, 1, dh])
        .matmul(state); // (khat * eta)^T S
    let removal = k_hat.reshape(&[rows, heads, dh, 1]).matmul(&removal_read);
    let write = streams
        .value
        .reshape(&[rows, heads, dh, 1])
        .matmul(&streams.replacement_key.reshape(&[rows, heads, 1, dh]));
    decayed.sub(&removal).add(&write)
}

/// Receptance read: S r, shape `[rows, heads, d_h]`.
fn state_read(state: &Tensor, receptance: &Tensor) -> Tensor {
    let s = state.shape();
    let (rows, heads, dh) = (s[0], s[1], s[2]);
    state
        .matmul(&receptance.reshape(&[rows, heads, dh, 1]))
        .reshape(&[rows, heads, dh])
}

/// Parameters of one block: time mix (state recurrence) plus channel mix.
pub struct BlockParams {
    pub heads: usize,
    pub tm_mix: Vec<Tensor>,   // STREAMS x [H] raw mix logits
    pub tm_proj: Vec<Linear>,  // STREAMS x (H -> H)
    pub gn_scale: Tensor,      // [H]
    pub gn_shift: Tensor,      // [H]
    pub tm_out: Linear,        // H -> H, zero-init
    pub cm_mix_k: Tensor,      // [H]
    pub cm_mix_r: Tensor,      // [H]
    pub cm_key: Linear,        // H -> FF
    pub cm_value: Linear,      // FF -> H, zero-init
    pub cm_receptance: Linear, // H -> H
}

impl BlockParams {
    pub fn init(rng: &mut ChaCha8Rng, hidden: usize, heads: usize, ff_dim: usize) -> BlockParams {
        assert!(
            heads >= 1 && hidden % heads == 0,
            "heads {heads} must divide hidden {hidden}"
        );
        BlockParams {
            heads,
            tm_mix: (0..STREAMS).map(|_| zeros_param(&[hidden])).collect(),
            tm_proj: (0..STREAMS)
                .map(|_| Linear::init(rng, hidden, hidden))
                .collect(),
            gn_scale: Tensor::param(vec![1.0; hidden], &[hidden]),
            gn_shift: zeros_param(&[hidden]),
            tm_out: Linear::zeros(hidden, hidden),
            cm_mix_k: zeros_param(&[hidden]),
            cm_mix_r: zeros_param(&[hidden]),
            cm_key: Linear::init(rng, hidden, ff_dim),
            cm_value: Linear::zeros(ff_dim, hidden),
            cm_receptance: Linear::init(rng, hidden, hidden),
        }
    }

    /// Closed-form parameter count for the given dims.
    pub fn expected_param_count(hidden: usize, ff_dim: usize) -> usize {
        let dense = |i: usize, o: usize| i * o + o;
        STREAMS * hidden                      // mix logits
            + STREAMS * dense(hidden, hidden) // stream projections
            + 2 * hidden                      // groupnorm affine
            + dense(hidden, hidden)           // time-mix output projection
            + 2 * hidden                      // channel-mix logits
            + dense(hidden, ff_dim)
            + dense(ff_dim, hidden)
            + dense(hidden, hidden)
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("block", &mut |_, t, _| n += t.numel());
        n
    }

    pub fn visit(&self, name: &str, f: &mut ParamVisitor) {
        const STREAM_NAMES: [&str; STREAMS] =
            ["r", "k_rem", "k_rep", "v", "gate", "interp", "decay"];
        for (i, t) in self.tm_mix.iter().enumerate() {
            f(format!("{name}.mix_{}", STREAM_NAMES[i]), t, false);
        }
        for (i, l) in self.tm_proj.iter().enumerate() {
            l.visit(&format!("{name}.proj_{}", STREAM_NAMES[i]), f);
        }
        f(format!("{name}.gn_scale"), &self.gn_scale, false);
        f(format!("{name}.gn_shift"), &self.gn_shift, false);
        self.tm_out.visit(&format!("{name}.out"), f);
        f(format!("{name}.cm_mix_k"), &self.cm_mix_k, false);
        f(format!("{name}.cm_mix_r"), &self.cm_mix_r, false);
        self.cm_key.visit(&format!("{name}.cm_key"), f);
        self.cm_value.visit(&format!("{name}.cm_value"), f);
        self.cm_receptance.visit(&format!("{name}.cm_r"), f);
    }

    fn group_norm(&self, read: &Tensor) -> Tensor {
        let s = read.shape().to_vec();
        let h = *s.last().unwrap();
        let dh = h / self.heads;
        let mut grouped = s[..s.len() - 1].to_vec();
        grouped.push(self.heads);
        grouped.push(dh);
        let normed = read
            .reshape(&grouped)
            .layer_norm(grouped.len() - 1, GROUPNORM_EPS)
            .reshape(&s);
        normed.mul(&self.gn_scale).add(&self.gn_shift)
    }

    /// Per-step streams from already-mixed, already-projected sequences.
    fn streams_at(&self, seqs: &BlockStreams, l: usize, rows: usize, dh: usize) -> StepStreams {
        let pick = |t: &Tensor| t.narrow(1, l, 1).reshape(&[rows, self.heads, dh]);
        StepStreams {
            receptance: pick(&seqs.receptance),
            removal_key: pick(&seqs.removal_key),
            replacement_key: pick(&seqs.replacement_key),
            value: pick(&seqs.value),
            out_gate: pick(&seqs.out_gate),
            interp: pick(&seqs.interp),
            decay: pick(&seqs.decay),
        }
    }

    fn mixed_streams(&self, x: &Tensor) -> BlockStreams {
        let x_prev = shift_back(x);
        let delta = x_prev.sub(x);
        let mix = |i: usize| {
            let mixed = x.add(&delta.mul(&self.tm_mix[i].sigmoid()));
            self.tm_proj[i].apply(&mixed)
        };
        BlockStreams {
            receptance: mix(R),
            removal_key: mix(K_REM),
            replacement_key: mix(K_REP),
            value: mix(V),
            out_gate: mix(G),
            interp: mix(ETA).sigmoid(),
            decay: mix(DECAY).sigmoid(),
        }
    }

    /// `[rows, F, H] -> [rows, F, H]` with the block-level residual.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        assert_eq!(s.len(), 3, "block input must be [rows, F, H], got {:?}", s);
        let (rows, f, h) = (s[0], s[1], s[2]);
        let dh = h / self.heads;
        let seqs = self.mixed_streams(x);

        let mut state = Tensor::zeros(&[rows, self.heads, dh, dh]);
        let mut reads = Vec::with_capacity(f);
        for l in 0..f {
            let step = self.streams_at(&seqs, l, rows, dh);
            state = rwkv_state_update(&state, &step);
            if !state.is_finite() {
                return Err(Error::Divergence(format!(
                    "rwkv state not finite at frequency bin {l}"
                )));
            }
            reads.push(state_read(&state, &step.receptance).reshape(&[rows, 1, h]));
        }
        let read_seq = Tensor::cat(&reads, 1);
        let gated = self.group_norm(&read_seq).mul(&seqs.out_gate.sigmoid());
        let after_tm = x.add(&self.tm_out.apply(&gated));

        // channel mix
        let x_prev = shift_back(&after_tm);
        let delta = x_prev.sub(&after_tm);
        let xk = after_tm.add(&delta.mul(&self.cm_mix_k.sigmoid()));
        let xr = after_tm.add(&delta.mul(&self.cm_mix_r.sigmoid()));
        let key = self.cm_key.apply(&xk).relu().square();
        let cm = self
            .cm_value
            .apply(&key)
            .mul(&self.cm_receptance.apply(&xr).sigmoid());
        Ok(after_tm.add(&cm))
    }
}

struct BlockStreams {
    receptance: Tensor,
    removal_key: Tensor,
    replacement_key: Tensor,
    value: Tensor,
    out_gate: Tensor,
    interp: Tensor,
    decay: Tensor,
}

/// One public recurrence step: updated state plus the block output for this
/// step (group-normalized read, gated, projected). `step_index` is only used
/// in the divergence message.
pub fn rwkv_step(
    state: &Tensor,
    streams: &StepStreams,
    block: &BlockParams,
    step_index: usize,
) -> Result<(Tensor, Tensor)> {
    let new_state = rwkv_state_update(state, streams);
    if !new_state.is_finite() {
        return Err(Error::Divergence(format!(
            "rwkv state not finite at step {step_index}"
        )));
    }
    let s = new_state.shape();
    let (rows, heads, dh) = (s[0], s[1], s[2]);
    let read = state_read(&new_state, &streams.receptance).reshape(&[rows, heads * dh]);
    let gate = streams.out_gate.reshape(&[rows, heads * dh]).sigmoid();
    let out = block.tm_out.apply(&block.group_norm(&read).mul(&gate));
    Ok((new_state, out))
}

/// Prepend a zero step along the sequence axis of `[rows, F, H]`.
fn shift_back(x: &Tensor) -> Tensor {
    let s = x.shape();
    let (rows, f, h) = (s[0], s[1], s[2]);
    if f == 1 {
        return Tensor::zeros(&[rows, 1, h]);
    }
    Tensor::cat(&[Tensor::zeros(&[rows, 1, h]), x.narrow(1, 0, f - 1)], 1)
}

/// One spectral stream's encoder: lift D channels to the hidden width, run
/// the blocks over frequency bins, project back, and add the residual.
pub struct BranchParams {
    pub input_proj: Linear,  // D -> H
    pub blocks: Vec<BlockParams>,
    pub output_proj: Linear, // H -> D, zero-init
}

impl BranchParams {
    pub fn init(
        rng: &mut ChaCha8Rng,
        channels: usize,
        hidden: usize,
        heads: usize,
        ff_dim: usize,
        layers: usize,
    ) -> BranchParams {
        BranchParams {
            input_proj: Linear::init(rng, channels, hidden),
            blocks: (0..layers)
                .map(|_| BlockParams::init(rng, hidden, heads, ff_dim))
                .collect(),
            output_proj: Linear::zeros(hidden, channels),
        }
    }

    pub fn expected_param_count(
        channels: usize,
        hidden: usize,
        ff_dim: usize,
        layers: usize,
    ) -> usize {
        let dense = |i: usize, o: usize| i * o + o;
        dense(channels, hidden)
            + layers * BlockParams::expected_param_count(hidden, ff_dim)
            + dense(hidden, channels)
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("branch", &mut |_, t, _| n += t.numel());
        n
    }

    pub fn visit(&self, name: &str, f: &mut ParamVisitor) {
        self.input_proj.visit(&format!("{name}.in"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&format!("{name}.block{i}"), f);
        }
        self.output_proj.visit(&format!("{name}.out"), f);
    }

    /// `[B, N, D, F] -> [B, N, D, F]`, residual included.
    pub fn encode(&self, z: &Tensor) -> Result<Tensor> {
        let s = z.shape();
        assert_eq!(s.len(), 4, "branch input must be [B,N,D,F], got {:?}", s);
        let (b, n, d, f) = (s[0], s[1], s[2], s[3]);
        let seq = z.permute(&[0, 1, 3, 2]).reshape(&[b * n, f, d]);
        let mut h = self.input_proj.apply(&seq);
        for block in &self.blocks {
            h = block.forward(&h)?;
        }
        let back = self
            .output_proj
            .apply(&h)
            .reshape(&[b, n, f, d])
            .permute(&[0, 1, 3, 2]);
        Ok(z.add(&back))
    }
}
