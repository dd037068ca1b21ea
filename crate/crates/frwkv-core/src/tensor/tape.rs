//! Thread-local Wengert tape.
//!
//! Each differentiable op pushes one entry: the node ids of its inputs and a
//! closure mapping the output gradient to per-input gradients. `backward`
//! seeds the scalar loss with 1, walks entries in reverse topological order
//! (which is just reverse push order), accumulates into input slots, and
//! returns the leaf gradients. The tape is drained by `backward`, so each
//! training step starts from an empty tape.

use std::cell::RefCell;

use super::Tensor;

pub(crate) type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Option<Vec<f64>>>>;

struct Entry {
    /// Node ids of the op inputs; `None` marks a non-differentiable input.
    inputs: Vec<Option<usize>>,
    /// Number of elements in the output (gradient buffer size).
    numel: usize,
    /// Leaf entries have no backward closure.
    backward: Option<BackwardFn>,
}

struct Tape {
    generation: u64,
    entries: Vec<Entry>,
    no_grad_depth: u32,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape {
        generation: 0,
        entries: Vec::new(),
        no_grad_depth: 0,
    });
}

/// Is the tape currently recording?
pub(crate) fn recording() -> bool {
    TAPE.with(|t| t.borrow().no_grad_depth == 0)
}

/// Run `f` with recording disabled (nestable).
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    TAPE.with(|t| t.borrow_mut().no_grad_depth += 1);
    let out = f();
    TAPE.with(|t| t.borrow_mut().no_grad_depth -= 1);
    out
}

/// Ensure a requires-grad tensor is present on the tape as a leaf.
fn leaf_node(tape: &mut Tape, t: &Tensor) -> usize {
    if let Some((gen, idx)) = t.node() {
        if gen == tape.generation {
            return idx;
        }
    }
    let idx = tape.entries.len();
    tape.entries.push(Entry {
        inputs: Vec::new(),
        numel: t.numel(),
        backward: None,
    });
    t.set_node((tape.generation, idx));
    idx
}

/// Record an op on the tape. `inputs` must align with the gradient slots the
/// backward closure returns. Call only when the output requires grad.
pub(crate) fn record(out: &Tensor, inputs: &[&Tensor], backward: BackwardFn) {
    TAPE.with(|t| {
        let mut tape = t.borrow_mut();
        let input_nodes: Vec<Option<usize>> = inputs
            .iter()
            .map(|inp| {
                if inp.requires_grad() {
                    Some(leaf_node(&mut tape, inp))
                } else {
                    None
                }
            })
            .collect();
        let idx = tape.entries.len();
        tape.entries.push(Entry {
            inputs: input_nodes,
            numel: out.numel(),
            backward: Some(backward),
        });
        out.set_node((tape.generation, idx));
    });
}

/// Gradients produced by one backward pass, addressed by tensor.
pub struct Gradients {
    generation: u64,
    slots: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `t`, if `t` was part of the graph.
    pub fn get(&self, t: &Tensor) -> Option<&[f64]> {
        match t.node() {
            Some((gen, idx)) if gen == self.generation => {
                self.slots.get(idx).and_then(|s| s.as_deref())
            }
            _ => None,
        }
    }

    /// Gradient of the loss w.r.t. `t`, zeros if the leaf was unreached.
    pub fn wrt(&self, t: &Tensor) -> Vec<f64> {
        self.get(t)
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![0.0; t.numel()])
    }
}

/// Reverse pass from a scalar loss. Drains the tape.
pub fn backward(loss: &Tensor) -> Gradients {
    assert_eq!(
        loss.numel(),
        1,
        "backward requires a scalar loss, got shape {:?}",
        loss.shape()
    );
    TAPE.with(|t| {
        let mut tape = t.borrow_mut();
        let generation = tape.generation;
        let (loss_gen, loss_idx) = loss
            .node()
            .expect("backward: loss is not connected to the tape");
        assert_eq!(loss_gen, generation, "backward: loss is from a stale tape");

        let entries = std::mem::take(&mut tape.entries);
        tape.generation += 1;
        drop(tape);

        let mut slots: Vec<Option<Vec<f64>>> = vec![None; entries.len()];
        slots[loss_idx] = Some(vec![1.0]);

        for idx in (0..=loss_idx).rev() {
            let entry = &entries[idx];
            let Some(bwd) = entry.backward.as_ref() else {
                continue; // leaf: keep its accumulated gradient
            };
            let Some(grad_out) = slots[idx].take() else {
                continue; // not on any path to the loss
            };
            debug_assert_eq!(grad_out.len(), entry.numel);
            let input_grads = bwd(&grad_out);
            debug_assert_eq!(input_grads.len(), entry.inputs.len());
            for (slot, grad) in entry.inputs.iter().zip(input_grads) {
                let (Some(dst), Some(g)) = (slot, grad) else {
                    continue;
                };
                match &mut slots[*dst] {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            *a += b;
                        }
                    }
                    none => *none = Some(g),
                }
            }
        }

        Gradients { generation, slots }
    })
}

/// Drop any recorded entries without running backward (error-path cleanup).
pub fn reset() {
    TAPE.with(|t| {
        let mut tape = t.borrow_mut();
        tape.entries.clear();
        tape.generation += 1;
    });
}
