//! Central finite-difference gradient checking.
//!
//! The numerical side perturbs raw parameter storage directly, so it is
//! independent of the tape: any disagreement points at a backward closure.

use crate::tensor::{backward, Tensor};

pub struct GradCheck {
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-7,
        }
    }
}

pub struct GradMismatch {
    pub leaf: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl std::fmt::Display for GradMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}[{}]: analytic {:.9e} vs numeric {:.9e}",
            self.leaf, self.index, self.analytic, self.numeric
        )
    }
}

impl GradCheck {
    fn agree(&self, analytic: f64, numeric: f64) -> bool {
        let diff = (analytic - numeric).abs();
        diff <= self.abs_tol + self.rel_tol * analytic.abs().max(numeric.abs())
    }

    /// Compare tape gradients of `loss_fn()` against central differences for
    /// every listed leaf. `loss_fn` must be a pure function of the leaves'
    /// current storage. Returns all mismatches (empty = pass).
    pub fn check(
        &self,
        leaves: &[(&str, &Tensor)],
        mut loss_fn: impl FnMut() -> Tensor,
    ) -> Vec<GradMismatch> {
        let loss = loss_fn();
        let grads = backward(&loss);
        let analytic: Vec<Vec<f64>> = leaves.iter().map(|(_, t)| grads.wrt(t)).collect();

        let mut mismatches = Vec::new();
        for ((name, leaf), grad) in leaves.iter().zip(&analytic) {
            for i in 0..leaf.numel() {
                let orig = leaf.data()[i];
                leaf.data_mut()[i] = orig + self.step;
                let up = crate::tensor::no_grad(&mut loss_fn).item();
                leaf.data_mut()[i] = orig - self.step;
                let down = crate::tensor::no_grad(&mut loss_fn).item();
                leaf.data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * self.step);
                if !self.agree(grad[i], numeric) {
                    mismatches.push(GradMismatch {
                        leaf: name.to_string(),
                        index: i,
                        analytic: grad[i],
                        numeric,
                    });
                }
            }
        }
        mismatches
    }

    /// Panicking variant for use inside tests.
    pub fn assert_ok(&self, leaves: &[(&str, &Tensor)], loss_fn: impl FnMut() -> Tensor) {
        let bad = self.check(leaves, loss_fn);
        if !bad.is_empty() {
            let head: Vec<String> = bad.iter().take(10).map(|m| m.to_string()).collect();
            panic!(
                "gradient check failed for {} entries:\n{}",
                bad.len(),
                head.join("\n")
            );
        }
    }
}
