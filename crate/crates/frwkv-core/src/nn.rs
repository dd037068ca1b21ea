//! Small building blocks shared by the model modules: dense layers, the
//! two-layer MLPs used by the gate paths, and parameter visitation for the
//! optimizer / checkpoint machinery.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// Visitor over named parameters. The bool marks decay-eligible tensors
/// (weight matrices); biases, norm scales, router tokens, and alpha are
/// excluded from weight decay.
pub type ParamVisitor<'a> = dyn FnMut(String, &Tensor, bool) + 'a;

pub fn uniform_init(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    Tensor::param((0..n).map(|_| rng.gen_range(-bound..bound)).collect(), shape)
}

pub fn normal_init(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> Tensor {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, std).expect("valid normal params");
    let n: usize = shape.iter().product();
    Tensor::param((0..n).map(|_| normal.sample(rng)).collect(), shape)
}

pub fn zeros_param(shape: &[usize]) -> Tensor {
    Tensor::param(vec![0.0; shape.iter().product()], shape)
}

/// Dense layer: y = x W + b with W stored [in, out].
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            weight: uniform_init(rng, &[fan_in, fan_out], fan_in),
            bias: zeros_param(&[fan_out]),
        }
    }

    /// All-zero weights and bias; the layer starts as the constant 0 map.
    pub fn zeros(fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            weight: zeros_param(&[fan_in, fan_out]),
            bias: zeros_param(&[fan_out]),
        }
    }

    pub fn apply(&self, x: &Tensor) -> Tensor {
        x.matmul(&self.weight).add(&self.bias)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }

    pub fn visit(&self, name: &str, f: &mut ParamVisitor) {
        f(format!("{name}.weight"), &self.weight, true);
        f(format!("{name}.bias"), &self.bias, false);
    }
}

/// Two dense layers with a tanh between; the smallest nontrivial MLP.
pub struct Mlp2 {
    pub hidden: Linear,
    pub out: Linear,
}

impl Mlp2 {
    pub fn init(rng: &mut ChaCha8Rng, in_dim: usize, hidden_dim: usize, out_dim: usize) -> Mlp2 {
        Mlp2 {
            hidden: Linear::init(rng, in_dim, hidden_dim),
            out: Linear::init(rng, hidden_dim, out_dim),
        }
    }

    /// Random hidden layer, zero output layer: the map starts at exactly 0.
    pub fn init_zero_out(
        rng: &mut ChaCha8Rng,
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
    ) -> Mlp2 {
        Mlp2 {
            hidden: Linear::init(rng, in_dim, hidden_dim),
            out: Linear::zeros(hidden_dim, out_dim),
        }
    }

    pub fn apply(&self, x: &Tensor) -> Tensor {
        self.out.apply(&self.hidden.apply(x).tanh())
    }

    pub fn param_count(&self) -> usize {
        self.hidden.param_count() + self.out.param_count()
    }

    pub fn visit(&self, name: &str, f: &mut ParamVisitor) {
        self.hidden.visit(&format!("{name}.hidden"), f);
        self.out.visit(&format!("{name}.out"), f);
    }
}
