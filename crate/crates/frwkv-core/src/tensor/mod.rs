//! Dense row-major f64 tensors with tape-based reverse-mode differentiation.
//!
//! A `Tensor` is an immutable handle (`Rc` inside) onto flat storage plus
//! shape metadata. Operations build new tensors and, while recording is
//! enabled and some input requires gradients, push a backward closure onto a
//! thread-local tape. `tape::backward` walks that tape in reverse and returns
//! a [`tape::Gradients`] map from which leaf gradients are read.
//!
//! Everything is f64: determinism and tight test tolerances matter more than
//! speed at the scales this crate targets.

mod ops;
mod tape;

pub use ops::broadcast_shape;
pub use tape::{backward, no_grad, reset, Gradients};

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::fmt;
use std::rc::Rc;

/// Node position on the tape: (tape generation, entry index).
pub(crate) type NodeRef = (u64, usize);

struct Inner {
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    node: Cell<Option<NodeRef>>,
}

/// Dense multi-axis real array. Clones share storage.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Tensor {
        let numel: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            numel,
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            inner: Rc::new(Inner {
                shape: shape.to_vec(),
                data: RefCell::new(data),
                requires_grad: false,
                node: Cell::new(None),
            }),
        }
    }

    /// A leaf that participates in gradient computation.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Tensor {
        let numel: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            numel,
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            inner: Rc::new(Inner {
                shape: shape.to_vec(),
                data: RefCell::new(data),
                requires_grad: true,
                node: Cell::new(None),
            }),
        }
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::new(vec![0.0; shape.iter().product()], shape)
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::new(vec![1.0; shape.iter().product()], shape)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Tensor::new(vec![value; shape.iter().product()], shape)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::new(vec![value], &[])
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    /// Mutable access to the raw storage. Used by the optimizer and by
    /// finite-difference probes; never call while a forward graph that
    /// captured this tensor is still awaiting backward.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Value of a scalar (or single-element) tensor.
    pub fn item(&self) -> f64 {
        let d = self.inner.data.borrow();
        assert_eq!(d.len(), 1, "item() on tensor of shape {:?}", self.shape());
        d[0]
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.rank(), "index rank mismatch");
        let mut off = 0;
        let mut stride = 1;
        for ax in (0..index.len()).rev() {
            assert!(index[ax] < self.inner.shape[ax], "index out of bounds");
            off += index[ax] * stride;
            stride *= self.inner.shape[ax];
        }
        self.inner.data.borrow()[off]
    }

    /// Copy of this tensor detached from the tape.
    pub fn detach(&self) -> Tensor {
        Tensor::new(self.to_vec(), &self.inner.shape)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    /// Identity check: do two handles share storage?
    pub fn same_storage(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub(crate) fn node(&self) -> Option<NodeRef> {
        self.inner.node.get()
    }

    pub(crate) fn set_node(&self, node: NodeRef) {
        self.inner.node.set(Some(node));
    }

    /// Output tensor of an op: requires_grad is decided by the caller.
    pub(crate) fn with_grad_flag(data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Tensor {
        let numel: usize = shape.iter().product();
        assert_eq!(data.len(), numel, "op output length/shape mismatch");
        Tensor {
            inner: Rc::new(Inner {
                shape: shape.to_vec(),
                data: RefCell::new(data),
                requires_grad,
                node: Cell::new(None),
            }),
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.inner.data.borrow();
        let head: Vec<f64> = d.iter().take(8).copied().collect();
        write!(
            f,
            "Tensor(shape={:?}, grad={}, data={:?}{})",
            self.inner.shape,
            self.inner.requires_grad,
            head,
            if d.len() > 8 { ", ..." } else { "" }
        )
    }
}

/// Row-major strides for a shape.
pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; shape.len()];
    let mut acc = 1usize;
    for ax in (0..shape.len()).rev() {
        strides[ax] = acc;
        acc *= shape[ax];
    }
    strides
}
