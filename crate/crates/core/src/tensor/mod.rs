//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Every operation produces a new [`Tensor`] which remembers its inputs when
//! any of them requires a gradient. Calling [`Tensor::backward`] on a scalar
//! walks that graph in reverse creation order and accumulates gradients into
//! every leaf created with [`Tensor::parameter`].
//!
//! ```
//! use lpfc::tensor::Tensor;
//!
//! let x = Tensor::parameter(vec![3.0], &[1]).unwrap();
//! let loss = x.mul(&x).unwrap().sum_all();
//! loss.backward().unwrap();
//! assert_eq!(x.grad().unwrap(), vec![6.0]);
//! ```
//!
//! Graphs are single-threaded (`Rc`-based). Independent graphs may be built
//! on separate threads; parameters live outside the graph in a
//! [`ParamStore`] and are bound into a graph per forward pass.

mod backward;
mod ops;
pub mod optim;
pub mod params;

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

pub use optim::Sgd;
pub use params::{Param, ParamBinding, ParamId, ParamStore};

/// Errors raised by tensor construction, operations and the optimizer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("backward called on a tensor that is not recorded on any tape")]
    NotOnTape,
    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub(crate) struct Node {
    id: u64,
    shape: Vec<usize>,
    values: Vec<f64>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    op: Op,
}

/// The recorded operation that produced a node.
pub(crate) enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Affine(Tensor, f64),
    Relu(Tensor),
    Tanh(Tensor),
    Sigmoid(Tensor),
    Log(Tensor),
    Softmax(Tensor),
    Sum(Tensor, usize),
    Mean(Tensor, usize),
    SumAll(Tensor),
    WeightedMean { x: Tensor, w: Tensor, axis: usize },
    Concat(Vec<Tensor>),
    L2Normalize(Tensor),
    Norm(Tensor),
    Minimum(Tensor, Tensor),
    Clamp { x: Tensor, lo: f64, hi: f64 },
    BatchedMatVec { m: Tensor, x: Tensor, transpose: bool },
    Reshape(Tensor),
    SliceLast { x: Tensor, start: usize },
}

/// A dense row-major tensor participating in an autodiff graph.
#[derive(Clone)]
pub struct Tensor(pub(crate) Rc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl Tensor {
    fn leaf(values: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<Tensor> {
        if values.len() != numel(shape) {
            return Err(TensorError::InvalidArgument {
                op: "tensor",
                msg: format!("{} values do not fill shape {:?}", values.len(), shape),
            });
        }
        Ok(Tensor(Rc::new(Node {
            id: next_id(),
            shape: shape.to_vec(),
            values,
            requires_grad,
            grad: RefCell::new(None),
            op: Op::Leaf,
        })))
    }

    /// A constant tensor; gradients never flow into it.
    pub fn new(values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Self::leaf(values, shape, false)
    }

    /// A leaf that accumulates gradients on [`backward`](Self::backward).
    pub fn parameter(values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Self::leaf(values, shape, true)
    }

    pub fn scalar(value: f64) -> Tensor {
        Self::leaf(vec![value], &[], false).expect("scalar shape")
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Self::leaf(vec![0.0; numel(shape)], shape, false).expect("zeros shape")
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Self::leaf(vec![value; numel(shape)], shape, false).expect("full shape")
    }

    /// Builds a derived node. The op is only retained when some input needs
    /// a gradient, so inference graphs do not keep their inputs alive.
    pub(crate) fn from_op(values: Vec<f64>, shape: Vec<usize>, op: Op, inputs: &[&Tensor]) -> Tensor {
        debug_assert_eq!(values.len(), numel(&shape));
        let requires_grad = inputs.iter().any(|t| t.0.requires_grad);
        Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            values,
            requires_grad,
            grad: RefCell::new(None),
            op: if requires_grad { op } else { Op::Leaf },
        }))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn len(&self) -> usize {
        self.0.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.values.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// The value of a single-element tensor.
    pub fn item(&self) -> f64 {
        self.0.values[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    /// Removes and returns the accumulated gradient.
    pub fn take_grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow_mut().take()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// A copy of this tensor cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Self::leaf(self.0.values.clone(), &self.0.shape, false).expect("same shape")
    }

    pub(crate) fn id(&self) -> u64 {
        self.0.id
    }

    pub(crate) fn is_leaf(&self) -> bool {
        matches!(self.0.op, Op::Leaf)
    }
}
