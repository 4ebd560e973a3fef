use super::AutogradError;
use crate::scalar::Scalar;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

pub(crate) struct Node<S: Scalar> {
    pub shape: Vec<usize>,
    pub data: Vec<S>,
    pub grad: Option<Vec<S>>,
    pub requires_grad: bool,
    pub op: super::ops::Op<S>,
}

/// Execution record of a differentiable computation. Ops append nodes in
/// topological order, so one reverse sweep visits every node exactly once.
pub struct Tape<S: Scalar> {
    pub(crate) nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input tensor.
    pub fn leaf(
        &mut self,
        shape: &[usize],
        data: Vec<S>,
        requires_grad: bool,
    ) -> Result<TensorId, AutogradError> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(AutogradError::ShapeMismatch {
                op: "leaf",
                detail: format!("shape {:?} needs {} values, got {}", shape, numel, data.len()),
            });
        }
        Ok(self.push(shape.to_vec(), data, requires_grad, super::ops::Op::Leaf))
    }

    pub(crate) fn push(
        &mut self,
        shape: Vec<usize>,
        data: Vec<S>,
        requires_grad: bool,
        op: super::ops::Op<S>,
    ) -> TensorId {
        self.nodes.push(Node { shape, data, grad: None, requires_grad, op });
        TensorId(self.nodes.len() - 1)
    }

    pub(crate) fn check(&self, id: TensorId) -> Result<(), AutogradError> {
        if id.0 >= self.nodes.len() {
            return Err(AutogradError::InvalidTensor(id.0));
        }
        Ok(())
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn data(&self, id: TensorId) -> &[S] {
        &self.nodes[id.0].data
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Gradient accumulated by the latest [`Tape::backward`], if any.
    pub fn grad(&self, id: TensorId) -> Option<&[S]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate into every
    /// tensor with `requires_grad`; running it twice on the same tape
    /// doubles them, matching accumulation semantics.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), AutogradError> {
        self.check(loss)?;
        let loss_node = &self.nodes[loss.0];
        if loss_node.data.len() != 1 {
            return Err(AutogradError::NonScalarLoss(loss_node.shape.clone()));
        }
        self.accumulate(loss, &[S::one()]);
        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() {
                continue;
            }
            let grad_out = self.nodes[i].grad.take().expect("grad present");
            super::ops::backward_step(self, i, &grad_out);
            self.nodes[i].grad = Some(grad_out);
        }
        Ok(())
    }

    pub(crate) fn accumulate(&mut self, id: TensorId, grad: &[S]) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let node = &mut self.nodes[id.0];
        match node.grad {
            Some(ref mut g) => {
                for (gi, &vi) in g.iter_mut().zip(grad) {
                    *gi += vi;
                }
            }
            None => node.grad = Some(grad.to_vec()),
        }
    }
}
