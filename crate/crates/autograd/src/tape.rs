//! The tape: a flat record of one forward pass, replayed in reverse for
//! gradients.

use crate::element::Element;
use ndarray::{ArrayD, IxDyn};
use std::cell::RefCell;

/// Handle to a node on a [`Tape`]. Only valid for the tape that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    pub(crate) id: usize,
}

impl Var {
    pub fn id(self) -> usize {
        self.id
    }
}

/// Backward closure: receives the gradient w.r.t. this node's output, its
/// own node id, the values of every node on the tape, and a sink used to
/// accumulate gradient contributions into parent nodes.
pub(crate) type BackwardFn<E> =
    Box<dyn FnOnce(&ArrayD<E>, usize, &[ArrayD<E>], &mut dyn FnMut(usize, ArrayD<E>))>;

struct Inner<E: Element> {
    values: Vec<ArrayD<E>>,
    requires_grad: Vec<bool>,
    backwards: Vec<Option<BackwardFn<E>>>,
}

/// Define-by-run gradient tape. Build one per forward/backward pass and
/// drop it afterwards; parameters persist in a
/// [`ParamStore`](crate::ParamStore) and enter via [`Tape::leaf`].
pub struct Tape<E: Element> {
    inner: RefCell<Inner<E>>,
}

impl<E: Element> Default for Tape<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> Tape<E> {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(Inner {
                values: Vec::new(),
                requires_grad: Vec::new(),
                backwards: Vec::new(),
            }),
        }
    }

    pub(crate) fn push(
        &self,
        value: ArrayD<E>,
        requires_grad: bool,
        backward: Option<BackwardFn<E>>,
    ) -> Var {
        let mut inner = self.inner.borrow_mut();
        let id = inner.values.len();
        inner.values.push(value);
        inner.requires_grad.push(requires_grad);
        inner.backwards.push(if requires_grad { backward } else { None });
        Var { id }
    }

    /// A node that never receives gradient.
    pub fn constant(&self, value: ArrayD<E>) -> Var {
        self.push(value, false, None)
    }

    /// A gradient-carrying leaf (typically a parameter's current value).
    pub fn leaf(&self, value: ArrayD<E>) -> Var {
        self.push(value, true, None)
    }

    pub fn scalar_const(&self, x: E) -> Var {
        self.constant(ArrayD::from_elem(IxDyn(&[1]), x))
    }

    /// Clones the forward value out of the tape.
    pub fn value(&self, v: Var) -> ArrayD<E> {
        self.inner.borrow().values[v.id].clone()
    }

    /// Reads a node's value without cloning.
    pub fn with_value<R>(&self, v: Var, f: impl FnOnce(&ArrayD<E>) -> R) -> R {
        f(&self.inner.borrow().values[v.id])
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.inner.borrow().values[v.id].shape().to_vec()
    }

    pub fn scalar_value(&self, v: Var) -> E {
        let inner = self.inner.borrow();
        let a = &inner.values[v.id];
        assert_eq!(a.len(), 1, "scalar_value on non-scalar node");
        *a.iter().next().unwrap()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.inner.borrow().requires_grad[v.id]
    }

    pub fn num_nodes(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub(crate) fn rg(&self, vars: &[Var]) -> bool {
        let inner = self.inner.borrow();
        vars.iter().any(|v| inner.requires_grad[v.id])
    }

    /// Runs reverse accumulation from `root` (must hold a single element).
    /// Consumes the tape's backward closures; a tape can only be
    /// differentiated once.
    pub fn backward(&self, root: Var) -> Gradients<E> {
        let mut inner = self.inner.borrow_mut();
        let n = inner.values.len();
        assert_eq!(
            inner.values[root.id].len(),
            1,
            "backward root must be a single-element node"
        );
        let mut grads: Vec<Option<ArrayD<E>>> = Vec::with_capacity(n);
        grads.resize_with(n, || None);
        grads[root.id] = Some(ArrayD::from_elem(inner.values[root.id].raw_dim(), E::one()));

        let Inner {
            values,
            requires_grad,
            backwards,
        } = &mut *inner;

        for i in (0..=root.id).rev() {
            if !requires_grad[i] {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match backwards[i].take() {
                Some(f) => {
                    let mut sink = |parent: usize, contrib: ArrayD<E>| {
                        if !requires_grad[parent] {
                            return;
                        }
                        match &mut grads[parent] {
                            Some(acc) => {
                                debug_assert_eq!(acc.shape(), contrib.shape());
                                *acc += &contrib;
                            }
                            slot @ None => *slot = Some(contrib),
                        }
                    };
                    f(&g, i, values, &mut sink);
                }
                // Leaf: keep its accumulated gradient for the caller.
                None => grads[i] = Some(g),
            }
        }
        Gradients { grads }
    }
}

/// Gradients produced by [`Tape::backward`], indexed by leaf [`Var`].
pub struct Gradients<E: Element> {
    grads: Vec<Option<ArrayD<E>>>,
}

impl<E: Element> Gradients<E> {
    pub fn get(&self, v: Var) -> Option<&ArrayD<E>> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<ArrayD<E>> {
        self.grads.get_mut(v.id).and_then(|g| g.take())
    }
}
