use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::param::{ParamId, ParamStore};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn_acc, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn grad_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// `y = act(x @ W + b)` with `W` stored as (in x out).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_weight(format!("{name}.weight"), in_dim, out_dim, gain, rng);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
            activation,
        }
    }

    /// Batched forward over the rows of `x`.
    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.cols() != self.in_dim {
            return Err(Error::ShapeMismatch {
                expected: vec![x.rows(), self.in_dim],
                found: x.shape.clone(),
            });
        }
        let b = x.rows();
        let bias = store.value(self.bias);
        let mut y = Tensor::matrix(b, self.out_dim);
        for r in 0..b {
            y.row_mut(r).copy_from_slice(bias);
        }
        gemm_nn(b, self.in_dim, self.out_dim, &x.data, store.value(self.weight), T::one(), &mut y.data);
        if self.activation != Activation::Identity {
            let act = self.activation;
            y.data.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dx`. `y` is the forward output.
    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        x: &Tensor<T>,
        y: &Tensor<T>,
        dy: &Tensor<T>,
        need_dx: bool,
    ) -> Tensor<T> {
        let b = x.rows();
        let mut dz = dy.clone();
        if self.activation != Activation::Identity {
            let act = self.activation;
            for (g, out) in dz.data.iter_mut().zip(&y.data) {
                *g *= act.grad_from_output(*out);
            }
        }
        gemm_tn_acc(b, self.in_dim, self.out_dim, &x.data, &dz.data, store.grad_mut(self.weight));
        let db = store.grad_mut(self.bias);
        for r in 0..b {
            for (g, d) in db.iter_mut().zip(dz.row(r)) {
                *g += *d;
            }
        }
        let mut dx = Tensor::matrix(b, self.in_dim);
        if need_dx {
            gemm_nt(b, self.out_dim, self.in_dim, &dz.data, store.value(self.weight), &mut dx.data);
        }
        dx
    }

    /// Relu on/off pattern of an output, used to detect kinks in finite differences.
    pub fn pattern<T: Real>(&self, y: &Tensor<T>, out: &mut Vec<bool>) {
        if self.activation == Activation::Relu {
            out.extend(y.data.iter().map(|v| *v > T::zero()));
        }
    }
}
