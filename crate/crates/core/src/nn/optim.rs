use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::param::ParamStore;

/// `lr(step) = lr0 * (1 - step / total)`, floored at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDecay {
    pub lr0: f64,
    pub total_steps: u64,
}

impl LinearDecay {
    pub fn at(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return 0.0;
        }
        (self.lr0 * (1.0 - step as f64 / self.total_steps as f64)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Scales all gradients in `stores` so that their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(stores: &mut [&mut ParamStore<T>], max_norm: f64) -> Result<f64> {
    let sq: f64 = stores.iter().map(|s| s.grad_sq_norm().as_f64()).sum();
    let norm = sq.sqrt();
    if !norm.is_finite() {
        return Err(Error::Divergence(format!("gradient norm is {norm}")));
    }
    if norm > max_norm {
        let s = T::lit(max_norm / norm);
        for st in stores.iter_mut() {
            st.scale_grads(s);
        }
    }
    Ok(norm)
}

impl Adam {
    pub fn step<T: Real>(&self, store: &mut ParamStore<T>, lr: f64) -> Result<()> {
        if store.params.iter().any(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        store.t += 1;
        let t = store.t as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(t));
        let c2 = T::lit(1.0 - self.beta2.powi(t));
        let (lr, eps) = (T::lit(lr), T::lit(self.eps));
        for p in &mut store.params {
            for (((w, g), m), v) in p.value.data.iter_mut().zip(&p.grad).zip(&mut p.m).zip(&mut p.v) {
                *m = b1 * *m + (T::one() - b1) * *g;
                *v = b2 * *v + (T::one() - b2) * *g * *g;
                let mh = *m / c1;
                let vh = *v / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}
