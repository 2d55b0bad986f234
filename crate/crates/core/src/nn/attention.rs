//! Softmax attention pooling over a variable number of neighbor embeddings.

use rand::Rng;

use crate::error::Result;
use crate::scalar::Real;

use super::dense::{Activation, DenseLayer};
use super::param::ParamStore;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionPool {
    pub hidden: DenseLayer,
    pub score: DenseLayer,
    pub dim: usize,
}

/// Intermediate values of a batched pooling pass.
#[derive(Debug, Clone)]
pub struct PoolTrace<T> {
    pub hidden: Tensor<T>,
    pub scores: Tensor<T>,
    /// One weight per neighbor row; sums to 1 within each segment.
    pub weights: Vec<T>,
    /// (segments x dim)
    pub pooled: Tensor<T>,
}

impl AttentionPool {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: DenseLayer::new(store, &format!("{name}.score_hidden"), dim, hidden, Activation::Relu, 2f64.sqrt(), rng),
            score: DenseLayer::new(store, &format!("{name}.score_out"), hidden, 1, Activation::Identity, 1.0, rng),
            dim,
        }
    }

    /// Pools rows `offsets[s]..offsets[s+1]` of `emb` into row `s` of the output.
    /// Empty segments pool to zero.
    pub fn forward<T: Real>(&self, store: &ParamStore<T>, emb: &Tensor<T>, offsets: &[usize]) -> Result<PoolTrace<T>> {
        let hidden = self.hidden.forward(store, emb)?;
        let scores = self.score.forward(store, &hidden)?;
        let segments = offsets.len() - 1;
        let mut weights = vec![T::zero(); emb.rows()];
        let mut pooled = Tensor::matrix(segments, self.dim);
        for s in 0..segments {
            let (lo, hi) = (offsets[s], offsets[s + 1]);
            if lo == hi {
                continue;
            }
            let max = scores.data[lo..hi].iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for n in lo..hi {
                let e = (scores.data[n] - max).exp();
                weights[n] = e;
                total += e;
            }
            let out = pooled.row_mut(s);
            for n in lo..hi {
                weights[n] = weights[n] / total;
                let w = weights[n];
                for (o, x) in out.iter_mut().zip(emb.row(n)) {
                    *o += w * *x;
                }
            }
        }
        Ok(PoolTrace {
            hidden,
            scores,
            weights,
            pooled,
        })
    }

    /// Accumulates score-network gradients and returns `d emb`.
    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        emb: &Tensor<T>,
        offsets: &[usize],
        trace: &PoolTrace<T>,
        d_pooled: &Tensor<T>,
    ) -> Tensor<T> {
        let mut d_emb = Tensor::matrix(emb.rows(), self.dim);
        let mut d_scores = Tensor::matrix(emb.rows(), 1);
        for s in 0..offsets.len() - 1 {
            let (lo, hi) = (offsets[s], offsets[s + 1]);
            if lo == hi {
                continue;
            }
            let g = d_pooled.row(s);
            let mut d_w = vec![T::zero(); hi - lo];
            for n in lo..hi {
                let w = trace.weights[n];
                d_w[n - lo] = emb.row(n).iter().zip(g).map(|(e, gg)| *e * *gg).sum();
                for (d, gg) in d_emb.row_mut(n).iter_mut().zip(g) {
                    *d += w * *gg;
                }
            }
            let mean: T = (lo..hi).map(|n| trace.weights[n] * d_w[n - lo]).sum();
            for n in lo..hi {
                d_scores.data[n] = trace.weights[n] * (d_w[n - lo] - mean);
            }
        }
        let d_hidden = self.score.backward(store, &trace.hidden, &trace.scores, &d_scores, true);
        let d_from_scores = self.hidden.backward(store, emb, &trace.hidden, &d_hidden, true);
        for (d, e) in d_emb.data.iter_mut().zip(&d_from_scores.data) {
            *d += *e;
        }
        d_emb
    }

    /// Pools a single neighbor set. Returns the pooled vector and the weights.
    pub fn pool<T: Real>(&self, store: &ParamStore<T>, emb: &[Vec<T>]) -> Result<(Vec<T>, Vec<T>)> {
        if emb.is_empty() {
            return Ok((vec![T::zero(); self.dim], Vec::new()));
        }
        let data: Vec<T> = emb.iter().flat_map(|r| r.iter().copied()).collect();
        let t = Tensor::from_vec(&[emb.len(), self.dim], data)?;
        let trace = self.forward(store, &t, &[0, emb.len()])?;
        Ok((trace.pooled.data, trace.weights))
    }
}
