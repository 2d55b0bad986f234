//! Diagonal Gaussian over a 2-D action.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Real;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagGaussian<T> {
    pub mean: [T; 2],
    pub log_std: [T; 2],
}

fn half_log_2pi<T: Real>() -> T {
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
}

impl<T: Real> DiagGaussian<T> {
    pub fn std(&self) -> [T; 2] {
        [self.log_std[0].exp(), self.log_std[1].exp()]
    }

    pub fn log_prob(&self, a: [T; 2]) -> T {
        let mut lp = T::zero();
        for k in 0..2 {
            let z = (a[k] - self.mean[k]) / self.log_std[k].exp();
            lp -= T::lit(0.5) * z * z + self.log_std[k] + half_log_2pi::<T>();
        }
        lp
    }

    pub fn entropy(&self) -> T {
        let c = T::lit(0.5) + half_log_2pi::<T>();
        self.log_std[0] + self.log_std[1] + c + c
    }

    /// Samples `mean + std * z`; `deterministic` returns the mean.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, deterministic: bool) -> [T; 2] {
        if deterministic {
            return self.mean;
        }
        let std = self.std();
        let mut a = self.mean;
        for k in 0..2 {
            let z: f64 = StandardNormal.sample(rng);
            a[k] += std[k] * T::lit(z);
        }
        a
    }

    /// Gradient of `log_prob(a)` with respect to (mean, log_std).
    pub fn log_prob_grad(&self, a: [T; 2]) -> ([T; 2], [T; 2]) {
        let mut dm = [T::zero(); 2];
        let mut ds = [T::zero(); 2];
        for k in 0..2 {
            let inv = (-self.log_std[k]).exp();
            let z = (a[k] - self.mean[k]) * inv;
            dm[k] = z * inv;
            ds[k] = z * z - T::one();
        }
        (dm, ds)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const LN_2PI: f64 = 1.8378770664093453;

    #[test]
    fn standard_normal_closed_forms() {
        let g = DiagGaussian {
            mean: [0.0f64; 2],
            log_std: [0.0; 2],
        };
        assert!((g.log_prob([0.0, 0.0]) + LN_2PI).abs() < 1e-15);
        assert!((g.entropy() - 2.0 * (0.5 + 0.5 * LN_2PI)).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(g.sample(&mut rng, true), [0.0, 0.0]);
    }

    #[test]
    fn slice_integrates_to_one() {
        let g = DiagGaussian {
            mean: [0.3f64, -1.0],
            log_std: [-0.4, 0.2],
        };
        let s = g.std()[0];
        let n = 20_000;
        let (lo, hi) = (g.mean[0] - 8.0 * s, g.mean[0] + 8.0 * s);
        let h = (hi - lo) / n as f64;
        // marginal along x: divide out the density of the fixed z coordinate
        let pz = (-(g.log_std[1]) - 0.5 * LN_2PI).exp();
        let mut total = 0.0;
        for k in 0..=n {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            total += w * g.log_prob([x, g.mean[1]]).exp() / pz;
        }
        assert!((total * h - 1.0).abs() < 1e-3);
    }

    #[test]
    fn log_prob_gradient_matches_differences() {
        let g = DiagGaussian {
            mean: [0.1f64, 0.7],
            log_std: [-0.3, 0.5],
        };
        let a = [1.0, -0.2];
        let (dm, ds) = g.log_prob_grad(a);
        let h = 1e-6;
        for k in 0..2 {
            let mut p = g;
            p.mean[k] += h;
            let mut m = g;
            m.mean[k] -= h;
            assert!(((p.log_prob(a) - m.log_prob(a)) / (2.0 * h) - dm[k]).abs() < 1e-7);
            let mut p = g;
            p.log_std[k] += h;
            let mut m = g;
            m.log_std[k] -= h;
            assert!(((p.log_prob(a) - m.log_prob(a)) / (2.0 * h) - ds[k]).abs() < 1e-7);
        }
    }
}
