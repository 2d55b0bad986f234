//! Central-difference verification of reverse-mode gradients.

use super::param::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Scalars compared.
    pub checked: usize,
    /// Scalars skipped because a relu or clamp switched within `±h`.
    pub skipped: usize,
}

/// Compares `analytic` (laid out like the parameters of `store`) with the
/// fourth-order central difference
/// `(8(f(+h) - f(-h)) - (f(+2h) - f(-2h))) / 12h` of `loss`.
///
/// Only every `stride`-th scalar (in parameter order) is probed.
///
/// `loss` returns the scalar loss and the activation pattern of every
/// piecewise-linear unit; a parameter whose perturbation flips the pattern sits
/// on a kink and is skipped.
pub fn check<F>(store: &mut ParamStore<f64>, analytic: &[Vec<f64>], h: f64, stride: usize, mut loss: F) -> GradCheckReport
where
    F: FnMut(&ParamStore<f64>) -> (f64, Vec<bool>),
{
    let (_, base) = loss(store);
    let mut report = GradCheckReport::default();
    let stride = stride.max(1);
    let mut flat = 0usize;
    for p in 0..store.params.len() {
        for k in 0..store.params[p].value.len() {
            flat += 1;
            if (flat - 1) % stride != 0 {
                continue;
            }
            let orig = store.params[p].value.data[k];
            let mut f = [0.0; 4];
            let mut kink = false;
            for (slot, step) in [2.0, 1.0, -1.0, -2.0].into_iter().enumerate() {
                store.params[p].value.data[k] = orig + step * h;
                let (v, pat) = loss(store);
                f[slot] = v;
                kink |= pat != base;
            }
            store.params[p].value.data[k] = orig;
            if kink {
                report.skipped += 1;
                continue;
            }
            let num = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * h);
            let a = analytic[p][k];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    report
}
