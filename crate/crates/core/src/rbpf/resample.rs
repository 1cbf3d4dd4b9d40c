use crate::scalar::Real;

/// Systematic resampling: one uniform offset `u0 ∈ [0, 1)`, strata of width
/// `1/n`. Returns the chosen source index for each of the `n` slots.
pub fn systematic<S: Real>(weights: &[S], n: usize, u0: f64) -> Vec<usize> {
    let total: f64 = weights.iter().map(|w| w.to_f64_lossy()).sum();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut j = 0usize;
    let last = weights.iter().rposition(|w| *w > S::zero()).unwrap_or(0);
    for k in 0..n {
        let u = (k as f64 + u0) / n as f64 * total;
        while j < last && acc + weights[j].to_f64_lossy() <= u {
            acc += weights[j].to_f64_lossy();
            j += 1;
        }
        out.push(j);
    }
    out
}

/// `1 / Σ w²` for normalized weights.
pub fn effective_sample_size<S: Real>(weights: &[S]) -> S {
    let s: S = weights.iter().map(|&w| w * w).sum();
    if s > S::zero() {
        S::one() / s
    } else {
        S::zero()
    }
}
