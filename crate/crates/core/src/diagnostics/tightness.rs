use libm::erfc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oscillation::w_oscillation;
use super::path::CadlagPath;
use crate::engine::DriftPath;

/// Standard normal CDF, `Φ(x) = erfc(-x / √2) / 2`. Using `erfc` keeps the
/// relative accuracy in the lower tail, where `1 + erf(x)` would cancel.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `4 (α + β) / r * Φ(-r / (2 √(2δ)))`, the bound on `P(w(Λ, t, δ) >= r)`.
pub fn oscillation_tail_bound(r: f64, delta: f64, alpha: f64, beta: f64) -> f64 {
    4.0 * (alpha + beta) / r * normal_cdf(-r / (2.0 * (2.0 * delta).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessCell {
    pub t: f64,
    pub delta: f64,
    pub r: f64,
    pub runs: usize,
    pub empirical_prob: f64,
    pub bound: f64,
    /// Binomial standard error of `empirical_prob`.
    pub stderr: f64,
}

impl TightnessCell {
    /// Whether `empirical_prob <= bound + sigmas * stderr`.
    pub fn within(&self, sigmas: f64) -> bool {
        self.empirical_prob <= self.bound + sigmas * self.stderr
    }
}

/// Frequency of `w_[0,T](Λ, t, δ) >= r` across `runs` (region 0 of each
/// drift path) together with the analytic bound.
///
/// Panics if `runs` is empty or `r`, `delta` are not positive.
pub fn tightness_check(
    runs: &[DriftPath],
    r: f64,
    delta: f64,
    t: f64,
    alpha: f64,
    beta: f64,
) -> TightnessCell {
    assert!(!runs.is_empty(), "tightness_check needs at least one run");
    assert!(r > 0.0 && delta > 0.0, "r and delta must be positive");
    let hits = runs
        .par_iter()
        .map(|d| {
            let h = CadlagPath::from_drift(d, 0);
            (w_oscillation(&h, t, delta, (h.start(), h.end())) >= r) as usize
        })
        .sum::<usize>();
    let n = runs.len() as f64;
    let p = hits as f64 / n;
    TightnessCell {
        t,
        delta,
        r,
        runs: runs.len(),
        empirical_prob: p,
        bound: oscillation_tail_bound(r, delta, alpha, beta),
        stderr: (p * (1.0 - p) / n).sqrt(),
    }
}
