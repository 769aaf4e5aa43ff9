//! Coupled versus decoupled runs on identical noise.
//!
//! The decoupled counterpart of a coupling matrix keeps only its diagonal, so
//! every region feels its own defaults alone. For the two-phase matrix this is
//! the pair of one-phase systems with `(α, 0)` and `(0, β)`. When the diagonal
//! is non-negative and the cross terms are non-positive, defaults elsewhere can
//! only lower a region's drift, so on the same streams every coupled particle
//! defaults no earlier than its decoupled twin and every coupled drift stays
//! below the decoupled one. Non-negative cross terms reverse both orderings.

use serde::{Deserialize, Serialize};

use crate::cascade::CouplingMatrix;
use crate::engine::{SimulationConfig, SimulationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOrder {
    /// Coupled defaults happen no earlier; coupled drifts are no larger.
    CoupledLater,
    /// Coupled defaults happen no later; coupled drifts are no smaller.
    CoupledEarlier,
    /// The matrix has mixed-sign cross terms or a negative diagonal.
    Unordered,
}

pub fn expected_order(k: &CouplingMatrix) -> ExpectedOrder {
    let m = k.regions();
    let cross = || (0..m).flat_map(move |r| (0..m).filter(move |&s| s != r).map(move |s| (r, s)));
    if (0..m).any(|r| k.get(r, r) < 0.0) {
        ExpectedOrder::Unordered
    } else if cross().all(|(r, s)| k.get(r, s) <= 0.0) {
        ExpectedOrder::CoupledLater
    } else if cross().all(|(r, s)| k.get(r, s) >= 0.0) {
        ExpectedOrder::CoupledEarlier
    } else {
        ExpectedOrder::Unordered
    }
}

pub fn decoupled_matrix(k: &CouplingMatrix) -> CouplingMatrix {
    let diag: Vec<f64> = (0..k.regions()).map(|r| k.get(r, r)).collect();
    CouplingMatrix::diagonal(&diag)
}

/// The same experiment with the cross terms removed.
pub fn decoupled_config(config: &SimulationConfig) -> SimulationConfig {
    SimulationConfig {
        coupling: decoupled_matrix(&config.coupling),
        ..config.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub expected: ExpectedOrder,
    pub particles_checked: usize,
    pub grid_points_checked: usize,
    pub default_violations: usize,
    pub drift_violations: usize,
    /// First few violations, for error messages.
    pub examples: Vec<String>,
}

impl ComparisonReport {
    pub fn violations(&self) -> usize {
        self.default_violations + self.drift_violations
    }
}

/// Checks the ordering implied by the coupled run's matrix. Both runs must
/// come from the same grid, seed and population.
pub fn compare_runs(coupled: &SimulationResult, decoupled: &SimulationResult) -> ComparisonReport {
    assert_eq!(
        coupled.drift.times, decoupled.drift.times,
        "runs must share the time grid"
    );
    assert_eq!(
        coupled.config.seed, decoupled.config.seed,
        "runs must share the seed"
    );
    let expected = expected_order(&coupled.config.coupling);
    let mut report = ComparisonReport {
        expected,
        particles_checked: 0,
        grid_points_checked: 0,
        default_violations: 0,
        drift_violations: 0,
        examples: Vec::new(),
    };
    if expected == ExpectedOrder::Unordered {
        return report;
    }
    let later = expected == ExpectedOrder::CoupledLater;
    let key = |t: Option<f64>| t.unwrap_or(f64::INFINITY);
    for (r, (c, d)) in coupled
        .default_times
        .iter()
        .zip(&decoupled.default_times)
        .enumerate()
    {
        for (i, (&tc, &td)) in c.iter().zip(d).enumerate() {
            report.particles_checked += 1;
            let ok = if later {
                key(tc) >= key(td)
            } else {
                key(tc) <= key(td)
            };
            if !ok {
                report.default_violations += 1;
                if report.examples.len() < 5 {
                    report.examples.push(format!(
                        "region {r} particle {i}: coupled {tc:?}, decoupled {td:?}"
                    ));
                }
            }
        }
    }
    for (r, (c, d)) in coupled
        .drift
        .values
        .iter()
        .zip(&decoupled.drift.values)
        .enumerate()
    {
        for (k, (&lc, &ld)) in c.iter().zip(d).enumerate() {
            report.grid_points_checked += 1;
            let ok = if later { lc <= ld } else { lc >= ld };
            if !ok {
                report.drift_violations += 1;
                if report.examples.len() < 5 {
                    let t = coupled.drift.times[k];
                    report.examples.push(format!(
                        "region {r} t = {t}: coupled drift {lc}, decoupled {ld}"
                    ));
                }
            }
        }
    }
    report
}
