//! Path functionals and run-level checks.
//!
//! Paths are treated as càdlàg functions that are linear between knots; the
//! engine's drift paths are the step case. Exact oscillations are computed over
//! the values a path takes or approaches at its knots.

mod audit;
mod identity;
mod m1;
mod oscillation;
mod path;
mod tightness;

pub use audit::{audit_jumps, physicality_audit, AuditError, AuditReport, AuditRow};
pub use identity::representation_violations;
pub use m1::{discrete_frechet, m1_distance, M1Error};
pub use oscillation::{sequence_w, u_oscillation, v_oscillation, w_oscillation, OscillationReport};
pub use path::{CadlagPath, PathError};
pub use tightness::{normal_cdf, oscillation_tail_bound, tightness_check, TightnessCell};

/// Sufficient condition for the common drift to jump:
/// `α E[X_0-] - β E[Y_0-] < (α - β)^2 / 2`, with `E[Y_0-]` in the original
/// (non-positive) coordinates.
pub fn discontinuity_criterion(alpha: f64, beta: f64, mean_x: f64, mean_y: f64) -> bool {
    alpha * mean_x - beta * mean_y < (alpha - beta).powi(2) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_examples() {
        assert!(discontinuity_criterion(1.0, 0.0, 0.1, 0.0));
        assert!(!discontinuity_criterion(1.0, 1.0, 0.625, -0.2));
        assert!(!discontinuity_criterion(1.0, 1.0, 0.3, -0.3));
        assert!(discontinuity_criterion(2.0, 1.0, 0.1, -0.2));
    }
}
