//! Initial laws on the positive half-line.
//!
//! Every region is stored in normalized coordinates: the absorbing boundary
//! sits at 0 and alive particles are positive. A region whose original
//! coordinates are negative (the `Y` phase) is mirrored before it gets here.
//!
//! Two representations are supported. Uniform mixtures cover every
//! piecewise-flat density; anything else enters as a quantile table
//! (`u,quantile` pairs, linearly interpolated).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of the mixture weights from 1.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("a law needs at least one piece")]
    Empty,
    #[error("piece {index}: need 0 <= lo < hi with finite ends, got [{lo}, {hi}]")]
    BadInterval { index: usize, lo: f64, hi: f64 },
    #[error("piece {index}: weight must be positive and finite, got {weight}")]
    BadWeight { index: usize, weight: f64 },
    #[error("weights sum to {sum}, expected 1 within {WEIGHT_TOLERANCE:e}")]
    NotNormalized { sum: f64 },
    #[error("piece {index} starts at 0; set allow_boundary_mass to permit mass at the boundary")]
    MassAtZero { index: usize },
    #[error("quantile table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("requested {0} samples, need at least 1")]
    NoSamples(usize),
}

/// Uniform density on `[lo, hi]` carrying probability `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPiece {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

impl UniformPiece {
    pub fn new(lo: f64, hi: f64, weight: f64) -> Self {
        Self { lo, hi, weight }
    }

    fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Serializable description of a law. Converted into [`InitialLaw`] through
/// validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Mixture {
        pieces: Vec<UniformPiece>,
        #[serde(default)]
        allow_boundary_mass: bool,
    },
    Quantile {
        /// `(u, quantile)` pairs, `u` strictly increasing from 0 to 1.
        points: Vec<(f64, f64)>,
        #[serde(default)]
        allow_boundary_mass: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Mixture {
        pieces: Vec<UniformPiece>,
        cumulative: Vec<f64>,
    },
    Quantile {
        u: Vec<f64>,
        q: Vec<f64>,
    },
}

/// A validated sampling law for the initial positions `X_{0-}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub struct InitialLaw {
    repr: Repr,
    allow_boundary_mass: bool,
}

impl InitialLaw {
    /// Uniform mixture with every piece strictly away from 0.
    pub fn mixture(pieces: Vec<UniformPiece>) -> Result<Self, LawError> {
        Self::build_mixture(pieces, false)
    }

    /// Uniform mixture that may put mass right at the boundary (`lo == 0`).
    pub fn mixture_allowing_boundary(pieces: Vec<UniformPiece>) -> Result<Self, LawError> {
        Self::build_mixture(pieces, true)
    }

    /// Single uniform piece of full weight.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, LawError> {
        Self::mixture(vec![UniformPiece::new(lo, hi, 1.0)])
    }

    fn build_mixture(
        pieces: Vec<UniformPiece>,
        allow_boundary_mass: bool,
    ) -> Result<Self, LawError> {
        if pieces.is_empty() {
            return Err(LawError::Empty);
        }
        let mut cumulative = Vec::with_capacity(pieces.len());
        let mut total = 0.0;
        for (index, p) in pieces.iter().enumerate() {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo >= 0.0 && p.lo < p.hi) {
                return Err(LawError::BadInterval {
                    index,
                    lo: p.lo,
                    hi: p.hi,
                });
            }
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(LawError::BadWeight {
                    index,
                    weight: p.weight,
                });
            }
            if p.lo == 0.0 && !allow_boundary_mass {
                return Err(LawError::MassAtZero { index });
            }
            total += p.weight;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(LawError::NotNormalized { sum: total });
        }
        Ok(Self {
            repr: Repr::Mixture { pieces, cumulative },
            allow_boundary_mass,
        })
    }

    /// Quantile function given at knots `(u, q)`, linearly interpolated.
    pub fn from_quantiles(
        points: Vec<(f64, f64)>,
        allow_boundary_mass: bool,
    ) -> Result<Self, LawError> {
        let err = |line: usize, message: &str| LawError::Table {
            line,
            message: message.to_string(),
        };
        if points.len() < 2 {
            return Err(err(points.len(), "need at least two rows"));
        }
        for (i, &(u, q)) in points.iter().enumerate() {
            let line = i + 1;
            if !(u.is_finite() && q.is_finite()) {
                return Err(err(line, "non-finite value"));
            }
            if !(0.0..=1.0).contains(&u) {
                return Err(err(line, "u must lie in [0, 1]"));
            }
            if q < 0.0 {
                return Err(err(line, "quantiles must be non-negative"));
            }
            if i > 0 {
                let (pu, pq) = points[i - 1];
                if u <= pu {
                    return Err(err(line, "u must be strictly increasing"));
                }
                if q < pq {
                    return Err(err(line, "quantiles must be non-decreasing"));
                }
            }
        }
        if points[0].0 != 0.0 {
            return Err(err(1, "first u must be 0"));
        }
        if points[points.len() - 1].0 != 1.0 {
            return Err(err(points.len(), "last u must be 1"));
        }
        // A flat stretch at q = 0 is an atom at the boundary.
        if !allow_boundary_mass && points[0].1 == 0.0 && points[1].1 == 0.0 {
            return Err(err(2, "atom at 0; set allow_boundary_mass to permit"));
        }
        let (u, q) = points.into_iter().unzip();
        Ok(Self {
            repr: Repr::Quantile { u, q },
            allow_boundary_mass,
        })
    }

    /// Parses the two-column `u,quantile` text format. A non-numeric first
    /// row is taken as a header; blank lines and `#` comments are skipped.
    pub fn parse_quantile_table(text: &str, allow_boundary_mass: bool) -> Result<Self, LawError> {
        let mut points = Vec::new();
        let mut rows = Vec::new();
        let mut first_row = true;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let mut cols = content.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(LawError::Table {
                    line,
                    message: "expected two comma-separated columns".into(),
                });
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(u), Ok(q)) => {
                    points.push((u, q));
                    rows.push(line);
                }
                _ if first_row => {}
                _ => {
                    return Err(LawError::Table {
                        line,
                        message: format!("cannot parse `{content}`"),
                    })
                }
            }
            first_row = false;
        }
        // `from_quantiles` reports data-row positions; map them back to file lines.
        Self::from_quantiles(points, allow_boundary_mass).map_err(|e| match e {
            LawError::Table { line, message } => LawError::Table {
                line: rows.get(line.saturating_sub(1)).copied().unwrap_or(line),
                message,
            },
            other => other,
        })
    }

    pub fn allows_boundary_mass(&self) -> bool {
        self.allow_boundary_mass
    }

    /// Mixture pieces, if this is a mixture law.
    pub fn pieces(&self) -> Option<&[UniformPiece]> {
        match &self.repr {
            Repr::Mixture { pieces, .. } => Some(pieces),
            Repr::Quantile { .. } => None,
        }
    }

    /// Smallest and largest point of the support.
    pub fn support(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Mixture { pieces, .. } => pieces
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.lo), hi.max(p.hi))
                }),
            Repr::Quantile { q, .. } => (q[0], q[q.len() - 1]),
        }
    }

    /// Inverse CDF at `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Mixture { pieces, cumulative } => {
                let total = cumulative[cumulative.len() - 1];
                let target = u * total;
                let i = cumulative
                    .partition_point(|&c| c <= target)
                    .min(pieces.len() - 1);
                let start = if i == 0 { 0.0 } else { cumulative[i - 1] };
                let p = &pieces[i];
                let frac = ((target - start) / p.weight).clamp(0.0, 1.0);
                (p.lo + (p.hi - p.lo) * frac).clamp(p.lo, p.hi)
            }
            Repr::Quantile { u: us, q } => {
                let i = us.partition_point(|&x| x <= u).clamp(1, us.len() - 1);
                let (u0, u1) = (us[i - 1], us[i]);
                let frac = ((u - u0) / (u1 - u0)).clamp(0.0, 1.0);
                q[i - 1] + (q[i] - q[i - 1]) * frac
            }
        }
    }

    /// One draw, consuming a single uniform from `rng`.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

impl TryFrom<LawSpec> for InitialLaw {
    type Error = LawError;

    fn try_from(spec: LawSpec) -> Result<Self, LawError> {
        match spec {
            LawSpec::Mixture {
                pieces,
                allow_boundary_mass,
            } => Self::build_mixture(pieces, allow_boundary_mass),
            LawSpec::Quantile {
                points,
                allow_boundary_mass,
            } => Self::from_quantiles(points, allow_boundary_mass),
        }
    }
}

impl From<InitialLaw> for LawSpec {
    fn from(law: InitialLaw) -> Self {
        match law.repr {
            Repr::Mixture { pieces, .. } => LawSpec::Mixture {
                pieces,
                allow_boundary_mass: law.allow_boundary_mass,
            },
            Repr::Quantile { u, q } => LawSpec::Quantile {
                points: u.into_iter().zip(q).collect(),
                allow_boundary_mass: law.allow_boundary_mass,
            },
        }
    }
}

/// `n` i.i.d. draws from `law`.
pub fn sample_initial<R: Rng + ?Sized>(
    law: &InitialLaw,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, LawError> {
    if n == 0 {
        return Err(LawError::NoSamples(n));
    }
    Ok((0..n).map(|_| law.sample_one(rng)).collect())
}

/// Exact mean of the law.
pub fn law_mean(law: &InitialLaw) -> f64 {
    match &law.repr {
        Repr::Mixture { pieces, .. } => pieces.iter().map(|p| p.weight * p.mean()).sum(),
        Repr::Quantile { u, q } => u
            .windows(2)
            .zip(q.windows(2))
            .map(|(du, dq)| (du[1] - du[0]) * 0.5 * (dq[0] + dq[1]))
            .sum(),
    }
}

/// The densities of the two-region example: `f` for the `X` region and `g`
/// (mirrored to the positive axis) for the `Y` region.
pub mod examples {
    use super::{InitialLaw, UniformPiece};

    /// `f = 5/2 on [0.05, 0.15] + 15/8 on [0.60, 1.00]`.
    pub fn two_region_x() -> InitialLaw {
        InitialLaw::mixture(vec![
            UniformPiece::new(0.05, 0.15, 0.25),
            UniformPiece::new(0.60, 1.00, 0.75),
        ])
        .expect("valid law")
    }

    /// `g = 5 on [0.10, 0.30]`, in normalized coordinates.
    pub fn two_region_y() -> InitialLaw {
        InitialLaw::uniform(0.10, 0.30).expect("valid law")
    }
}
