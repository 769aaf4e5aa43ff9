//! Causal cascade resolution at a single physical time.
//!
//! Positions are the alive particles of every region just before the drift
//! jumps, in normalized coordinates (boundary at 0), with boundary hits clamped
//! to 0. Step 0 of a cascade collects the particles at or below 0. At step
//! `k >= 1`, region `r` loses every alive particle at or below the current
//! decrement `sum_s K[r][s] * c_s / N`, where `c_s` counts the defaults of
//! region `s` accumulated during this cascade. The iteration stops once no
//! region gains a default.
//!
//! Inputs are sorted, so the defaulted set of a region is always a prefix and
//! every step is a binary search. [`cascade_oracle`] recomputes the sets by
//! scanning and serves as the reference in tests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("coupling matrix must be square and non-empty, got {rows} rows with lengths {lens:?}")]
    NotSquare { rows: usize, lens: Vec<usize> },
    #[error("coupling entry K[{row}][{col}] is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} regions, got {got}")]
    RegionCount { expected: usize, got: usize },
    #[error("region {region} has {len} particles, more than N = {n}")]
    TooMany { region: usize, len: usize, n: usize },
    #[error("region {region} positions are not sorted ascending (index {index})")]
    Unsorted { region: usize, index: usize },
    #[error("no region has a particle at or below 0")]
    NoTrigger,
}

/// Region-to-region interaction weights. Region `r` is pushed towards its
/// boundary by `L^r = sum_s K[r][s] * D^s`, with `D^s` the defaulted fraction of
/// region `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CouplingMatrix {
    rows: Vec<Vec<f64>>,
}

impl CouplingMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, CascadeError> {
        let m = rows.len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(CascadeError::NotSquare {
                rows: m,
                lens: rows.iter().map(Vec::len).collect(),
            });
        }
        for (row, r) in rows.iter().enumerate() {
            if let Some(col) = r.iter().position(|k| !k.is_finite()) {
                return Err(CascadeError::NonFinite { row, col });
            }
        }
        Ok(Self { rows })
    }

    /// Common-drift two-phase system: `L^X = Λ`, `L^Y = -Λ` with
    /// `Λ = α D^X - β D^Y`.
    pub fn two_phase(alpha: f64, beta: f64) -> Self {
        Self::new(vec![vec![alpha, -beta], vec![-alpha, beta]]).expect("finite entries")
    }

    /// Separate interaction terms per region:
    /// `L^X = α^X D^X - β^X D^Y`, `L^Y = α^Y D^Y - β^Y D^X`.
    pub fn decoupled(alpha_x: f64, beta_x: f64, alpha_y: f64, beta_y: f64) -> Self {
        Self::new(vec![vec![alpha_x, -beta_x], vec![-beta_y, alpha_y]]).expect("finite entries")
    }

    /// Single region with self-excitation `α`.
    pub fn one_phase(alpha: f64) -> Self {
        Self::new(vec![vec![alpha]]).expect("finite entry")
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let m = entries.len();
        let rows = (0..m)
            .map(|r| {
                (0..m)
                    .map(|s| if r == s { entries[r] } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rows).expect("finite entries")
    }

    pub fn zeros(m: usize) -> Self {
        Self::new(vec![vec![0.0; m]; m]).expect("finite entries")
    }

    pub fn regions(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.rows[r][s]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    /// `sum_s K[r][s] * (counts[s] / n)`.
    ///
    /// This is the only place a count vector is turned into a drift value, so
    /// cascade thresholds, recorded jumps and drift paths agree bit for bit.
    /// Dividing each count first keeps every fraction in `[0, 1]`, hence the
    /// value stays within the row's positive and negative mass.
    pub fn drift(&self, r: usize, counts: &[usize], n: usize) -> f64 {
        let n = n as f64;
        self.rows[r]
            .iter()
            .zip(counts)
            .fold(0.0, |acc, (&k, &c)| acc + k * (c as f64 / n))
    }

    /// `(α, β)` if this is the common-drift two-phase matrix.
    pub fn as_two_phase(&self) -> Option<(f64, f64)> {
        match self.rows.as_slice() {
            [x, y] if x[0] == -y[0] && x[1] == -y[1] => Some((x[0], -x[1])),
            _ => None,
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for CouplingMatrix {
    type Error = CascadeError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, CascadeError> {
        Self::new(rows)
    }
}

impl From<CouplingMatrix> for Vec<Vec<f64>> {
    fn from(k: CouplingMatrix) -> Self {
        k.rows
    }
}

/// Result of one cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    /// Number of cascade steps that produced at least one default, step 0
    /// included.
    pub steps: usize,
    /// `defaulted[r][k]`: indices (into the region's input slice) that default
    /// at step `k`. Every region has `steps` entries, possibly empty.
    pub defaulted: Vec<Vec<Vec<usize>>>,
    /// Total change of `L^r` caused by the cascade.
    pub jump: Vec<f64>,
    /// Largest decrement tested against region `r` during the iteration
    /// (0 when the cascade stops at step 0).
    pub peak_threshold: Vec<f64>,
}

impl CascadeOutcome {
    /// Step-0 sets.
    pub fn trigger(&self, region: usize) -> &[usize] {
        &self.defaulted[region][0]
    }

    /// Number of defaults of `region` over all steps.
    pub fn total_defaults(&self, region: usize) -> usize {
        self.defaulted[region].iter().map(Vec::len).sum()
    }

    pub fn default_counts(&self) -> Vec<usize> {
        (0..self.defaulted.len())
            .map(|r| self.total_defaults(r))
            .collect()
    }
}

fn validate(positions: &[Vec<f64>], n: usize, k: &CouplingMatrix) -> Result<(), CascadeError> {
    if positions.len() != k.regions() {
        return Err(CascadeError::RegionCount {
            expected: k.regions(),
            got: positions.len(),
        });
    }
    for (region, xs) in positions.iter().enumerate() {
        if xs.len() > n {
            return Err(CascadeError::TooMany {
                region,
                len: xs.len(),
                n,
            });
        }
        // `!(a <= b)` also rejects NaN.
        if let Some(index) = xs.windows(2).position(|w| !(w[0] <= w[1])) {
            return Err(CascadeError::Unsorted {
                region,
                index: index + 1,
            });
        }
        if xs.iter().any(|x| x.is_nan()) {
            return Err(CascadeError::Unsorted { region, index: 0 });
        }
    }
    Ok(())
}

/// Resolves the cascade started by the particles at or below 0.
///
/// `positions[r]` must be sorted ascending; `n` is the population size of each
/// region (alive and dead), which normalizes the defaulted fractions.
pub fn resolve_cascade(
    positions: &[Vec<f64>],
    n: usize,
    k: &CouplingMatrix,
) -> Result<CascadeOutcome, CascadeError> {
    validate(positions, n, k)?;
    let m = positions.len();
    let mut counts: Vec<usize> = positions
        .iter()
        .map(|xs| xs.partition_point(|&x| x <= 0.0))
        .collect();
    if counts.iter().all(|&c| c == 0) {
        return Err(CascadeError::NoTrigger);
    }
    let mut defaulted: Vec<Vec<Vec<usize>>> =
        counts.iter().map(|&c| vec![(0..c).collect()]).collect();
    let mut peak = vec![0.0_f64; m];
    let mut steps = 1;
    loop {
        let mut next = counts.clone();
        for r in 0..m {
            let threshold = k.drift(r, &counts, n);
            peak[r] = if steps == 1 {
                threshold
            } else {
                peak[r].max(threshold)
            };
            next[r] = counts[r].max(positions[r].partition_point(|&x| x <= threshold));
        }
        if next == counts {
            break;
        }
        for r in 0..m {
            defaulted[r].push((counts[r]..next[r]).collect());
        }
        counts = next;
        steps += 1;
    }
    let jump = (0..m).map(|r| k.drift(r, &counts, n)).collect();
    Ok(CascadeOutcome {
        steps,
        defaulted,
        jump,
        peak_threshold: peak,
    })
}

/// Reference implementation: recomputes the defaulted sets by scanning every
/// particle at every step, without using the ordering of the input.
pub fn cascade_oracle(
    positions: &[Vec<f64>],
    n: usize,
    k: &CouplingMatrix,
) -> Result<CascadeOutcome, CascadeError> {
    validate(positions, n, k)?;
    let m = positions.len();
    let mut gone: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    let mut defaulted: Vec<Vec<Vec<usize>>> = vec![Vec::new(); m];
    for r in 0..m {
        let step0: Vec<usize> = (0..positions[r].len())
            .filter(|&i| positions[r][i] <= 0.0)
            .collect();
        gone[r].extend(step0.iter().copied());
        defaulted[r].push(step0);
    }
    if gone.iter().all(BTreeSet::is_empty) {
        return Err(CascadeError::NoTrigger);
    }
    let mut peak: Vec<Option<f64>> = vec![None; m];
    loop {
        let sizes: Vec<usize> = gone.iter().map(BTreeSet::len).collect();
        let mut fresh: Vec<Vec<usize>> = vec![Vec::new(); m];
        for r in 0..m {
            let threshold = k.drift(r, &sizes, n);
            peak[r] = Some(peak[r].map_or(threshold, |p: f64| p.max(threshold)));
            for (i, &x) in positions[r].iter().enumerate() {
                if !gone[r].contains(&i) && x <= threshold {
                    fresh[r].push(i);
                }
            }
        }
        if fresh.iter().all(Vec::is_empty) {
            break;
        }
        for r in 0..m {
            gone[r].extend(fresh[r].iter().copied());
            defaulted[r].push(std::mem::take(&mut fresh[r]));
        }
    }
    let sizes: Vec<usize> = gone.iter().map(BTreeSet::len).collect();
    let jump = (0..m).map(|r| k.drift(r, &sizes, n)).collect();
    Ok(CascadeOutcome {
        steps: defaulted[0].len(),
        defaulted,
        jump,
        peak_threshold: peak.into_iter().map(|p| p.unwrap_or(0.0)).collect(),
    })
}

/// Minimal self-consistent jump of a one-region empirical measure:
/// `inf { x > 0 : scale * #{p in [0, x]} / n < x }`.
///
/// `measure` holds the alive positions sorted ascending with boundary hits
/// clamped to 0; each atom carries mass `1/n`. Computed by the count iteration
/// `c_0 = #{p <= 0}`, `c_{k+1} = #{p <= scale * c_k / n}`.
pub fn physical_jump_size(measure: &[f64], n: usize, scale: f64) -> f64 {
    debug_assert!(scale > 0.0, "scale must be positive");
    debug_assert!(
        measure.windows(2).all(|w| w[0] <= w[1]),
        "measure must be sorted"
    );
    let mut count = measure.partition_point(|&x| x <= 0.0);
    loop {
        let level = scale * (count as f64 / n as f64);
        let next = measure.partition_point(|&x| x <= level);
        if next <= count {
            return level;
        }
        count = next;
    }
}
