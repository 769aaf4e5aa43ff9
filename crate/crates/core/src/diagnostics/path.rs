use std::fmt;

use crate::engine::DriftPath;

#[derive(Debug, Clone, PartialEq)]
pub enum PathError {
    Empty,
    Length {
        times: usize,
        values: usize,
        left: usize,
    },
    NotIncreasing {
        index: usize,
    },
    NonFinite {
        index: usize,
    },
}

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "a path needs at least two knots"),
            Self::Length {
                times,
                values,
                left,
            } => {
                write!(
                    f,
                    "length mismatch: {times} knots, {values} values, {left} left limits"
                )
            }
            Self::NotIncreasing { index } => {
                write!(f, "knot {index} is not after the previous one")
            }
            Self::NonFinite { index } => write!(f, "non-finite entry at knot {index}"),
        }
    }
}

impl std::error::Error for PathError {}

/// A càdlàg path on `[knots[0], knots[last]]` that is linear between knots.
///
/// At knot `i` the path takes `values[i]` and has left limit `left[i]`; on
/// `(knots[i], knots[i+1])` it interpolates linearly from `values[i]` to
/// `left[i+1]`. Step paths have `left[i+1] == values[i]`. `left[0]` is the
/// left limit at the start of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    knots: Vec<f64>,
    values: Vec<f64>,
    left: Vec<f64>,
}

impl CadlagPath {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, left: Vec<f64>) -> Result<Self, PathError> {
        if knots.len() < 2 {
            return Err(PathError::Empty);
        }
        if values.len() != knots.len() || left.len() != knots.len() {
            return Err(PathError::Length {
                times: knots.len(),
                values: values.len(),
                left: left.len(),
            });
        }
        for i in 0..knots.len() {
            if !(knots[i].is_finite() && values[i].is_finite() && left[i].is_finite()) {
                return Err(PathError::NonFinite { index: i });
            }
            if i > 0 && knots[i] <= knots[i - 1] {
                return Err(PathError::NotIncreasing { index: i });
            }
        }
        Ok(Self {
            knots,
            values,
            left,
        })
    }

    /// Right-continuous step path: `values[i]` on `[breaks[i], breaks[i+1])`,
    /// extended to `end`. `left_at_start` is the left limit at `breaks[0]`.
    pub fn step(
        breaks: Vec<f64>,
        values: Vec<f64>,
        left_at_start: f64,
        end: f64,
    ) -> Result<Self, PathError> {
        if breaks.is_empty() || values.len() != breaks.len() {
            return Err(PathError::Length {
                times: breaks.len(),
                values: values.len(),
                left: breaks.len(),
            });
        }
        let mut knots = breaks;
        let mut vals = values;
        let mut left = Vec::with_capacity(knots.len() + 1);
        left.push(left_at_start);
        left.extend_from_slice(&vals[..vals.len() - 1]);
        if end > *knots.last().unwrap() {
            let last = *vals.last().unwrap();
            knots.push(end);
            vals.push(last);
            left.push(last);
        }
        Self::new(knots, vals, left)
    }

    /// Continuous piecewise-linear path through `(knots[i], values[i])`.
    pub fn linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, PathError> {
        let left = values.clone();
        Self::new(knots, values, left)
    }

    /// Drift of one region as a step path on `[0, T]` with `L_{0-} = 0`.
    /// Grid points where the value does not change are dropped.
    pub fn from_drift(drift: &DriftPath, region: usize) -> Self {
        let vals = &drift.values[region];
        let mut breaks = vec![drift.times[0]];
        let mut values = vec![vals[0]];
        for k in 1..vals.len() {
            if vals[k] != *values.last().unwrap() {
                breaks.push(drift.times[k]);
                values.push(vals[k]);
            }
        }
        Self::step(breaks, values, 0.0, drift.horizon())
            .expect("drift grid is increasing and finite")
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_limits(&self) -> &[f64] {
        &self.left
    }

    pub fn left_limit_at_start(&self) -> f64 {
        self.left[0]
    }

    fn locate(&self, t: f64) -> usize {
        self.knots.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// `h(t)`; times outside the domain are clamped to it.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(self.start(), self.end());
        let i = self.locate(t);
        if self.knots[i] == t || i + 1 == self.knots.len() {
            return self.values[i];
        }
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let (a, b) = (self.values[i], self.left[i + 1]);
        if a == b {
            a
        } else {
            a + (b - a) * ((t - t0) / (t1 - t0))
        }
    }

    /// `h(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let t = t.clamp(self.start(), self.end());
        let i = self.locate(t);
        if self.knots[i] == t {
            self.left[i]
        } else {
            self.eval(t)
        }
    }

    /// Embeds the path in `[S - 1, T + 1]`: constant at the left limit before
    /// `S` and constant at `h(T)` after `T`.
    pub fn extended(&self) -> Self {
        let mut knots = Vec::with_capacity(self.knots.len() + 2);
        let mut values = Vec::with_capacity(knots.capacity());
        let mut left = Vec::with_capacity(knots.capacity());
        knots.push(self.start() - 1.0);
        values.push(self.left[0]);
        left.push(self.left[0]);
        knots.extend_from_slice(&self.knots);
        values.extend_from_slice(&self.values);
        left.extend_from_slice(&self.left);
        let last = *self.values.last().unwrap();
        knots.push(self.end() + 1.0);
        values.push(last);
        left.push(last);
        Self {
            knots,
            values,
            left,
        }
    }

    /// Values the path attains or approaches on `[a, b]`, in time order:
    /// `h(a)`, then `h(τ-)`, `h(τ)` for each knot `τ` in `(a, b]`, then `h(b)`.
    /// Every linear piece contributes its two ends, so sups of the
    /// oscillation functionals over `[a, b]` are attained on this list.
    pub(crate) fn candidates(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![self.eval(a)];
        let lo = self.knots.partition_point(|&s| s <= a);
        let hi = self.knots.partition_point(|&s| s <= b);
        for i in lo..hi {
            out.push(self.left[i]);
            out.push(self.values[i]);
        }
        out.push(self.eval(b));
        out
    }

    /// Vertices of the completed graph in order: a vertical segment at every
    /// knot from `h(τ-)` to `h(τ)`, joined by the linear pieces.
    pub(crate) fn graph_vertices(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(2 * self.knots.len());
        for i in 0..self.knots.len() {
            let t = self.knots[i];
            out.push((t, self.left[i]));
            if self.values[i] != self.left[i] {
                out.push((t, self.values[i]));
            }
        }
        out
    }
}
