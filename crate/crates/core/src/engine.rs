//! Discrete-time simulation of the coupled particle systems.
//!
//! Each step applies Gaussian increments to the alive particles, detects
//! boundary hits (on the grid, optionally corrected by the Brownian-bridge
//! crossing probability), resolves the resulting cascade and applies its jump
//! once to every particle of each region. The drift of region `r` is never
//! accumulated: it is recomputed from the cumulative default counts, so the
//! recorded path satisfies `L^r_t = sum_s K[r][s] * D^s_t` exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{resolve_cascade, CascadeError, CouplingMatrix};
use crate::laws::InitialLaw;
use crate::noise::{particle_stream, NoiseStreams, Purpose};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite position {value} for particle {particle} of region {region} at t = {time}\n{dump}")]
    NonFinite {
        region: usize,
        particle: usize,
        time: f64,
        value: f64,
        dump: String,
    },
    #[error("cascade failed at t = {time}: {source}")]
    Cascade { time: f64, source: CascadeError },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// How boundary hits are detected between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitScheme {
    /// A particle defaults when its position at a grid time is `<= 0`.
    #[default]
    Grid,
    /// Grid detection plus a Brownian-bridge crossing test for particles that
    /// are positive at both ends of the step.
    Bridge,
}

impl std::str::FromStr for HitScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "grid" => Ok(Self::Grid),
            "bridge" => Ok(Self::Bridge),
            other => Err(format!(
                "unknown scheme `{other}` (expected `grid` or `bridge`)"
            )),
        }
    }
}

impl std::fmt::Display for HitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Grid => "grid",
            Self::Bridge => "bridge",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub name: String,
    pub law: InitialLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Particles per region.
    pub particles: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: HitScheme,
    pub regions: Vec<RegionConfig>,
    pub coupling: CouplingMatrix,
    pub snapshot_times: Vec<f64>,
    pub snapshot_bins: usize,
    /// Histogram range; defaults to `[0, max support + 4 sqrt(T)]`.
    pub snapshot_range: Option<(f64, f64)>,
    pub record_paths: bool,
    /// Keep the pre-jump measure of every cascade for the physicality audit.
    pub store_jump_measures: bool,
}

impl SimulationConfig {
    /// Config with no snapshots and no recording.
    pub fn new(
        particles: usize,
        horizon: f64,
        dt: f64,
        seed: u64,
        regions: Vec<RegionConfig>,
        coupling: CouplingMatrix,
    ) -> Self {
        Self {
            particles,
            horizon,
            dt,
            seed,
            scheme: HitScheme::Grid,
            regions,
            coupling,
            snapshot_times: Vec::new(),
            snapshot_bins: 100,
            snapshot_range: None,
            record_paths: false,
            store_jump_measures: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |msg: String| Err(EngineError::Config(msg));
        if self.particles == 0 {
            return fail("particles must be at least 1".into());
        }
        if self.particles > u32::MAX as usize {
            return fail(format!(
                "particles = {} exceeds the stream index range",
                self.particles
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return fail(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.horizon) {
            return fail(format!(
                "dt must satisfy 0 < dt <= T, got dt = {} with T = {}",
                self.dt, self.horizon
            ));
        }
        if self.regions.is_empty() {
            return fail("at least one region is required".into());
        }
        if self.regions.len() != self.coupling.regions() {
            return fail(format!(
                "coupling matrix is {0}x{0} but {1} regions are configured",
                self.coupling.regions(),
                self.regions.len()
            ));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(0.0..=self.horizon).contains(*t))
        {
            return fail(format!("snapshot time {t} outside [0, {}]", self.horizon));
        }
        if self.snapshot_bins == 0 {
            return fail("snapshot_bins must be at least 1".into());
        }
        if let Some((lo, hi)) = self.snapshot_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return fail(format!(
                    "snapshot range [{lo}, {hi}] is empty or not finite"
                ));
            }
        }
        Ok(())
    }

    /// Grid times `0, dt, 2 dt, ...`, ending exactly at the horizon.
    pub fn grid_times(&self) -> Vec<f64> {
        let steps = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (0..=steps)
            .map(|k| {
                if k == steps {
                    self.horizon
                } else {
                    k as f64 * self.dt
                }
            })
            .collect()
    }

    pub fn histogram_range(&self) -> (f64, f64) {
        self.snapshot_range.unwrap_or_else(|| {
            let hi = self
                .regions
                .iter()
                .map(|r| r.law.support().1)
                .fold(0.0, f64::max);
            (0.0, hi + 4.0 * self.horizon.sqrt())
        })
    }
}

/// Positions, liveness and default times of all particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub time: f64,
    pub positions: Vec<Vec<f64>>,
    pub alive: Vec<Vec<bool>>,
    pub default_times: Vec<Vec<Option<f64>>>,
}

impl ParticleState {
    pub fn new(positions: Vec<Vec<f64>>) -> Self {
        let alive = positions.iter().map(|xs| vec![true; xs.len()]).collect();
        let default_times = positions.iter().map(|xs| vec![None; xs.len()]).collect();
        Self {
            time: 0.0,
            positions,
            alive,
            default_times,
        }
    }

    /// Initial positions drawn from each particle's own stream.
    pub fn sample(config: &SimulationConfig) -> Self {
        let positions = config
            .regions
            .iter()
            .enumerate()
            .map(|(r, region)| {
                (0..config.particles)
                    .map(|i| {
                        region.law.sample_one(&mut particle_stream(
                            config.seed,
                            r,
                            i,
                            Purpose::Initial,
                        ))
                    })
                    .collect()
            })
            .collect();
        Self::new(positions)
    }

    pub fn regions(&self) -> usize {
        self.positions.len()
    }

    pub fn alive_count(&self, region: usize) -> usize {
        self.alive[region].iter().filter(|&&a| a).count()
    }

    /// Adds `increments[r][i]` to every alive particle and advances the clock.
    /// Entries for dead particles are ignored.
    pub fn advance(&mut self, increments: &[Vec<f64>], dt: f64) {
        for ((xs, alive), inc) in self.positions.iter_mut().zip(&self.alive).zip(increments) {
            for ((x, &a), &d) in xs.iter_mut().zip(alive).zip(inc) {
                if a {
                    *x += d;
                }
            }
        }
        self.time += dt;
    }

    fn first_non_finite(&self) -> Option<(usize, usize, f64)> {
        for (r, (xs, alive)) in self.positions.iter().zip(&self.alive).enumerate() {
            if let Some(i) = (0..xs.len()).find(|&i| alive[i] && !xs[i].is_finite()) {
                return Some((r, i, xs[i]));
            }
        }
        None
    }

    fn dump(&self) -> String {
        let mut out = format!("state at t = {}\n", self.time);
        for r in 0..self.regions() {
            let alive = self.alive_count(r);
            let (lo, hi) = self.positions[r]
                .iter()
                .zip(&self.alive[r])
                .filter(|(_, &a)| a)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&x, _)| {
                    (lo.min(x), hi.max(x))
                });
            out += &format!("  region {r}: {alive} alive, positions in [{lo}, {hi}]\n");
        }
        out
    }
}

/// Functional form of [`ParticleState::advance`].
pub fn advance_step(mut state: ParticleState, increments: &[Vec<f64>], dt: f64) -> ParticleState {
    state.advance(increments, dt);
    state
}

/// Probability that a Brownian bridge of duration `dt` from `a > 0` to `b > 0`
/// touches 0.
pub fn bridge_crossing_probability(a: f64, b: f64, dt: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        1.0
    } else {
        (-2.0 * a * b / dt).exp()
    }
}

/// Indices of the alive particles that hit the boundary during the last step.
///
/// Under [`HitScheme::Bridge`] every alive particle consumes one uniform from
/// its bridge stream per call, hit or not, so a particle's `k`-th bridge draw
/// always belongs to step `k`.
pub fn detect_hits(
    state: &ParticleState,
    scheme: HitScheme,
    pre_positions: &[Vec<f64>],
    dt: f64,
    streams: &mut NoiseStreams,
) -> Vec<Vec<usize>> {
    (0..state.regions())
        .map(|r| {
            let xs = &state.positions[r];
            let alive = &state.alive[r];
            let mut hits = Vec::new();
            for i in 0..xs.len() {
                if !alive[i] {
                    continue;
                }
                let hit = match scheme {
                    HitScheme::Grid => xs[i] <= 0.0,
                    HitScheme::Bridge => {
                        let u = streams.bridge_uniform(r, i);
                        xs[i] <= 0.0
                            || u < bridge_crossing_probability(pre_positions[r][i], xs[i], dt)
                    }
                };
                if hit {
                    hits.push(i);
                }
            }
            hits
        })
        .collect()
}

/// Histogram of alive positions over `bins` equal bins of `[lo, hi]`. Values
/// equal to `hi` land in the last bin; values outside are dropped.
pub fn snapshot_density(state: &ParticleState, bins: usize, range: (f64, f64)) -> Vec<Vec<u64>> {
    let (lo, hi) = range;
    let width = (hi - lo) / bins as f64;
    (0..state.regions())
        .map(|r| {
            let mut counts = vec![0u64; bins];
            for (&x, &a) in state.positions[r].iter().zip(&state.alive[r]) {
                if a && x >= lo && x <= hi {
                    let b = (((x - lo) / width) as usize).min(bins - 1);
                    counts[b] += 1;
                }
            }
            counts
        })
        .collect()
}

/// One cascade as seen by the drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub grid_index: usize,
    /// `L^r` just before and just after the cascade.
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    /// Jump applied to the alive particles of each region.
    pub jump: Vec<f64>,
    /// Step-0 (trigger) counts per region.
    pub triggers: Vec<usize>,
    /// Defaults per region over the whole cascade.
    pub defaults: Vec<usize>,
    pub steps: usize,
    /// Sorted alive positions per region before the jump, hits clamped to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<Vec<f64>>>,
}

/// Drift of every region on the time grid, plus the jump registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPath {
    pub times: Vec<f64>,
    /// `values[r][k]` is `L^r` at `times[k]` (after any cascade at that time).
    pub values: Vec<Vec<f64>>,
    pub jumps: Vec<JumpRecord>,
}

impl DriftPath {
    pub fn regions(&self) -> usize {
        self.values.len()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `L^r_t` for `t` in `[0, T]`, using the last grid time `<= t`.
    pub fn value_at(&self, region: usize, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.values[region][k - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Grid time at which the histogram was taken.
    pub time: f64,
    pub range: (f64, f64),
    /// `counts[r][b]`.
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub time: f64,
    pub region: usize,
    pub particle: usize,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub drift: DriftPath,
    pub default_times: Vec<Vec<Option<f64>>>,
    pub snapshots: Vec<Snapshot>,
    pub paths: Option<Vec<PathPoint>>,
}

impl SimulationResult {
    pub fn defaults(&self, region: usize) -> usize {
        self.default_times[region]
            .iter()
            .filter(|t| t.is_some())
            .count()
    }

    /// Number of defaults of each region at or before `t`.
    pub fn default_counts_at(&self, t: f64) -> Vec<usize> {
        self.default_times
            .iter()
            .map(|ts| {
                ts.iter()
                    .filter(|d| matches!(d, Some(s) if *s <= t))
                    .count()
            })
            .collect()
    }
}

/// Runs the simulation on the calling thread.
pub fn run(config: &SimulationConfig) -> Result<SimulationResult, EngineError> {
    Simulation::new(config, false)?.execute()
}

/// Runs the simulation with `workers` threads for the per-particle work.
/// Output does not depend on `workers`.
pub fn run_with_workers(
    config: &SimulationConfig,
    workers: usize,
) -> Result<SimulationResult, EngineError> {
    if workers <= 1 {
        return run(config);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    pool.install(|| Simulation::new(config, true)?.execute())
}

struct Simulation<'a> {
    config: &'a SimulationConfig,
    parallel: bool,
    state: ParticleState,
    streams: NoiseStreams,
    times: Vec<f64>,
    counts: Vec<usize>,
    values: Vec<Vec<f64>>,
    jumps: Vec<JumpRecord>,
    snapshots: Vec<Snapshot>,
    paths: Option<Vec<PathPoint>>,
}

impl<'a> Simulation<'a> {
    fn new(config: &'a SimulationConfig, parallel: bool) -> Result<Self, EngineError> {
        config.validate()?;
        let m = config.regions.len();
        let times = config.grid_times();
        Ok(Self {
            config,
            parallel,
            state: ParticleState::sample(config),
            streams: NoiseStreams::new(
                config.seed,
                m,
                config.particles,
                config.scheme == HitScheme::Bridge,
            ),
            values: vec![Vec::with_capacity(times.len()); m],
            times,
            counts: vec![0; m],
            jumps: Vec::new(),
            snapshots: Vec::new(),
            paths: config.record_paths.then(Vec::new),
        })
    }

    fn execute(mut self) -> Result<SimulationResult, EngineError> {
        let m = self.config.regions.len();
        let n = self.config.particles;
        let mut snapshot_order: Vec<f64> = self.config.snapshot_times.clone();
        snapshot_order.sort_by(f64::total_cmp);
        let mut next_snapshot = 0;

        let mut increments = vec![vec![0.0; n]; m];
        let mut pre = if self.config.scheme == HitScheme::Bridge {
            self.state.positions.clone()
        } else {
            Vec::new()
        };

        for k in 0..self.times.len() {
            let t = self.times[k];
            let hits = if k == 0 {
                self.check_finite()?;
                self.grid_hits()
            } else {
                let h = t - self.times[k - 1];
                if self.config.scheme == HitScheme::Bridge {
                    for (p, x) in pre.iter_mut().zip(&self.state.positions) {
                        p.copy_from_slice(x);
                    }
                }
                self.fill_increments(&mut increments, h.sqrt());
                self.state.advance(&increments, h);
                self.state.time = t;
                self.check_finite()?;
                detect_hits(&self.state, self.config.scheme, &pre, h, &mut self.streams)
            };
            if hits.iter().any(|h| !h.is_empty()) {
                self.cascade(k, &hits)?;
            }
            for r in 0..m {
                self.values[r].push(self.config.coupling.drift(r, &self.counts, n));
            }
            while next_snapshot < snapshot_order.len()
                && snapshot_order[next_snapshot] <= t + 1e-12 * self.config.horizon
            {
                let range = self.config.histogram_range();
                self.snapshots.push(Snapshot {
                    time: t,
                    range,
                    counts: snapshot_density(&self.state, self.config.snapshot_bins, range),
                });
                next_snapshot += 1;
            }
            self.record_paths(t);
        }

        Ok(SimulationResult {
            config: self.config.clone(),
            drift: DriftPath {
                times: self.times,
                values: self.values,
                jumps: self.jumps,
            },
            default_times: self.state.default_times,
            snapshots: self.snapshots,
            paths: self.paths,
        })
    }

    fn grid_hits(&self) -> Vec<Vec<usize>> {
        (0..self.state.regions())
            .map(|r| {
                (0..self.config.particles)
                    .filter(|&i| self.state.alive[r][i] && self.state.positions[r][i] <= 0.0)
                    .collect()
            })
            .collect()
    }

    fn fill_increments(&mut self, increments: &mut [Vec<f64>], scale: f64) {
        for (r, buf) in increments.iter_mut().enumerate() {
            let alive = &self.state.alive[r];
            let rngs = self.streams.increments_mut(r);
            let draw = |((b, g), &a): ((&mut f64, &mut rand_chacha::ChaCha8Rng), &bool)| {
                *b = if a {
                    g.sample::<f64, _>(StandardNormal) * scale
                } else {
                    0.0
                };
            };
            if self.parallel {
                buf.par_iter_mut()
                    .zip(rngs.par_iter_mut())
                    .zip(alive.par_iter())
                    .for_each(draw);
            } else {
                buf.iter_mut()
                    .zip(rngs.iter_mut())
                    .zip(alive.iter())
                    .for_each(draw);
            }
        }
    }

    fn check_finite(&self) -> Result<(), EngineError> {
        match self.state.first_non_finite() {
            None => Ok(()),
            Some((region, particle, value)) => Err(EngineError::NonFinite {
                region,
                particle,
                time: self.state.time,
                value,
                dump: self.state.dump(),
            }),
        }
    }

    /// Resolves the cascade triggered by `hits` at grid index `k`.
    ///
    /// Only particles below a per-region cutoff are sorted and handed to the
    /// resolver. If the iteration tests a threshold above the cutoff, the
    /// cutoff grows and the cascade is resolved again, so the outcome always
    /// equals the one on the full sorted population.
    fn cascade(&mut self, k: usize, hits: &[Vec<usize>]) -> Result<(), EngineError> {
        let t = self.times[k];
        let n = self.config.particles;
        let m = hits.len();
        let coupling = &self.config.coupling;
        let mut is_hit: Vec<Vec<bool>> = vec![vec![false; n]; m];
        for (r, hs) in hits.iter().enumerate() {
            for &i in hs {
                is_hit[r][i] = true;
            }
        }
        let triggers = hits.iter().map(Vec::len).max().unwrap_or(0);
        let mut cutoff: Vec<f64> = (0..m)
            .map(|r| {
                if self.config.store_jump_measures {
                    f64::INFINITY
                } else {
                    let mass: f64 = coupling.row(r).iter().map(|x| x.abs()).sum();
                    (4.0 * mass * (triggers + 1) as f64 / n as f64).max(f64::MIN_POSITIVE)
                }
            })
            .collect();

        let (lists, outcome) = loop {
            let mut lists: Vec<Vec<(f64, usize)>> = Vec::with_capacity(m);
            let mut complete = Vec::with_capacity(m);
            for r in 0..m {
                let mut list = Vec::new();
                let mut alive = 0;
                for i in 0..n {
                    if !self.state.alive[r][i] {
                        continue;
                    }
                    alive += 1;
                    let x = if is_hit[r][i] {
                        0.0
                    } else {
                        self.state.positions[r][i]
                    };
                    if x <= cutoff[r] {
                        list.push((x, i));
                    }
                }
                list.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                complete.push(list.len() == alive);
                lists.push(list);
            }
            let positions: Vec<Vec<f64>> = lists
                .iter()
                .map(|l| l.iter().map(|p| p.0).collect())
                .collect();
            let outcome = resolve_cascade(&positions, n, coupling)
                .map_err(|source| EngineError::Cascade { time: t, source })?;
            let mut retry = false;
            for r in 0..m {
                if !complete[r] && outcome.peak_threshold[r] > cutoff[r] {
                    cutoff[r] = (cutoff[r] * 4.0).max(outcome.peak_threshold[r]);
                    retry = true;
                }
            }
            if !retry {
                break (lists, outcome);
            }
        };

        let pre: Vec<f64> = (0..m).map(|r| coupling.drift(r, &self.counts, n)).collect();
        for r in 0..m {
            let jump = outcome.jump[r];
            if jump != 0.0 {
                for (x, &a) in self.state.positions[r].iter_mut().zip(&self.state.alive[r]) {
                    if a {
                        *x -= jump;
                    }
                }
            }
            for step in &outcome.defaulted[r] {
                for &idx in step {
                    let id = lists[r][idx].1;
                    self.state.alive[r][id] = false;
                    self.state.default_times[r][id] = Some(t);
                    if let Some(paths) = self.paths.as_mut() {
                        paths.push(PathPoint {
                            time: t,
                            region: r,
                            particle: id,
                            position: self.state.positions[r][id],
                        });
                    }
                }
            }
        }
        let defaults = outcome.default_counts();
        for r in 0..m {
            self.counts[r] += defaults[r];
        }
        let post = (0..m).map(|r| coupling.drift(r, &self.counts, n)).collect();
        let measure = self.config.store_jump_measures.then(|| {
            lists
                .iter()
                .map(|l| l.iter().map(|p| p.0).collect())
                .collect()
        });
        self.jumps.push(JumpRecord {
            time: t,
            grid_index: k,
            pre,
            post,
            jump: outcome.jump.clone(),
            triggers: (0..m).map(|r| outcome.trigger(r).len()).collect(),
            defaults,
            steps: outcome.steps,
            measure,
        });
        Ok(())
    }

    fn record_paths(&mut self, t: f64) {
        let Some(paths) = self.paths.as_mut() else {
            return;
        };
        for r in 0..self.state.regions() {
            for i in 0..self.config.particles {
                if self.state.alive[r][i] {
                    paths.push(PathPoint {
                        time: t,
                        region: r,
                        particle: i,
                        position: self.state.positions[r][i],
                    });
                }
            }
        }
    }
}
