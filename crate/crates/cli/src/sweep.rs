//! Population sweeps and the convergence diagnostic.

use rayon::prelude::*;
use serde::Serialize;
use stefan_core::diagnostics::{m1_distance, CadlagPath};
use stefan_core::engine::{run, DriftPath, EngineError, SimulationConfig, SimulationResult};

/// A jump counts as macroscopic when some region's drift moves by at least
/// this fraction of the largest row mass of the coupling matrix.
pub const MACRO_JUMP_FRACTION: f64 = 0.05;

/// Probe times keep at least this fraction of the horizon away from every
/// macroscopic jump.
pub const PROBE_MARGIN_FRACTION: f64 = 0.02;

const PROBE_CANDIDATES: usize = 200;

/// Runs every `(n, seed)` pair, ordered by `n` then seed. Runs are spread over
/// `workers` threads; each run is itself sequential, so results do not
/// depend on `workers`.
pub fn run_grid(
    base: &SimulationConfig,
    n_list: &[usize],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<SimulationResult>, EngineError> {
    let jobs: Vec<SimulationConfig> = n_list
        .iter()
        .flat_map(|&n| {
            seeds.iter().map(move |&seed| SimulationConfig {
                particles: n,
                seed,
                ..base.clone()
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    pool.install(|| jobs.par_iter().map(run).collect())
}

/// Largest absolute drift move of any region across a jump.
fn jump_size(j: &stefan_core::engine::JumpRecord) -> f64 {
    j.pre
        .iter()
        .zip(&j.post)
        .map(|(a, b)| (b - a).abs())
        .fold(0.0, f64::max)
}

/// Up to `count` grid times, spread over `(0, T)`, that are farther than
/// the margin from every macroscopic jump of every run.
pub fn jump_free_probes(
    runs: &[&DriftPath],
    count: usize,
    macro_jump: f64,
    margin: f64,
) -> Vec<f64> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let horizon = first.horizon();
    let jump_times: Vec<f64> = runs
        .iter()
        .flat_map(|d| {
            d.jumps
                .iter()
                .filter(|j| jump_size(j) >= macro_jump)
                .map(|j| j.time)
        })
        .collect();
    let mut free: Vec<f64> = (1..=PROBE_CANDIDATES)
        .map(|i| {
            let target = horizon * i as f64 / (PROBE_CANDIDATES + 1) as f64;
            let k = first
                .times
                .partition_point(|&s| s <= target)
                .saturating_sub(1);
            first.times[k]
        })
        .filter(|&t| t > 0.0 && jump_times.iter().all(|&s| (s - t).abs() > margin))
        .collect();
    free.dedup();
    if free.len() <= count {
        return free;
    }
    (0..count)
        .map(|j| free[((j as f64 + 0.5) * free.len() as f64 / count as f64) as usize])
        .collect()
}

/// Pointwise mean of drift paths on a shared grid.
pub fn mean_drift(runs: &[&DriftPath]) -> DriftPath {
    let first = runs[0];
    let mut values = vec![vec![0.0; first.times.len()]; first.regions()];
    for d in runs {
        assert_eq!(d.times, first.times, "runs must share the time grid");
        for (acc, v) in values.iter_mut().zip(&d.values) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
    }
    let n = runs.len() as f64;
    for acc in &mut values {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    DriftPath {
        times: first.times.clone(),
        values,
        jumps: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub region: String,
    pub m1_distance: f64,
    pub probe_sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub t: f64,
    pub region: String,
    pub n_coarse: usize,
    pub n_fine: usize,
    /// Mean over shared seeds of `|L^fine_t - L^coarse_t|`.
    pub mean_abs_diff: f64,
}

/// Convergence rows for adjacent population sizes. `groups` holds, per
/// population size in increasing order, the runs of every seed.
pub fn convergence(
    groups: &[(usize, Vec<&SimulationResult>)],
    region_names: &[String],
    probes: &[f64],
) -> (Vec<ConvergenceRow>, Vec<ProbeRow>) {
    let mut rows = Vec::new();
    let mut probe_rows = Vec::new();
    for pair in groups.windows(2) {
        let (nc, coarse) = (&pair[0].0, &pair[0].1);
        let (nf, fine) = (&pair[1].0, &pair[1].1);
        let mc = mean_drift(&coarse.iter().map(|r| &r.drift).collect::<Vec<_>>());
        let mf = mean_drift(&fine.iter().map(|r| &r.drift).collect::<Vec<_>>());
        for (r, name) in region_names.iter().enumerate() {
            let hc = CadlagPath::from_drift(&mc, r);
            let hf = CadlagPath::from_drift(&mf, r);
            let vertices = 2 * hc.knots().len().max(hf.knots().len());
            let m1 = m1_distance(&hc, &hf, vertices.next_power_of_two())
                .expect("shared grid and resolution");
            let sup = probes
                .iter()
                .map(|&t| (mf.value_at(r, t) - mc.value_at(r, t)).abs())
                .fold(0.0, f64::max);
            rows.push(ConvergenceRow {
                n_coarse: *nc,
                n_fine: *nf,
                region: name.clone(),
                m1_distance: m1,
                probe_sup_distance: sup,
            });
            for &t in probes {
                let diffs: Vec<f64> = coarse
                    .iter()
                    .filter_map(|c| {
                        fine.iter()
                            .find(|f| f.config.seed == c.config.seed)
                            .map(|f| (f.drift.value_at(r, t) - c.drift.value_at(r, t)).abs())
                    })
                    .collect();
                let mean = if diffs.is_empty() {
                    f64::NAN
                } else {
                    diffs.iter().sum::<f64>() / diffs.len() as f64
                };
                probe_rows.push(ProbeRow {
                    t,
                    region: name.clone(),
                    n_coarse: *nc,
                    n_fine: *nf,
                    mean_abs_diff: mean,
                });
            }
        }
    }
    (rows, probe_rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(values: Vec<f64>, jumps: &[(usize, f64)]) -> DriftPath {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * 0.01).collect();
        let jumps = jumps
            .iter()
            .map(|&(k, size)| stefan_core::engine::JumpRecord {
                time: times[k],
                grid_index: k,
                pre: vec![0.0],
                post: vec![size],
                jump: vec![size],
                triggers: vec![1],
                defaults: vec![1],
                steps: 1,
                measure: None,
            })
            .collect();
        DriftPath {
            times,
            values: vec![values],
            jumps,
        }
    }

    #[test]
    fn probes_avoid_macroscopic_jumps() {
        let d = path(vec![0.0; 101], &[(50, 0.5), (20, 0.001)]);
        let probes = jump_free_probes(&[&d], 5, 0.05, 0.05);
        assert_eq!(probes.len(), 5);
        assert!(probes.iter().all(|&t| (t - 0.5).abs() > 0.05));
        assert!(probes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mean_of_two_paths() {
        let a = path(vec![0.0, 1.0], &[]);
        let b = path(vec![1.0, 2.0], &[]);
        assert_eq!(mean_drift(&[&a, &b]).values, vec![vec![0.5, 1.5]]);
    }
}
