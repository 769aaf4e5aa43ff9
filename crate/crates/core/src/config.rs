//! Experiment configuration files.
//!
//! Configs are TOML. Top-level keys:
//!
//! | key | meaning |
//! |---|---|
//! | `N` | particles per region |
//! | `T` | horizon |
//! | `dt` | time step (default `1e-4`) |
//! | `seed` | base seed (default 0) |
//! | `seeds` | seed list for sweeps and Monte Carlo checks |
//! | `N_list` | population sizes for sweeps |
//! | `scheme` | `"grid"` or `"bridge"` |
//! | `K` | coupling matrix, one row per region |
//! | `alpha`, `beta` | shorthand for the two-phase matrix `[[α, -β], [-α, β]]` |
//! | `snapshot_times`, `snapshot_bins`, `snapshot_range` | density snapshots |
//! | `record_paths`, `store_jump_measures` | optional outputs |
//!
//! Each `[[regions]]` table has a `name` and exactly one of
//! `pieces = [{lo, hi, weight}, ...]`, `quantiles = [[u, q], ...]` or
//! `quantile_table = "file.csv"` (relative to the config file), plus an
//! optional `allow_boundary_mass`.
//!
//! An optional `[tightness]` table lists `r`, `delta` and `t` values for the
//! oscillation check.

use std::path::Path;

use serde::Deserialize;

use crate::cascade::CouplingMatrix;
use crate::engine::{HitScheme, RegionConfig, SimulationConfig};
use crate::laws::{InitialLaw, UniformPiece};

pub const DEFAULT_DT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line in the config text, when the problem can be located.
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessGrid {
    pub r: Vec<f64>,
    pub delta: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub simulation: SimulationConfig,
    pub seeds: Vec<u64>,
    pub n_list: Vec<usize>,
    pub tightness: Option<TightnessGrid>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawConfig {
    N: i64,
    T: f64,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default)]
    N_list: Vec<i64>,
    #[serde(default)]
    scheme: Option<String>,
    #[serde(default)]
    K: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    regions: Vec<RawRegion>,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    #[serde(default)]
    snapshot_bins: Option<i64>,
    #[serde(default)]
    snapshot_range: Option<(f64, f64)>,
    #[serde(default)]
    record_paths: bool,
    #[serde(default)]
    store_jump_measures: bool,
    #[serde(default)]
    tightness: Option<TightnessGrid>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    name: String,
    #[serde(default)]
    pieces: Option<Vec<UniformPiece>>,
    #[serde(default)]
    quantiles: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    quantile_table: Option<String>,
    #[serde(default)]
    allow_boundary_mass: bool,
}

/// First line whose text starts with `key` followed by `=` (ignoring spaces).
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Line of the `index`-th `[[regions]]` header.
fn region_line(text: &str, index: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim() == "[[regions]]")
        .nth(index)
        .map(|(i, _)| i + 1)
}

/// Parses a config. `read_table` loads a quantile table named in the config.
pub fn parse_config(
    text: &str,
    read_table: &dyn Fn(&str) -> Result<String, String>,
) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError {
            line,
            message: e.message().to_string(),
        }
    })?;
    let at = |key: &str, message: String| ConfigError {
        line: key_line(text, key),
        message,
    };

    if raw.N <= 0 {
        return Err(at(
            "N",
            format!("N must be a positive integer, got {}", raw.N),
        ));
    }
    let dt = raw.dt.unwrap_or(DEFAULT_DT);
    let scheme = match raw.scheme.as_deref() {
        None => HitScheme::Grid,
        Some(s) => s.parse().map_err(|e| at("scheme", e))?,
    };
    let coupling = match (raw.K, raw.alpha, raw.beta) {
        (Some(rows), None, None) => {
            CouplingMatrix::new(rows).map_err(|e| at("K", e.to_string()))?
        }
        (None, Some(a), Some(b)) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(at("alpha", "alpha and beta must be finite".into()));
            }
            CouplingMatrix::two_phase(a, b)
        }
        (None, None, None) => {
            return Err(at(
                "regions",
                "missing coupling: give `K` or both `alpha` and `beta`".into(),
            ))
        }
        _ => {
            return Err(at(
                "K",
                "give either `K` or both `alpha` and `beta`, not a mix".into(),
            ))
        }
    };

    let mut regions = Vec::with_capacity(raw.regions.len());
    for (i, r) in raw.regions.into_iter().enumerate() {
        let err = |message: String| ConfigError {
            line: region_line(text, i),
            message: format!("region `{}`: {message}", r.name),
        };
        let law = match (r.pieces, r.quantiles, r.quantile_table) {
            (Some(pieces), None, None) => if r.allow_boundary_mass {
                InitialLaw::mixture_allowing_boundary(pieces)
            } else {
                InitialLaw::mixture(pieces)
            }
            .map_err(|e| err(e.to_string()))?,
            (None, Some(points), None) => InitialLaw::from_quantiles(points, r.allow_boundary_mass)
                .map_err(|e| err(e.to_string()))?,
            (None, None, Some(file)) => {
                let body = read_table(&file)
                    .map_err(|e| err(format!("cannot read quantile table `{file}`: {e}")))?;
                InitialLaw::parse_quantile_table(&body, r.allow_boundary_mass)
                    .map_err(|e| err(format!("quantile table `{file}`: {e}")))?
            }
            _ => {
                return Err(err(
                    "needs exactly one of `pieces`, `quantiles`, `quantile_table`".into(),
                ))
            }
        };
        regions.push(RegionConfig { name: r.name, law });
    }
    {
        let mut names: Vec<&str> = regions.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(at("name", format!("duplicate region name `{}`", w[0])));
        }
        if let Some(bad) = regions
            .iter()
            .find(|r| r.name.is_empty() || r.name.contains([',', '"', '\n']))
        {
            return Err(at(
                "name",
                format!(
                    "region name `{}` must be non-empty without commas or quotes",
                    bad.name
                ),
            ));
        }
    }

    let snapshot_bins = match raw.snapshot_bins {
        None => 100,
        Some(b) if b > 0 => b as usize,
        Some(b) => {
            return Err(at(
                "snapshot_bins",
                format!("snapshot_bins must be positive, got {b}"),
            ))
        }
    };
    let mut n_list = Vec::with_capacity(raw.N_list.len());
    for &n in &raw.N_list {
        if n <= 0 {
            return Err(at(
                "N_list",
                format!("N_list entries must be positive, got {n}"),
            ));
        }
        n_list.push(n as usize);
    }

    let simulation = SimulationConfig {
        particles: raw.N as usize,
        horizon: raw.T,
        dt,
        seed: raw.seed.unwrap_or(0),
        scheme,
        regions,
        coupling,
        snapshot_times: raw.snapshot_times,
        snapshot_bins,
        snapshot_range: raw.snapshot_range,
        record_paths: raw.record_paths,
        store_jump_measures: raw.store_jump_measures,
    };
    simulation.validate().map_err(|e| {
        let msg = e.to_string();
        let key = ["dt", "T", "N", "snapshot_times", "snapshot_range", "K"]
            .into_iter()
            .find(|k| msg.contains(&k.to_lowercase()) || msg.contains(k))
            .unwrap_or("N");
        at(key, msg)
    })?;
    if let Some(g) = &raw.tightness {
        let bad =
            g.r.iter()
                .chain(&g.delta)
                .any(|x| !(x.is_finite() && *x > 0.0))
                || g.t.iter().any(|t| !(0.0..=simulation.horizon).contains(t));
        if bad {
            return Err(at(
                "r",
                "tightness grid needs positive r and delta and t within [0, T]".into(),
            ));
        }
    }
    Ok(ExperimentConfig {
        simulation,
        seeds: raw.seeds,
        n_list,
        tightness: raw.tightness,
    })
}

/// Reads a config file; quantile tables resolve relative to its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &|file: &str| {
        std::fs::read_to_string(base.join(file)).map_err(|e| e.to_string())
    })
}

/// Resolver that refuses every quantile table file.
pub fn no_tables(file: &str) -> Result<String, String> {
    Err(format!("external tables are disabled (`{file}`)"))
}
