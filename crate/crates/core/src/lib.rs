//! Finite particle approximation of the two-phase supercooled Stefan problem.
//!
//! The crate simulates coupled populations of absorbed Brownian particles whose
//! common (or per-region) drift is driven by the defaulted fraction of every
//! region. Boundary hits trigger cascades that are resolved causally, one
//! cascade step at a time, which yields the minimal (physical) jump sizes.
//!
//! Modules:
//! - [`laws`]: initial distributions (uniform mixtures and quantile tables).
//! - [`noise`]: per-particle random streams keyed by `(seed, region, particle)`.
//! - [`cascade`]: cascade resolution, a brute-force reference, and the
//!   physical jump size of an empirical measure.
//! - [`engine`]: the discrete-time particle system.
//! - [`compare`]: coupled versus decoupled runs on identical noise.
//! - [`diagnostics`]: M1 oscillations and distance, the `w`-oscillation tail
//!   bound, the discontinuity criterion, and the physicality audit.
//! - [`config`] and [`output`]: the on-disk configuration and CSV layouts.

pub mod cascade;
pub mod compare;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod laws;
pub mod noise;
pub mod output;

pub use cascade::{
    cascade_oracle, physical_jump_size, resolve_cascade, CascadeOutcome, CouplingMatrix,
};
pub use engine::{run, run_with_workers, HitScheme, SimulationConfig, SimulationResult};
pub use laws::{InitialLaw, UniformPiece};
