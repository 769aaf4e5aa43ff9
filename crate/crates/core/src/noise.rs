//! Per-particle random streams.
//!
//! Every particle owns independent ChaCha8 streams addressed by
//! `(seed, region, particle, purpose)`: the key comes from the seed and the
//! 64-bit stream id encodes the rest. Two runs that share a seed therefore
//! drive particle `i` of region `r` with the same Brownian increments, no
//! matter how many particles, regions or workers the runs use.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for. Each purpose is a separate stream so that, for
/// example, bridge-crossing uniforms never shift the Gaussian increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Initial = 0,
    Increments = 1,
    Bridge = 2,
}

const REGION_BITS: u32 = 24;

/// Stream for one particle.
pub fn particle_stream(seed: u64, region: usize, particle: usize, purpose: Purpose) -> ChaCha8Rng {
    assert!(
        region < (1 << REGION_BITS),
        "region index {region} out of range"
    );
    assert!(
        particle <= u32::MAX as usize,
        "particle index {particle} out of range"
    );
    let id = ((purpose as u64) << 56) | ((region as u64) << 32) | particle as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The increment and bridge streams of every particle in a run.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    increments: Vec<Vec<ChaCha8Rng>>,
    bridge: Vec<Vec<ChaCha8Rng>>,
}

impl NoiseStreams {
    /// `with_bridge` controls whether bridge streams are materialized.
    pub fn new(seed: u64, regions: usize, particles: usize, with_bridge: bool) -> Self {
        let make = |purpose| {
            (0..regions)
                .map(|r| {
                    (0..particles)
                        .map(|i| particle_stream(seed, r, i, purpose))
                        .collect()
                })
                .collect()
        };
        Self {
            increments: make(Purpose::Increments),
            bridge: if with_bridge {
                make(Purpose::Bridge)
            } else {
                Vec::new()
            },
        }
    }

    pub fn increments_mut(&mut self, region: usize) -> &mut [ChaCha8Rng] {
        &mut self.increments[region]
    }

    /// Next standard normal for one particle.
    pub fn normal(&mut self, region: usize, particle: usize) -> f64 {
        self.increments[region][particle].sample(StandardNormal)
    }

    /// Next uniform in `[0, 1)` from the bridge stream.
    ///
    /// Panics if the streams were built without bridge support.
    pub fn bridge_uniform(&mut self, region: usize, particle: usize) -> f64 {
        self.bridge[region][particle].random::<f64>()
    }

    pub fn has_bridge(&self) -> bool {
        !self.bridge.is_empty()
    }
}
