#![allow(dead_code)]

use std::f64::consts::PI;

use faer::{c64, Mat};
use fluxladder::liouvillian::sector_dims;
use fluxladder::{BlockDensityMatrix, DriveSpec, LadderSpec};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// K/J in [0.5, 2], φ in [0, 2π).
pub fn random_spec(rng: &mut ChaCha8Rng, rungs: usize) -> LadderSpec {
    LadderSpec::new(rungs, 1.0, rng.random_range(0.5..2.0), rng.random_range(0.0..2.0 * PI)).unwrap()
}

/// Γ/J in [0.5, 2], densities in [0, 1].
pub fn random_drive(rng: &mut ChaCha8Rng) -> DriveSpec {
    DriveSpec::new(rng.random_range(0.5..2.0), rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)).unwrap()
}

/// Random positive block state with unit trace.
pub fn random_state(rng: &mut ChaCha8Rng, rungs: usize) -> BlockDensityMatrix {
    let blocks: Vec<Mat<c64>> = sector_dims(rungs)
        .into_iter()
        .map(|d| {
            let a = Mat::from_fn(d, d, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            &a * a.adjoint()
        })
        .collect();
    let mut rho = BlockDensityMatrix::from_blocks(rungs, blocks).unwrap();
    rho.normalize().unwrap();
    rho
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
