//! Full spectra of the sector Hamiltonians `H_N`.

use std::io::Write;

use faer::Side;
use serde::{Deserialize, Serialize};

use crate::basis::{binomial, SectorBasis};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, LadderSpec};

/// Largest sector dimension diagonalized densely unless told otherwise.
pub const DEFAULT_SPECTRUM_CAP: usize = 5000;

pub const SPECTRUM_COLUMNS: [&str; 3] = ["N", "index", "energy_over_J"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSpectrum {
    pub particles: usize,
    /// Ascending, in units of the leg hopping.
    pub energies: Vec<f64>,
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn trace(&self) -> f64 {
        self.energies.iter().sum()
    }

    /// `max_i |E_i + E_{d-1-i}|`; zero for a spectrum symmetric under `E → -E`.
    pub fn reflection_asymmetry(&self) -> f64 {
        let d = self.energies.len();
        (0..d).map(|i| (self.energies[i] + self.energies[d - 1 - i]).abs()).fold(0.0, f64::max)
    }

    pub fn max_difference(&self, other: &SectorSpectrum) -> Option<f64> {
        (self.energies.len() == other.energies.len()).then(|| {
            self.energies.iter().zip(&other.energies).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
    }

    /// Rows `N,index,energy_over_J` with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SPECTRUM_COLUMNS)?;
        for (i, e) in self.energies.iter().enumerate() {
            out.write_record([self.particles.to_string(), i.to_string(), format!("{e:.15e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn sector_spectrum(spec: &LadderSpec, particles: usize) -> Result<SectorSpectrum> {
    sector_spectrum_capped(spec, particles, DEFAULT_SPECTRUM_CAP)
}

pub fn sector_spectrum_capped(spec: &LadderSpec, particles: usize, cap: usize) -> Result<SectorSpectrum> {
    spec.validate()?;
    let sites = 2 * spec.rungs;
    if particles > sites {
        return Err(Error::invalid(format!("{particles} particles do not fit on {sites} sites")));
    }
    let d = binomial(sites, particles);
    if d > cap as u64 {
        return Err(Error::Capacity(format!(
            "sector N={particles} of an L={} ladder has dimension {d}, above the dense cap {cap}; raise the cap or pick a smaller sector",
            spec.rungs
        )));
    }
    let basis = SectorBasis::enumerate(spec.rungs, particles)?;
    let h = build_hamiltonian(spec, &basis)?.to_dense();
    let mut energies = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    energies.sort_by(f64::total_cmp);
    let scale = spec.leg_hopping;
    energies.iter_mut().for_each(|e| *e /= scale);
    Ok(SectorSpectrum { particles, energies })
}
