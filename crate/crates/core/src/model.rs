//! Flux-ladder Hamiltonian and observables as sparse operators on a number sector.
//!
//! Internal units: `ħ = 1`, energies in units of the leg hopping `J`.
//!
//! Current operators follow the flow convention used by the continuity
//! equations: a positive leg current moves bosons from rung `j` to `j + 1`,
//! a positive rung current moves them from leg 1 to leg 2.

use std::f64::consts::TAU;
use std::io::Write;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::basis::{hop, SectorBasis, SiteIndex};
use crate::error::{Error, Result};

/// Ladder geometry and couplings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub rungs: usize,
    /// Leg hopping `J`.
    pub leg_hopping: f64,
    /// Rung hopping `K`.
    pub rung_hopping: f64,
    /// Flux per plaquette in radians.
    pub flux: f64,
}

impl LadderSpec {
    pub fn new(rungs: usize, leg_hopping: f64, rung_hopping: f64, flux: f64) -> Result<Self> {
        let spec = Self { rungs, leg_hopping, rung_hopping, flux };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rungs == 0 {
            return Err(Error::invalid("ladder needs at least one rung"));
        }
        if !(self.leg_hopping > 0.0 && self.leg_hopping.is_finite()) {
            return Err(Error::invalid(format!("leg hopping must be positive, got {}", self.leg_hopping)));
        }
        if !(self.rung_hopping >= 0.0 && self.rung_hopping.is_finite()) {
            return Err(Error::invalid(format!(
                "rung hopping must be non-negative, got {}",
                self.rung_hopping
            )));
        }
        if !self.flux.is_finite() {
            return Err(Error::invalid("flux must be finite"));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        2 * self.rungs
    }

    /// Flux folded into `[0, 2π)`.
    pub fn flux_reduced(&self) -> f64 {
        self.flux.rem_euclid(TAU)
    }

    /// Peierls phase `Φ_p = (-1)^(p-1) φ/2` on leg `p`.
    pub fn leg_phase(&self, leg: usize) -> f64 {
        if leg == 1 {
            0.5 * self.flux
        } else {
            -0.5 * self.flux
        }
    }

    pub fn with_flux(&self, flux: f64) -> Self {
        Self { flux, ..*self }
    }

    /// Hopping terms `amplitude · a†_left a_right + h.c.` of the Hamiltonian:
    /// leg bonds first (leg 1 then leg 2, rung-ordered), then rungs.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut bonds = Vec::with_capacity(3 * self.rungs);
        for leg in 1..=2 {
            let amp = -self.leg_hopping * c64::cis(self.leg_phase(leg));
            for j in 1..self.rungs {
                bonds.push(Bond {
                    left: flat(j, leg),
                    right: flat(j + 1, leg),
                    amplitude: amp,
                });
            }
        }
        for j in 1..=self.rungs {
            bonds.push(Bond { left: flat(j, 1), right: flat(j, 2), amplitude: c64::new(-self.rung_hopping, 0.0) });
        }
        bonds
    }

    /// The `2L × 2L` single-particle hopping matrix `h` with `H = Σ h_kl a†_k a_l`.
    pub fn one_particle_matrix(&self) -> Mat<c64> {
        let n = self.sites();
        let mut h = Mat::<c64>::zeros(n, n);
        for b in self.bonds() {
            h[(b.left, b.right)] += b.amplitude;
            h[(b.right, b.left)] += b.amplitude.conj();
        }
        h
    }
}

#[inline]
fn flat(rung: usize, leg: usize) -> usize {
    2 * (rung - 1) + (leg - 1)
}

/// Baths at both ends of leg 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Coupling rate `Γ`.
    pub gamma: f64,
    /// Target density `n̄₁` of the bath at rung 1.
    pub nbar_left: f64,
    /// Target density `n̄_L` of the bath at rung `L`.
    pub nbar_right: f64,
}

impl DriveSpec {
    pub fn new(gamma: f64, nbar_left: f64, nbar_right: f64) -> Result<Self> {
        let drive = Self { gamma, nbar_left, nbar_right };
        drive.validate()?;
        Ok(drive)
    }

    pub fn from_average(gamma: f64, nbar_avg: f64, delta_nbar: f64) -> Result<Self> {
        Self::new(gamma, nbar_avg + 0.5 * delta_nbar, nbar_avg - 0.5 * delta_nbar)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("bath coupling must be positive, got {}", self.gamma)));
        }
        for (name, v) in [("nbar_left", self.nbar_left), ("nbar_right", self.nbar_right)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn delta_nbar(&self) -> f64 {
        self.nbar_left - self.nbar_right
    }

    pub fn nbar_avg(&self) -> f64 {
        0.5 * (self.nbar_left + self.nbar_right)
    }

    /// Driven sites with their target densities: `(1,1)` and `(L,1)`.
    pub fn driven_sites(&self, rungs: usize) -> [(usize, f64); 2] {
        [(flat(1, 1), self.nbar_left), (flat(rungs, 1), self.nbar_right)]
    }
}

/// One hopping term `amplitude · a†_left a_right + h.c.`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub left: usize,
    pub right: usize,
    pub amplitude: c64,
}

/// Sparse operator restricted to one number sector, compressed by rows.
#[derive(Clone, Debug)]
pub struct SparseSectorOperator {
    sector: usize,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl SparseSectorOperator {
    fn from_triplets(sector: usize, dim: usize, mut triplets: Vec<(usize, usize, c64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<c64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { sector, dim, row_ptr, cols, vals }
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of row `i` as `(column, value)`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    #[inline]
    pub(crate) fn row_slices(&self, i: usize) -> (&[usize], &[c64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> c64 {
        self.row(row).find(|&(c, _)| c == col).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `max |O_rc - conj(O_cr)|`.
    pub fn hermiticity_error(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest number of off-diagonal entries in any column.
    pub fn max_offdiag_per_column(&self) -> usize {
        let mut counts = vec![0usize; self.dim];
        for (r, c, _) in self.triplets() {
            if r != c {
                counts[c] += 1;
            }
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// `y = O x`.
    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        (0..self.dim).map(|i| self.row(i).map(|(k, v)| v * x[k]).sum()).collect()
    }

    /// `tr(O ρ)` for a dense `ρ` of matching dimension.
    pub fn expectation(&self, rho: MatRef<'_, c64>) -> c64 {
        debug_assert_eq!(rho.nrows(), self.dim);
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..self.dim {
            for (k, v) in self.row(i) {
                acc += v * rho[(k, i)];
            }
        }
        acc
    }

    /// Coordinate-list dump: one `row col re im` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# sector {} dim {} nnz {}", self.sector, self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

fn check_basis(spec: &LadderSpec, basis: &SectorBasis) -> Result<()> {
    if spec.rungs != basis.rungs() {
        return Err(Error::invalid(format!(
            "basis built for {} rungs, ladder has {}",
            basis.rungs(),
            spec.rungs
        )));
    }
    Ok(())
}

/// Sum of `t · a†_left a_right + conj(t) · a†_right a_left` over the given terms.
fn hopping_operator(basis: &SectorBasis, terms: &[Bond]) -> SparseSectorOperator {
    let mut triplets = Vec::with_capacity(basis.dim() * terms.len());
    for (col, &state) in basis.states().iter().enumerate() {
        for b in terms {
            if let Some(next) = hop(state, b.right, b.left) {
                triplets.push((basis.rank(next).expect("hop stays in sector"), col, b.amplitude));
            }
            if let Some(next) = hop(state, b.left, b.right) {
                triplets.push((basis.rank(next).expect("hop stays in sector"), col, b.amplitude.conj()));
            }
        }
    }
    SparseSectorOperator::from_triplets(basis.particles(), basis.dim(), triplets)
}

/// `H_N = -J Σ e^{iΦ_p} a†_{j,p} a_{j+1,p} - K Σ a†_{j,1} a_{j,2} + h.c.` on sector `N`.
pub fn build_hamiltonian(spec: &LadderSpec, basis: &SectorBasis) -> Result<SparseSectorOperator> {
    check_basis(spec, basis)?;
    Ok(hopping_operator(basis, &spec.bonds()))
}

/// Diagonal occupation operator `n_site`.
pub fn build_density(basis: &SectorBasis, site: SiteIndex) -> Result<SparseSectorOperator> {
    if site.rung() > basis.rungs() {
        return Err(Error::invalid(format!("rung {} outside a {}-rung ladder", site.rung(), basis.rungs())));
    }
    let k = site.flat();
    let triplets = basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.occupied(k))
        .map(|(i, _)| (i, i, c64::new(1.0, 0.0)))
        .collect();
    Ok(SparseSectorOperator::from_triplets(basis.particles(), basis.dim(), triplets))
}

/// Current from rung `bond` to rung `bond + 1` along `leg`.
pub fn build_leg_current(
    spec: &LadderSpec,
    basis: &SectorBasis,
    bond: usize,
    leg: usize,
) -> Result<SparseSectorOperator> {
    check_basis(spec, basis)?;
    if bond == 0 || bond >= spec.rungs {
        return Err(Error::invalid(format!("leg bond {bond} outside 1..={}", spec.rungs.saturating_sub(1))));
    }
    if leg != 1 && leg != 2 {
        return Err(Error::invalid(format!("leg must be 1 or 2, got {leg}")));
    }
    let coeff = c64::new(0.0, -spec.leg_hopping) * c64::cis(spec.leg_phase(leg));
    let term = Bond { left: flat(bond, leg), right: flat(bond + 1, leg), amplitude: coeff };
    Ok(hopping_operator(basis, &[term]))
}

/// Current from leg 1 to leg 2 across rung `rung`.
pub fn build_rung_current(
    spec: &LadderSpec,
    basis: &SectorBasis,
    rung: usize,
) -> Result<SparseSectorOperator> {
    check_basis(spec, basis)?;
    if rung == 0 || rung > spec.rungs {
        return Err(Error::invalid(format!("rung {rung} outside 1..={}", spec.rungs)));
    }
    let term = Bond {
        left: flat(rung, 1),
        right: flat(rung, 2),
        amplitude: c64::new(0.0, -spec.rung_hopping),
    };
    Ok(hopping_operator(basis, &[term]))
}
