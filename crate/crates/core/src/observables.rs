//! Currents, densities and sector-resolved quantities of a steady state.
//!
//! Sign conventions: a leg current is positive when particles flow from rung
//! `j` to `j + 1`, a rung current when they flow from leg 1 to leg 2. With
//! these, stationarity of an undriven site reads
//! `J^L_{j-1,p} - J^L_{j,p} ∓ J^R_j = 0` (upper sign for leg 1), and the bath
//! balance is `J = 2Γ(n̄₁ - ⟨n_{1,1}⟩) = 2Γ(⟨n_{L,1}⟩ - n̄_L)`.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::basis::{SectorBasis, SiteIndex};
use crate::error::{Error, Result};
use crate::liouvillian::BlockDensityMatrix;
use crate::model::{build_density, build_leg_current, build_rung_current, DriveSpec, LadderSpec, SparseSectorOperator};
use crate::solver::SolveDiagnostics;

pub const REPORT_SCHEMA: &str = "fluxladder.observables/1";
pub const ENGINE_VERSION: &str = concat!("fluxladder ", env!("CARGO_PKG_VERSION"));

/// Continuity residuals, all in units of J/ħ.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// Worst `|J_in - J_out ∓ J^R|` over undriven sites.
    pub sites: f64,
    /// `|J - 2Γ(n̄₁ - ⟨n_{1,1}⟩)|`.
    pub left_bath: f64,
    /// `|J - 2Γ(⟨n_{L,1}⟩ - n̄_L)|`.
    pub right_bath: f64,
    /// Spread `max_j - min_j` of the total (two-leg) bond current.
    pub bond_spread: f64,
}

impl ContinuityReport {
    pub fn max(&self) -> f64 {
        self.sites.max(self.left_bath).max(self.right_bath).max(self.bond_spread)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableReport {
    pub schema: String,
    pub engine_version: String,
    pub spec: LadderSpec,
    pub drive: DriveSpec,
    /// `densities[j-1] = [⟨n_{j,1}⟩, ⟨n_{j,2}⟩]`.
    pub densities: Vec<[f64; 2]>,
    /// `leg_currents[j-1] = [J^L_{j,1}, J^L_{j,2}]` for bonds `j = 1..L-1`.
    pub leg_currents: Vec<[f64; 2]>,
    /// `rung_currents[j-1] = J^R_{j,1→2}`.
    pub rung_currents: Vec<f64>,
    pub total_current: f64,
    pub chiral_current: f64,
    /// Bond at which sector currents are reported.
    pub sector_bond: usize,
    /// `J_N = Σ_p tr(J^L_{j*,p} ρ^N)`; sums to the total current.
    pub sector_currents: Vec<f64>,
    /// `J_N / w_N`, `None` for empty sectors.
    pub sector_currents_normalized: Vec<Option<f64>>,
    pub block_weights: Vec<f64>,
    pub continuity: ContinuityReport,
    /// Largest imaginary part met while taking expectation values.
    pub max_imaginary: f64,
    pub solver: Option<SolveDiagnostics>,
}

impl ObservableReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-sector operator tables for one ladder.
pub struct ObservableOperators {
    spec: LadderSpec,
    bases: Vec<SectorBasis>,
    /// `legs[N][j-1][p-1]`.
    legs: Vec<Vec<[SparseSectorOperator; 2]>>,
    /// `rungs[N][j-1]`.
    rungs: Vec<Vec<SparseSectorOperator>>,
}

impl ObservableOperators {
    pub fn new(spec: &LadderSpec) -> Result<Self> {
        spec.validate()?;
        if spec.rungs < 2 {
            return Err(Error::invalid("currents need at least two rungs"));
        }
        let l = spec.rungs;
        let bases = (0..=2 * l)
            .map(|n| SectorBasis::enumerate(l, n))
            .collect::<Result<Vec<_>>>()?;
        let mut legs = Vec::with_capacity(bases.len());
        let mut rungs = Vec::with_capacity(bases.len());
        for b in &bases {
            legs.push(
                (1..l)
                    .map(|j| Ok([build_leg_current(spec, b, j, 1)?, build_leg_current(spec, b, j, 2)?]))
                    .collect::<Result<Vec<_>>>()?,
            );
            rungs.push((1..=l).map(|j| build_rung_current(spec, b, j)).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { spec: spec.clone(), bases, legs, rungs })
    }

    pub fn spec(&self) -> &LadderSpec {
        &self.spec
    }

    fn check(&self, rho: &BlockDensityMatrix) -> Result<()> {
        if rho.rungs() != self.spec.rungs {
            return Err(Error::invalid(format!(
                "state has {} rungs, operators were built for {}",
                rho.rungs(),
                self.spec.rungs
            )));
        }
        Ok(())
    }

    /// `tr(J^L_{bond,leg} ρ^N)`.
    pub fn sector_leg_current(&self, rho: &BlockDensityMatrix, n: usize, bond: usize, leg: usize) -> c64 {
        self.legs[n][bond - 1][leg - 1].expectation(rho.block(n))
    }

    pub fn sector_rung_current(&self, rho: &BlockDensityMatrix, n: usize, rung: usize) -> c64 {
        self.rungs[n][rung - 1].expectation(rho.block(n))
    }

    /// Additive sector current `J_N` through `bond`, summed over legs.
    pub fn sector_current(&self, rho: &BlockDensityMatrix, n: usize, bond: usize) -> Result<f64> {
        self.check(rho)?;
        if bond == 0 || bond >= self.spec.rungs {
            return Err(Error::invalid(format!("bond {bond} outside 1..={}", self.spec.rungs - 1)));
        }
        if n > 2 * self.spec.rungs {
            return Err(Error::invalid(format!("sector {n} does not exist")));
        }
        Ok((self.sector_leg_current(rho, n, bond, 1) + self.sector_leg_current(rho, n, bond, 2)).re)
    }

    /// `J_N` at every bond, `profile[j-1]`.
    pub fn sector_current_profile(&self, rho: &BlockDensityMatrix, n: usize) -> Result<Vec<f64>> {
        (1..self.spec.rungs).map(|j| self.sector_current(rho, n, j)).collect()
    }

    /// Worst spread over bonds of any single `J_N`.
    pub fn sector_bond_spread(&self, rho: &BlockDensityMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for n in 0..=2 * self.spec.rungs {
            let p = self.sector_current_profile(rho, n)?;
            let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            worst = worst.max(hi - lo);
        }
        Ok(worst)
    }

    /// Sector-resolved continuity at undriven sites.
    ///
    /// Hamiltonian flow conserves `N`, but the baths move weight between
    /// sectors while the interior occupation stays put, so per-sector
    /// stationarity carries a source term:
    /// `0 = J^N_in - J^N_out ∓ J^{R,N} + S_N`, with
    /// `S_N = Σ_s 2Γ[(1-n̄_s)(⟨n n_s⟩_{N+1} - ⟨n n_s⟩_N) + n̄_s(⟨n(1-n_s)⟩_{N-1} - ⟨n(1-n_s)⟩_N)]`
    /// and `⟨X⟩_M = tr(X ρ^M)`. Returns the worst residual.
    pub fn sector_continuity_residual(&self, rho: &BlockDensityMatrix, drive: &DriveSpec) -> Result<f64> {
        self.check(rho)?;
        let l = self.spec.rungs;
        let driven = drive.driven_sites(l);
        let top = 2 * l;
        let mut worst: f64 = 0.0;
        for j in 1..=l {
            for p in 1..=2 {
                let site = SiteIndex::new(j, p)?.flat();
                if driven.iter().any(|&(s, _)| s == site) {
                    continue;
                }
                for n in 0..=top {
                    let inflow = if j > 1 { self.sector_leg_current(rho, n, j - 1, p).re } else { 0.0 };
                    let outflow = if j < l { self.sector_leg_current(rho, n, j, p).re } else { 0.0 };
                    let rung = self.sector_rung_current(rho, n, j).re;
                    let rung_term = if p == 1 { -rung } else { rung };
                    let mut source = 0.0;
                    for &(s, nbar) in &driven {
                        let both = |m: usize| self.diag_expect(rho, m, |w| w >> site & 1 == 1 && w >> s & 1 == 1);
                        let only = |m: usize| self.diag_expect(rho, m, |w| w >> site & 1 == 1 && w >> s & 1 == 0);
                        let up = if n < top { both(n + 1) } else { 0.0 };
                        let down = if n > 0 { only(n - 1) } else { 0.0 };
                        source += 2.0 * drive.gamma * ((1.0 - nbar) * (up - both(n)) + nbar * (down - only(n)));
                    }
                    worst = worst.max((inflow - outflow + rung_term + source).abs());
                }
            }
        }
        Ok(worst)
    }

    fn diag_expect(&self, rho: &BlockDensityMatrix, m: usize, pred: impl Fn(u64) -> bool) -> f64 {
        let b = rho.block(m);
        self.bases[m]
            .states()
            .iter()
            .enumerate()
            .filter(|(_, s)| pred(s.bits()))
            .map(|(i, _)| b[(i, i)].re)
            .sum()
    }

    /// Full observable report; fails with a consistency error if the total
    /// current is not uniform across bonds within `10·tolerance`.
    pub fn report(&self, rho: &BlockDensityMatrix, drive: &DriveSpec, tolerance: f64) -> Result<ObservableReport> {
        let report = self.report_unchecked(rho, drive)?;
        if report.continuity.bond_spread > 10.0 * tolerance {
            return Err(Error::consistency(format!(
                "total current varies by {:.3e} across bonds (limit {:.1e}); state is not stationary",
                report.continuity.bond_spread,
                10.0 * tolerance
            )));
        }
        Ok(report)
    }

    /// As [`Self::report`] without the uniformity assertion.
    pub fn report_unchecked(&self, rho: &BlockDensityMatrix, drive: &DriveSpec) -> Result<ObservableReport> {
        self.check(rho)?;
        drive.validate()?;
        let l = self.spec.rungs;
        let top = 2 * l;
        let mut max_imag: f64 = 0.0;
        let mut real = |z: c64| {
            max_imag = max_imag.max(z.im.abs());
            z.re
        };

        let mut densities = vec![[0.0; 2]; l];
        for (j, row) in densities.iter_mut().enumerate() {
            for p in 0..2 {
                let site = SiteIndex::new(j + 1, p + 1)?;
                let mut acc = c64::new(0.0, 0.0);
                for (n, b) in self.bases.iter().enumerate() {
                    acc += build_density(b, site)?.expectation(rho.block(n));
                }
                row[p] = real(acc);
            }
        }

        let mut leg_currents = vec![[0.0; 2]; l - 1];
        for (j, row) in leg_currents.iter_mut().enumerate() {
            for p in 0..2 {
                let acc: c64 = (0..=top).map(|n| self.sector_leg_current(rho, n, j + 1, p + 1)).sum();
                row[p] = real(acc);
            }
        }
        let rung_currents: Vec<f64> = (1..=l)
            .map(|j| real((0..=top).map(|n| self.sector_rung_current(rho, n, j)).sum()))
            .collect();

        let bond_totals: Vec<f64> = leg_currents.iter().map(|c| c[0] + c[1]).collect();
        let total_current = bond_totals.iter().sum::<f64>() / bond_totals.len() as f64;
        let chiral_current = leg_currents.iter().map(|c| c[0] - c[1]).sum::<f64>() / leg_currents.len() as f64;

        let sector_bond = default_sector_bond(l);
        let mut sector_currents = Vec::with_capacity(top + 1);
        for n in 0..=top {
            let z = self.sector_leg_current(rho, n, sector_bond, 1) + self.sector_leg_current(rho, n, sector_bond, 2);
            sector_currents.push(real(z));
        }
        let block_weights = rho.block_weights();
        let sector_currents_normalized = sector_currents
            .iter()
            .zip(&block_weights)
            .map(|(&c, &w)| if w.abs() > 1e-300 { Some(c / w) } else { None })
            .collect();

        let continuity = continuity_from(&densities, &leg_currents, &rung_currents, total_current, drive);

        Ok(ObservableReport {
            schema: REPORT_SCHEMA.to_string(),
            engine_version: ENGINE_VERSION.to_string(),
            spec: self.spec.clone(),
            drive: drive.clone(),
            densities,
            leg_currents,
            rung_currents,
            total_current,
            chiral_current,
            sector_bond,
            sector_currents,
            sector_currents_normalized,
            block_weights,
            continuity,
            max_imaginary: max_imag,
            solver: None,
        })
    }
}

/// Centre bond `⌊L/2⌋`, farthest from both baths.
pub fn default_sector_bond(rungs: usize) -> usize {
    (rungs / 2).max(1)
}

fn continuity_from(
    densities: &[[f64; 2]],
    legs: &[[f64; 2]],
    rungs: &[f64],
    total: f64,
    drive: &DriveSpec,
) -> ContinuityReport {
    let l = densities.len();
    let leg = |j: usize, p: usize| if j == 0 || j == l { 0.0 } else { legs[j - 1][p] };
    let mut sites: f64 = 0.0;
    for j in 1..=l {
        for p in 0..2 {
            if p == 0 && (j == 1 || j == l) {
                continue;
            }
            let rung = if p == 0 { -rungs[j - 1] } else { rungs[j - 1] };
            sites = sites.max((leg(j - 1, p) - leg(j, p) + rung).abs());
        }
    }
    let totals: Vec<f64> = legs.iter().map(|c| c[0] + c[1]).collect();
    let (lo, hi) = totals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    ContinuityReport {
        sites,
        left_bath: (total - 2.0 * drive.gamma * (drive.nbar_left - densities[0][0])).abs(),
        right_bath: (total - 2.0 * drive.gamma * (densities[l - 1][0] - drive.nbar_right)).abs(),
        bond_spread: if totals.is_empty() { 0.0 } else { hi - lo },
    }
}

/// One-shot report.
pub fn report(
    rho: &BlockDensityMatrix,
    spec: &LadderSpec,
    drive: &DriveSpec,
    tolerance: f64,
) -> Result<ObservableReport> {
    ObservableOperators::new(spec)?.report(rho, drive, tolerance)
}

/// Additive sector current `J_N` through `bond`.
pub fn sector_current(rho: &BlockDensityMatrix, spec: &LadderSpec, n: usize, bond: usize) -> Result<f64> {
    ObservableOperators::new(spec)?.sector_current(rho, n, bond)
}

/// Continuity residuals; errors if any exceeds `10·tolerance`.
pub fn continuity_check(
    rho: &BlockDensityMatrix,
    spec: &LadderSpec,
    drive: &DriveSpec,
    tolerance: f64,
) -> Result<ContinuityReport> {
    let r = ObservableOperators::new(spec)?.report_unchecked(rho, drive)?.continuity;
    if r.max() > 10.0 * tolerance {
        return Err(Error::consistency(format!(
            "continuity violated by {:.3e} (limit {:.1e})",
            r.max(),
            10.0 * tolerance
        )));
    }
    Ok(r)
}

/// `T = (max J - min J) / ((max J + min J) / 2)` over the sampled `(φ, J)` grid.
pub fn controllability(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("controllability needs at least two samples"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, j)| (a.min(j), b.max(j)));
    let mean = (hi + lo) / 2.0;
    if (hi + lo).abs() <= 1e-14 {
        return Err(Error::invalid("controllability undefined: max + min of the current vanishes"));
    }
    Ok((hi - lo) / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controllability_arithmetic() {
        assert_eq!(controllability(&[(0.0, 1.0), (1.0, 3.0)]).unwrap(), 1.0);
        assert_eq!(controllability(&[(0.0, 0.4), (1.0, 0.4), (2.0, 0.4)]).unwrap(), 0.0);
        assert!(controllability(&[(0.0, 1.0)]).is_err());
        assert!(controllability(&[(0.0, -1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn equilibrium_report() {
        let spec = LadderSpec::new(3, 1.0, 1.0, 0.9).unwrap();
        let drive = DriveSpec::new(1.0, 0.3, 0.3).unwrap();
        let rho = BlockDensityMatrix::product_state(3, 0.3);
        let r = report(&rho, &spec, &drive, 1e-10).unwrap();
        assert!(r.total_current.abs() < 1e-14);
        assert!(r.densities.iter().flatten().all(|n| (n - 0.3).abs() < 1e-14));
        assert!(r.continuity.max() < 1e-14);
        assert_eq!(r.sector_currents[0], 0.0);
        assert_eq!(r.sector_bond, 1);
        let json = r.to_json().unwrap();
        let back: ObservableReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn single_rung_rejected() {
        let spec = LadderSpec::new(1, 1.0, 1.0, 0.0).unwrap();
        assert!(ObservableOperators::new(&spec).is_err());
    }
}
