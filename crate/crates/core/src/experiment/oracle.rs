//! Block engine against the dense Fock-space Lindbladian.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::full::{
    build_full_liouvillian_dense, full_density, full_expectation, full_leg_current, full_rung_current,
    full_steady_state, number_diagonal_part, number_offdiagonal_max,
};
use crate::liouvillian::BlockLiouvillian;
use crate::model::{DriveSpec, LadderSpec};
use crate::observables::ObservableOperators;
use crate::solver::{solve_steady, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub spec: LadderSpec,
    pub drive: DriveSpec,
    /// `Σ_N ||ρ^N_block - ρ^N_full||₁`.
    pub trace_norm_difference: f64,
    pub max_density_difference: f64,
    /// Leg and rung currents.
    pub max_current_difference: f64,
    /// Largest full-space entry between different particle numbers.
    pub max_number_coherence: f64,
}

impl OracleComparison {
    pub fn discrepancy(&self) -> f64 {
        self.trace_norm_difference.max(self.max_density_difference).max(self.max_current_difference)
    }
}

pub fn cross_check(spec: &LadderSpec, drive: &DriveSpec, cfg: &SolverConfig) -> Result<OracleComparison> {
    let full = full_steady_state(&build_full_liouvillian_dense(spec, drive)?)?;
    let lop = BlockLiouvillian::new(*spec, *drive)?;
    let block = solve_steady(&lop, cfg)?.rho;
    let projected = number_diagonal_part(full.as_ref(), spec.rungs)?;
    let trace_norm_difference = block.difference(&projected).trace_norm()?;

    let ops = ObservableOperators::new(spec)?;
    let report = ops.report_unchecked(&block, drive)?;
    let l = spec.rungs;
    let mut dn: f64 = 0.0;
    for j in 0..l {
        for p in 0..2 {
            let n = full_expectation(full_density(l, 2 * j + p).as_ref(), full.as_ref()).re;
            dn = dn.max((n - report.densities[j][p]).abs());
        }
    }
    let mut dj: f64 = 0.0;
    for j in 1..l {
        for p in 1..=2 {
            let c = full_expectation(full_leg_current(spec, j, p)?.as_ref(), full.as_ref()).re;
            dj = dj.max((c - report.leg_currents[j - 1][p - 1]).abs());
        }
    }
    for j in 1..=l {
        let c = full_expectation(full_rung_current(spec, j)?.as_ref(), full.as_ref()).re;
        dj = dj.max((c - report.rung_currents[j - 1]).abs());
    }
    Ok(OracleComparison {
        spec: *spec,
        drive: *drive,
        trace_norm_difference,
        max_density_difference: dn,
        max_current_difference: dj,
        max_number_coherence: number_offdiagonal_max(full.as_ref()),
    })
}
