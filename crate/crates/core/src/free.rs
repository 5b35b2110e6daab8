//! Non-interacting bosons on the same ladder with the same baths.
//!
//! For a quadratic Lindbladian the one-body correlations `C_kl = ⟨a†_k a_l⟩`
//! obey `dC/dt = W C + C W† + M` with drift `W = i hᵀ - Λ` and noise
//! `M = diag(2Γ n̄_s)`, where `Λ_ss = Γ(1 - 2n̄_s)` on the driven sites.
//! The baths reuse the hardcore jump operators, so an isolated driven site
//! settles at `n̄/(1 - 2n̄)` and a stationary state needs `n̄ < 1/2`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DriveSpec, LadderSpec};

#[derive(Clone, Debug)]
pub struct DriftNoisePair {
    pub drift: Mat<c64>,
    pub noise: Mat<c64>,
}

/// Steady one-body correlations, `C_kl = ⟨a†_k a_l⟩` over flat site indices.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix {
    pub rungs: usize,
    pub c: Mat<c64>,
}

impl CorrelationMatrix {
    pub fn density(&self, site: usize) -> f64 {
        self.c[(site, site)].re
    }

    pub fn hermiticity_error(&self) -> f64 {
        crate::liouvillian::hermiticity_error(self.c.as_ref())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let ev = self
            .c
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        Ok(ev.first().copied().unwrap_or(0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeCurrents {
    pub leg_currents: Vec<[f64; 2]>,
    pub rung_currents: Vec<f64>,
    pub total_current: f64,
    pub chiral_current: f64,
    /// `max_j - min_j` of the two-leg bond current.
    pub bond_spread: f64,
}

pub fn build_drift_noise(spec: &LadderSpec, drive: &DriveSpec) -> Result<DriftNoisePair> {
    spec.validate()?;
    drive.validate()?;
    let h = spec.one_particle_matrix();
    let n = h.nrows();
    let mut drift = Mat::from_fn(n, n, |k, l| c64::new(0.0, 1.0) * h[(l, k)]);
    let mut noise = Mat::<c64>::zeros(n, n);
    for (site, nbar) in drive.driven_sites(spec.rungs) {
        drift[(site, site)] -= c64::new(drive.gamma * (1.0 - 2.0 * nbar), 0.0);
        noise[(site, site)] += c64::new(2.0 * drive.gamma * nbar, 0.0);
    }
    let eig = drift.eigenvalues().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let worst = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if worst >= -1e-12 {
        return Err(Error::Instability(format!(
            "drift has an eigenvalue with real part {worst:.3e}: either a bath has n̄ >= 1/2 or a \
             one-particle mode has no weight on the driven sites"
        )));
    }
    Ok(DriftNoisePair { drift, noise })
}

/// `||W C + C W† + M||_F`.
pub fn lyapunov_residual(w: MatRef<'_, c64>, c: MatRef<'_, c64>, m: MatRef<'_, c64>) -> f64 {
    let r = w * c + c * w.adjoint() + m;
    r.norm_l2()
}

/// Solves `W C + C W† + M = 0` for Hurwitz `W` and Hermitian `M`.
///
/// In the eigenbasis `W = V E V⁻¹` the equation decouples,
/// `(V⁻¹ C V⁻†)_ij = -(V⁻¹ M V⁻†)_ij / (e_i + ē_j)`. A few rounds of
/// refinement on the residual remove the error from a poorly conditioned
/// `V`; the result is accepted only if `||residual||_F <= 1e-10 ||M||_F`.
pub fn solve_lyapunov(w: MatRef<'_, c64>, m: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let n = w.nrows();
    if w.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::invalid("Lyapunov operands must be square and of equal size"));
    }
    let m_norm = m.norm_l2();
    if m_norm == 0.0 {
        return Ok(Mat::zeros(n, n));
    }
    let eig = w.eigen().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let e: Vec<c64> = eig.S().column_vector().iter().copied().collect();
    if let Some(z) = e.iter().find(|z| z.re >= -1e-12) {
        return Err(Error::Instability(format!("drift eigenvalue {z} is not in the open left half-plane")));
    }
    let v = eig.U().to_owned();
    let v_inv = v.partial_piv_lu().inverse();
    let solve = |rhs: MatRef<'_, c64>| -> Mat<c64> {
        let mut y = &v_inv * rhs * v_inv.adjoint();
        for j in 0..n {
            for i in 0..n {
                y[(i, j)] = -y[(i, j)] / (e[i] + e[j].conj());
            }
        }
        &v * &y * v.adjoint()
    };

    let mut c = solve(m);
    let mut res = lyapunov_residual(w, c.as_ref(), m);
    for _ in 0..5 {
        if res <= 1e-13 * m_norm {
            break;
        }
        let r = w * &c + &c * w.adjoint() + m;
        let next = &c + solve(r.as_ref());
        let next_res = lyapunov_residual(w, next.as_ref(), m);
        if next_res >= res {
            break;
        }
        c = next;
        res = next_res;
    }
    c = crate::liouvillian::hermitian_part(c.as_ref());
    let res = lyapunov_residual(w, c.as_ref(), m);
    if res > 1e-10 * m_norm {
        return Err(Error::LinearAlgebra(format!(
            "Lyapunov residual {res:.3e} exceeds 1e-10·||M||_F = {:.3e}",
            1e-10 * m_norm
        )));
    }
    Ok(c)
}

pub fn steady_correlations(spec: &LadderSpec, drive: &DriveSpec) -> Result<CorrelationMatrix> {
    let pair = build_drift_noise(spec, drive)?;
    let c = solve_lyapunov(pair.drift.as_ref(), pair.noise.as_ref())?;
    Ok(CorrelationMatrix { rungs: spec.rungs, c })
}

/// Bond and rung currents with the same conventions as the hardcore engine.
pub fn free_currents(corr: &CorrelationMatrix, spec: &LadderSpec) -> Result<FreeCurrents> {
    let l = spec.rungs;
    if corr.rungs != l || corr.c.nrows() != 2 * l {
        return Err(Error::invalid("correlation matrix does not match the ladder"));
    }
    if l < 2 {
        return Err(Error::invalid("currents need at least two rungs"));
    }
    let c = &corr.c;
    let site = |j: usize, p: usize| 2 * (j - 1) + (p - 1);
    let leg_currents: Vec<[f64; 2]> = (1..l)
        .map(|j| {
            let mut row = [0.0; 2];
            for p in 1..=2 {
                let z = c64::cis(spec.leg_phase(p)) * c[(site(j, p), site(j + 1, p))];
                row[p - 1] = 2.0 * spec.leg_hopping * z.im;
            }
            row
        })
        .collect();
    let rung_currents: Vec<f64> =
        (1..=l).map(|j| 2.0 * spec.rung_hopping * c[(site(j, 1), site(j, 2))].im).collect();
    let totals: Vec<f64> = leg_currents.iter().map(|r| r[0] + r[1]).collect();
    let (lo, hi) = totals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(FreeCurrents {
        total_current: totals.iter().sum::<f64>() / totals.len() as f64,
        chiral_current: leg_currents.iter().map(|r| r[0] - r[1]).sum::<f64>() / leg_currents.len() as f64,
        bond_spread: hi - lo,
        leg_currents,
        rung_currents,
    })
}

/// Grid point with the largest `|dJ/dφ|`, from centred differences at the
/// interior points; `(φ, |slope|)`.
pub fn steepest_slope(phis: &[f64], currents: &[f64]) -> Option<(f64, f64)> {
    if phis.len() != currents.len() || phis.len() < 3 {
        return None;
    }
    (1..phis.len() - 1)
        .map(|k| (phis[k], ((currents[k + 1] - currents[k - 1]) / (phis[k + 1] - phis[k - 1])).abs()))
        .filter(|(_, s)| s.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
}
