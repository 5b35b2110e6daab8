//! Truncated bosonic Fock-space reference for the free-boson module.
//!
//! Soft-core bosons on the ladder with the same baths (loss `√(2Γ(1-n̄)) a`,
//! gain `√(2Γn̄) a†`), restricted to at most `max_particles` bosons. The
//! gain is projected onto the truncated space, so the generator stays
//! trace preserving; the truncation error falls off with the occupation of
//! the top sector. The steady state is number diagonal and is found by a
//! dense solve over the packed Hermitian blocks, so keep the space small
//! (`Σ_N d_N² <= 10⁴` or so).

use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::model::{DriveSpec, LadderSpec};

/// Largest `Σ_N d_N²` accepted for the dense solve.
pub const MAX_FOCK_UNKNOWNS: usize = 12_000;

struct Sector {
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

pub struct FockReference {
    sites: usize,
    sectors: Vec<Sector>,
    hamiltonian: Vec<Mat<c64>>,
    /// `(rate, lowering[N]: N -> N-1)` per loss channel.
    losses: Vec<(f64, Vec<Mat<c64>>)>,
    /// `(rate, raising[N]: N -> N+1)` per gain channel, zero out of the top sector.
    gains: Vec<(f64, Vec<Mat<c64>>)>,
}

fn compositions(sites: usize, n: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, left: usize, sites: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == sites {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k as u8);
            rec(prefix, left - k, sites, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(sites), n, sites, &mut out);
    out
}

impl FockReference {
    pub fn new(spec: &LadderSpec, drive: &DriveSpec, max_particles: usize) -> Result<Self> {
        spec.validate()?;
        drive.validate()?;
        let sites = 2 * spec.rungs;
        let sectors: Vec<Sector> = (0..=max_particles)
            .map(|n| {
                let states = compositions(sites, n);
                let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                Sector { states, index }
            })
            .collect();
        let unknowns: usize = sectors.iter().map(|s| s.states.len().pow(2)).sum();
        if unknowns > MAX_FOCK_UNKNOWNS {
            return Err(Error::capacity(format!(
                "truncated Fock space has {unknowns} block entries, limit {MAX_FOCK_UNKNOWNS}"
            )));
        }

        // -J e^{iΦ_p} a†_{j,p} a_{j+1,p} - K a†_{j,1} a_{j,2} + h.c.
        let site = |j: usize, p: usize| 2 * (j - 1) + (p - 1);
        let mut terms: Vec<(usize, usize, c64)> = Vec::new();
        for j in 1..spec.rungs {
            for p in 1..=2 {
                let t = -spec.leg_hopping * c64::cis(spec.leg_phase(p));
                terms.push((site(j, p), site(j + 1, p), t));
                terms.push((site(j + 1, p), site(j, p), t.conj()));
            }
        }
        for j in 1..=spec.rungs {
            let t = c64::new(-spec.rung_hopping, 0.0);
            terms.push((site(j, 1), site(j, 2), t));
            terms.push((site(j, 2), site(j, 1), t));
        }
        let hamiltonian = sectors
            .iter()
            .map(|sec| {
                let d = sec.states.len();
                let mut h = Mat::<c64>::zeros(d, d);
                for (col, s) in sec.states.iter().enumerate() {
                    for &(k, l, t) in &terms {
                        if s[l] == 0 {
                            continue;
                        }
                        let mut m = s.clone();
                        let amp = (m[l] as f64).sqrt();
                        m[l] -= 1;
                        let amp = amp * (m[k] as f64 + 1.0).sqrt();
                        m[k] += 1;
                        h[(sec.index[&m], col)] += t * amp;
                    }
                }
                h
            })
            .collect();

        let mut losses = Vec::new();
        let mut gains = Vec::new();
        let driven = [(site(1, 1), drive.nbar_left), (site(spec.rungs, 1), drive.nbar_right)];
        for &(s, nbar) in &driven {
            let lower: Vec<Mat<c64>> = (0..sectors.len())
                .map(|n| {
                    if n == 0 {
                        return Mat::zeros(0, sectors[0].states.len());
                    }
                    let (from, to) = (&sectors[n], &sectors[n - 1]);
                    let mut a = Mat::<c64>::zeros(to.states.len(), from.states.len());
                    for (col, st) in from.states.iter().enumerate() {
                        if st[s] > 0 {
                            let mut m = st.clone();
                            m[s] -= 1;
                            a[(to.index[&m], col)] = c64::new((st[s] as f64).sqrt(), 0.0);
                        }
                    }
                    a
                })
                .collect();
            let raise: Vec<Mat<c64>> = (0..sectors.len())
                .map(|n| {
                    let d = sectors[n].states.len();
                    if n + 1 == sectors.len() {
                        return Mat::zeros(0, d);
                    }
                    let to = &sectors[n + 1];
                    let mut a = Mat::<c64>::zeros(to.states.len(), d);
                    for (col, st) in sectors[n].states.iter().enumerate() {
                        let mut m = st.clone();
                        m[s] += 1;
                        a[(to.index[&m], col)] = c64::new((st[s] as f64 + 1.0).sqrt(), 0.0);
                    }
                    a
                })
                .collect();
            losses.push((2.0 * drive.gamma * (1.0 - nbar), lower));
            gains.push((2.0 * drive.gamma * nbar, raise));
        }
        Ok(Self { sites, sectors, hamiltonian, losses, gains })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sectors.iter().map(|s| s.states.len()).collect()
    }

    /// `L(ρ)` on number-diagonal blocks.
    pub fn apply(&self, rho: &[Mat<c64>]) -> Vec<Mat<c64>> {
        let top = self.sectors.len() - 1;
        let i = c64::new(0.0, 1.0);
        let mut out: Vec<Mat<c64>> = rho
            .iter()
            .zip(&self.hamiltonian)
            .map(|(r, h)| {
                let comm = h * r - r * h;
                Mat::from_fn(r.nrows(), r.ncols(), |a, b| -i * comm[(a, b)])
            })
            .collect();
        let mut channel = |rate: f64, ops: &[Mat<c64>], step_up: bool| {
            for n in 0..=top {
                let a = &ops[n];
                if a.nrows() == 0 {
                    continue;
                }
                // rate (A ρ_n A† - ½{A†A, ρ_n}); A maps sector n to n±1.
                let target = if step_up { n + 1 } else { n - 1 };
                let jump = a * &rho[n] * a.adjoint();
                let ata = a.adjoint() * a;
                let anti = &ata * &rho[n] + &rho[n] * &ata;
                for (x, y) in out[target].col_iter_mut().zip(jump.col_iter()) {
                    for (u, v) in x.iter_mut().zip(y.iter()) {
                        *u += *v * rate;
                    }
                }
                for (x, y) in out[n].col_iter_mut().zip(anti.col_iter()) {
                    for (u, v) in x.iter_mut().zip(y.iter()) {
                        *u -= *v * (0.5 * rate);
                    }
                }
            }
        };
        for (rate, ops) in &self.losses {
            channel(*rate, ops, false);
        }
        for (rate, ops) in &self.gains {
            channel(*rate, ops, true);
        }
        out
    }

    /// Packed real coordinates: per block the diagonal, then `Re` and `Im`
    /// of the strict upper triangle.
    fn coords(&self) -> Vec<(usize, usize, usize, u8)> {
        let mut c = Vec::new();
        for (n, d) in self.dims().into_iter().enumerate() {
            for a in 0..d {
                c.push((n, a, a, 0));
            }
            for b in 0..d {
                for a in 0..b {
                    c.push((n, a, b, 1));
                    c.push((n, a, b, 2));
                }
            }
        }
        c
    }

    /// Steady-state blocks with unit trace.
    pub fn steady_state(&self) -> Result<Vec<Mat<c64>>> {
        let dims = self.dims();
        let coords = self.coords();
        let m = coords.len();
        let unit = |(n, a, b, kind): (usize, usize, usize, u8)| -> Vec<Mat<c64>> {
            let mut e: Vec<Mat<c64>> = dims.iter().map(|&d| Mat::zeros(d, d)).collect();
            match kind {
                0 => e[n][(a, a)] = c64::new(1.0, 0.0),
                1 => {
                    e[n][(a, b)] = c64::new(1.0, 0.0);
                    e[n][(b, a)] = c64::new(1.0, 0.0);
                }
                _ => {
                    e[n][(a, b)] = c64::new(0.0, 1.0);
                    e[n][(b, a)] = c64::new(0.0, -1.0);
                }
            }
            e
        };
        let mut g = Mat::<f64>::zeros(m, m);
        for (col, &c) in coords.iter().enumerate() {
            let out = self.apply(&unit(c));
            for (row, &(n, a, b, kind)) in coords.iter().enumerate() {
                g[(row, col)] = match kind {
                    0 => out[n][(a, a)].re,
                    1 => out[n][(a, b)].re,
                    _ => out[n][(a, b)].im,
                };
            }
        }
        // Replace the vacuum row by the trace.
        for (col, &(_, a, b, kind)) in coords.iter().enumerate() {
            g[(0, col)] = if kind == 0 && a == b { 1.0 } else { 0.0 };
        }
        let mut rhs = Mat::<f64>::zeros(m, 1);
        rhs[(0, 0)] = 1.0;
        let x = g.partial_piv_lu().solve(&rhs);
        if x.col_as_slice(0).iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearAlgebra("truncated Fock generator is singular".into()));
        }
        let mut rho: Vec<Mat<c64>> = dims.iter().map(|&d| Mat::zeros(d, d)).collect();
        for (k, &(n, a, b, kind)) in coords.iter().enumerate() {
            let v = x[(k, 0)];
            match kind {
                0 => rho[n][(a, a)] = c64::new(v, 0.0),
                1 => {
                    rho[n][(a, b)].re += v;
                    rho[n][(b, a)].re += v;
                }
                _ => {
                    rho[n][(a, b)].im += v;
                    rho[n][(b, a)].im -= v;
                }
            }
        }
        Ok(rho)
    }

    /// `C_kl = ⟨a†_k a_l⟩` in a block state.
    pub fn correlations(&self, rho: &[Mat<c64>]) -> Mat<c64> {
        let mut c = Mat::<c64>::zeros(self.sites, self.sites);
        for (sec, r) in self.sectors.iter().zip(rho) {
            for (col, s) in sec.states.iter().enumerate() {
                for l in 0..self.sites {
                    if s[l] == 0 {
                        continue;
                    }
                    for k in 0..self.sites {
                        let mut m = s.clone();
                        let amp = (m[l] as f64).sqrt();
                        m[l] -= 1;
                        let amp = amp * (m[k] as f64 + 1.0).sqrt();
                        m[k] += 1;
                        // a†_k a_l |s⟩ = amp |m⟩, so tr(O ρ) picks ρ[s, m].
                        c[(k, l)] += r[(col, sec.index[&m])] * amp;
                    }
                }
            }
        }
        c
    }

    /// Weight of the top sector, a proxy for the truncation error.
    pub fn top_weight(rho: &[Mat<c64>]) -> f64 {
        rho.last().map_or(0.0, |r| (0..r.nrows()).map(|i| r[(i, i)].re).sum())
    }
}

/// Steady correlations of the truncated soft-core model.
pub fn fock_steady_correlations(spec: &LadderSpec, drive: &DriveSpec, max_particles: usize) -> Result<Mat<c64>> {
    let f = FockReference::new(spec, drive, max_particles)?;
    Ok(f.correlations(&f.steady_state()?))
}
