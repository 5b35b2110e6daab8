//! Lindblad generator restricted to number-diagonal density matrices.
//!
//! A state is stored as one dense block `ρ^N` per particle number. The
//! generator
//!
//! ```text
//! L(ρ) = -i[H, ρ] + Σ_s Γ[(1-n̄_s)(2 a_s ρ a_s† - {n_s, ρ}) + n̄_s(2 a_s† ρ a_s - {1-n_s, ρ})]
//! ```
//!
//! with `s` running over the two driven sites `(1,1)` and `(L,1)` maps block
//! `N` into blocks `N-1`, `N`, `N+1` only. Anticommutator terms collapse into
//! a diagonal damping `Λ_N`; jump terms are pure index gathers because the
//! bosonic ladder operators carry no signs.

use faer::{c64, Mat, MatRef, Side};
use rayon::prelude::*;

use crate::basis::{binomial, raise_lower, Direction, SectorBasis};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, DriveSpec, LadderSpec, SparseSectorOperator};

/// Steady-state ansatz: one Hermitian block per particle number `N = 0..=2L`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDensityMatrix {
    rungs: usize,
    blocks: Vec<Mat<c64>>,
}

pub fn sector_dims(rungs: usize) -> Vec<usize> {
    (0..=2 * rungs).map(|n| binomial(2 * rungs, n) as usize).collect()
}

impl BlockDensityMatrix {
    pub fn zeros(rungs: usize) -> Self {
        let blocks = sector_dims(rungs).into_iter().map(|d| Mat::zeros(d, d)).collect();
        Self { rungs, blocks }
    }

    pub fn from_blocks(rungs: usize, blocks: Vec<Mat<c64>>) -> Result<Self> {
        let dims = sector_dims(rungs);
        if blocks.len() != dims.len() {
            return Err(Error::invalid(format!("expected {} blocks, got {}", dims.len(), blocks.len())));
        }
        for (n, (b, &d)) in blocks.iter().zip(&dims).enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::invalid(format!(
                    "block {n} is {}x{}, sector dimension is {d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { rungs, blocks })
    }

    /// Empty ladder.
    pub fn vacuum(rungs: usize) -> Self {
        let mut rho = Self::zeros(rungs);
        rho.blocks[0][(0, 0)] = c64::new(1.0, 0.0);
        rho
    }

    /// Every site occupied.
    pub fn filled(rungs: usize) -> Self {
        let mut rho = Self::zeros(rungs);
        rho.blocks[2 * rungs][(0, 0)] = c64::new(1.0, 0.0);
        rho
    }

    /// Product of identical Bernoulli(`nbar`) sites; a function of `N` only.
    pub fn product_state(rungs: usize, nbar: f64) -> Self {
        let sites = 2 * rungs;
        let blocks = sector_dims(rungs)
            .into_iter()
            .enumerate()
            .map(|(n, d)| {
                let w = nbar.powi(n as i32) * (1.0 - nbar).powi((sites - n) as i32);
                Mat::from_fn(d, d, |i, j| if i == j { c64::new(w, 0.0) } else { c64::new(0.0, 0.0) })
            })
            .collect();
        Self { rungs, blocks }
    }

    pub fn rungs(&self) -> usize {
        self.rungs
    }

    pub fn blocks(&self) -> &[Mat<c64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Mat<c64>] {
        &mut self.blocks
    }

    pub fn block(&self, n: usize) -> MatRef<'_, c64> {
        self.blocks[n].as_ref()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    /// Number of complex entries across all blocks, `Σ_N d_N²`.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows() * b.nrows()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trace_complex(&self) -> c64 {
        self.blocks.iter().map(block_trace).sum()
    }

    pub fn trace(&self) -> f64 {
        self.trace_complex().re
    }

    /// `w_N = tr ρ^N`.
    pub fn block_weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| block_trace(b).re).collect()
    }

    /// Replaces every block by its Hermitian part.
    pub fn hermitize(&mut self) {
        for b in &mut self.blocks {
            let d = b.nrows();
            for j in 0..d {
                b[(j, j)].im = 0.0;
                for i in 0..j {
                    let avg = (b[(i, j)] + b[(j, i)].conj()) * 0.5;
                    b[(i, j)] = avg;
                    b[(j, i)] = avg.conj();
                }
            }
        }
    }

    /// Rescales to unit trace.
    pub fn normalize(&mut self) -> Result<()> {
        let t = self.trace();
        if !(t.abs() > f64::MIN_POSITIVE) || !t.is_finite() {
            return Err(Error::consistency(format!("cannot normalize a state with trace {t}")));
        }
        self.scale(1.0 / t);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in &mut self.blocks {
            for j in 0..b.ncols() {
                for x in b.col_as_slice_mut(j) {
                    *x *= alpha;
                }
            }
        }
    }

    /// `self += alpha · other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.rungs, other.rungs);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for j in 0..a.ncols() {
                for (x, y) in a.col_as_slice_mut(j).iter_mut().zip(b.col_as_slice(j)) {
                    *x += *y * alpha;
                }
            }
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut d = self.clone();
        d.add_scaled(-1.0, other);
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_l2().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_max()).fold(0.0, f64::max)
    }

    /// Upper bound `Σ_N sqrt(d_N) ||X^N||_F` on the trace norm.
    pub fn trace_norm_bound(&self) -> f64 {
        self.blocks.iter().map(|b| (b.nrows() as f64).sqrt() * b.norm_l2()).sum()
    }

    /// Sum over blocks of the Schatten-1 norm.
    pub fn trace_norm(&self) -> Result<f64> {
        self.blocks.iter().map(|b| block_trace_norm(b.as_ref())).sum()
    }

    /// `max_N max_ij |X_ij - conj(X_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        self.blocks.iter().map(|b| hermiticity_error(b.as_ref())).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian parts of all blocks.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for b in &self.blocks {
            if b.nrows() == 0 {
                continue;
            }
            let h = hermitian_part(b.as_ref());
            let ev = h
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            min = min.min(ev[0]);
        }
        Ok(min)
    }

    /// Expectation of a per-sector operator family, `Σ_N tr(O_N ρ^N)`.
    pub fn expectation<'a>(&self, ops: impl IntoIterator<Item = &'a SparseSectorOperator>) -> c64 {
        ops.into_iter().map(|op| op.expectation(self.blocks[op.sector()].as_ref())).sum()
    }
}

fn block_trace(b: &Mat<c64>) -> c64 {
    (0..b.nrows()).map(|i| b[(i, i)]).sum()
}

pub(crate) fn hermitian_part(b: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(b.nrows(), b.ncols(), |i, j| (b[(i, j)] + b[(j, i)].conj()) * 0.5)
}

pub(crate) fn hermiticity_error(b: MatRef<'_, c64>) -> f64 {
    let d = b.nrows();
    let mut err: f64 = 0.0;
    for j in 0..d {
        for i in 0..=j {
            err = err.max((b[(i, j)] - b[(j, i)].conj()).norm());
        }
    }
    err
}

/// Schatten-1 norm of one block: eigenvalues when Hermitian, singular values otherwise.
pub(crate) fn block_trace_norm(b: MatRef<'_, c64>) -> Result<f64> {
    if b.nrows() == 0 {
        return Ok(0.0);
    }
    let scale = b.norm_max();
    if scale == 0.0 {
        return Ok(0.0);
    }
    if hermiticity_error(b) <= 1e-14 * scale {
        let ev = hermitian_part(b)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        Ok(ev.iter().map(|x| x.abs()).sum())
    } else {
        let sv = b.singular_values().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        Ok(sv.iter().sum())
    }
}

/// One bath: `a_s` at rate `loss`, `a_s†` at rate `gain` (both include the factor 2Γ).
#[derive(Clone, Debug)]
pub(crate) struct JumpChannel {
    pub loss: f64,
    pub gain: f64,
    /// For each `N < 2L`: pairs `(i, i')` with state `i` of sector `N` empty at
    /// `site` and `i'` its image under `a_s†` in sector `N + 1`.
    pub raise_pairs: Vec<Vec<(u32, u32)>>,
}

/// The generator on the block ansatz, ready for repeated application.
#[derive(Clone, Debug)]
pub struct BlockLiouvillian {
    spec: LadderSpec,
    drive: DriveSpec,
    bases: Vec<SectorBasis>,
    hamiltonians: Vec<SparseSectorOperator>,
    damping: Vec<Vec<f64>>,
    channels: Vec<JumpChannel>,
}

impl BlockLiouvillian {
    pub fn new(spec: LadderSpec, drive: DriveSpec) -> Result<Self> {
        spec.validate()?;
        drive.validate()?;
        let sites = spec.sites();
        let bases = (0..=sites)
            .map(|n| SectorBasis::enumerate(spec.rungs, n))
            .collect::<Result<Vec<_>>>()?;
        let hamiltonians = bases
            .iter()
            .map(|b| build_hamiltonian(&spec, b))
            .collect::<Result<Vec<_>>>()?;

        let driven = drive.driven_sites(spec.rungs);
        let damping = bases
            .iter()
            .map(|b| {
                b.states()
                    .iter()
                    .map(|s| {
                        driven
                            .iter()
                            .map(|&(site, nbar)| {
                                if s.occupied(site) {
                                    drive.gamma * (1.0 - nbar)
                                } else {
                                    drive.gamma * nbar
                                }
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();

        let channels = driven
            .iter()
            .map(|&(site, nbar)| {
                let raise_pairs = (0..sites)
                    .map(|n| {
                        let (lo, hi) = (&bases[n], &bases[n + 1]);
                        lo.states()
                            .iter()
                            .enumerate()
                            .filter_map(|(i, &s)| {
                                raise_lower(s, site, Direction::Create)
                                    .map(|t| (i as u32, hi.rank(t).expect("a† adds one particle") as u32))
                            })
                            .collect()
                    })
                    .collect();
                JumpChannel {
                    loss: 2.0 * drive.gamma * (1.0 - nbar),
                    gain: 2.0 * drive.gamma * nbar,
                    raise_pairs,
                }
            })
            .collect();

        Ok(Self { spec, drive, bases, hamiltonians, damping, channels })
    }

    pub fn spec(&self) -> &LadderSpec {
        &self.spec
    }

    pub fn drive(&self) -> &DriveSpec {
        &self.drive
    }

    pub fn rungs(&self) -> usize {
        self.spec.rungs
    }

    pub fn bases(&self) -> &[SectorBasis] {
        &self.bases
    }

    pub fn hamiltonian(&self, n: usize) -> &SparseSectorOperator {
        &self.hamiltonians[n]
    }

    /// Diagonal of `Λ_N = Γ Σ_s [(1-n̄_s) n_s + n̄_s (1-n_s)]`.
    pub fn damping(&self, n: usize) -> &[f64] {
        &self.damping[n]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.dim()).collect()
    }

    /// Real dimension of the Hermitian block space, `Σ_N d_N²`.
    pub fn superoperator_dim(&self) -> usize {
        self.bases.iter().map(|b| b.dim() * b.dim()).sum()
    }

    fn check_shape(&self, rho: &BlockDensityMatrix) -> Result<()> {
        if rho.rungs() != self.spec.rungs {
            return Err(Error::invalid(format!(
                "state has {} rungs, generator has {}",
                rho.rungs(),
                self.spec.rungs
            )));
        }
        Ok(())
    }

    /// `dρ/dt = L(ρ)`.
    pub fn apply(&self, rho: &BlockDensityMatrix) -> Result<BlockDensityMatrix> {
        let mut out = BlockDensityMatrix::zeros(self.spec.rungs);
        self.apply_into(rho, &mut out)?;
        Ok(out)
    }

    /// Writes `L(ρ)` into `out`, overwriting it.
    pub fn apply_into(&self, rho: &BlockDensityMatrix, out: &mut BlockDensityMatrix) -> Result<()> {
        self.check_shape(rho)?;
        self.check_shape(out)?;
        let top = 2 * self.spec.rungs;
        out.blocks.par_iter_mut().enumerate().for_each(|(n, dst)| {
            self.coherent_and_damping(n, rho.block(n), dst);
            if n < top {
                self.add_loss(n, rho.block(n + 1), dst);
            }
            if n > 0 {
                self.add_gain(n - 1, rho.block(n - 1), dst);
            }
        });
        Ok(())
    }

    /// `dst = -i[H_N, X] - {Λ_N, X}`; `H_N` Hermitian so column `j` of `H`
    /// is the conjugate of row `j`.
    fn coherent_and_damping(&self, n: usize, x: MatRef<'_, c64>, dst: &mut Mat<c64>) {
        let h = &self.hamiltonians[n];
        let lam = &self.damping[n];
        let d = x.nrows();
        let minus_i = c64::new(0.0, -1.0);
        for j in 0..d {
            let xj = x.col(j);
            let out = dst.col_as_slice_mut(j);
            for i in 0..d {
                let (cols, vals) = h.row_slices(i);
                let mut hx = c64::new(0.0, 0.0);
                for (&k, &v) in cols.iter().zip(vals) {
                    hx += v * xj[k];
                }
                out[i] = minus_i * hx - x[(i, j)] * (lam[i] + lam[j]);
            }
            // + i (X H)[:, j] = i Σ_k X[:, k] conj(H[j, k])
            let (cols, vals) = h.row_slices(j);
            for (&k, &v) in cols.iter().zip(vals) {
                let coef = c64::new(0.0, 1.0) * v.conj();
                let xk = x.col(k);
                for i in 0..d {
                    out[i] += coef * xk[i];
                }
            }
        }
    }

    /// `dst += Σ_s loss_s · a_s X a_s†` with `X` from sector `n + 1`.
    fn add_loss(&self, n: usize, upper: MatRef<'_, c64>, dst: &mut Mat<c64>) {
        for ch in &self.channels {
            if ch.loss == 0.0 {
                continue;
            }
            let pairs = &ch.raise_pairs[n];
            for &(j, jp) in pairs {
                let src = upper.col(jp as usize);
                let out = dst.col_as_slice_mut(j as usize);
                for &(i, ip) in pairs {
                    out[i as usize] += src[ip as usize] * ch.loss;
                }
            }
        }
    }

    /// `dst += Σ_s gain_s · a_s† X a_s` with `X` from sector `n` (dst is sector `n + 1`).
    fn add_gain(&self, n: usize, lower: MatRef<'_, c64>, dst: &mut Mat<c64>) {
        for ch in &self.channels {
            if ch.gain == 0.0 {
                continue;
            }
            let pairs = &ch.raise_pairs[n];
            for &(j, jp) in pairs {
                let src = lower.col(j as usize);
                let out = dst.col_as_slice_mut(jp as usize);
                for &(i, ip) in pairs {
                    out[ip as usize] += src[i as usize] * ch.gain;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator(l: usize, phi: f64, n1: f64, nl: f64) -> BlockLiouvillian {
        BlockLiouvillian::new(
            LadderSpec::new(l, 1.0, 1.0, phi).unwrap(),
            DriveSpec::new(1.0, n1, nl).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_product_state_is_stationary() {
        let lop = generator(3, 1.1, 0.3, 0.3);
        let rho = BlockDensityMatrix::product_state(3, 0.3);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        let out = lop.apply(&rho).unwrap();
        assert!(out.frobenius_norm() < 1e-12, "{}", out.frobenius_norm());
    }

    #[test]
    fn vacuum_is_stationary_without_gain() {
        let lop = generator(2, 0.4, 0.0, 0.0);
        let out = lop.apply(&BlockDensityMatrix::vacuum(2)).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn equilibrium_weights_are_binomial() {
        let w = BlockDensityMatrix::product_state(4, 0.3).block_weights();
        for (n, wn) in w.iter().enumerate() {
            let expect = binomial(8, n) as f64 * 0.3f64.powi(n as i32) * 0.7f64.powi(8 - n as i32);
            assert!((wn - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn hermitize_fixes_hermitian_input() {
        let mut rho = BlockDensityMatrix::product_state(2, 0.2);
        rho.blocks_mut()[1][(0, 1)] = c64::new(0.01, 0.02);
        rho.blocks_mut()[1][(1, 0)] = c64::new(0.01, -0.02);
        let before = rho.clone();
        rho.hermitize();
        assert_eq!(rho, before);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let lop = generator(2, 0.0, 0.5, 0.0);
        assert!(matches!(lop.apply(&BlockDensityMatrix::zeros(3)), Err(Error::InvalidArgument(_))));
        assert!(BlockDensityMatrix::from_blocks(2, vec![Mat::zeros(1, 1)]).is_err());
    }

    #[test]
    fn trace_norm_of_diagonal() {
        let mut x = BlockDensityMatrix::zeros(1);
        x.blocks_mut()[1][(0, 0)] = c64::new(0.5, 0.0);
        x.blocks_mut()[1][(1, 1)] = c64::new(-0.25, 0.0);
        assert!((x.trace_norm().unwrap() - 0.75).abs() < 1e-15);
        assert!(x.trace_norm_bound() >= 0.75);
    }
}
