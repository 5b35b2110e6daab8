//! Sector-local approximate inverse of the generator.
//!
//! Dropping the sector-changing jump terms leaves, in each block,
//! `L0(X) = -i(H_eff X - X H_eff†)` with `H_eff = H - iΛ`. Diagonalizing
//! `H_eff = V E V⁻¹` turns `L0(X) = R` into an elementwise division,
//! `X = V [(V⁻¹ R V⁻†) ⊘ (-i(e_i - ē_j))] V†`. Denominators vanish for dark
//! modes that never touch a bath; they get a small real shift, which keeps
//! the map Hermiticity-preserving.
//!
//! The dense products dominate the cost of an iteration, so the factors are
//! stored and applied in single precision; the flexible Krylov solver keeps
//! the final accuracy independent of this.

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::linalg::solvers::DenseSolveCore;
use faer::{Accum, Par};
use faer::{c32, c64, Mat};
use rayon::prelude::*;

use super::gmres::LinearMap;
use super::packing::{pack_block, unpack_block, Packing};
use crate::error::{Error, Result};
use crate::liouvillian::BlockLiouvillian;

struct SectorFactor {
    v: Mat<c32>,
    v_inv: Mat<c32>,
    inv_den: Mat<c32>,
}

pub(crate) struct SylvesterPreconditioner {
    packing: Packing,
    factors: Vec<SectorFactor>,
}

impl SylvesterPreconditioner {
    pub fn new(lop: &BlockLiouvillian, packing: Packing) -> Result<Self> {
        let shift = 1e-6 * lop.drive().gamma.max(1e-3);
        let factors = (0..packing.dims().len())
            .into_par_iter()
            .map(|n| sector_factor(lop, n, shift))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { packing, factors })
    }
}

fn sector_factor(lop: &BlockLiouvillian, n: usize, shift: f64) -> Result<SectorFactor> {
    let lam = lop.damping(n);
    let mut h_eff = lop.hamiltonian(n).to_dense();
    for (i, l) in lam.iter().enumerate() {
        h_eff[(i, i)] -= c64::new(0.0, *l);
    }
    let eig = h_eff
        .eigen()
        .map_err(|e| Error::LinearAlgebra(format!("sector {n} eigendecomposition: {e:?}")))?;
    let v = eig.U().to_owned();
    let e: Vec<c64> = eig.S().column_vector().iter().copied().collect();
    let v_inv = v.partial_piv_lu().inverse();
    let d = e.len();
    let inv_den = Mat::from_fn(d, d, |i, j| {
        let mut den = c64::new(0.0, -1.0) * (e[i] - e[j].conj());
        if den.norm() < shift {
            den -= c64::new(shift, 0.0);
        }
        let q = c64::new(1.0, 0.0) / den;
        c32::new(q.re as f32, q.im as f32)
    });
    Ok(SectorFactor { v: to_single(&v), v_inv: to_single(&v_inv), inv_den })
}

fn to_single(m: &Mat<c64>) -> Mat<c32> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        c32::new(z.re as f32, z.im as f32)
    })
}

/// Lower triangle of `A X A†` for Hermitian `X`; the strict upper part is left zero.
fn sandwich_lower(a: &Mat<c32>, x: &Mat<c32>) -> Mat<c32> {
    let ax = a * x;
    let d = a.nrows();
    let mut out = Mat::<c32>::zeros(d, d);
    matmul(
        out.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        ax.as_ref(),
        BlockStructure::Rectangular,
        a.adjoint(),
        BlockStructure::Rectangular,
        c32::new(1.0, 0.0),
        Par::Seq,
    );
    out
}

impl LinearMap for SylvesterPreconditioner {
    fn dim(&self) -> usize {
        self.packing.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let p = &self.packing;
        let mut outputs: Vec<&mut [f64]> = Vec::with_capacity(self.factors.len());
        let mut rest = y;
        for &d in p.dims() {
            let (head, tail) = rest.split_at_mut(d * d);
            outputs.push(head);
            rest = tail;
        }
        outputs.into_par_iter().enumerate().for_each(|(n, out)| {
            let f = &self.factors[n];
            let d = p.dims()[n];
            let mut r = Mat::<c64>::zeros(d, d);
            unpack_block(p.segment(n, x), &mut r);
            let r = to_single(&r);
            let mut t = sandwich_lower(&f.v_inv, &r);
            for j in 0..d {
                for i in 0..j {
                    t[(i, j)] = t[(j, i)].conj();
                }
            }
            for j in 0..d {
                for i in 0..d {
                    t[(i, j)] *= f.inv_den[(i, j)];
                }
            }
            let sol = sandwich_lower(&f.v, &t);
            let sol = Mat::from_fn(d, d, |i, j| {
                let z = if i >= j { sol[(i, j)] } else { sol[(j, i)].conj() };
                c64::new(z.re as f64, z.im as f64)
            });
            pack_block(&sol, out);
        });
        Ok(())
    }
}
