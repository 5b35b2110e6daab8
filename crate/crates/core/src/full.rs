//! Dense reference Lindbladian on the complete `2^{2L}`-dimensional Fock space.
//!
//! Nothing here assumes number-diagonal states: the superoperator acts on all
//! `4^{2L}` matrix entries, coherences between sectors included. It exists to
//! validate the block engine and is limited to `L <= 3`.
//!
//! Vectorization is column-major, `vec(X)[i + D j] = X[i, j]`.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};

use crate::basis::{OccupationState, SectorBasis};
use crate::error::{Error, Result};
use crate::liouvillian::BlockDensityMatrix;
use crate::model::{DriveSpec, LadderSpec};

pub const MAX_FULL_RUNGS: usize = 3;

fn zero() -> c64 {
    c64::new(0.0, 0.0)
}

fn check_size(spec: &LadderSpec) -> Result<usize> {
    spec.validate()?;
    if spec.rungs > MAX_FULL_RUNGS {
        return Err(Error::capacity(format!(
            "the dense Fock-space Liouvillian is limited to L <= {MAX_FULL_RUNGS}, got L = {}",
            spec.rungs
        )));
    }
    Ok(1usize << (2 * spec.rungs))
}

/// `a_s` as a dense `D × D` matrix.
pub fn full_annihilator(rungs: usize, site: usize) -> Mat<c64> {
    let d = 1usize << (2 * rungs);
    Mat::from_fn(d, d, |i, j| {
        if (j >> site) & 1 == 1 && i == j ^ (1 << site) {
            c64::new(1.0, 0.0)
        } else {
            zero()
        }
    })
}

/// `Σ amp · a†_to a_from`, without the Hermitian conjugate.
fn full_hop(rungs: usize, terms: &[(usize, usize, c64)]) -> Mat<c64> {
    let d = 1usize << (2 * rungs);
    let mut m = Mat::<c64>::zeros(d, d);
    for s in 0..d {
        for &(to, from, amp) in terms {
            if (s >> from) & 1 == 1 && (s >> to) & 1 == 0 {
                let t = s ^ (1 << from) ^ (1 << to);
                m[(t, s)] += amp;
            }
        }
    }
    m
}

fn plus_adjoint(m: &Mat<c64>) -> Mat<c64> {
    m + m.adjoint()
}

fn flat(rung: usize, leg: usize) -> usize {
    2 * (rung - 1) + (leg - 1)
}

fn leg_amplitude(spec: &LadderSpec, leg: usize) -> c64 {
    let sign = if leg == 1 { 1.0 } else { -1.0 };
    c64::cis(sign * spec.flux / 2.0) * spec.leg_hopping
}

/// Full-space Hamiltonian with Peierls phases `±φ/2` on legs 1 and 2.
pub fn full_hamiltonian(spec: &LadderSpec) -> Result<Mat<c64>> {
    check_size(spec)?;
    let l = spec.rungs;
    let mut terms = Vec::new();
    for leg in 1..=2 {
        for j in 1..l {
            terms.push((flat(j, leg), flat(j + 1, leg), -leg_amplitude(spec, leg)));
        }
    }
    for j in 1..=l {
        terms.push((flat(j, 1), flat(j, 2), c64::new(-spec.rung_hopping, 0.0)));
    }
    Ok(plus_adjoint(&full_hop(l, &terms)))
}

/// Current from rung `bond` to `bond + 1` along `leg`.
pub fn full_leg_current(spec: &LadderSpec, bond: usize, leg: usize) -> Result<Mat<c64>> {
    check_size(spec)?;
    let coef = c64::new(0.0, -1.0) * leg_amplitude(spec, leg);
    Ok(plus_adjoint(&full_hop(spec.rungs, &[(flat(bond, leg), flat(bond + 1, leg), coef)])))
}

/// Current from leg 1 to leg 2 on `rung`.
pub fn full_rung_current(spec: &LadderSpec, rung: usize) -> Result<Mat<c64>> {
    check_size(spec)?;
    let coef = c64::new(0.0, -spec.rung_hopping);
    Ok(plus_adjoint(&full_hop(spec.rungs, &[(flat(rung, 1), flat(rung, 2), coef)])))
}

pub fn full_density(rungs: usize, site: usize) -> Mat<c64> {
    let d = 1usize << (2 * rungs);
    Mat::from_fn(d, d, |i, j| {
        if i == j && (i >> site) & 1 == 1 {
            c64::new(1.0, 0.0)
        } else {
            zero()
        }
    })
}

/// `S += coef · (I ⊗ M)`: `X ↦ M X`.
fn add_left(s: &mut Mat<c64>, coef: c64, m: MatRef<'_, c64>) {
    let d = m.nrows();
    for k in 0..d {
        for i in 0..d {
            let v = m[(i, k)];
            if v != zero() {
                for j in 0..d {
                    s[(i + d * j, k + d * j)] += coef * v;
                }
            }
        }
    }
}

/// `S += coef · (Mᵀ ⊗ I)`: `X ↦ X M`.
fn add_right(s: &mut Mat<c64>, coef: c64, m: MatRef<'_, c64>) {
    let d = m.nrows();
    for j in 0..d {
        for l in 0..d {
            let v = m[(l, j)];
            if v != zero() {
                for i in 0..d {
                    s[(i + d * j, i + d * l)] += coef * v;
                }
            }
        }
    }
}

/// `S += coef · (Bᵀ ⊗ A)`: `X ↦ A X B`.
fn add_sandwich(s: &mut Mat<c64>, coef: c64, a: MatRef<'_, c64>, b: MatRef<'_, c64>) {
    let d = a.nrows();
    for k in 0..d {
        for i in 0..d {
            let av = a[(i, k)];
            if av == zero() {
                continue;
            }
            for j in 0..d {
                for l in 0..d {
                    let bv = b[(l, j)];
                    if bv != zero() {
                        s[(i + d * j, k + d * l)] += coef * av * bv;
                    }
                }
            }
        }
    }
}

/// The complete vectorized Lindbladian, `D² × D²` with `D = 2^{2L}`.
pub fn build_full_liouvillian_dense(spec: &LadderSpec, drive: &DriveSpec) -> Result<Mat<c64>> {
    let d = check_size(spec)?;
    drive.validate()?;
    let h = full_hamiltonian(spec)?;
    let mut s = Mat::<c64>::zeros(d * d, d * d);
    add_left(&mut s, c64::new(0.0, -1.0), h.as_ref());
    add_right(&mut s, c64::new(0.0, 1.0), h.as_ref());

    let last = flat(spec.rungs, 1);
    for (site, nbar) in [(0, drive.nbar_left), (last, drive.nbar_right)] {
        let a = full_annihilator(spec.rungs, site);
        let ad = a.adjoint().to_owned();
        let n = &ad * &a;
        let m = &a * &ad;
        let loss = drive.gamma * (1.0 - nbar);
        let gain = drive.gamma * nbar;
        for (rate, jump, jump_dag, anti) in [(loss, &a, &ad, &n), (gain, &ad, &a, &m)] {
            if rate == 0.0 {
                continue;
            }
            add_sandwich(&mut s, c64::new(2.0 * rate, 0.0), jump.as_ref(), jump_dag.as_ref());
            add_left(&mut s, c64::new(-rate, 0.0), anti.as_ref());
            add_right(&mut s, c64::new(-rate, 0.0), anti.as_ref());
        }
    }
    Ok(s)
}

pub fn vectorize(x: MatRef<'_, c64>) -> Mat<c64> {
    let d = x.nrows();
    Mat::from_fn(d * d, 1, |k, _| x[(k % d, k / d)])
}

pub fn unvectorize(v: MatRef<'_, c64>) -> Mat<c64> {
    let d = (v.nrows() as f64).sqrt().round() as usize;
    Mat::from_fn(d, d, |i, j| v[(i + d * j, 0)])
}

/// Unit-trace null vector, pinned by replacing the `(0,0)` row with the trace.
pub fn full_steady_state(liouvillian: &Mat<c64>) -> Result<Mat<c64>> {
    let n = liouvillian.nrows();
    let d = (n as f64).sqrt().round() as usize;
    let mut a = liouvillian.clone();
    for c in 0..n {
        a[(0, c)] = zero();
    }
    for i in 0..d {
        a[(0, i + d * i)] = c64::new(1.0, 0.0);
    }
    let mut rhs = Mat::<c64>::zeros(n, 1);
    rhs[(0, 0)] = c64::new(1.0, 0.0);
    let x = a.partial_piv_lu().solve(&rhs);
    if x.col_as_slice(0).iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::LinearAlgebra("traced full Liouvillian is singular".into()));
    }
    Ok(unvectorize(x.as_ref()))
}

/// Number of singular values below `rel_tol · σ_max`.
pub fn null_space_dimension(liouvillian: &Mat<c64>, rel_tol: f64) -> Result<usize> {
    let sv = liouvillian
        .singular_values()
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let max = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s <= rel_tol * max).count())
}

/// Number-conserving blocks `ρ^N` of a full-space operator.
pub fn number_diagonal_part(rho: MatRef<'_, c64>, rungs: usize) -> Result<BlockDensityMatrix> {
    let blocks = (0..=2 * rungs)
        .map(|n| {
            let b = SectorBasis::enumerate(rungs, n)?;
            let st = b.states();
            Ok(Mat::from_fn(b.dim(), b.dim(), |i, j| rho[(st[i].bits() as usize, st[j].bits() as usize)]))
        })
        .collect::<Result<Vec<_>>>()?;
    BlockDensityMatrix::from_blocks(rungs, blocks)
}

/// Largest entry connecting different particle numbers.
pub fn number_offdiagonal_max(rho: MatRef<'_, c64>) -> f64 {
    let d = rho.nrows();
    let mut m: f64 = 0.0;
    for j in 0..d {
        for i in 0..d {
            if OccupationState(i as u64).particles() != OccupationState(j as u64).particles() {
                m = m.max(rho[(i, j)].norm());
            }
        }
    }
    m
}

/// Embeds block matrices into the full Fock space.
pub fn embed_blocks(rho: &BlockDensityMatrix) -> Result<Mat<c64>> {
    let l = rho.rungs();
    let d = 1usize << (2 * l);
    let mut out = Mat::<c64>::zeros(d, d);
    for (n, block) in rho.blocks().iter().enumerate() {
        let b = SectorBasis::enumerate(l, n)?;
        let st = b.states();
        for j in 0..b.dim() {
            for i in 0..b.dim() {
                out[(st[i].bits() as usize, st[j].bits() as usize)] = block[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `tr(O ρ)` for full-space matrices.
pub fn full_expectation(op: MatRef<'_, c64>, rho: MatRef<'_, c64>) -> c64 {
    let d = op.nrows();
    let mut acc = zero();
    for i in 0..d {
        for k in 0..d {
            acc += op[(i, k)] * rho[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_limit() {
        let spec = LadderSpec::new(4, 1.0, 1.0, 0.0).unwrap();
        let drive = DriveSpec::new(1.0, 0.5, 0.0).unwrap();
        assert!(matches!(build_full_liouvillian_dense(&spec, &drive), Err(Error::Capacity(_))));
    }

    #[test]
    fn vectorization_roundtrip() {
        let x = Mat::from_fn(4, 4, |i, j| c64::new(i as f64, j as f64));
        assert_eq!(unvectorize(vectorize(x.as_ref()).as_ref()), x);
    }

    #[test]
    fn single_site_relaxes_to_bath_density() {
        let spec = LadderSpec::new(1, 1.0, 0.6, 0.0).unwrap();
        let drive = DriveSpec::new(0.7, 0.3, 0.3).unwrap();
        let s = build_full_liouvillian_dense(&spec, &drive).unwrap();
        let rho = full_steady_state(&s).unwrap();
        for site in 0..2 {
            let n = full_expectation(full_density(1, site).as_ref(), rho.as_ref());
            assert!((n.re - 0.3).abs() < 1e-13);
        }
    }
}
