use faer::linalg::solvers::Solve;
use faer::Mat;

use super::gmres::LinearMap;
use crate::error::{Error, Result};

/// Materializes `op` column by column and solves `op · x = b` by partial-pivot LU.
pub(crate) fn dense_solve(op: &dyn LinearMap, b: &[f64]) -> Result<Vec<f64>> {
    let n = op.dim();
    let mut a = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        op.apply(&e, &mut col)?;
        e[k] = 0.0;
        a.col_as_slice_mut(k).copy_from_slice(&col);
    }
    let lu = a.partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = x.col_as_slice(0).to_vec();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearAlgebra("singular traced generator".into()));
    }
    Ok(out)
}
