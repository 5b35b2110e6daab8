//! Restarted GMRES in real arithmetic with optional right preconditioning.

use super::packing::{axpy, dot, norm2};
use crate::error::Result;

pub(crate) trait LinearMap: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GmresParams {
    /// Absolute target for `||b - A x||₂`.
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solves `A x = b`, starting from and overwriting `x`. With a right
/// preconditioner `M` the Krylov space is built for `A M`; the preconditioned
/// directions are kept (flexible variant), so `M` need not be exactly linear
/// and a reduced-precision `M` does not limit the attainable residual. The
/// reported residual is always the true one.
pub(crate) fn gmres(
    a: &dyn LinearMap,
    m: Option<&dyn LinearMap>,
    b: &[f64],
    x: &mut [f64],
    params: &GmresParams,
    mut on_cycle: impl FnMut(usize, f64),
) -> Result<GmresOutcome> {
    let n = a.dim();
    let restart = params.restart.max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut directions: Vec<Vec<f64>> = Vec::new();
    let mut w = vec![0.0; n];
    let mut iterations = 0;
    let mut last_beta = f64::INFINITY;

    loop {
        // r = b - A x
        a.apply(x, &mut w)?;
        let mut r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        let beta = norm2(&r);
        on_cycle(iterations, beta);
        if beta <= params.tol {
            return Ok(GmresOutcome { iterations, residual: beta, converged: true });
        }
        if iterations >= params.max_iterations || !beta.is_finite() || beta >= last_beta * (1.0 - 1e-13) {
            return Ok(GmresOutcome { iterations, residual: beta, converged: false });
        }
        last_beta = beta;

        r.iter_mut().for_each(|v| *v /= beta);
        basis.clear();
        directions.clear();
        basis.push(r);
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;

        for k in 0..restart {
            if iterations >= params.max_iterations {
                break;
            }
            let v = &basis[k];
            match m {
                Some(m) => {
                    let mut z = vec![0.0; n];
                    m.apply(v, &mut z)?;
                    a.apply(&z, &mut w)?;
                    directions.push(z);
                }
                None => a.apply(v, &mut w)?,
            }
            iterations += 1;

            // Modified Gram-Schmidt; a second pass only when cancellation
            // shrank the vector noticeably.
            let mut h = vec![0.0; k + 2];
            let mut hk1 = norm2(&w);
            for pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i] += c;
                    axpy(-c, vi, &mut w);
                }
                let prev = hk1;
                hk1 = norm2(&w);
                if pass == 0 && hk1 > 0.7 * prev {
                    break;
                }
            }
            h[k + 1] = hk1;

            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = h[k].hypot(h[k + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (h[k] / rho, h[k + 1] / rho) };
            cs.push(c);
            sn.push(s);
            h[k] = rho;
            h[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            hess.push(h);

            let estimate = g[k + 1].abs();
            if hk1 <= f64::EPSILON * beta || estimate <= 0.5 * params.tol {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }

        // Back-substitute the triangularized least-squares system.
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[j][i] * y[j];
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        let dirs = if m.is_some() { &directions } else { &basis };
        for (yi, zi) in y.iter().zip(dirs) {
            axpy(*yi, zi, x);
        }
    }
}
