//! Steady states of the block generator: `L(ρ) = 0`, `tr ρ = 1`.
//!
//! Three methods share one set of post-conditions (unit trace, Hermitian
//! blocks, trace-norm residual below tolerance, no eigenvalue below -1e-8):
//!
//! * direct-dense: materialize the traced generator and LU-factorize it;
//! * iterative-linear: restarted GMRES on the traced generator, right
//!   preconditioned by the sector-local Sylvester inverse;
//! * time-evolution: adaptive Runge–Kutta until the residual is small.

mod direct;
mod evolve;
mod gmres;
pub(crate) mod packing;
mod precond;

use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::{BlockDensityMatrix, BlockLiouvillian};
use gmres::{GmresParams, LinearMap};
use packing::Packing;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DirectDense,
    IterativeLinear,
    TimeEvolution,
    Auto,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct-dense" | "direct" => Ok(Method::DirectDense),
            "iterative-linear" | "iterative" => Ok(Method::IterativeLinear),
            "time-evolution" | "evolve" => Ok(Method::TimeEvolution),
            "auto" => Ok(Method::Auto),
            other => Err(Error::invalid(format!("unknown solver method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Target for the summed trace norm of `L(ρ)`.
    pub tolerance: f64,
    /// Krylov iteration cap; `None` means `50·sqrt(Σ d_N²)`.
    pub max_iterations: Option<usize>,
    pub restart: usize,
    /// Step-size controller safety factor for time evolution.
    pub safety: f64,
    pub max_steps: usize,
    pub preconditioner: bool,
    /// Largest `Σ d_N²` accepted by direct-dense (and chosen by auto).
    pub dense_cap: usize,
    /// Bound on the Krylov basis storage; shrinks `restart` if needed.
    pub memory_budget_mb: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            tolerance: 1e-10,
            max_iterations: None,
            restart: 50,
            safety: 0.9,
            max_steps: 5_000_000,
            preconditioner: true,
            dense_cap: 5000,
            memory_budget_mb: 3072,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.restart == 0 {
            return Err(Error::invalid("restart length must be positive"));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::invalid(format!("safety factor must lie in (0, 1), got {}", self.safety)));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub method: Method,
    /// Krylov iterations or accepted integration steps.
    pub iterations: usize,
    /// `Σ_N ||L(ρ)^N||₁`, recomputed from the returned state.
    pub residual: f64,
    pub wall_time_s: f64,
    pub peak_memory_kib: Option<u64>,
    pub fell_back: bool,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: BlockDensityMatrix,
    pub diagnostics: SolveDiagnostics,
}

/// Result of [`evolve_to_steady`]; `history` holds `(t, residual bound)` samples.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub steady: SteadyState,
    pub time: f64,
    pub history: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// `||ρ_vacuum - ρ_filled||₁` between the two evolved states.
    pub distance: f64,
    pub residual_from_vacuum: f64,
    pub residual_from_filled: f64,
}

/// Peak resident set size of this process, from `/proc` where available.
pub fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
}

/// Matrix-free generator in packed coordinates, optionally with row 0
/// (the vacuum population) replaced by the trace functional.
struct PackedGenerator<'a> {
    lop: &'a BlockLiouvillian,
    packing: Packing,
    traced: bool,
}

impl LinearMap for PackedGenerator<'_> {
    fn dim(&self) -> usize {
        self.packing.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let rho = self.packing.unpack(x);
        let out = self.lop.apply(&rho)?;
        self.packing.pack_into(&out, y);
        if self.traced {
            y[0] = self.packing.trace(x);
        }
        Ok(())
    }
}

fn packing_for(lop: &BlockLiouvillian) -> Packing {
    Packing::new(lop.rungs(), lop.dims())
}

/// Exact summed trace norm of `L(ρ)`.
pub fn residual(lop: &BlockLiouvillian, rho: &BlockDensityMatrix) -> Result<f64> {
    lop.apply(rho)?.trace_norm()
}

fn finish(
    lop: &BlockLiouvillian,
    packing: &Packing,
    x: &[f64],
) -> Result<(BlockDensityMatrix, f64)> {
    let mut rho = packing.unpack(x);
    rho.normalize()?;
    let r = residual(lop, &rho)?;
    Ok((rho, r))
}

/// Checks the post-conditions every returned state must satisfy.
pub fn check_steady_state(rho: &BlockDensityMatrix, residual: f64, tolerance: f64) -> Result<()> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > 1e-12 {
        return Err(Error::consistency(format!("trace {tr} differs from 1")));
    }
    let herm = rho.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::consistency(format!("blocks deviate from Hermitian by {herm:.3e}")));
    }
    if residual > tolerance {
        return Err(Error::Convergence {
            message: format!("residual above tolerance {tolerance:.1e}"),
            best_residual: residual,
        });
    }
    let min = rho.min_eigenvalue()?;
    if min < -1e-8 {
        return Err(Error::consistency(format!("negative eigenvalue {min:.3e} in steady state")));
    }
    Ok(())
}

/// Steady state by the configured method; auto falls back from the Krylov
/// solver to time evolution on non-convergence.
pub fn solve_steady(lop: &BlockLiouvillian, cfg: &SolverConfig) -> Result<SteadyState> {
    solve_steady_from(lop, cfg, None)
}

/// As [`solve_steady`], warm-starting iterative methods from `initial`.
pub fn solve_steady_from(
    lop: &BlockLiouvillian,
    cfg: &SolverConfig,
    initial: Option<&BlockDensityMatrix>,
) -> Result<SteadyState> {
    cfg.validate()?;
    if !(lop.drive().gamma > 0.0) {
        return Err(Error::invalid("steady state requires a positive bath coupling"));
    }
    let n = lop.superoperator_dim();
    let method = match cfg.method {
        Method::Auto if n <= cfg.dense_cap => Method::DirectDense,
        Method::Auto => Method::IterativeLinear,
        m => m,
    };
    let start = Instant::now();
    let result = match method {
        Method::DirectDense => solve_direct(lop, cfg),
        Method::IterativeLinear => match solve_linear_traced_from(lop, cfg, initial) {
            Err(Error::Convergence { best_residual, .. }) if cfg.method == Method::Auto => {
                warn!("Krylov solve stalled at residual {best_residual:.3e}; falling back to time evolution");
                let seed = initial.cloned().unwrap_or_else(|| default_seed(lop));
                evolve_to_steady(lop, &seed, cfg).map(|e| {
                    let mut s = e.steady;
                    s.diagnostics.fell_back = true;
                    s
                })
            }
            other => other,
        },
        Method::TimeEvolution => {
            let seed = initial.cloned().unwrap_or_else(|| default_seed(lop));
            evolve_to_steady(lop, &seed, cfg).map(|e| e.steady)
        }
        Method::Auto => unreachable!(),
    };
    let mut steady = result?;
    steady.diagnostics.wall_time_s = start.elapsed().as_secs_f64();
    steady.diagnostics.peak_memory_kib = peak_memory_kib();
    check_steady_state(&steady.rho, steady.diagnostics.residual, cfg.tolerance)?;
    info!(
        "steady state: method {:?}, {} iterations, residual {:.3e}, {:.2} s, peak {} KiB",
        steady.diagnostics.method,
        steady.diagnostics.iterations,
        steady.diagnostics.residual,
        steady.diagnostics.wall_time_s,
        steady.diagnostics.peak_memory_kib.unwrap_or(0)
    );
    Ok(steady)
}

fn default_seed(lop: &BlockLiouvillian) -> BlockDensityMatrix {
    BlockDensityMatrix::product_state(lop.rungs(), lop.drive().nbar_avg())
}

/// Direct LU solve of the traced generator; limited to `Σ d_N² <= dense_cap`.
pub fn solve_direct(lop: &BlockLiouvillian, cfg: &SolverConfig) -> Result<SteadyState> {
    let n = lop.superoperator_dim();
    if n > cfg.dense_cap {
        return Err(Error::capacity(format!(
            "direct-dense needs Σ d_N² = {n} <= {}; use iterative-linear",
            cfg.dense_cap
        )));
    }
    let start = Instant::now();
    let op = PackedGenerator { lop, packing: packing_for(lop), traced: true };
    let mut b = vec![0.0; n];
    b[0] = 1.0;
    let x = direct::dense_solve(&op, &b)?;
    let (rho, r) = finish(lop, &op.packing, &x)?;
    Ok(SteadyState {
        rho,
        diagnostics: SolveDiagnostics {
            method: Method::DirectDense,
            iterations: 1,
            residual: r,
            wall_time_s: start.elapsed().as_secs_f64(),
            peak_memory_kib: None,
            fell_back: false,
        },
    })
}

/// Restarted GMRES on the traced generator, from the equilibrium product state.
pub fn solve_linear_traced(lop: &BlockLiouvillian, cfg: &SolverConfig) -> Result<SteadyState> {
    solve_linear_traced_from(lop, cfg, None)
}

pub fn solve_linear_traced_from(
    lop: &BlockLiouvillian,
    cfg: &SolverConfig,
    initial: Option<&BlockDensityMatrix>,
) -> Result<SteadyState> {
    cfg.validate()?;
    let start = Instant::now();
    let packing = packing_for(lop);
    let n = packing.len();
    let max_iterations = cfg
        .max_iterations
        .unwrap_or_else(|| (50.0 * (n as f64).sqrt()).ceil() as usize);

    // Basis vectors, plus preconditioned directions when preconditioning.
    let per_iteration = if cfg.preconditioner { 2 } else { 1 };
    let vector_bytes = 8 * n;
    let affordable = (cfg.memory_budget_mb << 20) / vector_bytes.max(1);
    let restart = cfg.restart.min(affordable.saturating_sub(5) / per_iteration);
    if restart < 4 {
        return Err(Error::capacity(format!(
            "a Krylov basis of {n}-dimensional vectors does not fit in {} MiB",
            cfg.memory_budget_mb
        )));
    }
    if restart < cfg.restart {
        warn!("restart length reduced to {restart} by the memory budget");
    }

    let op = PackedGenerator { lop, packing: packing.clone(), traced: true };
    let seed = initial.cloned().unwrap_or_else(|| default_seed(lop));
    if seed.rungs() != lop.rungs() {
        return Err(Error::invalid("initial state does not match the generator size"));
    }
    let mut x = packing.pack(&seed);
    packing.scale_to_unit_trace(&mut x);

    let (rho, r) = finish(lop, &packing, &x)?;
    if r <= cfg.tolerance {
        return Ok(SteadyState {
            rho,
            diagnostics: SolveDiagnostics {
                method: Method::IterativeLinear,
                iterations: 0,
                residual: r,
                wall_time_s: start.elapsed().as_secs_f64(),
                peak_memory_kib: None,
                fell_back: false,
            },
        });
    }

    let precond = if cfg.preconditioner {
        let t = Instant::now();
        let p = precond::SylvesterPreconditioner::new(lop, packing.clone())?;
        debug!("preconditioner built in {:.2} s", t.elapsed().as_secs_f64());
        Some(p)
    } else {
        None
    };
    let mut b = vec![0.0; n];
    b[0] = 1.0;

    // ||R||₁ <= sqrt(Σ d_N) ||R||_F = 2^L ||R||_F; start from that bound and
    // tighten until the exact trace norm is met.
    let mut tol = cfg.tolerance / (2f64.powi(lop.rungs() as i32) * 4.0);
    let mut iterations = 0;
    let mut best = (r, x.clone());
    loop {
        let params = GmresParams { tol, restart, max_iterations: max_iterations.saturating_sub(iterations) };
        let out = gmres::gmres(
            &op,
            precond.as_ref().map(|p| p as &dyn LinearMap),
            &b,
            &mut x,
            &params,
            |it, res| debug!("gmres: iteration {}, residual {res:.3e}", iterations + it),
        )?;
        iterations += out.iterations;
        let (rho, r) = finish(lop, &packing, &x)?;
        debug!("gmres pass: {} iterations, Krylov residual {:.3e}, trace-norm residual {r:.3e}", out.iterations, out.residual);
        if r < best.0 {
            best = (r, x.clone());
        }
        if r <= cfg.tolerance {
            return Ok(SteadyState {
                rho,
                diagnostics: SolveDiagnostics {
                    method: Method::IterativeLinear,
                    iterations,
                    residual: r,
                    wall_time_s: start.elapsed().as_secs_f64(),
                    peak_memory_kib: None,
                    fell_back: false,
                },
            });
        }
        if !out.converged || iterations >= max_iterations || tol < 1e-15 {
            return Err(Error::Convergence {
                message: format!("GMRES stopped after {iterations} iterations"),
                best_residual: best.0,
            });
        }
        tol *= (0.5 * cfg.tolerance / r).clamp(1e-3, 0.5);
    }
}

/// Integrates from `rho0` (unit trace) until `||L(ρ)||₁ <= tolerance`.
pub fn evolve_to_steady(
    lop: &BlockLiouvillian,
    rho0: &BlockDensityMatrix,
    cfg: &SolverConfig,
) -> Result<Evolution> {
    cfg.validate()?;
    if rho0.rungs() != lop.rungs() {
        return Err(Error::invalid("initial state does not match the generator size"));
    }
    if (rho0.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("initial state has trace {}", rho0.trace())));
    }
    let start = Instant::now();
    let packing = packing_for(lop);
    let op = PackedGenerator { lop, packing: packing.clone(), traced: false };
    let mut x = packing.pack(rho0);
    let params = evolve::EvolveParams {
        tolerance: cfg.tolerance,
        safety: cfg.safety,
        // Stiff components parked at the stability edge feed the residual at
        // roughly the local error level, so the error target follows ε/√n.
        rtol: 0.0,
        atol: 1e-3 * cfg.tolerance / (packing.len() as f64).sqrt(),
        max_steps: cfg.max_steps,
    };
    let run = evolve::dopri5(&op, &packing, &mut x, &params, |x| {
        let mut rho = packing.unpack(x);
        rho.normalize()?;
        residual(lop, &rho)
    })?;
    if !run.converged {
        return Err(Error::Convergence {
            message: format!("time evolution reached t = {:.1} after {} steps", run.time, run.steps),
            best_residual: run.best_residual,
        });
    }
    let (rho, r) = finish(lop, &packing, &x)?;
    Ok(Evolution {
        steady: SteadyState {
            rho,
            diagnostics: SolveDiagnostics {
                method: Method::TimeEvolution,
                iterations: run.steps,
                residual: r,
                wall_time_s: start.elapsed().as_secs_f64(),
                peak_memory_kib: None,
                fell_back: false,
            },
        },
        time: run.time,
        history: run.history,
    })
}

/// Evolves from the empty and the completely filled ladder and compares.
pub fn verify_uniqueness(lop: &BlockLiouvillian, cfg: &SolverConfig) -> Result<UniquenessReport> {
    let l = lop.rungs();
    let a = evolve_to_steady(lop, &BlockDensityMatrix::vacuum(l), cfg)?;
    let b = evolve_to_steady(lop, &BlockDensityMatrix::filled(l), cfg)?;
    Ok(UniquenessReport {
        distance: a.steady.rho.difference(&b.steady.rho).trace_norm()?,
        residual_from_vacuum: a.steady.diagnostics.residual,
        residual_from_filled: b.steady.diagnostics.residual,
    })
}
