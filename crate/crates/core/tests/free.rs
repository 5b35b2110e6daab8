mod common;

use faer::{c64, Mat};
use fluxladder::fock::FockReference;
use fluxladder::free::{
    build_drift_noise, free_currents, lyapunov_residual, solve_lyapunov, steady_correlations, steepest_slope,
};
use fluxladder::{DriveSpec, Error, LadderSpec};
use rand::RngExt;

#[test]
fn correlations_obey_the_moment_equation_of_the_fock_generator() {
    // With nothing in the top sector the truncation is invisible to one-body
    // moments, so d/dt C from the Fock generator must equal W C + C W† + M.
    let mut rng = common::rng(11);
    for l in [1, 2] {
        let spec = common::random_spec(&mut rng, l);
        let drive = DriveSpec::new(rng.random_range(0.5..2.0), 0.2, 0.35).unwrap();
        let fock = FockReference::new(&spec, &drive, 4).unwrap();
        let dims = fock.dims();
        let top = dims.len() - 1;
        let rho: Vec<Mat<c64>> = dims
            .iter()
            .enumerate()
            .map(|(n, &d)| {
                if n == top {
                    return Mat::zeros(d, d);
                }
                let a = Mat::from_fn(d, d, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                &a * a.adjoint()
            })
            .collect();
        let dc = fock.correlations(&fock.apply(&rho));
        let c = fock.correlations(&rho);
        let pair = build_drift_noise(&spec, &drive).unwrap();
        let trace: f64 = rho.iter().map(|r| (0..r.nrows()).map(|i| r[(i, i)].re).sum::<f64>()).sum();
        let noise = Mat::from_fn(c.nrows(), c.ncols(), |i, j| pair.noise[(i, j)] * trace);
        let want = &pair.drift * &c + &c * pair.drift.adjoint() + noise;
        let diff = (&dc - &want).norm_max();
        assert!(diff < 1e-10 * want.norm_max().max(1.0), "L={l}: {diff:e}");
    }
}

#[test]
fn steady_correlations_match_the_truncated_fock_model() {
    // Occupations are small at n̄₁ = 0.05, so five bosons in total leave a
    // truncation error well below the tolerance.
    let spec = LadderSpec::new(2, 1.0, 1.3, 1.1).unwrap();
    let drive = DriveSpec::new(0.8, 0.05, 0.0).unwrap();
    let c = steady_correlations(&spec, &drive).unwrap().c;
    let fock = FockReference::new(&spec, &drive, 5).unwrap();
    let rho = fock.steady_state().unwrap();
    let diff = (&fock.correlations(&rho) - &c).norm_max();
    assert!(diff <= 1e-6, "{diff:e}");
    assert!(FockReference::top_weight(&rho) < 1e-5);
}

#[test]
fn equal_baths_thermalise() {
    // Both baths at the same density: every site settles at n̄/(1 - 2n̄) on every site with no coherences.
    for nb in [0.05, 0.2, 0.4] {
        let spec = LadderSpec::new(3, 1.0, 0.7, 1.3).unwrap();
        let drive = DriveSpec::new(1.1, nb, nb).unwrap();
        let corr = steady_correlations(&spec, &drive).unwrap();
        let want = nb / (1.0 - 2.0 * nb);
        let eye = Mat::from_fn(6, 6, |i, j| if i == j { c64::new(want, 0.0) } else { c64::new(0.0, 0.0) });
        assert!((&corr.c - &eye).norm_max() < 1e-12, "n̄ = {nb}");
        assert!(free_currents(&corr, &spec).unwrap().total_current.abs() < 1e-12);
    }
}

#[test]
fn lyapunov_solver_on_random_stable_matrices() {
    let mut rng = common::rng(5);
    for n in [1, 3, 8, 20] {
        let mut w = Mat::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        // Shift into the left half-plane by more than the spectral radius bound.
        let shift = w.norm_l2() + 0.5;
        for i in 0..n {
            w[(i, i)] -= c64::new(shift, 0.0);
        }
        let b = Mat::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &b * b.adjoint();
        let c = solve_lyapunov(w.as_ref(), m.as_ref()).unwrap();
        assert!(lyapunov_residual(w.as_ref(), c.as_ref(), m.as_ref()) <= 1e-12 * m.norm_l2());
        // Positive noise, Hurwitz drift: the solution is positive semidefinite.
        let ev = c.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(ev[0] > -1e-12);
    }
}

#[test]
fn unstable_drift_is_rejected() {
    let w = Mat::from_fn(2, 2, |i, j| c64::new(if i == j { 0.1 } else { 0.0 }, 0.0));
    let m = Mat::<c64>::identity(2, 2);
    assert!(matches!(solve_lyapunov(w.as_ref(), m.as_ref()), Err(Error::Instability(_))));
}

#[test]
fn currents_are_uniform_and_balance_the_baths() {
    let mut rng = common::rng(9);
    for _ in 0..5 {
        let l = rng.random_range(2..12);
        let spec = common::random_spec(&mut rng, l);
        let g = rng.random_range(0.5..2.0);
        let n1 = rng.random_range(0.0..0.45);
        let drive = DriveSpec::new(g, n1, rng.random_range(0.0..0.45)).unwrap();
        let corr = steady_correlations(&spec, &drive).unwrap();
        assert!(corr.hermiticity_error() < 1e-12);
        assert!(corr.min_eigenvalue().unwrap() > -1e-10);
        let j = free_currents(&corr, &spec).unwrap();
        assert!(j.bond_spread < 1e-10, "{}", j.bond_spread);
        // Net injection by the left bath, gain 2Γn̄(n + 1) minus loss 2Γ(1 - n̄)n.
        let n11 = corr.density(0);
        let inflow = 2.0 * g * n1 - 2.0 * g * (1.0 - 2.0 * n1) * n11;
        assert!((j.total_current - inflow).abs() < 1e-10, "{} vs {inflow}", j.total_current);
    }
}

#[test]
fn flux_mirror_symmetry() {
    let drive = DriveSpec::new(1.0, 0.1, 0.0).unwrap();
    let at = |phi: f64| {
        let spec = LadderSpec::new(15, 1.0, 1.0, phi).unwrap();
        free_currents(&steady_correlations(&spec, &drive).unwrap(), &spec).unwrap().total_current
    };
    for phi in [0.3, 1.2, 2.5] {
        assert!((at(phi) - at(2.0 * std::f64::consts::PI - phi)).abs() < 1e-12);
    }
}

#[test]
fn steepest_slope_finds_the_kink() {
    let phis: Vec<f64> = (0..41).map(|k| k as f64 * 0.1).collect();
    let js: Vec<f64> = phis.iter().map(|&p| if p < 2.05 { 1.0 } else { 1.0 - 3.0 * (p - 2.05) }).collect();
    let (phi, slope) = steepest_slope(&phis, &js).unwrap();
    assert!((slope - 3.0).abs() < 1e-9 && phi >= 2.1, "{phi} {slope}");
    assert!(steepest_slope(&phis[..2], &js[..2]).is_none());
}

#[test]
fn hardcore_and_free_currents_meet_in_the_dilute_limit() {
    use fluxladder::observables::ObservableOperators;
    use fluxladder::solver::{solve_steady, SolverConfig};
    use fluxladder::BlockLiouvillian;

    // The models differ at O(n̄) (hardcore saturation, and the free-boson
    // damping Γ(1-2n̄) against Γ), so the relative gap should halve with n̄.
    let spec = LadderSpec::new(3, 1.0, 1.0, 1.2).unwrap();
    let gap = |nb: f64| {
        let drive = DriveSpec::new(1.0, nb, 0.0).unwrap();
        let s = solve_steady(&BlockLiouvillian::new(spec, drive).unwrap(), &SolverConfig::default()).unwrap();
        let hc = ObservableOperators::new(&spec).unwrap().report(&s.rho, &drive, 1e-10).unwrap().total_current;
        let free = free_currents(&steady_correlations(&spec, &drive).unwrap(), &spec).unwrap().total_current;
        (free - hc) / hc
    };
    let (a, b) = (gap(0.01), gap(0.005));
    assert!(a > 0.0 && a < 0.04, "{a}");
    assert!((a / b - 2.0).abs() < 0.1, "{a} {b}");
}
