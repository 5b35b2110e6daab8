//! Acceptance run: one PASS/FAIL line per criterion, then supplementary lines.
//!
//! Inputs come from the committed files under `configs/`. Outputs go to a
//! scratch directory, or to `$FLUXLADDER_ACCEPTANCE_OUT` when set (sweeps
//! there resume, so a rerun only recomputes what is missing).
//! `FLUXLADDER_ACCEPTANCE_L7=1` adds the L = 7 runs, which need far more
//! memory and time than a small machine has.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known not to hold (see the
//! README); the process exits non-zero if any other criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::{c64, Mat};
use fluxladder::experiment::config::ExperimentConfig;
use fluxladder::experiment::oracle::cross_check;
use fluxladder::experiment::sweep::{run_sweep, RunOptions, SweepRow};
use fluxladder::experiment::{free_sweep, run_controllability};
use fluxladder::fock::FockReference;
use fluxladder::free::{free_currents, solve_lyapunov, steady_correlations, steepest_slope};
use fluxladder::observables::{ObservableOperators, ObservableReport};
use fluxladder::solver::{SolverConfig, SteadyState};
use fluxladder::spectra::sector_spectrum;
use fluxladder::{BlockLiouvillian, DriveSpec, Error, LadderSpec};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPECTED_FAILURES: &[u32] = &[4, 6, 8];

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

/// Worst values of the per-instance consistency checks.
#[derive(Default)]
struct Consistency {
    instances: usize,
    trace: f64,
    hermiticity: f64,
    min_eigenvalue: f64,
    continuity: f64,
    bath_balance: f64,
    bond_spread: f64,
    periodicity: f64,
    periodic_checks: usize,
    violations: Vec<String>,
}

impl Consistency {
    fn record(&mut self, label: &str, s: &SteadyState, r: &ObservableReport, eps: f64) {
        self.instances += 1;
        let tr = (s.rho.trace() - 1.0).abs();
        let herm = s.rho.hermiticity_error();
        let min = s.rho.min_eigenvalue().unwrap_or(f64::NEG_INFINITY);
        let c = &r.continuity;
        let bath = c.left_bath.max(c.right_bath);
        self.trace = self.trace.max(tr);
        self.hermiticity = self.hermiticity.max(herm);
        self.min_eigenvalue = self.min_eigenvalue.min(min);
        self.continuity = self.continuity.max(c.sites);
        self.bath_balance = self.bath_balance.max(bath);
        self.bond_spread = self.bond_spread.max(c.bond_spread);
        let ok = tr <= 1e-12
            && herm <= 1e-10
            && min >= -1e-8
            && c.sites <= 10.0 * eps
            && bath <= 10.0 * eps
            && c.bond_spread <= 10.0 * eps;
        if !ok {
            self.violations.push(label.to_string());
        }
    }

    fn record_periodicity(&mut self, label: &str, diff: f64) {
        self.periodic_checks += 1;
        self.periodicity = self.periodicity.max(diff);
        if diff > 1e-8 {
            self.violations.push(format!("{label} (J(φ) vs J(φ+2π))"));
        }
    }

    fn verdict(&self) -> Verdict {
        Verdict {
            id: 3,
            pass: self.violations.is_empty() && self.instances > 0,
            detail: format!(
                "{} instances: |tr-1| {:.1e}, herm {:.1e}, min eig {:.1e}, continuity {:.1e}, bath balance {:.1e}, \
                 bond spread {:.1e}; periodicity {:.1e} over {} checks{}",
                self.instances,
                self.trace,
                self.hermiticity,
                self.min_eigenvalue,
                self.continuity,
                self.bath_balance,
                self.bond_spread,
                self.periodicity,
                self.periodic_checks,
                if self.violations.is_empty() { String::new() } else { format!("; violations: {:?}", self.violations) }
            ),
        }
    }
}

struct Ctx {
    configs: PathBuf,
    out: PathBuf,
    l7: bool,
    consistency: Consistency,
    supplementary: Vec<String>,
}

impl Ctx {
    fn config(&self, name: &str, overrides: &[String]) -> ExperimentConfig {
        let mut o = overrides.to_vec();
        let dir = self.out.join(name.trim_end_matches(".json"));
        o.push(format!("output.directory={}", serde_json::to_string(&dir).unwrap()));
        ExperimentConfig::load(&self.configs.join(name), &o).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    /// Solves one instance, records it in the consistency suite, and checks
    /// `J(φ) = J(φ + 2π)` when `periodic`.
    fn solve(&mut self, label: &str, spec: LadderSpec, drive: DriveSpec, periodic: bool) -> (ObservableReport, SteadyState) {
        let cfg = SolverConfig::default();
        let (r, s) = solve_point(spec, drive, &cfg).unwrap_or_else(|e| panic!("{label}: {e}"));
        self.consistency.record(label, &s, &r, cfg.tolerance);
        if periodic {
            let (r2, _) = solve_point(spec.with_flux(spec.flux + 2.0 * PI), drive, &cfg)
                .unwrap_or_else(|e| panic!("{label} at φ+2π: {e}"));
            self.consistency.record_periodicity(label, (r.total_current - r2.total_current).abs());
        }
        (r, s)
    }

    fn record_sweep(&mut self, label: &str, rows: &[SweepRow]) {
        // Rows carry the solver's own checks; failures are recorded as such.
        for r in rows.iter().filter(|r| r.mirror_of.is_none()) {
            self.consistency.instances += 1;
            if r.failed() {
                self.consistency.violations.push(format!("{label}[{}]: {}", r.index, r.errors));
            }
        }
    }
}

fn solve_point(spec: LadderSpec, drive: DriveSpec, cfg: &SolverConfig) -> fluxladder::Result<(ObservableReport, SteadyState)> {
    let lop = BlockLiouvillian::new(spec, drive)?;
    let s = fluxladder::solver::solve_steady(&lop, cfg)?;
    // Unchecked: the consistency suite does its own bookkeeping.
    let r = ObservableOperators::new(&spec)?.report_unchecked(&s.rho, &drive)?;
    Ok((r, s))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn criterion_1(ctx: &mut Ctx) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let (mut worst_rho, mut worst_j) = (0.0f64, 0.0f64);
    for l in [2, 3] {
        for _ in 0..5 {
            let spec = LadderSpec::new(l, 1.0, rng.random_range(0.5..=2.0), rng.random_range(0.0..2.0 * PI)).unwrap();
            let drive =
                DriveSpec::new(rng.random_range(0.5..=2.0), rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0))
                    .unwrap();
            let cmp = cross_check(&spec, &drive, &SolverConfig::default()).unwrap();
            worst_rho = worst_rho.max(cmp.trace_norm_difference);
            worst_j = worst_j.max(cmp.max_current_difference);
            ctx.solve(&format!("oracle L={l}"), spec, drive, true);
        }
    }
    Verdict {
        id: 1,
        pass: worst_rho <= 1e-9 && worst_j <= 1e-9,
        detail: format!("L=2,3 x5 random sets: max ||Δρ||₁ {worst_rho:.2e}, max |ΔJ| {worst_j:.2e}"),
    }
}

fn criterion_2(ctx: &mut Ctx) -> Verdict {
    let cfg = ctx.config("equilibrium_L4.json", &[]);
    let (mut dn, mut dj, mut dw) = (0.0f64, 0.0f64, 0.0f64);
    for phi in [0.0, PI / 2.0, PI] {
        let spec = cfg.ladder(phi).unwrap();
        let drive = cfg.drive_spec().unwrap();
        let (r, _) = ctx.solve(&format!("equilibrium φ={phi:.3}"), spec, drive, true);
        let sites = 2 * spec.rungs;
        for d in r.densities.iter().flatten() {
            dn = dn.max((d - 0.3).abs());
        }
        for j in r.leg_currents.iter().flatten().chain(&r.rung_currents) {
            dj = dj.max(j.abs());
        }
        for (n, w) in r.block_weights.iter().enumerate() {
            let want = binomial(sites, n) * 0.3f64.powi(n as i32) * 0.7f64.powi((sites - n) as i32);
            dw = dw.max((w - want).abs());
        }
    }
    Verdict {
        id: 2,
        pass: dn <= 1e-10 && dj <= 1e-10 && dw <= 1e-10,
        detail: format!("L=4, n̄=0.3, φ∈{{0,π/2,π}}: max |n-0.3| {dn:.1e}, max |J| {dj:.1e}, max |Δw_N| {dw:.1e}"),
    }
}

fn criterion_4(ctx: &mut Ctx) -> Verdict {
    let (name, label) = if ctx.l7 { ("fig3_sectors_L7.json", "L=7") } else { ("fig3_sectors_L5.json", "L=5 fallback") };
    let cfg = ctx.config(name, &[]);
    let spec = cfg.ladder(cfg.model.phi).unwrap();
    let drive = cfg.drive_spec().unwrap();
    let (r, s) = ctx.solve(&format!("sectors {label}"), spec, drive, false);
    let sum: f64 = r.sector_currents.iter().sum();
    let additivity = (sum - r.total_current).abs();
    let argmax = r
        .sector_currents
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(n, _)| n)
        .unwrap();
    let ops = ObservableOperators::new(&spec).unwrap();
    // Interior bonds: those not touching a driven rung.
    let l = spec.rungs;
    let mut spread: f64 = 0.0;
    for n in 0..=2 * l {
        let prof = ops.sector_current_profile(&s.rho, n).unwrap();
        let interior = &prof[1..l - 2];
        let (lo, hi) = interior.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if interior.len() > 1 {
            spread = spread.max(hi - lo);
        }
    }
    let corrected = ops.sector_continuity_residual(&s.rho, &drive).unwrap();
    let eps = SolverConfig::default().tolerance;
    ctx.supplementary.push(format!(
        "sectors {label}: J_N = {:?}; sector continuity with inter-sector sources holds to {corrected:.1e}",
        r.sector_currents.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()
    ));
    Verdict {
        id: 4,
        pass: additivity <= 1e-10 && spread <= 10.0 * eps && argmax == 1,
        detail: format!(
            "{label}: |Σ J_N - J| {additivity:.1e}, argmax_N |J_N| = {argmax}, interior-bond spread of J_N {spread:.1e} \
             (needs ≤ {:.0e})",
            10.0 * eps
        ),
    }
}

fn criterion_5(ctx: &mut Ctx, workers: usize) -> Verdict {
    let cfg = ctx.config("fig2a_controllability.json", &["controllability.nbar_av=[0.1,0.5]".into()]);
    let t = Instant::now();
    let (rows, path) = match run_controllability(&cfg, &RunOptions { workers, force: false }) {
        Err(Error::Config(_)) => run_controllability(&cfg, &RunOptions { workers, force: true }),
        other => other,
    }
    .unwrap();
    for row in &rows {
        let sweep = path.with_file_name(&row.sweep_file);
        let (_, sweep_rows): (_, Vec<SweepRow>) = fluxladder::experiment::table::read_table(&sweep).unwrap();
        ctx.record_sweep(&format!("controllability n̄_av={}", row.nbar_av), &sweep_rows);
    }
    // Periodicity at one sweep point; each L = 6 solve takes about a minute.
    let sweep_cfg = ctx.config("fig2a_controllability.json", &["drive.nbar_av=0.1".into()]);
    for phi in [2.0 * PI / 3.0] {
        let spec = sweep_cfg.ladder(phi).unwrap();
        let drive = sweep_cfg.drive_spec().unwrap();
        ctx.solve(&format!("L=6 φ={phi:.3}"), spec, drive, true);
    }
    let t01 = rows.iter().find(|r| (r.nbar_av - 0.1).abs() < 1e-12).and_then(|r| r.controllability);
    let t05 = rows.iter().find(|r| (r.nbar_av - 0.5).abs() < 1e-12).and_then(|r| r.controllability);
    ctx.supplementary.push(format!(
        "controllability L=6: {} ({:.0} s)",
        rows.iter()
            .map(|r| format!("T({})={}", r.nbar_av, r.controllability.map_or("n/a".into(), |t| format!("{t:.4e}"))))
            .collect::<Vec<_>>()
            .join(", "),
        t.elapsed().as_secs_f64()
    ));
    match (t01, t05) {
        (Some(a), Some(b)) => Verdict {
            id: 5,
            pass: b <= a / 3.0,
            detail: format!("L=6, 61-point φ grid: T(0.5) = {b:.3e}, T(0.1) = {a:.3e}, ratio {:.3}", b / a),
        },
        _ => Verdict { id: 5, pass: false, detail: "controllability undefined (failed sweep points)".into() },
    }
}

fn nbar_sweep(ctx: &mut Ctx, name: &str) -> Vec<(f64, f64)> {
    let cfg = ctx.config(name, &[]);
    let path = cfg.output_path("sweep", "csv");
    let out = match run_sweep(&cfg, &path, &RunOptions::default()) {
        Err(Error::Config(_)) => run_sweep(&cfg, &path, &RunOptions { workers: 1, force: true }),
        other => other,
    }
    .unwrap();
    ctx.record_sweep(name, &out.rows);
    out.rows.iter().map(|r| (r.nbar1, r.j_total)).collect()
}

fn criterion_6(ctx: &mut Ctx) -> Verdict {
    let mut lines = Vec::new();
    let mut result = None;
    let sizes: &[(usize, &str)] = if ctx.l7 { &[(5, "L=5 smoke"), (7, "L=7")] } else { &[(5, "L=5 smoke")] };
    for &(l, label) in sizes {
        let zero = nbar_sweep(ctx, &format!("fig5_ndc_L{l}_phi_0.json"));
        let pi = nbar_sweep(ctx, &format!("fig5_ndc_L{l}_phi_pi.json"));
        let drops: Vec<f64> =
            zero.windows(2).filter(|w| w[1].1 < w[0].1).map(|w| w[1].0).collect();
        let upper: Vec<f64> = (1..pi.len() - 1)
            .filter(|&k| pi[k].0 >= 0.5 - 1e-12)
            .map(|k| pi[k + 1].1 - 2.0 * pi[k].1 + pi[k - 1].1)
            .collect();
        let ndc = !drops.is_empty();
        let superlinear = !upper.is_empty() && upper.iter().all(|&d| d > 0.0);
        let min_d2 = upper.iter().copied().fold(f64::INFINITY, f64::min);
        lines.push(format!(
            "{label}: φ=0 decreasing steps ending at n̄₁ = {drops:?}; φ=π min second difference on upper half {min_d2:.2e}"
        ));
        ctx.supplementary.push(format!(
            "NDC {label}: J(φ=0) = {:?}; J(φ=π) = {:?}",
            zero.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>(),
            pi.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>()
        ));
        if l == 7 {
            result = Some(ndc && superlinear);
        }
    }
    Verdict {
        id: 6,
        pass: result.unwrap_or(false),
        detail: format!(
            "{}{}",
            if result.is_none() { "L=7 not run (set FLUXLADDER_ACCEPTANCE_L7=1); " } else { "" },
            lines.join("; ")
        ),
    }
}

fn criterion_7(ctx: &mut Ctx) -> Verdict {
    let mut dims = Vec::new();
    let (mut tr, mut refl, mut mirror) = (0.0f64, 0.0f64, 0.0f64);
    for name in ["fig4_spectra_L10.json", "fig4_spectra_L7.json"] {
        let cfg = ctx.config(name, &[]);
        let sp = cfg.spectrum.clone().unwrap();
        for &n in &sp.particles {
            for &phi in &sp.phis {
                let spec = cfg.ladder(phi).unwrap();
                let s = sector_spectrum(&spec, n).unwrap();
                let m = sector_spectrum(&spec.with_flux(2.0 * PI - phi), n).unwrap();
                if phi == sp.phis[0] {
                    dims.push(s.dim());
                }
                tr = tr.max(s.trace().abs() / s.dim() as f64);
                refl = refl.max(s.reflection_asymmetry());
                mirror = mirror.max(s.max_difference(&m).unwrap());
            }
        }
    }
    Verdict {
        id: 7,
        pass: dims == [190, 1140, 3432, 3003] && tr <= 1e-12 && refl <= 1e-10 && mirror <= 1e-10,
        detail: format!(
            "dims {dims:?}, max |tr|/dim {tr:.1e}, E→-E asymmetry {refl:.1e}, φ↔2π-φ difference {mirror:.1e}"
        ),
    }
}

fn criterion_8(ctx: &mut Ctx) -> Verdict {
    // Scalar case: one site with a single bath.
    let mut scalar: f64 = 0.0;
    for nb in [0.0, 0.1, 0.25, 0.4, 0.49] {
        let g = 0.7;
        let w = Mat::from_fn(1, 1, |_, _| c64::new(-g * (1.0 - 2.0 * nb), 0.0));
        let m = Mat::from_fn(1, 1, |_, _| c64::new(2.0 * g * nb, 0.0));
        let c = solve_lyapunov(w.as_ref(), m.as_ref()).unwrap();
        scalar = scalar.max((c[(0, 0)].re - nb / (1.0 - 2.0 * nb)).abs());
    }

    // Truncated Fock space, L = 2.
    let spec = LadderSpec::new(2, 1.0, 1.3, 1.1).unwrap();
    let drive = DriveSpec::new(0.8, 0.05, 0.0).unwrap();
    let fock = FockReference::new(&spec, &drive, 5).unwrap();
    let rho = fock.steady_state().unwrap();
    let fock_diff = (&fock.correlations(&rho) - &steady_correlations(&spec, &drive).unwrap().c).norm_max();

    // Kink of the free current at L = 200, plus Γ sensitivity.
    let step = PI / 120.0;
    let mut kink_at_gamma_j = None;
    for g in [1.0, 0.5, 2.0, 4.0] {
        let cfg = ctx.config("fig2_free.json", &[format!("drive.Gamma_over_J={g}")]);
        let rows = free_sweep(&cfg).unwrap();
        let phis: Vec<f64> = rows.iter().map(|r| r.phi).collect();
        let js: Vec<f64> = rows.iter().map(|r| r.J_total).collect();
        let (phi, slope) = steepest_slope(&phis, &js).unwrap();
        ctx.supplementary.push(format!(
            "free L=200 Γ={g}J: max |dJ/dφ| = {slope:.3e} at φ = {phi:.4} (2π/3 = {:.4}, {} grid steps away)",
            2.0 * PI / 3.0,
            ((phi - 2.0 * PI / 3.0) / step).round()
        ));
        if g == 1.0 {
            kink_at_gamma_j = Some(phi);
        }
    }
    let kink = kink_at_gamma_j.unwrap();
    let kink_ok = (kink - 2.0 * PI / 3.0).abs() <= step + 1e-12;

    // Dilute limit at L = 3. At φ = π a one-particle mode misses both driven
    // sites, so free bosons have no unique steady state there.
    let mut dilute: f64 = 0.0;
    for phi in [0.0, PI / 2.0, 2.0 * PI / 3.0] {
        let spec = LadderSpec::new(3, 1.0, 1.0, phi).unwrap();
        let drive = DriveSpec::new(1.0, 0.05, 0.0).unwrap();
        let (hc, _) = ctx.solve(&format!("dilute φ={phi:.3}"), spec, drive, false);
        let free = free_currents(&steady_correlations(&spec, &drive).unwrap(), &spec).unwrap();
        let rel = (free.total_current - hc.total_current) / hc.total_current;
        ctx.supplementary.push(format!(
            "dilute L=3 φ={phi:.4}: hardcore J = {:.5e}, free J = {:.5e}, relative {:+.1}%",
            hc.total_current,
            free.total_current,
            100.0 * rel
        ));
        dilute = dilute.max(rel.abs());
    }

    Verdict {
        id: 8,
        pass: scalar <= 1e-12 && fock_diff <= 1e-6 && kink_ok && dilute <= 0.1,
        detail: format!(
            "scalar {scalar:.1e}; Fock (L=2, n̄₁=0.05, ≤5 bosons) {fock_diff:.1e}; L=200 Γ=J kink at φ = {kink:.4} \
             (2π/3 ± {step:.4}: {}); dilute L=3 (φ ∈ {{0, π/2, 2π/3}}) max relative deviation {:.1}%",
            if kink_ok { "yes" } else { "no" },
            100.0 * dilute
        ),
    }
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let keep = std::env::var_os("FLUXLADDER_ACCEPTANCE_OUT").map(PathBuf::from);
    let scratch = tempfile::tempdir().unwrap();
    let out = keep.unwrap_or_else(|| scratch.path().to_path_buf());
    let workers = std::env::var("FLUXLADDER_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(1);
    let mut ctx = Ctx {
        configs: root.join("configs"),
        out,
        l7: std::env::var("FLUXLADDER_ACCEPTANCE_L7").is_ok_and(|v| v == "1"),
        consistency: Consistency { min_eigenvalue: f64::INFINITY, ..Default::default() },
        supplementary: Vec::new(),
    };

    // `FLUXLADDER_ACCEPTANCE_ONLY=1,2,7` runs a subset; the rest are reported as not run.
    let only: Option<Vec<u32>> = std::env::var("FLUXLADDER_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));

    let start = Instant::now();
    let mut verdicts = Vec::new();
    let mut not_run = Vec::new();
    let criteria: [(u32, fn(&mut Ctx, usize) -> Verdict); 7] = [
        (1, |c, _| criterion_1(c)),
        (2, |c, _| criterion_2(c)),
        (4, |c, _| criterion_4(c)),
        (5, criterion_5),
        (6, |c, _| criterion_6(c)),
        (7, |c, _| criterion_7(c)),
        (8, |c, _| criterion_8(c)),
    ];
    for (id, f) in criteria {
        if !selected(id) {
            not_run.push(id);
            continue;
        }
        let t = Instant::now();
        verdicts.push(f(&mut ctx, workers));
        eprintln!("[criterion {id}: {:.1} s]", t.elapsed().as_secs_f64());
    }
    verdicts.push(ctx.consistency.verdict());
    verdicts.sort_by_key(|v| v.id);

    println!();
    let mut unexpected = Vec::new();
    for v in &verdicts {
        let expected = EXPECTED_FAILURES.contains(&v.id);
        let tag = match (v.pass, expected) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {tag} — {}", v.id, v.detail);
        if !v.pass && !expected {
            unexpected.push(v.id);
        }
    }
    for id in &not_run {
        println!("criterion {id}: NOT RUN");
    }
    for s in &ctx.supplementary {
        println!("  supplementary: {s}");
    }
    println!("acceptance finished in {:.0} s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
    if !not_run.is_empty() {
        eprintln!("criteria not run: {not_run:?}");
        std::process::exit(2);
    }
}
