use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluxladder::experiment::{self, ExperimentConfig, RunOptions, ORACLE_TOLERANCE};

/// Worker count when neither `--threads` nor this variable is given.
const THREADS_ENV: &str = "FLUXLADDER_THREADS";

/// Exit code when a sweep finished but some points failed.
const EXIT_POINT_FAILURES: u8 = 9;
/// Exit code when an oracle comparison exceeds its tolerance.
const EXIT_ORACLE_MISMATCH: u8 = 10;

#[derive(Parser)]
#[command(name = "fluxladder", version, about = "Steady states of a boundary-driven hardcore-boson flux ladder")]
struct Cli {
    /// Worker threads (overrides FLUXLADDER_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config field, e.g. `--set model.L=4` (repeatable).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory (same as `--set output.directory=...`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one steady state; writes a JSON report and a sector table.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Compare with the dense Fock-space Lindbladian (L <= 3).
        #[arg(long)]
        cross_check: bool,
    },
    /// Sweep phi, nbar1 or nbar_av; resumable CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Recompute even if a complete table with this config exists.
        #[arg(long)]
        force: bool,
    },
    /// Full spectra of the sector Hamiltonians.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Free-boson currents over a phi grid.
    Free {
        #[command(flatten)]
        common: Common,
    },
    /// Block engine against the dense Lindbladian (L <= 3).
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Controllability for each configured nbar_av.
    Controllability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        force: bool,
    },
}

fn load(common: &Common) -> fluxladder::Result<ExperimentConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(dir) = &common.out {
        overrides.push(format!("output.directory={}", serde_json::to_string(dir)?));
    }
    ExperimentConfig::load(&common.config, &overrides)
}

fn workers(cli: &Cli) -> usize {
    cli.threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run(cli: &Cli) -> fluxladder::Result<u8> {
    let threads = workers(cli);
    // Ignore the error if a pool was already installed.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    match &cli.command {
        Command::Steady { common, cross_check } => {
            let cfg = load(common)?;
            let run = experiment::run_steady(&cfg, *cross_check)?;
            let r = &run.report;
            println!("L = {}, K/J = {}, phi = {:.6}", r.spec.rungs, r.spec.rung_hopping, r.spec.flux);
            println!(
                "Gamma/J = {}, nbar1 = {}, nbarL = {}",
                r.drive.gamma, r.drive.nbar_left, r.drive.nbar_right
            );
            println!("total current   {:+.12e}", r.total_current);
            println!("chiral current  {:+.12e}", r.chiral_current);
            println!("boundary n      {:.12} {:.12}", r.densities[0][0], r.densities[r.densities.len() - 1][0]);
            println!("continuity      {:.3e}", r.continuity.max());
            if let Some(d) = &r.solver {
                println!(
                    "solver          {:?}, {} iterations, residual {:.3e}, {:.2} s",
                    d.method, d.iterations, d.residual, d.wall_time_s
                );
            }
            println!("report          {}", run.report_path.display());
            println!("sectors         {}", run.sectors_path.display());
            if let Some(o) = &run.oracle {
                let ok = o.discrepancy() <= ORACLE_TOLERANCE;
                println!("oracle agreement {:.3e} ({})", o.discrepancy(), if ok { "ok" } else { "MISMATCH" });
                if !ok {
                    return Ok(EXIT_ORACLE_MISMATCH);
                }
            }
            Ok(0)
        }
        Command::Sweep { common, force } => {
            let cfg = load(common)?;
            let path = cfg.output_path("sweep", "csv");
            let out = experiment::run_sweep(&cfg, &path, &RunOptions { workers: threads, force: *force })?;
            if out.skipped {
                println!("{} already complete (use --force to recompute)", path.display());
            }
            println!("{} points, {} failed -> {}", out.rows.len(), out.failures, path.display());
            if let Some(t) = out.controllability {
                println!("controllability T = {t:.6e}");
            }
            Ok(if out.failures > 0 { EXIT_POINT_FAILURES } else { 0 })
        }
        Command::Spectrum { common } => {
            let cfg = load(common)?;
            for p in experiment::run_spectrum(&cfg)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Free { common } => {
            let cfg = load(common)?;
            let out = experiment::run_free(&cfg)?;
            println!("{} points -> {}", out.rows.len(), out.path.display());
            if let (Some(p), Some(s)) = (out.kink_phi, out.max_slope) {
                println!("max |dJ/dphi| = {s:.6e} at phi = {p:.6}");
            }
            Ok(0)
        }
        Command::Oracle { common } => {
            let cfg = load(common)?;
            let (cmp, path) = experiment::run_oracle(&cfg)?;
            println!("trace-norm difference   {:.3e}", cmp.trace_norm_difference);
            println!("density difference      {:.3e}", cmp.max_density_difference);
            println!("current difference      {:.3e}", cmp.max_current_difference);
            println!("number coherences       {:.3e}", cmp.max_number_coherence);
            println!("max discrepancy         {:.3e} (tolerance {ORACLE_TOLERANCE:.0e}) -> {}", cmp.discrepancy(), path.display());
            Ok(if cmp.discrepancy() <= ORACLE_TOLERANCE { 0 } else { EXIT_ORACLE_MISMATCH })
        }
        Command::Controllability { common, force } => {
            let cfg = load(common)?;
            let (rows, path) = experiment::run_controllability(&cfg, &RunOptions { workers: threads, force: *force })?;
            let mut failures = 0;
            for r in &rows {
                failures += r.failures;
                match r.controllability {
                    Some(t) => println!("nbar_av = {:.4}: T = {t:.6e}", r.nbar_av),
                    None => println!("nbar_av = {:.4}: T undefined ({} failed points)", r.nbar_av, r.failures),
                }
            }
            println!("-> {}", path.display());
            Ok(if failures > 0 { EXIT_POINT_FAILURES } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
