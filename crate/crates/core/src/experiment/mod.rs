//! Config-driven runs behind the command-line tool: single solves, sweeps,
//! spectra, free-boson references and oracle cross-checks.

pub mod config;
pub mod oracle;
pub mod sweep;
pub mod table;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::free::{free_currents, steady_correlations, steepest_slope};
use crate::observables::{ObservableReport, ENGINE_VERSION};
use crate::spectra::{sector_spectrum_capped, SPECTRUM_COLUMNS};

pub use config::{ExperimentConfig, Grid, SweepAxis};
pub use oracle::{cross_check, OracleComparison};
pub use sweep::{run_sweep, solve_instance, RunOptions, SweepOutcome, SweepRow};

pub const STEADY_SCHEMA: &str = "fluxladder.steady/1";
pub const SECTORS_SCHEMA: &str = "fluxladder.sectors/1";
pub const SPECTRUM_SCHEMA: &str = "fluxladder.spectrum/1";
pub const FREE_SCHEMA: &str = "fluxladder.free/1";
pub const CONTROLLABILITY_SCHEMA: &str = "fluxladder.controllability/1";

/// Largest block-vs-full discrepancy accepted by the oracle run.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SteadyRun {
    pub report: ObservableReport,
    pub oracle: Option<OracleComparison>,
    pub report_path: PathBuf,
    pub sectors_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    #[serde(rename = "N")]
    pub particles: usize,
    pub weight: f64,
    #[serde(rename = "J_N")]
    pub current: f64,
    /// `J_N / weight`; empty when the block carries no weight.
    #[serde(rename = "J_N_normalized")]
    pub normalized: Option<f64>,
}

/// One solve; writes `<stem>.json` (report with the resolved config) and
/// `<stem>_sectors.csv`. With `cross_check` (L <= 3) the dense oracle is
/// compared as well.
pub fn run_steady(cfg: &ExperimentConfig, cross_check: bool) -> Result<SteadyRun> {
    let (report, _) = solve_instance(cfg, SweepAxis::Phi, cfg.model.phi, None)?;
    let oracle = if cross_check {
        Some(oracle::cross_check(&cfg.ladder(cfg.model.phi)?, &cfg.drive_spec()?, &cfg.solver)?)
    } else {
        None
    };
    let report_path = cfg.output_path("steady", "json");
    let mut doc = serde_json::to_value(&report)?;
    doc["file_schema"] = json!(STEADY_SCHEMA);
    doc["config"] = cfg.to_value();
    if let Some(o) = &oracle {
        doc["oracle"] = serde_json::to_value(o)?;
    }
    table::write_atomic(&report_path, |f| {
        serde_json::to_writer_pretty(&mut *f, &doc)?;
        use std::io::Write;
        writeln!(f)?;
        Ok(())
    })?;

    let rows: Vec<SectorRow> = (0..report.block_weights.len())
        .map(|n| SectorRow {
            particles: n,
            weight: report.block_weights[n],
            current: report.sector_currents[n],
            normalized: report.sector_currents_normalized[n],
        })
        .collect();
    let stem = cfg.output.name.clone().unwrap_or_else(|| "steady".into());
    let sectors_path = cfg.output.directory.join(format!("{stem}_sectors.csv"));
    let job = json!({"sector_bond": report.sector_bond});
    table::write_table_atomic(&sectors_path, SECTORS_SCHEMA, &cfg.to_value(), Some(&job), &rows, None)?;
    Ok(SteadyRun { report, oracle, report_path, sectors_path })
}

/// Oracle comparison at the configured point; L <= 3 only.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<(OracleComparison, PathBuf)> {
    let cmp = oracle::cross_check(&cfg.ladder(cfg.model.phi)?, &cfg.drive_spec()?, &cfg.solver)?;
    let path = cfg.output_path("oracle", "json");
    let doc = json!({
        "file_schema": "fluxladder.oracle/1",
        "engine_version": ENGINE_VERSION,
        "config": cfg.to_value(),
        "comparison": cmp,
        "discrepancy": cmp.discrepancy(),
        "tolerance": ORACLE_TOLERANCE,
    });
    table::write_atomic(&path, |f| Ok(serde_json::to_writer_pretty(&mut *f, &doc)?))?;
    Ok((cmp, path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SpectrumRow {
    #[serde(rename = "N")]
    particles: usize,
    index: usize,
    #[serde(rename = "energy_over_J")]
    energy: f64,
}

/// One CSV per `(N, φ)`: `<stem>_L<L>_N<N>_phi<k>.csv`, `k` indexing
/// `spectrum.phis`. Jobs run in parallel on the current rayon pool.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let sp = cfg.spectrum.as_ref().ok_or_else(|| Error::Config("config has no spectrum section".into()))?;
    let stem = cfg.output.name.clone().unwrap_or_else(|| "spectrum".into());
    let jobs: Vec<(usize, usize, f64)> = sp
        .particles
        .iter()
        .flat_map(|&n| sp.phis.iter().enumerate().map(move |(k, &phi)| (n, k, phi)))
        .collect();
    let value = cfg.to_value();
    debug_assert_eq!(SPECTRUM_COLUMNS, ["N", "index", "energy_over_J"]);
    jobs.par_iter()
        .map(|&(n, k, phi)| {
            let s = sector_spectrum_capped(&cfg.ladder(phi)?, n, sp.cap)?;
            let rows: Vec<SpectrumRow> = s
                .energies
                .iter()
                .enumerate()
                .map(|(i, &e)| SpectrumRow { particles: n, index: i, energy: e })
                .collect();
            let path = cfg.output.directory.join(format!("{stem}_L{}_N{n}_phi{k}.csv", cfg.model.rungs));
            let job = json!({"N": n, "phi": phi, "phi_index": k, "dim": s.dim()});
            table::write_table_atomic(&path, SPECTRUM_SCHEMA, &value, Some(&job), &rows, None)?;
            Ok(path)
        })
        .collect()
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeRow {
    pub phi: f64,
    pub J_total: f64,
    pub J_chiral: f64,
    pub L: usize,
    pub K_over_J: f64,
    pub nbar1: f64,
    pub nbarL: f64,
}

#[derive(Clone, Debug)]
pub struct FreeOutcome {
    pub path: PathBuf,
    pub rows: Vec<FreeRow>,
    /// Grid point of largest `|dJ/dφ|` (centred differences).
    pub kink_phi: Option<f64>,
    pub max_slope: Option<f64>,
}

pub fn free_sweep(cfg: &ExperimentConfig) -> Result<Vec<FreeRow>> {
    let drive = cfg.drive_spec()?;
    cfg.free_grid()?
        .par_iter()
        .map(|&phi| {
            let spec = cfg.ladder(phi)?;
            let j = free_currents(&steady_correlations(&spec, &drive)?, &spec)?;
            Ok(FreeRow {
                phi,
                J_total: j.total_current,
                J_chiral: j.chiral_current,
                L: spec.rungs,
                K_over_J: spec.rung_hopping,
                nbar1: drive.nbar_left,
                nbarL: drive.nbar_right,
            })
        })
        .collect()
}

pub fn run_free(cfg: &ExperimentConfig) -> Result<FreeOutcome> {
    let rows = free_sweep(cfg)?;
    let phis: Vec<f64> = rows.iter().map(|r| r.phi).collect();
    let js: Vec<f64> = rows.iter().map(|r| r.J_total).collect();
    let kink = steepest_slope(&phis, &js);
    let path = cfg.output_path("free", "csv");
    let mut footer = json!({"points": rows.len(), "Gamma_over_J": cfg.drive.gamma_over_j});
    if let Some((p, s)) = kink {
        footer["kink_phi"] = json!(p);
        footer["max_abs_slope"] = json!(s);
    }
    table::write_table_atomic(&path, FREE_SCHEMA, &cfg.to_value(), None, &rows, Some(&footer))?;
    Ok(FreeOutcome { path, rows, kink_phi: kink.map(|k| k.0), max_slope: kink.map(|k| k.1) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityRow {
    pub nbar_av: f64,
    pub delta_nbar: f64,
    #[serde(rename = "T")]
    pub controllability: Option<f64>,
    #[serde(rename = "J_min")]
    pub j_min: f64,
    #[serde(rename = "J_max")]
    pub j_max: f64,
    pub points: usize,
    pub failures: usize,
    pub sweep_file: String,
}

/// One φ sweep per `controllability.nbar_av` (each resumable on its own)
/// and a summary table `<stem>.csv`.
pub fn run_controllability(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(Vec<ControllabilityRow>, PathBuf)> {
    let c = cfg
        .controllability
        .as_ref()
        .ok_or_else(|| Error::Config("config has no controllability section".into()))?;
    let stem = cfg.output.name.clone().unwrap_or_else(|| "controllability".into());
    let mut rows = Vec::new();
    for &av in &c.nbar_av {
        let mut sub = cfg.clone();
        sub.controllability = None;
        sub.drive.nbar_av = Some(av);
        let mut sw = sub.sweep.clone().unwrap_or(config::SweepConfig {
            axis: SweepAxis::Phi,
            grid: None,
            mirror: false,
            warm_start: true,
        });
        sw.axis = SweepAxis::Phi;
        sub.sweep = Some(sw);
        sub.output.name = Some(format!("{stem}_nbar_av_{av}"));
        sub.validate()?;
        let path = sub.output_path("sweep", "csv");
        let out = run_sweep(&sub, &path, opts)?;
        let ok: Vec<f64> = out.rows.iter().filter(|r| !r.failed()).map(|r| r.j_total).collect();
        rows.push(ControllabilityRow {
            nbar_av: av,
            delta_nbar: cfg.drive.delta_nbar.unwrap_or(f64::NAN),
            controllability: out.controllability,
            j_min: ok.iter().copied().fold(f64::NAN, f64::min),
            j_max: ok.iter().copied().fold(f64::NAN, f64::max),
            points: out.rows.len(),
            failures: out.failures,
            sweep_file: file_name(&path),
        });
    }
    let path = cfg.output_path("controllability", "csv");
    table::write_table_atomic(&path, CONTROLLABILITY_SCHEMA, &cfg.to_value(), None, &rows, None)?;
    Ok((rows, path))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

