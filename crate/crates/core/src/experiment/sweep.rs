//! Parameter sweeps written row by row to a resumable CSV.

use std::f64::consts::PI;
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ExperimentConfig, SweepAxis};
use super::table::{read_table, write_meta, write_table_atomic};
use crate::error::{Error, Result};
use crate::liouvillian::{BlockDensityMatrix, BlockLiouvillian};
use crate::observables::{controllability, ObservableOperators, ObservableReport, ENGINE_VERSION};
use crate::solver::{solve_steady_from, SteadyState};

pub const SWEEP_SCHEMA: &str = "fluxladder.sweep/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub phi: f64,
    #[serde(rename = "L")]
    pub rungs: usize,
    #[serde(rename = "K_over_J")]
    pub k_over_j: f64,
    #[serde(rename = "Gamma_over_J")]
    pub gamma_over_j: f64,
    pub nbar1: f64,
    #[serde(rename = "nbarL")]
    pub nbar_l: f64,
    pub nbar_av: f64,
    pub delta_nbar: f64,
    #[serde(rename = "J_total")]
    pub j_total: f64,
    #[serde(rename = "J_chiral")]
    pub j_chiral: f64,
    /// `⟨n_{1,1}⟩`, the left driven site.
    pub n_first: f64,
    /// `⟨n_{L,1}⟩`, the right driven site.
    pub n_last: f64,
    pub residual: f64,
    pub iterations: usize,
    pub method: String,
    pub wall_time_s: f64,
    /// Set when the row was copied from its `2π - φ` partner.
    pub mirror_of: Option<usize>,
    pub errors: String,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub workers: usize,
    pub force: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, force: false }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub path: PathBuf,
    pub rows: Vec<SweepRow>,
    /// φ sweeps without failures only.
    pub controllability: Option<f64>,
    pub failures: usize,
    /// True when a complete table with the same config already existed.
    pub skipped: bool,
}

/// One steady state with its report, as used by a sweep point.
pub fn solve_instance(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    x: f64,
    warm: Option<&BlockDensityMatrix>,
) -> Result<(ObservableReport, SteadyState)> {
    let phi = if axis == SweepAxis::Phi { x } else { cfg.model.phi };
    let spec = cfg.ladder(phi)?;
    let drive = cfg.drive_at(axis, x)?;
    let lop = BlockLiouvillian::new(spec, drive)?;
    let steady = solve_steady_from(&lop, &cfg.solver, warm)?;
    let mut report = ObservableOperators::new(&spec)?.report(&steady.rho, &drive, cfg.solver.tolerance)?;
    report.solver = Some(steady.diagnostics.clone());
    Ok((report, steady))
}

fn row_for(cfg: &ExperimentConfig, axis: SweepAxis, index: usize, x: f64, out: &Result<ObservableReport>) -> SweepRow {
    let phi = if axis == SweepAxis::Phi { x } else { cfg.model.phi };
    let drive = cfg.drive_at(axis, x).expect("validated grid");
    let mut row = SweepRow {
        index,
        phi,
        rungs: cfg.model.rungs,
        k_over_j: cfg.model.k_over_j,
        gamma_over_j: drive.gamma,
        nbar1: drive.nbar_left,
        nbar_l: drive.nbar_right,
        nbar_av: drive.nbar_avg(),
        delta_nbar: drive.delta_nbar(),
        j_total: f64::NAN,
        j_chiral: f64::NAN,
        n_first: f64::NAN,
        n_last: f64::NAN,
        residual: f64::NAN,
        iterations: 0,
        method: String::new(),
        wall_time_s: f64::NAN,
        mirror_of: None,
        errors: String::new(),
    };
    match out {
        Ok(r) => {
            row.j_total = r.total_current;
            row.j_chiral = r.chiral_current;
            row.n_first = r.densities[0][0];
            row.n_last = r.densities[r.densities.len() - 1][0];
            if let Some(d) = &r.solver {
                row.residual = d.residual;
                row.iterations = d.iterations;
                row.method = serde_json::to_value(d.method)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default();
                row.wall_time_s = d.wall_time_s;
            }
        }
        Err(e) => row.errors = e.to_string().replace(['\n', '\r'], " "),
    }
    row
}

/// Index of the grid point at `2π - φ`, if any.
fn mirror_partner(grid: &[f64], k: usize) -> Option<usize> {
    let target = 2.0 * PI - grid[k];
    grid.iter().position(|&p| (p - target).abs() <= 1e-12 * (1.0 + target.abs()))
}

fn check_existing(path: &Path, cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, bool)> {
    let (meta, rows): (_, Vec<SweepRow>) = read_table(path)?;
    let same = meta.schema.as_deref() == Some(SWEEP_SCHEMA)
        && meta.engine.as_deref() == Some(ENGINE_VERSION)
        && meta.config.as_ref() == Some(&cfg.to_value());
    if !same {
        return Err(Error::Config(format!(
            "{} holds a different sweep (config, schema or engine differ); pass --force to overwrite",
            path.display()
        )));
    }
    Ok((rows, meta.footer.is_some()))
}

fn footer_for(rows: &[SweepRow], axis: SweepAxis) -> (serde_json::Value, Option<f64>) {
    let failures = rows.iter().filter(|r| r.failed()).count();
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.phi, r.j_total)).collect();
    let t = if axis == SweepAxis::Phi && failures == 0 { controllability(&samples).ok() } else { None };
    let (lo, hi) = rows
        .iter()
        .filter(|r| !r.failed())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.j_total), b.max(r.j_total)));
    let mut footer = json!({"axis": axis.name(), "points": rows.len(), "failures": failures});
    if failures < rows.len() {
        footer["J_min"] = json!(lo);
        footer["J_max"] = json!(hi);
    }
    if let Some(t) = t {
        footer["controllability"] = json!(t);
    }
    (footer, t)
}

/// Runs `cfg.sweep` into `path`. Completed tables with an identical config
/// are left alone unless `force`; partial ones are resumed, retrying failed
/// points. Per-point failures land in the `errors` column.
pub fn run_sweep(cfg: &ExperimentConfig, path: &Path, opts: &RunOptions) -> Result<SweepOutcome> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("config has no sweep section".into()))?;
    let axis = sweep.axis;
    let grid = cfg.sweep_grid()?;
    let config_value = cfg.to_value();

    let mut done: Vec<Option<SweepRow>> = vec![None; grid.len()];
    let exists = path.exists();
    if exists && !opts.force {
        let (rows, complete) = check_existing(path, cfg)?;
        if complete {
            info!("{} is complete; nothing to do", path.display());
            let (_, t) = footer_for(&rows, axis);
            let failures = rows.iter().filter(|r| r.failed()).count();
            return Ok(SweepOutcome { path: path.into(), rows, controllability: t, failures, skipped: true });
        }
        for r in rows {
            if r.index < grid.len() && !r.failed() && r.mirror_of.is_none() {
                let k = r.index;
                done[k] = Some(r);
            }
        }
        info!("resuming {}: {} of {} points present", path.display(), done.iter().flatten().count(), grid.len());
    }

    // Points to solve; with mirroring only the φ ≤ π half of each pair.
    let primary: Vec<usize> = (0..grid.len())
        .filter(|&k| !(sweep.mirror && grid[k] > PI + 1e-12 && mirror_partner(&grid, k).is_some()))
        .collect();
    let todo: Vec<usize> = primary.iter().copied().filter(|&k| done[k].is_none()).collect();

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = if exists && !opts.force {
        let mut f = OpenOptions::new().read(true).append(true).open(path)?;
        // Terminate a line cut short by an interrupted run.
        let len = f.seek(SeekFrom::End(0))?;
        if len > 0 {
            let mut last = [0u8; 1];
            f.seek(SeekFrom::Start(len - 1))?;
            f.read_exact(&mut last)?;
            if last[0] != b'\n' {
                f.write_all(b"\n")?;
            }
        }
        f
    } else {
        let mut f = std::fs::File::create(path)?;
        write_meta(&mut f, SWEEP_SCHEMA, &config_value, None)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut f);
        w.write_record(sweep_header())?;
        w.flush()?;
        drop(w);
        f
    };

    let workers = opts.workers.max(1).min(todo.len().max(1));
    let chunk = todo.len().div_ceil(workers).max(1);
    let (tx, rx) = mpsc::channel::<SweepRow>();
    let mut fresh: Vec<SweepRow> = Vec::with_capacity(todo.len());
    let grid_ref = &grid;
    std::thread::scope(|scope| -> Result<()> {
        for part in todo.chunks(chunk) {
            let tx = tx.clone();
            let grid = grid_ref;
            scope.spawn(move || {
                let mut warm: Option<BlockDensityMatrix> = None;
                for &k in part {
                    let x = grid[k];
                    let res = solve_instance(cfg, axis, x, if sweep.warm_start { warm.as_ref() } else { None });
                    let (report, state) = match res {
                        Ok((r, s)) => (Ok(r), Some(s.rho)),
                        Err(e) => {
                            warn!("{} = {x}: {e}", axis.name());
                            (Err(e), None)
                        }
                    };
                    warm = state;
                    if tx.send(row_for(cfg, axis, k, x, &report)).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut file);
        for row in rx {
            info!("{} = {:.6}: J = {:.10e} {}", axis.name(), grid_ref[row.index], row.j_total, row.errors);
            w.serialize(&row)?;
            w.flush()?;
            fresh.push(row);
        }
        Ok(())
    })?;
    drop(file);

    for r in fresh {
        let k = r.index;
        done[k] = Some(r);
    }
    if sweep.mirror {
        for k in 0..grid.len() {
            if done[k].is_none() {
                if let Some(src) = mirror_partner(&grid, k).and_then(|p| done[p].clone()) {
                    let mut r = src;
                    r.mirror_of = Some(r.index);
                    r.index = k;
                    r.phi = grid[k];
                    r.wall_time_s = 0.0;
                    done[k] = Some(r);
                }
            }
        }
    }
    let rows: Vec<SweepRow> = done.into_iter().map(|r| r.expect("every point solved or mirrored")).collect();
    let (footer, t) = footer_for(&rows, axis);
    write_table_atomic(path, SWEEP_SCHEMA, &config_value, None, &rows, Some(&footer))?;
    let failures = rows.iter().filter(|r| r.failed()).count();
    Ok(SweepOutcome { path: path.into(), rows, controllability: t, failures, skipped: false })
}

fn sweep_header() -> Vec<&'static str> {
    vec![
        "index",
        "phi",
        "L",
        "K_over_J",
        "Gamma_over_J",
        "nbar1",
        "nbarL",
        "nbar_av",
        "delta_nbar",
        "J_total",
        "J_chiral",
        "n_first",
        "n_last",
        "residual",
        "iterations",
        "method",
        "wall_time_s",
        "mirror_of",
        "errors",
    ]
}
