//! JSON experiment configuration with dot-path overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{DriveSpec, LadderSpec};
use crate::solver::SolverConfig;

pub const CONFIG_SCHEMA: &str = "fluxladder.config/1";

/// Points on the default controllability grid, `[0, 2π)`.
pub const DEFAULT_PHI_POINTS: usize = 61;
/// Points on the default free-boson grid, `[0, π]`.
pub const DEFAULT_FREE_POINTS: usize = 121;

fn schema_default() -> String {
    CONFIG_SCHEMA.to_string()
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_default")]
    pub schema: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<FreeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controllability: Option<ControllabilityConfig>,
}

/// Energies in units of the leg hopping `J`, which is fixed to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub rungs: usize,
    #[serde(rename = "K_over_J", default = "one")]
    pub k_over_j: f64,
    /// Flux per plaquette for single solves; sweeps override it.
    #[serde(default)]
    pub phi: f64,
}

/// Either `nbar1`/`nbarL`, or `nbar_av`/`delta_nbar`. A lone `delta_nbar`
/// means `nbar1 = delta_nbar`, `nbarL = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(rename = "Gamma_over_J", default = "one")]
    pub gamma_over_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar1: Option<f64>,
    #[serde(rename = "nbarL", default, skip_serializing_if = "Option::is_none")]
    pub nbar_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar_av: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_nbar: Option<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self { gamma_over_j: 1.0, nbar1: None, nbar_l: None, nbar_av: None, delta_nbar: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// File stem; defaults to the subcommand name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), name: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Phi,
    Nbar1,
    NbarAv,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Phi => "phi",
            SweepAxis::Nbar1 => "nbar1",
            SweepAxis::NbarAv => "nbar_av",
        }
    }
}

/// Explicit values, or `points` evenly spaced values from `start` to `stop`
/// (`stop` included only with `endpoint`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        endpoint: bool,
    },
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, points: usize, endpoint: bool) -> Self {
        Grid::Range { start, stop, points, endpoint }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Values(ref v) => v.clone(),
            Grid::Range { start, stop, points, endpoint } => {
                let div = if endpoint { points.saturating_sub(1).max(1) } else { points.max(1) };
                let step = (stop - start) / div as f64;
                (0..points).map(|k| start + step * k as f64).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<Vec<f64>> {
        let v = self.values();
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid contains a non-finite value".into()));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Required for density axes; the φ axis defaults to 61 points on `[0, 2π)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    /// φ axis only: solve `φ ≤ π` and copy `J(2π - φ) = J(φ)` to the partner point.
    #[serde(default)]
    pub mirror: bool,
    /// Seed each solve with the previous point's state in the same worker.
    #[serde(default = "yes")]
    pub warm_start: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub particles: Vec<usize>,
    pub phis: Vec<f64>,
    #[serde(default = "spectrum_cap")]
    pub cap: usize,
}

fn spectrum_cap() -> usize {
    crate::spectra::DEFAULT_SPECTRUM_CAP
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeConfig {
    /// Defaults to 121 points on `[0, π]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

/// One φ sweep per `nbar_av`, all at the configured `delta_nbar`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllabilityConfig {
    pub nbar_av: Vec<f64>,
}

/// Sets `a.b.c = value` in a JSON tree; `value` is parsed as JSON and falls
/// back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key.path=value")))?;
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override path '{path}' has an empty component")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override '{path}': '{key}' is not inside an object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override '{path}' does not point into an object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_value(value: Value, overrides: &[String]) -> Result<Self> {
        let mut value = value;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    /// Minimal config around a ladder and drive, mostly for programmatic use.
    pub fn new(rungs: usize, k_over_j: f64, phi: f64, drive: DriveConfig) -> Self {
        Self {
            schema: schema_default(),
            model: ModelConfig { rungs, k_over_j, phi },
            drive,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            sweep: None,
            spectrum: None,
            free: None,
            controllability: None,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!("unsupported schema '{}', expected '{CONFIG_SCHEMA}'", self.schema)));
        }
        self.ladder(self.model.phi).map_err(as_config)?;
        self.solver.validate().map_err(as_config)?;
        if let Some(s) = &self.sweep {
            let grid = self.sweep_grid()?;
            match s.axis {
                SweepAxis::Phi => {}
                SweepAxis::Nbar1 => {
                    if self.drive.nbar_l.is_none() {
                        return Err(Error::Config("an nbar1 sweep needs drive.nbarL".into()));
                    }
                    if s.grid.is_none() {
                        return Err(Error::Config("an nbar1 sweep needs sweep.grid".into()));
                    }
                }
                SweepAxis::NbarAv => {
                    if self.drive.delta_nbar.is_none() {
                        return Err(Error::Config("an nbar_av sweep needs drive.delta_nbar".into()));
                    }
                    if s.grid.is_none() {
                        return Err(Error::Config("an nbar_av sweep needs sweep.grid".into()));
                    }
                }
            }
            if s.mirror && s.axis != SweepAxis::Phi {
                return Err(Error::Config("sweep.mirror applies to phi sweeps only".into()));
            }
            for &x in &grid {
                self.drive_at(s.axis, x).map_err(as_config)?;
            }
        } else if self.drive != DriveConfig::default() {
            // Spectrum-only configs need no drive.
            self.drive_spec().map_err(as_config)?;
        }
        if let Some(sp) = &self.spectrum {
            if sp.particles.is_empty() || sp.phis.is_empty() {
                return Err(Error::Config("spectrum needs at least one particle number and one phi".into()));
            }
            if let Some(&n) = sp.particles.iter().find(|&&n| n > 2 * self.model.rungs) {
                return Err(Error::Config(format!("spectrum sector N={n} exceeds 2L")));
            }
        }
        if let Some(f) = &self.free {
            if let Some(g) = &f.grid {
                g.validate()?;
            }
        }
        if let Some(c) = &self.controllability {
            if self.drive.delta_nbar.is_none() {
                return Err(Error::Config("controllability needs drive.delta_nbar".into()));
            }
            if c.nbar_av.is_empty() {
                return Err(Error::Config("controllability.nbar_av is empty".into()));
            }
            for &a in &c.nbar_av {
                let mut d = self.drive.clone();
                d.nbar_av = Some(a);
                resolve_drive(&d).map_err(as_config)?;
            }
        }
        Ok(())
    }

    pub fn ladder(&self, phi: f64) -> Result<LadderSpec> {
        LadderSpec::new(self.model.rungs, 1.0, self.model.k_over_j, phi)
    }

    pub fn drive_spec(&self) -> Result<DriveSpec> {
        resolve_drive(&self.drive)
    }

    /// Drive with the sweep variable set to `x` (φ leaves the drive alone).
    pub fn drive_at(&self, axis: SweepAxis, x: f64) -> Result<DriveSpec> {
        let mut d = self.drive.clone();
        match axis {
            SweepAxis::Phi => {}
            SweepAxis::Nbar1 => d.nbar1 = Some(x),
            SweepAxis::NbarAv => d.nbar_av = Some(x),
        }
        resolve_drive(&d)
    }

    pub fn sweep_grid(&self) -> Result<Vec<f64>> {
        let s = self.sweep.as_ref().ok_or_else(|| Error::Config("config has no sweep section".into()))?;
        match &s.grid {
            Some(g) => g.validate(),
            None => Grid::linspace(0.0, 2.0 * PI, DEFAULT_PHI_POINTS, false).validate(),
        }
    }

    pub fn free_grid(&self) -> Result<Vec<f64>> {
        match self.free.as_ref().and_then(|f| f.grid.as_ref()) {
            Some(g) => g.validate(),
            None => Grid::linspace(0.0, PI, DEFAULT_FREE_POINTS, true).validate(),
        }
    }

    pub fn output_path(&self, default_stem: &str, extension: &str) -> PathBuf {
        let stem = self.output.name.as_deref().unwrap_or(default_stem);
        self.output.directory.join(format!("{stem}.{extension}"))
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

pub fn resolve_drive(d: &DriveConfig) -> Result<DriveSpec> {
    let explicit = d.nbar1.is_some() || d.nbar_l.is_some();
    let averaged = d.nbar_av.is_some() || d.delta_nbar.is_some();
    if explicit && averaged {
        return Err(Error::Config("give either nbar1/nbarL or nbar_av/delta_nbar, not both".into()));
    }
    match (d.nbar1, d.nbar_l, d.nbar_av, d.delta_nbar) {
        (Some(a), Some(b), _, _) => DriveSpec::new(d.gamma_over_j, a, b),
        (_, _, Some(av), Some(delta)) => DriveSpec::from_average(d.gamma_over_j, av, delta),
        (_, _, None, Some(delta)) => DriveSpec::new(d.gamma_over_j, delta, 0.0),
        _ => Err(Error::Config(
            "drive needs nbar1 and nbarL, or nbar_av and delta_nbar (or delta_nbar alone)".into(),
        )),
    }
}
