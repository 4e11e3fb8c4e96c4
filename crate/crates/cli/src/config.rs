//! Run configuration files.
//!
//! A file names an optional preset, a table of experiment overrides, and a
//! list of labelled curves, each with its own overrides. Overrides are merged
//! key by key into the preset before the result is parsed as an
//! `ExperimentConfig`, so unknown keys fail at the level they occur.

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dam_core::evaluation::{mmwave_28ghz, ExperimentConfig, PaprSettings, MMWAVE_28GHZ};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub schema_version: u32,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub experiment: toml::Table,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub ber: Option<BerSpec>,
    #[serde(default)]
    pub papr: Option<PaprSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub label: String,
    #[serde(default)]
    pub experiment: toml::Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Transmit antennas.
    #[serde(rename = "m_t")]
    Antennas,
    /// Subcarriers (the CP length is left as configured).
    #[serde(rename = "k")]
    Subcarriers,
}

impl SweepVariable {
    pub fn apply(self, cfg: &mut ExperimentConfig, value: usize) {
        match self {
            SweepVariable::Antennas => cfg.channel.m_t = value,
            SweepVariable::Subcarriers => cfg.ofdm.k = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerSpec {
    pub snr_db: Vec<f64>,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaprSpec {
    pub thresholds_db: Vec<f64>,
    /// OFDM symbols per realization.
    pub frames: usize,
    #[serde(default = "one")]
    pub oversample: usize,
    pub order: usize,
}

fn one() -> usize {
    1
}

impl PaprSpec {
    pub fn settings(&self) -> PaprSettings {
        PaprSettings { frames: self.frames, oversample: self.oversample, order: self.order }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub experiment: ExperimentConfig,
}

/// A configuration file with presets, overrides and command-line flags
/// applied. This is what a manifest records and what commands consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub curves: Vec<Curve>,
    pub sweep: Option<SweepSpec>,
    pub ber: Option<BerSpec>,
    pub papr: Option<PaprSpec>,
}

/// Command-line overrides applied after the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub oversample_papr: Option<usize>,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<ResolvedRun> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: RunFile =
        toml::from_str(&text).map_err(|e| UsageError(format!("parsing {}: {e}", path.display())))?;
    resolve(file, overrides)
}

pub fn preset(name: &str) -> Result<toml::Table> {
    match name {
        MMWAVE_28GHZ => Ok(toml::Table::try_from(mmwave_28ghz())?),
        other => bail!(UsageError(format!("unknown preset {other:?} (known: {MMWAVE_28GHZ})"))),
    }
}

pub fn resolve(file: RunFile, overrides: &Overrides) -> Result<ResolvedRun> {
    if file.schema_version != SCHEMA_VERSION {
        bail!(UsageError(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let mut base = match &file.preset {
        Some(name) => preset(name)?,
        None => toml::Table::new(),
    };
    merge(&mut base, &file.experiment);

    let specs = if file.curves.is_empty() {
        vec![CurveSpec { label: "default".into(), experiment: toml::Table::new() }]
    } else {
        file.curves
    };
    let mut seen = HashSet::new();
    let mut curves = Vec::with_capacity(specs.len());
    for spec in specs {
        let valid = !spec.label.is_empty()
            && spec.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid {
            bail!(UsageError(format!("curve label {:?} must be non-empty [A-Za-z0-9_-]", spec.label)));
        }
        if !seen.insert(spec.label.clone()) {
            bail!(UsageError(format!("duplicate curve label {:?}", spec.label)));
        }
        let mut table = base.clone();
        merge(&mut table, &spec.experiment);
        let mut experiment: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| UsageError(format!("curve {:?}: {e}", spec.label)))?;
        if let Some(seed) = overrides.seed {
            experiment.channel.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            experiment.trials = trials;
        }
        curves.push(Curve { label: spec.label, experiment });
    }

    let mut papr = file.papr;
    if let (Some(p), Some(factor)) = (papr.as_mut(), overrides.oversample_papr) {
        p.oversample = factor;
    }
    Ok(ResolvedRun { curves, sweep: file.sweep, ber: file.ber, papr })
}

/// Recursive key-wise merge; tables merge, everything else is replaced.
fn merge(dst: &mut toml::Table, src: &toml::Table) {
    for (key, value) in src {
        match (dst.get_mut(key), value) {
            (Some(toml::Value::Table(d)), toml::Value::Table(s)) => merge(d, s),
            _ => {
                dst.insert(key.clone(), value.clone());
            }
        }
    }
}
