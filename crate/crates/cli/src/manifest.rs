//! Run manifests: the fully resolved inputs of a command plus the files it
//! wrote. Replaying a manifest reruns the command sequentially.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ResolvedRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    SeSweep,
    BerSweep,
    Papr,
    SingleCarrier,
    Validate,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::SeSweep => "se-sweep",
            CommandKind::BerSweep => "ber-sweep",
            CommandKind::Papr => "papr",
            CommandKind::SingleCarrier => "single-carrier",
            CommandKind::Validate => "validate",
        }
    }

    /// Prefix of the files a command writes.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Parameters {
    Run(ResolvedRun),
    Validate { zf_perturbation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: CommandKind,
    pub artifact_version: String,
    /// Configuration file the run was resolved from; `None` for validate.
    pub config_path: Option<PathBuf>,
    /// Channel seed of the first curve, or the validation seed.
    pub seed: u64,
    pub sequential: bool,
    pub parameters: Parameters,
    /// Output file names, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn file_name(command: CommandKind) -> String {
        format!("{}.manifest.json", command.stem())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(self.command));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
