//! The run manifest: plan echo, members, produced files and the acceptance summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acceptance::CriterionOutcome;
use crate::error::{HarnessError, Result};
use crate::plan::ExperimentPlan;
use crate::runner::MemberFailure;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub nu: f64,
    pub master_seed: u64,
    pub stream: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MemberEntry {
    pub fn ok(nu: f64, master_seed: u64, stream: u64) -> Self {
        Self { nu, master_seed, stream, ok: true, failed_at: None, error: None }
    }

    pub fn failed(f: &MemberFailure) -> Self {
        Self {
            nu: f.nu,
            master_seed: f.master_seed,
            stream: f.stream,
            ok: false,
            failed_at: f.t,
            error: Some(f.message.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub kind: String,
    /// All criteria passed and no member failed.
    pub passed: bool,
    pub degraded: bool,
    /// Paths relative to the output directory, sorted, including this manifest.
    pub files: Vec<String>,
    /// Scalar results: fits, normalizations, thresholds.
    pub values: BTreeMap<String, f64>,
    pub plan: ExperimentPlan,
    pub members: Vec<MemberEntry>,
    pub criteria: Vec<CriterionOutcome>,
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: plan.kind.name().to_string(),
            passed: false,
            degraded: false,
            files: Vec::new(),
            values: BTreeMap::new(),
            plan: plan.clone(),
            members: Vec::new(),
            criteria: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Manifest(e.to_string()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| HarnessError::Read { path, source })?;
        toml::from_str(&text).map_err(|e| HarnessError::Manifest(e.to_string()))
    }

    /// Lists every file under `dir`, then writes the manifest there.
    pub fn finalize(&mut self, dir: &Path) -> Result<()> {
        self.passed = !self.degraded && self.criteria.iter().all(|c| c.passed);
        let mut files: Vec<String> = list_files(dir)?
            .into_iter()
            .map(|p| p.strip_prefix(dir).expect("listed under dir").to_string_lossy().replace('\\', "/"))
            .filter(|p| p != MANIFEST_FILE)
            .collect();
        files.push(MANIFEST_FILE.to_string());
        files.sort();
        self.files = files;
        std::fs::write(dir.join(MANIFEST_FILE), self.to_toml()?)?;
        Ok(())
    }
}

/// Every regular file below `dir`, recursively.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
