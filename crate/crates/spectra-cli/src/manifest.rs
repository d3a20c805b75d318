use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use spectra_core::SpectralDensity;

/// Provenance record written next to every emitted artifact set. One run
/// writes one manifest, and each artifact is referenced by exactly one
/// manifest.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<FileRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSummary>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Per-point convergence outcome of a grid sweep: a point is converged
/// exactly when its abscissa is absent from `unconverged_x`.
#[derive(Debug, Serialize)]
pub struct ConvergenceSummary {
    pub points: usize,
    pub unconverged: usize,
    pub max_residual: f64,
    pub max_iterations: usize,
    pub unconverged_x: Vec<f64>,
}

impl ConvergenceSummary {
    pub fn from_density(density: &SpectralDensity) -> Self {
        let mut summary = ConvergenceSummary {
            points: density.flags.len(),
            unconverged: 0,
            max_residual: 0.0,
            max_iterations: 0,
            unconverged_x: Vec::new(),
        };
        for (x, status) in density.grid.iter().zip(&density.flags) {
            summary.max_residual = summary.max_residual.max(status.residual);
            summary.max_iterations = summary.max_iterations.max(status.iters);
            if !status.converged {
                summary.unconverged += 1;
                summary.unconverged_x.push(*x);
            }
        }
        summary
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        fs::write(path, body)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn file_ref(path: &Path) -> io::Result<FileRef> {
    let bytes = fs::read(path)?;
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}
