use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use spectra_core::{validate_components, DesignSpec, SolverConfig, VarianceComponents};

use crate::manifest::sha256_hex;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignConfig {
    OneWay {
        group_sizes: Vec<usize>,
    },
    Nested {
        levels: Vec<usize>,
    },
    Crossed {
        #[serde(rename = "I")]
        i: usize,
        #[serde(rename = "J")]
        j: usize,
        #[serde(rename = "K")]
        k: usize,
        #[serde(rename = "L")]
        l: usize,
    },
    Explicit {
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(rename = "U")]
        u: Vec<Vec<Vec<f64>>>,
    },
}

/// Covariance component: dense row-major matrix, or `{"diag": [...]}` for the
/// diagonal fast path.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SigmaConfig {
    Diagonal { diag: Vec<f64> },
    Dense(Vec<Vec<f64>>),
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub damping: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub design: DesignConfig,
    pub sigmas: Vec<SigmaConfig>,
    pub target: usize,
    #[serde(default)]
    pub solver: Option<SolverOverrides>,
}

/// A parsed and validated configuration, ready to hand to the solver.
pub struct LoadedConfig {
    pub design: DesignSpec,
    pub components: VarianceComponents,
    pub target: usize,
    pub solver: SolverConfig,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, String> {
    let shown = path.display();
    let bytes =
        fs::read(path).map_err(|e| format!("cannot read config {shown}: {e}"))?;
    let raw: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| format!("config {shown} is not valid: {e}"))?;

    let design = design_spec(raw.design).map_err(|e| format!("config {shown}: {e}"))?;
    design
        .validate()
        .map_err(|e| format!("config {shown}: {e}"))?;

    let mats = raw
        .sigmas
        .iter()
        .enumerate()
        .map(|(r, s)| sigma_matrix(s).map_err(|e| format!("config {shown}: sigmas[{r}] {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let components =
        validate_components(&mats).map_err(|e| format!("config {shown}: {e}"))?;
    if components.k() != design.k() {
        return Err(format!(
            "config {shown}: design has {} effects but {} sigmas were given",
            design.k(),
            components.k()
        ));
    }

    if raw.target < 1 || raw.target > design.k() {
        return Err(format!(
            "config {shown}: target {} outside 1..={}",
            raw.target,
            design.k()
        ));
    }

    let solver = solver_config(raw.solver.unwrap_or_default())
        .map_err(|e| format!("config {shown}: {e}"))?;

    Ok(LoadedConfig {
        design,
        components,
        target: raw.target,
        solver,
        sha256: sha256_hex(&bytes),
    })
}

fn design_spec(cfg: DesignConfig) -> Result<DesignSpec, String> {
    Ok(match cfg {
        DesignConfig::OneWay { group_sizes } => DesignSpec::OneWay { group_sizes },
        DesignConfig::Nested { levels } => DesignSpec::NestedBalanced { levels },
        DesignConfig::Crossed { i, j, k, l } => DesignSpec::CrossedTwoWay { i, j, k, l },
        DesignConfig::Explicit { b, u } => {
            let b = matrix_from_rows(&b).map_err(|e| format!("design B {e}"))?;
            if b.nrows() != b.ncols() {
                return Err(format!(
                    "design B must be square, got {}x{}",
                    b.nrows(),
                    b.ncols()
                ));
            }
            let n = b.nrows();
            let mut incidences = Vec::with_capacity(u.len());
            for (r, rows) in u.iter().enumerate() {
                let m = matrix_from_rows(rows).map_err(|e| format!("design U[{r}] {e}"))?;
                if m.nrows() != n {
                    return Err(format!(
                        "design U[{r}] has {} rows but B is {n}x{n}",
                        m.nrows()
                    ));
                }
                incidences.push(m);
            }
            DesignSpec::Explicit { b, u: incidences }
        }
    })
}

fn sigma_matrix(cfg: &SigmaConfig) -> Result<DMatrix<f64>, String> {
    match cfg {
        SigmaConfig::Diagonal { diag } => {
            if diag.is_empty() {
                return Err("diagonal is empty".into());
            }
            Ok(DMatrix::from_fn(diag.len(), diag.len(), |r, c| {
                if r == c {
                    diag[r]
                } else {
                    0.0
                }
            }))
        }
        SigmaConfig::Dense(rows) => matrix_from_rows(rows),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() {
        return Err("matrix has no rows".into());
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err("matrix has empty rows".into());
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err("matrix rows have unequal lengths".into());
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn solver_config(ovr: SolverOverrides) -> Result<SolverConfig, String> {
    let mut cfg = SolverConfig::default();
    if let Some(tol) = ovr.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(format!("solver tol must be positive and finite, got {tol}"));
        }
        cfg.tol = tol;
    }
    if let Some(iters) = ovr.max_iters {
        if iters == 0 {
            return Err("solver max_iters must be at least 1".into());
        }
        cfg.max_iters = iters;
    }
    if let Some(d) = ovr.damping {
        if !(d > 0.0 && d <= 1.0) {
            return Err(format!("solver damping must lie in (0, 1], got {d}"));
        }
        cfg.damping = d;
    }
    Ok(cfg)
}
