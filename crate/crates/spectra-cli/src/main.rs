mod config;
mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use spectra_core::{
    auto_density, compare, invariant_suite, law_model, solve_grid, DensityRequest,
    EmpiricalSpectrum, Error as CoreError, SimConfig, Simulator, SpectralDensity, SpectrumMeta,
    DEFAULT_EPSILON,
};

use crate::manifest::{
    file_ref, manifest_path, now_ms, ConvergenceSummary, FileRef, RunManifest, SolverSettings,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_RANGE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "spectra",
    version,
    about = "Deterministic-equivalent spectral laws of MANOVA variance-component estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the spectral density of the configured estimator.
    Solve {
        /// JSON model configuration.
        config: PathBuf,
        /// Evaluation grid `XMIN XMAX COUNT`; omitted, the support is located
        /// automatically and covered with a fine grid.
        #[arg(long, num_args = 3, value_names = ["XMIN", "XMAX", "COUNT"], allow_negative_numbers = true)]
        grid: Option<Vec<f64>>,
        /// Smoothing height at which the transform is evaluated.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        /// Density CSV path; the manifest is written alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw replicates of the model and emit estimator eigenvalues.
    Simulate {
        /// JSON model configuration.
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Component to estimate; defaults to the config's target.
        #[arg(long)]
        target: Option<usize>,
        /// Eigenvalue CSV path; replicates beyond the first run get a
        /// `-repNNNN` suffix, and the manifest is written alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an empirical spectrum against a solved density.
    Compare {
        /// Density CSV produced by `solve`.
        #[arg(long)]
        density: PathBuf,
        /// Eigenvalue CSV produced by `simulate`.
        #[arg(long)]
        eigs: PathBuf,
        /// Number of extreme eigenvalues to drop before comparing.
        #[arg(long, default_value_t = 0)]
        trim: usize,
        /// Report JSON path; the manifest is written alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the solver invariant suite on the configured model.
    Check {
        /// JSON model configuration.
        config: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = configure_threads().and_then(|()| match cli.command {
        Command::Solve {
            config,
            grid,
            eps,
            out,
        } => cmd_solve(&config, grid.as_deref(), eps, &out),
        Command::Simulate {
            config,
            seed,
            reps,
            target,
            out,
        } => cmd_simulate(&config, seed, reps, target, &out),
        Command::Compare {
            density,
            eigs,
            trim,
            out,
        } => cmd_compare(&density, &eigs, trim, &out),
        Command::Check { config } => cmd_check(&config),
    });
    match run {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("spectra: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// SPECTRA_THREADS caps solver and simulator parallelism; 0 or unset lets the
/// pool size itself from the machine.
fn configure_threads() -> Result<(), Failure> {
    let raw = match std::env::var("SPECTRA_THREADS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(Failure::config(format!("SPECTRA_THREADS: {e}"))),
        Ok(raw) => raw,
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Failure::config(format!(
            "SPECTRA_THREADS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(format!("SPECTRA_THREADS: {e}")))
}

fn cmd_solve(
    config_path: &Path,
    grid: Option<&[f64]>,
    eps: f64,
    out: &Path,
) -> Result<u8, Failure> {
    let started = now_ms();
    let loaded = config::load(config_path).map_err(Failure::config)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure::config(format!(
            "--eps must be positive and finite, got {eps}"
        )));
    }
    let model = law_model(&loaded.design, &loaded.components, loaded.target)
        .map_err(|e| Failure::config(format!("config {}: {e}", config_path.display())))?;

    let density = match grid {
        Some(args) => {
            let request = DensityRequest {
                x_grid: explicit_grid(args)?,
                epsilon: eps,
            };
            solve_grid(&model, &request, &loaded.solver)
                .map_err(|e| Failure::solver(e.to_string()))?
        }
        None => auto_density(&model, &loaded.solver, eps)
            .map_err(|e| Failure::solver(e.to_string()))?
            .density,
    };

    output::write_density_csv(out, &density)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", out.display())))?;
    let summary = ConvergenceSummary::from_density(&density);
    let unconverged = summary.unconverged;
    let manifest = RunManifest {
        command: "solve".into(),
        inputs: vec![FileRef {
            path: config_path.display().to_string(),
            sha256: loaded.sha256,
        }],
        seed: None,
        target: Some(loaded.target),
        solver: Some(SolverSettings {
            tol: loaded.solver.tol,
            max_iters: loaded.solver.max_iters,
            damping: loaded.solver.damping,
            epsilon: Some(eps),
        }),
        convergence: Some(summary),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: vec![out.display().to_string()],
    };
    let mpath = manifest_path(out);
    manifest
        .write(&mpath)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", mpath.display())))?;

    println!(
        "wrote {} ({} points, {} unconverged)",
        out.display(),
        density.grid.len(),
        unconverged
    );
    if unconverged > 0 {
        eprintln!("spectra: {unconverged} grid points did not converge; see {}", mpath.display());
        return Ok(EXIT_SOLVER);
    }
    Ok(0)
}

fn explicit_grid(args: &[f64]) -> Result<Vec<f64>, Failure> {
    let (xmin, xmax, count) = (args[0], args[1], args[2]);
    if !(xmin < xmax) {
        return Err(Failure::config(format!(
            "--grid needs XMIN < XMAX, got {xmin} and {xmax}"
        )));
    }
    if count.fract() != 0.0 || count < 2.0 {
        return Err(Failure::config(format!(
            "--grid COUNT must be an integer of at least 2, got {count}"
        )));
    }
    let count = count as usize;
    let step = (xmax - xmin) / (count - 1) as f64;
    Ok((0..count).map(|i| xmin + step * i as f64).collect())
}

fn cmd_simulate(
    config_path: &Path,
    seed: u64,
    reps: usize,
    target: Option<usize>,
    out: &Path,
) -> Result<u8, Failure> {
    let started = now_ms();
    let loaded = config::load(config_path).map_err(Failure::config)?;
    let target = target.unwrap_or(loaded.target);
    let sim = Simulator::new(SimConfig {
        design: loaded.design,
        components: loaded.components,
        seed,
        replicates: reps,
        target,
    })
    .map_err(|e| Failure::config(format!("config {}: {e}", config_path.display())))?;

    let spectra = sim.run().map_err(|e| Failure::solver(e.to_string()))?;
    let mut outputs = Vec::with_capacity(spectra.len());
    for (rep, spectrum) in spectra.iter().enumerate() {
        let path = replicate_path(out, rep, reps);
        output::write_eigs_csv(&path, rep, &spectrum.eigenvalues)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        outputs.push(path.display().to_string());
    }

    let manifest = RunManifest {
        command: "simulate".into(),
        inputs: vec![FileRef {
            path: config_path.display().to_string(),
            sha256: loaded.sha256,
        }],
        seed: Some(seed),
        target: Some(target),
        solver: None,
        convergence: None,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: outputs.clone(),
    };
    let mpath = manifest_path(out);
    manifest
        .write(&mpath)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", mpath.display())))?;

    println!(
        "wrote {} replicate file{} for seed {seed}",
        outputs.len(),
        if outputs.len() == 1 { "" } else { "s" }
    );
    Ok(0)
}

fn replicate_path(out: &Path, rep: usize, reps: usize) -> PathBuf {
    if reps == 1 {
        return out.to_path_buf();
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "eigenvalues".into());
    let ext = out
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}-rep{rep:04}.{ext}"))
}

fn cmd_compare(
    density_path: &Path,
    eigs_path: &Path,
    trim: usize,
    out: &Path,
) -> Result<u8, Failure> {
    let started = now_ms();
    let density: SpectralDensity = output::read_density_csv(density_path).map_err(Failure::config)?;
    let eigenvalues = output::read_eigs_csv(eigs_path).map_err(Failure::config)?;
    let meta = SpectrumMeta {
        p: eigenvalues.len(),
        design_id: eigs_path.display().to_string(),
        seed: 0,
        replicate: 0,
    };
    let spectrum = EmpiricalSpectrum::new(eigenvalues, meta)
        .map_err(|e| Failure::config(format!("{}: {e}", eigs_path.display())))?;

    let report = compare(&spectrum, &density, trim).map_err(|e| match e {
        CoreError::RangeMismatch { .. } => Failure {
            code: EXIT_RANGE,
            message: e.to_string(),
        },
        other => Failure::config(other.to_string()),
    })?;

    let mut body = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::io(format!("cannot encode report: {e}")))?;
    body.push('\n');
    std::fs::write(out, body)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", out.display())))?;

    let inputs = [density_path, eigs_path]
        .iter()
        .map(|p| file_ref(p).map_err(|e| Failure::io(format!("cannot hash {}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        command: "compare".into(),
        inputs,
        seed: None,
        target: None,
        solver: None,
        convergence: None,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: vec![out.display().to_string()],
    };
    let mpath = manifest_path(out);
    manifest
        .write(&mpath)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", mpath.display())))?;

    println!(
        "ks={} mass={} trimmed={} accepted={}",
        report.ks, report.mass, report.trimmed, report.accepted
    );
    Ok(0)
}

fn cmd_check(config_path: &Path) -> Result<u8, Failure> {
    let loaded = config::load(config_path).map_err(Failure::config)?;
    let model = law_model(&loaded.design, &loaded.components, loaded.target)
        .map_err(|e| Failure::config(format!("config {}: {e}", config_path.display())))?;

    let mut samples = Vec::new();
    for re in [-0.5, 0.3, 1.0, 2.5, 5.0] {
        for im in [0.01, 0.1, 1.0, 10.0] {
            samples.push(Complex64::new(re, im));
        }
    }
    let ledger = invariant_suite(&model, &samples);
    for check in &ledger.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} {}: worst {:.3e} against limit {:.3e}{}",
            check.name,
            check.worst,
            check.limit,
            if check.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", check.detail)
            }
        );
    }
    if ledger.all_passed() {
        println!("all {} invariants hold", ledger.checks.len());
        Ok(0)
    } else {
        eprintln!(
            "spectra: {} of {} invariants failed",
            ledger.failures().count(),
            ledger.checks.len()
        );
        Ok(EXIT_SOLVER)
    }
}
