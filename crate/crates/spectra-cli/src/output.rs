use std::fs;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use spectra_core::{PointStatus, SpectralDensity, DEFAULT_EPSILON};

pub const DENSITY_HEADER: &str = "x,f";
pub const EIGS_HEADER: &str = "rep,index,eigenvalue";

/// Writes `x,f` rows in grid order. Values use the shortest decimal form
/// that parses back to the same float, so emit/parse round-trips exactly.
pub fn write_density_csv(path: &Path, density: &SpectralDensity) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{DENSITY_HEADER}")?;
    for (x, f) in density.grid.iter().zip(&density.values) {
        writeln!(w, "{x},{f}")?;
    }
    w.flush()
}

pub fn write_eigs_csv(path: &Path, rep: usize, eigenvalues: &[f64]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{EIGS_HEADER}")?;
    for (index, lambda) in eigenvalues.iter().enumerate() {
        writeln!(w, "{rep},{index},{lambda}")?;
    }
    w.flush()
}

pub fn read_density_csv(path: &Path) -> Result<SpectralDensity, String> {
    let shown = path.display();
    let body = fs::read_to_string(path).map_err(|e| format!("cannot read {shown}: {e}"))?;
    let mut lines = body.lines();
    match lines.next() {
        Some(DENSITY_HEADER) => {}
        other => {
            return Err(format!(
                "{shown}: expected header `{DENSITY_HEADER}`, got {other:?}"
            ))
        }
    }
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let x = parse_field(fields.next(), "x", row, &shown)?;
        let f = parse_field(fields.next(), "f", row, &shown)?;
        if fields.next().is_some() {
            return Err(format!("{shown}: row {row} has more than two fields"));
        }
        grid.push(x);
        values.push(f);
    }
    let flags = vec![
        PointStatus {
            converged: true,
            iters: 0,
            residual: 0.0,
        };
        grid.len()
    ];
    SpectralDensity::new(grid, values, DEFAULT_EPSILON, flags)
        .map_err(|e| format!("{shown}: {e}"))
}

pub fn read_eigs_csv(path: &Path) -> Result<Vec<f64>, String> {
    let shown = path.display();
    let body = fs::read_to_string(path).map_err(|e| format!("cannot read {shown}: {e}"))?;
    let mut lines = body.lines();
    match lines.next() {
        Some(EIGS_HEADER) => {}
        other => {
            return Err(format!(
                "{shown}: expected header `{EIGS_HEADER}`, got {other:?}"
            ))
        }
    }
    let mut eigenvalues = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(format!("{shown}: row {row} has {} fields, want 3", fields.len()));
        }
        fields[0]
            .parse::<usize>()
            .map_err(|e| format!("{shown}: row {row} rep: {e}"))?;
        fields[1]
            .parse::<usize>()
            .map_err(|e| format!("{shown}: row {row} index: {e}"))?;
        let lambda = fields[2]
            .parse::<f64>()
            .map_err(|e| format!("{shown}: row {row} eigenvalue: {e}"))?;
        eigenvalues.push(lambda);
    }
    Ok(eigenvalues)
}

fn parse_field(
    field: Option<&str>,
    name: &str,
    row: usize,
    shown: &std::path::Display,
) -> Result<f64, String> {
    field
        .ok_or_else(|| format!("{shown}: row {row} is missing the {name} field"))?
        .parse::<f64>()
        .map_err(|e| format!("{shown}: row {row} {name}: {e}"))
}
