use crate::error::{Error, Result};
use crate::fp_solver::{self, DensityRequest, PointStatus};
use crate::model_core::{GeneralModel, SolverConfig};

/// Fraction of the peak below which the density is treated as tail when
/// detecting support; conservative against Cauchy tails.
const SUPPORT_THRESHOLD: f64 = 1e-6;
const SUPPORT_PAD: f64 = 0.05;
const MASS_DEFICIT_LIMIT: f64 = 0.95;
const COARSE_POINTS: usize = 800;
const FINE_POINT_TARGET: usize = 20_000;
const WIDEN_ROUNDS: usize = 4;
const COARSE_MASS_GOAL: f64 = 0.985;

/// Smoothed spectral density along a real grid. The values carry the
/// Cauchy-kernel bias of the evaluation height epsilon.
#[derive(Clone, Debug)]
pub struct SpectralDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub flags: Vec<PointStatus>,
}

impl SpectralDensity {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<f64>,
        epsilon: f64,
        flags: Vec<PointStatus>,
    ) -> Result<Self> {
        if grid.len() != values.len() || grid.len() != flags.len() {
            return Err(Error::dim("density columns", grid.len(), values.len()));
        }
        if grid.is_empty() {
            return Err(Error::degenerate("density grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::degenerate(
                "density grid must be strictly increasing",
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::degenerate(
                "density values must be finite and non-negative",
            ));
        }
        Ok(SpectralDensity {
            grid,
            values,
            epsilon,
            flags,
        })
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.flags.iter().all(|s| s.converged)
    }
}

/// Cumulative distribution of a density, tabulated on the density grid. The
/// table is clipped to [0, 1]; the pre-clipping mass records how much of the
/// law the grid actually captured.
#[derive(Clone, Debug)]
pub struct CdfTable {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub total_mass: f64,
}

impl CdfTable {
    /// True when the grid was too narrow for the smoothed law.
    pub fn mass_deficit(&self) -> bool {
        self.total_mass < MASS_DEFICIT_LIMIT
    }

    /// Linear interpolation on the grid; eigenvalues outside the grid are
    /// compared against the boundary values 0 and 1.
    pub fn eval(&self, x: f64) -> f64 {
        let grid = &self.grid;
        if x <= grid[0] {
            return if x < grid[0] { 0.0 } else { self.cdf[0] };
        }
        if x >= grid[grid.len() - 1] {
            return 1.0;
        }
        let hi = grid.partition_point(|&g| g < x);
        let lo = hi - 1;
        let t = (x - grid[lo]) / (grid[hi] - grid[lo]);
        self.cdf[lo] + t * (self.cdf[hi] - self.cdf[lo])
    }
}

/// Trapezoidal cumulative integral of the density, clipped to [0, 1].
pub fn cdf_from_density(density: &SpectralDensity) -> CdfTable {
    let mut cdf = Vec::with_capacity(density.grid.len());
    let mut cum = 0.0;
    cdf.push(0.0);
    for i in 1..density.grid.len() {
        let dx = density.grid[i] - density.grid[i - 1];
        cum += 0.5 * (density.values[i] + density.values[i - 1]) * dx;
        cdf.push(cum.clamp(0.0, 1.0));
    }
    CdfTable {
        grid: density.grid.clone(),
        cdf,
        total_mass: cum,
    }
}

/// Trapezoidal moments of the density for l = 1..=l_max.
pub fn density_moments(density: &SpectralDensity, l_max: usize) -> Result<Vec<f64>> {
    if l_max == 0 {
        return Err(Error::degenerate("moment order must be at least 1"));
    }
    let mut moments = vec![0.0; l_max];
    for i in 1..density.grid.len() {
        let (x0, x1) = (density.grid[i - 1], density.grid[i]);
        let (f0, f1) = (density.values[i - 1], density.values[i]);
        let dx = x1 - x0;
        let mut p0 = 1.0;
        let mut p1 = 1.0;
        for m in moments.iter_mut() {
            p0 *= x0;
            p1 *= x1;
            *m += 0.5 * (p0 * f0 + p1 * f1) * dx;
        }
    }
    Ok(moments)
}

/// Provenance of an empirical spectrum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumMeta {
    pub p: usize,
    pub design_id: String,
    pub seed: u64,
    pub replicate: usize,
}

/// Sorted eigenvalues of one estimated covariance matrix.
#[derive(Clone, Debug)]
pub struct EmpiricalSpectrum {
    pub eigenvalues: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl EmpiricalSpectrum {
    pub fn new(mut eigenvalues: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::degenerate("empirical spectrum is empty"));
        }
        if eigenvalues.len() != meta.p {
            return Err(Error::dim("spectrum length", meta.p, eigenvalues.len()));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::degenerate("spectrum contains non-finite values"));
        }
        eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EmpiricalSpectrum { eigenvalues, meta })
    }
}

/// Right-continuous step CDF of a finite point set.
#[derive(Clone, Debug)]
pub struct StepCdf {
    points: Vec<f64>,
}

impl StepCdf {
    /// Points need not arrive sorted; they are sorted here.
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::degenerate("step CDF needs at least one point"));
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(StepCdf { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// F(x) = #{p_i <= x} / N.
    pub fn eval(&self, x: f64) -> f64 {
        self.points.partition_point(|&p| p <= x) as f64 / self.points.len() as f64
    }

    /// F(x-) = #{p_i < x} / N.
    pub fn left_limit(&self, x: f64) -> f64 {
        self.points.partition_point(|&p| p < x) as f64 / self.points.len() as f64
    }
}

/// Step CDF with jumps of 1/p at each eigenvalue.
pub fn empirical_cdf(spectrum: &EmpiricalSpectrum) -> StepCdf {
    StepCdf {
        points: spectrum.eigenvalues.clone(),
    }
}

/// Scans for the region where the density is meaningfully above zero and
/// pads it by 5% of its width. Returns None for an all-zero density.
pub fn detect_support(density: &SpectralDensity) -> Option<(f64, f64)> {
    let peak = density.max_value();
    if peak <= 0.0 {
        return None;
    }
    let threshold = SUPPORT_THRESHOLD * peak;
    let first = density.values.iter().position(|&v| v > threshold)?;
    let last = density.values.iter().rposition(|&v| v > threshold)?;
    let (lo, hi) = (density.grid[first], density.grid[last]);
    let pad = SUPPORT_PAD * (hi - lo).max(density.epsilon);
    Some((lo - pad, hi + pad))
}

/// A density on an automatically selected grid, with the detected support.
#[derive(Clone, Debug)]
pub struct AutoDensity {
    pub density: SpectralDensity,
    pub support: (f64, f64),
}

/// Locates the support from the transform's moments, then evaluates the
/// density on a fine grid covering it plus a 100-epsilon margin. The moment
/// bracket is widened when the coarse scan captures too little mass, which
/// happens when the law is much more spread out than its first two moments
/// suggest.
pub fn auto_density(
    model: &GeneralModel,
    cfg: &SolverConfig,
    epsilon: f64,
) -> Result<AutoDensity> {
    if !(epsilon > 0.0) {
        return Err(Error::degenerate(format!(
            "smoothing height must be positive, got {epsilon}"
        )));
    }
    let (mut lo, mut hi) = fp_solver::moment_bracket(model, cfg)?;
    if hi - lo < 4.0 * epsilon {
        let mid = 0.5 * (lo + hi);
        lo = mid - 2.0 * epsilon;
        hi = mid + 2.0 * epsilon;
    }
    let mut coarse = solve_coarse(model, cfg, lo, hi, epsilon)?;
    for _ in 0..WIDEN_ROUNDS {
        if cdf_from_density(&coarse).total_mass >= COARSE_MASS_GOAL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let half = hi - mid;
        lo = mid - 2.0 * half;
        hi = mid + 2.0 * half;
        coarse = solve_coarse(model, cfg, lo, hi, epsilon)?;
    }
    let support = detect_support(&coarse).unwrap_or((lo, hi));
    let margin = 100.0 * epsilon;
    let (grid_lo, grid_hi) = (support.0 - margin, support.1 + margin);
    let width = grid_hi - grid_lo;
    let step = (width / FINE_POINT_TARGET as f64).max(epsilon);
    let count = (width / step).ceil() as usize + 1;
    let request = DensityRequest::linspace(grid_lo, grid_hi, count.max(2), epsilon);
    let density = fp_solver::solve_grid(model, &request, cfg)?;
    Ok(AutoDensity { density, support })
}

fn solve_coarse(
    model: &GeneralModel,
    cfg: &SolverConfig,
    lo: f64,
    hi: f64,
    epsilon: f64,
) -> Result<SpectralDensity> {
    let request = DensityRequest::linspace(lo, hi, COARSE_POINTS, epsilon);
    fp_solver::solve_grid(model, &request, cfg)
}
