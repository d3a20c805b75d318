use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model_core::{FFactor, GeneralModel, SolverConfig};
use crate::spectra::SpectralDensity;

/// Iterates may dip below the real axis by at most this much before the
/// solver treats the run as having left its domain.
pub const DOMAIN_TOL: f64 = 1e-10;

/// Default height above the real axis for density evaluation; densities carry
/// an O(epsilon) smoothing bias.
pub const DEFAULT_EPSILON: f64 = 1e-4;

const MIN_DAMPING: f64 = 1.0 / 16.0;
const STALL_WINDOW: usize = 50;

/// The plain iteration contracts at a rate that approaches 1 as Im z shrinks,
/// so a Newton polish on the k-dimensional b-map finishes the job. It fires
/// as soon as the residual drops below the trigger (warm starts land there
/// immediately) and, failing that, is retried every gap iterations: near the
/// real axis a cold start can orbit at O(1) residual indefinitely, and the
/// polish is what pulls it in. Failed attempts are cheap because the polish
/// abandons as soon as its residual stops improving.
const NEWTON_TRIGGER: f64 = 1e-4;
const NEWTON_STEPS: usize = 30;
const NEWTON_RETRY_GAP: usize = 50;
/// A polish attempt succeeds once the self-map residual is below this
/// fraction of the requested tolerance.
const NEWTON_ACCEPT_FACTOR: f64 = 0.5;
/// While steps keep paying off, polishing continues down to this fraction,
/// parking the iterate as close to the fixed point as the arithmetic allows.
const NEWTON_DEEP_FACTOR: f64 = 0.05;

/// A density evaluation request: where to evaluate, and how far above the
/// real axis.
#[derive(Clone, Debug)]
pub struct DensityRequest {
    pub x_grid: Vec<f64>,
    pub epsilon: f64,
}

impl DensityRequest {
    pub fn new(x_grid: Vec<f64>) -> Self {
        DensityRequest {
            x_grid,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(x_grid: Vec<f64>, epsilon: f64) -> Self {
        DensityRequest { x_grid, epsilon }
    }

    /// Uniform grid of `count` points spanning [lo, hi].
    pub fn linspace(lo: f64, hi: f64, count: usize, epsilon: f64) -> Self {
        let step = if count > 1 {
            (hi - lo) / (count - 1) as f64
        } else {
            0.0
        };
        DensityRequest {
            x_grid: (0..count).map(|i| lo + step * i as f64).collect(),
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_grid.is_empty() {
            return Err(Error::degenerate("density grid is empty"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::degenerate(format!(
                "smoothing height must be positive, got {}",
                self.epsilon
            )));
        }
        if self.x_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::degenerate(
                "density grid must be strictly increasing",
            ));
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::degenerate("density grid contains non-finite points"));
        }
        Ok(())
    }
}

/// Converged solution of the coupled trace equations at one spectral point.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub z: Complex64,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub m0: Complex64,
    pub iters: usize,
    pub residual: f64,
}

/// Per-point convergence record for grid sweeps.
#[derive(Clone, Copy, Debug)]
pub struct PointStatus {
    pub converged: bool,
    pub iters: usize,
    pub residual: f64,
}

/// Solutions along a real grid shifted into the upper half-plane.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub points: Vec<FixedPoint>,
    pub status: Vec<PointStatus>,
}

impl GridSolution {
    pub fn all_converged(&self) -> bool {
        self.status.iter().all(|s| s.converged)
    }
}

fn resolvent_stats(
    model: &GeneralModel,
    z: Complex64,
    b: &[Complex64],
) -> Result<(Vec<Complex64>, Complex64)> {
    let p = model.p();
    let sizes = model.block_sizes();
    let zero = Complex64::new(0.0, 0.0);
    if let Some(diags) = model.diag_fast_path() {
        let mut a = vec![zero; model.k()];
        let mut m0 = zero;
        for i in 0..p {
            let mut den = z;
            for (s, d) in diags.iter().enumerate() {
                den += b[s] * d[i];
            }
            if den == zero {
                return Err(Error::SingularResolvent { z });
            }
            let inv = 1.0 / den;
            if !inv.re.is_finite() || !inv.im.is_finite() {
                return Err(Error::SingularResolvent { z });
            }
            m0 -= inv;
            for (s, d) in diags.iter().enumerate() {
                a[s] -= d[i] * inv;
            }
        }
        for (s, a_s) in a.iter_mut().enumerate() {
            *a_s /= sizes[s] as f64;
        }
        Ok((a, m0 / p as f64))
    } else {
        let mut m = DMatrix::from_diagonal_element(p, p, z);
        for (s, sigma) in model.grams().iter().enumerate() {
            sigma.add_scaled_to(&mut m, b[s]);
        }
        let inv = linalg::invert(&m).ok_or(Error::SingularResolvent { z })?;
        let a = model
            .grams()
            .iter()
            .zip(sizes)
            .map(|(sigma, &sz)| -sigma.trace_product(&inv) / sz as f64)
            .collect();
        let mut tr = zero;
        for i in 0..p {
            tr += inv[(i, i)];
        }
        Ok((a, -tr / p as f64))
    }
}

/// Trace map a_r = -(1/I_r) Tr((z Id + sum_s b_s Sigma_s)^{-1} Sigma_r).
pub fn a_update(model: &GeneralModel, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != model.k() {
        return Err(Error::dim("b-vector", model.k(), b.len()));
    }
    resolvent_stats(model, z, b).map(|(a, _)| a)
}

/// Block-trace map b_r = -(1/I_r) Tr_r([Id + F D(a)]^{-1} F), evaluated from
/// the model matrices. Closed-form specializations are never consulted here,
/// so the two routes can be compared against each other.
pub fn b_update(model: &GeneralModel, a: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.len() != model.k() {
        return Err(Error::dim("a-vector", model.k(), a.len()));
    }
    if let Some(c) = model.scalar_f() {
        let den = Complex64::new(1.0, 0.0) + c * a[0];
        let b1 = -c / den;
        if !b1.re.is_finite() || !b1.im.is_finite() {
            return Err(Error::zero_denominator("scalar b-update"));
        }
        return Ok(vec![b1]);
    }
    if let Some(factor) = model.f_factor() {
        return b_update_factored(model, factor, a);
    }
    b_update_dense(model, a)
}

fn block_of_rows(sizes: &[usize]) -> Vec<usize> {
    let mut blk = Vec::with_capacity(sizes.iter().sum());
    for (r, &sz) in sizes.iter().enumerate() {
        blk.extend(std::iter::repeat(r).take(sz));
    }
    blk
}

/// Factored route: with F = L R the block traces reduce to the inverse of the
/// n x n core C = Id + R D(a) L, since [Id + L R D]^{-1} L R = L C^{-1} R.
/// Columns of L carry one entry per component, so both assembling C and
/// reading off the traces cost k n^2.
fn b_update_factored(
    model: &GeneralModel,
    factor: &FFactor,
    a: &[Complex64],
) -> Result<Vec<Complex64>> {
    let lhs = &factor.lhs;
    let rhs = &factor.rhs;
    let n = lhs.ncols();
    let n_plus = lhs.nrows();
    let sizes = model.block_sizes();
    let blk = block_of_rows(sizes);
    let zero = Complex64::new(0.0, 0.0);

    let mut c_mat = DMatrix::<Complex64>::identity(n, n);
    for y in 0..n {
        for i in 0..n_plus {
            let w = lhs[(i, y)];
            if w != 0.0 {
                let scale = a[blk[i]] * w;
                for x in 0..n {
                    c_mat[(x, y)] += scale * rhs[(x, i)];
                }
            }
        }
    }
    let cinv = linalg::invert(&c_mat).ok_or(Error::SingularSystem)?;
    let cinv_t = cinv.transpose();

    let mut acc = vec![zero; sizes.len()];
    for y in 0..n {
        for i in 0..n_plus {
            let w = lhs[(i, y)];
            if w != 0.0 {
                let mut dot = zero;
                for x in 0..n {
                    dot += cinv_t[(x, y)] * rhs[(x, i)];
                }
                acc[blk[i]] += w * dot;
            }
        }
    }
    Ok(acc
        .iter()
        .zip(sizes)
        .map(|(t, &sz)| -t / sz as f64)
        .collect())
}

fn b_update_dense(model: &GeneralModel, a: &[Complex64]) -> Result<Vec<Complex64>> {
    let f = model.f();
    let n_plus = model.n_plus();
    let sizes = model.block_sizes();
    let blk = block_of_rows(sizes);
    let zero = Complex64::new(0.0, 0.0);

    let mut m = DMatrix::<Complex64>::identity(n_plus, n_plus);
    for j in 0..n_plus {
        let aj = a[blk[j]];
        for i in 0..n_plus {
            m[(i, j)] += f[(i, j)] * aj;
        }
    }
    let minv = linalg::invert(&m).ok_or(Error::SingularSystem)?;
    let minv_t = minv.transpose();

    let mut acc = vec![zero; sizes.len()];
    for i in 0..n_plus {
        let mut dot = zero;
        for x in 0..n_plus {
            dot += minv_t[(x, i)] * f[(x, i)];
        }
        acc[blk[i]] += dot;
    }
    Ok(acc
        .iter()
        .zip(sizes)
        .map(|(t, &sz)| -t / sz as f64)
        .collect())
}

fn clamp_domain(z: Complex64, label: &str, v: &mut [Complex64]) -> Result<()> {
    for (idx, x) in v.iter_mut().enumerate() {
        if x.im < -DOMAIN_TOL {
            return Err(Error::DomainViolation {
                z,
                quantity: format!("{label}_{}", idx + 1),
                imag: x.im,
            });
        }
        if x.im < 0.0 {
            x.im = 0.0;
        }
    }
    Ok(())
}

fn b_map(model: &GeneralModel, a: &[Complex64]) -> Result<Vec<Complex64>> {
    match model.closed_form() {
        Some(cf) => cf.eval(a),
        None => b_update(model, a),
    }
}

fn max_gap(old: &[Complex64], new: &[Complex64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn t_map(model: &GeneralModel, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let (a, _) = resolvent_stats(model, z, b)?;
    b_map(model, &a)
}

/// Newton iteration on r(b) = T(b) - b where T is one full alternation of the
/// two trace maps. The Jacobian comes from forward differences, which is
/// accurate here because T is holomorphic in b. Any numerical trouble or an
/// iterate leaving the closed upper half-plane abandons the polish and hands
/// control back to the damped iteration; Ok(true) means `b` now satisfies the
/// equations to half the requested tolerance.
fn newton_polish(
    model: &GeneralModel,
    z: Complex64,
    tol: f64,
    b: &mut [Complex64],
    evals: &mut usize,
    trajectory: &mut Vec<f64>,
) -> Result<bool> {
    let k = b.len();
    let mut current = b.to_vec();
    let mut best: Option<(Vec<Complex64>, f64)> = None;
    'steps: for _ in 0..NEWTON_STEPS {
        let t0 = match t_map(model, z, &current) {
            Ok(v) => v,
            Err(_) => break,
        };
        *evals += 1;
        let res = max_gap(&current, &t0);
        trajectory.push(res);
        let improved = best.as_ref().is_none_or(|(_, br)| res < *br);
        if improved {
            best = Some((current.clone(), res));
        }
        if res <= NEWTON_DEEP_FACTOR * tol || !improved {
            break;
        }
        let mut lhs = DMatrix::<Complex64>::zeros(k, k);
        for s in 0..k {
            let h = 1e-7 * (1.0 + current[s].norm());
            let mut probe = current.clone();
            probe[s] += Complex64::new(h, 0.0);
            let ts = match t_map(model, z, &probe) {
                Ok(v) => v,
                Err(_) => break 'steps,
            };
            *evals += 1;
            for r in 0..k {
                lhs[(r, s)] = (ts[r] - t0[r]) / h;
            }
        }
        for r in 0..k {
            lhs[(r, r)] -= Complex64::new(1.0, 0.0);
        }
        let rhs = nalgebra::DVector::from_iterator(
            k,
            current.iter().zip(&t0).map(|(b_r, t_r)| b_r - t_r),
        );
        let delta = match nalgebra::linalg::LU::new(lhs).solve(&rhs) {
            Some(d) => d,
            None => break,
        };
        let mut next: Vec<Complex64> = current
            .iter()
            .zip(delta.iter())
            .map(|(b_r, d)| b_r + d)
            .collect();
        for v in next.iter_mut() {
            if !v.re.is_finite() || !v.im.is_finite() || v.im < -1e-6 {
                break 'steps;
            }
            if v.im < 0.0 {
                v.im = 0.0;
            }
        }
        current = next;
    }
    match best {
        Some((polished, res)) if res <= NEWTON_ACCEPT_FACTOR * tol => {
            b.copy_from_slice(&polished);
            Ok(true)
        }
        _ => Ok(false),
    }
}

fn solve_inner(
    model: &GeneralModel,
    z: Complex64,
    cfg: &SolverConfig,
    b0: &[Complex64],
) -> Result<(FixedPoint, bool, Vec<f64>)> {
    cfg.validate()?;
    if z.im <= 0.0 {
        return Err(Error::DomainViolation {
            z,
            quantity: "z".into(),
            imag: z.im,
        });
    }
    if b0.len() != model.k() {
        return Err(Error::dim("warm-start b-vector", model.k(), b0.len()));
    }
    let mut b = b0.to_vec();
    clamp_domain(z, "b", &mut b)?;
    let (mut a, mut m0) = resolvent_stats(model, z, &b)?;
    clamp_domain(z, "a", &mut a)?;

    let mut theta = cfg.damping;
    let mut best_res = f64::INFINITY;
    let mut stall = 0usize;
    let mut delta_a = f64::INFINITY;
    let mut trajectory = Vec::new();
    let mut residual = f64::INFINITY;

    let mut iter = 0usize;
    let mut next_newton = 1usize;
    while iter < cfg.max_iters {
        iter += 1;
        let b_raw = b_map(model, &a)?;
        residual = max_gap(&b, &b_raw);
        trajectory.push(residual);
        if residual <= cfg.tol && delta_a <= cfg.tol {
            let fp = FixedPoint {
                z,
                a,
                b,
                m0,
                iters: iter,
                residual,
            };
            return Ok((fp, true, trajectory));
        }
        let newton_due =
            iter >= next_newton && (residual <= NEWTON_TRIGGER || iter > NEWTON_RETRY_GAP);
        if newton_due {
            let mut b_try = b.clone();
            let mut evals = 0usize;
            let polished = newton_polish(model, z, cfg.tol, &mut b_try, &mut evals, &mut trajectory)?;
            iter = (iter + evals).min(cfg.max_iters);
            next_newton = iter + NEWTON_RETRY_GAP;
            if polished {
                b = b_try;
                clamp_domain(z, "b", &mut b)?;
                let (a_new, m0_new) = resolvent_stats(model, z, &b)?;
                let mut a_new = a_new;
                clamp_domain(z, "a", &mut a_new)?;
                delta_a = max_gap(&a, &a_new);
                a = a_new;
                m0 = m0_new;
                let b_check = b_map(model, &a)?;
                residual = max_gap(&b, &b_check);
                trajectory.push(residual);
                if residual <= cfg.tol {
                    let fp = FixedPoint {
                        z,
                        a,
                        b,
                        m0,
                        iters: iter,
                        residual,
                    };
                    return Ok((fp, true, trajectory));
                }
                continue;
            }
        }
        if residual < best_res * (1.0 - 1e-9) {
            best_res = residual;
            stall = 0;
        } else {
            stall += 1;
            if cfg.auto_damp && stall >= STALL_WINDOW && theta > MIN_DAMPING {
                theta *= 0.5;
                stall = 0;
            }
        }
        for (b_r, raw) in b.iter_mut().zip(&b_raw) {
            *b_r = theta * raw + (1.0 - theta) * *b_r;
        }
        clamp_domain(z, "b", &mut b)?;
        let (a_new, m0_new) = resolvent_stats(model, z, &b)?;
        let mut a_new = a_new;
        clamp_domain(z, "a", &mut a_new)?;
        delta_a = max_gap(&a, &a_new);
        a = a_new;
        m0 = m0_new;
    }
    let fp = FixedPoint {
        z,
        a,
        b,
        m0,
        iters: cfg.max_iters,
        residual,
    };
    Ok((fp, false, trajectory))
}

/// Solves the coupled equations at z from the pinned zero start.
pub fn solve_at_z(model: &GeneralModel, z: Complex64, cfg: &SolverConfig) -> Result<FixedPoint> {
    let b0 = vec![Complex64::new(0.0, 0.0); model.k()];
    solve_at_z_warm(model, z, cfg, &b0)
}

/// Solves at z starting from a supplied b-vector, typically the solution at a
/// neighboring grid point.
pub fn solve_at_z_warm(
    model: &GeneralModel,
    z: Complex64,
    cfg: &SolverConfig,
    b0: &[Complex64],
) -> Result<FixedPoint> {
    let (fp, converged, trajectory) = solve_inner(model, z, cfg, b0)?;
    if converged {
        Ok(fp)
    } else {
        Err(Error::NoConvergence {
            z,
            iters: fp.iters,
            residual: fp.residual,
            trajectory,
        })
    }
}

/// Sweeps a real grid at fixed height epsilon, warm-starting each point from
/// its converged neighbor. Failed points are recorded in the status vector
/// rather than aborting the sweep; hard domain or singularity errors still
/// abort.
pub fn sweep_grid(
    model: &GeneralModel,
    x_grid: &[f64],
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<GridSolution> {
    if !(epsilon > 0.0) {
        return Err(Error::degenerate(format!(
            "grid height must be positive, got {epsilon}"
        )));
    }
    let k = model.k();
    let mut points = Vec::with_capacity(x_grid.len());
    let mut status = Vec::with_capacity(x_grid.len());
    let mut warm: Option<Vec<Complex64>> = None;
    for &x in x_grid {
        let z = Complex64::new(x, epsilon);
        let b0 = warm
            .clone()
            .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); k]);
        let (fp, converged, _) = solve_inner(model, z, cfg, &b0)?;
        warm = if converged { Some(fp.b.clone()) } else { None };
        status.push(PointStatus {
            converged,
            iters: fp.iters,
            residual: fp.residual,
        });
        points.push(fp);
    }
    Ok(GridSolution { points, status })
}

/// Evaluates the spectral density f(x) = Im m0(x + i eps) / pi along the
/// requested grid. Points that fail to converge keep their last iterate's
/// value and are flagged; the sweep itself only fails on hard errors.
pub fn solve_grid(
    model: &GeneralModel,
    request: &DensityRequest,
    cfg: &SolverConfig,
) -> Result<SpectralDensity> {
    request.validate()?;
    let sol = sweep_grid(model, &request.x_grid, request.epsilon, cfg)?;
    let values = sol
        .points
        .iter()
        .map(|fp| (fp.m0.im / std::f64::consts::PI).max(0.0))
        .collect();
    SpectralDensity::new(request.x_grid.clone(), values, request.epsilon, sol.status)
}

/// First two spectral moments read off the transform far up the imaginary
/// axis, and a conservative support bracket built from them.
pub fn moment_bracket(model: &GeneralModel, cfg: &SolverConfig) -> Result<(f64, f64)> {
    const HEIGHT: f64 = 1e3;
    let fp = solve_at_z(model, Complex64::new(0.0, HEIGHT), cfg)?;
    let m1 = fp.m0.re * HEIGHT * HEIGHT;
    let m2 = (1.0 / HEIGHT - fp.m0.im) * HEIGHT.powi(3);
    let sd = (m2 - m1 * m1).max(1e-12).sqrt();
    Ok((m1 - 12.0 * sd, m1 + 12.0 * sd))
}
