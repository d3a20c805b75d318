//! Monte Carlo sampling of the Gaussian random-effects model and the MANOVA
//! estimators built from it.
//!
//! A draw is Y = sum_r U_r G_r Sigma_r^{1/2} with G_r an I_r x p standard
//! normal matrix; the fixed-effect term is annihilated by every estimator
//! matrix and is therefore not simulated. Each (replicate, effect) pair gets
//! its own counter-based RNG substream, so replicates are reproducible in
//! isolation and may run concurrently.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::design_builder::{BalancedDesign, BuiltDesign, OneWayDesign};
use crate::error::{Error, Result};
use crate::model_core::{DesignSpec, Sigma, VarianceComponents};
use crate::spectra::{EmpiricalSpectrum, SpectrumMeta};

/// One Monte Carlo experiment: a design, trait covariances for each random
/// effect, and a replication plan.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub design: DesignSpec,
    pub components: VarianceComponents,
    pub seed: u64,
    pub replicates: usize,
    /// Index of the variance component whose estimator is studied.
    pub target: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.replicates == 0 {
            return Err(Error::degenerate("simulation needs at least one replicate"));
        }
        let k = self.design.k();
        if self.components.k() != k {
            return Err(Error::dim(
                "covariance components per random effect",
                k,
                self.components.k(),
            ));
        }
        if self.target == 0 || self.target > k {
            return Err(Error::degenerate(format!(
                "target must lie in 1..={k}, got {}",
                self.target
            )));
        }
        Ok(())
    }
}

/// Symmetric PSD square root of a trait covariance, in the cheapest usable
/// form.
#[derive(Clone, Debug)]
enum SqrtSigma {
    Zero,
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

fn sqrt_sigma(sigma: &Sigma) -> Result<SqrtSigma> {
    if sigma.is_zero() {
        return Ok(SqrtSigma::Zero);
    }
    match sigma {
        Sigma::Diagonal(d) => Ok(SqrtSigma::Diagonal(
            d.iter().map(|&x| x.max(0.0).sqrt()).collect(),
        )),
        Sigma::Dense(m) => {
            let eig =
                SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
            let mut scaled = eig.eigenvectors.clone();
            for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
                scaled.column_mut(c).scale_mut(lambda.max(0.0).sqrt());
            }
            let mut root = &scaled * eig.eigenvectors.transpose();
            symmetrize(&mut root);
            Ok(SqrtSigma::Dense(root))
        }
    }
}

/// A prepared experiment: the built design and covariance square roots are
/// cached once, then shared across replicates.
pub struct Simulator {
    cfg: SimConfig,
    built: BuiltDesign,
    sqrts: Vec<SqrtSigma>,
    /// Observation-to-level maps per effect; empty for explicit designs.
    levels: Vec<Vec<usize>>,
    design_id: String,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let built = BuiltDesign::build(&cfg.design)?;
        let sqrts = cfg
            .components
            .sigmas
            .iter()
            .map(sqrt_sigma)
            .collect::<Result<Vec<_>>>()?;
        let levels = match &built {
            BuiltDesign::Explicit(_) => Vec::new(),
            _ => built.structured_levels(),
        };
        let design_id = cfg.design.id();
        Ok(Simulator {
            cfg,
            built,
            sqrts,
            levels,
            design_id,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// One draw of the observation matrix, deterministic in (seed, rep).
    pub fn sample_y(&self, rep: usize) -> DMatrix<f64> {
        let n = self.built.n();
        let p = self.cfg.components.p;
        let sizes = self.built.level_counts();
        let mut y = DMatrix::zeros(n, p);
        for (idx, sq) in self.sqrts.iter().enumerate() {
            if matches!(sq, SqrtSigma::Zero) {
                continue;
            }
            let rows = sizes[idx];
            let mut rng = effect_rng(self.cfg.seed, rep, idx);
            let mut g = DMatrix::zeros(rows, p);
            for c in 0..p {
                for r in 0..rows {
                    g[(r, c)] = rng.sample(StandardNormal);
                }
            }
            let a = match sq {
                SqrtSigma::Zero => unreachable!(),
                SqrtSigma::Diagonal(d) => {
                    for (c, &s) in d.iter().enumerate() {
                        g.column_mut(c).scale_mut(s);
                    }
                    g
                }
                SqrtSigma::Dense(root) => &g * root,
            };
            match &self.built {
                BuiltDesign::Explicit(d) => y.gemm(1.0, &d.u[idx], &a, 1.0),
                _ => {
                    if rows == n {
                        y += &a;
                    } else {
                        let lev = &self.levels[idx];
                        for c in 0..p {
                            let src = a.column(c);
                            let mut dst = y.column_mut(c);
                            for x in 0..n {
                                dst[x] += src[lev[x]];
                            }
                        }
                    }
                }
            }
        }
        y
    }

    /// The target estimator for one draw, via the structured fast path.
    pub fn estimate(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        estimate_with(&self.built, y, self.cfg.target)
    }

    /// Sample, estimate, and diagonalize one replicate.
    pub fn replicate(&self, rep: usize) -> Result<EmpiricalSpectrum> {
        let y = self.sample_y(rep);
        let est = self.estimate(&y)?;
        empirical_spectrum(
            &est,
            SpectrumMeta {
                p: self.cfg.components.p,
                design_id: self.design_id.clone(),
                seed: self.cfg.seed,
                replicate: rep,
            },
        )
    }

    /// All replicates, in replicate order; independent substreams make the
    /// result identical whether or not they run concurrently.
    pub fn run(&self) -> Result<Vec<EmpiricalSpectrum>> {
        (0..self.cfg.replicates)
            .into_par_iter()
            .map(|rep| self.replicate(rep))
            .collect()
    }
}

/// RNG substream for one (replicate, effect) pair. Effects occupy a block of
/// 256 streams per replicate, so draws for one effect never shift when
/// another effect's covariance changes between zero and nonzero.
fn effect_rng(seed: u64, rep: usize, effect: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 * 256 + effect as u64 + 1);
    rng
}

/// Y' B_t Y through the level-mean decomposition of B_t where the design
/// provides one, falling back to the dense product otherwise.
pub fn manova_estimate(y: &DMatrix<f64>, design: &DesignSpec, target: usize) -> Result<DMatrix<f64>> {
    estimate_with(&BuiltDesign::build(design)?, y, target)
}

/// Y' B_t Y through the assembled dense estimator matrix. Slower than
/// `manova_estimate` but independent of the sums-of-squares bookkeeping; the
/// two must agree to rounding.
pub fn manova_estimate_dense(
    y: &DMatrix<f64>,
    design: &DesignSpec,
    target: usize,
) -> Result<DMatrix<f64>> {
    let built = BuiltDesign::build(design)?;
    check_rows(&built, y)?;
    let est = built.estimator(target)?;
    let by = &est.b * y;
    let mut out = DMatrix::zeros(y.ncols(), y.ncols());
    out.gemm_tr(1.0, y, &by, 0.0);
    symmetrize(&mut out);
    Ok(out)
}

fn check_rows(built: &BuiltDesign, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != built.n() {
        return Err(Error::dim("observation rows", built.n(), y.nrows()));
    }
    Ok(())
}

fn estimate_with(built: &BuiltDesign, y: &DMatrix<f64>, target: usize) -> Result<DMatrix<f64>> {
    check_rows(built, y)?;
    match built {
        BuiltDesign::OneWay(d) => oneway_estimate(d, y, target),
        BuiltDesign::Balanced(d) => balanced_estimate(d, y, target),
        BuiltDesign::Explicit(_) => {
            let est = built.estimator(target)?;
            let by = &est.b * y;
            let mut out = DMatrix::zeros(y.ncols(), y.ncols());
            out.gemm_tr(1.0, y, &by, 0.0);
            symmetrize(&mut out);
            Ok(out)
        }
    }
}

/// One-way estimators via between/within sums of squares: SS_1 from the
/// size-weighted group-mean deviations, SS_2 = Y'Y minus the group-mean
/// contribution.
fn oneway_estimate(d: &OneWayDesign, y: &DMatrix<f64>, target: usize) -> Result<DMatrix<f64>> {
    let p = y.ncols();
    let n = d.n as f64;
    let i_cnt = d.groups as f64;
    let sums = level_sums(&d.assignment, d.groups, y);
    let mut grand = vec![0.0; p];
    for c in 0..p {
        grand[c] = sums.column(c).sum() / n;
    }
    let mut dev = DMatrix::zeros(d.groups, p);
    let mut scaled = DMatrix::zeros(d.groups, p);
    for (g, &j) in d.group_sizes.iter().enumerate() {
        let j = j as f64;
        let sj = j.sqrt();
        for c in 0..p {
            let mean = sums[(g, c)] / j;
            scaled[(g, c)] = sj * mean;
            dev[(g, c)] = sj * (mean - grand[c]);
        }
    }
    let mut ss2 = DMatrix::zeros(p, p);
    ss2.gemm_tr(1.0, y, y, 0.0);
    ss2.gemm_tr(-1.0, &scaled, &scaled, 1.0);
    let mut out = match target {
        1 => {
            let mut ss1 = DMatrix::zeros(p, p);
            ss1.gemm_tr(1.0, &dev, &dev, 0.0);
            (ss1 / (i_cnt - 1.0) - &ss2 / (n - i_cnt)) / d.k_const
        }
        2 => ss2 / (n - i_cnt),
        _ => {
            return Err(Error::degenerate(format!(
                "one-way designs have targets 1 and 2, got {target}"
            )))
        }
    };
    symmetrize(&mut out);
    Ok(out)
}

/// Balanced estimators via the averaging-operator weights: each stratum
/// contributes (w_r / c_r) S_r' S_r with S_r the matrix of level sums.
fn balanced_estimate(d: &BalancedDesign, y: &DMatrix<f64>, target: usize) -> Result<DMatrix<f64>> {
    let p = y.ncols();
    let n = d.lattice.n;
    let w = d.pi_weights(target)?;
    let mut out = DMatrix::zeros(p, p);
    for (r, &wr) in w.iter().enumerate() {
        if wr == 0.0 {
            continue;
        }
        let alpha = wr / d.lattice.coefs[r] as f64;
        if d.lattice.sizes[r] == n {
            out.gemm_tr(alpha, y, y, 1.0);
        } else {
            let s = level_sums(&d.incidence[r], d.lattice.sizes[r], y);
            out.gemm_tr(alpha, &s, &s, 1.0);
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

fn level_sums(lev: &[usize], count: usize, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = y.shape();
    let mut s = DMatrix::zeros(count, p);
    for c in 0..p {
        let src = y.column(c);
        for x in 0..n {
            s[(lev[x], c)] += src[x];
        }
    }
    s
}

/// Sorted eigenvalues of a symmetric estimator. The input is symmetrized
/// first so rounding asymmetry cannot leak complex parts into the solve.
pub fn empirical_spectrum(est: &DMatrix<f64>, meta: SpectrumMeta) -> Result<EmpiricalSpectrum> {
    if est.nrows() != est.ncols() {
        return Err(Error::dim("estimator matrix", est.nrows(), est.ncols()));
    }
    let mut sym = est.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    EmpiricalSpectrum::new(eig.eigenvalues.iter().copied().collect(), meta)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::validate_components;
    use approx::assert_abs_diff_eq;

    fn meta(p: usize) -> SpectrumMeta {
        SpectrumMeta {
            p,
            design_id: "test".to_string(),
            seed: 0,
            replicate: 0,
        }
    }

    fn diag_components(diags: &[Vec<f64>]) -> VarianceComponents {
        VarianceComponents::from_diagonals(diags).unwrap()
    }

    fn oneway_cfg(group_sizes: &[usize], diags: &[Vec<f64>], seed: u64) -> SimConfig {
        SimConfig {
            design: DesignSpec::OneWay {
                group_sizes: group_sizes.to_vec(),
            },
            components: diag_components(diags),
            seed,
            replicates: 1,
            target: 1,
        }
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    #[test]
    fn same_seed_and_rep_reproduce_y_bitwise() {
        let cfg = oneway_cfg(
            &[3, 4, 5],
            &[vec![1.0, 0.5, 0.25], vec![0.5, 1.0, 2.0]],
            7,
        );
        let sim = Simulator::new(cfg).unwrap();
        let y1 = sim.sample_y(3);
        let y2 = sim.sample_y(3);
        assert_eq!(y1, y2);
        let y3 = sim.sample_y(4);
        assert!(y1 != y3);
    }

    #[test]
    fn zero_components_give_zero_y() {
        let cfg = oneway_cfg(&[3, 3], &[vec![0.0, 0.0], vec![0.0, 0.0]], 1);
        let sim = Simulator::new(cfg).unwrap();
        let y = sim.sample_y(0);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroing_one_component_leaves_other_draws_alone() {
        let active = oneway_cfg(&[4, 4], &[vec![1.0, 1.0], vec![1.0, 1.0]], 11);
        let residual_only = oneway_cfg(&[4, 4], &[vec![0.0, 0.0], vec![1.0, 1.0]], 11);
        let both = Simulator::new(active).unwrap().sample_y(2);
        let res = Simulator::new(residual_only).unwrap().sample_y(2);
        let lone = oneway_cfg(&[4, 4], &[vec![1.0, 1.0], vec![0.0, 0.0]], 11);
        let group_only = Simulator::new(lone).unwrap().sample_y(2);
        assert_abs_diff_eq!(max_abs_diff(&both, &(&res + &group_only)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn identical_rows_give_zero_oneway_estimates() {
        let design = DesignSpec::OneWay {
            group_sizes: vec![3, 4],
        };
        let row = [1.5, -2.0, 0.5];
        let y = DMatrix::from_fn(7, 3, |_, c| row[c]);
        for target in [1, 2] {
            let est = manova_estimate(&y, &design, target).unwrap();
            assert!(est.iter().all(|&v| v.abs() < 1e-12), "target {target}");
        }
    }

    #[test]
    fn structured_and_dense_estimates_agree() {
        let designs = [
            DesignSpec::OneWay {
                group_sizes: vec![3, 5, 4],
            },
            DesignSpec::NestedBalanced {
                levels: vec![3, 2, 2],
            },
            DesignSpec::CrossedTwoWay {
                i: 2,
                j: 3,
                k: 2,
                l: 2,
            },
        ];
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for design in designs {
            let n = design.n();
            let p = 4;
            let y = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            for target in 1..=design.k() {
                let fast = manova_estimate(&y, &design, target).unwrap();
                let dense = manova_estimate_dense(&y, &design, target).unwrap();
                assert!(
                    max_abs_diff(&fast, &dense) < 1e-10,
                    "{} target {target}: gap {}",
                    design.id(),
                    max_abs_diff(&fast, &dense)
                );
            }
        }
    }

    #[test]
    fn explicit_design_reproduces_structured_sampling() {
        let group_sizes = vec![3usize, 4];
        let n = 7;
        let design = DesignSpec::OneWay {
            group_sizes: group_sizes.clone(),
        };
        let built = BuiltDesign::build(&design).unwrap();
        let b = built.estimator(1).unwrap().b;
        let mut u1 = DMatrix::zeros(n, 2);
        for (x, &g) in built.structured_levels()[0].iter().enumerate() {
            u1[(x, g)] = 1.0;
        }
        let explicit = DesignSpec::Explicit {
            b: b.clone(),
            u: vec![u1, DMatrix::identity(n, n)],
        };
        let diags = [vec![1.0, 0.5], vec![0.25, 2.0]];
        let sim_structured = Simulator::new(SimConfig {
            design,
            components: diag_components(&diags),
            seed: 9,
            replicates: 1,
            target: 1,
        })
        .unwrap();
        let sim_explicit = Simulator::new(SimConfig {
            design: explicit,
            components: diag_components(&diags),
            seed: 9,
            replicates: 1,
            target: 1,
        })
        .unwrap();
        let ys = sim_structured.sample_y(0);
        let ye = sim_explicit.sample_y(0);
        assert!(max_abs_diff(&ys, &ye) < 1e-12);
        let est_s = sim_structured.estimate(&ys).unwrap();
        let est_e = sim_explicit.estimate(&ye).unwrap();
        assert!(max_abs_diff(&est_s, &est_e) < 1e-10);
    }

    #[test]
    fn dense_sqrt_squares_back_to_the_component() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0]);
        let m = c.transpose() * &c;
        let parts = validate_components(&[m.clone()]).unwrap();
        match sqrt_sigma(&parts.sigmas[0]).unwrap() {
            SqrtSigma::Dense(root) => {
                assert!(max_abs_diff(&(&root * &root), &m) < 1e-10);
                assert!(max_abs_diff(&root, &root.transpose()) < 1e-14);
            }
            other => panic!("expected dense square root, got {other:?}"),
        }
    }

    #[test]
    fn spectrum_of_diagonal_matrix_is_its_diagonal() {
        let est = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, 1.0, 2.0]));
        let spec = empirical_spectrum(&est, meta(3)).unwrap();
        assert_eq!(spec.eigenvalues, vec![1.0, 2.0, 3.0]);
        let zero = DMatrix::zeros(3, 3);
        let spec0 = empirical_spectrum(&zero, meta(3)).unwrap();
        assert!(spec0.eigenvalues.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        let cfg = oneway_cfg(
            &[6, 6, 6, 6],
            &[vec![1.0, 0.3, 0.7, 1.5], vec![1.0, 1.0, 1.0, 1.0]],
            21,
        );
        let sim = Simulator::new(cfg).unwrap();
        let y = sim.sample_y(0);
        let est = sim.estimate(&y).unwrap();
        let spec = empirical_spectrum(&est, meta(4)).unwrap();
        let sum: f64 = spec.eigenvalues.iter().sum();
        assert_abs_diff_eq!(sum, est.trace(), epsilon = 1e-10);
    }

    #[test]
    fn residual_estimator_rank_is_bounded() {
        let group_sizes = vec![4usize, 4, 4];
        let n: usize = group_sizes.iter().sum();
        let groups = group_sizes.len();
        let p = 20;
        let diags = [vec![0.5; 20], vec![1.0; 20]];
        let mut cfg = oneway_cfg(&group_sizes, &diags, 3);
        cfg.target = 2;
        let sim = Simulator::new(cfg).unwrap();
        let y = sim.sample_y(0);
        let est = sim.estimate(&y).unwrap();
        let spec = empirical_spectrum(&est, meta(p)).unwrap();
        let scale = spec
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let rank = spec
            .eigenvalues
            .iter()
            .filter(|&&v| v.abs() > 1e-10 * scale)
            .count();
        assert!(rank <= p.min(n - groups), "rank {rank}");
    }

    #[test]
    fn residual_only_sampling_recovers_identity_covariance() {
        let p = 4;
        let reps = 400;
        let mut cfg = oneway_cfg(&[5, 5, 5], &[vec![0.0; 4], vec![1.0; 4]], 17);
        cfg.replicates = reps;
        cfg.target = 2;
        let sim = Simulator::new(cfg).unwrap();
        let n = 15.0;
        let mut acc = DMatrix::zeros(p, p);
        for rep in 0..reps {
            let y = sim.sample_y(rep);
            acc.gemm_tr(1.0 / (n * reps as f64), &y, &y, 1.0);
        }
        for i in 0..p {
            for j in 0..p {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (acc[(i, j)] - want).abs() < 0.08,
                    "entry ({i},{j}) = {}",
                    acc[(i, j)]
                );
            }
        }
    }

    #[test]
    fn monte_carlo_mean_matches_components() {
        let levels = vec![6usize, 2, 2];
        let design = DesignSpec::NestedBalanced {
            levels: levels.clone(),
        };
        let diags = [vec![1.0, 0.5, 0.2], vec![0.5, 1.0, 0.3], vec![1.0, 1.0, 1.0]];
        let reps = 600;
        let p = 3;
        for target in 1..=3 {
            let sim = Simulator::new(SimConfig {
                design: design.clone(),
                components: diag_components(&diags),
                seed: 31,
                replicates: reps,
                target,
            })
            .unwrap();
            let mut mean = DMatrix::zeros(p, p);
            let mut second = DMatrix::zeros(p, p);
            for rep in 0..reps {
                let y = sim.sample_y(rep);
                let est = sim.estimate(&y).unwrap();
                mean += &est;
                second += est.map(|v| v * v);
            }
            mean /= reps as f64;
            second /= reps as f64;
            for i in 0..p {
                for j in 0..p {
                    let var = (second[(i, j)] - mean[(i, j)] * mean[(i, j)]).max(0.0);
                    let se = (var / reps as f64).sqrt();
                    let want = if i == j { diags[target - 1][i] } else { 0.0 };
                    let gap = (mean[(i, j)] - want).abs();
                    assert!(
                        gap <= 4.0 * se + 1e-12,
                        "target {target} entry ({i},{j}): mean {} want {want} se {se}",
                        mean[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn residual_spectrum_stays_near_mp_bulk() {
        let group_sizes = vec![5usize; 20];
        let p = 40;
        let mut cfg = oneway_cfg(&group_sizes, &[vec![0.0; 40], vec![1.0; 40]], 53);
        cfg.target = 2;
        let sim = Simulator::new(cfg).unwrap();
        let spec = sim.replicate(0).unwrap();
        let gamma = p as f64 / (100.0 - 20.0) as f64;
        let (_, hi) = crate::closed_form::mp_edges(gamma);
        let max = spec.eigenvalues.last().copied().unwrap();
        assert!(max < hi + 0.1, "max eigenvalue {max} vs edge {hi}");
    }

    #[test]
    fn run_produces_all_replicates_in_order() {
        let mut cfg = oneway_cfg(&[3, 3], &[vec![1.0, 1.0], vec![1.0, 1.0]], 2);
        cfg.replicates = 5;
        let sim = Simulator::new(cfg).unwrap();
        let spectra = sim.run().unwrap();
        assert_eq!(spectra.len(), 5);
        for (rep, s) in spectra.iter().enumerate() {
            assert_eq!(s.meta.replicate, rep);
            assert_eq!(s.meta.p, 2);
            let direct = sim.replicate(rep).unwrap();
            assert_eq!(s.eigenvalues, direct.eigenvalues);
        }
    }

    #[test]
    fn config_validation_rejects_bad_targets_and_counts() {
        let mut cfg = oneway_cfg(&[3, 3], &[vec![1.0], vec![1.0]], 0);
        cfg.target = 3;
        assert!(Simulator::new(cfg).is_err());
        let mut cfg = oneway_cfg(&[3, 3], &[vec![1.0], vec![1.0]], 0);
        cfg.replicates = 0;
        assert!(Simulator::new(cfg).is_err());
        let cfg = oneway_cfg(&[3, 3], &[vec![1.0]], 0);
        assert!(Simulator::new(cfg).is_err());
    }
}
