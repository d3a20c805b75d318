use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::closed_form::ClosedFormUpdate;
use crate::design_builder::BuiltDesign;
use crate::error::{Error, Result};

/// Relative tolerance for accepting and repairing asymmetric input matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance for negative eigenvalues of covariance components.
pub const PSD_TOL: f64 = 1e-8;
/// Relative tolerance used when F is detected as a scalar multiple of the identity.
const SCALAR_F_TOL: f64 = 1e-14;

/// A trait covariance matrix, stored dense or as a declared diagonal.
///
/// The diagonal form triggers O(p) trace evaluations in the solver instead of
/// a p*p factorization per iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum Sigma {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Sigma {
    pub fn dim(&self) -> usize {
        match self {
            Sigma::Dense(m) => m.nrows(),
            Sigma::Diagonal(d) => d.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Sigma::Diagonal(_))
    }

    pub fn as_diagonal(&self) -> Option<&DVector<f64>> {
        match self {
            Sigma::Diagonal(d) => Some(d),
            Sigma::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Sigma::Dense(m) => m.clone(),
            Sigma::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Sigma::Dense(m) => m.iter().all(|&x| x == 0.0),
            Sigma::Diagonal(d) => d.iter().all(|&x| x == 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Sigma::Dense(m) => m.iter().fold(0.0, |acc, &x| acc.max(x.abs())),
            Sigma::Diagonal(d) => d.iter().fold(0.0, |acc, &x| acc.max(x.abs())),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Sigma::Dense(m) => m.trace(),
            Sigma::Diagonal(d) => d.sum(),
        }
    }

    /// Tr(X * Sigma) for a complex matrix X of matching dimension.
    pub(crate) fn trace_product(&self, x: &DMatrix<Complex64>) -> Complex64 {
        match self {
            Sigma::Dense(m) => {
                // Sigma is symmetric, so Tr(X*Sigma) = sum_ij X_ij * Sigma_ij,
                // which reads both buffers linearly.
                x.as_slice()
                    .iter()
                    .zip(m.as_slice())
                    .map(|(xv, &sv)| xv * sv)
                    .sum()
            }
            Sigma::Diagonal(d) => (0..d.len()).map(|i| x[(i, i)] * d[i]).sum(),
        }
    }

    /// m += w * Sigma.
    pub(crate) fn add_scaled_to(&self, m: &mut DMatrix<Complex64>, w: Complex64) {
        match self {
            Sigma::Dense(s) => {
                for (mv, &sv) in m.as_mut_slice().iter_mut().zip(s.as_slice()) {
                    *mv += w * sv;
                }
            }
            Sigma::Diagonal(d) => {
                for i in 0..d.len() {
                    m[(i, i)] += w * d[i];
                }
            }
        }
    }
}

/// A repair applied while validating covariance components.
#[derive(Clone, Debug, PartialEq)]
pub struct Correction {
    pub index: usize,
    pub kind: CorrectionKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CorrectionKind {
    /// Input was asymmetric within tolerance and replaced by (A + A')/2.
    Symmetrized { max_gap: f64 },
    /// Slightly negative eigenvalues were clipped to zero.
    EigenvaluesClipped { count: usize, most_negative: f64 },
}

/// Validated trait covariances Sigma_1..Sigma_k for the k random effects.
#[derive(Clone, Debug)]
pub struct VarianceComponents {
    pub sigmas: Vec<Sigma>,
    pub p: usize,
    /// Repairs applied on ingest, in component order.
    pub corrections: Vec<Correction>,
}

impl VarianceComponents {
    pub fn k(&self) -> usize {
        self.sigmas.len()
    }

    /// Validates a list of declared-diagonal components given by their diagonals.
    pub fn from_diagonals(diags: &[Vec<f64>]) -> Result<Self> {
        if diags.is_empty() {
            return Err(Error::degenerate("no covariance components supplied"));
        }
        let p = diags[0].len();
        if p == 0 {
            return Err(Error::degenerate("covariance components have dimension 0"));
        }
        let mut sigmas = Vec::with_capacity(diags.len());
        let mut corrections = Vec::new();
        for (index, d) in diags.iter().enumerate() {
            if d.len() != p {
                return Err(Error::dim(
                    format!("diagonal component {index}"),
                    p,
                    d.len(),
                ));
            }
            let mut v = DVector::from_column_slice(d);
            clip_diagonal(index, &mut v, &mut corrections)?;
            sigmas.push(Sigma::Diagonal(v));
        }
        Ok(VarianceComponents {
            sigmas,
            p,
            corrections,
        })
    }
}

/// Validates raw covariance matrices: symmetrizes within tolerance and clips
/// slightly negative eigenvalues, rejecting anything genuinely indefinite.
pub fn validate_components(raw: &[DMatrix<f64>]) -> Result<VarianceComponents> {
    if raw.is_empty() {
        return Err(Error::degenerate("no covariance components supplied"));
    }
    let p = raw[0].nrows();
    if p == 0 {
        return Err(Error::degenerate("covariance components have dimension 0"));
    }
    let mut sigmas = Vec::with_capacity(raw.len());
    let mut corrections = Vec::new();
    for (index, a) in raw.iter().enumerate() {
        if a.nrows() != a.ncols() {
            return Err(Error::dim(
                format!("component {index} (must be square)"),
                a.nrows(),
                a.ncols(),
            ));
        }
        if a.nrows() != p {
            return Err(Error::dim(format!("component {index}"), p, a.nrows()));
        }

        let scale = a.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        let max_gap = (0..p)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .fold(0.0_f64, |acc, (i, j)| acc.max((a[(i, j)] - a[(j, i)]).abs()));
        if scale > 0.0 && max_gap > SYMMETRY_TOL * scale {
            return Err(Error::AsymmetryTooLarge {
                index,
                relative: max_gap / scale,
            });
        }
        let mut s = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
            }
        }
        if max_gap > 0.0 {
            corrections.push(Correction {
                index,
                kind: CorrectionKind::Symmetrized { max_gap },
            });
        }

        let off_diag_zero = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .all(|(i, j)| i == j || s[(i, j)] == 0.0);
        if off_diag_zero {
            let mut d = s.diagonal();
            clip_diagonal(index, &mut d, &mut corrections)?;
            sigmas.push(Sigma::Diagonal(d));
            continue;
        }

        let eig = nalgebra::SymmetricEigen::try_new(s.clone(), f64::EPSILON, 0)
            .ok_or(Error::EigenFailure)?;
        let min_eig = eig.eigenvalues.min();
        let norm = eig.eigenvalues.amax();
        let threshold = -PSD_TOL * norm;
        if min_eig < threshold {
            return Err(Error::NotPsd {
                index,
                min_eig,
                threshold,
            });
        }
        if min_eig < 0.0 {
            let count = eig.eigenvalues.iter().filter(|&&x| x < 0.0).count();
            let clipped = eig.eigenvalues.map(|x| x.max(0.0));
            let mut rebuilt =
                &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
            let sym = 0.5 * (&rebuilt + rebuilt.transpose());
            rebuilt = sym;
            corrections.push(Correction {
                index,
                kind: CorrectionKind::EigenvaluesClipped {
                    count,
                    most_negative: min_eig,
                },
            });
            sigmas.push(Sigma::Dense(rebuilt));
        } else {
            sigmas.push(Sigma::Dense(s));
        }
    }
    Ok(VarianceComponents {
        sigmas,
        p,
        corrections,
    })
}

fn clip_diagonal(
    index: usize,
    d: &mut DVector<f64>,
    corrections: &mut Vec<Correction>,
) -> Result<()> {
    let norm = d.amax();
    let threshold = -PSD_TOL * norm;
    let min_eig = if d.is_empty() { 0.0 } else { d.min() };
    if min_eig < threshold {
        return Err(Error::NotPsd {
            index,
            min_eig,
            threshold,
        });
    }
    if min_eig < 0.0 {
        let count = d.iter().filter(|&&x| x < 0.0).count();
        for x in d.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        corrections.push(Correction {
            index,
            kind: CorrectionKind::EigenvaluesClipped {
                count,
                most_negative: min_eig,
            },
        });
    }
    Ok(())
}

/// A classification design, either one of the built-in families or an
/// explicit (B, U_1..U_k) pair.
///
/// For `Explicit`, the estimator matrix B must annihilate the fixed-effect
/// design (B X = 0). That requirement is documented rather than checked here,
/// because the fixed effects never enter the spectral equations; the built-in
/// families satisfy it by construction.
#[derive(Clone, Debug)]
pub enum DesignSpec {
    /// One-way classification with group sizes J_1..J_I.
    OneWay { group_sizes: Vec<usize> },
    /// Balanced nested classification with branching factors J_1..J_k.
    NestedBalanced { levels: Vec<usize> },
    /// Balanced crossed two-way classification with I x J x K cells of L
    /// replicates each.
    CrossedTwoWay { i: usize, j: usize, k: usize, l: usize },
    /// Arbitrary symmetric estimator matrix B with incidence matrices U_r.
    Explicit {
        b: DMatrix<f64>,
        u: Vec<DMatrix<f64>>,
    },
}

impl DesignSpec {
    /// Number of random effects (including the residual effect).
    pub fn k(&self) -> usize {
        match self {
            DesignSpec::OneWay { .. } => 2,
            DesignSpec::NestedBalanced { levels } => levels.len(),
            DesignSpec::CrossedTwoWay { .. } => 5,
            DesignSpec::Explicit { u, .. } => u.len(),
        }
    }

    /// Number of observations n.
    pub fn n(&self) -> usize {
        match self {
            DesignSpec::OneWay { group_sizes } => group_sizes.iter().sum(),
            DesignSpec::NestedBalanced { levels } => levels.iter().product(),
            DesignSpec::CrossedTwoWay { i, j, k, l } => i * j * k * l,
            DesignSpec::Explicit { b, .. } => b.nrows(),
        }
    }

    /// Numbers of levels I_1..I_k of each random effect.
    pub fn level_counts(&self) -> Vec<usize> {
        match self {
            DesignSpec::OneWay { group_sizes } => {
                vec![group_sizes.len(), group_sizes.iter().sum()]
            }
            DesignSpec::NestedBalanced { levels } => {
                let mut sizes = Vec::with_capacity(levels.len());
                let mut acc = 1usize;
                for &j in levels {
                    acc *= j;
                    sizes.push(acc);
                }
                sizes
            }
            DesignSpec::CrossedTwoWay { i, j, k, l } => {
                vec![*i, i * j, i * k, i * j * k, i * j * k * l]
            }
            DesignSpec::Explicit { u, .. } => u.iter().map(|m| m.ncols()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DesignSpec::OneWay { group_sizes } => {
                let i = group_sizes.len();
                if i < 2 {
                    return Err(Error::degenerate(format!(
                        "one-way design needs at least 2 groups, got {i}"
                    )));
                }
                if group_sizes.iter().any(|&j| j == 0) {
                    return Err(Error::degenerate("one-way group sizes must be positive"));
                }
                let n: usize = group_sizes.iter().sum();
                if n <= i {
                    return Err(Error::degenerate(format!(
                        "one-way design needs n > I for the residual projection, got n = {n}, I = {i}"
                    )));
                }
                Ok(())
            }
            DesignSpec::NestedBalanced { levels } => {
                if levels.is_empty() {
                    return Err(Error::degenerate("nested design needs at least one level"));
                }
                if levels.iter().any(|&j| j < 2) {
                    return Err(Error::degenerate(
                        "nested design branching factors must all be at least 2",
                    ));
                }
                Ok(())
            }
            DesignSpec::CrossedTwoWay { i, j, k, l } => {
                if *i < 2 {
                    return Err(Error::degenerate(format!(
                        "crossed design needs I >= 2, got I = {i}"
                    )));
                }
                if *j < 2 || *k < 2 || *l < 2 {
                    return Err(Error::degenerate(format!(
                        "crossed design needs J, K, L >= 2, got ({j}, {k}, {l})"
                    )));
                }
                Ok(())
            }
            DesignSpec::Explicit { b, u } => {
                if b.nrows() != b.ncols() {
                    return Err(Error::dim("explicit B (must be square)", b.nrows(), b.ncols()));
                }
                let n = b.nrows();
                if n == 0 {
                    return Err(Error::degenerate("explicit design has no observations"));
                }
                let scale = b.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
                let gap = (0..n)
                    .flat_map(|i| (0..i).map(move |j| (i, j)))
                    .fold(0.0_f64, |acc, (i, j)| {
                        acc.max((b[(i, j)] - b[(j, i)]).abs())
                    });
                if scale > 0.0 && gap > SYMMETRY_TOL * scale {
                    return Err(Error::degenerate(format!(
                        "explicit B is asymmetric: relative gap {:.3e}",
                        gap / scale
                    )));
                }
                if u.is_empty() {
                    return Err(Error::degenerate(
                        "explicit design needs at least one incidence matrix",
                    ));
                }
                for (r, ur) in u.iter().enumerate() {
                    if ur.nrows() != n {
                        return Err(Error::dim(format!("U_{} row count", r + 1), n, ur.nrows()));
                    }
                    if ur.ncols() == 0 {
                        return Err(Error::degenerate(format!(
                            "U_{} has no columns",
                            r + 1
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Compact identifier used in metadata and manifests.
    pub fn id(&self) -> String {
        match self {
            DesignSpec::OneWay { group_sizes } => {
                let n: usize = group_sizes.iter().sum();
                let min = group_sizes.iter().min().copied().unwrap_or(0);
                let max = group_sizes.iter().max().copied().unwrap_or(0);
                if min == max {
                    format!("one_way(I={},J={})", group_sizes.len(), min)
                } else {
                    format!("one_way(I={},n={})", group_sizes.len(), n)
                }
            }
            DesignSpec::NestedBalanced { levels } => {
                let js: Vec<String> = levels.iter().map(|j| j.to_string()).collect();
                format!("nested(J=[{}])", js.join(","))
            }
            DesignSpec::CrossedTwoWay { i, j, k, l } => {
                format!("crossed(I={i},J={j},K={k},L={l})")
            }
            DesignSpec::Explicit { b, u } => {
                format!("explicit(n={},k={})", b.nrows(), u.len())
            }
        }
    }
}

/// Stopping and damping controls for the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Convergence tolerance on iterate movement and equation residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Step fraction applied to each b-update, in (0, 1].
    pub damping: f64,
    /// Halve the damping (down to 1/16) when the residual stalls.
    pub auto_damp: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-12,
            max_iters: 5000,
            damping: 1.0,
            auto_damp: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::degenerate(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::degenerate("solver max_iters must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::degenerate(format!(
                "solver damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Precomputed factor F = lhs * rhs with lhs of size n+ x n and rhs of size
/// n x n+. Lets the block-trace update solve n right-hand sides instead of n+.
#[derive(Clone, Debug)]
pub struct FFactor {
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
}

/// The general solver model: block matrix F with block sizes n_1..n_k and
/// Gram matrices Sigma_r of the trait covariances.
#[derive(Clone, Debug)]
pub struct GeneralModel {
    f: DMatrix<f64>,
    block_sizes: Vec<usize>,
    grams: Vec<Sigma>,
    p: usize,
    /// Spectra of the Gram matrices when all are simultaneously diagonal.
    diag_fast_path: Option<Vec<DVector<f64>>>,
    scalar_f: Option<f64>,
    f_factor: Option<FFactor>,
    closed_form: Option<ClosedFormUpdate>,
}

impl GeneralModel {
    pub fn new(f: DMatrix<f64>, block_sizes: Vec<usize>, grams: Vec<Sigma>, p: usize) -> Result<Self> {
        if f.nrows() != f.ncols() {
            return Err(Error::dim("F (must be square)", f.nrows(), f.ncols()));
        }
        if block_sizes.is_empty() || block_sizes.len() != grams.len() {
            return Err(Error::dim(
                "block sizes vs covariance components",
                grams.len(),
                block_sizes.len(),
            ));
        }
        if block_sizes.iter().any(|&b| b == 0) {
            return Err(Error::degenerate("block sizes must be positive"));
        }
        let n_plus: usize = block_sizes.iter().sum();
        if n_plus != f.nrows() {
            return Err(Error::dim("sum of block sizes", f.nrows(), n_plus));
        }
        for (r, g) in grams.iter().enumerate() {
            if g.dim() != p {
                return Err(Error::dim(format!("gram matrix {}", r + 1), p, g.dim()));
            }
        }

        let scale = f.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        let gap = (0..n_plus)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .fold(0.0_f64, |acc, (i, j)| acc.max((f[(i, j)] - f[(j, i)]).abs()));
        if scale > 0.0 && gap > SYMMETRY_TOL * scale {
            return Err(Error::degenerate(format!(
                "F is not Hermitian: relative gap {:.3e}",
                gap / scale
            )));
        }
        let mut fs = DMatrix::zeros(n_plus, n_plus);
        for i in 0..n_plus {
            for j in 0..n_plus {
                fs[(i, j)] = 0.5 * (f[(i, j)] + f[(j, i)]);
            }
        }

        let diag_fast_path = if grams.iter().all(Sigma::is_diagonal) {
            Some(
                grams
                    .iter()
                    .map(|g| g.as_diagonal().expect("diagonal gram").clone())
                    .collect(),
            )
        } else {
            None
        };

        let scalar_f = if block_sizes.len() == 1 {
            let c = fs[(0, 0)];
            let tol = SCALAR_F_TOL * c.abs().max(1.0);
            let is_scalar = (0..n_plus)
                .flat_map(|i| (0..n_plus).map(move |j| (i, j)))
                .all(|(i, j)| {
                    let want = if i == j { c } else { 0.0 };
                    (fs[(i, j)] - want).abs() <= tol
                });
            is_scalar.then_some(c)
        } else {
            None
        };

        Ok(GeneralModel {
            f: fs,
            block_sizes,
            grams,
            p,
            diag_fast_path,
            scalar_f,
            f_factor: None,
            closed_form: None,
        })
    }

    pub(crate) fn with_factor(mut self, factor: FFactor) -> Self {
        self.f_factor = Some(factor);
        self
    }

    pub fn with_closed_form(mut self, update: ClosedFormUpdate) -> Self {
        self.closed_form = Some(update);
        self
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn grams(&self) -> &[Sigma] {
        &self.grams
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn n_plus(&self) -> usize {
        self.f.nrows()
    }

    /// Spectra of the Gram matrices when every component is diagonal.
    pub fn diag_fast_path(&self) -> Option<&[DVector<f64>]> {
        self.diag_fast_path.as_deref()
    }

    /// The constant c when F = c * Id (single-block models only).
    pub fn scalar_f(&self) -> Option<f64> {
        self.scalar_f
    }

    pub fn f_factor(&self) -> Option<&FFactor> {
        self.f_factor.as_ref()
    }

    pub fn closed_form(&self) -> Option<&ClosedFormUpdate> {
        self.closed_form.as_ref()
    }
}

/// Embeds a design and an estimator matrix B into the general model with
/// F = U' B U, where U stacks sqrt(I_r) * U_r column blocks.
pub fn to_general_model(
    design: &DesignSpec,
    components: &VarianceComponents,
    b: &DMatrix<f64>,
) -> Result<GeneralModel> {
    design.validate()?;
    let built = BuiltDesign::build(design)?;
    general_from_built(&built, components, b)
}

pub(crate) fn general_from_built(
    built: &BuiltDesign,
    components: &VarianceComponents,
    b: &DMatrix<f64>,
) -> Result<GeneralModel> {
    let n = built.n();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::dim("estimator matrix B", n, b.nrows().max(b.ncols())));
    }
    if components.k() != built.k() {
        return Err(Error::dim(
            "covariance components vs design effects",
            built.k(),
            components.k(),
        ));
    }
    let (f, factor) = built.embed(b);
    let model = GeneralModel::new(
        f,
        built.level_counts().to_vec(),
        components.sigmas.clone(),
        components.p,
    )?;
    Ok(model.with_factor(factor))
}

/// Builds the general model for the spectral law of the target component's
/// MANOVA estimator, attaching the design's closed-form b-update when one is
/// known.
pub fn law_model(
    design: &DesignSpec,
    components: &VarianceComponents,
    target: usize,
) -> Result<GeneralModel> {
    design.validate()?;
    let built = BuiltDesign::build(design)?;
    let b = built.law_matrix(target)?;
    let model = general_from_built(&built, components, &b)?;
    Ok(match built.closed_form(target) {
        Some(update) => model.with_closed_form(update),
        None => model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn identity_components_accepted_unchanged() {
        let id = DMatrix::identity(3, 3);
        let vc = validate_components(&[id.clone()]).unwrap();
        assert_eq!(vc.p, 3);
        assert_eq!(vc.k(), 1);
        assert!(vc.corrections.is_empty());
        assert_eq!(vc.sigmas[0].to_dense(), id);
        assert!(vc.sigmas[0].is_diagonal());
    }

    #[test]
    fn near_symmetric_input_is_symmetrized() {
        let mut a = DMatrix::identity(3, 3);
        a[(1, 2)] = 0.5;
        a[(2, 1)] = 0.5 + 1e-12;
        let vc = validate_components(&[a]).unwrap();
        let s = vc.sigmas[0].to_dense();
        assert_eq!(s[(1, 2)], s[(2, 1)]);
        assert!((s[(1, 2)] - 0.5).abs() <= 1e-12);
        assert!(vc
            .corrections
            .iter()
            .any(|c| matches!(c.kind, CorrectionKind::Symmetrized { .. })));
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let a = dm(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        match validate_components(&[a]) {
            Err(Error::AsymmetryTooLarge { index: 0, relative }) => {
                assert!(relative > 1e-10);
            }
            other => panic!("expected AsymmetryTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn negative_eigenvalue_is_rejected() {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -0.5]));
        match validate_components(&[a]) {
            Err(Error::NotPsd { index: 0, min_eig, .. }) => {
                assert!((min_eig + 0.5).abs() < 1e-12);
            }
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clipped() {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1e-12]));
        let vc = validate_components(&[a]).unwrap();
        assert_eq!(vc.sigmas[0].to_dense()[(1, 1)], 0.0);
        assert!(vc
            .corrections
            .iter()
            .any(|c| matches!(c.kind, CorrectionKind::EigenvaluesClipped { count: 1, .. })));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::identity(3, 3);
        assert!(matches!(
            validate_components(&[a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn validation_is_idempotent() {
        let a = dm(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.5]);
        let first = validate_components(&[a]).unwrap();
        let again = validate_components(&[first.sigmas[0].to_dense()]).unwrap();
        let d = (first.sigmas[0].to_dense() - again.sigmas[0].to_dense()).abs().max();
        assert!(d <= 1e-13, "revalidation moved the component by {d:.3e}");
    }

    #[test]
    fn diagonal_components_from_lists() {
        let vc = VarianceComponents::from_diagonals(&[vec![1.0, 2.0], vec![1.0, -1e-12]]).unwrap();
        assert!(vc.sigmas.iter().all(Sigma::is_diagonal));
        assert_eq!(vc.sigmas[1].as_diagonal().unwrap()[1], 0.0);
        assert_eq!(vc.corrections.len(), 1);
    }

    #[test]
    fn design_validation_catches_degenerate_cases() {
        assert!(DesignSpec::OneWay {
            group_sizes: vec![3]
        }
        .validate()
        .is_err());
        assert!(DesignSpec::OneWay {
            group_sizes: vec![1, 1]
        }
        .validate()
        .is_err());
        assert!(DesignSpec::NestedBalanced { levels: vec![3, 1] }
            .validate()
            .is_err());
        assert!(DesignSpec::CrossedTwoWay {
            i: 2,
            j: 1,
            k: 2,
            l: 2
        }
        .validate()
        .is_err());
        assert!(DesignSpec::OneWay {
            group_sizes: vec![2, 3]
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn level_counts_match_design_family() {
        let d = DesignSpec::NestedBalanced {
            levels: vec![3, 2, 2],
        };
        assert_eq!(d.level_counts(), vec![3, 6, 12]);
        assert_eq!(d.n(), 12);
        let c = DesignSpec::CrossedTwoWay {
            i: 3,
            j: 2,
            k: 3,
            l: 2,
        };
        assert_eq!(c.level_counts(), vec![3, 6, 9, 18, 36]);
        assert_eq!(c.n(), 36);
    }

    #[test]
    fn trace_product_matches_dense_algebra() {
        let s = Sigma::Dense(dm(2, 2, &[1.0, 0.5, 0.5, 2.0]));
        let x = DMatrix::from_fn(2, 2, |i, j| Complex64::new((i + 1) as f64, j as f64));
        let dense = x.clone() * s.to_dense().map(|v| Complex64::new(v, 0.0));
        let want = dense[(0, 0)] + dense[(1, 1)];
        let got = s.trace_product(&x);
        assert!((got - want).norm() < 1e-14);

        let d = Sigma::Diagonal(DVector::from_column_slice(&[3.0, 4.0]));
        let dense = x.clone() * d.to_dense().map(|v| Complex64::new(v, 0.0));
        let want = dense[(0, 0)] + dense[(1, 1)];
        assert!((d.trace_product(&x) - want).norm() < 1e-14);
    }

    #[test]
    fn remark_embedding_gives_identity_f() {
        let n = 6;
        let b = DMatrix::from_diagonal_element(n, n, 1.0 / n as f64);
        let u = vec![DMatrix::identity(n, n)];
        let components = VarianceComponents::from_diagonals(&[vec![1.0; 4]]).unwrap();
        let design = DesignSpec::Explicit { b, u };
        let model = to_general_model(&design, &components, &design_b(&design)).unwrap();
        assert_eq!(model.n_plus(), n);
        let gap = (model.f() - DMatrix::identity(n, n)).abs().max();
        assert!(gap < 1e-14);
        let c = model.scalar_f().expect("scalar structure not detected");
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_b_gives_zero_f() {
        let n = 4;
        let design = DesignSpec::Explicit {
            b: DMatrix::zeros(n, n),
            u: vec![DMatrix::identity(n, n)],
        };
        let components = VarianceComponents::from_diagonals(&[vec![1.0; 3]]).unwrap();
        let model = to_general_model(&design, &components, &design_b(&design)).unwrap();
        assert_eq!(model.f().abs().max(), 0.0);
    }

    fn design_b(design: &DesignSpec) -> DMatrix<f64> {
        match design {
            DesignSpec::Explicit { b, .. } => b.clone(),
            _ => panic!("explicit design expected"),
        }
    }

    #[test]
    fn oneway_embedding_matches_brute_force() {
        // One-way balanced I = 2, J = 2 with B = pi_2 / (n - I).
        let design = DesignSpec::OneWay {
            group_sizes: vec![2, 2],
        };
        let built = BuiltDesign::build(&design).unwrap();
        let b = built.estimator(2).unwrap().b;
        let components = VarianceComponents::from_diagonals(&[vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let model = to_general_model(&design, &components, &b).unwrap();

        // Brute force with dense U = (sqrt(I_1) U_1 | sqrt(I_2) U_2).
        let n = 4;
        let u1 = dm(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let u2 = DMatrix::identity(n, n);
        let mut u = DMatrix::zeros(n, 6);
        u.view_mut((0, 0), (4, 2)).copy_from(&(2.0_f64.sqrt() * &u1));
        u.view_mut((0, 2), (4, 4)).copy_from(&(2.0 * u2));
        let brute = u.transpose() * &b * &u;
        let gap = (model.f() - &brute).abs().max();
        assert!(gap < 1e-12, "embedding differs from dense algebra by {gap:.3e}");

        // Frozen value: the U_1 block vanishes because pi_2 annihilates
        // group-constant vectors, and the U_2 block is 2 * pi_2.
        let mut expect = DMatrix::zeros(6, 6);
        let block = dm(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        expect.view_mut((2, 2), (2, 2)).copy_from(&block);
        expect.view_mut((4, 4), (2, 2)).copy_from(&block);
        let gap = (model.f() - &expect).abs().max();
        assert!(gap < 1e-12, "embedding differs from frozen oracle by {gap:.3e}");

        // F factors multiply back to F.
        let factor = model.f_factor().unwrap();
        let gap = (model.f() - &factor.lhs * &factor.rhs).abs().max();
        assert!(gap < 1e-12);
    }

    #[test]
    fn solver_config_defaults_and_validation() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.tol, 1e-12);
        assert_eq!(cfg.max_iters, 5000);
        assert_eq!(cfg.damping, 1.0);
        assert!(cfg.auto_damp);
        cfg.validate().unwrap();
        let bad = SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hermitian_check_rejects_asymmetric_f() {
        let f = dm(2, 2, &[1.0, 0.3, 0.1, 1.0]);
        let grams = vec![Sigma::Diagonal(DVector::from_column_slice(&[1.0])); 2];
        assert!(GeneralModel::new(f, vec![1, 1], grams, 1).is_err());
    }
}
