use nalgebra::DMatrix;

use crate::closed_form::ClosedFormUpdate;
use crate::error::{Error, Result};
use crate::model_core::{DesignSpec, FFactor, SYMMETRY_TOL};

/// Subspace lattice of a balanced classification design.
///
/// Index 0 is the grand-mean stratum; indices 1..=k are the random effects in
/// declaration order, with the residual effect last. The index order is
/// compatible with the partial order (t before u whenever t precedes u).
#[derive(Clone, Debug)]
pub struct BalancedLattice {
    /// Number of random effects (lattice has k + 1 elements).
    pub k: usize,
    /// Partial order: order[t][u] = 1{t precedes-or-equals u}.
    pub order: Vec<Vec<bool>>,
    /// Stratum dimensions d_r = dim of the orthogonal complement layer.
    pub dims: Vec<usize>,
    /// Level counts I_r (I_0 = 1, I_k = n).
    pub sizes: Vec<usize>,
    /// Replication coefficients c_r = n / I_r.
    pub coefs: Vec<usize>,
    /// Moebius function of the order, as an integer matrix.
    pub mobius: Vec<Vec<i64>>,
    /// Successor map: succ[t] = s when the Moebius row of t is
    /// exactly +1 at t and -1 at s.
    pub succ: Vec<Option<usize>>,
    /// Number of observations.
    pub n: usize,
}

impl BalancedLattice {
    pub fn new(
        k: usize,
        order: Vec<Vec<bool>>,
        dims: Vec<usize>,
        sizes: Vec<usize>,
        n: usize,
    ) -> Result<Self> {
        let m = k + 1;
        if order.len() != m || order.iter().any(|row| row.len() != m) {
            return Err(Error::dim("lattice order relation", m, order.len()));
        }
        if dims.len() != m || sizes.len() != m {
            return Err(Error::dim("lattice dims/sizes", m, dims.len().min(sizes.len())));
        }
        if sizes[0] != 1 {
            return Err(Error::degenerate("lattice must start at the grand-mean stratum"));
        }
        for t in 0..m {
            if !order[t][t] {
                return Err(Error::degenerate("lattice order must be reflexive"));
            }
            for u in 0..t {
                if order[t][u] {
                    return Err(Error::degenerate(
                        "lattice indices must be listed in a topological order",
                    ));
                }
            }
        }
        for t in 0..m {
            for u in 0..m {
                for v in 0..m {
                    if order[t][u] && order[u][v] && !order[t][v] {
                        return Err(Error::degenerate("lattice order must be transitive"));
                    }
                }
            }
        }
        if dims.iter().sum::<usize>() != n {
            return Err(Error::degenerate(format!(
                "stratum dimensions sum to {}, expected n = {n}",
                dims.iter().sum::<usize>()
            )));
        }
        let mut coefs = Vec::with_capacity(m);
        for (r, &size) in sizes.iter().enumerate() {
            if size == 0 || n % size != 0 {
                return Err(Error::degenerate(format!(
                    "level count I_{r} = {size} does not divide n = {n}"
                )));
            }
            coefs.push(n / size);
        }

        let mobius = invert_order(&order);
        for t in 0..m {
            for v in 0..m {
                let sum: i64 = (0..m)
                    .filter(|&u| order[t][u])
                    .map(|u| mobius[u][v])
                    .sum();
                let want = i64::from(t == v);
                if sum != want {
                    return Err(Error::degenerate(
                        "Moebius inversion identity failed for the lattice order",
                    ));
                }
            }
        }

        let mut succ = vec![None; m];
        for t in 1..m {
            let row = &mobius[t];
            if row[t] != 1 {
                continue;
            }
            let negatives: Vec<usize> = (0..m).filter(|&u| row[u] == -1).collect();
            let extras = (0..m).any(|u| u != t && row[u] != 0 && row[u] != -1);
            if negatives.len() == 1 && !extras {
                succ[t] = Some(negatives[0]);
            }
        }

        Ok(BalancedLattice {
            k,
            order,
            dims,
            sizes,
            coefs,
            mobius,
            succ,
            n,
        })
    }

    /// t precedes-or-equals u.
    pub fn leq(&self, t: usize, u: usize) -> bool {
        self.order[t][u]
    }
}

/// Inverts a unitriangular zeta matrix over the integers.
fn invert_order(order: &[Vec<bool>]) -> Vec<Vec<i64>> {
    let m = order.len();
    let mut mob = vec![vec![0i64; m]; m];
    for v in 0..m {
        mob[v][v] = 1;
        for t in (0..v).rev() {
            let s: i64 = (t + 1..=v)
                .filter(|&u| order[t][u])
                .map(|u| mob[u][v])
                .sum();
            mob[t][v] = -s;
        }
    }
    mob
}

/// A sums-of-squares estimator matrix B_t together with its expansion in the
/// design's projection basis.
#[derive(Clone, Debug)]
pub struct EstimatorMatrix {
    pub target: usize,
    pub b: DMatrix<f64>,
    /// Sparse form B_t = sum of beta_tu * pi_u, as (u, beta_tu) pairs.
    pub as_projections: Vec<(usize, f64)>,
}

/// One-way classification structure: U_1 groups, U_2 identity, the two
/// estimator matrices, and the normalizing constant K.
#[derive(Clone, Debug)]
pub struct OneWayParts {
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub b1: EstimatorMatrix,
    pub b2: EstimatorMatrix,
    pub k_const: f64,
}

/// Builds the one-way design pieces for group sizes J_1..J_I.
pub fn build_oneway(group_sizes: &[usize]) -> Result<OneWayParts> {
    let design = OneWayDesign::new(group_sizes)?;
    let n = design.n;
    let i = design.groups;
    let mut u1 = DMatrix::zeros(n, i);
    for (x, &g) in design.assignment.iter().enumerate() {
        u1[(x, g)] = 1.0;
    }
    Ok(OneWayParts {
        u1,
        u2: DMatrix::identity(n, n),
        b1: design.estimator(1)?,
        b2: design.estimator(2)?,
        k_const: design.k_const,
    })
}

/// Builds the nested-design lattice and the estimator matrix of every target.
pub fn build_nested(levels: &[usize]) -> Result<(BalancedLattice, Vec<EstimatorMatrix>)> {
    let design = BalancedDesign::nested(levels)?;
    let estimators = (1..=design.lattice.k)
        .map(|t| design.estimator(t))
        .collect::<Result<Vec<_>>>()?;
    Ok((design.lattice, estimators))
}

/// Builds the crossed-design lattice and the estimator matrix of every target.
pub fn build_crossed(
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<(BalancedLattice, Vec<EstimatorMatrix>)> {
    let design = BalancedDesign::crossed(i, j, k, l)?;
    let estimators = (1..=design.lattice.k)
        .map(|t| design.estimator(t))
        .collect::<Result<Vec<_>>>()?;
    Ok((design.lattice, estimators))
}

/// Stratum projections pi_0..pi_k of a one-way or balanced design.
pub fn projections(design: &DesignSpec) -> Result<Vec<DMatrix<f64>>> {
    BuiltDesign::build(design)?.projections()
}

#[derive(Clone, Debug)]
pub(crate) struct OneWayDesign {
    pub group_sizes: Vec<usize>,
    pub n: usize,
    pub groups: usize,
    pub k_const: f64,
    /// Group index of each observation (groups are contiguous blocks).
    pub assignment: Vec<usize>,
    level_counts: Vec<usize>,
}

impl OneWayDesign {
    fn new(group_sizes: &[usize]) -> Result<Self> {
        DesignSpec::OneWay {
            group_sizes: group_sizes.to_vec(),
        }
        .validate()?;
        let n: usize = group_sizes.iter().sum();
        let groups = group_sizes.len();
        let sum_sq: usize = group_sizes.iter().map(|&j| j * j).sum();
        let k_const = (n as f64 - sum_sq as f64 / n as f64) / (groups as f64 - 1.0);
        let mut assignment = Vec::with_capacity(n);
        for (g, &j) in group_sizes.iter().enumerate() {
            assignment.extend(std::iter::repeat(g).take(j));
        }
        Ok(OneWayDesign {
            group_sizes: group_sizes.to_vec(),
            n,
            groups,
            k_const,
            assignment,
            level_counts: vec![groups, n],
        })
    }

    /// Dense n x n matrix w_p * P + w_pi0 * pi_0 + w_id * Id, where P is the
    /// projection onto group-constant vectors.
    fn combo(&self, w_p: f64, w_pi0: f64, w_id: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut b = DMatrix::zeros(n, n);
        let base = w_pi0 / n as f64;
        for y in 0..n {
            let gy = self.assignment[y];
            let within = w_p / self.group_sizes[gy] as f64;
            let mut col = b.column_mut(y);
            for x in 0..n {
                let mut v = base;
                if self.assignment[x] == gy {
                    v += within;
                }
                if x == y {
                    v += w_id;
                }
                col[x] = v;
            }
        }
        b
    }

    fn estimator(&self, target: usize) -> Result<EstimatorMatrix> {
        let n = self.n as f64;
        let i = self.groups as f64;
        match target {
            1 => {
                let alpha = 1.0 / (self.k_const * (i - 1.0));
                let beta = -1.0 / (self.k_const * (n - i));
                Ok(EstimatorMatrix {
                    target,
                    b: self.combo(alpha - beta, -alpha, beta),
                    as_projections: vec![(1, alpha), (2, beta)],
                })
            }
            2 => {
                let gamma = 1.0 / (n - i);
                Ok(EstimatorMatrix {
                    target,
                    b: self.combo(-gamma, 0.0, gamma),
                    as_projections: vec![(2, gamma)],
                })
            }
            _ => Err(Error::degenerate(format!(
                "one-way designs have targets 1 and 2, got {target}"
            ))),
        }
    }

    /// Estimator matrix whose spectral law the solver computes. For target 1
    /// this is the group-mean variant that shifts weight from pi_1 to the full
    /// group-constant projection; it differs from the exact estimator by a
    /// rank-one plus O(1/n) perturbation and shares its limit law.
    fn law_matrix(&self, target: usize) -> Result<DMatrix<f64>> {
        let n = self.n as f64;
        let i = self.groups as f64;
        match target {
            1 => {
                let alpha = 1.0 / (self.k_const * i);
                let beta = -1.0 / (self.k_const * (n - i));
                Ok(self.combo(alpha - beta, 0.0, beta))
            }
            2 => Ok(self.estimator(2)?.b),
            _ => Err(Error::degenerate(format!(
                "one-way designs have targets 1 and 2, got {target}"
            ))),
        }
    }

    fn projections(&self) -> Vec<DMatrix<f64>> {
        vec![
            self.combo(0.0, 1.0, 0.0),
            self.combo(1.0, -1.0, 0.0),
            self.combo(-1.0, 0.0, 1.0),
        ]
    }
}

#[derive(Clone, Debug)]
enum BalancedFamily {
    Nested { levels: Vec<usize> },
    Crossed { i: usize, j: usize, k: usize, l: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct BalancedDesign {
    pub lattice: BalancedLattice,
    /// Level index of each observation for lattice elements 0..=k.
    pub incidence: Vec<Vec<usize>>,
    family: BalancedFamily,
    level_counts: Vec<usize>,
}

impl BalancedDesign {
    pub fn nested(levels: &[usize]) -> Result<Self> {
        DesignSpec::NestedBalanced {
            levels: levels.to_vec(),
        }
        .validate()?;
        let k = levels.len();
        let n: usize = levels.iter().product();
        let mut sizes = vec![1usize; k + 1];
        for r in 1..=k {
            sizes[r] = sizes[r - 1] * levels[r - 1];
        }
        let mut dims = vec![1usize; k + 1];
        for r in 1..=k {
            dims[r] = sizes[r - 1] * (levels[r - 1] - 1);
        }
        let order: Vec<Vec<bool>> = (0..=k).map(|t| (0..=k).map(|u| t <= u).collect()).collect();
        let lattice = BalancedLattice::new(k, order, dims, sizes.clone(), n)?;
        let incidence = (0..=k)
            .map(|r| {
                let c = lattice.coefs[r];
                (0..n).map(|x| x / c).collect()
            })
            .collect();
        Ok(BalancedDesign {
            lattice,
            incidence,
            family: BalancedFamily::Nested {
                levels: levels.to_vec(),
            },
            level_counts: sizes[1..].to_vec(),
        })
    }

    pub fn crossed(i: usize, j: usize, k: usize, l: usize) -> Result<Self> {
        DesignSpec::CrossedTwoWay { i, j, k, l }.validate()?;
        let n = i * j * k * l;
        let sizes = vec![1, i, i * j, i * k, i * j * k, n];
        let dims = vec![
            1,
            i - 1,
            i * (j - 1),
            i * (k - 1),
            i * (j - 1) * (k - 1),
            i * j * k * (l - 1),
        ];
        // Order: 0 below everything; 1 below 2, 3, 4, 5; 2 and 3 both below
        // 4 and 5 (but incomparable); 4 below 5.
        let mut order = vec![vec![false; 6]; 6];
        for t in 0..6 {
            order[t][t] = true;
        }
        for u in 1..6 {
            order[0][u] = true;
        }
        for u in 2..6 {
            order[1][u] = true;
        }
        order[2][4] = true;
        order[2][5] = true;
        order[3][4] = true;
        order[3][5] = true;
        order[4][5] = true;
        let lattice = BalancedLattice::new(5, order, dims, sizes.clone(), n)?;

        let mut incidence = vec![vec![0usize; n]; 6];
        for x in 0..n {
            let l_idx = x % l;
            let k_idx = (x / l) % k;
            let j_idx = (x / (l * k)) % j;
            let i_idx = x / (l * k * j);
            let _ = l_idx;
            incidence[1][x] = i_idx;
            incidence[2][x] = i_idx * j + j_idx;
            incidence[3][x] = i_idx * k + k_idx;
            incidence[4][x] = x / l;
            incidence[5][x] = x;
        }
        Ok(BalancedDesign {
            lattice,
            incidence,
            family: BalancedFamily::Crossed { i, j, k, l },
            level_counts: sizes[1..].to_vec(),
        })
    }

    /// Weights w_r of B_t = sum_r w_r * Pi_r over the averaging operators
    /// Pi_r (obtained by pushing the projection expansion through Moebius
    /// inversion). The simulator consumes these to form Y' B_t Y from level
    /// means.
    pub fn pi_weights(&self, target: usize) -> Result<Vec<f64>> {
        let m = self.lattice.k + 1;
        let beta = self.betas(target)?;
        let mut w = vec![0.0; m];
        for (u, coef) in beta {
            for (r, wr) in w.iter_mut().enumerate() {
                let mu = self.lattice.mobius[r][u];
                if mu != 0 {
                    *wr += coef * mu as f64;
                }
            }
        }
        Ok(w)
    }

    /// Coefficients beta_tu of B_t = sum_u beta_tu * pi_u.
    fn betas(&self, target: usize) -> Result<Vec<(usize, f64)>> {
        let m = self.lattice.k + 1;
        if target == 0 || target >= m {
            return Err(Error::degenerate(format!(
                "target must lie in 1..={}, got {target}",
                self.lattice.k
            )));
        }
        Ok((0..m)
            .filter_map(|u| {
                let mu = self.lattice.mobius[target][u];
                (mu != 0).then(|| {
                    (
                        u,
                        mu as f64 / (self.lattice.coefs[target] as f64 * self.lattice.dims[u] as f64),
                    )
                })
            })
            .collect())
    }

    pub fn estimator(&self, target: usize) -> Result<EstimatorMatrix> {
        let as_projections = self.betas(target)?;
        let w = self.pi_weights(target)?;
        Ok(EstimatorMatrix {
            target,
            b: self.assemble(&w),
            as_projections,
        })
    }

    /// Dense sum_r w_r * Pi_r with Pi_r the level-averaging operators.
    fn assemble(&self, w: &[f64]) -> DMatrix<f64> {
        let n = self.lattice.n;
        let mut b = DMatrix::zeros(n, n);
        for (r, &wr) in w.iter().enumerate() {
            if wr == 0.0 {
                continue;
            }
            let scale = wr / self.lattice.coefs[r] as f64;
            let lev = &self.incidence[r];
            for y in 0..n {
                let ly = lev[y];
                let mut col = b.column_mut(y);
                for x in 0..n {
                    if lev[x] == ly {
                        col[x] += scale;
                    }
                }
            }
        }
        b
    }

    fn projections(&self) -> Vec<DMatrix<f64>> {
        let m = self.lattice.k + 1;
        (0..m)
            .map(|u| {
                let w: Vec<f64> = (0..m).map(|r| self.lattice.mobius[r][u] as f64).collect();
                self.assemble(&w)
            })
            .collect()
    }

    fn closed_form(&self, target: usize) -> ClosedFormUpdate {
        match &self.family {
            BalancedFamily::Nested { levels } => ClosedFormUpdate::Nested {
                levels: levels.clone(),
                target,
            },
            BalancedFamily::Crossed { i, j, k, l } => ClosedFormUpdate::Crossed {
                dims: (*i, *j, *k, *l),
                target,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ExplicitDesign {
    pub b: DMatrix<f64>,
    pub u: Vec<DMatrix<f64>>,
    level_counts: Vec<usize>,
}

/// A design with its construction artifacts, ready to emit estimator
/// matrices, projections, and the general-model embedding.
#[derive(Clone, Debug)]
pub(crate) enum BuiltDesign {
    OneWay(OneWayDesign),
    Balanced(BalancedDesign),
    Explicit(ExplicitDesign),
}

impl BuiltDesign {
    pub fn build(spec: &DesignSpec) -> Result<Self> {
        spec.validate()?;
        match spec {
            DesignSpec::OneWay { group_sizes } => {
                Ok(BuiltDesign::OneWay(OneWayDesign::new(group_sizes)?))
            }
            DesignSpec::NestedBalanced { levels } => {
                Ok(BuiltDesign::Balanced(BalancedDesign::nested(levels)?))
            }
            DesignSpec::CrossedTwoWay { i, j, k, l } => {
                Ok(BuiltDesign::Balanced(BalancedDesign::crossed(*i, *j, *k, *l)?))
            }
            DesignSpec::Explicit { b, u } => {
                let n = b.nrows();
                let mut sym = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        sym[(i, j)] = 0.5 * (b[(i, j)] + b[(j, i)]);
                    }
                }
                Ok(BuiltDesign::Explicit(ExplicitDesign {
                    b: sym,
                    level_counts: u.iter().map(|m| m.ncols()).collect(),
                    u: u.clone(),
                }))
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            BuiltDesign::OneWay(d) => d.n,
            BuiltDesign::Balanced(d) => d.lattice.n,
            BuiltDesign::Explicit(d) => d.b.nrows(),
        }
    }

    pub fn k(&self) -> usize {
        self.level_counts().len()
    }

    pub fn level_counts(&self) -> &[usize] {
        match self {
            BuiltDesign::OneWay(d) => &d.level_counts,
            BuiltDesign::Balanced(d) => &d.level_counts,
            BuiltDesign::Explicit(d) => &d.level_counts,
        }
    }

    pub fn estimator(&self, target: usize) -> Result<EstimatorMatrix> {
        match self {
            BuiltDesign::OneWay(d) => d.estimator(target),
            BuiltDesign::Balanced(d) => d.estimator(target),
            BuiltDesign::Explicit(d) => {
                if target == 0 || target > d.level_counts.len() {
                    return Err(Error::degenerate(format!(
                        "explicit design target must lie in 1..={}, got {target}",
                        d.level_counts.len()
                    )));
                }
                Ok(EstimatorMatrix {
                    target,
                    b: d.b.clone(),
                    as_projections: Vec::new(),
                })
            }
        }
    }

    /// Estimator matrix used for the spectral law (differs from
    /// `estimator` only for the one-way target-1 case).
    pub fn law_matrix(&self, target: usize) -> Result<DMatrix<f64>> {
        match self {
            BuiltDesign::OneWay(d) => d.law_matrix(target),
            _ => Ok(self.estimator(target)?.b),
        }
    }

    pub fn closed_form(&self, target: usize) -> Option<ClosedFormUpdate> {
        match self {
            BuiltDesign::OneWay(d) => Some(ClosedFormUpdate::OneWay {
                group_sizes: d.group_sizes.clone(),
                target,
            }),
            BuiltDesign::Balanced(d) => Some(d.closed_form(target)),
            BuiltDesign::Explicit(_) => None,
        }
    }

    pub fn projections(&self) -> Result<Vec<DMatrix<f64>>> {
        match self {
            BuiltDesign::OneWay(d) => Ok(d.projections()),
            BuiltDesign::Balanced(d) => Ok(d.projections()),
            BuiltDesign::Explicit(_) => Err(Error::degenerate(
                "stratum projections are defined for the built-in design families only",
            )),
        }
    }

    /// F = U' B U and its rank factors, with U stacking sqrt(I_r) * U_r.
    pub fn embed(&self, b: &DMatrix<f64>) -> (DMatrix<f64>, FFactor) {
        let n = self.n();
        let sizes = self.level_counts().to_vec();
        let k = sizes.len();
        let n_plus: usize = sizes.iter().sum();
        let mut offsets = Vec::with_capacity(k);
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }

        let mut rhs = DMatrix::zeros(n, n_plus);
        let mut lhs = DMatrix::zeros(n_plus, n);
        let mut f = DMatrix::zeros(n_plus, n_plus);

        match self {
            BuiltDesign::Explicit(d) => {
                for (s, us) in d.u.iter().enumerate() {
                    let sq = (sizes[s] as f64).sqrt();
                    let block = b * us * sq;
                    rhs.view_mut((0, offsets[s]), (n, sizes[s])).copy_from(&block);
                    lhs.view_mut((offsets[s], 0), (sizes[s], n))
                        .copy_from(&(us.transpose() * sq));
                }
                for (r, ur) in d.u.iter().enumerate() {
                    let sq = (sizes[r] as f64).sqrt();
                    for s in 0..k {
                        let block =
                            ur.transpose() * rhs.view((0, offsets[s]), (n, sizes[s])) * sq;
                        f.view_mut((offsets[r], offsets[s]), (sizes[r], sizes[s]))
                            .copy_from(&block);
                    }
                }
            }
            _ => {
                // Structured designs: columns of U_r are disjoint indicators,
                // so U_r' acts by aggregating rows over levels.
                let levels: Vec<Vec<usize>> = self.structured_levels();
                for s in 0..k {
                    let sq = (sizes[s] as f64).sqrt();
                    for y in 0..n {
                        let col = offsets[s] + levels[s][y];
                        rhs.column_mut(col).axpy(sq, &b.column(y), 1.0);
                    }
                }
                for (r, lev_r) in levels.iter().enumerate() {
                    let sq = (sizes[r] as f64).sqrt();
                    for x in 0..n {
                        lhs[(offsets[r] + lev_r[x], x)] = sq;
                    }
                    for col in 0..n_plus {
                        let src = rhs.column(col);
                        for x in 0..n {
                            f[(offsets[r] + lev_r[x], col)] += sq * src[x];
                        }
                    }
                }
            }
        }
        (f, FFactor { lhs, rhs })
    }

    /// Level index of each observation per effect; the indicator columns of
    /// U_r are recovered as `column(lev_r[x]) has a 1 in row x`.
    pub(crate) fn structured_levels(&self) -> Vec<Vec<usize>> {
        match self {
            BuiltDesign::OneWay(d) => {
                vec![d.assignment.clone(), (0..d.n).collect()]
            }
            BuiltDesign::Balanced(d) => d.incidence[1..].to_vec(),
            BuiltDesign::Explicit(_) => unreachable!("explicit designs use dense embedding"),
        }
    }

}

/// Symmetry gap check used by tests and the CLI when ingesting matrices.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let gap = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .fold(0.0_f64, |acc, (i, j)| acc.max((m[(i, j)] - m[(j, i)]).abs()));
    gap / scale
}

/// Asserts B is symmetric within tolerance; used on ingest paths.
pub fn check_symmetric(m: &DMatrix<f64>, context: &str) -> Result<()> {
    let rel = relative_asymmetry(m);
    if rel > SYMMETRY_TOL {
        return Err(Error::degenerate(format!(
            "{context} is asymmetric: relative gap {rel:.3e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn incidence_trace(built: &BuiltDesign, s: usize, m: &DMatrix<f64>) -> f64 {
        let levels = built.structured_levels();
        let lev = &levels[s - 1];
        let n = built.n();
        let mut total = 0.0;
        for y in 0..n {
            let ly = lev[y];
            let col = m.column(y);
            for x in 0..n {
                if lev[x] == ly {
                    total += col[x];
                }
            }
        }
        total
    }

    fn projector_checks(ps: &[DMatrix<f64>], expected_ranks: &[usize]) {
        let n = ps[0].nrows();
        let mut sum = DMatrix::zeros(n, n);
        for (p, &rank) in ps.iter().zip(expected_ranks) {
            let idem = (p * p - p).abs().max();
            assert!(idem < 1e-12, "projector not idempotent: {idem:.3e}");
            let sym = (p - p.transpose()).abs().max();
            assert!(sym < 1e-12);
            assert!(
                (p.trace() - rank as f64).abs() < 1e-10,
                "rank {} != {rank}",
                p.trace()
            );
            sum += p;
        }
        let gap = (sum - DMatrix::identity(n, n)).abs().max();
        assert!(gap < 1e-12, "projections do not sum to identity: {gap:.3e}");
        for a in 0..ps.len() {
            for b in 0..a {
                let prod = (&ps[a] * &ps[b]).abs().max();
                assert!(prod < 1e-12, "projections {a} and {b} not orthogonal");
            }
        }
    }

    #[test]
    fn oneway_projections_complete() {
        let spec = DesignSpec::OneWay {
            group_sizes: vec![2, 2],
        };
        let ps = projections(&spec).unwrap();
        projector_checks(&ps, &[1, 1, 2]);
        // pi_0 is the all-ones matrix over n.
        let gap = (&ps[0] - DMatrix::from_element(4, 4, 0.25)).abs().max();
        assert!(gap < 1e-14);
    }

    #[test]
    fn balanced_oneway_k_equals_group_size() {
        let parts = build_oneway(&[4, 4, 4]).unwrap();
        assert!((parts.k_const - 4.0).abs() < 1e-12);
        let parts = build_oneway(&[3, 4, 5]).unwrap();
        // K = (12 - 50/12) / 2
        assert!((parts.k_const - (12.0 - 50.0 / 12.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn oneway_unbalanced_trace_identity() {
        // Tr(U_1' B_1 U_1) computed from the dense estimator agrees with the
        // projection form, and equals 1 by the unbiasedness normalization.
        let parts = build_oneway(&[1, 3]).unwrap();
        let dense = (parts.u1.transpose() * &parts.b1.b * &parts.u1).trace();
        let spec = DesignSpec::OneWay {
            group_sizes: vec![1, 3],
        };
        let ps = projections(&spec).unwrap();
        let mut from_proj = DMatrix::zeros(4, 4);
        for &(u, coef) in &parts.b1.as_projections {
            from_proj += coef * &ps[u];
        }
        let via_proj = (parts.u1.transpose() * from_proj * &parts.u1).trace();
        assert!((dense - via_proj).abs() < 1e-12);
        assert!((dense - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nested_mobius_is_bidiagonal() {
        let (lattice, _) = build_nested(&[2, 2, 2]).unwrap();
        for t in 0..=3 {
            for u in 0..=3 {
                let want = if t == u {
                    1
                } else if u == t + 1 {
                    -1
                } else {
                    0
                };
                assert_eq!(lattice.mobius[t][u], want, "mobius({t},{u})");
            }
        }
        assert_eq!(lattice.succ, vec![None, Some(2), Some(3), None]);
    }

    #[test]
    fn nested_dimensions_sum_to_n() {
        let (lattice, _) = build_nested(&[3, 2, 2]).unwrap();
        assert_eq!(lattice.dims, vec![1, 2, 3, 6]);
        assert_eq!(lattice.dims.iter().sum::<usize>(), 12);
        assert_eq!(lattice.sizes, vec![1, 3, 6, 12]);
        assert_eq!(lattice.coefs, vec![12, 4, 2, 1]);
    }

    #[test]
    fn nested_projection_ranks() {
        let spec = DesignSpec::NestedBalanced { levels: vec![2, 2] };
        let ps = projections(&spec).unwrap();
        projector_checks(&ps, &[1, 1, 2]);
    }

    #[test]
    fn crossed_mobius_matches_table() {
        let (lattice, _) = build_crossed(2, 2, 2, 2).unwrap();
        let want: [[i64; 5]; 5] = [
            [1, -1, -1, 1, 0],
            [0, 1, 0, -1, 0],
            [0, 0, 1, -1, 0],
            [0, 0, 0, 1, -1],
            [0, 0, 0, 0, 1],
        ];
        for t in 1..=5 {
            for u in 1..=5 {
                assert_eq!(lattice.mobius[t][u], want[t - 1][u - 1], "mobius({t},{u})");
            }
            assert_eq!(lattice.mobius[t][0], 0);
        }
        assert_eq!(
            lattice.succ[1..],
            [None, Some(4), Some(4), Some(5), None]
        );
    }

    #[test]
    fn crossed_estimator_projection_coefficients() {
        let (i, j, k, l) = (2, 3, 2, 2);
        let (lattice, estimators) = build_crossed(i, j, k, l).unwrap();
        let b2 = &estimators[1];
        assert_eq!(b2.target, 2);
        let c1 = 1.0 / ((i * (j - 1) * k * l) as f64);
        let c2 = -1.0 / ((i * (j - 1) * (k - 1) * k * l) as f64);
        assert_eq!(b2.as_projections.len(), 2);
        let (u_a, v_a) = b2.as_projections[0];
        let (u_b, v_b) = b2.as_projections[1];
        assert_eq!((u_a, u_b), (2, 4));
        assert!((v_a - c1).abs() < 1e-15);
        assert!((v_b - c2).abs() < 1e-15);
        assert_eq!(lattice.dims, vec![1, 1, 4, 2, 4, 12]);
    }

    #[test]
    fn crossed_projections_orthogonal() {
        let spec = DesignSpec::CrossedTwoWay {
            i: 2,
            j: 2,
            k: 2,
            l: 2,
        };
        let ps = projections(&spec).unwrap();
        projector_checks(&ps, &[1, 1, 2, 2, 2, 8]);
    }

    #[test]
    fn unbiasedness_traces() {
        // Tr(U_s' B_t U_s) = delta_ts is the defining MANOVA normalization.
        let specs: Vec<DesignSpec> = vec![
            DesignSpec::OneWay {
                group_sizes: vec![2, 3, 4],
            },
            DesignSpec::NestedBalanced {
                levels: vec![3, 2, 2],
            },
            DesignSpec::CrossedTwoWay {
                i: 2,
                j: 2,
                k: 2,
                l: 2,
            },
        ];
        for spec in &specs {
            let built = BuiltDesign::build(spec).unwrap();
            let k = built.k();
            for t in 1..=k {
                let est = built.estimator(t).unwrap();
                for s in 1..=k {
                    let tr = incidence_trace(&built, s, &est.b);
                    let want = if s == t { 1.0 } else { 0.0 };
                    assert!(
                        (tr - want).abs() < 1e-10,
                        "{}: Tr(U_{s}' B_{t} U_{s}) = {tr}",
                        spec.id()
                    );
                }
            }
        }
    }

    #[test]
    fn incidence_projection_traces() {
        // Tr(U_r' pi_t U_r) = c_r * d_t when t precedes r, else 0.
        let spec = DesignSpec::CrossedTwoWay {
            i: 2,
            j: 2,
            k: 2,
            l: 2,
        };
        let built = BuiltDesign::build(&spec).unwrap();
        let lattice = build_crossed(2, 2, 2, 2).unwrap().0;
        let ps = built.projections().unwrap();
        for r in 1..=5 {
            for (t, p) in ps.iter().enumerate() {
                let tr = incidence_trace(&built, r, p);
                let want = if lattice.leq(t, r) {
                    (lattice.coefs[r] * lattice.dims[t]) as f64
                } else {
                    0.0
                };
                assert!(
                    (tr - want).abs() < 1e-10,
                    "Tr(U_{r}' pi_{t} U_{r}) = {tr}, want {want}"
                );
            }
        }
    }

    #[test]
    fn nested_estimator_matches_projection_formula() {
        let levels = [3, 2, 2];
        let (_, estimators) = build_nested(&levels).unwrap();
        let spec = DesignSpec::NestedBalanced {
            levels: levels.to_vec(),
        };
        let ps = projections(&spec).unwrap();
        let n = 12.0;
        for (idx, est) in estimators.iter().enumerate() {
            let t = idx + 1;
            let jt = levels[idx] as f64;
            let mut want = (jt / (n * (jt - 1.0))) * &ps[t];
            if t < levels.len() {
                let jn = levels[idx + 1] as f64;
                want -= (1.0 / (n * (jn - 1.0))) * &ps[t + 1];
            }
            let gap = (&est.b - want).abs().max();
            assert!(gap < 1e-13, "target {t} differs by {gap:.3e}");
        }
    }

    #[test]
    fn explicit_design_round_trip() {
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.2, 0.0, 0.2, 0.4]);
        let u = vec![DMatrix::identity(3, 3)];
        let spec = DesignSpec::Explicit { b: b.clone(), u };
        let built = BuiltDesign::build(&spec).unwrap();
        let est = built.estimator(1).unwrap();
        assert_eq!(est.b, b);
        assert!(built.closed_form(1).is_none());
        assert!(built.projections().is_err());
    }

    #[test]
    fn mobius_identity_random_chain() {
        // Chain of length 6 with an extra relation layer exercises inversion.
        let (lattice, _) = build_nested(&[2, 3, 2, 2, 2]).unwrap();
        let m = lattice.k + 1;
        for t in 0..m {
            for v in 0..m {
                let sum: i64 = (0..m)
                    .filter(|&u| lattice.order[t][u])
                    .map(|u| lattice.mobius[u][v])
                    .sum();
                assert_eq!(sum, i64::from(t == v));
            }
        }
    }
}
