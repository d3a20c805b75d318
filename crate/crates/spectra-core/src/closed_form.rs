use num_complex::Complex64;

use crate::design_builder::BalancedLattice;
use crate::error::{Error, Result};

/// Division with a hard error on vanishing denominators, which cannot occur
/// while the iterates stay in their half-plane domains; hitting one signals a
/// domain escape rather than a value to regularize.
fn cdiv(num: Complex64, den: Complex64, context: &'static str) -> Result<Complex64> {
    if den.re == 0.0 && den.im == 0.0 {
        return Err(Error::zero_denominator(context));
    }
    let q = num / den;
    if !q.re.is_finite() || !q.im.is_finite() {
        return Err(Error::zero_denominator(context));
    }
    Ok(q)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A design-specific closed-form replacement for the block-trace b-update.
///
/// Every variant consumes the full-length a-vector and returns the
/// full-length b-vector, with zeros at the components that do not enter the
/// target's equations.
#[derive(Clone, Debug)]
pub enum ClosedFormUpdate {
    OneWay {
        group_sizes: Vec<usize>,
        target: usize,
    },
    Nested {
        levels: Vec<usize>,
        target: usize,
    },
    Crossed {
        dims: (usize, usize, usize, usize),
        target: usize,
    },
    Balanced {
        lattice: BalancedLattice,
        target: usize,
    },
}

impl ClosedFormUpdate {
    pub fn k(&self) -> usize {
        match self {
            ClosedFormUpdate::OneWay { .. } => 2,
            ClosedFormUpdate::Nested { levels, .. } => levels.len(),
            ClosedFormUpdate::Crossed { .. } => 5,
            ClosedFormUpdate::Balanced { lattice, .. } => lattice.k,
        }
    }

    pub fn target(&self) -> usize {
        match self {
            ClosedFormUpdate::OneWay { target, .. }
            | ClosedFormUpdate::Nested { target, .. }
            | ClosedFormUpdate::Crossed { target, .. }
            | ClosedFormUpdate::Balanced { target, .. } => *target,
        }
    }

    /// Component indices whose b can be nonzero for this design and target.
    pub fn active(&self) -> Vec<usize> {
        match self {
            ClosedFormUpdate::OneWay { target, .. } => match target {
                1 => vec![1, 2],
                _ => vec![2],
            },
            ClosedFormUpdate::Nested { levels, target } => (*target..=levels.len()).collect(),
            ClosedFormUpdate::Crossed { target, .. } => match target {
                1 => vec![1, 2, 3, 4, 5],
                2 => vec![2, 4, 5],
                3 => vec![3, 4, 5],
                4 => vec![4, 5],
                _ => vec![5],
            },
            ClosedFormUpdate::Balanced { lattice, target } => (1..=lattice.k)
                .filter(|&r| lattice.leq(*target, r))
                .collect(),
        }
    }

    pub fn eval(&self, a: &[Complex64]) -> Result<Vec<Complex64>> {
        if a.len() != self.k() {
            return Err(Error::dim("closed-form a-vector", self.k(), a.len()));
        }
        match self {
            ClosedFormUpdate::OneWay {
                group_sizes,
                target,
            } => {
                let (b1, b2) = oneway_b((a[0], a[1]), group_sizes, *target)?;
                Ok(vec![b1, b2])
            }
            ClosedFormUpdate::Nested { levels, target } => nested_b(a, levels, *target),
            ClosedFormUpdate::Crossed { dims, target } => crossed_b(a, *dims, *target),
            ClosedFormUpdate::Balanced { lattice, target } => {
                balanced_general_b(a, lattice, *target)
            }
        }
    }
}

/// Closed-form b-update for the one-way classification.
pub fn oneway_b(
    a: (Complex64, Complex64),
    group_sizes: &[usize],
    target: usize,
) -> Result<(Complex64, Complex64)> {
    let i = group_sizes.len() as f64;
    let n: usize = group_sizes.iter().sum();
    let nf = n as f64;
    let (a1, a2) = a;
    match target {
        1 => {
            let sum_sq: usize = group_sizes.iter().map(|&j| j * j).sum();
            let k_const = (nf - sum_sq as f64 / nf) / (i - 1.0);
            // Group duplicate sizes so balanced designs cost one division.
            let mut histogram: Vec<(usize, usize)> = Vec::new();
            for &j in group_sizes {
                match histogram.iter_mut().find(|(size, _)| *size == j) {
                    Some((_, count)) => *count += 1,
                    None => histogram.push((j, 1)),
                }
            }
            let mut b1 = Complex64::new(0.0, 0.0);
            let mut sum_inv = Complex64::new(0.0, 0.0);
            for (j, count) in histogram {
                let jf = j as f64;
                let den = real(k_const * i) + i * jf * a1 + nf * a2;
                let inv = cdiv(real(1.0), den, "one-way group denominator")?;
                b1 -= count as f64 * jf * inv;
                sum_inv += count as f64 * inv;
            }
            let lead = cdiv(
                real(nf - i),
                real(k_const * (nf - i)) - nf * a2,
                "one-way residual denominator",
            )?;
            Ok((b1, lead - sum_inv))
        }
        2 => {
            let b2 = cdiv(
                real(-(nf - i)),
                real(nf - i) + nf * a2,
                "one-way residual denominator",
            )?;
            Ok((Complex64::new(0.0, 0.0), b2))
        }
        _ => Err(Error::degenerate(format!(
            "one-way designs have targets 1 and 2, got {target}"
        ))),
    }
}

/// Closed-form b-update for the balanced nested classification.
///
/// Components below the target do not enter the equations; the corresponding
/// entries of `a` are ignored and the returned b entries are zero.
pub fn nested_b(a: &[Complex64], levels: &[usize], target: usize) -> Result<Vec<Complex64>> {
    let k = levels.len();
    if a.len() != k {
        return Err(Error::dim("nested a-vector", k, a.len()));
    }
    if target == 0 || target > k {
        return Err(Error::degenerate(format!(
            "nested target must lie in 1..={k}, got {target}"
        )));
    }
    let r = target;
    let q_r: Complex64 = a[r - 1..].iter().sum();
    let j_r = levels[r - 1] as f64;
    let first = cdiv(
        real(j_r - 1.0),
        real(j_r - 1.0) + j_r * q_r,
        "nested target denominator",
    )?;
    let mut b = vec![Complex64::new(0.0, 0.0); k];
    b[r - 1] = -first;
    if r < k {
        let q_next: Complex64 = a[r..].iter().sum();
        let j_next = levels[r] as f64;
        let second = cdiv(
            real(j_next - 1.0),
            real(j_next - 1.0) - q_next,
            "nested successor denominator",
        )?;
        let diff = first - second;
        let mut prod = 1.0;
        for s in r + 1..=k {
            prod *= levels[s - 1] as f64;
            b[s - 1] = -diff / prod;
        }
    }
    Ok(b)
}

/// Closed-form b-update for the replicated crossed two-way classification.
///
/// Target 2 follows the displayed corollary; target 1 uses the four-term
/// gamma system; targets 3, 4, 5 follow the successor rule of the lattice.
pub fn crossed_b(
    a: &[Complex64],
    dims: (usize, usize, usize, usize),
    target: usize,
) -> Result<Vec<Complex64>> {
    if a.len() != 5 {
        return Err(Error::dim("crossed a-vector", 5, a.len()));
    }
    let (iu, ju, ku, lu) = dims;
    let (i, j, k, l) = (iu as f64, ju as f64, ku as f64, lu as f64);
    let zero = Complex64::new(0.0, 0.0);
    let q = [
        a.iter().sum::<Complex64>(),
        a[1] + a[3] + a[4],
        a[2] + a[3] + a[4],
        a[3] + a[4],
        a[4],
    ];
    let mut b = vec![zero; 5];
    match target {
        1 => {
            let g1 = cdiv(
                real(i - 1.0),
                real(i - 1.0) + i * q[0],
                "crossed gamma_1 denominator",
            )?;
            let g2 = cdiv(
                real(j - 1.0),
                real(j - 1.0) - q[1],
                "crossed gamma_2 denominator",
            )?;
            let g3 = cdiv(
                real(k - 1.0),
                real(k - 1.0) - q[2],
                "crossed gamma_3 denominator",
            )?;
            let g4 = cdiv(
                real((j - 1.0) * (k - 1.0)),
                real((j - 1.0) * (k - 1.0)) + q[3],
                "crossed gamma_4 denominator",
            )?;
            b[0] = -g1;
            b[1] = -(g1 - g2) / j;
            b[2] = -(g1 - g3) / k;
            b[3] = -(g1 - g2 - g3 + g4) / (j * k);
            b[4] = b[3] / l;
        }
        2 => {
            let first = cdiv(
                real(j - 1.0),
                real(j - 1.0) + j * q[1],
                "crossed target denominator",
            )?;
            let second = cdiv(
                real((j - 1.0) * (k - 1.0)),
                real((j - 1.0) * (k - 1.0)) - j * q[3],
                "crossed interaction denominator",
            )?;
            b[1] = -first;
            b[3] = -(first - second) / k;
            b[4] = b[3] / l;
        }
        3 | 4 | 5 => {
            let sizes = [i, i * j, i * k, i * j * k, i * j * k * l];
            let d = [
                i - 1.0,
                i * (j - 1.0),
                i * (k - 1.0),
                i * (j - 1.0) * (k - 1.0),
                i * j * k * (l - 1.0),
            ];
            let t = target - 1;
            let i_t = sizes[t];
            let first = cdiv(
                real(1.0),
                real(1.0) + (i_t / d[t]) * q[t],
                "crossed target denominator",
            )?;
            b[t] = -first;
            if target < 5 {
                // Successor of 3 is 4 and of 4 is 5.
                let s = target; // 0-based index of the successor component
                let second = cdiv(
                    real(1.0),
                    real(1.0) - (i_t / d[s]) * q[s],
                    "crossed successor denominator",
                )?;
                let diff = first - second;
                for r in target..5 {
                    b[r] = -(i_t / sizes[r]) * diff;
                }
            }
        }
        _ => {
            return Err(Error::degenerate(format!(
                "crossed target must lie in 1..=5, got {target}"
            )))
        }
    }
    Ok(b)
}

/// Generic closed-form b-update for any balanced-design lattice.
pub fn balanced_general_b(
    a: &[Complex64],
    lattice: &BalancedLattice,
    target: usize,
) -> Result<Vec<Complex64>> {
    let k = lattice.k;
    if a.len() != k {
        return Err(Error::dim("balanced a-vector", k, a.len()));
    }
    if target == 0 || target > k {
        return Err(Error::degenerate(format!(
            "balanced target must lie in 1..={k}, got {target}"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut q = vec![zero; k + 1];
    for (u, qu) in q.iter_mut().enumerate().skip(1) {
        for rp in 1..=k {
            if lattice.leq(u, rp) {
                *qu += a[rp - 1];
            }
        }
    }
    let i_t = lattice.sizes[target] as f64;
    let mut gammas = vec![zero; k + 1];
    for u in 1..=k {
        let mu = lattice.mobius[target][u];
        if mu == 0 {
            continue;
        }
        gammas[u] = cdiv(
            real(1.0),
            real(1.0) + (i_t / lattice.dims[u] as f64) * mu as f64 * q[u],
            "balanced lattice denominator",
        )?;
    }
    let mut b = vec![zero; k];
    for r in 1..=k {
        let mut sum = zero;
        for u in 1..=k {
            let mu = lattice.mobius[target][u];
            if mu != 0 && lattice.leq(u, r) {
                sum += mu as f64 * gammas[u];
            }
        }
        b[r - 1] = -(i_t / lattice.sizes[r] as f64) * sum;
    }
    Ok(b)
}

/// Stieltjes transform of the Marcenko-Pastur law with aspect ratio gamma:
/// the root of gamma*z*m^2 + (z + gamma - 1)*m + 1 = 0 in the upper
/// half-plane.
pub fn mp_stieltjes(z: Complex64, gamma: f64) -> Complex64 {
    let aa = gamma * z;
    let bb = z + gamma - 1.0;
    let disc = bb * bb - 4.0 * aa;
    let mut sq = disc.sqrt();
    // Pick the square-root sign that avoids cancellation in bb + sq.
    if bb.re * sq.re + bb.im * sq.im < 0.0 {
        sq = -sq;
    }
    let qq = -0.5 * (bb + sq);
    let r1 = qq / aa;
    let r2 = 1.0 / qq;
    if r1.im > r2.im {
        r1
    } else {
        r2
    }
}

/// Support edges (lower, upper) of the Marcenko-Pastur bulk.
pub fn mp_edges(gamma: f64) -> (f64, f64) {
    let s = gamma.sqrt();
    ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s))
}

/// Density of the absolutely continuous part of the Marcenko-Pastur law.
pub fn mp_density(x: f64, gamma: f64) -> f64 {
    let (lo, hi) = mp_edges(gamma);
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * gamma * x)
}
