//! Deterministic congenial post-processing.
//!
//! Noisy case and death vectors are first projected (in L2) onto
//! `{Σ cases = s, cases ≥ deaths ≥ 0}` and then rounded to the nearest
//! integer point (in L1) that keeps those constraints exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const SUM_TOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;
const CONTRACT_TOL: f64 = 1e-6;

/// Nearest point of the cone `{c ≥ d ≥ 0}` to `(u, b)`.
fn project_cone(u: f64, b: f64) -> (f64, f64) {
    if u >= b && b >= 0.0 {
        return (u, b);
    }
    let axis = u.max(0.0);
    let diag = (0.5 * (u + b)).max(0.0);
    let d_axis = (u - axis).powi(2) + b * b;
    let d_diag = (u - diag).powi(2) + (b - diag).powi(2);
    if d_axis <= d_diag {
        (axis, 0.0)
    } else {
        (diag, diag)
    }
}

/// L2 projection of noisy counts onto the congenial set.
///
/// The sum constraint is dualized with a scalar shift `λ` on the case
/// coordinates; each county then reduces to projecting `(c + λ, d)` onto
/// the cone `c ≥ d ≥ 0`, and `λ` is found by bisection.
pub fn project_continuous(
    noisy_cases: &[f64],
    noisy_deaths: &[f64],
    total: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if noisy_cases.len() != noisy_deaths.len() || noisy_cases.is_empty() {
        return Err(Error::InvalidInput(format!(
            "case and death vectors must be nonempty and equal length ({} vs {})",
            noisy_cases.len(),
            noisy_deaths.len()
        )));
    }
    if !(total >= 0.0) || !total.is_finite() {
        return Err(Error::InvalidInput(format!("total {total} must be finite and >= 0")));
    }
    if noisy_cases.iter().chain(noisy_deaths).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("noisy counts must be finite".into()));
    }

    let solve = |lambda: f64| -> (Vec<f64>, Vec<f64>) {
        noisy_cases
            .iter()
            .zip(noisy_deaths)
            .map(|(&c, &d)| project_cone(c + lambda, d))
            .unzip()
    };
    let case_sum = |lambda: f64| -> f64 {
        noisy_cases
            .iter()
            .zip(noisy_deaths)
            .map(|(&c, &d)| project_cone(c + lambda, d).0)
            .sum()
    };

    let scale = noisy_cases
        .iter()
        .chain(noisy_deaths)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut lo, mut hi) = (-2.0 * scale - total, 2.0 * scale + total);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if case_sum(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (lo_gap, hi_gap) = ((case_sum(lo) - total).abs(), (case_sum(hi) - total).abs());
    let (mut cases, deaths) = solve(if lo_gap < hi_gap { lo } else { hi });

    // Spread the last few ulps of sum error over the unclamped coordinates.
    let residual = total - cases.iter().sum::<f64>();
    let free: Vec<usize> = (0..cases.len()).filter(|&j| cases[j] > deaths[j]).collect();
    if residual.abs() > 0.0 && !free.is_empty() {
        let share = residual / free.len() as f64;
        for j in free {
            cases[j] = (cases[j] + share).max(deaths[j]);
        }
    }
    Ok((cases, deaths))
}

/// L1 cost of rounding one county to cases `up ? floor + 1 : floor`, with
/// deaths rounded as well as the ordering allows.
fn county_cost(c: f64, d: f64, case_floor: f64, up: bool) -> f64 {
    let cases = case_floor + if up { 1.0 } else { 0.0 };
    let death_floor = d.floor();
    let mut best = (death_floor - d).abs();
    if death_floor + 1.0 <= cases {
        best = best.min((death_floor + 1.0 - d).abs());
    }
    (cases - c).abs() + best
}

fn best_deaths(d: f64, cases: f64) -> f64 {
    let death_floor = d.floor();
    if death_floor + 1.0 <= cases && (death_floor + 1.0 - d) < (d - death_floor) {
        death_floor + 1.0
    } else {
        death_floor
    }
}

/// Rounds a continuous congenial point to the L1-nearest integer point that
/// satisfies the same constraints.
///
/// Each county is floored and then either kept or raised by one case; the
/// `s − Σ⌊c⌋` leftover units go to the counties where raising is cheapest
/// once the death coordinate is re-rounded under the ordering constraint.
/// With no ordering conflicts this is the descending-fractional-part rule.
/// Ties go to the lowest county index.
pub fn round_congenial(
    cont_cases: &[f64],
    cont_deaths: &[f64],
    total: u64,
) -> Result<(Vec<u64>, Vec<u64>)> {
    if cont_cases.len() != cont_deaths.len() || cont_cases.is_empty() {
        return Err(Error::InvalidInput(
            "case and death vectors must be nonempty and equal length".into(),
        ));
    }
    let s = total as f64;
    let tol = CONTRACT_TOL * (1.0 + s);
    let sum: f64 = cont_cases.iter().sum();
    if (sum - s).abs() > tol {
        return Err(Error::Validation(format!(
            "continuous cases sum to {sum}, expected {total}"
        )));
    }
    for (j, (&c, &d)) in cont_cases.iter().zip(cont_deaths).enumerate() {
        if !c.is_finite() || !d.is_finite() || d < -tol || c < d - tol {
            return Err(Error::Validation(format!(
                "county {j}: ({c}, {d}) violates cases >= deaths >= 0"
            )));
        }
    }

    let cases: Vec<f64> = cont_cases.iter().map(|c| c.max(0.0)).collect();
    let deaths: Vec<f64> = cont_deaths
        .iter()
        .zip(&cases)
        .map(|(d, c)| d.clamp(0.0, *c))
        .collect();
    let floors: Vec<f64> = cases.iter().map(|c| c.floor()).collect();
    let floor_sum: f64 = floors.iter().sum();
    let leftover = s - floor_sum;
    if leftover < 0.0 || leftover > cases.len() as f64 {
        return Err(Error::Validation(format!(
            "cannot distribute {leftover} leftover units over {} counties",
            cases.len()
        )));
    }
    let leftover = leftover as usize;

    let mut order: Vec<(f64, usize)> = (0..cases.len())
        .map(|j| {
            let gain = county_cost(cases[j], deaths[j], floors[j], true)
                - county_cost(cases[j], deaths[j], floors[j], false);
            (gain, j)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out_cases = floors.clone();
    for &(_, j) in order.iter().take(leftover) {
        out_cases[j] += 1.0;
    }
    let out_deaths: Vec<f64> = deaths
        .iter()
        .zip(&out_cases)
        .map(|(&d, &c)| best_deaths(d, c))
        .collect();
    Ok((
        out_cases.iter().map(|&c| c as u64).collect(),
        out_deaths.iter().map(|&d| d as u64).collect(),
    ))
}

/// Both post-processing stages in sequence.
pub fn congenial_postprocess(
    noisy_cases: &[f64],
    noisy_deaths: &[f64],
    total: u64,
) -> Result<(Vec<u64>, Vec<u64>)> {
    let (c, d) = project_continuous(noisy_cases, noisy_deaths, total as f64)?;
    round_congenial(&c, &d, total)
}

/// Linear equality constraints `A y = b`.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl AffineConstraint {
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != rhs.len() {
            return Err(Error::InvalidInput(format!(
                "{} constraint rows but {} right-hand sides",
                matrix.nrows(),
                rhs.len()
            )));
        }
        Ok(Self { matrix, rhs })
    }

    /// `Σ y = total` in `dim` dimensions.
    pub fn sum_to(dim: usize, total: f64) -> Self {
        Self {
            matrix: DMatrix::from_element(1, dim, 1.0),
            rhs: DVector::from_element(1, total),
        }
    }

    /// The linear subspace spanned by the columns of `basis`.
    pub fn span(basis: &DMatrix<f64>) -> Self {
        let dim = basis.nrows();
        let q = basis.clone().qr().q();
        let complement = DMatrix::identity(dim, dim) - &q * q.transpose();
        Self {
            matrix: complement,
            rhs: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Euclidean projection onto `{y : A y = b}` through an orthonormal basis of
/// the row space of `A`.
pub fn project_generic(y: &[f64], constraint: &AffineConstraint) -> Result<Vec<f64>> {
    if y.len() != constraint.dim() {
        return Err(Error::InvalidInput(format!(
            "point has dimension {}, constraint acts on {}",
            y.len(),
            constraint.dim()
        )));
    }
    let a = &constraint.matrix;
    let b = &constraint.rhs;
    let svd = a.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let u = svd.u.as_ref().expect("requested U");
    let sigma_max = svd.singular_values.max();
    let cutoff = sigma_max * 1e-12 * a.nrows().max(a.ncols()) as f64;

    // Particular solution and row-space basis from the nonzero singular triplets.
    let mut particular = DVector::zeros(a.ncols());
    let mut rows = Vec::new();
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > cutoff {
            let coeff = u.column(k).dot(b) / sv;
            particular += v_t.row(k).transpose() * coeff;
            rows.push(v_t.row(k).transpose());
        }
    }
    let residual = (a * &particular - b).norm();
    if residual > 1e-9 * (1.0 + b.norm()) {
        return Err(Error::Infeasible(format!(
            "linear constraints are inconsistent (residual {residual:.3e})"
        )));
    }
    let y = DVector::from_column_slice(y);
    let offset = &y - &particular;
    let mut projected = y.clone();
    for r in &rows {
        projected -= r * r.dot(&offset);
    }
    Ok(projected.iter().copied().collect())
}
