use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::exponential::{BaseMeasure, Loss, MechanismSpec, Norm};
use crate::mechanisms::knorm::{knorm_gradient_mech, sample_knorm_noise};
use crate::mechanisms::laplace::{log_pmf_unchecked, sample_discrete_laplace};
use crate::rng::{self, Stream};
use crate::sensitivity::{delta_z_count, CountBoundFamily};
use crate::stats::{binomial_pmf, median, ols_slope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaZRow {
    pub n: u64,
    pub z0: f64,
    pub z1: f64,
    pub delta_z: u64,
    pub p1: f64,
    pub p0: f64,
}

/// Count sensitivity over every `(n, z0, z1)` combination, ordered by `n`,
/// then `z0`, then `z1`.
pub fn experiment_delta_z_grid(
    n_values: &[u64],
    z0_grid: &[f64],
    z1_grid: &[f64],
    grid_steps: usize,
) -> Result<Vec<DeltaZRow>> {
    let cells: Vec<(u64, f64, f64)> = n_values
        .iter()
        .flat_map(|&n| z0_grid.iter().flat_map(move |&z0| z1_grid.iter().map(move |&z1| (n, z0, z1))))
        .collect();
    cells
        .par_iter()
        .map(|&(n, z0, z1)| {
            let best = delta_z_count(&CountBoundFamily::new(n, z0, z1)?, grid_steps)?;
            Ok(DeltaZRow {
                n,
                z0,
                z1,
                delta_z: best.delta_z,
                p1: best.p1,
                p0: best.p0,
            })
        })
        .collect()
}

pub fn write_delta_z_csv<W: Write>(writer: W, rows: &[DeltaZRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["n", "z0", "z1", "delta_z", "argmax_p1", "argmax_p0"])?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            r.z0.to_string(),
            r.z1.to_string(),
            r.delta_z.to_string(),
            r.p1.to_string(),
            r.p0.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldResult {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub epsilon: f64,
    pub reps: usize,
    pub mse_project_ambient: f64,
    pub mse_subspace: f64,
    pub se_project_ambient: f64,
    pub se_subspace: f64,
}

impl ManifoldResult {
    pub fn ratio(&self) -> f64 {
        self.mse_subspace / self.mse_project_ambient
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Orthonormal `d1 × d2` basis of a uniformly random subspace.
fn random_basis(d1: usize, d2: usize, rng: &mut Stream) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(d1, d2, |_, _| StandardNormal.sample(rng));
    gauss.qr().q()
}

/// Mean estimation on a public `d2`-dimensional subspace of `ℝ^{d1}`.
///
/// Records are `x = B w` with `B` an orthonormal basis and `‖w‖₂ ≤ ½`, so
/// every coordinate lies in `[−½, ½]`. The ambient release adds L1 K-norm
/// noise calibrated to the box (`‖x̄ − x̄′‖₁ ≤ d1/n`) and is projected onto
/// the subspace; the intrinsic release adds L1 K-norm noise to the subspace
/// coordinates, calibrated to `‖w̄ − w̄′‖₁ ≤ √d2 · √d1 / n` (the box diameter
/// bounds the coordinate change in L2). Both errors are exact squared L2
/// distances to `x̄`.
pub fn experiment_manifold(d1: usize, d2: usize, n: usize, epsilon: f64, reps: usize, seed: u64) -> Result<ManifoldResult> {
    if d2 == 0 || d2 > d1 {
        return Err(Error::InvalidInput(format!("need 1 <= d2 <= d1, got d1 = {d1}, d2 = {d2}")));
    }
    if reps < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 repetitions, got {reps}")));
    }
    if n == 0 || !(epsilon > 0.0) {
        return Err(Error::InvalidInput("need n >= 1 and epsilon > 0".into()));
    }
    let basis = random_basis(d1, d2, &mut rng::stream(seed, 0));
    let ambient_scale = d1 as f64 / (n as f64 * epsilon);
    let intrinsic_scale = ((d1 * d2) as f64).sqrt() / (n as f64 * epsilon);
    let errors: Vec<Result<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::stream(seed, rep as u64 + 1);
            let mut w_bar = DVector::zeros(d2);
            for _ in 0..n {
                w_bar += ball_point(d2, 0.5, &mut r);
            }
            w_bar /= n as f64;
            let x_bar = &basis * &w_bar;

            let noise = DVector::from_vec(sample_knorm_noise(d1, Norm::L1, ambient_scale, &mut r)?);
            let y1 = &x_bar + noise;
            let projected = &basis * (basis.transpose() * y1);
            let err_ambient = (projected - &x_bar).norm_squared();

            let u = DVector::from_vec(sample_knorm_noise(d2, Norm::L1, intrinsic_scale, &mut r)?);
            let y2 = &x_bar + &basis * u;
            let err_subspace = (y2 - &x_bar).norm_squared();
            Ok((err_ambient, err_subspace))
        })
        .collect();
    let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    let (ambient, subspace): (Vec<f64>, Vec<f64>) = errors.into_iter().unzip();
    let (mse_project_ambient, se_project_ambient) = mean_and_se(&ambient);
    let (mse_subspace, se_subspace) = mean_and_se(&subspace);
    Ok(ManifoldResult {
        d1,
        d2,
        n,
        epsilon,
        reps,
        mse_project_ambient,
        mse_subspace,
        se_project_ambient,
        se_subspace,
    })
}

/// Uniform point in the L2 ball of the given radius.
fn ball_point(dim: usize, radius: f64, rng: &mut Stream) -> DVector<f64> {
    let g = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    g.normalize() * r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KngRateRow {
    pub n: usize,
    pub median_error_kng: f64,
    pub median_error_laplace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KngRateResult {
    pub epsilon: f64,
    pub reps: usize,
    pub dim: usize,
    pub rows: Vec<KngRateRow>,
    pub slope_kng: f64,
    pub slope_laplace: f64,
}

pub const KNG_DIM: usize = 2;

/// Concentration of the K-norm gradient mechanism for a sample mean.
///
/// Records are uniform on `[0, 1]^2`; the quadratic loss has gradient
/// `y − x̄`, whose L2 change between neighbors is at most `√2 / n`. The
/// baseline adds Laplace noise calibrated to the L1 sensitivity `2 / n`.
/// Returns the log-log slopes of the median L2 error against `n`.
pub fn experiment_kng_rate(n_grid: &[usize], epsilon: f64, reps: usize, seed: u64) -> Result<KngRateResult> {
    let mut distinct: Vec<usize> = n_grid.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 || distinct[0] == 0 || distinct[distinct.len() - 1] < 16 * distinct[0] {
        return Err(Error::Refused(format!(
            "rate fit needs at least 3 distinct positive sizes spanning 16x, got {n_grid:?}"
        )));
    }
    if reps == 0 || !(epsilon > 0.0) {
        return Err(Error::InvalidInput("need reps >= 1 and epsilon > 0".into()));
    }
    let d = KNG_DIM;
    let mut rows = Vec::new();
    for (k, &n) in n_grid.iter().enumerate() {
        let spec = MechanismSpec::new(epsilon, (d as f64).sqrt() / n as f64, Loss::Quadratic, BaseMeasure::Naive, seed)?;
        let laplace_scale = d as f64 / (n as f64 * epsilon);
        let errors: Vec<Result<(f64, f64)>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut r = rng::stream(seed, (k * reps + rep) as u64);
                let mut mean = vec![0.0; d];
                for _ in 0..n {
                    for m in mean.iter_mut() {
                        *m += r.random::<f64>();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let release = knorm_gradient_mech(&spec, &mean, Norm::L2, &mut r)?;
                let kng = Norm::L2.of(release.reals().expect("real release").iter().zip(&mean).map(|(y, x)| y - x));
                let lap = Norm::L2.of(sample_knorm_noise(d, Norm::L1, laplace_scale, &mut r)?);
                Ok((kng, lap))
            })
            .collect();
        let (mut kng, mut lap): (Vec<f64>, Vec<f64>) = errors.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        rows.push(KngRateRow {
            n,
            median_error_kng: median(&mut kng),
            median_error_laplace: median(&mut lap),
        });
    }
    let log_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let slope = |f: fn(&KngRateRow) -> f64| ols_slope(&log_n, &rows.iter().map(|r| f(r).ln()).collect::<Vec<_>>());
    Ok(KngRateResult {
        epsilon,
        reps,
        dim: d,
        slope_kng: slope(|r| r.median_error_kng),
        slope_laplace: slope(|r| r.median_error_laplace),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub theta: f64,
    pub power_phi: f64,
    pub power_phi_prime: f64,
    pub se_phi: f64,
    pub se_phi_prime: f64,
    /// Standard error of the paired difference `phi' − phi`.
    pub se_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub n: u64,
    pub theta0: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub window: (u64, u64),
    pub reps: usize,
    pub rows: Vec<PowerRow>,
}

/// Size-`alpha` randomized upper-tail test on an integer statistic: rejects
/// above `cutoff` and with probability `gamma` at `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ThresholdTest {
    cutoff: i64,
    gamma: f64,
}

impl ThresholdTest {
    /// `null` lists `(value, mass)` in increasing value order.
    fn new(null: &[(i64, f64)], alpha: f64) -> Self {
        let mut tail = 0.0;
        for &(v, p) in null.iter().rev() {
            if tail + p > alpha {
                return Self {
                    cutoff: v,
                    gamma: ((alpha - tail) / p).clamp(0.0, 1.0),
                };
            }
            tail += p;
        }
        Self {
            cutoff: null.first().map_or(0, |x| x.0) - 1,
            gamma: 1.0,
        }
    }

    fn phi(&self, v: i64) -> f64 {
        match v.cmp(&self.cutoff) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => self.gamma,
            std::cmp::Ordering::Less => 0.0,
        }
    }
}

/// Release distribution of `Bin(n, θ) + DL(scale)` on `[−k, n + k]`, where
/// the omitted tails are below `1e-17`.
fn release_null(n: u64, theta: f64, scale: f64) -> Vec<(i64, f64)> {
    let k = ((40.0 / scale).ceil() as i64).clamp(1, 1_000_000);
    let binom = binomial_pmf(n, theta);
    (-k..=n as i64 + k)
        .map(|y| {
            let p: f64 = binom
                .iter()
                .enumerate()
                .map(|(x, px)| px * log_pmf_unchecked(y - x as i64, scale).exp())
                .sum();
            (y, p)
        })
        .collect()
}

/// Settings of [`experiment_power`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub n: u64,
    pub theta0: f64,
    pub epsilon: f64,
    /// Inclusive clamping window for `Y*`; `(0, n)` clamps only outside the
    /// count range.
    pub window: (u64, u64),
    pub alpha: f64,
    pub alternatives: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

/// Power of exact size-`alpha` tests of `θ ≤ θ0` built on the clamped
/// release `Y* = clamp(Y, window)` and on the raw release `Y`, where
/// `Y = Bin(n, θ) + DL(ε)` (unit count sensitivity). Null distributions are
/// enumerated exactly; powers at each alternative are Monte Carlo averages
/// of the test functions on shared draws.
pub fn experiment_power(config: &PowerConfig) -> Result<PowerResult> {
    let PowerConfig {
        n,
        theta0,
        epsilon,
        window,
        alpha,
        ref alternatives,
        reps,
        seed,
    } = *config;
    if !(0.0..=1.0).contains(&theta0) || alternatives.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidInput("probabilities must lie in [0, 1]".into()));
    }
    if window.0 > window.1 || window.1 > n {
        return Err(Error::InvalidInput(format!("window {window:?} must lie inside [0, {n}]")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("test size {alpha} must lie in [0, 1)")));
    }
    if reps < 2 || !(epsilon > 0.0) {
        return Err(Error::InvalidInput("need reps >= 2 and epsilon > 0".into()));
    }
    let (lo, hi) = (window.0 as i64, window.1 as i64);
    let clamp = |y: i64| y.clamp(lo, hi);

    let null_y = release_null(n, theta0, epsilon);
    let mut null_star: Vec<(i64, f64)> = (lo..=hi).map(|v| (v, 0.0)).collect();
    for &(y, p) in &null_y {
        null_star[(clamp(y) - lo) as usize].1 += p;
    }
    let test_y = ThresholdTest::new(&null_y, alpha);
    let test_star = ThresholdTest::new(&null_star, alpha);

    let rows = alternatives
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let binom = Binomial::new(n, theta).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let draws: Vec<Result<(f64, f64)>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut r = rng::stream(seed, (k * reps + rep) as u64);
                    let y = binom.sample(&mut r) as i64 + sample_discrete_laplace(epsilon, &mut r)?;
                    if alpha == 0.0 {
                        return Ok((0.0, 0.0));
                    }
                    Ok((test_star.phi(clamp(y)), test_y.phi(y)))
                })
                .collect();
            let (phi, phi_prime): (Vec<f64>, Vec<f64>) = draws.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
            let diff: Vec<f64> = phi_prime.iter().zip(&phi).map(|(a, b)| a - b).collect();
            let (power_phi, se_phi) = mean_and_se(&phi);
            let (power_phi_prime, se_phi_prime) = mean_and_se(&phi_prime);
            let (_, se_difference) = mean_and_se(&diff);
            Ok(PowerRow {
                theta,
                power_phi,
                power_phi_prime,
                se_phi,
                se_phi_prime,
                se_difference,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerResult {
        n,
        theta0,
        epsilon,
        alpha,
        window,
        reps,
        rows,
    })
}
