//! Recovery metrics, Lipschitz certificates for the samplers, Monte Carlo
//! checks of the back-projection concentration bounds, and the
//! composed inversion + sampling error harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inversion::{InversionMethod, InverterSpec};
use crate::measurements::{estimate_m2_m4, estimate_mu, make_instance, LinkSpec, XStarSource};
use crate::predictors::{AnalyticPrior, DataPredictor};
use crate::schedule::{Spacing, TimeGrid};
use crate::solvers::{
    estimate_order, reference_solve, SamplerMethod, SamplerSpec, DEFAULT_REFERENCE_STEPS,
};
use crate::vecops::{dist, dot, norm, norm_inf, normalized, quantile, scaled};

/// Monte Carlo sample count for `μ` and the link moments.
pub const MOMENT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub method: SamplerMethod,
    /// DDIM: the factor of step `i`. DM2M: `L̃_i`. Index 0 is step 1.
    pub per_step: Vec<f64>,
    pub lipschitz: f64,
}

/// Coefficient `α_i (1 - e^{-h_i})` multiplying `L_{t_{i-1}}` in step `i`.
fn step_coef(grid: &TimeGrid, i: usize) -> f64 {
    -grid.node(i).alpha * (-grid.h(i)).exp_m1()
}

fn sigma_ratio(grid: &TimeGrid, i: usize) -> f64 {
    grid.node(i).sigma / grid.node(i - 1).sigma
}

fn predictor_constants(grid: &TimeGrid, predictor: &dyn DataPredictor) -> Result<Vec<f64>> {
    grid.nodes()
        .iter()
        .map(|n| predictor.lipschitz_at(n.t))
        .collect()
}

/// `L = Π_i (σ_i/σ_{i-1} + α_i (1 - e^{-h_i}) L_{t_{i-1}})`.
pub fn lipschitz_ddim(grid: &TimeGrid, predictor: &dyn DataPredictor) -> Result<LipschitzReport> {
    let l = predictor_constants(grid, predictor)?;
    let per_step: Vec<f64> = (1..=grid.steps())
        .map(|i| sigma_ratio(grid, i) + step_coef(grid, i) * l[i - 1])
        .collect();
    Ok(LipschitzReport {
        method: SamplerMethod::Ddim,
        lipschitz: per_step.iter().product(),
        per_step,
    })
}

/// Two-term recursion for the multistep sampler, warm-started by one DDIM
/// factor: `L̃_0 = 1`, `L̃_1 = σ_1/σ_0 + c_1 L_{t_0}`, and for `i ≥ 2`
///
/// ```text
/// L̃_i = (σ_i/σ_{i-1} + c_i (1 + 1/(2r_i)) L_{t_{i-1}}) L̃_{i-1}
///       + c_i (1/(2r_i)) L_{t_{i-2}} L̃_{i-2}
/// ```
pub fn lipschitz_dm2m(grid: &TimeGrid, predictor: &dyn DataPredictor) -> Result<LipschitzReport> {
    if grid.steps() < 2 {
        return Err(Error::arg("dm2m certificate needs at least two steps"));
    }
    let l = predictor_constants(grid, predictor)?;
    let mut tilde = vec![1.0, sigma_ratio(grid, 1) + step_coef(grid, 1) * l[0]];
    for i in 2..=grid.steps() {
        let c = step_coef(grid, i);
        let w = 0.5 / grid.r(i);
        let next = (sigma_ratio(grid, i) + c * (1.0 + w) * l[i - 1]) * tilde[i - 1]
            + c * w * l[i - 2] * tilde[i - 2];
        tilde.push(next);
    }
    let per_step = tilde[1..].to_vec();
    Ok(LipschitzReport {
        method: SamplerMethod::Dm2m,
        lipschitz: *per_step.last().unwrap(),
        per_step,
    })
}

pub fn lipschitz_certificate(sampler: &SamplerSpec<'_>) -> Result<LipschitzReport> {
    match sampler.method {
        SamplerMethod::Ddim => lipschitz_ddim(sampler.grid, sampler.predictor),
        SamplerMethod::Dm2m => lipschitz_dm2m(sampler.grid, sampler.predictor),
    }
}

/// Largest observed `‖G(x1) - G(x2)‖ / ‖x1 - x2‖` over random pairs. Half the
/// pairs are independent standard normals, half are close perturbations.
pub fn empirical_expansion(sampler: &SamplerSpec<'_>, pairs: usize, seed: u64) -> Result<f64> {
    let n = sampler.predictor.dim();
    let ratios = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let x1 = gaussian_vec(n, &mut rng);
            let dir = gaussian_vec(n, &mut rng);
            let step = if k % 2 == 0 { 1.0 } else { 1e-3 };
            let x2: Vec<f64> = x1.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let g1 = sampler.sample_full(&x1)?.x;
            let g2 = sampler.sample_full(&x2)?.x;
            Ok(dist(&g1, &g2) / dist(&x1, &x2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(values: &[f64]) -> Self {
        Self {
            median: quantile(values, 0.5),
            q90: quantile(values, 0.9),
            q99: quantile(values, 0.99),
            max: quantile(values, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub trials: usize,
    pub successes: usize,
    /// Quantiles of the observed left-hand side.
    pub observed: Quantiles,
    pub bound: f64,
    pub constant: f64,
    pub inequality: String,
}

impl BoundCheckReport {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    fn from_values(values: &[f64], bound: f64, constant: f64, inequality: String) -> Self {
        Self {
            trials: values.len(),
            successes: values.iter().filter(|&&v| v <= bound).count(),
            observed: Quantiles::of(values),
            bound,
            constant,
            inequality,
        }
    }
}

/// Counts trials with `‖ε‖_∞ ≤ C √(log 2n)` for `ε ~ N(0, I_n)`. Trial `k`
/// draws from seed `seed + k`.
pub fn verify_lemma1(n: usize, c: f64, trials: usize, seed: u64) -> Result<BoundCheckReport> {
    if n == 0 || trials == 0 {
        return Err(Error::arg("lemma 1 check needs n >= 1 and trials >= 1"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::arg("C must be a non-negative number"));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            norm_inf(&gaussian_vec(n, &mut rng))
        })
        .collect();
    let bound = c * (2.0 * n as f64).ln().sqrt();
    Ok(BoundCheckReport::from_values(
        &values,
        bound,
        c,
        format!("max_k |eps_k| <= {c} * sqrt(log(2*{n})) = {bound:.6}"),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Row {
    pub m: usize,
    pub report: BoundCheckReport,
    /// Fraction of trials with `(1/m) Σ y_i² ≤ 2 M₂`.
    pub e1_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub mu: f64,
    pub m2: f64,
    pub rows: Vec<Lemma2Row>,
    /// Log-log slope of the median error against `m`.
    pub slope: f64,
}

/// Monte Carlo check of `‖(1/m) Aᵀy - μ x*‖_∞ ≤ C' √(log 2n) / √m` for every
/// `m` in `m_list`. Each trial draws a uniform `x*` on the sphere.
pub fn verify_lemma2(
    n: usize,
    m_list: &[usize],
    link: LinkSpec,
    c_prime: f64,
    trials: usize,
    seed: u64,
) -> Result<Lemma2Report> {
    if n == 0 || trials == 0 {
        return Err(Error::arg("lemma 2 check needs n >= 1 and trials >= 1"));
    }
    if m_list.len() < 2 || m_list.contains(&0) {
        return Err(Error::arg(
            "lemma 2 check needs at least two positive m values",
        ));
    }
    let mu = estimate_mu(&link, MOMENT_SAMPLES, seed ^ 0x6d75)?;
    let (m2, _) = estimate_m2_m4(&link, MOMENT_SAMPLES, seed ^ 0x6d32)?;
    let log_term = (2.0 * n as f64).ln().sqrt();
    let mut rows = Vec::with_capacity(m_list.len());
    for (mi, &m) in m_list.iter().enumerate() {
        let per_trial = (0..trials)
            .into_par_iter()
            .map(|k| {
                let trial_seed = seed.wrapping_add((mi * trials + k) as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0x9e37_79b9_7f4a_7c15);
                let x = gaussian_vec(n, &mut rng);
                let inst = make_instance(n, m, link, XStarSource::Explicit(&x), trial_seed)?;
                let b = inst.back_project();
                let err = b
                    .iter()
                    .zip(&inst.x_star)
                    .map(|(bi, xi)| (bi - mu * xi).abs())
                    .fold(0.0, f64::max);
                let energy = dot(&inst.y, &inst.y) / m as f64;
                Ok((err, energy <= 2.0 * m2))
            })
            .collect::<Result<Vec<_>>>()?;
        let errors: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
        let e1 = per_trial.iter().filter(|p| p.1).count();
        let bound = c_prime * log_term / (m as f64).sqrt();
        rows.push(Lemma2Row {
            m,
            report: BoundCheckReport::from_values(
                &errors,
                bound,
                c_prime,
                format!(
                    "max_k |b_k - mu x*_k| <= {c_prime} * sqrt(log(2*{n})) / sqrt({m}) = {bound:.6}"
                ),
            ),
            e1_rate: e1 as f64 / trials as f64,
        });
    }
    // same least-squares fit as the solver order, here against m
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.m as f64, r.report.observed.median))
        .collect();
    let slope = if points.len() >= 3 {
        estimate_order(&points)?
    } else {
        let (a, b) = (points[0], points[1]);
        (b.1.ln() - a.1.ln()) / (b.0.ln() - a.0.ln())
    };
    Ok(Lemma2Report {
        mu,
        m2,
        rows,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Point {
    pub steps: usize,
    pub h_max: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Curve {
    pub t: f64,
    pub k1: usize,
    pub k2: usize,
    pub points: Vec<Theorem1Point>,
    /// `None` when the errors sit at round-off and no slope can be fitted.
    pub order: Option<f64>,
}

/// Error `‖x̄_eps - G ∘ G†_t(x̄_t)‖` for `x̄_t ~ q_t` against a high-accuracy
/// ODE solution, over grids of increasing size. `k1` selects the inverter
/// order and `k2` the sampler order. Grids use uniform log-SNR spacing and
/// always contain `t` as a node.
pub fn theorem1_curve(
    prior: &AnalyticPrior,
    grid_sizes: &[usize],
    t: f64,
    k1: usize,
    k2: usize,
    seed: u64,
) -> Result<Theorem1Curve> {
    if grid_sizes.len() < 3 {
        return Err(Error::arg(
            "theorem 1 curve needs at least three grid sizes",
        ));
    }
    let inv_method = match k1 {
        1 => InversionMethod::FirstOrder,
        2 => InversionMethod::SecondOrder,
        _ => {
            return Err(Error::arg(format!(
                "inverter order {k1} not available (1 or 2)"
            )))
        }
    };
    let samp_method = match k2 {
        1 => SamplerMethod::Ddim,
        2 => SamplerMethod::Dm2m,
        _ => {
            return Err(Error::arg(format!(
                "sampler order {k2} not available (1 or 2)"
            )))
        }
    };
    let schedule = *prior.schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_t = prior.sample_marginal(t, &mut rng)?;
    let x_eps = reference_solve(prior, &x_t, t, schedule.eps, DEFAULT_REFERENCE_STEPS)?;
    let points = grid_sizes
        .par_iter()
        .map(|&steps| {
            let grid = TimeGrid::with_node(&schedule, steps, Spacing::UniformLambda, t)?;
            let inverter = InverterSpec::new(inv_method, &grid, prior)?;
            let sampler = SamplerSpec::new(samp_method, &grid, prior)?;
            let x_hat = sampler.sample_full(&inverter.invert_partial(&x_t, t)?.x)?.x;
            Ok(Theorem1Point {
                steps,
                h_max: grid.h_max(),
                error: dist(&x_hat, &x_eps),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.h_max, p.error)).collect();
    let order = estimate_order(&pairs).ok();
    Ok(Theorem1Curve {
        t,
        k1,
        k2,
        points,
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub cosine: f64,
    pub rel_l2: f64,
    /// `+∞` for an exact match.
    pub psnr: f64,
    /// Set when `x_hat` is zero or non-finite and has no direction.
    pub degenerate: bool,
}

/// Direction-only quality of `x_hat` against `x_star`. PSNR uses `peak`, or
/// the dynamic range `max(x*) - min(x*)` when `None`.
pub fn metrics(x_hat: &[f64], x_star: &[f64], peak: Option<f64>) -> Result<Metrics> {
    if x_hat.len() != x_star.len() {
        return Err(Error::arg("x_hat and x_star differ in dimension"));
    }
    let star_norm = norm(x_star);
    if !(star_norm > 0.0 && star_norm.is_finite()) {
        return Err(Error::arg("x_star must be a non-zero finite vector"));
    }
    let peak = match peak {
        Some(p) => p,
        None => {
            let hi = x_star.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = x_star.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        }
    };
    let (unit, degenerate) = match normalized(x_hat) {
        Some(u) => (u, false),
        None => (vec![0.0; x_hat.len()], true),
    };
    let cosine = if degenerate {
        0.0
    } else {
        (dot(&unit, x_star) / star_norm).clamp(-1.0, 1.0)
    };
    let diff = dist(&unit, x_star);
    let rmse = diff / (x_star.len() as f64).sqrt();
    let psnr = if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / rmse).log10()
    };
    Ok(Metrics {
        cosine,
        rel_l2: diff / star_norm,
        psnr,
        degenerate,
    })
}

/// Relative error `‖G(G†(x)) - x‖ / ‖x‖`.
pub fn round_trip_error(
    sampler: &SamplerSpec<'_>,
    inverter: &InverterSpec<'_>,
    x: &[f64],
) -> Result<f64> {
    let back = sampler.sample_full(&inverter.invert_full(x)?.x)?.x;
    Ok(dist(&back, x) / norm(x))
}

/// Scales `v` to unit norm, keeping zero as zero.
pub fn unit_or_zero(v: &[f64]) -> Vec<f64> {
    normalized(v).unwrap_or_else(|| scaled(v, 0.0))
}
