//! Data-prediction functions `x_θ(x, t) = E[x_0 | x_t = x]` for priors whose
//! posterior mean is known in closed form.
//!
//! Under `x_t = α_t x_0 + σ_t ε`, a diagonal Gaussian prior `N(m, diag(s²))`
//! gives, coordinate-wise,
//!
//! ```text
//! x_θ(x, t)_k = (α_t s_k² x_k + σ_t² m_k) / (α_t² s_k² + σ_t²)
//! ```
//!
//! and a Gaussian mixture gives the responsibility-weighted average of the
//! per-component posterior means.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::vecops::{dot, normalized};

/// Data-prediction model used by the samplers and inverters.
pub trait DataPredictor: Send + Sync {
    /// Dimension `n` of the signals this predictor accepts.
    fn dim(&self) -> usize;

    fn schedule(&self) -> &NoiseSchedule;

    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>>;

    /// A constant `L_t` with `‖x_θ(x1,t) - x_θ(x2,t)‖ ≤ L_t ‖x1 - x2‖`.
    fn lipschitz_at(&self, t: f64) -> Result<f64>;

    /// Noise prediction `ε_θ = (x - α_t x_θ(x,t)) / σ_t`.
    fn noise_from_data(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let (alpha, sigma) = self.schedule().alpha_sigma(t)?;
        if sigma <= 0.0 {
            return Err(Error::arg(format!("sigma_t = 0 at t = {t}")));
        }
        let pred = self.predict(x, t)?;
        Ok(x.iter()
            .zip(&pred)
            .map(|(xi, pi)| (xi - alpha * pi) / sigma)
            .collect())
    }
}

impl<P: DataPredictor + ?Sized> DataPredictor for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn schedule(&self) -> &NoiseSchedule {
        (**self).schedule()
    }
    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        (**self).predict(x, t)
    }
    fn lipschitz_at(&self, t: f64) -> Result<f64> {
        (**self).lipschitz_at(t)
    }
}

fn check_input(dim: usize, schedule: &NoiseSchedule, x: &[f64], t: f64) -> Result<(f64, f64)> {
    if x.len() != dim {
        return Err(Error::arg(format!(
            "input has dimension {}, predictor expects {dim}",
            x.len()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::arg("non-finite predictor input"));
    }
    schedule.node(t)?;
    Ok(schedule.alpha_sigma_raw(t))
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive and finite")))
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be finite")))
    }
}

/// Point-mass prior `δ_c`: `x_θ ≡ c`, `L_t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPredictor {
    schedule: NoiseSchedule,
    c: Vec<f64>,
}

impl ConstantPredictor {
    pub fn new(schedule: NoiseSchedule, c: Vec<f64>) -> Result<Self> {
        schedule.validate()?;
        if c.is_empty() {
            return Err(Error::arg("constant predictor needs a non-empty vector"));
        }
        check_finite("constant", &c)?;
        Ok(Self { schedule, c })
    }

    pub fn value(&self) -> &[f64] {
        &self.c
    }
}

impl DataPredictor for ConstantPredictor {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        check_input(self.c.len(), &self.schedule, x, t)?;
        Ok(self.c.clone())
    }

    fn lipschitz_at(&self, t: f64) -> Result<f64> {
        self.schedule.node(t)?;
        Ok(0.0)
    }
}

/// Diagonal Gaussian prior `N(mean, diag(var))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPriorPredictor {
    schedule: NoiseSchedule,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl GaussianPriorPredictor {
    pub fn new(schedule: NoiseSchedule, mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        schedule.validate()?;
        if mean.is_empty() || mean.len() != var.len() {
            return Err(Error::arg(
                "gaussian prior: mean and var must have equal, non-zero length",
            ));
        }
        check_finite("gaussian mean", &mean)?;
        check_positive("gaussian variances", &var)?;
        Ok(Self {
            schedule,
            mean,
            var,
        })
    }

    /// `N(0, I_n)`; under VP its probability flow is the identity map.
    pub fn standard(schedule: NoiseSchedule, n: usize) -> Result<Self> {
        Self::new(schedule, vec![0.0; n], vec![1.0; n])
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Exact probability-flow transport of `x` from time `t_from` to `t_to`.
    /// The standardized coordinate `(x_k - α m_k)/sqrt(α² s_k² + σ²)` is
    /// invariant along the flow.
    pub fn exact_flow(&self, x: &[f64], t_from: f64, t_to: f64) -> Result<Vec<f64>> {
        let (a0, s0) = check_input(self.dim(), &self.schedule, x, t_from)?;
        let (a1, s1) = check_input(self.dim(), &self.schedule, x, t_to)?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(&xk, (&m, &v))| {
                let sd0 = (a0 * a0 * v + s0 * s0).sqrt();
                let sd1 = (a1 * a1 * v + s1 * s1).sqrt();
                a1 * m + sd1 * (xk - a0 * m) / sd0
            })
            .collect())
    }
}

impl DataPredictor for GaussianPriorPredictor {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let (a, s) = check_input(self.dim(), &self.schedule, x, t)?;
        let s2 = s * s;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(&xk, (&m, &v))| (a * v * xk + s2 * m) / (a * a * v + s2))
            .collect())
    }

    fn lipschitz_at(&self, t: f64) -> Result<f64> {
        self.schedule.node(t)?;
        let (a, s) = self.schedule.alpha_sigma_raw(t);
        Ok(self
            .var
            .iter()
            .map(|&v| a * v / (a * a * v + s * s))
            .fold(0.0, f64::max))
    }
}

/// Mixture of diagonal Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPriorPredictor {
    schedule: NoiseSchedule,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    shared_var: bool,
}

impl GmmPriorPredictor {
    pub fn new(
        schedule: NoiseSchedule,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        vars: Vec<Vec<f64>>,
    ) -> Result<Self> {
        schedule.validate()?;
        let k = weights.len();
        if k == 0 || means.len() != k || vars.len() != k {
            return Err(Error::arg(
                "gmm: weights, means and vars must have the same non-zero count",
            ));
        }
        let n = means[0].len();
        if n == 0 || means.iter().any(|m| m.len() != n) || vars.iter().any(|v| v.len() != n) {
            return Err(Error::arg(
                "gmm: every component must have the same dimension",
            ));
        }
        check_positive("gmm weights", &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!(
                "gmm weights must sum to 1, got {total}"
            )));
        }
        for m in &means {
            check_finite("gmm means", m)?;
        }
        for v in &vars {
            check_positive("gmm variances", v)?;
        }
        let shared_var = vars.iter().all(|v| v == &vars[0]);
        Ok(Self {
            schedule,
            weights,
            means,
            vars,
            shared_var,
        })
    }

    /// Equal-weight mixture of `k` components with orthonormal means drawn
    /// by Gram-Schmidt from a seeded Gaussian stream, all sharing the
    /// isotropic variance `var`.
    pub fn orthonormal_modes(
        schedule: NoiseSchedule,
        n: usize,
        k: usize,
        var: f64,
        seed: u64,
    ) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::arg(format!(
                "cannot place {k} orthonormal modes in dimension {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
        while means.len() < k {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for q in &means {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
            if let Some(u) = normalized(&v) {
                means.push(u);
            }
        }
        Self::new(
            schedule,
            vec![1.0 / k as f64; k],
            means,
            vec![vec![var; n]; k],
        )
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn vars(&self) -> &[Vec<f64>] {
        &self.vars
    }

    /// Posterior component probabilities `ρ_k(x, t)` under the marginals
    /// `N(α_t μ_k, diag(α_t² s_k² + σ_t²))`, computed with log-sum-exp.
    pub fn responsibilities(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let (a, s) = check_input(self.dim(), &self.schedule, x, t)?;
        Ok(self.responsibilities_raw(x, a, s))
    }

    fn responsibilities_raw(&self, x: &[f64], a: f64, s: f64) -> Vec<f64> {
        let s2 = s * s;
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(&w, (mu, var))| {
                let quad: f64 = x
                    .iter()
                    .zip(mu.iter().zip(var))
                    .map(|(&xk, (&mk, &vk))| {
                        let v = a * a * vk + s2;
                        let d = xk - a * mk;
                        d * d / v + v.ln()
                    })
                    .sum();
                w.ln() - 0.5 * quad
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|u| u / z).collect()
    }
}

impl DataPredictor for GmmPriorPredictor {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let (a, s) = check_input(self.dim(), &self.schedule, x, t)?;
        let rho = self.responsibilities_raw(x, a, s);
        let s2 = s * s;
        let mut out = vec![0.0; x.len()];
        for (r, (mu, var)) in rho.iter().zip(self.means.iter().zip(&self.vars)) {
            if *r == 0.0 {
                continue;
            }
            for (o, (&xk, (&mk, &vk))) in out.iter_mut().zip(x.iter().zip(mu.iter().zip(var))) {
                *o += r * (a * vk * xk + s2 * mk) / (a * a * vk + s2);
            }
        }
        Ok(out)
    }

    /// Certified bound from the Jacobian decomposition
    /// `J = Σ ρ_k J_k + Cov_ρ(g_k, ∇ log N_k)`. With a shared component
    /// variance both covariance factors are x-independent and the second
    /// term is at most `¼ · diam{g_k} · diam{∇ log N_k}`. Mixtures with
    /// per-component variances get `+∞` (no certificate).
    fn lipschitz_at(&self, t: f64) -> Result<f64> {
        self.schedule.node(t)?;
        if !self.shared_var {
            return Ok(f64::INFINITY);
        }
        let (a, s) = self.schedule.alpha_sigma_raw(t);
        let s2 = s * s;
        let var = &self.vars[0];
        let marg: Vec<f64> = var.iter().map(|&v| a * a * v + s2).collect();
        let within = var
            .iter()
            .zip(&marg)
            .map(|(&v, &mv)| a * v / mv)
            .fold(0.0, f64::max);
        let mut diam_mean = 0.0_f64;
        let mut diam_grad = 0.0_f64;
        for i in 0..self.components() {
            for j in (i + 1)..self.components() {
                let (mut dm, mut dg) = (0.0, 0.0);
                for ((mi, mj), mv) in self.means[i].iter().zip(&self.means[j]).zip(&marg) {
                    let d = mi - mj;
                    dm += (s2 / mv * d).powi(2);
                    dg += (a / mv * d).powi(2);
                }
                diam_mean = diam_mean.max(dm.sqrt());
                diam_grad = diam_grad.max(dg.sqrt());
            }
        }
        Ok(within + 0.25 * diam_mean * diam_grad)
    }
}

/// One of the built-in analytic priors, with sampling support.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticPrior {
    Constant(ConstantPredictor),
    Gaussian(GaussianPriorPredictor),
    Gmm(GmmPriorPredictor),
}

impl AnalyticPrior {
    fn inner(&self) -> &dyn DataPredictor {
        match self {
            AnalyticPrior::Constant(p) => p,
            AnalyticPrior::Gaussian(p) => p,
            AnalyticPrior::Gmm(p) => p,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnalyticPrior::Constant(_) => "constant",
            AnalyticPrior::Gaussian(_) => "gaussian",
            AnalyticPrior::Gmm(_) => "gmm",
        }
    }

    /// Draw `x_0 ~ q_0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            AnalyticPrior::Constant(p) => p.c.clone(),
            AnalyticPrior::Gaussian(p) => p
                .mean
                .iter()
                .zip(&p.var)
                .map(|(&m, &v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            AnalyticPrior::Gmm(p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = p.components() - 1;
                for (i, w) in p.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                p.means[k]
                    .iter()
                    .zip(&p.vars[k])
                    .map(|(&m, &v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        }
    }

    /// Draw `x_t ~ q_t` as `α_t x_0 + σ_t ε`.
    pub fn sample_marginal<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<Vec<f64>> {
        let (a, s) = self.schedule().alpha_sigma(t)?;
        let x0 = self.sample(rng);
        Ok(x0
            .iter()
            .map(|&v| a * v + s * rng.sample::<f64, _>(StandardNormal))
            .collect())
    }
}

impl DataPredictor for AnalyticPrior {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn schedule(&self) -> &NoiseSchedule {
        self.inner().schedule()
    }
    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.inner().predict(x, t)
    }
    fn lipschitz_at(&self, t: f64) -> Result<f64> {
        self.inner().lipschitz_at(t)
    }
}

impl From<ConstantPredictor> for AnalyticPrior {
    fn from(p: ConstantPredictor) -> Self {
        AnalyticPrior::Constant(p)
    }
}

impl From<GaussianPriorPredictor> for AnalyticPrior {
    fn from(p: GaussianPriorPredictor) -> Self {
        AnalyticPrior::Gaussian(p)
    }
}

impl From<GmmPriorPredictor> for AnalyticPrior {
    fn from(p: GmmPriorPredictor) -> Self {
        AnalyticPrior::Gmm(p)
    }
}

/// Wrapper that records the time argument of every `predict` call.
pub struct RecordingPredictor<P> {
    inner: P,
    calls: Mutex<Vec<f64>>,
}

impl<P: DataPredictor> RecordingPredictor<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Time arguments seen so far, in call order.
    pub fn calls(&self) -> Vec<f64> {
        self.calls.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        self.calls.lock().unwrap().clear();
    }
}

impl<P: DataPredictor> DataPredictor for RecordingPredictor<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn schedule(&self) -> &NoiseSchedule {
        self.inner.schedule()
    }
    fn predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.calls.lock().unwrap().push(t);
        self.inner.predict(x, t)
    }
    fn lipschitz_at(&self, t: f64) -> Result<f64> {
        self.inner.lipschitz_at(t)
    }
}
