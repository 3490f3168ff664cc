//! Sampling direction of the probability-flow ODE, written in its
//! semi-linear log-SNR form
//!
//! ```text
//! x_t = (σ_t/σ_s) x_s + σ_t ∫_{λ_s}^{λ_t} e^λ x_θ(x_λ, λ) dλ
//! ```
//!
//! DDIM freezes `x_θ` over each step (first order); DM2M extrapolates it
//! linearly from the previous step (second-order multistep). Both update
//! rules below are direction-agnostic and are reused by the inverters.

use crate::error::{Error, Result};
use crate::predictors::DataPredictor;
use crate::schedule::{GridNode, TimeGrid};
use crate::vecops::all_finite;

/// RK4 steps used by [`reference_solve`] callers that do not choose.
pub const DEFAULT_REFERENCE_STEPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Ddim,
    Dm2m,
}

impl SamplerMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Ddim => "ddim",
            SamplerMethod::Dm2m => "dm2m",
        }
    }

    /// Convergence order of the scheme.
    pub fn order(self) -> usize {
        match self {
            SamplerMethod::Ddim => 1,
            SamplerMethod::Dm2m => 2,
        }
    }
}

impl std::str::FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddim" => Ok(SamplerMethod::Ddim),
            "dm2m" => Ok(SamplerMethod::Dm2m),
            other => Err(Error::Parse(format!("unknown sampler `{other}`"))),
        }
    }
}

/// Result of a multi-step solve with its predictor-evaluation count.
#[derive(Debug, Clone, PartialEq)]
pub struct Solve {
    pub x: Vec<f64>,
    pub nfe: usize,
}

/// First-order exponential-integrator update from `from` to `to` with the
/// data prediction `pred` held constant over the step:
/// `x_to = (σ_to/σ_from) x + α_to (1 - e^{-(λ_to - λ_from)}) pred`.
///
/// With `from = t_{i-1}`, `to = t_i` this is the DDIM step; with the nodes
/// swapped it is the DDIM inversion step.
pub fn exp_euler(x: &[f64], pred: &[f64], from: &GridNode, to: &GridNode) -> Vec<f64> {
    let ratio = to.sigma / from.sigma;
    let coef = -to.alpha * (-(to.lambda - from.lambda)).exp_m1();
    x.iter()
        .zip(pred)
        .map(|(&xk, &pk)| ratio * xk + coef * pk)
        .collect()
}

/// Second-order multistep update from `from` to `to`, using the current
/// prediction `pred` (at `from`) and the previous one `pred_prev` (at
/// `prev`). `h = λ_to - λ_from`, `r = (λ_from - λ_prev)/h`:
///
/// ```text
/// x_to = (σ_to/σ_from) x - α_to (e^{-h} - 1) ((1 + 1/2r) pred - (1/2r) pred_prev)
/// ```
pub fn multistep2(
    x: &[f64],
    pred: &[f64],
    pred_prev: &[f64],
    prev: &GridNode,
    from: &GridNode,
    to: &GridNode,
) -> Vec<f64> {
    let h = to.lambda - from.lambda;
    let r = (from.lambda - prev.lambda) / h;
    let ratio = to.sigma / from.sigma;
    let coef = -to.alpha * (-h).exp_m1();
    let w_prev = 0.5 / r;
    let w_cur = 1.0 + w_prev;
    x.iter()
        .zip(pred.iter().zip(pred_prev))
        .map(|(&xk, (&pk, &qk))| ratio * xk + coef * (w_cur * pk - w_prev * qk))
        .collect()
}

pub(crate) fn check_state(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::arg(format!(
            "state has dimension {}, expected {dim}",
            x.len()
        )));
    }
    if !all_finite(x) {
        return Err(Error::Numerical("non-finite state vector".into()));
    }
    Ok(())
}

pub(crate) fn check_pairing(grid: &TimeGrid, predictor: &dyn DataPredictor) -> Result<()> {
    if grid.schedule() != predictor.schedule() {
        return Err(Error::arg(
            "grid and predictor use different noise schedules",
        ));
    }
    Ok(())
}

/// Sampler: method, grid, and predictor.
#[derive(Clone, Copy)]
pub struct SamplerSpec<'a> {
    pub method: SamplerMethod,
    pub grid: &'a TimeGrid,
    pub predictor: &'a dyn DataPredictor,
}

impl std::fmt::Debug for SamplerSpec<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SamplerSpec")
            .field("method", &self.method)
            .field("steps", &self.grid.steps())
            .finish()
    }
}

impl<'a> SamplerSpec<'a> {
    pub fn new(
        method: SamplerMethod,
        grid: &'a TimeGrid,
        predictor: &'a dyn DataPredictor,
    ) -> Result<Self> {
        check_pairing(grid, predictor)?;
        if method == SamplerMethod::Dm2m && grid.steps() < 2 {
            return Err(Error::arg("dm2m needs a grid with at least two steps"));
        }
        Ok(Self {
            method,
            grid,
            predictor,
        })
    }

    fn check_index(&self, i: usize, min: usize) -> Result<()> {
        if i < min || i > self.grid.steps() {
            return Err(Error::arg(format!(
                "step index {i} outside [{min}, {}]",
                self.grid.steps()
            )));
        }
        Ok(())
    }

    /// DDIM step `κ_i`: `x̃_{t_{i-1}} ↦ x̃_{t_i}`.
    pub fn ddim_step(&self, x: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_index(i, 1)?;
        let (from, to) = (self.grid.node(i - 1), self.grid.node(i));
        let pred = self.predictor.predict(x, from.t)?;
        Ok(exp_euler(x, &pred, from, to))
    }

    /// DM2M step `i ≥ 2` from the two previous iterates. Evaluates the
    /// predictor at both; the full sampler caches the older evaluation.
    pub fn dm2m_step(&self, x_prev: &[f64], x_prev2: &[f64], i: usize) -> Result<Vec<f64>> {
        if i < 2 {
            return Err(Error::arg(
                "dm2m step needs i >= 2; use ddim_step for the first step",
            ));
        }
        self.check_index(i, 2)?;
        let g = self.grid;
        let pred = self.predictor.predict(x_prev, g.node(i - 1).t)?;
        let pred_prev = self.predictor.predict(x_prev2, g.node(i - 2).t)?;
        Ok(multistep2(
            x_prev,
            &pred,
            &pred_prev,
            g.node(i - 2),
            g.node(i - 1),
            g.node(i),
        ))
    }

    /// `G = κ_N ∘ ⋯ ∘ κ_1`.
    pub fn sample_full(&self, x_t: &[f64]) -> Result<Solve> {
        self.run_from(x_t, 1)
    }

    /// `G_t = κ_N ∘ ⋯ ∘ κ_{i_t}` with `i_t = max{i : t_{i-1} ≥ t}`.
    /// Start times above `T` run the full sampler.
    pub fn sample_partial(&self, x: &[f64], t: f64) -> Result<Solve> {
        let start = self.grid.sampling_start(t)?;
        self.run_from(x, start)
    }

    fn run_from(&self, x: &[f64], start: usize) -> Result<Solve> {
        check_state(x, self.predictor.dim())?;
        let g = self.grid;
        let mut x = x.to_vec();
        let mut nfe = 0;
        let mut history: Option<Vec<f64>> = None;
        for i in start..=g.steps() {
            let (from, to) = (g.node(i - 1), g.node(i));
            let pred = self.predictor.predict(&x, from.t)?;
            nfe += 1;
            x = match (self.method, &history) {
                (SamplerMethod::Dm2m, Some(prev)) => {
                    multistep2(&x, &pred, prev, g.node(i - 2), from, to)
                }
                _ => exp_euler(&x, &pred, from, to),
            };
            history = Some(pred);
        }
        if !all_finite(&x) {
            return Err(Error::Numerical(
                "sampler produced non-finite output".into(),
            ));
        }
        Ok(Solve { x, nfe })
    }
}

/// High-accuracy solution of the probability-flow ODE from `t_from` to
/// `t_to` (either direction): classical RK4 with `steps` equal steps in `λ`
/// on `u = x/σ`, for which `du/dλ = e^λ x_θ(σ_λ u, t_λ)`.
pub fn reference_solve<P: DataPredictor + ?Sized>(
    predictor: &P,
    x_from: &[f64],
    t_from: f64,
    t_to: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::arg("reference_solve needs at least one step"));
    }
    check_state(x_from, predictor.dim())?;
    let s = predictor.schedule();
    let start = s.node(t_from)?;
    let end = s.node(t_to)?;
    if t_from == t_to {
        return Ok(x_from.to_vec());
    }
    let rhs = |lambda: f64, u: &[f64]| -> Result<Vec<f64>> {
        let t = s.t_of_lambda_raw(lambda);
        let (_, sigma) = s.alpha_sigma_raw(t);
        let x: Vec<f64> = u.iter().map(|v| v * sigma).collect();
        let pred = predictor.predict(&x, t)?;
        let w = lambda.exp();
        Ok(pred.into_iter().map(|p| w * p).collect())
    };
    let dl = (end.lambda - start.lambda) / steps as f64;
    let mut u: Vec<f64> = x_from.iter().map(|v| v / start.sigma).collect();
    let stage = |u: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        u.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for j in 0..steps {
        let l0 = start.lambda + j as f64 * dl;
        let k1 = rhs(l0, &u)?;
        let k2 = rhs(l0 + 0.5 * dl, &stage(&u, &k1, 0.5 * dl))?;
        let k3 = rhs(l0 + 0.5 * dl, &stage(&u, &k2, 0.5 * dl))?;
        let l1 = if j + 1 == steps { end.lambda } else { l0 + dl };
        let k4 = rhs(l1, &stage(&u, &k3, dl))?;
        for (idx, uk) in u.iter_mut().enumerate() {
            *uk += dl / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        }
    }
    let x: Vec<f64> = u.into_iter().map(|v| v * end.sigma).collect();
    if !all_finite(&x) {
        return Err(Error::Numerical("reference solve diverged".into()));
    }
    Ok(x)
}

/// Least-squares slope of `log(error)` against `log(h_max)`.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::arg("order estimate needs at least three points"));
    }
    if points
        .iter()
        .any(|&(h, e)| !(h > 0.0 && e > 0.0 && h.is_finite() && e.is_finite()))
    {
        return Err(Error::arg(
            "order estimate needs positive finite (h, error) pairs",
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("order estimate needs distinct h values"));
    }
    Ok(sxy / sxx)
}
