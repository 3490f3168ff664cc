//! Variance-preserving noise schedule, log-SNR reparameterization and the
//! time grids shared by the samplers and inverters.
//!
//! ```text
//! log α_t = -¼ t² (β_max - β_min) - ½ t β_min
//! σ_t     = sqrt(1 - α_t²)
//! λ_t     = log(α_t / σ_t)
//! ```
//!
//! `λ_t` is strictly decreasing on `(0, T]`, so every grid over `[eps, T]`
//! has positive log-SNR increments `h_i = λ_{t_i} - λ_{t_{i-1}}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bisection stops once the bracket no longer shrinks in floating point or
/// after this many halvings, whichever comes first.
const MAX_BISECTIONS: usize = 200;

/// VP noise schedule on `[0, T]` with sampling end time `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    /// Terminal time `T`.
    pub t_end: f64,
    /// Sampling end time `ε > 0`.
    pub eps: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            beta_min: 0.1,
            beta_max: 20.0,
            t_end: 1.0,
            eps: 1e-3,
        }
    }
}

impl NoiseSchedule {
    pub fn vp(beta_min: f64, beta_max: f64, t_end: f64, eps: f64) -> Result<Self> {
        let s = Self {
            beta_min,
            beta_max,
            t_end,
            eps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.beta_min, self.beta_max, self.t_end, self.eps]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::arg("schedule parameters must be finite"));
        }
        if self.beta_min <= 0.0 || self.beta_max < self.beta_min {
            return Err(Error::arg(format!(
                "need 0 < beta_min <= beta_max, got beta_min={} beta_max={}",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.eps > 0.0 && self.eps < self.t_end) {
            return Err(Error::arg(format!(
                "need 0 < eps < T, got eps={} T={}",
                self.eps, self.t_end
            )));
        }
        Ok(())
    }

    /// `β(t) = β_min + t (β_max - β_min)`.
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    fn check_time(&self, t: f64, lo: f64) -> Result<()> {
        if t >= lo && t <= self.t_end {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "t",
                value: t,
                lo,
                hi: self.t_end,
            })
        }
    }

    #[inline]
    pub(crate) fn log_alpha_raw(&self, t: f64) -> f64 {
        -0.25 * t * t * (self.beta_max - self.beta_min) - 0.5 * t * self.beta_min
    }

    #[inline]
    pub(crate) fn alpha_sigma_raw(&self, t: f64) -> (f64, f64) {
        let la = self.log_alpha_raw(t);
        (la.exp(), (-(2.0 * la).exp_m1()).sqrt())
    }

    #[inline]
    pub(crate) fn lambda_raw(&self, t: f64) -> f64 {
        let la = self.log_alpha_raw(t);
        la - 0.5 * (-(2.0 * la).exp_m1()).ln()
    }

    pub fn log_alpha(&self, t: f64) -> Result<f64> {
        self.check_time(t, 0.0)?;
        Ok(self.log_alpha_raw(t))
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        self.check_time(t, 0.0)?;
        Ok(self.alpha_sigma_raw(t).0)
    }

    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check_time(t, 0.0)?;
        Ok(self.alpha_sigma_raw(t).1)
    }

    pub fn alpha_sigma(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t, 0.0)?;
        Ok(self.alpha_sigma_raw(t))
    }

    /// Noise-to-signal ratio `σ_t / α_t`, strictly increasing in `t`.
    pub fn noise_to_signal(&self, t: f64) -> Result<f64> {
        let (a, s) = self.alpha_sigma(t)?;
        Ok(s / a)
    }

    /// Log-SNR `λ_t = log(α_t/σ_t)` for `t ∈ [eps, T]`.
    pub fn lambda(&self, t: f64) -> Result<f64> {
        self.check_time(t, self.eps)?;
        Ok(self.lambda_raw(t))
    }

    /// `[λ_T, λ_eps]`, the range of `λ` over the sampling interval.
    pub fn lambda_range(&self) -> (f64, f64) {
        (self.lambda_raw(self.t_end), self.lambda_raw(self.eps))
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.lambda_range();
        if lambda >= lo && lambda <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "lambda",
                value: lambda,
                lo,
                hi,
            })
        }
    }

    /// Inverse of [`lambda`](Self::lambda). Uses the VP closed form; see
    /// [`t_of_lambda_bisect`](Self::t_of_lambda_bisect) for the
    /// schedule-agnostic route.
    pub fn t_of_lambda(&self, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.t_of_lambda_raw(lambda))
    }

    /// Closed-form inverse, clamped to `[eps, T]`. From `α² = 1/(1 + e^{-2λ})`,
    /// `log α = -½ log(1 + e^{-2λ})`, then the quadratic in `t` is solved in
    /// its cancellation-free form.
    pub(crate) fn t_of_lambda_raw(&self, lambda: f64) -> f64 {
        let neg_log_alpha = 0.5 * softplus(-2.0 * lambda);
        self.t_of_neg_log_alpha(neg_log_alpha)
            .clamp(self.eps, self.t_end)
    }

    /// Solves `¼Δ t² + ½β_min t = c` for `t ≥ 0`.
    fn t_of_neg_log_alpha(&self, c: f64) -> f64 {
        let a = 0.25 * (self.beta_max - self.beta_min);
        let b = 0.5 * self.beta_min;
        if a == 0.0 {
            return c / b;
        }
        2.0 * c / (b + (b * b + 4.0 * a * c).sqrt())
    }

    /// Inverse of `λ_t` by bisection on the strictly decreasing map.
    pub fn t_of_lambda_bisect(&self, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        // λ is decreasing, so the predicate "λ_t >= target" holds on [eps, t*].
        Ok(bisect(self.eps, self.t_end, |t| {
            self.lambda_raw(t) >= lambda
        }))
    }

    /// Drift and squared diffusion of the forward SDE:
    /// `f(t) = d log α_t/dt`, `g²(t) = dσ_t²/dt - 2 f(t) σ_t²`.
    /// For VP these reduce to `-β(t)/2` and `β(t)`.
    pub fn drift_diffusion(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t, 0.0)?;
        let beta = self.beta(t);
        Ok((-0.5 * beta, beta))
    }

    /// Intermediate time `t*` with `σ_{t*}/α_{t*} = C_s/√m`, clipped to
    /// `T` when the ratio exceeds `σ_T/α_T` and to `eps` when it falls
    /// below `σ_eps/α_eps`.
    pub fn solve_t_star(&self, c_s: f64, m: usize) -> Result<f64> {
        if !(c_s.is_finite() && c_s > 0.0) {
            return Err(Error::arg(format!("C_s must be positive, got {c_s}")));
        }
        if m == 0 {
            return Err(Error::arg("m must be at least 1"));
        }
        let target = c_s / (m as f64).sqrt();
        let ratio = |t: f64| {
            let (a, s) = self.alpha_sigma_raw(t);
            s / a
        };
        if target > ratio(self.t_end) {
            return Ok(self.t_end);
        }
        if target < ratio(self.eps) {
            return Ok(self.eps);
        }
        Ok(bisect(self.eps, self.t_end, |t| ratio(t) <= target))
    }

    /// `(t, α_t, σ_t, λ_t)` bundled for a time in `[eps, T]`.
    pub fn node(&self, t: f64) -> Result<GridNode> {
        self.check_time(t, self.eps)?;
        Ok(self.node_raw(t))
    }

    pub(crate) fn node_raw(&self, t: f64) -> GridNode {
        let (alpha, sigma) = self.alpha_sigma_raw(t);
        GridNode {
            t,
            alpha,
            sigma,
            lambda: self.lambda_raw(t),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Largest `t` in `[lo, hi]` (to floating-point resolution) where the
/// monotone predicate still holds; assumes `pred(lo)` is true.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    if pred(hi) {
        return hi;
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One time node with its cached schedule values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub t: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Spacing {
    /// Equal steps in `t`.
    #[default]
    #[serde(rename = "uniform-t")]
    UniformT,
    /// Equal steps in log-SNR `λ`.
    #[serde(rename = "uniform-lambda")]
    UniformLambda,
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-t" | "uniform_t" | "t" => Ok(Spacing::UniformT),
            "uniform-lambda" | "uniform_lambda" | "uniform-λ" | "lambda" => {
                Ok(Spacing::UniformLambda)
            }
            other => Err(Error::Parse(format!("unknown grid spacing `{other}`"))),
        }
    }
}

/// Discretization `T = t_0 > t_1 > … > t_N = eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    schedule: NoiseSchedule,
    nodes: Vec<GridNode>,
    spacing: Spacing,
}

impl TimeGrid {
    /// Grid with `n_steps` intervals over `[eps, T]`.
    pub fn new(schedule: &NoiseSchedule, n_steps: usize, spacing: Spacing) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::arg("grid needs at least one step"));
        }
        let times = spaced_times(schedule, schedule.t_end, schedule.eps, n_steps, spacing);
        Self::assemble(schedule, times, spacing)
    }

    /// Grid with `n_steps` intervals that contains `anchor` as a node. The
    /// two sub-intervals `[anchor, T]` and `[eps, anchor]` receive step
    /// counts proportional to their length in the spacing coordinate, so
    /// doubling `n_steps` roughly halves every step. Falls back to
    /// [`TimeGrid::new`] when `anchor` is an endpoint.
    pub fn with_node(
        schedule: &NoiseSchedule,
        n_steps: usize,
        spacing: Spacing,
        anchor: f64,
    ) -> Result<Self> {
        schedule.node(anchor)?;
        if anchor == schedule.eps || anchor == schedule.t_end {
            return Self::new(schedule, n_steps, spacing);
        }
        if n_steps < 2 {
            return Err(Error::arg("an anchored grid needs at least two steps"));
        }
        let coord = |t: f64| match spacing {
            Spacing::UniformT => t,
            Spacing::UniformLambda => -schedule.lambda_raw(t),
        };
        let frac =
            (coord(schedule.t_end) - coord(anchor)) / (coord(schedule.t_end) - coord(schedule.eps));
        let upper = ((n_steps as f64 * frac).round() as usize).clamp(1, n_steps - 1);
        let mut times = spaced_times(schedule, schedule.t_end, anchor, upper, spacing);
        let lower = spaced_times(schedule, anchor, schedule.eps, n_steps - upper, spacing);
        times.extend_from_slice(&lower[1..]);
        Self::assemble(schedule, times, spacing)
    }

    /// Grid from explicit times; must be strictly decreasing from `T` to `eps`.
    pub fn from_times(schedule: &NoiseSchedule, times: Vec<f64>, spacing: Spacing) -> Result<Self> {
        Self::assemble(schedule, times, spacing)
    }

    fn assemble(schedule: &NoiseSchedule, times: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::arg("grid needs at least two nodes"));
        }
        if times[0] != schedule.t_end || *times.last().unwrap() != schedule.eps {
            return Err(Error::arg("grid must start at T and end at eps"));
        }
        if times.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::arg("grid times must be strictly decreasing"));
        }
        let nodes: Vec<GridNode> = times.into_iter().map(|t| schedule.node_raw(t)).collect();
        if nodes.windows(2).any(|w| w[1].lambda <= w[0].lambda) {
            return Err(Error::Numerical(
                "grid too fine: log-SNR increments are not positive".into(),
            ));
        }
        Ok(Self {
            schedule: *schedule,
            nodes,
            spacing,
        })
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    /// Node `t_i`, `i ∈ 0..=N`.
    pub fn node(&self, i: usize) -> &GridNode {
        &self.nodes[i]
    }

    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    /// `h_i = λ_{t_i} - λ_{t_{i-1}}` for `i ∈ 1..=N`.
    pub fn h(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.steps(), "step index {i} out of range");
        self.nodes[i].lambda - self.nodes[i - 1].lambda
    }

    pub fn h_max(&self) -> f64 {
        (1..=self.steps()).map(|i| self.h(i)).fold(0.0, f64::max)
    }

    /// Step ratio `r_i = h_{i-1}/h_i` for `i ∈ 2..=N`.
    pub fn r(&self, i: usize) -> f64 {
        assert!(i >= 2, "r_i is defined for i >= 2");
        self.h(i - 1) / self.h(i)
    }

    /// First sampling step for a start time `t`:
    /// `i_t = max{i ∈ [N] : t_{i-1} ≥ t}`. Times above `T` map to step 1.
    pub fn sampling_start(&self, t: f64) -> Result<usize> {
        if t.is_nan() || t < self.schedule.eps {
            return Err(Error::Domain {
                what: "t",
                value: t,
                lo: self.schedule.eps,
                hi: self.schedule.t_end,
            });
        }
        Ok((1..=self.steps())
            .rev()
            .find(|&i| self.nodes[i - 1].t >= t)
            .unwrap_or(1))
    }

    /// First (innermost) inversion step for a start time `t`:
    /// `j_t = min{j ∈ [N] : t_j ≤ t}`. Returns `0`, meaning no steps, when
    /// `t ≥ T`.
    pub fn inversion_start(&self, t: f64) -> Result<usize> {
        if t.is_nan() || t < self.schedule.eps {
            return Err(Error::Domain {
                what: "t",
                value: t,
                lo: self.schedule.eps,
                hi: self.schedule.t_end,
            });
        }
        if t >= self.schedule.t_end {
            return Ok(0);
        }
        Ok((1..=self.steps())
            .find(|&j| self.nodes[j].t <= t)
            .unwrap_or(self.steps()))
    }
}

/// `n` equal steps from `t_hi` down to `t_lo` in the chosen coordinate,
/// with both endpoints reproduced exactly.
fn spaced_times(s: &NoiseSchedule, t_hi: f64, t_lo: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    let mut times = Vec::with_capacity(n + 1);
    times.push(t_hi);
    match spacing {
        Spacing::UniformT => {
            let dt = (t_hi - t_lo) / n as f64;
            times.extend((1..n).map(|i| t_hi - i as f64 * dt));
        }
        Spacing::UniformLambda => {
            let (l_hi, l_lo) = (s.lambda_raw(t_hi), s.lambda_raw(t_lo));
            let dl = (l_lo - l_hi) / n as f64;
            times.extend((1..n).map(|i| s.t_of_lambda_raw(l_hi + i as f64 * dl)));
        }
    }
    times.push(t_lo);
    times
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::default()
    }

    #[test]
    fn alpha_at_endpoints() {
        let s = sched();
        assert_eq!(s.alpha(0.0).unwrap(), 1.0);
        assert_eq!(s.sigma(0.0).unwrap(), 0.0);
        // exponent -¼·19.9 - ½·0.1 = -5.025
        let a1 = s.alpha(1.0).unwrap();
        assert!((a1 - (-5.025f64).exp()).abs() < 1e-15);
        assert!((a1 - 6.57e-3).abs() < 1e-5);
    }

    #[test]
    fn vp_identity_holds() {
        let s = sched();
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            let (a, sg) = s.alpha_sigma(t).unwrap();
            assert!((a * a + sg * sg - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn out_of_domain_times_error() {
        let s = sched();
        assert!(matches!(s.alpha(-1e-9), Err(Error::Domain { .. })));
        assert!(matches!(s.sigma(1.0 + 1e-9), Err(Error::Domain { .. })));
        assert!(s.lambda(0.0).is_err());
        let (lo, hi) = s.lambda_range();
        assert!(s.t_of_lambda(lo - 1e-6).is_err());
        assert!(s.t_of_lambda(hi + 1e-6).is_err());
        assert!(s.t_of_lambda_bisect(hi + 1e-6).is_err());
    }

    #[test]
    fn lambda_zero_where_alpha_equals_sigma() {
        let s = sched();
        // α = σ ⇔ α² = ½ ⇔ -log α = ½ log 2
        let t = s.t_of_neg_log_alpha(0.5 * 2f64.ln());
        let (a, sg) = s.alpha_sigma(t).unwrap();
        assert!((a - sg).abs() < 1e-12);
        assert!(s.lambda(t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lambda_inverse_pairs() {
        let s = sched();
        let t = s.t_of_lambda(s.lambda(0.37).unwrap()).unwrap();
        assert!((t - 0.37).abs() < 1e-10);
        let (l_t, l_eps) = s.lambda_range();
        assert!(l_eps > l_t);
        for k in 0..=100 {
            let t = s.eps + (s.t_end - s.eps) * k as f64 / 100.0;
            let l = s.lambda(t).unwrap();
            let closed = s.t_of_lambda(l).unwrap();
            let bis = s.t_of_lambda_bisect(l).unwrap();
            assert!((closed - t).abs() < 1e-10, "closed form at t={t}");
            assert!((bis - t).abs() < 1e-10, "bisection at t={t}");
        }
    }

    #[test]
    fn drift_matches_central_difference() {
        let s = sched();
        let (f0, g0) = s.drift_diffusion(0.0).unwrap();
        assert!((f0 + 0.05).abs() < 1e-15);
        assert!((g0 - 0.1).abs() < 1e-15);
        let dt = 1e-6;
        for &t in &[0.01, 0.2, 0.5, 0.9] {
            let (f, g2) = s.drift_diffusion(t).unwrap();
            let fd = (s.log_alpha(t + dt).unwrap() - s.log_alpha(t - dt).unwrap()) / (2.0 * dt);
            assert!((f - fd).abs() <= 1e-6, "t={t}: {f} vs {fd}");
            // g² = dσ²/dt - 2 f σ², with dσ²/dt by central difference
            let var = |t: f64| s.sigma(t).unwrap().powi(2);
            let dvar = (var(t + dt) - var(t - dt)) / (2.0 * dt);
            let g2_fd = dvar - 2.0 * f * var(t);
            assert!((g2 - g2_fd).abs() < 1e-6, "t={t}");
            assert!(g2 >= 0.0);
        }
    }

    #[test]
    fn monotone_schedule_quantities() {
        let s = sched();
        let ts: Vec<f64> = (0..=500)
            .map(|k| s.eps + (1.0 - s.eps) * k as f64 / 500.0)
            .collect();
        for w in ts.windows(2) {
            let (a1, s1) = s.alpha_sigma(w[0]).unwrap();
            let (a2, s2) = s.alpha_sigma(w[1]).unwrap();
            assert!(a1 >= a2 && s1 < s2);
            assert!(s.lambda(w[0]).unwrap() > s.lambda(w[1]).unwrap());
        }
    }

    #[test]
    fn grid_shapes() {
        let s = sched();
        let g = TimeGrid::new(&s, 1, Spacing::UniformT).unwrap();
        assert_eq!(g.times(), vec![1.0, 1e-3]);
        let g = TimeGrid::new(&s, 50, Spacing::UniformT).unwrap();
        assert_eq!(g.node(1).t, 1.0 - 0.999 / 50.0);
        assert_eq!(g.node(0).t, s.t_end);
        assert_eq!(g.node(50).t, s.eps);
        assert!(TimeGrid::new(&s, 0, Spacing::UniformT).is_err());

        let g = TimeGrid::new(&s, 37, Spacing::UniformLambda).unwrap();
        let h1 = g.h(1);
        for i in 1..=37 {
            assert!((g.h(i) - h1).abs() < 1e-9 * h1, "h_{i}");
            assert!(g.h(i) > 0.0);
        }
        for i in 2..=37 {
            assert!((g.r(i) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_refinement_shrinks_h_max() {
        let s = sched();
        for &n in &[10, 20, 40, 80] {
            let l1 = TimeGrid::new(&s, n, Spacing::UniformLambda)
                .unwrap()
                .h_max();
            let l2 = TimeGrid::new(&s, 2 * n, Spacing::UniformLambda)
                .unwrap()
                .h_max();
            assert!((l1 / l2 - 2.0).abs() < 0.2);
            let t1 = TimeGrid::new(&s, n, Spacing::UniformT).unwrap().h_max();
            let t2 = TimeGrid::new(&s, 2 * n, Spacing::UniformT).unwrap().h_max();
            assert!(t2 < t1);
        }
    }

    #[test]
    fn anchored_grid_contains_anchor() {
        let s = sched();
        for &n in &[16, 32, 64] {
            let g = TimeGrid::with_node(&s, n, Spacing::UniformLambda, 0.3).unwrap();
            assert_eq!(g.steps(), n);
            assert!(g.times().contains(&0.3));
        }
    }

    #[test]
    fn start_index_rules() {
        let s = sched();
        let g = TimeGrid::new(&s, 10, Spacing::UniformT).unwrap();
        assert_eq!(g.sampling_start(s.t_end).unwrap(), 1);
        assert_eq!(g.sampling_start(s.eps).unwrap(), 10);
        assert_eq!(g.sampling_start(2.0).unwrap(), 1);
        // strictly between t_4 and t_3 → i_t = 4
        let mid = 0.5 * (g.node(3).t + g.node(4).t);
        assert_eq!(g.sampling_start(mid).unwrap(), 4);
        // exactly on t_3 → starts at step 4 (t_{i-1} = t_3 ≥ t)
        assert_eq!(g.sampling_start(g.node(3).t).unwrap(), 4);
        assert!(g.sampling_start(0.0).is_err());

        assert_eq!(g.inversion_start(s.eps).unwrap(), 10);
        assert_eq!(g.inversion_start(s.t_end).unwrap(), 0);
        assert_eq!(g.inversion_start(mid).unwrap(), 4);
        assert_eq!(g.inversion_start(g.node(3).t).unwrap(), 3);
    }

    #[test]
    fn t_star_clipping_and_identity() {
        let s = sched();
        // huge ratio → T
        assert_eq!(s.solve_t_star(1e6, 1).unwrap(), s.t_end);
        // tiny ratio → eps
        assert_eq!(s.solve_t_star(1e-6, 1_000_000).unwrap(), s.eps);
        for &(c, m) in &[(1.0, 256usize), (3.0, 64), (0.5, 400), (20.0, 9)] {
            let t = s.solve_t_star(c, m).unwrap();
            let target = c / (m as f64).sqrt();
            let (a, sg) = s.alpha_sigma(t).unwrap();
            assert!((sg / a - target).abs() <= 1e-10, "c={c} m={m}");
            // α² = 1/(1 + C_s²/m)
            assert!((a * a - 1.0 / (1.0 + c * c / m as f64)).abs() < 1e-12);
        }
        assert!(s.solve_t_star(0.0, 10).is_err());
        assert!(s.solve_t_star(1.0, 0).is_err());
    }

    #[test]
    fn t_star_monotone_in_inputs() {
        let s = sched();
        let cs: Vec<f64> = (1..40).map(|k| 0.05 * k as f64).collect();
        let ts: Vec<f64> = cs
            .iter()
            .map(|&c| s.solve_t_star(c, 100).unwrap())
            .collect();
        assert!(ts.windows(2).all(|w| w[1] >= w[0]));
        let ms = [1usize, 4, 16, 64, 256, 1024];
        let ts: Vec<f64> = ms
            .iter()
            .map(|&m| s.solve_t_star(2.0, m).unwrap())
            .collect();
        assert!(ts.windows(2).all(|w| w[1] <= w[0]));
    }
}
