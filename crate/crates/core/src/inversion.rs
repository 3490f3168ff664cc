//! Inversion direction: retrace the probability-flow ODE from `eps` toward
//! `T` on the same grid the sampler uses. Step `v_i` maps an iterate at
//! `t_i` to `t_{i-1}`; the full operator is `G† = v_1 ∘ ⋯ ∘ v_N`.

use crate::error::{Error, Result};
use crate::predictors::DataPredictor;
use crate::schedule::TimeGrid;
use crate::solvers::{check_pairing, check_state, exp_euler, multistep2, Solve};
use crate::vecops::all_finite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    /// Predictor evaluated at `(x̂_{t_i}, t_{i-1})`.
    NaiveDdim,
    /// Predictor evaluated at `(x̂_{t_i}, t_i)`.
    FirstOrder,
    /// Multistep mirror of DM2M along the reversed grid.
    SecondOrder,
}

impl InversionMethod {
    pub fn name(self) -> &'static str {
        match self {
            InversionMethod::NaiveDdim => "naive_ddim",
            InversionMethod::FirstOrder => "first_order",
            InversionMethod::SecondOrder => "second_order",
        }
    }

    pub fn order(self) -> usize {
        match self {
            InversionMethod::NaiveDdim | InversionMethod::FirstOrder => 1,
            InversionMethod::SecondOrder => 2,
        }
    }
}

impl std::str::FromStr for InversionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive_ddim" | "naive" => Ok(InversionMethod::NaiveDdim),
            "first_order" | "ddim" => Ok(InversionMethod::FirstOrder),
            "second_order" | "dm2m" => Ok(InversionMethod::SecondOrder),
            other => Err(Error::Parse(format!("unknown inverter `{other}`"))),
        }
    }
}

#[derive(Clone, Copy)]
pub struct InverterSpec<'a> {
    pub method: InversionMethod,
    pub grid: &'a TimeGrid,
    pub predictor: &'a dyn DataPredictor,
}

impl std::fmt::Debug for InverterSpec<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverterSpec")
            .field("method", &self.method)
            .field("steps", &self.grid.steps())
            .finish()
    }
}

impl<'a> InverterSpec<'a> {
    pub fn new(
        method: InversionMethod,
        grid: &'a TimeGrid,
        predictor: &'a dyn DataPredictor,
    ) -> Result<Self> {
        check_pairing(grid, predictor)?;
        if method == InversionMethod::SecondOrder && grid.steps() < 2 {
            return Err(Error::arg(
                "second-order inversion needs at least two steps",
            ));
        }
        Ok(Self {
            method,
            grid,
            predictor,
        })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.grid.steps() {
            return Err(Error::arg(format!(
                "inversion step {i} outside [1, {}]",
                self.grid.steps()
            )));
        }
        Ok(())
    }

    /// Naive DDIM inversion step: `x̂_{t_i} ↦ x̂_{t_{i-1}}` with the predictor
    /// queried at time `t_{i-1}`.
    pub fn naive_inv_step(&self, x: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let (from, to) = (self.grid.node(i), self.grid.node(i - 1));
        let pred = self.predictor.predict(x, to.t)?;
        Ok(exp_euler(x, &pred, from, to))
    }

    /// First-order inversion step, predictor queried at time `t_i`.
    pub fn first_order_inv_step(&self, x: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let (from, to) = (self.grid.node(i), self.grid.node(i - 1));
        let pred = self.predictor.predict(x, from.t)?;
        Ok(exp_euler(x, &pred, from, to))
    }

    /// Second-order inversion step from `x` at `t_i` with the previous
    /// iterate `x_next` at `t_{i+1}`.
    pub fn second_order_inv_step(&self, x: &[f64], x_next: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        if i == self.grid.steps() {
            return Err(Error::arg(
                "second-order inversion step at i = N has no history; use first_order_inv_step",
            ));
        }
        let g = self.grid;
        let pred = self.predictor.predict(x, g.node(i).t)?;
        let pred_prev = self.predictor.predict(x_next, g.node(i + 1).t)?;
        Ok(multistep2(
            x,
            &pred,
            &pred_prev,
            g.node(i + 1),
            g.node(i),
            g.node(i - 1),
        ))
    }

    /// `G† = v_1 ∘ ⋯ ∘ v_N`, from `eps` to `T`.
    pub fn invert_full(&self, x_eps: &[f64]) -> Result<Solve> {
        self.run_from(x_eps, self.grid.steps())
    }

    /// `G†_t = v_1 ∘ ⋯ ∘ v_{j_t}` with `j_t = min{j : t_j ≤ t}`. At `t = T`
    /// no step applies and the input is returned unchanged.
    pub fn invert_partial(&self, x: &[f64], t: f64) -> Result<Solve> {
        let start = self.grid.inversion_start(t)?;
        self.run_from(x, start)
    }

    fn run_from(&self, x: &[f64], start: usize) -> Result<Solve> {
        check_state(x, self.predictor.dim())?;
        let g = self.grid;
        let mut x = x.to_vec();
        let mut nfe = 0;
        let mut history: Option<Vec<f64>> = None;
        for i in (1..=start).rev() {
            let (from, to) = (g.node(i), g.node(i - 1));
            let eval_t = match self.method {
                InversionMethod::NaiveDdim => to.t,
                _ => from.t,
            };
            let pred = self.predictor.predict(&x, eval_t)?;
            nfe += 1;
            x = match (self.method, &history) {
                (InversionMethod::SecondOrder, Some(prev)) => {
                    multistep2(&x, &pred, prev, g.node(i + 1), from, to)
                }
                _ => exp_euler(&x, &pred, from, to),
            };
            history = Some(pred);
        }
        if !all_finite(&x) {
            return Err(Error::Numerical(
                "inversion produced non-finite output".into(),
            ));
        }
        Ok(Solve { x, nfe })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{ConstantPredictor, GaussianPriorPredictor, RecordingPredictor};
    use crate::schedule::{NoiseSchedule, Spacing};
    use crate::solvers::{SamplerMethod, SamplerSpec};
    use crate::vecops::{axpby, dist, norm};

    fn sched() -> NoiseSchedule {
        NoiseSchedule::default()
    }

    #[test]
    fn first_order_steps_invert_ddim_on_constant_predictor() {
        let s = sched();
        let p = ConstantPredictor::new(s, vec![0.4, -1.0]).unwrap();
        let g = TimeGrid::new(&s, 15, Spacing::UniformT).unwrap();
        let samp = SamplerSpec::new(SamplerMethod::Ddim, &g, &p).unwrap();
        let x = [2.0, 0.3];
        for method in [InversionMethod::NaiveDdim, InversionMethod::FirstOrder] {
            let inv = InverterSpec::new(method, &g, &p).unwrap();
            for i in 1..=15 {
                let fwd = samp.ddim_step(&x, i).unwrap();
                let back = match method {
                    InversionMethod::NaiveDdim => inv.naive_inv_step(&fwd, i).unwrap(),
                    _ => inv.first_order_inv_step(&fwd, i).unwrap(),
                };
                assert!(dist(&back, &x) < 1e-12, "{method:?} step {i}");
            }
        }
    }

    #[test]
    fn naive_inversion_is_not_exact_for_nonconstant_predictor() {
        let s = sched();
        let p = GaussianPriorPredictor::new(s, vec![0.3], vec![0.2]).unwrap();
        let x = [-1.5];
        let mut residuals = Vec::new();
        for &n in &[80, 160, 320] {
            let g = TimeGrid::new(&s, n, Spacing::UniformLambda).unwrap();
            let samp = SamplerSpec::new(SamplerMethod::Ddim, &g, &p).unwrap();
            let inv = InverterSpec::new(InversionMethod::NaiveDdim, &g, &p).unwrap();
            let i = n / 2;
            let back = inv
                .naive_inv_step(&samp.ddim_step(&x, i).unwrap(), i)
                .unwrap();
            residuals.push(dist(&back, &x));
        }
        assert!(residuals[0] > 0.0);
        // O(h²) per step: halving h cuts the residual by about 4
        for w in residuals.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio} {residuals:?}");
        }
    }

    #[test]
    fn naive_and_first_order_differ_only_in_time_argument() {
        let s = sched();
        let g = TimeGrid::new(&s, 6, Spacing::UniformT).unwrap();
        let rec = RecordingPredictor::new(GaussianPriorPredictor::standard(s, 2).unwrap());
        let x = [0.1, 0.2];
        let naive = InverterSpec::new(InversionMethod::NaiveDdim, &g, &rec).unwrap();
        naive.invert_full(&x).unwrap();
        let naive_calls = rec.calls();
        rec.clear();
        let first = InverterSpec::new(InversionMethod::FirstOrder, &g, &rec).unwrap();
        first.invert_full(&x).unwrap();
        let first_calls = rec.calls();
        let times = g.times();
        let want_naive: Vec<f64> = (1..=6).rev().map(|i| times[i - 1]).collect();
        let want_first: Vec<f64> = (1..=6).rev().map(|i| times[i]).collect();
        assert_eq!(naive_calls, want_naive);
        assert_eq!(first_calls, want_first);

        // a time-independent predictor makes the two schemes identical
        let c = ConstantPredictor::new(s, vec![0.5, 0.5]).unwrap();
        let a = InverterSpec::new(InversionMethod::NaiveDdim, &g, &c)
            .unwrap()
            .invert_full(&x)
            .unwrap();
        let b = InverterSpec::new(InversionMethod::FirstOrder, &g, &c)
            .unwrap()
            .invert_full(&x)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn second_order_step_rules() {
        let s = sched();
        let c = ConstantPredictor::new(s, vec![0.5, -0.5]).unwrap();
        let g = TimeGrid::new(&s, 8, Spacing::UniformT).unwrap();
        let second = InverterSpec::new(InversionMethod::SecondOrder, &g, &c).unwrap();
        let first = InverterSpec::new(InversionMethod::FirstOrder, &g, &c).unwrap();
        let x = [1.0, 2.0];
        for i in 1..8 {
            let a = second.second_order_inv_step(&x, &[9.0, 9.0], i).unwrap();
            let b = first.first_order_inv_step(&x, i).unwrap();
            assert!(dist(&a, &b) < 1e-12);
        }
        assert!(second.second_order_inv_step(&x, &x, 8).is_err());

        let p = GaussianPriorPredictor::new(s, vec![0.2], vec![0.3]).unwrap();
        let g = TimeGrid::new(&s, 10, Spacing::UniformLambda).unwrap();
        let inv = InverterSpec::new(InversionMethod::SecondOrder, &g, &p).unwrap();
        let (x, x_next) = ([0.4], [0.35]);
        let i = 4;
        let d = p.predict(&x, g.node(i).t).unwrap();
        let d_prev = p.predict(&x_next, g.node(i + 1).t).unwrap();
        let want = exp_euler(&x, &axpby(1.5, &d, -0.5, &d_prev), g.node(i), g.node(i - 1));
        let got = inv.second_order_inv_step(&x, &x_next, i).unwrap();
        assert!((got[0] - want[0]).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_round_trip_is_exact() {
        let s = sched();
        let p = ConstantPredictor::new(s, vec![0.2, 0.9, -0.4]).unwrap();
        let x = [1.0, -3.0, 0.25];
        for &n in &[1, 10, 50] {
            let g = TimeGrid::new(&s, n, Spacing::UniformT).unwrap();
            let samp = SamplerSpec::new(SamplerMethod::Ddim, &g, &p).unwrap();
            let inv = InverterSpec::new(InversionMethod::FirstOrder, &g, &p).unwrap();
            let rt = samp.sample_full(&inv.invert_full(&x).unwrap().x).unwrap();
            assert!(dist(&rt.x, &x) <= 1e-10 * norm(&x));
            let rt = inv.invert_full(&samp.sample_full(&x).unwrap().x).unwrap();
            assert!(dist(&rt.x, &x) <= 1e-10 * norm(&x));
        }
    }

    #[test]
    fn standard_gaussian_inversion_approaches_identity() {
        let s = sched();
        let p = GaussianPriorPredictor::standard(s, 3).unwrap();
        let x = [0.5, -1.0, 2.0];
        let errs: Vec<f64> = [10, 20, 40, 80]
            .iter()
            .map(|&n| {
                let g = TimeGrid::new(&s, n, Spacing::UniformT).unwrap();
                let inv = InverterSpec::new(InversionMethod::FirstOrder, &g, &p).unwrap();
                dist(&inv.invert_full(&x).unwrap().x, &x) / norm(&x)
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn partial_inversion_boundaries() {
        let s = sched();
        let p = GaussianPriorPredictor::new(s, vec![0.1, 0.0], vec![0.4, 0.4]).unwrap();
        let g = TimeGrid::new(&s, 12, Spacing::UniformT).unwrap();
        for method in [
            InversionMethod::FirstOrder,
            InversionMethod::SecondOrder,
            InversionMethod::NaiveDdim,
        ] {
            let inv = InverterSpec::new(method, &g, &p).unwrap();
            let x = [0.3, -0.6];
            assert_eq!(
                inv.invert_partial(&x, s.eps).unwrap(),
                inv.invert_full(&x).unwrap()
            );
            let at_t = inv.invert_partial(&x, s.t_end).unwrap();
            assert_eq!(at_t.x, x.to_vec());
            assert_eq!(at_t.nfe, 0);
            let mid = 0.5 * (g.node(4).t + g.node(5).t);
            assert_eq!(inv.invert_partial(&x, mid).unwrap().nfe, 5);
            assert!(inv.invert_partial(&x, 1e-4).is_err());
        }
    }
}
