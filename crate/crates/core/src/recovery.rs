//! The three estimators. Each sees only the sensing matrix and the
//! observations; the link function never enters.
//!
//! | estimator | output |
//! |-----------|--------|
//! | SIM-DMFIS | `G ∘ G†(C_s' b)` |
//! | SIM-DMS   | `G_{t*}(α_{t*} C_s' b)` |
//! | SIM-DMIS  | `G ∘ G†_{t*}(α_{t*} C_s' b)` |
//!
//! with `b = (1/m) Aᵀ y` and `σ_{t*}/α_{t*} = C_s/√m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::InverterSpec;
use crate::measurements::{back_project, Matrix};
use crate::solvers::SamplerSpec;
use crate::vecops::scaled;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    SimDms,
    SimDmis,
    SimDmfis,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::SimDms, Estimator::SimDmis, Estimator::SimDmfis];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::SimDms => "sim_dms",
            Estimator::SimDmis => "sim_dmis",
            Estimator::SimDmfis => "sim_dmfis",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sim_dms" | "dms" => Ok(Estimator::SimDms),
            "sim_dmis" | "dmis" => Ok(Estimator::SimDmis),
            "sim_dmfis" | "dmfis" => Ok(Estimator::SimDmfis),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryConfig<'a> {
    pub method: Estimator,
    pub c_s: f64,
    pub c_s_prime: f64,
    pub sampler: SamplerSpec<'a>,
    /// Unused by SIM-DMS.
    pub inverter: InverterSpec<'a>,
}

/// Raw estimate (not normalized) with the intermediate time actually used
/// and the predictor-evaluation count.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub x_hat: Vec<f64>,
    pub t_star: f64,
    pub nfe: usize,
}

impl RecoveryConfig<'_> {
    fn validate(&self, a: &Matrix, y: &[f64]) -> Result<()> {
        if a.rows() != y.len() {
            return Err(Error::arg(format!(
                "A has {} rows but y has {} entries",
                a.rows(),
                y.len()
            )));
        }
        if a.cols() != self.sampler.predictor.dim() {
            return Err(Error::arg(format!(
                "A has {} columns but the predictor has dimension {}",
                a.cols(),
                self.sampler.predictor.dim()
            )));
        }
        if self.method != Estimator::SimDmfis && !(self.c_s.is_finite() && self.c_s > 0.0) {
            return Err(Error::arg("C_s must be positive"));
        }
        if !(self.c_s_prime.is_finite() && self.c_s_prime > 0.0) {
            return Err(Error::arg("C_s' must be positive"));
        }
        Ok(())
    }

    /// `t*` and the scaled back-projection `α_{t*} C_s' (1/m) Aᵀ y`.
    fn scaled_input(&self, a: &Matrix, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let schedule = self.sampler.grid.schedule();
        let t_star = schedule.solve_t_star(self.c_s, a.rows())?;
        let alpha = schedule.alpha(t_star)?;
        Ok((t_star, scaled(&back_project(a, y), alpha * self.c_s_prime)))
    }
}

/// Full inversion of `C_s' b` from `eps`, then full sampling. `C_s` plays
/// no role.
pub fn recover_dmfis(cfg: &RecoveryConfig<'_>, a: &Matrix, y: &[f64]) -> Result<Recovery> {
    cfg.validate(a, y)?;
    let b = scaled(&back_project(a, y), cfg.c_s_prime);
    let inv = cfg.inverter.invert_full(&b)?;
    let out = cfg.sampler.sample_full(&inv.x)?;
    Ok(Recovery {
        x_hat: out.x,
        t_star: cfg.sampler.grid.schedule().eps,
        nfe: inv.nfe + out.nfe,
    })
}

/// Partial sampling from `t*`, no inversion.
pub fn recover_dms(cfg: &RecoveryConfig<'_>, a: &Matrix, y: &[f64]) -> Result<Recovery> {
    cfg.validate(a, y)?;
    let (t_star, x_in) = cfg.scaled_input(a, y)?;
    let out = cfg.sampler.sample_partial(&x_in, t_star)?;
    Ok(Recovery {
        x_hat: out.x,
        t_star,
        nfe: out.nfe,
    })
}

/// Partial inversion from `t*` to `T`, then full sampling.
pub fn recover_dmis(cfg: &RecoveryConfig<'_>, a: &Matrix, y: &[f64]) -> Result<Recovery> {
    cfg.validate(a, y)?;
    let (t_star, x_in) = cfg.scaled_input(a, y)?;
    let inv = cfg.inverter.invert_partial(&x_in, t_star)?;
    let out = cfg.sampler.sample_full(&inv.x)?;
    Ok(Recovery {
        x_hat: out.x,
        t_star,
        nfe: inv.nfe + out.nfe,
    })
}

pub fn recover(cfg: &RecoveryConfig<'_>, a: &Matrix, y: &[f64]) -> Result<Recovery> {
    match cfg.method {
        Estimator::SimDms => recover_dms(cfg, a, y),
        Estimator::SimDmis => recover_dmis(cfg, a, y),
        Estimator::SimDmfis => recover_dmfis(cfg, a, y),
    }
}
