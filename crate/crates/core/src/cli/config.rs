//! Experiment configuration: a TOML document with the blocks `predictor`,
//! `schedule`, `grid`, `link`, `recovery`, `run`, `sweep` and `verify`, or
//! the same keys written flat as `block.key = value` lines.
//!
//! ```toml
//! [predictor]
//! kind = "gmm"          # constant | gaussian | gmm
//! components = 4        # gmm with orthonormal modes ...
//! var = 0.0025
//! mode_seed = 7         # ... or explicit weights / means / vars
//!
//! [grid]
//! n_samp = 100
//! n_inv = 50
//!
//! [link]
//! kind = "sign"
//! sigma = 0.05
//!
//! [recovery]
//! methods = ["sim_dms", "sim_dmis", "sim_dmfis"]
//! c_s = 4.0
//! c_s_prime = 1.6
//!
//! [run]
//! n = 32
//! m = 256
//! trials = 50
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::inversion::InversionMethod;
use crate::measurements::{LinkKind, LinkSpec, NoisePosition};
use crate::predictors::{
    AnalyticPrior, ConstantPredictor, GaussianPriorPredictor, GmmPriorPredictor,
};
use crate::recovery::Estimator;
use crate::schedule::{NoiseSchedule, Spacing};
use crate::solvers::SamplerMethod;

/// A scalar broadcast to every coordinate, or an explicit vector.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ScalarOrVec {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; n]),
            ScalarOrVec::Vector(v) if v.len() == n => Ok(v.clone()),
            ScalarOrVec::Vector(v) => Err(Error::config(
                path,
                format!("has {} entries but run.n = {n}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorBlock {
    pub kind: Option<String>,
    /// constant
    pub value: Option<ScalarOrVec>,
    /// gaussian
    pub mean: Option<ScalarOrVec>,
    /// gaussian, and the shared gmm variance
    pub var: Option<ScalarOrVec>,
    pub components: Option<usize>,
    pub mode_seed: Option<u64>,
    pub weights: Option<Vec<f64>>,
    pub means: Option<Vec<Vec<f64>>>,
    pub vars: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    #[serde(alias = "T")]
    pub t_end: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n_samp: Option<usize>,
    pub n_inv: Option<usize>,
    /// Sampler grid for SIM-DMS only; defaults to `n_samp`.
    pub n_samp_dms: Option<usize>,
    pub spacing: Option<String>,
    pub sampler: Option<String>,
    pub inverter: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBlock {
    pub kind: Option<String>,
    pub sigma: Option<f64>,
    pub noise_position: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryBlock {
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub c_s: Option<f64>,
    pub c_s_prime: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub m_list: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub base_seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Directory for per-trial `x̂` vector files.
    pub dump_dir: Option<PathBuf>,
    pub psnr_peak: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub c_s: Option<Vec<f64>>,
    pub c_s_prime: Option<Vec<f64>>,
    /// NFE sweep: sampler and inverter grid sizes.
    pub n_samp: Option<Vec<usize>>,
    pub n_inv: Option<Vec<usize>>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub c_prime: Option<f64>,
    pub trials: Option<usize>,
    pub m_list: Option<Vec<usize>>,
    pub pairs: Option<usize>,
    pub grid_sizes: Option<Vec<usize>>,
    pub t: Option<f64>,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
}

/// Raw configuration as read from disk; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub predictor: PredictorBlock,
    #[serde(default)]
    pub schedule: ScheduleBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub link: LinkBlock,
    #[serde(default)]
    pub recovery: RecoveryBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    /// Parses TOML, falling back to flat `block.key = value` lines with
    /// bare words accepted as strings.
    pub fn parse(text: &str) -> Result<Self> {
        match toml::from_str::<Self>(text) {
            Ok(cfg) => Ok(cfg),
            Err(first) => {
                let flat = flat_to_toml(text).ok_or_else(|| toml_error(&first, text))?;
                toml::from_str::<Self>(&flat).map_err(|e| toml_error(&e, &flat))
            }
        }
    }
}

/// Names the offending `block.key` from the error span where possible.
fn toml_error(e: &toml::de::Error, text: &str) -> Error {
    let message = e.message().trim().to_string();
    let Some(span) = e.span() else {
        return Error::config("document", message);
    };
    let start = span.start.min(text.len());
    let before = &text[..start];
    let line_no = before.matches('\n').count() + 1;
    let line = text.lines().nth(line_no - 1).unwrap_or("").trim();
    let block = text
        .lines()
        .take(line_no - 1)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .find_map(|l| l.trim().strip_prefix('[').and_then(|l| l.strip_suffix(']')));
    let path = if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
        header.to_string()
    } else {
        let key = line.split('=').next().unwrap_or("").trim();
        match block {
            _ if key.is_empty() => format!("line {line_no}"),
            Some(b) => format!("{b}.{key}"),
            None => key.to_string(),
        }
    };
    Error::config(path, format!("{message} (line {line_no})"))
}

fn flat_to_toml(text: &str) -> Option<String> {
    let mut out = String::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            return None;
        }
        let (key, value) = line.split_once('=')?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return None;
        }
        let is_toml_value = toml::from_str::<toml::Table>(&format!("v = {value}")).is_ok();
        if is_toml_value {
            out.push_str(&format!("{key} = {value}\n"));
        } else {
            out.push_str(&format!("{key} = {}\n", toml::Value::String(value.into())));
        }
    }
    Some(out)
}

/// Validated settings shared by every command.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub schedule: NoiseSchedule,
    pub prior: AnalyticPrior,
    pub link: LinkSpec,
    pub spacing: Spacing,
    pub sampler: SamplerMethod,
    pub inverter: InversionMethod,
    pub n_samp: usize,
    pub n_inv: usize,
    pub n_samp_dms: usize,
    pub methods: Vec<Estimator>,
    pub c_s: Option<f64>,
    pub c_s_prime: Option<f64>,
    pub n: usize,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub out: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
    pub psnr_peak: Option<f64>,
    pub sweep: SweepBlock,
    pub verify: VerifyBlock,
}

fn parse_field<T: std::str::FromStr<Err = Error>>(value: &str, path: &str) -> Result<T> {
    value
        .parse()
        .map_err(|e: Error| Error::config(path, e.to_string()))
}

fn positive(value: f64, path: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::config(
            path,
            format!("must be a positive number, got {value}"),
        ))
    }
}

fn at_least(value: usize, min: usize, path: &str) -> Result<usize> {
    if value >= min {
        Ok(value)
    } else {
        Err(Error::config(
            path,
            format!("must be at least {min}, got {value}"),
        ))
    }
}

fn reword(e: Error, path: &str) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    }
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let d = NoiseSchedule::default();
        let sc = &cfg.schedule;
        let schedule = NoiseSchedule::vp(
            sc.beta_min.unwrap_or(d.beta_min),
            sc.beta_max.unwrap_or(d.beta_max),
            sc.t_end.unwrap_or(d.t_end),
            sc.eps.unwrap_or(d.eps),
        )
        .map_err(|e| reword(e, "schedule"))?;

        let run = &cfg.run;
        let n = at_least(
            run.n.ok_or_else(|| Error::config("run.n", "missing"))?,
            1,
            "run.n",
        )?;
        let m_list = match (&run.m_list, run.m) {
            (Some(list), _) if !list.is_empty() => list.clone(),
            (Some(_), _) => return Err(Error::config("run.m_list", "must not be empty")),
            (None, Some(m)) => vec![m],
            (None, None) => vec![8 * n],
        };
        for &m in &m_list {
            at_least(m, 1, "run.m")?;
        }
        let trials = at_least(run.trials.unwrap_or(1), 1, "run.trials")?;
        if let Some(p) = run.psnr_peak {
            positive(p, "run.psnr_peak")?;
        }

        let prior = build_prior(&cfg.predictor, schedule, n)?;

        let g = &cfg.grid;
        let n_samp = at_least(g.n_samp.unwrap_or(100), 1, "grid.n_samp")?;
        let n_inv = at_least(g.n_inv.unwrap_or(n_samp), 1, "grid.n_inv")?;
        let n_samp_dms = at_least(g.n_samp_dms.unwrap_or(n_samp), 1, "grid.n_samp_dms")?;
        let spacing = match &g.spacing {
            Some(s) => parse_field(s, "grid.spacing")?,
            None => Spacing::UniformT,
        };
        let sampler = match &g.sampler {
            Some(s) => parse_field(s, "grid.sampler")?,
            None => SamplerMethod::Ddim,
        };
        let inverter = match &g.inverter {
            Some(s) => parse_field(s, "grid.inverter")?,
            None => InversionMethod::SecondOrder,
        };
        if sampler == SamplerMethod::Dm2m && n_samp.min(n_samp_dms) < 2 {
            return Err(Error::config(
                "grid.n_samp",
                "dm2m needs at least two steps",
            ));
        }
        if inverter == InversionMethod::SecondOrder && n_inv < 2 {
            return Err(Error::config(
                "grid.n_inv",
                "second-order inversion needs at least two steps",
            ));
        }

        let l = &cfg.link;
        let kind: LinkKind = match &l.kind {
            Some(s) => parse_field(s, "link.kind")?,
            None => LinkKind::Sign,
        };
        let sigma = l.sigma.unwrap_or(0.0);
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config("link.sigma", "must be a non-negative number"));
        }
        let mut link = LinkSpec::new(kind, sigma).map_err(|e| reword(e, "link"))?;
        if let Some(pos) = &l.noise_position {
            let position = match pos.as_str() {
                "pre-link" | "pre_link" | "pre" => NoisePosition::PreLink,
                "post-link" | "post_link" | "post" => NoisePosition::PostLink,
                other => {
                    return Err(Error::config(
                        "link.noise_position",
                        format!("expected pre-link or post-link, got `{other}`"),
                    ))
                }
            };
            link = link.with_position(position);
        }

        let r = &cfg.recovery;
        let methods = match (&r.methods, &r.method) {
            (Some(list), _) if !list.is_empty() => list
                .iter()
                .map(|s| parse_field(s, "recovery.methods"))
                .collect::<Result<Vec<Estimator>>>()?,
            (Some(_), _) => return Err(Error::config("recovery.methods", "must not be empty")),
            (None, Some(s)) => vec![parse_field(s, "recovery.method")?],
            (None, None) => vec![Estimator::SimDmis],
        };
        let c_s = r.c_s.map(|v| positive(v, "recovery.c_s")).transpose()?;
        let c_s_prime = r
            .c_s_prime
            .map(|v| positive(v, "recovery.c_s_prime"))
            .transpose()?;

        let sw = &cfg.sweep;
        for (list, path) in [(&sw.c_s, "sweep.c_s"), (&sw.c_s_prime, "sweep.c_s_prime")] {
            if let Some(list) = list {
                if list.is_empty() {
                    return Err(Error::config(path, "must not be empty"));
                }
                for &v in list {
                    positive(v, path)?;
                }
            }
        }
        for (list, path, min) in [
            (
                &sw.n_samp,
                "sweep.n_samp",
                if sampler == SamplerMethod::Dm2m { 2 } else { 1 },
            ),
            (
                &sw.n_inv,
                "sweep.n_inv",
                if inverter == InversionMethod::SecondOrder {
                    2
                } else {
                    1
                },
            ),
        ] {
            if let Some(list) = list {
                if list.is_empty() {
                    return Err(Error::config(path, "must not be empty"));
                }
                for &v in list {
                    at_least(v, min, path)?;
                }
            }
        }

        Ok(Self {
            schedule,
            prior,
            link,
            spacing,
            sampler,
            inverter,
            n_samp,
            n_inv,
            n_samp_dms,
            methods,
            c_s,
            c_s_prime,
            n,
            m_list,
            trials,
            base_seed: run.base_seed.unwrap_or(0),
            out: run.out.clone(),
            dump_dir: run.dump_dir.clone(),
            psnr_peak: run.psnr_peak,
            sweep: sw.clone(),
            verify: cfg.verify.clone(),
        })
    }
}

fn build_prior(p: &PredictorBlock, schedule: NoiseSchedule, n: usize) -> Result<AnalyticPrior> {
    let kind = p.kind.as_deref().unwrap_or("gaussian");
    let prior: AnalyticPrior = match kind {
        "constant" => {
            let value = p
                .value
                .as_ref()
                .ok_or_else(|| {
                    Error::config("predictor.value", "missing for a constant predictor")
                })?
                .expand(n, "predictor.value")?;
            ConstantPredictor::new(schedule, value)
                .map_err(|e| reword(e, "predictor.value"))?
                .into()
        }
        "gaussian" => {
            let mean = p
                .mean
                .clone()
                .unwrap_or(ScalarOrVec::Scalar(0.0))
                .expand(n, "predictor.mean")?;
            let var = p
                .var
                .clone()
                .unwrap_or(ScalarOrVec::Scalar(1.0))
                .expand(n, "predictor.var")?;
            GaussianPriorPredictor::new(schedule, mean, var)
                .map_err(|e| reword(e, "predictor"))?
                .into()
        }
        "gmm" => match (&p.means, p.components) {
            (Some(means), _) => {
                let k = means.len();
                if means.iter().any(|m| m.len() != n) {
                    return Err(Error::config(
                        "predictor.means",
                        format!("every mean needs run.n = {n} entries"),
                    ));
                }
                let weights = p.weights.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
                let vars = match (&p.vars, &p.var) {
                    (Some(v), _) => v.clone(),
                    (None, Some(v)) => vec![v.expand(n, "predictor.var")?; k],
                    (None, None) => return Err(Error::config("predictor.vars", "missing")),
                };
                GmmPriorPredictor::new(schedule, weights, means.clone(), vars)
                    .map_err(|e| reword(e, "predictor"))?
                    .into()
            }
            (None, Some(k)) => {
                let var = match &p.var {
                    Some(ScalarOrVec::Scalar(v)) => positive(*v, "predictor.var")?,
                    Some(_) => {
                        return Err(Error::config(
                            "predictor.var",
                            "orthonormal modes take a scalar variance",
                        ))
                    }
                    None => return Err(Error::config("predictor.var", "missing")),
                };
                GmmPriorPredictor::orthonormal_modes(schedule, n, k, var, p.mode_seed.unwrap_or(0))
                    .map_err(|e| reword(e, "predictor.components"))?
                    .into()
            }
            (None, None) => {
                return Err(Error::config(
                    "predictor",
                    "gmm needs either `means` or `components`",
                ))
            }
        },
        other => {
            return Err(Error::config(
                "predictor.kind",
                format!("expected constant, gaussian or gmm, got `{other}`"),
            ))
        }
    };
    Ok(prior)
}
