use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::Experiment;
use super::report::{g9, write_csv, ResultRow};
use crate::analysis::{
    empirical_expansion, lipschitz_certificate, metrics, round_trip_error, theorem1_curve,
    verify_lemma1, verify_lemma2,
};
use crate::error::{Error, Result};
use crate::inversion::{InversionMethod, InverterSpec};
use crate::measurements::{make_instance, XStarSource};
use crate::predictors::DataPredictor;
use crate::recovery::{recover, Estimator, RecoveryConfig};
use crate::schedule::TimeGrid;
use crate::solvers::{SamplerMethod, SamplerSpec};
use crate::textio::write_vector;
use crate::vecops::median;

/// Tuning constants and grid sizes for one batch of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub c_s: f64,
    pub c_s_prime: f64,
    pub n_samp: usize,
    pub n_inv: usize,
    pub n_samp_dms: usize,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub row: ResultRow,
    pub x_hat: Vec<f64>,
}

/// Runs every configured estimator on `trials` instances per `m`. Trial
/// `k` uses seed `base_seed + k`; output is ordered by `m`, trial, method.
pub fn run_trials(
    exp: &Experiment,
    params: RunParams,
    x_star: Option<&[f64]>,
) -> Result<Vec<TrialOutput>> {
    let grid = |steps: usize| TimeGrid::new(&exp.schedule, steps, exp.spacing);
    let samp_grid = grid(params.n_samp)?;
    let dms_grid = grid(params.n_samp_dms)?;
    let inv_grid = grid(params.n_inv)?;
    let prior: &dyn DataPredictor = &exp.prior;
    let inverter = InverterSpec::new(exp.inverter, &inv_grid, prior)?;
    let configs: Vec<RecoveryConfig<'_>> = exp
        .methods
        .iter()
        .map(|&method| {
            let g = if method == Estimator::SimDms {
                &dms_grid
            } else {
                &samp_grid
            };
            Ok(RecoveryConfig {
                method,
                c_s: params.c_s,
                c_s_prime: params.c_s_prime,
                sampler: SamplerSpec::new(exp.sampler, g, prior)?,
                inverter,
            })
        })
        .collect::<Result<_>>()?;
    let source = match x_star {
        Some(v) => XStarSource::Explicit(v),
        None => XStarSource::Prior(&exp.prior),
    };
    let jobs: Vec<(usize, u64)> = exp
        .m_list
        .iter()
        .flat_map(|&m| (0..exp.trials as u64).map(move |k| (m, k)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(m, k)| {
            let seed = exp.base_seed.wrapping_add(k);
            let inst = make_instance(exp.n, m, exp.link, source, seed)?;
            configs
                .iter()
                .map(|cfg| {
                    let start = Instant::now();
                    let rec = recover(cfg, &inst.a, &inst.y)?;
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    let q = metrics(&rec.x_hat, &inst.x_star, exp.psnr_peak)?;
                    let (n_inv, n_samp) = match cfg.method {
                        Estimator::SimDms => (0, params.n_samp_dms),
                        _ => (params.n_inv, params.n_samp),
                    };
                    Ok(TrialOutput {
                        row: ResultRow {
                            seed,
                            method: cfg.method,
                            link: exp.link.kind,
                            n: exp.n,
                            m,
                            sigma: exp.link.noise_sigma,
                            c_s: params.c_s,
                            c_s_prime: params.c_s_prime,
                            n_inv,
                            n_samp,
                            t_star: rec.t_star,
                            nfe: rec.nfe,
                            cosine: q.cosine,
                            rel_l2: q.rel_l2,
                            psnr: q.psnr,
                            wall_ms,
                        },
                        x_hat: rec.x_hat,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn base_params(exp: &Experiment) -> Result<RunParams> {
    let only_dmfis = exp.methods.iter().all(|&m| m == Estimator::SimDmfis);
    let c_s = match exp.c_s {
        Some(v) => v,
        None if only_dmfis => f64::NAN,
        None => {
            return Err(Error::config(
                "recovery.c_s",
                "missing (no default; sweep to tune)",
            ))
        }
    };
    let c_s_prime = exp.c_s_prime.ok_or_else(|| {
        Error::config("recovery.c_s_prime", "missing (no default; sweep to tune)")
    })?;
    Ok(RunParams {
        c_s,
        c_s_prime,
        n_samp: exp.n_samp,
        n_inv: exp.n_inv,
        n_samp_dms: exp.n_samp_dms,
    })
}

/// Runs the configured trials; optionally dumps every `x̂` to `dump_dir`.
pub fn cmd_recover(exp: &Experiment, x_star: Option<&[f64]>) -> Result<Vec<ResultRow>> {
    let params = base_params(exp)?;
    let out = run_trials(exp, params, x_star)?;
    if let Some(dir) = &exp.dump_dir {
        std::fs::create_dir_all(dir)?;
        for t in &out {
            let name = format!(
                "xhat_{}_m{}_seed{}.txt",
                t.row.method.name(),
                t.row.m,
                t.row.seed
            );
            write_vector(dir.join(name), &t.x_hat)?;
        }
    }
    log::info!("recover: {} rows", out.len());
    Ok(out.into_iter().map(|t| t.row).collect())
}

/// Median and mean cosine of one sweep cell for one method and `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub method: Estimator,
    pub m: usize,
    pub params: RunParams,
    pub median_cosine: f64,
    pub mean_cosine: f64,
    /// Argmax of the median cosine over the sweep for this method and `m`.
    pub best: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub cells: Vec<SweepCell>,
}

impl SweepOutcome {
    pub fn best(&self, method: Estimator, m: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.best && c.method == method && c.m == m)
    }
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "method",
    "m",
    "C_s",
    "C_s_prime",
    "N_inv",
    "N_samp",
    "median_cosine",
    "mean_cosine",
    "trials",
    "best",
];

/// Full-factorial sweep over `C_s × C_s' × N_samp × N_inv`. Lists missing
/// from the sweep block fall back to the single configured value.
pub fn cmd_sweep(exp: &Experiment, x_star: Option<&[f64]>) -> Result<SweepOutcome> {
    let sw = &exp.sweep;
    let list = |v: &Option<Vec<f64>>, single: Option<f64>, path: &str| -> Result<Vec<f64>> {
        match (v, single) {
            (Some(l), _) => Ok(l.clone()),
            (None, Some(x)) => Ok(vec![x]),
            (None, None) => Err(Error::config(
                path,
                "give a list to sweep or a single value",
            )),
        }
    };
    let cs = list(&sw.c_s, exp.c_s, "sweep.c_s")?;
    let csp = list(&sw.c_s_prime, exp.c_s_prime, "sweep.c_s_prime")?;
    let nfe_mode = sw.n_samp.is_some() || sw.n_inv.is_some();
    let n_samps = sw.n_samp.clone().unwrap_or_else(|| vec![exp.n_samp]);
    let n_invs = sw.n_inv.clone().unwrap_or_else(|| vec![exp.n_inv]);
    let mut cells_params = Vec::new();
    for &c_s in &cs {
        for &c_s_prime in &csp {
            for &n_samp in &n_samps {
                for &n_inv in &n_invs {
                    cells_params.push(RunParams {
                        c_s,
                        c_s_prime,
                        n_samp,
                        n_inv,
                        n_samp_dms: if nfe_mode { n_samp } else { exp.n_samp_dms },
                    });
                }
            }
        }
    }
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for params in cells_params {
        let out = run_trials(exp, params, x_star)?;
        for &method in &exp.methods {
            for &m in &exp.m_list {
                let cos: Vec<f64> = out
                    .iter()
                    .filter(|t| t.row.method == method && t.row.m == m)
                    .map(|t| t.row.cosine)
                    .collect();
                cells.push(SweepCell {
                    method,
                    m,
                    params,
                    median_cosine: median(&cos),
                    mean_cosine: cos.iter().sum::<f64>() / cos.len() as f64,
                    best: false,
                });
            }
        }
        rows.extend(out.into_iter().map(|t| t.row));
    }
    for &method in &exp.methods {
        for &m in &exp.m_list {
            let best = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.method == method && c.m == m)
                .max_by(|a, b| a.1.median_cosine.total_cmp(&b.1.median_cosine))
                .map(|(i, _)| i);
            if let Some(i) = best {
                cells[i].best = true;
                let c = &cells[i];
                log::info!(
                    "best {} m={}: C_s={} C_s'={} median cosine {:.4}",
                    method.name(),
                    m,
                    c.params.c_s,
                    c.params.c_s_prime,
                    c.median_cosine
                );
            }
        }
    }
    Ok(SweepOutcome { rows, cells })
}

pub fn summary_rows(outcome: &SweepOutcome, trials: usize) -> Vec<Vec<String>> {
    outcome
        .cells
        .iter()
        .map(|c| {
            let (n_inv, n_samp) = match c.method {
                Estimator::SimDms => (0, c.params.n_samp_dms),
                _ => (c.params.n_inv, c.params.n_samp),
            };
            vec![
                c.method.name().to_string(),
                c.m.to_string(),
                g9(c.params.c_s),
                g9(c.params.c_s_prime),
                n_inv.to_string(),
                n_samp.to_string(),
                g9(c.median_cosine),
                g9(c.mean_cosine),
                trials.to_string(),
                u8::from(c.best).to_string(),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyKind {
    Lemma1,
    Lemma2,
    Lipschitz,
    Theorem1,
    Roundtrip,
}

/// A verifier's CSV report and the tolerance checks it ran.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Human-readable inequalities that failed; empty on success.
    pub failures: Vec<String>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.header, &self.rows)
    }
}

pub fn cmd_verify(which: VerifyKind, exp: &Experiment) -> Result<VerifyOutcome> {
    let v = &exp.verify;
    let seed = v.seed.unwrap_or(exp.base_seed);
    match which {
        VerifyKind::Lemma1 => {
            let n = v.n.unwrap_or(1000);
            let c = v.c.unwrap_or(3.0);
            let r = verify_lemma1(n, c, v.trials.unwrap_or(100), seed)?;
            let mut failures = Vec::new();
            if r.success_rate() < 0.99 {
                failures.push(format!(
                    "{}: held in {}/{} trials, need >= 99%",
                    r.inequality, r.successes, r.trials
                ));
            }
            Ok(VerifyOutcome {
                header: vec![
                    "n",
                    "C",
                    "trials",
                    "successes",
                    "bound",
                    "median",
                    "q90",
                    "q99",
                    "max",
                ],
                rows: vec![vec![
                    n.to_string(),
                    g9(c),
                    r.trials.to_string(),
                    r.successes.to_string(),
                    g9(r.bound),
                    g9(r.observed.median),
                    g9(r.observed.q90),
                    g9(r.observed.q99),
                    g9(r.observed.max),
                ]],
                failures,
            })
        }
        VerifyKind::Lemma2 => {
            let n = v.n.unwrap_or(64);
            let m_list = v
                .m_list
                .clone()
                .unwrap_or_else(|| vec![256, 1024, 4096, 16384]);
            let c_prime = v.c_prime.unwrap_or(10.0);
            let r = verify_lemma2(n, &m_list, exp.link, c_prime, v.trials.unwrap_or(50), seed)?;
            let mut failures = Vec::new();
            if !(-0.65..=-0.35).contains(&r.slope) {
                failures.push(format!(
                    "median-error slope {} outside [-0.65, -0.35]",
                    r.slope
                ));
            }
            let rows = r
                .rows
                .iter()
                .map(|row| {
                    let b = &row.report;
                    if b.success_rate() < 0.99 {
                        failures.push(format!(
                            "{}: held in {}/{} trials, need >= 99%",
                            b.inequality, b.successes, b.trials
                        ));
                    }
                    vec![
                        row.m.to_string(),
                        g9(c_prime),
                        g9(r.mu),
                        b.trials.to_string(),
                        b.successes.to_string(),
                        g9(b.bound),
                        g9(b.observed.median),
                        g9(b.observed.q90),
                        g9(b.observed.max),
                        g9(row.e1_rate),
                        g9(r.slope),
                    ]
                })
                .collect();
            Ok(VerifyOutcome {
                header: vec![
                    "m",
                    "C_prime",
                    "mu",
                    "trials",
                    "successes",
                    "bound",
                    "median",
                    "q90",
                    "max",
                    "e1_rate",
                    "slope",
                ],
                rows,
                failures,
            })
        }
        VerifyKind::Lipschitz => {
            let grid = TimeGrid::new(&exp.schedule, exp.n_samp, exp.spacing)?;
            let pairs = v.pairs.unwrap_or(200);
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            for method in [SamplerMethod::Ddim, SamplerMethod::Dm2m] {
                if method == SamplerMethod::Dm2m && grid.steps() < 2 {
                    continue;
                }
                let sampler = SamplerSpec::new(method, &grid, &exp.prior)?;
                let cert = lipschitz_certificate(&sampler)?.lipschitz;
                let seen = empirical_expansion(&sampler, pairs, seed)?;
                if seen > cert * (1.0 + 1e-9) {
                    failures.push(format!(
                        "{}: empirical expansion {seen} > certificate {cert}",
                        method.name()
                    ));
                }
                rows.push(vec![
                    method.name().to_string(),
                    grid.steps().to_string(),
                    g9(cert),
                    g9(seen),
                    pairs.to_string(),
                ]);
            }
            Ok(VerifyOutcome {
                header: vec!["method", "N", "certificate", "empirical", "pairs"],
                rows,
                failures,
            })
        }
        VerifyKind::Theorem1 => {
            let sizes = v
                .grid_sizes
                .clone()
                .unwrap_or_else(|| vec![16, 32, 64, 128]);
            let t = v.t.unwrap_or(0.5);
            let (k1, k2) = (v.k1.unwrap_or(2), v.k2.unwrap_or(2));
            let curve = theorem1_curve(&exp.prior, &sizes, t, k1, k2, seed)?;
            let mut failures = Vec::new();
            match curve.order {
                Some(order) => {
                    let need = k1.min(k2) as f64 - 0.3;
                    if order < need {
                        failures.push(format!("fitted order {order} < {need}"));
                    }
                }
                None => {
                    let tol = v.tolerance.unwrap_or(1e-10);
                    if let Some(p) = curve.points.iter().find(|p| p.error > tol) {
                        failures.push(format!("error {} > {tol} at N = {}", p.error, p.steps));
                    }
                }
            }
            let order = curve.order.map(g9).unwrap_or_else(|| "nan".into());
            let rows = curve
                .points
                .iter()
                .map(|p| {
                    vec![
                        g9(t),
                        k1.to_string(),
                        k2.to_string(),
                        p.steps.to_string(),
                        g9(p.h_max),
                        g9(p.error),
                        order.clone(),
                    ]
                })
                .collect();
            Ok(VerifyOutcome {
                header: vec!["t", "k1", "k2", "N", "h_max", "error", "order"],
                rows,
                failures,
            })
        }
        VerifyKind::Roundtrip => {
            let sizes = v.grid_sizes.clone().unwrap_or_else(|| vec![1, 10, 50]);
            let tol = v.tolerance.unwrap_or(1e-10);
            let trials = v.trials.unwrap_or(10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs = (0..trials)
                .map(|_| exp.prior.sample_marginal(exp.schedule.eps, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            for &steps in &sizes {
                let grid = TimeGrid::new(&exp.schedule, steps, exp.spacing)?;
                // two-step methods fall back to first order on one-step grids
                let samp_method = if steps < 2 {
                    SamplerMethod::Ddim
                } else {
                    exp.sampler
                };
                let inv_method = match exp.inverter {
                    InversionMethod::SecondOrder if steps < 2 => InversionMethod::FirstOrder,
                    m => m,
                };
                let sampler = SamplerSpec::new(samp_method, &grid, &exp.prior)?;
                let inverter = InverterSpec::new(inv_method, &grid, &exp.prior)?;
                let worst = inputs
                    .iter()
                    .map(|x| round_trip_error(&sampler, &inverter, x))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                if worst.is_nan() || worst > tol {
                    failures.push(format!("round trip error {worst} > {tol} at N = {steps}"));
                }
                rows.push(vec![
                    steps.to_string(),
                    samp_method.name().to_string(),
                    inv_method.name().to_string(),
                    g9(worst),
                    g9(tol),
                ]);
            }
            Ok(VerifyOutcome {
                header: vec!["N", "sampler", "inverter", "max_rel_error", "tolerance"],
                rows,
                failures,
            })
        }
    }
}

/// Reads an `x*` vector file for `--x-star-file`.
pub fn load_x_star(path: &Path, n: usize) -> Result<Vec<f64>> {
    let v = crate::textio::read_vector(path)
        .map_err(|e| Error::config("--x-star-file", format!("{}: {e}", path.display())))?;
    if v.len() != n {
        return Err(Error::config(
            "--x-star-file",
            format!("has {} entries but run.n = {n}", v.len()),
        ));
    }
    Ok(v)
}
