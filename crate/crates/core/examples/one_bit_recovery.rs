//! One-bit measurements of a mixture-prior signal, recovered three ways.
//!
//!     cargo run --release --example one_bit_recovery

use simdm::analysis::metrics;
use simdm::inversion::{InversionMethod, InverterSpec};
use simdm::measurements::{make_instance, LinkKind, LinkSpec, XStarSource};
use simdm::predictors::{AnalyticPrior, GmmPriorPredictor};
use simdm::recovery::{recover, Estimator, RecoveryConfig};
use simdm::schedule::{NoiseSchedule, Spacing, TimeGrid};
use simdm::solvers::{SamplerMethod, SamplerSpec};

fn main() -> simdm::Result<()> {
    let s = NoiseSchedule::default();
    let (n, m) = (32, 256);
    let prior: AnalyticPrior = GmmPriorPredictor::orthonormal_modes(s, n, 4, 0.0025, 7)?.into();
    let link = LinkSpec::new(LinkKind::Sign, 0.05)?;
    let inst = make_instance(n, m, link, XStarSource::Prior(&prior), 2024)?;

    let b = inst.back_project();
    println!(
        "back-projection alone: cosine {:.4}",
        metrics(&b, &inst.x_star, None)?.cosine
    );

    let samp_grid = TimeGrid::new(&s, 100, Spacing::UniformT)?;
    let inv_grid = TimeGrid::new(&s, 50, Spacing::UniformT)?;
    let short_grid = TimeGrid::new(&s, 50, Spacing::UniformT)?;
    for (method, c_s, c_s_prime) in [
        (Estimator::SimDms, 2.0, 1.25),
        (Estimator::SimDmis, 4.0, 1.6),
        (Estimator::SimDmfis, 8.0, 1.0),
    ] {
        let grid = if method == Estimator::SimDms {
            &short_grid
        } else {
            &samp_grid
        };
        let cfg = RecoveryConfig {
            method,
            c_s,
            c_s_prime,
            sampler: SamplerSpec::new(SamplerMethod::Ddim, grid, &prior)?,
            inverter: InverterSpec::new(InversionMethod::SecondOrder, &inv_grid, &prior)?,
        };
        let r = recover(&cfg, &inst.a, &inst.y)?;
        let q = metrics(&r.x_hat, &inst.x_star, None)?;
        println!(
            "{:<10} t*={:.4} nfe={:<4} cosine {:.4} rel_l2 {:.4}",
            method.name(),
            r.t_star,
            r.nfe,
            q.cosine,
            q.rel_l2
        );
    }
    Ok(())
}
