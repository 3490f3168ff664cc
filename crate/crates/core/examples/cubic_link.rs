//! The same estimators on a cubic link with post-link noise. Nothing about
//! the link is passed to the recovery call.
//!
//!     cargo run --release --example cubic_link

use simdm::analysis::metrics;
use simdm::inversion::{InversionMethod, InverterSpec};
use simdm::measurements::{make_instance, LinkKind, LinkSpec, XStarSource};
use simdm::predictors::{AnalyticPrior, GmmPriorPredictor};
use simdm::recovery::{recover, Estimator, RecoveryConfig};
use simdm::schedule::{NoiseSchedule, Spacing, TimeGrid};
use simdm::solvers::{SamplerMethod, SamplerSpec};
use simdm::vecops::median;

fn main() -> simdm::Result<()> {
    let s = NoiseSchedule::default();
    let n = 32;
    let prior: AnalyticPrior = GmmPriorPredictor::orthonormal_modes(s, n, 4, 0.0025, 7)?.into();
    let link = LinkSpec::new(LinkKind::Cubic, 0.5)?;
    let grid = TimeGrid::new(&s, 100, Spacing::UniformT)?;
    let inv_grid = TimeGrid::new(&s, 50, Spacing::UniformT)?;
    let cfg = RecoveryConfig {
        method: Estimator::SimDmis,
        c_s: 4.0,
        c_s_prime: 1.6,
        sampler: SamplerSpec::new(SamplerMethod::Ddim, &grid, &prior)?,
        inverter: InverterSpec::new(InversionMethod::SecondOrder, &inv_grid, &prior)?,
    };
    for m in [32, 64, 128, 256, 512] {
        let mut cos = Vec::new();
        let mut raw = Vec::new();
        for seed in 0..20 {
            let inst = make_instance(n, m, link, XStarSource::Prior(&prior), seed)?;
            raw.push(metrics(&inst.back_project(), &inst.x_star, None)?.cosine);
            cos.push(metrics(&recover(&cfg, &inst.a, &inst.y)?.x_hat, &inst.x_star, None)?.cosine);
        }
        println!(
            "m={m:<4} median cosine: back-projection {:.4}, sim_dmis {:.4}",
            median(&raw),
            median(&cos)
        );
    }
    Ok(())
}
