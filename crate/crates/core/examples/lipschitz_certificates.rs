//! Certified Lipschitz constants of the samplers next to observed expansion.
//!
//!     cargo run --release --example lipschitz_certificates

use simdm::analysis::{empirical_expansion, lipschitz_certificate};
use simdm::predictors::{AnalyticPrior, GaussianPriorPredictor, GmmPriorPredictor};
use simdm::schedule::{NoiseSchedule, Spacing, TimeGrid};
use simdm::solvers::{SamplerMethod, SamplerSpec};

fn main() -> simdm::Result<()> {
    let s = NoiseSchedule::default();
    let priors: Vec<(&str, AnalyticPrior)> = vec![
        (
            "gaussian",
            GaussianPriorPredictor::new(s, vec![0.0; 4], vec![0.1, 0.5, 1.0, 2.0])?.into(),
        ),
        (
            "gmm",
            GmmPriorPredictor::orthonormal_modes(s, 4, 2, 0.3, 5)?.into(),
        ),
    ];
    for (name, prior) in &priors {
        for n in [10, 50, 200] {
            let g = TimeGrid::new(&s, n, Spacing::UniformT)?;
            for method in [SamplerMethod::Ddim, SamplerMethod::Dm2m] {
                let spec = SamplerSpec::new(method, &g, prior)?;
                let cert = lipschitz_certificate(&spec)?.lipschitz;
                let seen = empirical_expansion(&spec, 200, 8)?;
                println!(
                    "{name:<8} N={n:<4} {:<5} observed {seen:>9.4}  certified {cert:>12.4}",
                    method.name()
                );
            }
        }
    }
    Ok(())
}
