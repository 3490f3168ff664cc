//! DDIM against DM2M on a mixture prior, measured against an RK4 reference.
//!
//!     cargo run --release --example sampler_convergence

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simdm::predictors::{AnalyticPrior, GmmPriorPredictor};
use simdm::schedule::{NoiseSchedule, Spacing, TimeGrid};
use simdm::solvers::{estimate_order, reference_solve, SamplerMethod, SamplerSpec};
use simdm::vecops::dist;

fn main() -> simdm::Result<()> {
    let s = NoiseSchedule::default();
    let prior: AnalyticPrior = GmmPriorPredictor::orthonormal_modes(s, 8, 3, 0.2, 1)?.into();
    let x_t = prior.sample_marginal(s.t_end, &mut ChaCha8Rng::seed_from_u64(4))?;
    let exact = reference_solve(&prior, &x_t, s.t_end, s.eps, 4096)?;

    for method in [SamplerMethod::Ddim, SamplerMethod::Dm2m] {
        let mut pts = Vec::new();
        println!("{}:", method.name());
        for n in [8, 16, 32, 64, 128, 256] {
            let g = TimeGrid::new(&s, n, Spacing::UniformLambda)?;
            let out = SamplerSpec::new(method, &g, &prior)?.sample_full(&x_t)?;
            let err = dist(&out.x, &exact);
            println!(
                "  N={n:<4} h_max={:.4} nfe={:<4} error={err:.3e}",
                g.h_max(),
                out.nfe
            );
            pts.push((g.h_max(), err));
        }
        println!("  fitted order {:.3}", estimate_order(&pts[2..])?);
    }
    Ok(())
}
