//! Inverts a data sample to noise and samples it back, for each inverter.
//!
//!     cargo run --release --example inversion_round_trip

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simdm::analysis::round_trip_error;
use simdm::inversion::{InversionMethod, InverterSpec};
use simdm::predictors::{AnalyticPrior, GmmPriorPredictor};
use simdm::schedule::{NoiseSchedule, Spacing, TimeGrid};
use simdm::solvers::{SamplerMethod, SamplerSpec};

fn main() -> simdm::Result<()> {
    let s = NoiseSchedule::default();
    let prior: AnalyticPrior = GmmPriorPredictor::orthonormal_modes(s, 16, 4, 0.05, 2)?.into();
    let x0 = prior.sample_marginal(s.eps, &mut ChaCha8Rng::seed_from_u64(10))?;

    println!(
        "{:>5} {:>12} {:>12} {:>12}",
        "N", "naive_ddim", "first_order", "second_order"
    );
    for n in [10, 25, 50, 100, 200] {
        let g = TimeGrid::new(&s, n, Spacing::UniformLambda)?;
        let mut cols = Vec::new();
        for im in [
            InversionMethod::NaiveDdim,
            InversionMethod::FirstOrder,
            InversionMethod::SecondOrder,
        ] {
            // pair each inverter with the sampler of matching order
            let sm = if im == InversionMethod::SecondOrder {
                SamplerMethod::Dm2m
            } else {
                SamplerMethod::Ddim
            };
            let inv = InverterSpec::new(im, &g, &prior)?;
            let samp = SamplerSpec::new(sm, &g, &prior)?;
            cols.push(round_trip_error(&samp, &inv, &x0)?);
        }
        println!(
            "{n:>5} {:>12.3e} {:>12.3e} {:>12.3e}",
            cols[0], cols[1], cols[2]
        );
    }
    Ok(())
}
