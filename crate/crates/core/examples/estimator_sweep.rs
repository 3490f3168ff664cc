//! Tunes C_s and C_s' for each estimator over a config file's sweep grid.
//!
//!     cargo run --release --example estimator_sweep [-- path/to/config.toml]

use std::path::PathBuf;

use simdm::cli::{cmd_sweep, Experiment, ExperimentConfig};
use simdm::recovery::Estimator;

fn main() -> simdm::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/gmm_sign.toml"));
    let mut exp = Experiment::from_config(&ExperimentConfig::load(&path)?)?;
    exp.trials = exp.trials.max(20);
    let outcome = cmd_sweep(&exp, None)?;
    for &m in &exp.m_list {
        println!("m = {m}, {} trials", exp.trials);
        for method in Estimator::ALL {
            if let Some(c) = outcome.best(method, m) {
                println!(
                    "  {:<10} median {:.5} mean {:.5} at C_s={} C_s'={}",
                    method.name(),
                    c.median_cosine,
                    c.mean_cosine,
                    c.params.c_s,
                    c.params.c_s_prime
                );
            }
        }
    }
    Ok(())
}
