use std::path::PathBuf;

use simdm::analysis::theorem1_curve;
use simdm::cli::{cmd_sweep, Experiment, ExperimentConfig};
use simdm::measurements::{LinkKind, LinkSpec};
use simdm::predictors::GmmPriorPredictor;
use simdm::recovery::Estimator;
use simdm::schedule::NoiseSchedule;

fn gmm_experiment() -> Experiment {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/gmm_sign.toml");
    Experiment::from_config(&ExperimentConfig::load(&path).unwrap()).unwrap()
}

#[test]
fn dmis_improves_with_more_measurements() {
    let mut exp = gmm_experiment();
    exp.methods = vec![Estimator::SimDmis];
    exp.trials = 50;
    exp.m_list = vec![exp.n, 2 * exp.n, 4 * exp.n, 8 * exp.n];
    let outcome = cmd_sweep(&exp, None).unwrap();
    let medians: Vec<f64> = exp
        .m_list
        .iter()
        .map(|&m| outcome.best(Estimator::SimDmis, m).unwrap().median_cosine)
        .collect();
    let drops: Vec<f64> = medians
        .windows(2)
        .map(|w| w[0] - w[1])
        .filter(|d| *d > 0.0)
        .collect();
    assert!(
        drops.len() <= 1 && drops.iter().all(|d| *d <= 0.02),
        "{medians:?}"
    );
}

#[test]
fn estimators_do_not_need_the_link() {
    // same sweep, same estimator code, a different and unannounced link
    let mut exp = gmm_experiment();
    exp.trials = 20;
    for (kind, sigma) in [(LinkKind::Cubic, 0.1), (LinkKind::Linear, 0.1)] {
        exp.link = LinkSpec::new(kind, sigma).unwrap();
        let outcome = cmd_sweep(&exp, None).unwrap();
        for method in Estimator::ALL {
            let best = outcome.best(method, exp.m_list[0]).unwrap();
            assert!(
                best.median_cosine > 0.9,
                "{kind:?} {method:?} {}",
                best.median_cosine
            );
        }
    }
}

#[test]
fn composed_error_shrinks_under_refinement() {
    let s = NoiseSchedule::default();
    let prior = GmmPriorPredictor::orthonormal_modes(s, 6, 3, 0.2, 3)
        .unwrap()
        .into();
    for t in [0.3, 0.8] {
        for k in [1, 2] {
            let curve = theorem1_curve(&prior, &[8, 16, 32, 64, 128], t, k, k, 9).unwrap();
            let errors: Vec<f64> = curve.points.iter().map(|p| p.error).collect();
            let rises = errors.windows(2).filter(|w| w[1] > w[0]).count();
            assert!(rises <= 1, "t={t} k={k} {errors:?}");
        }
    }
}
