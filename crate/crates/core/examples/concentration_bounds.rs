//! Monte Carlo checks of the Gaussian max bound and the back-projection rate.
//!
//!     cargo run --release --example concentration_bounds

use simdm::analysis::{verify_lemma1, verify_lemma2};
use simdm::measurements::{estimate_mu, LinkKind, LinkSpec};

fn main() -> simdm::Result<()> {
    let r = verify_lemma1(1000, 3.0, 200, 1)?;
    println!(
        "{}: {}/{} (median {:.3})",
        r.inequality, r.successes, r.trials, r.observed.median
    );

    for kind in [LinkKind::Sign, LinkKind::Cubic, LinkKind::Linear] {
        let link = LinkSpec::new(kind, 0.1)?;
        println!(
            "\n{} link, mu ~ {:.4}",
            kind.name(),
            estimate_mu(&link, 1_000_000, 3)?
        );
        let rep = verify_lemma2(64, &[256, 1024, 4096, 16384], link, 10.0, 50, 5)?;
        for row in &rep.rows {
            println!(
                "  m={:<6} median err {:.4e}  bound {:.4e}  held {:.0}%",
                row.m,
                row.report.observed.median,
                row.report.bound,
                100.0 * row.report.success_rate()
            );
        }
        println!("  slope {:.3}", rep.slope);
    }
    Ok(())
}
