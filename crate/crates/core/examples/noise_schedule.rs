//! VP schedule table and the intermediate time t* for a few (C_s, m).
//!
//!     cargo run --example noise_schedule

use simdm::schedule::{NoiseSchedule, Spacing, TimeGrid};

fn main() -> simdm::Result<()> {
    let s = NoiseSchedule::default();
    println!(
        "{:>6} {:>12} {:>12} {:>10}",
        "t", "alpha", "sigma", "lambda"
    );
    for t in [s.eps, 0.05, 0.1, 0.25, 0.5, 0.75, s.t_end] {
        let (a, sg) = s.alpha_sigma(t)?;
        println!("{t:>6} {a:>12.6e} {sg:>12.6e} {:>10.4}", s.lambda(t)?);
    }

    println!("\nt* where sigma/alpha = C_s / sqrt(m):");
    for c_s in [0.5, 2.0, 8.0] {
        let row: Vec<String> = [16, 256, 4096, 65536]
            .iter()
            .map(|&m| format!("m={m}: {:.5}", s.solve_t_star(c_s, m).unwrap()))
            .collect();
        println!("  C_s={c_s:<4} {}", row.join("  "));
    }

    for spacing in [Spacing::UniformT, Spacing::UniformLambda] {
        let g = TimeGrid::new(&s, 20, spacing)?;
        println!(
            "\n{spacing:?}, N=20: h_max {:.4}, first times {:.4?}",
            g.h_max(),
            &g.times()[..4]
        );
    }
    Ok(())
}
