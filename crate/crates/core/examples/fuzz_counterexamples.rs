//! Seeded searches for counterexamples: random profiles for the integral
//! inequality and random curvature fields for the bunching chain.

use pinchlab::inequality::{fuzz_inequality, FuzzConfig, Generator};
use pinchlab::matrix::{matrix_fuzz, MatrixOptions};
use pinchlab::quadrature::log_space;

fn main() -> pinchlab::Result<()> {
    let cfg = FuzzConfig::new(Generator::Mixed, 100, log_space(0.01, 100.0, 9), 42);
    let out = fuzz_inequality(&cfg)?;
    println!(
        "inequality: {} instances, {} evaluations, min gap {:.3e}, pass {}",
        out.instances, out.evaluations, out.min_gap, out.pass
    );
    println!(
        "  closest instance: N = {}, h = {}, ratio {:.8}",
        out.worst.n, out.worst.h, out.worst.ratio
    );
    let opts = MatrixOptions {
        steps: 2048,
        ..MatrixOptions::default()
    };
    let runs = matrix_fuzz(None, 10, 42, &opts, 5)?;
    let worst = runs
        .iter()
        .map(|(_, r)| r.bunching_ratio * r.a)
        .fold(0.0f64, f64::max);
    println!(
        "matrix: {} fields, all pass {}, largest ratio·a {:.6}",
        runs.len(),
        runs.iter().all(|(_, r)| r.pass),
        worst
    );
    Ok(())
}
