//! Periodic solutions of λ' + λ² = a² f and the curve a ↦ Λ(a), together
//! with the ν identity for μ = λ/a at one value of h.

use pinchlab::quadrature::log_space;
use pinchlab::riccati::{
    dmu_dh, finite_difference_dg, lambda_curve, solve_periodic, ScalarForcing, SolverOptions,
};
use pinchlab::signals::PeriodicProfile;

fn main() -> pinchlab::Result<()> {
    let f = ScalarForcing::new(PeriodicProfile::trig(1.0, vec![0.3], vec![0.5])?);
    let opts = SolverOptions::default();
    let sol = solve_periodic(&f, 2.0, &opts)?;
    println!(
        "a = 2: λ(0) = {:.12}, Λ = {:.12}, Newton iterations {}, residual {:.1e}",
        sol.initial, sol.integral, sol.iterations, sol.residual
    );
    let curve = lambda_curve(&f, &log_space(0.05, 20.0, 12), &opts, 1e-8)?;
    for p in &curve.points {
        println!(
            "a = {:>9.5}  Λ = {:>12.8}  Λ/a = {:.10}",
            p.a, p.lambda, p.lambda_over_a
        );
    }
    println!("monotonicity checks pass: {}", curve.pass());
    let nu = dmu_dh(&f, 1.0, &opts)?;
    let fd = finite_difference_dg(&f, 1.0, &opts)?;
    println!(
        "∫ν at h = 1: formula {:.12}, finite difference {:.12}",
        nu.integral, fd
    );
    Ok(())
}
