//! Periodic solution of the matrix Riccati equation U' + U² + K = 0 and the
//! bunching chain for a rotating curvature field.

use pinchlab::matrix::{bunching_check, solve_periodic_matrix, CurvatureField, MatrixOptions};

fn main() -> pinchlab::Result<()> {
    let opts = MatrixOptions::default();
    for (name, field) in [
        (
            "constant diag(1, 1/4)",
            CurvatureField::constant_diag(&[1.0, 0.25])?,
        ),
        (
            "rotating diag(1, 1/4)",
            CurvatureField::rotating(1.0, 0.25)?,
        ),
        ("crossing c = 0.8", CurvatureField::crossing(0.8)?),
    ] {
        let sol = solve_periodic_matrix(&field, &opts)?;
        let r = bunching_check(&field, &opts, 10)?;
        println!("{name}");
        println!(
            "  Möbius iterations {}, direct iterations {}, residual {:.1e}",
            sol.mobius_iterations, sol.iterations, sol.residual
        );
        println!(
            "  a = {:.6}, ∫λ- = {:.8}, ∫λ+ = {:.8}",
            r.a, r.int_lambda_minus, r.int_lambda_plus
        );
        println!(
            "  ratio {:.8} ≤ 1/a = {:.8}",
            r.bunching_ratio, r.one_over_a
        );
        println!(
            "  exponents {:.8} {:.8}, pass {}",
            r.lyap_minus, r.lyap_plus, r.pass
        );
    }
    Ok(())
}
