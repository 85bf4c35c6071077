//! Pinching constants of a conformal bump perturbation of the hyperbolic
//! metric, and the rate at which the exact constants approach the linearized
//! ones.

use pinchlab::pinching::{
    eps_sweep, pinching_constants, BumpFunction, BumpKind, ConformalPerturbation, PinchingMethod,
};

fn main() -> pinchlab::Result<()> {
    let chi = BumpFunction::new(BumpKind::Odd);
    println!("max χ'' = {:.12}, min χ'' = {:.12}", chi.max_dd, chi.min_dd);
    for eps in [1e-2, 1e-3, 1e-4] {
        let pert = ConformalPerturbation::new(eps, 0.25, 1.0, chi.clone())?;
        let exact = pinching_constants(&pert, PinchingMethod::Exact, 4096)?;
        let lead = pinching_constants(&pert, PinchingMethod::Leading, 4096)?;
        println!(
            "ε = {eps:e}: exact a1 = {:.8}, a2 = {:.8}, ratio {:.6}; linearized ratio {:.6}",
            exact.a1, exact.a2, exact.ratio, lead.ratio
        );
    }
    let sweep = eps_sweep(&[1e-2, 1e-3, 1e-4], 0.25, 1.0, &chi, 4096)?;
    println!(
        "deviation slope {:.4} (expected {})",
        sweep.slope, sweep.expected_slope
    );
    Ok(())
}
