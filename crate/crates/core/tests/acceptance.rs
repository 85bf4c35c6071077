//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::process::Command;
use std::time::{Duration, Instant};

use pinchlab::ghk::{ghk_row, solve_matching};
use pinchlab::inequality::{
    closed_form_rhs, fuzz_inequality, gap_report, generate_instance, lhs_value,
    rhs_double_integral, FuzzConfig, Generator, Method, Resolution,
};
use pinchlab::matrix::{bunching_check, matrix_fuzz, CurvatureField, MatrixOptions};
use pinchlab::pinching::{
    eps_sweep, pinching_constants, BumpFunction, ConformalPerturbation, PinchingMethod,
};
use pinchlab::quadrature::log_space;
use pinchlab::riccati::{
    capital_lambda, dmu_dh, finite_difference_dg, lambda_curve, ScalarForcing, SolverOptions,
};
use pinchlab::signals::{PeriodicProfile, StepProfile};

/// Name, optional runtime budget, check.
type Criterion = (&'static str, Option<Duration>, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    match budget {
        Some(b) => verdict(
            v.pass && elapsed < b,
            format!("{}; {:.2?} (budget {:?})", v.detail, elapsed, b),
        ),
        None => verdict(v.pass, format!("{}; {:.2?}", v.detail, elapsed)),
    }
}

fn equality_case() -> Verdict {
    let mu = PeriodicProfile::constant(1.0).unwrap();
    let res = Resolution::default();
    let mut worst = 0.0f64;
    for h in [0.01, 1.0, 100.0] {
        let r = gap_report(&mu, h, Method::Quadrature, &res).unwrap();
        worst = worst.max((r.rhs - r.lhs).abs());
    }
    verdict(worst <= 1e-12, format!("max |rhs - lhs| = {worst:.2e}"))
}

fn property_suite() -> Verdict {
    let cfg = FuzzConfig::new(Generator::Mixed, 1000, log_space(0.01, 100.0, 17), 2024);
    let out = fuzz_inequality(&cfg).unwrap();
    verdict(
        out.min_gap >= -1e-9 && out.instances == 1000 && out.evaluations == 17_000,
        format!(
            "{} evaluations, min gap {:.3e}",
            out.evaluations, out.min_gap
        ),
    )
}

fn closed_form_oracle() -> Verdict {
    let res = Resolution::default();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let profile = generate_instance(Generator::WellDistributedStep, 11, i).unwrap();
        let step = StepProfile::from_profile(&profile).unwrap();
        assert!(step.is_well_distributed());
        for h in [0.1, 1.0, 10.0] {
            let cf = closed_form_rhs(&step, h).unwrap().rhs;
            let quad = rhs_double_integral(&profile, h, &res).unwrap().value;
            worst = worst.max((cf - quad).abs());
        }
    }
    verdict(
        worst <= 1e-7,
        format!("max |closed form - quadrature| = {worst:.2e}"),
    )
}

fn ratio_asymptotics() -> Verdict {
    let res = Resolution::default();
    let mut profiles = vec![StepProfile::new(vec![2.0, 2.0 / 3.0], vec![0.25, 0.75]).unwrap()];
    for i in 0..10 {
        let p = generate_instance(Generator::WellDistributedStep, 5, i).unwrap();
        profiles.push(StepProfile::from_profile(&p).unwrap());
    }
    let mut worst_small = 0.0f64;
    let mut worst_large = 0.0f64;
    for step in &profiles {
        let c = step.values();
        let n = c.len();
        let predicted: f64 = (0..n).map(|k| c[k] / c[(k + 1) % n]).sum::<f64>() - n as f64;
        let mu = step.to_profile();
        let ratio =
            |h: f64| rhs_double_integral(&mu, h, &res).unwrap().value / lhs_value(h).unwrap();
        let h = 1e-3;
        let measured = (ratio(h) - 1.0) / h;
        if predicted > 0.0 {
            worst_small = worst_small.max((measured / predicted - 1.0).abs());
        } else {
            worst_small = worst_small.max(measured.abs());
        }
        let mean_square: f64 = c.iter().zip(step.lengths()).map(|(v, e)| v * v * e).sum();
        worst_large = worst_large.max((ratio(1e3) / mean_square - 1.0).abs());
    }
    verdict(
        worst_small <= 0.01 && worst_large <= 1e-3,
        format!(
            "{} profiles, small-h slope rel. error {worst_small:.2e}, large-h rel. error {worst_large:.2e}",
            profiles.len()
        ),
    )
}

fn seeded_forcings() -> Vec<ScalarForcing> {
    (0..20)
        .map(|i| ScalarForcing::new(generate_instance(Generator::Mixed, 77, i).unwrap()))
        .collect()
}

fn energy_identity() -> Verdict {
    let opts = SolverOptions::default();
    let grid = log_space(0.05, 20.0, 32);
    let mut worst = 0.0f64;
    let mut count = 0;
    for f in seeded_forcings() {
        let curve = lambda_curve(&f, &grid, &opts, 1e-8).unwrap();
        for p in &curve.points {
            worst = worst.max(p.energy_error);
            count += 1;
        }
    }
    verdict(
        worst <= 1e-8,
        format!("{count} solutions, max |∫λ² - a²∫f| = {worst:.2e}"),
    )
}

fn lambda_monotonicity() -> Verdict {
    let opts = SolverOptions::default();
    let grid = log_space(0.05, 20.0, 32);
    let tol = 1e-8;
    let mut failures = 0;
    let mut sandwich = 0.0f64;
    for f in seeded_forcings() {
        let curve = lambda_curve(&f, &grid, &opts, tol).unwrap();
        if !curve.pass() {
            failures += 1;
        }
        let l1 = capital_lambda(&f, 1.0, &opts).unwrap();
        for p in curve.points.iter().filter(|p| p.a < 1.0) {
            sandwich = sandwich.max(p.lambda - l1).max(l1 - p.lambda / p.a);
        }
    }
    verdict(
        failures == 0 && sandwich <= tol,
        format!("{failures} curves with monotonicity or bound violations, sandwich excess {sandwich:.2e}"),
    )
}

fn nu_formula() -> Verdict {
    let opts = SolverOptions::default();
    let forcings = [
        PeriodicProfile::trig(1.0, vec![], vec![0.5]).unwrap(),
        PeriodicProfile::trig(1.0, vec![0.2, 0.1], vec![0.3, -0.2]).unwrap(),
        PeriodicProfile::step(vec![2.0, 2.0 / 3.0], vec![0.25, 0.75]).unwrap(),
    ];
    let mut min_nu = f64::INFINITY;
    let mut worst_rel = 0.0f64;
    for f in forcings {
        let f = ScalarForcing::new(f);
        for h in [0.2, 1.0, 5.0] {
            let nu = dmu_dh(&f, h, &opts).unwrap().integral;
            let fd = finite_difference_dg(&f, h, &opts).unwrap();
            min_nu = min_nu.min(nu);
            worst_rel = worst_rel.max((nu - fd).abs() / fd.abs());
        }
    }
    verdict(
        min_nu >= -1e-10 && worst_rel <= 1e-6,
        format!("min ∫ν = {min_nu:.3e}, max relative error vs finite difference {worst_rel:.2e}"),
    )
}

fn matrix_bunching() -> Verdict {
    let opts = MatrixOptions::default();
    let diag = CurvatureField::constant_diag(&[1.0, 0.25]).unwrap();
    let r = bunching_check(&diag, &opts, 10).unwrap();
    let saturation = (r.int_lambda_plus - r.int_lambda_minus / r.a).abs();
    let runs = matrix_fuzz(None, 100, 8, &opts, 10).unwrap();
    let mut bunching = f64::NEG_INFINITY;
    let mut sandwich = 0.0f64;
    let mut exponents = 0.0f64;
    for (_, r) in &runs {
        bunching = bunching.max(r.bunching_ratio - r.one_over_a);
        sandwich = sandwich.max(r.sandwich_violation);
        exponents = exponents.max(r.exponent_bracket_violation);
    }
    verdict(
        saturation <= 1e-10 && bunching <= 1e-6 && sandwich <= 1e-7 && exponents <= 1e-6,
        format!(
            "saturation error {saturation:.2e}; {} fields, max(ratio - 1/a) {bunching:.3e}, sandwich {sandwich:.2e}, exponent excess {exponents:.2e}",
            runs.len()
        ),
    )
}

fn ghk_reproduction() -> Verdict {
    let (a1, eps) = (50.0, 0.05);
    let row = ghk_row(a1, eps).unwrap();
    let inst = solve_matching(a1, eps).unwrap();
    let within = |x: f64| x >= eps / 1.25 && x <= eps * 1.25;
    let shape = within(inst.t1) && within(inst.t0 - a1 / 2.0);
    let factor = row.pointwise_ratio_at_t / row.two_eps_sq;
    let ratios = (0.5..=2.0).contains(&factor)
        && row.pointwise_ratio_at_t < row.a1_over_a2
        && row.avg_ratio >= 0.5 * row.a1_over_a2;
    let mut solver_gap = 0.0f64;
    for a in [a1, a1 / eps] {
        let inst = solve_matching(a, eps).unwrap();
        let sol = pinchlab::riccati::solve_periodic(
            &ScalarForcing::new(inst.forcing()),
            a,
            &SolverOptions::default(),
        )
        .unwrap();
        for (i, v) in sol.values.iter().enumerate().step_by(64) {
            solver_gap = solver_gap.max((v - inst.value(i as f64 * sol.step)).abs());
        }
    }
    verdict(
        row.max_residual <= 1e-12 && shape && ratios && solver_gap <= 1e-8,
        format!(
            "residual {:.1e}, t1/ε {:.4}, (t0 - a/2)/ε {:.4}, pointwise/2ε² {factor:.4}, avg/(a1/a2) {:.4}, solver gap {solver_gap:.1e}",
            row.max_residual,
            inst.t1 / eps,
            (inst.t0 - a1 / 2.0) / eps,
            row.avg_ratio / row.a1_over_a2
        ),
    )
}

fn pinching_example() -> Verdict {
    let chi = BumpFunction::symmetric();
    let (alpha, r0, points) = (0.25, 1.0, 4096);
    let pert = ConformalPerturbation::new(1e-3, alpha, r0, chi.clone()).unwrap();
    let lead = pinching_constants(&pert, PinchingMethod::Leading, points).unwrap();
    let exact = pinching_constants(&pert, PinchingMethod::Exact, points).unwrap();
    let leading_ratio = (1.0 - lead.a2) / (1.0 - lead.a1);
    let sweep = eps_sweep(&[1e-2, 1e-3, 1e-4], alpha, r0, &chi, points).unwrap();
    verdict(
        (leading_ratio - 2.0).abs() <= 1e-3
            && exact.ratio >= 1.5
            && (sweep.slope - (1.0 - alpha)).abs() <= 0.1,
        format!(
            "leading ratio {leading_ratio:.6}, exact ratio {:.4}, deviation slope {:.4} vs {}",
            exact.ratio,
            sweep.slope,
            1.0 - alpha
        ),
    )
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 3] = [
        &[
            "inequality",
            "fuzz",
            "--count",
            "50",
            "--seed",
            "9",
            "--format",
            "json",
        ],
        &[
            "matrix", "fuzz", "--count", "3", "--seed", "9", "--steps", "1024",
        ],
        &["pinching", "--sweep-eps", "1e-2,1e-3", "--format", "json"],
    ];
    let run = |args: &[&str], workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_pinchlab"))
            .args(args)
            .args(["--workers", workers])
            .output()
            .unwrap()
            .stdout
    };
    let identical = runs
        .iter()
        .filter(|args| {
            let first = run(args, "1");
            !first.is_empty() && first == run(args, "4")
        })
        .count();
    verdict(
        identical == runs.len(),
        format!("{identical}/{} commands byte-identical", runs.len()),
    )
}

#[test]
fn acceptance() {
    println!();
    let criteria: Vec<Criterion> = vec![
        ("equality case", Some(Duration::from_secs(1)), equality_case),
        (
            "inequality property suite",
            Some(Duration::from_secs(120)),
            property_suite,
        ),
        ("closed-form oracle", None, closed_form_oracle),
        ("ratio asymptotics", None, ratio_asymptotics),
        ("energy identity", None, energy_identity),
        (
            "lambda monotonicity",
            Some(Duration::from_secs(60)),
            lambda_monotonicity,
        ),
        ("nu formula", None, nu_formula),
        (
            "matrix bunching",
            Some(Duration::from_secs(300)),
            matrix_bunching,
        ),
        ("two-level step forcing", None, ghk_reproduction),
        ("conformal pinching", None, pinching_example),
        ("determinism", None, determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let v = timed(budget, check);
        println!(
            "{} criterion {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
