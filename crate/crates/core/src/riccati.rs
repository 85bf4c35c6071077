//! The scalar periodic Riccati equation `λ' + λ² = a² f`.
//!
//! For a positive 1-periodic forcing `f` there is exactly one positive periodic
//! solution `λ_a`. It is the fixed point of the period map `P`, which is
//! increasing and contracting on positive data with `P'(x) = exp(-2∫₀¹λ)`.
//! [`solve_periodic`] starts above every periodic solution, at `a·√max f`, and
//! takes Newton steps on `P(x) - x`; concavity of `P` keeps the iterates
//! decreasing toward the fixed point.
//!
//! Smooth forcings are integrated with classical RK4 on the augmented state
//! `(λ, ∫λ, ∫λ²)`. Piecewise-constant forcings use the exact flow of each
//! constant piece.
//!
//! With `h = 1/a` and `μ_h = h λ_{1/h}` (so `h μ' + μ² = f`), [`dmu_dh`] evaluates
//! the closed formula for `ν = ∂_h μ_h`, whose average is `g'(h)` for
//! `g(h) = ∫μ_h = Λ(1/h)/ (1/h)`. Non-negativity of `∫ν` is what makes
//! `Λ(a)/a` non-increasing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::ghk::{segment_flow_unchecked, segment_integral_unchecked};
use crate::inequality::{self, InequalityGapReport, Method, Resolution};
use crate::signals::PeriodicProfile;

/// A positive periodic forcing with cached extrema.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarForcing {
    f: PeriodicProfile,
    f_min: f64,
    f_max: f64,
}

impl ScalarForcing {
    pub fn new(f: PeriodicProfile) -> Self {
        let (f_min, f_max) = (f.min_value(), f.max_value());
        Self { f, f_min, f_max }
    }

    pub fn profile(&self) -> &PeriodicProfile {
        &self.f
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn mean(&self) -> f64 {
        self.f.mean()
    }
}

impl From<PeriodicProfile> for ScalarForcing {
    fn from(f: PeriodicProfile) -> Self {
        Self::new(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Integration steps per period; also the size of the dense output grid.
    pub steps: usize,
    /// Target for `|P(λ₀) - λ₀|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            steps: 8192,
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// The positive periodic solution on a uniform grid `t_i = i / steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub a: f64,
    pub initial: f64,
    /// `λ(t_i)` for `i = 0..steps` (the period endpoint is omitted).
    pub values: Vec<f64>,
    /// `∫₀^{t_i} λ` for `i = 0..=steps`.
    pub cumulative: Vec<f64>,
    /// `Λ(a) = ∫₀¹ λ`.
    pub integral: f64,
    /// `∫₀¹ λ²`.
    pub square_integral: f64,
    /// `|P(λ₀) - λ₀|` for the returned initial value.
    pub residual: f64,
    pub iterations: usize,
    pub step: f64,
}

impl PeriodicSolution {
    /// `|∫λ² - a²∫f|`.
    pub fn energy_error(&self, forcing: &ScalarForcing) -> f64 {
        (self.square_integral - self.a * self.a * forcing.mean()).abs()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest excursion outside `[a√f_min, a√f_max]`; zero when contained.
    pub fn bracket_violation(&self, forcing: &ScalarForcing) -> f64 {
        let lo = self.a * forcing.f_min.sqrt();
        let hi = self.a * forcing.f_max.sqrt();
        (lo - self.min_value()).max(self.max_value() - hi).max(0.0)
    }

    /// Linear interpolation of the dense output at `t` (mod 1).
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = t.rem_euclid(1.0) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let frac = x - i as f64;
        self.values[i] + (self.values[(i + 1) % n] - self.values[i]) * frac
    }
}

struct Trajectory {
    end: f64,
    integral: f64,
    square_integral: f64,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(param("a", format!("must be positive and finite, got {a}")))
    }
}

/// Neumaier compensated running sum.
#[derive(Clone, Copy, Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        self.carry += if self.total.abs() >= x.abs() {
            (self.total - t) + x
        } else {
            (x - t) + self.total
        };
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

/// One period of `λ' = a² f - λ²` from `x0`.
fn integrate_period(
    forcing: &ScalarForcing,
    a: f64,
    x0: f64,
    steps: usize,
    record: bool,
) -> Result<Trajectory> {
    let a2 = a * a;
    let dt = 1.0 / steps as f64;
    let mut values = Vec::with_capacity(if record { steps } else { 0 });
    let mut cumulative = Vec::with_capacity(if record { steps + 1 } else { 0 });
    let (mut x, mut int1, mut int2) = (x0, Sum::default(), Sum::default());
    let f = &forcing.f;

    let lost = |t: f64, x: f64| Error::PositivityLost {
        t,
        detail: format!("λ = {x} for a = {a}"),
    };

    if let Some(bps) = f.breakpoints() {
        let bps: Vec<f64> = bps.iter().copied().chain(std::iter::once(1.0)).collect();
        let mut next_bp = 0;
        for i in 0..steps {
            if record {
                values.push(x);
                cumulative.push(int1.value());
            }
            let t0 = i as f64 * dt;
            let t1 = if i + 1 == steps {
                1.0
            } else {
                (i + 1) as f64 * dt
            };
            let mut t = t0;
            while t < t1 {
                while bps[next_bp] <= t {
                    next_bp += 1;
                }
                let end = t1.min(bps[next_bp]);
                let k = a2 * f.evaluate(t);
                let d = end - t;
                let y = segment_flow_unchecked(x, k, d);
                int1.add(segment_integral_unchecked(x, k, d));
                int2.add(k * d - (y - x));
                x = y;
                t = end;
            }
            if !(x > 0.0) || !x.is_finite() {
                return Err(lost(t1, x));
            }
        }
    } else {
        let rhs = |t: f64, y: f64| a2 * f.evaluate(t) - y * y;
        for i in 0..steps {
            if record {
                values.push(x);
                cumulative.push(int1.value());
            }
            let t = i as f64 * dt;
            let k1 = rhs(t, x);
            let y2 = x + 0.5 * dt * k1;
            let k2 = rhs(t + 0.5 * dt, y2);
            let y3 = x + 0.5 * dt * k2;
            let k3 = rhs(t + 0.5 * dt, y3);
            let y4 = x + dt * k3;
            let k4 = rhs(t + dt, y4);
            int1.add(dt / 6.0 * (x + 2.0 * y2 + 2.0 * y3 + y4));
            int2.add(dt / 6.0 * (x * x + 2.0 * y2 * y2 + 2.0 * y3 * y3 + y4 * y4));
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !(x > 0.0) || !x.is_finite() {
                return Err(lost(t + dt, x));
            }
        }
    }
    if record {
        cumulative.push(int1.value());
    }
    Ok(Trajectory {
        end: x,
        integral: int1.value(),
        square_integral: int2.value(),
        values,
        cumulative,
    })
}

/// Image of `x0` under the period map and the map's derivative there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareStep {
    pub image: f64,
    pub derivative: f64,
}

pub fn poincare_map(
    forcing: &ScalarForcing,
    a: f64,
    x0: f64,
    opts: &SolverOptions,
) -> Result<PoincareStep> {
    check_a(a)?;
    let tr = integrate_period(forcing, a, x0, opts.steps, false)?;
    Ok(PoincareStep {
        image: tr.end,
        derivative: (-2.0 * tr.integral).exp(),
    })
}

/// The unique positive periodic solution of `λ' + λ² = a² f`.
pub fn solve_periodic(
    forcing: &ScalarForcing,
    a: f64,
    opts: &SolverOptions,
) -> Result<PeriodicSolution> {
    check_a(a)?;
    if opts.steps < 2 {
        return Err(param("steps", "need at least two steps per period"));
    }
    let mut x = a * forcing.f_max.sqrt();
    let mut residual = f64::INFINITY;
    for iteration in 0..opts.max_iter {
        let tr = integrate_period(forcing, a, x, opts.steps, false)?;
        residual = (tr.end - x).abs();
        if residual < opts.tol.max(1e-14 * x) {
            let tr = integrate_period(forcing, a, x, opts.steps, true)?;
            return Ok(PeriodicSolution {
                a,
                initial: x,
                values: tr.values,
                cumulative: tr.cumulative,
                integral: tr.integral,
                square_integral: tr.square_integral,
                residual,
                iterations: iteration + 1,
                step: 1.0 / opts.steps as f64,
            });
        }
        let slope = (-2.0 * tr.integral).exp();
        let newton = x - (tr.end - x) / (slope - 1.0);
        x = if newton > 0.0 && newton.is_finite() {
            newton
        } else {
            tr.end
        };
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual,
    })
}

/// `Λ(a) = ∫₀¹ λ_a`.
pub fn capital_lambda(forcing: &ScalarForcing, a: f64, opts: &SolverOptions) -> Result<f64> {
    Ok(solve_periodic(forcing, a, opts)?.integral)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub a: f64,
    pub lambda: f64,
    pub lambda_over_a: f64,
    pub residual: f64,
    pub energy_error: f64,
    pub iterations: usize,
}

/// An adjacent pair `(index, index + 1)` breaking a monotonicity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub points: Vec<LambdaPoint>,
    /// Pairs where `Λ` fails to increase.
    pub increasing_violations: Vec<Violation>,
    /// Pairs where `Λ/a` increases by more than the tolerance.
    pub ratio_violations: Vec<Violation>,
    /// Points where `Λ(a) > a √∫f`.
    pub cauchy_schwarz_violations: Vec<Violation>,
    pub tolerance: f64,
}

impl LambdaCurve {
    pub fn pass(&self) -> bool {
        self.increasing_violations.is_empty()
            && self.ratio_violations.is_empty()
            && self.cauchy_schwarz_violations.is_empty()
    }
}

/// `Λ` and `Λ/a` over an increasing grid of `a`, with both monotonicity checks.
pub fn lambda_curve(
    forcing: &ScalarForcing,
    a_grid: &[f64],
    opts: &SolverOptions,
    tolerance: f64,
) -> Result<LambdaCurve> {
    if a_grid.is_empty() || a_grid.windows(2).any(|w| !(w[0] < w[1])) || a_grid[0] <= 0.0 {
        return Err(param(
            "a_grid",
            "must be non-empty, positive and strictly increasing",
        ));
    }
    let points: Vec<LambdaPoint> = a_grid
        .par_iter()
        .map(|&a| {
            let sol = solve_periodic(forcing, a, opts)?;
            Ok(LambdaPoint {
                a,
                lambda: sol.integral,
                lambda_over_a: sol.integral / a,
                residual: sol.residual,
                energy_error: sol.energy_error(forcing),
                iterations: sol.iterations,
            })
        })
        .collect::<Result<_>>()?;

    let mut increasing_violations = Vec::new();
    let mut ratio_violations = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        if w[1].lambda <= w[0].lambda - tolerance {
            increasing_violations.push(Violation {
                index: i,
                magnitude: w[0].lambda - w[1].lambda,
            });
        }
        if w[1].lambda_over_a > w[0].lambda_over_a + tolerance {
            ratio_violations.push(Violation {
                index: i,
                magnitude: w[1].lambda_over_a - w[0].lambda_over_a,
            });
        }
    }
    let bound = forcing.mean().sqrt();
    let cauchy_schwarz_violations = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.lambda_over_a > bound + tolerance)
        .map(|(i, p)| Violation {
            index: i,
            magnitude: p.lambda_over_a - bound,
        })
        .collect();
    Ok(LambdaCurve {
        points,
        increasing_violations,
        ratio_violations,
        cauchy_schwarz_violations,
        tolerance,
    })
}

/// `ν = ∂_h μ_h` on the solution grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuProfile {
    pub h: f64,
    pub nu: Vec<f64>,
    /// `∫₀¹ ν`.
    pub integral: f64,
    /// `g(h) = ∫₀¹ μ_h`.
    pub mu_integral: f64,
    /// Constant fixed by periodicity of `ν`.
    pub periodicity_constant: f64,
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(param("h", format!("must be positive and finite, got {h}")))
    }
}

/// Closed formula for `ν = ∂_h μ_h`:
///
/// ```text
/// h ν(t) = C e^{-(2/h) M(t)} - μ(t) + (2/h) ∫₀ᵗ μ(τ)² e^{-(2/h)(M(t) - M(τ))} dτ
/// ```
///
/// with `M(t) = ∫₀ᵗ μ` and `C` fixed by periodicity. The inner integral is
/// propagated step by step with an endpoint-corrected trapezoid rule (fourth
/// order), using `μ' = (f - μ²)/h` for the derivative terms.
pub fn dmu_dh(forcing: &ScalarForcing, h: f64, opts: &SolverOptions) -> Result<NuProfile> {
    check_h(h)?;
    let sol = solve_periodic(forcing, 1.0 / h, opts)?;
    Ok(nu_from_solution(forcing, h, &sol))
}

fn nu_from_solution(forcing: &ScalarForcing, h: f64, sol: &PeriodicSolution) -> NuProfile {
    let n = sol.values.len();
    let dt = sol.step;
    let rate = 2.0 / h;
    let f = forcing.profile();
    let mu = |i: usize| h * sol.values[i % n];
    let big_m = |i: usize| h * sol.cumulative[i];

    let mut e = vec![0.0; n + 1];
    for i in 0..n {
        let decay = (-rate * (big_m(i + 1) - big_m(i))).exp();
        let (ma, mb) = (mu(i), mu(i + 1));
        let t_a = i as f64 * dt;
        let t_b = (i + 1) as f64 * dt;
        let dma = (f.evaluate(t_a) - ma * ma) / h;
        let dmb = (f.evaluate_left(t_b) - mb * mb) / h;
        let ga = ma * ma * decay;
        let gb = mb * mb;
        let dga = (2.0 * ma * dma + rate * ma.powi(3)) * decay;
        let dgb = 2.0 * mb * dmb + rate * mb.powi(3);
        let step = 0.5 * dt * (ga + gb) + dt * dt / 12.0 * (dga - dgb);
        e[i + 1] = decay * e[i] + rate * step;
    }
    let total = big_m(n);
    let c = e[n] / -(-rate * total).exp_m1();
    let nu: Vec<f64> = (0..n)
        .map(|i| (c * (-rate * big_m(i)).exp() - mu(i) + e[i]) / h)
        .collect();
    let integral = nu.iter().sum::<f64>() / n as f64;
    NuProfile {
        h,
        nu,
        integral,
        mu_integral: h * sol.integral,
        periodicity_constant: c,
    }
}

/// `g(h) = ∫₀¹ μ_h = h Λ(1/h)`.
pub fn mu_integral(forcing: &ScalarForcing, h: f64, opts: &SolverOptions) -> Result<f64> {
    check_h(h)?;
    Ok(h * capital_lambda(forcing, 1.0 / h, opts)?)
}

/// Five-point centered difference of `g` with `δ = 1e-2 h`, each value solved
/// to the round-off floor.
pub fn finite_difference_dg(forcing: &ScalarForcing, h: f64, opts: &SolverOptions) -> Result<f64> {
    check_h(h)?;
    let tight = SolverOptions {
        tol: 0.0,
        max_iter: opts.max_iter.max(200),
        ..*opts
    };
    let delta = 1e-2 * h;
    let g = |k: f64| mu_integral(forcing, h + k * delta, &tight);
    Ok((g(-2.0)? - 8.0 * g(-1.0)? + 8.0 * g(1.0)? - g(2.0)?) / (12.0 * delta))
}

/// The inequality instance obtained from `μ_h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub h: f64,
    /// Parameter at which the normalized profile is tested, `h / (2 ∫μ_h)`.
    pub h_rescaled: f64,
    pub mu_mean: f64,
    pub gap: InequalityGapReport,
    /// `∫ν` from the closed formula.
    pub nu_integral: f64,
    /// `∫ν` implied by the gap: `2 m² gap / (h² (1 - e^{-1/h̃}))`.
    pub nu_from_gap: f64,
}

/// Normalizes `μ_h` to average one and evaluates both sides of the inequality
/// at `h̃ = h / (2∫μ_h)`. The gap is a positive multiple of `∫ν`.
pub fn reduction_to_inequality(
    forcing: &ScalarForcing,
    h: f64,
    opts: &SolverOptions,
    res: &Resolution,
) -> Result<ReductionReport> {
    check_h(h)?;
    let sol = solve_periodic(forcing, 1.0 / h, opts)?;
    let nu = nu_from_solution(forcing, h, &sol);
    let samples: Vec<f64> = sol.values.iter().map(|v| h * v).collect();
    let mu_mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let normalized = PeriodicProfile::grid(samples.iter().map(|v| v / mu_mean).collect())?;
    let h_rescaled = h / (2.0 * mu_mean);
    let mut gap = inequality::gap_report(&normalized, h_rescaled, Method::Quadrature, res)?;
    gap.profile_id = format!("mu_h(h={h})");
    let nu_from_gap = 2.0 * mu_mean * mu_mean * gap.gap / (h * h * -(-1.0 / h_rescaled).exp_m1());
    Ok(ReductionReport {
        h,
        h_rescaled,
        mu_mean,
        gap,
        nu_integral: nu.integral,
        nu_from_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine() -> ScalarForcing {
        PeriodicProfile::trig(1.0, vec![], vec![0.5])
            .unwrap()
            .into()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    /// Plain RK4 from a fixed start over many periods, no Newton, no reuse of
    /// the solver's integrator.
    fn long_time_oracle(forcing: &ScalarForcing, a: f64, x0: f64, periods: usize) -> (f64, f64) {
        let n = 4096;
        let dt = 1.0 / n as f64;
        let mut x = x0;
        let rhs = |t: f64, y: f64| a * a * forcing.profile().evaluate(t) - y * y;
        let mut last_integral = 0.0;
        for p in 0..periods {
            let mut integral = 0.0;
            for i in 0..n {
                let t = i as f64 * dt;
                let k1 = rhs(t, x);
                let k2 = rhs(t + dt / 2.0, x + dt / 2.0 * k1);
                let k3 = rhs(t + dt / 2.0, x + dt / 2.0 * k2);
                let k4 = rhs(t + dt, x + dt * k3);
                let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                integral += dt / 2.0 * (x + next);
                x = next;
            }
            if p + 1 == periods {
                last_integral = integral;
            }
        }
        (x, last_integral)
    }

    #[test]
    fn constant_forcing_gives_constant_solution() {
        let f: ScalarForcing = PeriodicProfile::constant(1.0).unwrap().into();
        let sol = solve_periodic(&f, 0.5, &opts()).unwrap();
        assert!(sol.values.iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!((sol.integral - 0.5).abs() < 1e-14);
        let f: ScalarForcing = PeriodicProfile::trig(2.0, vec![], vec![]).unwrap().into();
        let l = capital_lambda(&f, 3.0, &opts()).unwrap();
        assert!((l - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sine_forcing_matches_long_time_integration() {
        let f = sine();
        let sol = solve_periodic(&f, 1.0, &opts()).unwrap();
        let (x, integral) = long_time_oracle(&f, 1.0, 2.0, 50);
        assert!((sol.initial - x).abs() < 1e-10);
        assert!((sol.integral - integral).abs() < 1e-7);
        assert!(sol.energy_error(&f) < 1e-8);
        assert!(sol.residual < 1e-12);
        assert!(sol.integral < 1.0);
        assert!(sol.bracket_violation(&f) == 0.0);
        assert!(sol.min_value() > 0.0);
    }

    #[test]
    fn step_forcing_uses_exact_flow() {
        // constant pieces 1 and 1/4: compare against the RK4 path on a smoothed grid
        let f: ScalarForcing = PeriodicProfile::step(vec![1.0, 0.25], vec![0.5, 0.5])
            .unwrap()
            .into();
        let sol = solve_periodic(&f, 2.0, &opts()).unwrap();
        assert!(sol.residual < 1e-12);
        assert!(sol.energy_error(&f) < 1e-12);
        // exact piece maps: x(1/2) from x0 then back to x0
        let k1 = 4.0;
        let k2 = 1.0;
        let mid = crate::ghk::segment_flow(sol.initial, k1, 0.5).unwrap();
        let end = crate::ghk::segment_flow(mid, k2, 0.5).unwrap();
        assert!((end - sol.initial).abs() < 1e-12);
        assert!((sol.value_at(0.5) - mid).abs() < 1e-12);
    }

    #[test]
    fn poincare_iterates_contract_geometrically() {
        let f = sine();
        let a = 0.7;
        let sol = solve_periodic(&f, a, &opts()).unwrap();
        let expected = (-2.0 * sol.integral).exp();
        let mut x = a * f.f_max().sqrt();
        let mut prev_gap = x - sol.initial;
        for _ in 0..5 {
            x = poincare_map(&f, a, x, &opts()).unwrap().image;
            let gap = x - sol.initial;
            assert!(gap > 0.0, "iterates stay above the fixed point");
            let factor = gap / prev_gap;
            assert!(factor < 1.0);
            prev_gap = gap;
            // contraction cannot beat exp(-2 a √f_min) nor be slower than exp(-2 Λ) by much
            assert!(factor <= (-2.0 * a * f.f_min().sqrt()).exp() + 1e-9);
            assert!(factor >= expected - 0.2);
        }
        let step = poincare_map(&f, a, sol.initial, &opts()).unwrap();
        assert!((step.derivative - expected).abs() < 1e-12);
    }

    #[test]
    fn comparison_monotonicity_in_a() {
        let f = sine();
        let lo = solve_periodic(&f, 0.8, &opts()).unwrap();
        let hi = solve_periodic(&f, 1.1, &opts()).unwrap();
        assert!(lo.values.iter().zip(&hi.values).all(|(x, y)| x <= y));
    }

    #[test]
    fn lambda_curve_constant_forcing() {
        let f: ScalarForcing = PeriodicProfile::constant(1.0).unwrap().into();
        let curve = lambda_curve(&f, &[0.25, 0.5, 1.0, 2.0], &opts(), 1e-8).unwrap();
        assert!(curve.pass());
        assert!(curve
            .points
            .iter()
            .all(|p| (p.lambda_over_a - 1.0).abs() < 1e-13));
        assert!(lambda_curve(&f, &[1.0, 0.5], &opts(), 1e-8).is_err());
    }

    #[test]
    fn good_bunching_sandwich() {
        let f = sine();
        let l1 = capital_lambda(&f, 1.0, &opts()).unwrap();
        for a in [0.1, 0.4, 0.9] {
            let la = capital_lambda(&f, a, &opts()).unwrap();
            assert!(la <= l1 && l1 <= la / a);
        }
    }

    #[test]
    fn nu_vanishes_for_constant_forcing() {
        let f: ScalarForcing = PeriodicProfile::constant(1.0).unwrap().into();
        let nu = dmu_dh(&f, 0.7, &opts()).unwrap();
        assert!(nu.nu.iter().all(|v| v.abs() < 1e-10));
        assert!(nu.integral.abs() < 1e-12);
    }

    #[test]
    fn nu_formula_matches_finite_difference() {
        let f = sine();
        for h in [1.0, 0.3] {
            let nu = dmu_dh(&f, h, &opts()).unwrap();
            let fd = finite_difference_dg(&f, h, &opts()).unwrap();
            assert!(nu.integral > 0.0);
            assert!(
                (nu.integral - fd).abs() / fd.abs() < 1e-6,
                "h={h}: {} vs {fd}",
                nu.integral
            );
        }
    }

    #[test]
    fn nu_pointwise_matches_difference_of_solutions() {
        // ν(t) ≈ (μ_{h+δ}(t) - μ_{h-δ}(t)) / 2δ at grid points
        let f = sine();
        let h = 0.5;
        let delta = 1e-4;
        let nu = dmu_dh(&f, h, &opts()).unwrap();
        let up = solve_periodic(&f, 1.0 / (h + delta), &opts()).unwrap();
        let down = solve_periodic(&f, 1.0 / (h - delta), &opts()).unwrap();
        for i in (0..8192).step_by(512) {
            let fd = ((h + delta) * up.values[i] - (h - delta) * down.values[i]) / (2.0 * delta);
            assert!((nu.nu[i] - fd).abs() < 1e-6, "i={i}");
        }
    }

    #[test]
    fn reduction_gap_is_a_multiple_of_nu() {
        let f = sine();
        let r = reduction_to_inequality(&f, 1.0, &opts(), &Resolution::default()).unwrap();
        assert!(r.gap.gap > 0.0);
        assert!((r.nu_from_gap - r.nu_integral).abs() / r.nu_integral < 1e-4);
        let flat: ScalarForcing = PeriodicProfile::constant(1.0).unwrap().into();
        let r = reduction_to_inequality(&flat, 1.0, &opts(), &Resolution::default()).unwrap();
        assert!(r.gap.gap.abs() < 1e-10);
    }

    #[test]
    fn invalid_parameters() {
        let f = sine();
        assert!(solve_periodic(&f, 0.0, &opts()).is_err());
        assert!(dmu_dh(&f, -1.0, &opts()).is_err());
        let starved = SolverOptions {
            max_iter: 1,
            ..opts()
        };
        assert!(matches!(
            solve_periodic(&f, 1.0, &starved),
            Err(Error::NotConverged { .. })
        ));
    }
}
