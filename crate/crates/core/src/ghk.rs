//! Closed-form periodic solutions for the two-level step forcing
//! `f = 1` on `[0, 1/2]`, `f = ε²` on `(1/2, 1)`.
//!
//! The periodic solution of `λ' + λ² = a² f` is
//!
//! ```text
//! λ(t) = a tanh(a t + t₀ - a/2)              for t ∈ [0, 1/2]
//! λ(t) = aε coth(aε (t - 1/2) + t₁)          for t ∈ [1/2, 1]
//! ```
//!
//! and continuity at `t = 1/2` and `t = 1` gives
//!
//! ```text
//! tanh(t₀)       = ε coth(t₁)
//! tanh(t₀ - a/2) = ε coth(t₁ + aε/2)
//! ```
//!
//! Comparing two parameters `a₁ < a₂ = a₁/ε` shows that the pointwise ratio
//! `λ_{a₁}/λ_{a₂}` can drop to about `2ε²` while the ratio of averages stays
//! of order `a₁/a₂`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::signals::PeriodicProfile;

/// `ln cosh x` without overflow.
pub(crate) fn log_cosh(x: f64) -> f64 {
    let y = x.abs();
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ln sinh x` for `x > 0` without overflow.
pub(crate) fn log_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

pub(crate) fn segment_flow_unchecked(x0: f64, k: f64, t: f64) -> f64 {
    let s = k.sqrt();
    let th = (s * t).tanh();
    s * (s * th + x0) / (s + x0 * th)
}

/// `∫₀ᵗ x` along the flow of `x' = k - x²` from `x0`.
pub(crate) fn segment_integral_unchecked(x0: f64, k: f64, t: f64) -> f64 {
    let s = k.sqrt();
    let st = s * t;
    let r = x0 / s;
    st + (0.5 * (1.0 - r) * (-2.0 * st).exp_m1()).ln_1p()
}

/// Exact flow of `x' = k - x²` for time `t`.
///
/// Written as the fractional-linear map
/// `x ↦ √k (√k tanh(√k t) + x) / (√k + x tanh(√k t))`, which covers the
/// tanh branch (`x < √k`), the coth branch (`x > √k`) and the equilibrium.
pub fn segment_flow(x0: f64, k: f64, t: f64) -> Result<f64> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(param("x0", format!("must be positive, got {x0}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(param("k", format!("must be positive, got {k}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(param("t", format!("must be non-negative, got {t}")));
    }
    Ok(segment_flow_unchecked(x0, k, t))
}

/// The step forcing `1` on `[0, 1/2]`, `ε²` on `(1/2, 1)`.
pub fn step_forcing(eps: f64) -> Result<PeriodicProfile> {
    check_eps(eps)?;
    PeriodicProfile::step(vec![1.0, eps * eps], vec![0.5, 0.5])
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(param("eps", format!("must lie in (0, 1), got {eps}")))
    }
}

/// Matched constants and the resulting periodic solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhkInstance {
    pub a: f64,
    pub eps: f64,
    pub t0: f64,
    pub t1: f64,
    /// Residuals of the two matching equations.
    pub residuals: [f64; 2],
    pub iterations: usize,
    /// Residual norm after each Newton step.
    pub trace: Vec<f64>,
}

impl GhkInstance {
    /// `λ_a(t)`, with `t` taken mod 1.
    pub fn value(&self, t: f64) -> f64 {
        let (a, e) = (self.a, self.eps);
        let t = t.rem_euclid(1.0);
        if t <= 0.5 {
            a * (a * t + self.t0 - 0.5 * a).tanh()
        } else {
            a * e / (a * e * (t - 0.5) + self.t1).tanh()
        }
    }

    /// `Λ(a) = ∫₀¹ λ_a` from the log-cosh and log-sinh antiderivatives.
    pub fn integral(&self) -> f64 {
        let (a, e) = (self.a, self.eps);
        let first = log_cosh(self.t0) - log_cosh(self.t0 - 0.5 * a);
        let second = log_sinh(self.t1 + 0.5 * a * e) - log_sinh(self.t1);
        first + second
    }

    /// `|P(λ(0)) - λ(0)|` with `P` composed from the exact segment flows.
    pub fn periodicity_residual(&self) -> f64 {
        let x0 = self.value(0.0);
        let a2 = self.a * self.a;
        let mid = segment_flow_unchecked(x0, a2, 0.5);
        let end = segment_flow_unchecked(mid, a2 * self.eps * self.eps, 0.5);
        (end - x0).abs()
    }

    pub fn forcing(&self) -> PeriodicProfile {
        PeriodicProfile::step(vec![1.0, self.eps * self.eps], vec![0.5, 0.5])
            .expect("valid step forcing")
    }
}

fn matching_residual(a: f64, eps: f64, u: f64, t1: f64) -> [f64; 2] {
    [
        (u + 0.5 * a).tanh() - eps / t1.tanh(),
        u.tanh() - eps / (t1 + 0.5 * a * eps).tanh(),
    ]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Positive fixed point of the period map, from the composed Möbius matrices.
fn fixed_point(a: f64, eps: f64) -> f64 {
    // x ↦ (x + s th) / (x th / s + 1), normalized by cosh
    let mobius = |s: f64, t: f64| {
        let th = (s * t).tanh();
        [[1.0, s * th], [th / s, 1.0]]
    };
    let m1 = mobius(a, 0.5);
    let m2 = mobius(a * eps, 0.5);
    let m = [
        [
            m2[0][0] * m1[0][0] + m2[0][1] * m1[1][0],
            m2[0][0] * m1[0][1] + m2[0][1] * m1[1][1],
        ],
        [
            m2[1][0] * m1[0][0] + m2[1][1] * m1[1][0],
            m2[1][0] * m1[0][1] + m2[1][1] * m1[1][1],
        ],
    ];
    let (aa, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let disc = ((aa - d) * (aa - d) + 4.0 * b * c).sqrt();
    if aa - d >= 0.0 {
        (aa - d + disc) / (2.0 * c)
    } else {
        2.0 * b / (d - aa + disc)
    }
}

fn newton(
    a: f64,
    eps: f64,
    mut u: f64,
    mut t1: f64,
    max_iter: usize,
) -> (f64, f64, usize, Vec<f64>) {
    let mut r = matching_residual(a, eps, u, t1);
    let mut trace = vec![norm(r)];
    let mut iterations = 0;
    while iterations < max_iter && norm(r) > 1e-14 {
        iterations += 1;
        let sech2 = |x: f64| 1.0 / x.cosh().powi(2);
        let csch2 = |x: f64| 1.0 / x.sinh().powi(2);
        let j = [
            [sech2(u + 0.5 * a), eps * csch2(t1)],
            [sech2(u), eps * csch2(t1 + 0.5 * a * eps)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let du = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let dt = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (nu, nt) = (u - lambda * du, t1 - lambda * dt);
            if nt > 0.0 && nu > 0.0 {
                let nr = matching_residual(a, eps, nu, nt);
                if norm(nr) < norm(r) {
                    u = nu;
                    t1 = nt;
                    r = nr;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        trace.push(norm(r));
        if !accepted {
            break;
        }
    }
    (u, t1, iterations, trace)
}

/// Solves the matching system by damped Newton from `t₀ = a/2 + ε`, `t₁ = ε`.
///
/// If Newton stalls from that guess (far from the large-`a`, small-`ε`
/// regime), it restarts from the constants read off the exact fixed point of
/// the period map.
pub fn solve_matching(a: f64, eps: f64) -> Result<GhkInstance> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(param("a", format!("must be positive, got {a}")));
    }
    check_eps(eps)?;
    const MAX_ITER: usize = 100;
    const TOL: f64 = 1e-12;
    let accept = |u: f64, t1: f64| {
        let r = matching_residual(a, eps, u, t1);
        r[0].abs() <= TOL && r[1].abs() <= TOL
    };

    let (mut u, mut t1, mut iterations, mut trace) = newton(a, eps, eps, eps, MAX_ITER);
    if !accept(u, t1) {
        let x0 = fixed_point(a, eps);
        let x_mid = segment_flow_unchecked(x0, a * a, 0.5);
        let u0 = (x0 / a).atanh();
        let t10 = (a * eps / x_mid).atanh();
        if u0.is_finite() && t10.is_finite() && u0 > 0.0 && t10 > 0.0 {
            let (u2, t2, it2, tr2) = newton(a, eps, u0, t10, MAX_ITER);
            u = u2;
            t1 = t2;
            iterations += it2;
            trace.extend(tr2);
        }
    }
    let r = matching_residual(a, eps, u, t1);
    if !(r[0].abs() <= TOL && r[1].abs() <= TOL) {
        return Err(Error::NotConverged {
            iterations,
            residual: norm(r),
        });
    }
    Ok(GhkInstance {
        a,
        eps,
        t0: u + 0.5 * a,
        t1,
        residuals: r,
        iterations,
        trace,
    })
}

/// `λ_{a₁}(t) / λ_{a₂}(t)` for the same step forcing.
pub fn pointwise_ratio(a1: f64, a2: f64, eps: f64, t: f64) -> Result<f64> {
    let i1 = solve_matching(a1, eps)?;
    let i2 = solve_matching(a2, eps)?;
    Ok(i1.value(t) / i2.value(t))
}

/// `Λ(a₁) / Λ(a₂)` from exact integrals.
pub fn average_ratio(a1: f64, a2: f64, eps: f64) -> Result<f64> {
    let i1 = solve_matching(a1, eps)?;
    let i2 = solve_matching(a2, eps)?;
    Ok(i1.integral() / i2.integral())
}

/// Minimum over `samples` uniform points of `λ_{a₁}/λ_{a₂}`.
pub fn min_pointwise_ratio(i1: &GhkInstance, i2: &GhkInstance, samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let t = i as f64 / samples as f64;
            i1.value(t) / i2.value(t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// One row of a ratio sweep at `a₂ = a₁/ε`, sampled at `t = ε/a₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhkRow {
    pub a1: f64,
    pub a2: f64,
    pub eps: f64,
    pub t0: f64,
    pub t1: f64,
    pub pointwise_ratio_at_t: f64,
    pub two_eps_sq: f64,
    pub avg_ratio: f64,
    pub a1_over_a2: f64,
    pub max_residual: f64,
    /// `min_t λ_{a₁}/λ_{a₂}`, bounded below by `(a₁/a₂)²`.
    pub min_ratio: f64,
}

impl GhkRow {
    /// Pointwise collapse below `a₁/a₂`, averaged ratio at least half of it,
    /// the squared pointwise bound, and matching residuals within `1e-12`.
    pub fn pass(&self, tol: f64) -> bool {
        self.max_residual <= 1e-12
            && self.pointwise_ratio_at_t < self.a1_over_a2
            && self.avg_ratio >= 0.5 * self.a1_over_a2 - tol
            && self.min_ratio >= self.a1_over_a2.powi(2) - tol
    }
}

pub fn ghk_row(a1: f64, eps: f64) -> Result<GhkRow> {
    let a2 = a1 / eps;
    let i1 = solve_matching(a1, eps)?;
    let i2 = solve_matching(a2, eps)?;
    let t = eps / a1;
    let max_residual = i1
        .residuals
        .iter()
        .chain(&i2.residuals)
        .fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(GhkRow {
        a1,
        a2,
        eps,
        t0: i1.t0,
        t1: i1.t1,
        pointwise_ratio_at_t: i1.value(t) / i2.value(t),
        two_eps_sq: 2.0 * eps * eps,
        avg_ratio: i1.integral() / i2.integral(),
        a1_over_a2: a1 / a2,
        max_residual,
        min_ratio: min_pointwise_ratio(&i1, &i2, 4096),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rk4(x0: f64, k: f64, t: f64, n: usize) -> f64 {
        let h = t / n as f64;
        let f = |x: f64| k - x * x;
        let mut x = x0;
        for _ in 0..n {
            let k1 = f(x);
            let k2 = f(x + h / 2.0 * k1);
            let k3 = f(x + h / 2.0 * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn segment_flow_examples() {
        for t in [0.0, 0.3, 7.0] {
            assert!((segment_flow(2.0, 4.0, t).unwrap() - 2.0).abs() < 1e-15);
        }
        let s: f64 = 0.4;
        let coth = |x: f64| 1.0 / x.tanh();
        assert!((segment_flow(coth(s), 1.0, 0.7).unwrap() - coth(s + 0.7)).abs() < 1e-13);
        let oracle = rk4(2.0, 1.0, 0.5, 50_000);
        assert!((segment_flow(2.0, 1.0, 0.5).unwrap() - oracle).abs() < 1e-9);
        assert!(segment_flow(0.0, 1.0, 1.0).is_err());
        assert!(segment_flow(1.0, -1.0, 1.0).is_err());
        assert!(segment_flow(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn segment_flow_is_monotone_in_x0() {
        let mut prev = 0.0;
        for i in 1..50 {
            let x = segment_flow(0.1 * i as f64, 2.0, 0.8).unwrap();
            assert!(x > prev && x > 0.0);
            prev = x;
        }
    }

    #[test]
    fn segment_integral_matches_quadrature() {
        for (x0, k, t) in [
            (2.0, 1.0, 0.5),
            (0.01, 9.0, 1.3),
            (3.0, 3.0f64.powi(2), 0.2),
        ] {
            let n = 20_000;
            let h = t / n as f64;
            let simpson: f64 = (0..n)
                .map(|i| {
                    let a = i as f64 * h;
                    let fa = segment_flow_unchecked(x0, k, a);
                    let fm = segment_flow_unchecked(x0, k, a + h / 2.0);
                    let fb = segment_flow_unchecked(x0, k, a + h);
                    h / 6.0 * (fa + 4.0 * fm + fb)
                })
                .sum();
            assert!((segment_integral_unchecked(x0, k, t) - simpson).abs() < 1e-12);
        }
    }

    #[test]
    fn log_helpers() {
        for x in [0.01, 1.0, 5.0, 30.0] {
            assert!((log_cosh(x) - x.cosh().ln()).abs() < 1e-13);
            assert!((log_sinh(x) - x.sinh().ln()).abs() < 1e-13);
        }
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn matching_in_the_asymptotic_regime() {
        let (a, eps) = (50.0, 0.05);
        let inst = solve_matching(a, eps).unwrap();
        assert!(inst.residuals.iter().all(|r| r.abs() <= 1e-12));
        assert!(inst.t0 > a / 2.0);
        for ratio in [inst.t1 / eps, (inst.t0 - a / 2.0) / eps] {
            assert!((0.8..=1.25).contains(&ratio), "{ratio}");
        }
        assert!(inst.periodicity_residual() < 1e-10);
    }

    #[test]
    fn matching_near_constant_forcing() {
        let a = 3.0;
        let inst = solve_matching(a, 0.999).unwrap();
        let values: Vec<f64> = (0..64).map(|i| inst.value(i as f64 / 64.0)).collect();
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 5e-3, "{spread}");
        assert!((inst.integral() / a - 1.0).abs() < 1e-3);
    }

    #[test]
    fn matches_numerical_solver() {
        use crate::riccati::{solve_periodic, ScalarForcing, SolverOptions};
        for (a, eps) in [(50.0, 0.05), (4.0, 0.3), (1000.0, 0.05)] {
            let inst = solve_matching(a, eps).unwrap();
            let forcing = ScalarForcing::new(inst.forcing());
            let sol = solve_periodic(&forcing, a, &SolverOptions::default()).unwrap();
            for i in 0..64 {
                let idx = i * sol.values.len() / 64;
                let t = idx as f64 * sol.step;
                assert!(
                    (sol.values[idx] - inst.value(t)).abs() < 1e-8,
                    "a={a} t={t}"
                );
            }
            assert!((sol.integral / inst.integral() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ratios() {
        let (a1, eps) = (50.0, 0.05);
        let a2 = a1 / eps;
        let p = pointwise_ratio(a1, a2, eps, eps / a1).unwrap();
        assert!(p > eps * eps && p < 4.0 * eps * eps);
        assert!(p < a1 / a2);
        let avg = average_ratio(a1, a2, eps).unwrap();
        assert!(avg >= 0.5 * a1 / a2);
        assert!((pointwise_ratio(a1, a1, eps, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!((average_ratio(a1, a1, eps).unwrap() - 1.0).abs() < 1e-15);
        let row = ghk_row(a1, eps).unwrap();
        assert!(row.pass(1e-12));
    }
}
