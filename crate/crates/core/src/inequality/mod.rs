//! An integral inequality for positive 1-periodic profiles of average one:
//!
//! ```text
//! h (1 - e^{-1/h})  <=  ∫₀¹ dτ μ(τ)² ∫₀¹ dt exp(-(1/h) ∫_τ^{τ+t} μ)
//! ```
//!
//! Both sides are available here: the right-hand side by quadrature for any
//! representation and in closed form for step profiles. The cyclic-ratio bound
//! `Σ a_j/a_{j+1} ≥ M` and the small-`h` / large-`h` behaviour of the ratio are
//! exposed as well.

mod fuzz;

pub use fuzz::{fuzz_inequality, generate_instance, FuzzConfig, FuzzOutcome, Generator};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::quadrature::GaussRule;
use crate::signals::{PeriodicProfile, ProfileSpec, StepProfile};

/// Default tolerance on `rhs - lhs`.
pub const DEFAULT_TOL_GAP: f64 = 1e-9;

const NORMALIZATION_TOL: f64 = 1e-10;

/// `h (1 - e^{-1/h})`.
pub fn lhs_value(h: f64) -> Result<f64> {
    check_h(h)?;
    Ok(-h * (-1.0 / h).exp_m1())
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(param("h", format!("must be positive and finite, got {h}")))
    }
}

/// Accuracy knobs for [`rhs_double_integral`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Maximum growth of the exponent `W/h` across one Gauss panel.
    pub exponent_per_panel: f64,
    /// Largest panel width in `t` (and in `τ` for step profiles).
    pub max_panel: f64,
    /// Inner integration stops once `W/h` exceeds this value.
    pub cutoff: f64,
    /// Cap on periodic-trapezoid nodes in `τ` for smooth profiles.
    pub max_tau_nodes: usize,
    /// Target change between successive trapezoid refinements.
    pub tau_tol: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            exponent_per_panel: 1.0,
            max_panel: 1.0 / 16.0,
            cutoff: 60.0,
            max_tau_nodes: 4096,
            tau_tol: 1e-13,
        }
    }
}

/// A quadrature value with its refinement-based error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsEstimate {
    pub value: f64,
    pub error_estimate: f64,
    /// Number of `τ` nodes in the final rule.
    pub tau_nodes: usize,
}

fn check_normalized(mu: &PeriodicProfile) -> Result<()> {
    if (mu.mean() - 1.0).abs() > NORMALIZATION_TOL {
        Err(Error::NotNormalized { average: mu.mean() })
    } else {
        Ok(())
    }
}

/// `∫₀¹ exp(-W(τ, t)/h) dt` with Gauss panels whose edges include every
/// breakpoint of `μ` seen from `τ`.
fn inner_integral(mu: &PeriodicProfile, tau: f64, h: f64, res: &Resolution) -> f64 {
    let m_tau = mu.cumulative_at(tau);
    let mut edges: Vec<f64> = mu
        .breakpoints()
        .map(|bps| {
            bps.iter()
                .map(|b| (b - tau).rem_euclid(1.0))
                .filter(|e| *e > 0.0 && *e < 1.0)
                .collect()
        })
        .unwrap_or_default();
    edges.sort_by(f64::total_cmp);
    edges.push(1.0);

    let integrand = |x: f64| (-(mu.cumulative_at(tau + x) - m_tau) / h).exp();
    let mut acc = 0.0;
    let mut t = 0.0;
    let mut next_edge = 0;
    while t < 1.0 {
        let exponent = (mu.cumulative_at(tau + t) - m_tau) / h;
        if exponent > res.cutoff {
            break;
        }
        while edges[next_edge] <= t {
            next_edge += 1;
        }
        let width = (res.exponent_per_panel * h / mu.evaluate(tau + t)).min(res.max_panel);
        let end = (t + width).min(edges[next_edge]);
        acc += GaussRule::Six.panel(t, end, integrand);
        t = end;
    }
    acc
}

/// Right-hand side by quadrature.
///
/// Step profiles use Gauss panels in `τ` aligned with the breakpoints (six- and
/// four-point rules on the same panels give the error estimate). Smooth and
/// gridded profiles use the periodic trapezoid rule in `τ`, doubled until the
/// change drops below `res.tau_tol`.
pub fn rhs_double_integral(mu: &PeriodicProfile, h: f64, res: &Resolution) -> Result<RhsEstimate> {
    check_h(h)?;
    check_normalized(mu)?;
    let weight = |tau: f64| {
        let v = mu.evaluate(tau);
        v * v * inner_integral(mu, tau, h, res)
    };

    if let Some((values, lengths)) = mu.step_parts() {
        let (mut six, mut four, mut nodes) = (0.0, 0.0, 0);
        let mut start = 0.0;
        for (c, len) in values.iter().zip(lengths) {
            let width = (res.exponent_per_panel * h / c).min(res.max_panel);
            let panels = (len / width).ceil().max(1.0) as usize;
            let step = len / panels as f64;
            for p in 0..panels {
                let a = start + p as f64 * step;
                let b = if p + 1 == panels {
                    start + len
                } else {
                    a + step
                };
                six += GaussRule::Six.panel(a, b, weight);
                four += GaussRule::Four.panel(a, b, weight);
                nodes += 6;
            }
            start += len;
        }
        return Ok(RhsEstimate {
            value: six,
            error_estimate: (six - four).abs(),
            tau_nodes: nodes,
        });
    }

    let mut m = 32;
    let mut sum: f64 = (0..m).map(|i| weight(i as f64 / m as f64)).sum();
    let mut value = sum / m as f64;
    loop {
        let refined: f64 = (0..m)
            .map(|i| weight((2 * i + 1) as f64 / (2 * m) as f64))
            .sum();
        sum += refined;
        m *= 2;
        let next = sum / m as f64;
        let change = (next - value).abs();
        value = next;
        if change <= res.tau_tol || m >= res.max_tau_nodes {
            return Ok(RhsEstimate {
                value,
                error_estimate: change,
                tau_nodes: m,
            });
        }
    }
}

/// Closed-form right-hand side for a well-distributed step profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRhs {
    /// Sum of the per-interval contributions.
    pub rhs: f64,
    /// `lhs + h²(1-q)² Σ_j q^{j-1} S_j` with `q = e^{-1/(Nh)}`.
    pub simplified: f64,
    /// `S_j = Σ_k (C_k / C_{k+j} - 1)` for `j = 1..N-1`.
    pub shift_sums: Vec<f64>,
}

impl ClosedFormRhs {
    pub fn consistency(&self) -> f64 {
        (self.rhs - self.simplified).abs()
    }
}

/// Per-interval contributions summed over all intervals. Valid for any
/// normalized step profile.
fn per_interval_rhs(c: &[f64], eps: &[f64], h: f64) -> f64 {
    let n = c.len();
    let one_minus = |x: f64| -(-x).exp_m1();
    let full = one_minus(1.0 / h);
    let mut total = 0.0;
    for k in 0..n {
        let mass = c[k] * eps[k];
        let x = mass / h;
        // every bracket term is pre-multiplied by (e^x - 1) to stay finite
        // e^{x - s} - e^{-s}, without cancellation when x is small
        let lifted = |s: f64| {
            if x < 1.0 {
                (-s).exp() * x.exp_m1()
            } else {
                (x - s).exp() - (-s).exp()
            }
        };
        let mut bracket = -one_minus(x) / c[k] + lifted(1.0 / h) / c[k];
        let mut reached = mass;
        for j in 1..n {
            let i = (k + j) % n;
            let y = c[i] * eps[i] / h;
            bracket += one_minus(y) / c[i] * lifted(reached / h);
            reached += c[i] * eps[i];
        }
        total += h * mass * full + h * h * c[k] * bracket;
    }
    total
}

pub fn closed_form_rhs(step: &StepProfile, h: f64) -> Result<ClosedFormRhs> {
    check_h(h)?;
    if !step.is_well_distributed() {
        return Err(Error::NotWellDistributed);
    }
    let c = step.values();
    let n = c.len();
    let rhs = per_interval_rhs(c, step.lengths(), h);
    let shift_sums: Vec<f64> = (1..n)
        .map(|j| orbit_decomposed_sum(c, j).expect("shift in range"))
        .collect();
    let q = (-1.0 / (n as f64 * h)).exp();
    let one_minus_q = -(-1.0 / (n as f64 * h)).exp_m1();
    let tail: f64 = shift_sums
        .iter()
        .enumerate()
        .map(|(j, s)| q.powi(j as i32) * s)
        .sum();
    let simplified = lhs_value(h)? + h * h * one_minus_q * one_minus_q * tail;
    Ok(ClosedFormRhs {
        rhs,
        simplified,
        shift_sums,
    })
}

/// Exact right-hand side for any normalized step profile (not only
/// well-distributed ones).
pub fn step_rhs_exact(step: &StepProfile, h: f64) -> Result<f64> {
    check_h(h)?;
    Ok(per_interval_rhs(step.values(), step.lengths(), h))
}

/// Leading behaviour of `ratio(h) = rhs / lhs` at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioExpansion {
    /// `ratio(h) ≈ 1 + h · small_h_coefficient` as `h → 0`.
    pub small_h_coefficient: f64,
    /// `ratio(h) → large_h_limit = ∫μ²` as `h → ∞`.
    pub large_h_limit: f64,
}

pub fn ratio_expansion(step: &StepProfile) -> Result<RatioExpansion> {
    if !step.is_well_distributed() {
        return Err(Error::NotWellDistributed);
    }
    let c = step.values();
    let small = if c.len() > 1 {
        orbit_decomposed_sum(c, 1)?
    } else {
        0.0
    };
    Ok(RatioExpansion {
        small_h_coefficient: small,
        large_h_limit: step.to_profile().mean_square(),
    })
}

/// `rhs / lhs` from the closed form.
pub fn closed_form_ratio(step: &StepProfile, h: f64) -> Result<f64> {
    Ok(closed_form_rhs(step, h)?.rhs / lhs_value(h)?)
}

/// `Σ_{j=1}^{M} a_j / a_{j+1}` with `a_{M+1} = a_1`. Always `>= M`.
pub fn cyclic_ratio_sum(a: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(param("a", "needs at least one entry"));
    }
    if let Some(bad) = a.iter().find(|x| !(**x > 0.0)) {
        return Err(param("a", format!("entries must be positive, got {bad}")));
    }
    Ok((0..a.len()).map(|j| a[j] / a[(j + 1) % a.len()]).sum())
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `Σ_k (C_k / C_{k+j} - 1)`, assembled orbit by orbit of `k ↦ k + j (mod N)`.
pub fn orbit_decomposed_sum(c: &[f64], shift: usize) -> Result<f64> {
    let n = c.len();
    if shift == 0 || shift >= n {
        return Err(param(
            "shift",
            format!("must lie in 1..={}, got {shift}", n.saturating_sub(1)),
        ));
    }
    let orbits = gcd(n, shift);
    let orbit_len = n / orbits;
    let mut total = 0.0;
    for start in 0..orbits {
        let orbit: Vec<f64> = (0..orbit_len).map(|i| c[(start + i * shift) % n]).collect();
        total += cyclic_ratio_sum(&orbit)? - orbit_len as f64;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    ClosedForm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::ClosedForm => "closed_form",
        }
    }
}

/// Both sides of the inequality for one `(profile, h)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityGapReport {
    pub profile_id: String,
    pub profile: ProfileSpec,
    pub n: usize,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub ratio: f64,
    pub method: Method,
    pub resolution: usize,
    pub error_estimate: f64,
}

impl InequalityGapReport {
    pub fn passes(&self, tol_gap: f64) -> bool {
        self.gap >= -tol_gap && self.ratio >= 1.0 - tol_gap
    }
}

/// Evaluates both sides with the requested method.
pub fn gap_report(
    profile: &PeriodicProfile,
    h: f64,
    method: Method,
    res: &Resolution,
) -> Result<InequalityGapReport> {
    let lhs = lhs_value(h)?;
    let (rhs, resolution, error_estimate) = match method {
        Method::Quadrature => {
            let est = rhs_double_integral(profile, h, res)?;
            (est.value, est.tau_nodes, est.error_estimate)
        }
        Method::ClosedForm => {
            let step = StepProfile::from_profile(profile)?;
            let cf = closed_form_rhs(&step, h)?;
            (cf.rhs, 0, cf.consistency())
        }
    };
    Ok(InequalityGapReport {
        profile_id: String::new(),
        profile: profile.to_spec(),
        n: profile.size(),
        h,
        lhs,
        rhs,
        gap: rhs - lhs,
        ratio: rhs / lhs,
        method,
        resolution,
        error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> StepProfile {
        StepProfile::new(vec![2.0, 2.0 / 3.0], vec![0.25, 0.75]).unwrap()
    }

    /// Independent brute-force oracle: midpoint rule in τ, and in t an explicit
    /// sum over the constant pieces met by τ + t.
    fn brute_force_step(step: &StepProfile, h: f64, n_tau: usize) -> f64 {
        let p = step.to_profile();
        let mut acc = 0.0;
        for i in 0..n_tau {
            let tau = (i as f64 + 0.5) / n_tau as f64;
            let mut inner = 0.0;
            let mut t = 0.0;
            let mut w = 0.0;
            while t < 1.0 - 1e-15 {
                // distance to the next breakpoint, found by scanning forward
                let mut d = 1.0 - t;
                for b in p.breakpoints().unwrap() {
                    for shift in [0.0, 1.0, 2.0] {
                        let e = b + shift - tau - t;
                        if e > 1e-15 && e < d {
                            d = e;
                        }
                    }
                }
                let c = p.evaluate(tau + t + 0.5 * d);
                inner += (-w / h).exp() * h / c * (1.0 - (-c * d / h).exp());
                w += c * d;
                t += d;
            }
            acc += p.evaluate(tau).powi(2) * inner;
        }
        acc / n_tau as f64
    }

    #[test]
    fn lhs_examples() {
        assert!((lhs_value(1.0).unwrap() - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!((lhs_value(100.0).unwrap() - 0.995_016_625_083_194_6).abs() < 1e-13);
        assert!((lhs_value(1e-3).unwrap() - 1e-3).abs() < 1e-18);
        assert!(lhs_value(0.0).is_err());
        assert!(lhs_value(-1.0).is_err());
        let mut prev = 0.0;
        for h in crate::quadrature::log_space(1e-3, 1e3, 40) {
            let v = lhs_value(h).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn constant_profile_is_the_equality_case() {
        let one = PeriodicProfile::constant(1.0).unwrap();
        for h in [0.01, 0.3, 1.0, 100.0] {
            let rhs = rhs_double_integral(&one, h, &Resolution::default()).unwrap();
            assert!((rhs.value - lhs_value(h).unwrap()).abs() < 1e-13, "h = {h}");
            let cf = closed_form_rhs(&StepProfile::new(vec![1.0], vec![1.0]).unwrap(), h).unwrap();
            assert!((cf.rhs - lhs_value(h).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_quadrature_matches_closed_form_and_brute_force() {
        let s = two_step();
        let q = rhs_double_integral(&s.to_profile(), 0.5, &Resolution::default()).unwrap();
        let cf = closed_form_rhs(&s, 0.5).unwrap();
        assert!(
            (q.value - cf.rhs).abs() < 1e-12,
            "{} vs {}",
            q.value,
            cf.rhs
        );
        assert!(cf.consistency() < 1e-14);
        // midpoint rule converges at second order; 4000 nodes gives ~1e-7
        let bf = brute_force_step(&s, 0.5, 4000);
        assert!((bf - cf.rhs).abs() < 1e-6, "{bf} vs {}", cf.rhs);
        assert!(cf.rhs > lhs_value(0.5).unwrap());
    }

    #[test]
    fn general_step_formula_matches_brute_force() {
        let s = StepProfile::new(vec![0.5, 1.5, 1.0], vec![0.4, 0.4, 0.2]).unwrap();
        for h in [0.2, 1.5] {
            let exact = step_rhs_exact(&s, h).unwrap();
            let bf = brute_force_step(&s, h, 4000);
            assert!((exact - bf).abs() < 1e-6);
            let q = rhs_double_integral(&s.to_profile(), h, &Resolution::default()).unwrap();
            assert!((exact - q.value).abs() < 1e-12);
        }
        assert!(closed_form_rhs(&s, 1.0).is_err());
    }

    #[test]
    fn large_h_ratio_tends_to_mean_square() {
        let s = two_step();
        let q = rhs_double_integral(&s.to_profile(), 1000.0, &Resolution::default()).unwrap();
        let ratio = q.value / lhs_value(1000.0).unwrap();
        assert!((ratio - 4.0 / 3.0).abs() / (4.0 / 3.0) < 1e-3);
    }

    #[test]
    fn ratio_expansion_examples() {
        let e = ratio_expansion(&two_step()).unwrap();
        assert!((e.small_h_coefficient - 4.0 / 3.0).abs() < 1e-14);
        assert!((e.large_h_limit - 4.0 / 3.0).abs() < 1e-14);
        let flat = StepProfile::well_distributed(&[1.0, 1.0, 1.0]).unwrap();
        let e = ratio_expansion(&flat).unwrap();
        assert_eq!(e.small_h_coefficient, 0.0);
        assert!((e.large_h_limit - 1.0).abs() < 1e-15);
        let h = 1e-3;
        let measured = (closed_form_ratio(&two_step(), h).unwrap() - 1.0) / h;
        assert!((measured - 4.0 / 3.0).abs() / (4.0 / 3.0) < 0.01);
    }

    #[test]
    fn cyclic_sum_examples() {
        assert_eq!(cyclic_ratio_sum(&[0.7, 0.7, 0.7]).unwrap(), 3.0);
        assert_eq!(cyclic_ratio_sum(&[1.0, 2.0]).unwrap(), 2.5);
        assert_eq!(cyclic_ratio_sum(&[1.0, 2.0, 4.0]).unwrap(), 5.0);
        assert!(cyclic_ratio_sum(&[1.0, 0.0]).is_err());
        assert!(cyclic_ratio_sum(&[]).is_err());
    }

    #[test]
    fn orbit_sum_matches_direct_sum() {
        let c = [1.3, 0.4, 2.2, 0.9];
        for j in 1..4 {
            let direct: f64 = (0..4).map(|k| c[k] / c[(k + j) % 4] - 1.0).sum();
            assert!((orbit_decomposed_sum(&c, j).unwrap() - direct).abs() < 1e-14);
        }
        assert_eq!(orbit_decomposed_sum(&[2.0, 2.0, 2.0], 2).unwrap(), 0.0);
        assert!((orbit_decomposed_sum(&[2.0, 2.0 / 3.0], 1).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(orbit_decomposed_sum(&c, 0).is_err());
        assert!(orbit_decomposed_sum(&c, 4).is_err());
    }

    #[test]
    fn non_normalized_profile_is_rejected_with_average() {
        let p = PeriodicProfile::constant(2.0).unwrap();
        match rhs_double_integral(&p, 1.0, &Resolution::default()) {
            Err(Error::NotNormalized { average }) => assert_eq!(average, 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn translation_invariance() {
        let p = PeriodicProfile::trig(1.0, vec![0.2], vec![0.4, -0.1]).unwrap();
        let s = two_step().to_profile();
        for profile in [p, s] {
            let base = rhs_double_integral(&profile, 0.3, &Resolution::default()).unwrap();
            let moved =
                rhs_double_integral(&profile.shifted(0.37), 0.3, &Resolution::default()).unwrap();
            assert!((base.value - moved.value).abs() < 1e-11);
        }
    }

    #[test]
    fn smooth_profile_matches_fine_grid() {
        // same function on a fine grid, whose integrals converge at second order
        let p = PeriodicProfile::trig(1.0, vec![], vec![0.5]).unwrap();
        let g = PeriodicProfile::sampled(8192, |t| p.evaluate(t)).unwrap();
        let a = rhs_double_integral(&p, 0.2, &Resolution::default()).unwrap();
        let b = rhs_double_integral(&g, 0.2, &Resolution::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-6);
        assert!(a.value > lhs_value(0.2).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn cyclic_sum_at_least_length(a in prop::collection::vec(0.01f64..100.0, 1..10)) {
                let s = cyclic_ratio_sum(&a).unwrap();
                prop_assert!(s >= a.len() as f64 - 1e-12);
                let all_equal = a.iter().all(|x| (x - a[0]).abs() <= 1e-12);
                if !all_equal {
                    prop_assert!(s > a.len() as f64);
                }
            }

            #[test]
            fn simplified_form_agrees(raw in prop::collection::vec(0.1f64..10.0, 1..9), h in 0.005f64..200.0) {
                let s = StepProfile::well_distributed(&raw).unwrap();
                let cf = closed_form_rhs(&s, h).unwrap();
                prop_assert!(cf.consistency() <= 1e-12 * cf.rhs.max(1.0));
                prop_assert!(cf.shift_sums.iter().all(|v| *v >= -1e-12));
                prop_assert!(cf.rhs - lhs_value(h).unwrap() >= -1e-13);
            }
        }
    }
}
