//! Sectional curvature of a radially perturbed hyperbolic metric
//! `g̃ = e^{2φ} g`, with `φ(r) = ε χ((r - r₀)/ε^α)`.
//!
//! For radial `φ` the Hessian of the distance function in curvature `-1` is
//! `coth(r)(g - dr²)`, so the curvature of an orthonormal plane depends on the
//! point only through `r` and on the plane only through
//! `w = |X(r)|² + |Y(r)|² ∈ [0, 1]`:
//!
//! ```text
//! K̃(r, w) = e^{-2φ} [-1 - φ'' w - φ' coth(r) (2 - w) - φ'² (1 - w)]
//! ```
//!
//! To leading order `K̃ ≈ -1 - ε^{1-2α} w χ''`. The relative pinching
//! constant `a₁` compares planes at one point, the global constant `a₂`
//! compares all planes, and `(1 - a₂)/(1 - a₁)` tends to
//! `(max χ'' - min χ'') / max|χ''|`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::quadrature::{fit_slope, golden_min};

/// Which bump profile `χ` to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpKind {
    /// `exp(-1/(1 - x²))`.
    Even,
    /// `x exp(-1/(1 - x²))`. Odd, so `min χ'' = -max χ''`.
    Odd,
}

/// A compactly supported bump on `(-1, 1)` with analytic derivatives and
/// cached extrema of `χ''`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub kind: BumpKind,
    pub max_dd: f64,
    pub min_dd: f64,
    pub argmax_dd: f64,
    pub argmin_dd: f64,
}

/// `(ψ, ψ', ψ'')` for `ψ = exp(-1/(1 - x²))`.
fn base(x: f64) -> (f64, f64, f64) {
    if x.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 1.0 - x * x;
    let psi = (-1.0 / s).exp();
    let g1 = -2.0 * x / (s * s);
    let g2 = -(2.0 + 6.0 * x * x) / (s * s * s);
    (psi, g1 * psi, (g2 + g1 * g1) * psi)
}

pub const DENSE_POINTS: usize = 4096;

impl BumpFunction {
    pub fn new(kind: BumpKind) -> Self {
        let mut chi = Self {
            kind,
            max_dd: 0.0,
            min_dd: 0.0,
            argmax_dd: 0.0,
            argmin_dd: 0.0,
        };
        let grid: Vec<f64> = (0..=DENSE_POINTS)
            .map(|i| -1.0 + 2.0 * i as f64 / DENSE_POINTS as f64)
            .collect();
        let (xmin, vmin) = refine_min(&grid, |x| chi.dd(x));
        let (xmax, vmax) = refine_min(&grid, |x| -chi.dd(x));
        chi.min_dd = vmin;
        chi.argmin_dd = xmin;
        chi.max_dd = -vmax;
        chi.argmax_dd = xmax;
        chi
    }

    /// The odd bump, whose curvature extrema are symmetric.
    pub fn symmetric() -> Self {
        Self::new(BumpKind::Odd)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (p, _, _) = base(x);
        match self.kind {
            BumpKind::Even => p,
            BumpKind::Odd => x * p,
        }
    }

    pub fn d(&self, x: f64) -> f64 {
        let (p, p1, _) = base(x);
        match self.kind {
            BumpKind::Even => p1,
            BumpKind::Odd => p + x * p1,
        }
    }

    pub fn dd(&self, x: f64) -> f64 {
        let (_, p1, p2) = base(x);
        match self.kind {
            BumpKind::Even => p2,
            BumpKind::Odd => 2.0 * p1 + x * p2,
        }
    }

    pub fn max_abs_dd(&self) -> f64 {
        self.max_dd.max(-self.min_dd)
    }

    /// `|max χ'' + min χ''| ≤ 1e-10`.
    pub fn symmetric_curvature(&self) -> bool {
        (self.max_dd + self.min_dd).abs() <= 1e-10
    }
}

/// Minimum of `f` over sorted `grid`, refined by golden section around the
/// best sample.
fn refine_min<F: Fn(f64) -> f64>(grid: &[f64], f: F) -> (f64, f64) {
    let (mut best, mut best_value) = (0, f64::INFINITY);
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v < best_value {
            best = i;
            best_value = v;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, v) = golden_min(&f, lo, hi, 1e-12 * (1.0 + lo.abs().max(hi.abs())));
    if v < best_value {
        (x, v)
    } else {
        (grid[best], best_value)
    }
}

/// `φ(r) = ε χ((r - r₀)/ε^α)` on hyperbolic space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalPerturbation {
    pub eps: f64,
    pub alpha: f64,
    pub r0: f64,
    pub chi: BumpFunction,
}

impl ConformalPerturbation {
    pub fn new(eps: f64, alpha: f64, r0: f64, chi: BumpFunction) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(param("eps", format!("must be positive, got {eps}")));
        }
        if !(alpha > 0.0 && alpha < 1.0 / 3.0) {
            return Err(param("alpha", format!("must lie in (0, 1/3), got {alpha}")));
        }
        if !(r0 > eps.powf(alpha)) || !r0.is_finite() {
            return Err(param(
                "r0",
                format!("must exceed eps^alpha = {}, got {r0}", eps.powf(alpha)),
            ));
        }
        Ok(Self {
            eps,
            alpha,
            r0,
            chi,
        })
    }

    /// Support half-width `ε^α`.
    pub fn width(&self) -> f64 {
        self.eps.powf(self.alpha)
    }

    /// `ε^{1-2α}`.
    pub fn delta(&self) -> f64 {
        self.eps.powf(1.0 - 2.0 * self.alpha)
    }

    fn x(&self, r: f64) -> f64 {
        (r - self.r0) / self.width()
    }

    /// `(φ, φ', φ'')` at `r`.
    pub fn phi(&self, r: f64) -> (f64, f64, f64) {
        let x = self.x(r);
        let w = self.width();
        (
            self.eps * self.chi.value(x),
            self.eps / w * self.chi.d(x),
            self.eps / (w * w) * self.chi.dd(x),
        )
    }
}

fn check_w(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(param("w", format!("must lie in [0, 1], got {w}")))
    }
}

/// `-1 - ε^{1-2α} w χ''((r - r₀)/ε^α)`.
pub fn curvature_leading_order(pert: &ConformalPerturbation, r: f64, w: f64) -> Result<f64> {
    check_w(w)?;
    Ok(leading(pert, r, w))
}

fn leading(pert: &ConformalPerturbation, r: f64, w: f64) -> f64 {
    -1.0 - pert.delta() * w * pert.chi.dd(pert.x(r))
}

/// Exact curvature of the plane class `w` at radius `r`.
pub fn curvature_exact(pert: &ConformalPerturbation, r: f64, w: f64) -> Result<f64> {
    check_w(w)?;
    if !(r > 0.0) {
        return Err(param("r", format!("must be positive, got {r}")));
    }
    Ok(exact(pert, r, w))
}

fn exact(pert: &ConformalPerturbation, r: f64, w: f64) -> f64 {
    let (p, p1, p2) = pert.phi(r);
    let coth = 1.0 / r.tanh();
    (-2.0 * p).exp() * (-1.0 - p2 * w - p1 * coth * (2.0 - w) - p1 * p1 * (1.0 - w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinchingMethod {
    /// Constants linearized in the curvature deviation:
    /// `1 - a = (max|K| - min|K|)/2`, from the leading-order curvature.
    Leading,
    /// `a² = min|K| / max|K|` from the exact curvature.
    Exact,
}

impl PinchingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Leading => "leading",
            Self::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinchingConstants {
    pub eps: f64,
    pub alpha: f64,
    pub r0: f64,
    pub method: PinchingMethod,
    /// Relative (pointwise) pinching constant.
    pub a1: f64,
    /// Global pinching constant.
    pub a2: f64,
    /// `(1 - a₂)/(1 - a₁)`.
    pub ratio: f64,
    /// `1 - (ε^{1-2α}/2) max|χ''|`.
    pub a1_formula: f64,
    /// `1 - (ε^{1-2α}/2)(max χ'' - min χ'')`.
    pub a2_formula: f64,
    pub grid_points: usize,
}

fn curvature_fn(
    pert: &ConformalPerturbation,
    method: PinchingMethod,
) -> impl Fn(f64, f64) -> f64 + '_ {
    move |r, w| match method {
        PinchingMethod::Leading => leading(pert, r, w),
        PinchingMethod::Exact => exact(pert, r, w),
    }
}

struct Extremes {
    /// `min_r` of the per-point pinching quantity.
    local: f64,
    global_min: f64,
    global_max: f64,
    /// Largest signed curvature.
    top: f64,
}

fn scan(pert: &ConformalPerturbation, method: PinchingMethod, points: usize) -> Extremes {
    let k = curvature_fn(pert, method);
    let width = pert.width();
    let grid: Vec<f64> = (0..=points)
        .map(|i| pert.r0 - width + 2.0 * width * i as f64 / points as f64)
        .collect();
    // affine in w: the endpoints carry the extremes
    let abs_pair = |r: f64| {
        let (k0, k1) = (k(r, 0.0).abs(), k(r, 1.0).abs());
        (k0.min(k1), k0.max(k1))
    };
    let local_quantity = |r: f64| {
        let (lo, hi) = abs_pair(r);
        match method {
            PinchingMethod::Exact => lo / hi,
            PinchingMethod::Leading => -(hi - lo),
        }
    };
    let (_, local) = refine_min(&grid, local_quantity);
    let (_, gmin) = refine_min(&grid, |r| abs_pair(r).0);
    let (_, gmax) = refine_min(&grid, |r| -abs_pair(r).1);
    let (_, top) = refine_min(&grid, |r| -k(r, 0.0).max(k(r, 1.0)));
    // reference point away from the support, where K = -1
    let (local, global_min, global_max) = match method {
        PinchingMethod::Exact => (local.min(1.0), gmin.min(1.0), (-gmax).max(1.0)),
        PinchingMethod::Leading => (local.min(0.0), gmin.min(1.0), (-gmax).max(1.0)),
    };
    Extremes {
        local,
        global_min,
        global_max,
        top: -top,
    }
}

/// `a₁`, `a₂` and their ratio from a scan of `r ∈ [r₀ - ε^α, r₀ + ε^α]` plus a
/// reference point with `φ = 0`, refined by golden section. A scan on a
/// quarter of the points must agree, or the grid is reported as too coarse.
pub fn pinching_constants(
    pert: &ConformalPerturbation,
    method: PinchingMethod,
    points: usize,
) -> Result<PinchingConstants> {
    if points < 16 {
        return Err(param("points", "need at least 16 scan points"));
    }
    let fine = scan(pert, method, points);
    let coarse = scan(pert, method, points / 4);
    for (c, f) in [
        (coarse.local, fine.local),
        (coarse.global_min, fine.global_min),
        (coarse.global_max, fine.global_max),
    ] {
        if (c - f).abs() > 1e-9 * (1.0 + f.abs()) {
            return Err(Error::GridTooCoarse { coarse: c, fine: f });
        }
    }
    if fine.top >= 0.0 {
        return Err(param(
            "eps",
            format!(
                "curvature reaches {} >= 0; perturbation too large",
                fine.top
            ),
        ));
    }
    let (a1, a2) = match method {
        PinchingMethod::Exact => (
            fine.local.sqrt(),
            (fine.global_min / fine.global_max).sqrt(),
        ),
        PinchingMethod::Leading => (
            1.0 + 0.5 * fine.local,
            1.0 - 0.5 * (fine.global_max - fine.global_min),
        ),
    };
    if a2 <= 0.0 {
        return Err(param(
            "eps",
            format!("linearized a2 = {a2} <= 0; perturbation too large"),
        ));
    }
    let delta = pert.delta();
    let chi = &pert.chi;
    Ok(PinchingConstants {
        eps: pert.eps,
        alpha: pert.alpha,
        r0: pert.r0,
        method,
        a1,
        a2,
        ratio: (1.0 - a2) / (1.0 - a1),
        a1_formula: 1.0 - 0.5 * delta * chi.max_abs_dd(),
        a2_formula: 1.0 - 0.5 * delta * (chi.max_dd - chi.min_dd),
        grid_points: points,
    })
}

/// `max |K̃ - K_lead|` over the support and `w ∈ {0, 1}`.
pub fn leading_order_deviation(pert: &ConformalPerturbation, points: usize) -> f64 {
    let width = pert.width();
    let grid: Vec<f64> = (0..=points)
        .map(|i| pert.r0 - width + 2.0 * width * i as f64 / points as f64)
        .collect();
    let dev = |r: f64| {
        -[0.0, 1.0]
            .iter()
            .map(|&w| (exact(pert, r, w) - leading(pert, r, w)).abs())
            .fold(0.0, f64::max)
    };
    -refine_min(&grid, dev).1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub deviation: f64,
    pub exact: PinchingConstants,
    pub leading: PinchingConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub alpha: f64,
    pub r0: f64,
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the deviation against `ε`.
    pub slope: f64,
    pub expected_slope: f64,
}

impl SweepReport {
    pub fn slope_within(&self, tol: f64) -> bool {
        (self.slope - self.expected_slope).abs() <= tol
    }
}

pub fn eps_sweep(
    eps: &[f64],
    alpha: f64,
    r0: f64,
    chi: &BumpFunction,
    points: usize,
) -> Result<SweepReport> {
    if eps.len() < 2 {
        return Err(param("eps", "need at least two values for a slope"));
    }
    let rows = eps
        .iter()
        .map(|&e| {
            let pert = ConformalPerturbation::new(e, alpha, r0, chi.clone())?;
            Ok(SweepRow {
                eps: e,
                deviation: leading_order_deviation(&pert, points),
                exact: pinching_constants(&pert, PinchingMethod::Exact, points)?,
                leading: pinching_constants(&pert, PinchingMethod::Leading, points)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.deviation.ln()).collect();
    Ok(SweepReport {
        alpha,
        r0,
        slope: fit_slope(&x, &y),
        expected_slope: 1.0 - alpha,
        rows,
    })
}

/// Largest `ε` at which the exact ratio still reaches `target`, by bisection
/// in `log ε` over `[1e-12, min(0.1, (r₀/2)^{1/α})]`; the upper end keeps the
/// support inside `r ≥ r₀/2` and is returned as is when the target holds
/// there. Assumes the ratio decreases in `ε`; an `ε` at which the curvature is
/// no longer negative counts as missing the target. `None` when the target is
/// missed at `1e-12`.
pub fn ratio_threshold(
    alpha: f64,
    r0: f64,
    chi: &BumpFunction,
    points: usize,
    target: f64,
) -> Result<Option<f64>> {
    let ratio = |log_eps: f64| -> Result<f64> {
        let pert = ConformalPerturbation::new(log_eps.exp(), alpha, r0, chi.clone())?;
        match pinching_constants(&pert, PinchingMethod::Exact, points) {
            Ok(c) => Ok(c.ratio),
            Err(Error::InvalidParameter { name: "eps", .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };
    let mut lo = 1e-12f64.ln();
    let mut hi = 0.1f64.min((0.5 * r0).powf(1.0 / alpha)).ln();
    if ratio(lo)? < target {
        return Ok(None);
    }
    if ratio(hi)? >= target {
        return Ok(Some(hi.exp()));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo.exp()))
}

/// `(r, w, exact, leading)` on a `nr × nw` grid over the support.
pub fn curvature_grid(pert: &ConformalPerturbation, nr: usize, nw: usize) -> Vec<[f64; 4]> {
    let width = pert.width();
    let mut out = Vec::with_capacity(nr * nw);
    for i in 0..nr {
        let r = pert.r0 - width + 2.0 * width * i as f64 / (nr.max(2) - 1) as f64;
        for j in 0..nw {
            let w = j as f64 / (nw.max(2) - 1) as f64;
            out.push([r, w, exact(pert, r, w), leading(pert, r, w)]);
        }
    }
    out
}
