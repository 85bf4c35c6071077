//! Positive 1-periodic scalar profiles.
//!
//! A [`PeriodicProfile`] is one of three representations:
//!
//! - piecewise constant, values `C_j` on consecutive intervals of lengths `ε_j`;
//! - a trigonometric polynomial `c₀ + Σ_k (a_k cos 2πkt + b_k sin 2πkt)`;
//! - samples on a uniform grid of size `M`, linearly interpolated.
//!
//! The cumulative integral `M(t) = ∫₀ᵗ μ` is exact for every representation
//! (for grids it is the exact integral of the interpolant) and extends to all
//! real `t` by `M(t + 1) = M(t) + mean`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid used to estimate extrema of trigonometric profiles.
pub const DENSE_GRID: usize = 4096;

const LENGTH_TOL: f64 = 1e-12;

/// Serializable description of a profile, the JSON form `{"kind": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    Step {
        values: Vec<f64>,
        lengths: Vec<f64>,
    },
    Trig {
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Grid {
        samples: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Step {
        values: Vec<f64>,
        lengths: Vec<f64>,
        /// `starts[j]` is the left end of interval `j`; `starts[N] == 1`.
        starts: Vec<f64>,
        /// `prefix[j] = M(starts[j])`.
        prefix: Vec<f64>,
    },
    Trig {
        mean: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    Grid {
        samples: Vec<f64>,
        /// `prefix[i] = M(i / len)`.
        prefix: Vec<f64>,
    },
}

/// A strictly positive 1-periodic function. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicProfile {
    repr: Repr,
    mean: f64,
    min: f64,
    max: f64,
}

fn wrap(t: f64) -> f64 {
    let s = t.rem_euclid(1.0);
    if s >= 1.0 {
        0.0
    } else {
        s
    }
}

fn check_finite(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!(
            "{name} contains a non-finite entry"
        )))
    }
}

impl PeriodicProfile {
    pub fn constant(value: f64) -> Result<Self> {
        Self::step(vec![value], vec![1.0])
    }

    /// Piecewise-constant profile. Lengths must be positive and sum to 1.
    pub fn step(values: Vec<f64>, lengths: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != lengths.len() {
            return Err(Error::InvalidProfile(format!(
                "step profile needs matching non-empty values/lengths (got {} and {})",
                values.len(),
                lengths.len()
            )));
        }
        check_finite("values", &values)?;
        check_finite("lengths", &lengths)?;
        if let Some(l) = lengths.iter().find(|l| **l <= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "non-positive interval length {l}"
            )));
        }
        let total: f64 = lengths.iter().sum();
        if (total - 1.0).abs() > LENGTH_TOL {
            return Err(Error::InvalidProfile(format!(
                "interval lengths sum to {total}, expected 1"
            )));
        }
        let n = values.len();
        let mut starts = Vec::with_capacity(n + 1);
        let mut prefix = Vec::with_capacity(n + 1);
        let (mut s, mut m) = (0.0, 0.0);
        for (v, l) in values.iter().zip(&lengths) {
            starts.push(s);
            prefix.push(m);
            s += l;
            m += v * l;
        }
        starts.push(1.0);
        prefix.push(m);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::finish(
            Repr::Step {
                values,
                lengths,
                starts,
                prefix,
            },
            m,
            min,
            max,
        )
    }

    /// `mean + Σ_k cos[k-1]·cos(2πkt) + sin[k-1]·sin(2πkt)`.
    pub fn trig(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        check_finite("cos", &cos)?;
        check_finite("sin", &sin)?;
        if !mean.is_finite() {
            return Err(Error::InvalidProfile("non-finite mean".into()));
        }
        let repr = Repr::Trig { mean, cos, sin };
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..DENSE_GRID {
            let v = eval_trig(&repr, i as f64 / DENSE_GRID as f64);
            min = min.min(v);
            max = max.max(v);
        }
        Self::finish(repr, mean, min, max)
    }

    /// Uniform-grid samples `μ(i/M)`, linearly interpolated and wrapped periodically.
    pub fn grid(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidProfile(
                "grid needs at least two samples".into(),
            ));
        }
        check_finite("samples", &samples)?;
        let m = samples.len();
        let dt = 1.0 / m as f64;
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        for i in 0..m {
            prefix.push(acc);
            acc += 0.5 * dt * (samples[i] + samples[(i + 1) % m]);
        }
        prefix.push(acc);
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::finish(Repr::Grid { samples, prefix }, acc, min, max)
    }

    /// Samples `f` on a uniform grid of `m` points.
    pub fn sampled<F: Fn(f64) -> f64>(m: usize, f: F) -> Result<Self> {
        Self::grid((0..m).map(|i| f(i as f64 / m as f64)).collect())
    }

    fn finish(repr: Repr, mean: f64, min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "profile must be strictly positive (minimum {min})"
            )));
        }
        Ok(Self {
            repr,
            mean,
            min,
            max,
        })
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self> {
        match spec {
            ProfileSpec::Constant { value } => Self::constant(*value),
            ProfileSpec::Step { values, lengths } => Self::step(values.clone(), lengths.clone()),
            ProfileSpec::Trig { mean, cos, sin } => Self::trig(*mean, cos.clone(), sin.clone()),
            ProfileSpec::Grid { samples } => Self::grid(samples.clone()),
        }
    }

    pub fn to_spec(&self) -> ProfileSpec {
        match &self.repr {
            Repr::Step {
                values, lengths, ..
            } if values.len() == 1 => {
                let _ = lengths;
                ProfileSpec::Constant { value: values[0] }
            }
            Repr::Step {
                values, lengths, ..
            } => ProfileSpec::Step {
                values: values.clone(),
                lengths: lengths.clone(),
            },
            Repr::Trig { mean, cos, sin } => ProfileSpec::Trig {
                mean: *mean,
                cos: cos.clone(),
                sin: sin.clone(),
            },
            Repr::Grid { samples, .. } => ProfileSpec::Grid {
                samples: samples.clone(),
            },
        }
    }

    /// Value at `t` (taken mod 1). At a step breakpoint this is the right limit.
    pub fn evaluate(&self, t: f64) -> f64 {
        let s = wrap(t);
        match &self.repr {
            Repr::Step { values, starts, .. } => values[step_index(starts, s)],
            repr @ Repr::Trig { .. } => eval_trig(repr, s),
            Repr::Grid { samples, .. } => {
                let (i, frac) = grid_cell(samples.len(), s);
                let j = (i + 1) % samples.len();
                samples[i] + (samples[j] - samples[i]) * frac
            }
        }
    }

    /// Left limit at `t`. Differs from [`evaluate`](Self::evaluate) only at step breakpoints.
    pub fn evaluate_left(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Step { values, starts, .. } => {
                let s = wrap(t);
                let k = starts.partition_point(|&x| x < s);
                if k == 0 {
                    values[values.len() - 1]
                } else {
                    values[(k - 1).min(values.len() - 1)]
                }
            }
            _ => self.evaluate(t),
        }
    }

    /// `M(t) = ∫₀ᵗ μ`, exact, valid for every real `t`.
    pub fn cumulative_at(&self, t: f64) -> f64 {
        let n = t.floor();
        let s = t - n;
        let (n, s) = if s >= 1.0 { (n + 1.0, 0.0) } else { (n, s) };
        n * self.mean + self.cumulative_in_period(s)
    }

    fn cumulative_in_period(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Step {
                values,
                starts,
                prefix,
                ..
            } => {
                let j = step_index(starts, s);
                prefix[j] + values[j] * (s - starts[j])
            }
            Repr::Trig { mean, cos, sin } => {
                let (s1, c1) = (TAU * s).sin_cos();
                let (mut sk, mut ck) = (s1, c1);
                let mut acc = mean * s;
                let degree = cos.len().max(sin.len());
                for k in 1..=degree {
                    let a = cos.get(k - 1).copied().unwrap_or(0.0);
                    let b = sin.get(k - 1).copied().unwrap_or(0.0);
                    acc += (a * sk + b * (1.0 - ck)) / (TAU * k as f64);
                    let next_s = sk * c1 + ck * s1;
                    ck = ck * c1 - sk * s1;
                    sk = next_s;
                }
                acc
            }
            Repr::Grid { samples, prefix } => {
                let m = samples.len();
                let (i, frac) = grid_cell(m, s);
                let dt = 1.0 / m as f64;
                let y0 = samples[i];
                let y1 = samples[(i + 1) % m];
                prefix[i] + dt * frac * (y0 + 0.5 * (y1 - y0) * frac)
            }
        }
    }

    /// View of the cumulative integral with window arithmetic.
    pub fn cumulative(&self) -> CumulativeIntegral<'_> {
        CumulativeIntegral { profile: self }
    }

    /// `∫₀¹ μ`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `∫₀¹ μ²`: exact for step and trig, periodic trapezoid for grids.
    pub fn mean_square(&self) -> f64 {
        match &self.repr {
            Repr::Step {
                values, lengths, ..
            } => values.iter().zip(lengths).map(|(v, l)| v * v * l).sum(),
            Repr::Trig { mean, cos, sin } => {
                mean * mean + 0.5 * cos.iter().chain(sin).map(|c| c * c).sum::<f64>()
            }
            Repr::Grid { samples, .. } => {
                samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        self.min
    }

    pub fn max_value(&self) -> f64 {
        self.max
    }

    /// Interval starts of a step profile, `None` for smooth representations.
    pub fn breakpoints(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Step { starts, .. } => Some(&starts[..starts.len() - 1]),
            _ => None,
        }
    }

    /// Step values and lengths, if this is a step profile.
    pub fn step_parts(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            Repr::Step {
                values, lengths, ..
            } => Some((values, lengths)),
            _ => None,
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.repr, Repr::Grid { .. })
    }

    /// Number of pieces (step), degree (trig) or samples (grid).
    pub fn size(&self) -> usize {
        match &self.repr {
            Repr::Step { values, .. } => values.len(),
            Repr::Trig { cos, sin, .. } => cos.len().max(sin.len()),
            Repr::Grid { samples, .. } => samples.len(),
        }
    }

    /// `μ(· + shift)`. Exact for step and trig; grids are re-interpolated.
    pub fn shifted(&self, shift: f64) -> Self {
        let shift = wrap(shift);
        let repr = match &self.repr {
            Repr::Step {
                values,
                lengths,
                starts,
                ..
            } => {
                if shift == 0.0 {
                    return self.clone();
                }
                let j = step_index(starts, shift);
                let n = values.len();
                let mut vals = Vec::with_capacity(n + 1);
                let mut lens = Vec::with_capacity(n + 1);
                let head = starts[j + 1] - shift;
                vals.push(values[j]);
                lens.push(head);
                for k in 1..n {
                    let i = (j + k) % n;
                    vals.push(values[i]);
                    lens.push(lengths[i]);
                }
                let tail = shift - starts[j];
                if tail > 0.0 {
                    vals.push(values[j]);
                    lens.push(tail);
                }
                // absorb rounding so lengths sum to 1
                let total: f64 = lens.iter().sum();
                let last = lens.len() - 1;
                lens[last] += 1.0 - total;
                return Self::step(vals, lens).expect("rotation of a valid step profile");
            }
            Repr::Trig { mean, cos, sin } => {
                let degree = cos.len().max(sin.len());
                let mut c2 = Vec::with_capacity(degree);
                let mut s2 = Vec::with_capacity(degree);
                for k in 1..=degree {
                    let a = cos.get(k - 1).copied().unwrap_or(0.0);
                    let b = sin.get(k - 1).copied().unwrap_or(0.0);
                    let (sp, cp) = (TAU * k as f64 * shift).sin_cos();
                    c2.push(a * cp + b * sp);
                    s2.push(b * cp - a * sp);
                }
                Repr::Trig {
                    mean: *mean,
                    cos: c2,
                    sin: s2,
                }
            }
            Repr::Grid { samples, .. } => {
                let m = samples.len();
                return Self::sampled(m, |t| self.evaluate(t + shift))
                    .expect("shift of a positive grid stays positive");
            }
        };
        Self::finish(repr, self.mean, self.min, self.max).expect("shift preserves positivity")
    }

    /// `α·μ` for `α > 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("scale must be positive, got {alpha}"),
            });
        }
        match &self.repr {
            Repr::Step {
                values, lengths, ..
            } => Self::step(values.iter().map(|v| v * alpha).collect(), lengths.clone()),
            Repr::Trig { mean, cos, sin } => Self::trig(
                mean * alpha,
                cos.iter().map(|v| v * alpha).collect(),
                sin.iter().map(|v| v * alpha).collect(),
            ),
            Repr::Grid { samples, .. } => Self::grid(samples.iter().map(|v| v * alpha).collect()),
        }
    }

    /// Rescaled copy with average exactly 1 (up to rounding).
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.mean)
            .expect("mean of a positive profile is positive")
    }
}

fn step_index(starts: &[f64], s: f64) -> usize {
    let n = starts.len() - 1;
    starts
        .partition_point(|&x| x <= s)
        .saturating_sub(1)
        .min(n - 1)
}

fn grid_cell(m: usize, s: f64) -> (usize, f64) {
    let x = s * m as f64;
    let i = (x.floor() as usize).min(m - 1);
    (i, x - i as f64)
}

fn eval_trig(repr: &Repr, s: f64) -> f64 {
    let Repr::Trig { mean, cos, sin } = repr else {
        unreachable!()
    };
    let (s1, c1) = (TAU * s).sin_cos();
    let (mut sk, mut ck) = (s1, c1);
    let mut acc = *mean;
    let degree = cos.len().max(sin.len());
    for k in 0..degree {
        acc += cos.get(k).copied().unwrap_or(0.0) * ck + sin.get(k).copied().unwrap_or(0.0) * sk;
        let next_s = sk * c1 + ck * s1;
        ck = ck * c1 - sk * s1;
        sk = next_s;
    }
    acc
}

/// `t ↦ ∫₀ᵗ μ` for a fixed profile.
#[derive(Clone, Copy, Debug)]
pub struct CumulativeIntegral<'a> {
    profile: &'a PeriodicProfile,
}

impl CumulativeIntegral<'_> {
    pub fn at(&self, t: f64) -> f64 {
        self.profile.cumulative_at(t)
    }

    pub fn mean(&self) -> f64 {
        self.profile.mean
    }

    /// `∫_τ^{τ+t} μ` for `t >= 0`.
    pub fn window(&self, tau: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("window length must be non-negative, got {t}"),
            });
        }
        Ok(self.window_unchecked(tau, t))
    }

    pub(crate) fn window_unchecked(&self, tau: f64, t: f64) -> f64 {
        self.profile.cumulative_at(tau + t) - self.profile.cumulative_at(tau)
    }
}

/// Piecewise-constant profile with `Σ ε_j = 1` and `Σ C_j ε_j = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    values: Vec<f64>,
    lengths: Vec<f64>,
}

impl StepProfile {
    pub fn new(values: Vec<f64>, lengths: Vec<f64>) -> Result<Self> {
        // reuse the positivity / length checks
        let profile = PeriodicProfile::step(values.clone(), lengths.clone())?;
        if (profile.mean() - 1.0).abs() > LENGTH_TOL {
            return Err(Error::NotNormalized {
                average: profile.mean(),
            });
        }
        Ok(Self { values, lengths })
    }

    /// Builds the well-distributed profile `C_j ∝ raw_j`, `ε_j = 1/(N C_j)`.
    pub fn well_distributed(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() || raw.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidProfile(
                "well-distributed profile needs positive finite values".into(),
            ));
        }
        let n = raw.len() as f64;
        let harmonic = raw.iter().map(|c| 1.0 / c).sum::<f64>() / n;
        let values: Vec<f64> = raw.iter().map(|c| c * harmonic).collect();
        let mut lengths: Vec<f64> = values.iter().map(|c| 1.0 / (n * c)).collect();
        let total: f64 = lengths.iter().sum();
        lengths.iter_mut().for_each(|l| *l /= total);
        Self::new(values, lengths)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `C_j ε_j = 1/N` for every `j`, within 1e-12.
    pub fn is_well_distributed(&self) -> bool {
        let target = 1.0 / self.values.len() as f64;
        self.values
            .iter()
            .zip(&self.lengths)
            .all(|(c, e)| (c * e - target).abs() <= LENGTH_TOL)
    }

    pub fn to_profile(&self) -> PeriodicProfile {
        PeriodicProfile::step(self.values.clone(), self.lengths.clone())
            .expect("validated on construction")
    }

    /// Recovers a step profile from a normalized piecewise-constant [`PeriodicProfile`].
    pub fn from_profile(profile: &PeriodicProfile) -> Result<Self> {
        let (values, lengths) = profile
            .step_parts()
            .ok_or_else(|| Error::InvalidProfile("not a piecewise-constant profile".into()))?;
        Self::new(values.to_vec(), lengths.to_vec())
    }
}
