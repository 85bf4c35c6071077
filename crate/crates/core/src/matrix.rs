//! The periodic matrix Riccati equation `U' + U² = -K`.
//!
//! `K(t)` is a 1-periodic, symmetric, negative definite curvature matrix. The
//! unstable solution `U` is the periodic, positive definite one; it attracts
//! positive data forward in time. Its extremal eigenvalues `λ₋ ≤ λ₊` are
//! squeezed between the scalar periodic solutions `η₋` (forcing `a² f`) and
//! `η₊` (forcing `f`), where `f = λ_max(-K)` and `a² = min λ_min(-K)/λ_max(-K)`.
//! Jacobi fields `J' = U J` then grow at rates between `∫λ₋` and `∫λ₊`, and
//! `∫λ₊ ≤ (1/a) ∫λ₋` follows from the scalar theory.
//!
//! The period map of the Riccati flow is the linear-fractional action of the
//! fundamental matrix `Φ` of `(J, P)' = (P, -K J)`:
//! `U ↦ (C + D U)(A + B U)⁻¹`. [`solve_periodic_matrix`] iterates that action
//! to locate the fixed point, then iterates the directly integrated Riccati
//! period map (RK4 with re-symmetrization) until its residual is below
//! tolerance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{param, Error, Result};
use crate::linalg::{asymmetry, extremal_eigenvalues, symmetric_eigen, symmetrize};
use crate::riccati::{solve_periodic, ScalarForcing, SolverOptions};
use crate::signals::PeriodicProfile;

pub const MAX_DIM: usize = 8;

/// JSON description of a curvature field. Matrices are given by their upper
/// triangles in row-major order (`n(n+1)/2` entries) and describe `K` itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// `K(t) = mean + Σ_k cos(2πkt) cos[k-1] + sin(2πkt) sin[k-1]`.
    Trig {
        dim: usize,
        mean: Vec<f64>,
        #[serde(default)]
        cos: Vec<Vec<f64>>,
        #[serde(default)]
        sin: Vec<Vec<f64>>,
    },
    /// Samples of `K` at `t_j = j/M`, fitted by a trigonometric polynomial.
    Grid { dim: usize, samples: Vec<Vec<f64>> },
    /// `K = -diag(diag)`.
    ConstantDiag { diag: Vec<f64> },
}

fn from_upper(n: usize, entries: &[f64]) -> Result<DMatrix<f64>> {
    if entries.len() != n * (n + 1) / 2 {
        return Err(Error::InvalidProfile(format!(
            "expected {} upper-triangle entries for dimension {n}, got {}",
            n * (n + 1) / 2,
            entries.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut it = entries.iter();
    for i in 0..n {
        for j in i..n {
            let x = *it.next().expect("length checked");
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(m)
}

fn to_upper(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// A 1-periodic symmetric matrix trigonometric polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    dim: usize,
    mean: DMatrix<f64>,
    cos: Vec<DMatrix<f64>>,
    sin: Vec<DMatrix<f64>>,
}

impl CurvatureField {
    pub fn new(
        mean: DMatrix<f64>,
        mut cos: Vec<DMatrix<f64>>,
        mut sin: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = mean.nrows();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(param("dim", format!("must lie in 2..={MAX_DIM}, got {n}")));
        }
        let degree = cos.len().max(sin.len());
        cos.resize(degree, DMatrix::zeros(n, n));
        sin.resize(degree, DMatrix::zeros(n, n));
        for m in std::iter::once(&mean).chain(&cos).chain(&sin) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidProfile(
                    "coefficient matrices differ in shape".into(),
                ));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidProfile("non-finite coefficient".into()));
            }
            if asymmetry(m) > 1e-12 * (1.0 + m.norm()) {
                return Err(Error::InvalidProfile(
                    "coefficient matrix is not symmetric".into(),
                ));
            }
        }
        Ok(Self {
            dim: n,
            mean,
            cos,
            sin,
        })
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Self> {
        match spec {
            FieldSpec::Trig {
                dim,
                mean,
                cos,
                sin,
            } => {
                let mean = from_upper(*dim, mean)?;
                let cos = cos
                    .iter()
                    .map(|c| from_upper(*dim, c))
                    .collect::<Result<_>>()?;
                let sin = sin
                    .iter()
                    .map(|s| from_upper(*dim, s))
                    .collect::<Result<_>>()?;
                Self::new(mean, cos, sin)
            }
            FieldSpec::Grid { dim, samples } => {
                let mats = samples
                    .iter()
                    .map(|s| from_upper(*dim, s))
                    .collect::<Result<Vec<_>>>()?;
                Self::fit(&mats)
            }
            FieldSpec::ConstantDiag { diag } => Self::constant_diag(diag),
        }
    }

    pub fn to_spec(&self) -> FieldSpec {
        FieldSpec::Trig {
            dim: self.dim,
            mean: to_upper(&self.mean),
            cos: self.cos.iter().map(to_upper).collect(),
            sin: self.sin.iter().map(to_upper).collect(),
        }
    }

    /// Least-squares trigonometric fit of degree `⌊(M-1)/2⌋` to samples at `j/M`.
    pub fn fit(samples: &[DMatrix<f64>]) -> Result<Self> {
        let m = samples.len();
        if m == 0 {
            return Err(Error::InvalidProfile("empty field grid".into()));
        }
        let n = samples[0].nrows();
        let inv = 1.0 / m as f64;
        let mean = samples.iter().fold(DMatrix::zeros(n, n), |acc, s| acc + s) * inv;
        let degree = (m - 1) / 2;
        let mut cos = Vec::with_capacity(degree);
        let mut sin = Vec::with_capacity(degree);
        for k in 1..=degree {
            let mut c = DMatrix::zeros(n, n);
            let mut s = DMatrix::zeros(n, n);
            for (j, sample) in samples.iter().enumerate() {
                let theta = TAU * ((k * j) % m) as f64 * inv;
                c += sample * (2.0 * inv * theta.cos());
                s += sample * (2.0 * inv * theta.sin());
            }
            cos.push(c);
            sin.push(s);
        }
        Self::new(mean, cos, sin)
    }

    /// `K = -diag(d)` with every `d_i > 0`.
    pub fn constant_diag(d: &[f64]) -> Result<Self> {
        if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(param("diag", "entries must be positive"));
        }
        let mean = -DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));
        Self::new(mean, vec![], vec![])
    }

    /// `K(t) = -R(t) diag(d1, d2) R(t)ᵀ`, with `R(t)` the rotation by `2πt`.
    pub fn rotating(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d2 > 0.0) {
            return Err(param("diag", "entries must be positive"));
        }
        let mean = DMatrix::from_diagonal_element(2, 2, -(d1 + d2) / 2.0);
        let half = (d1 - d2) / 2.0;
        let zero = DMatrix::zeros(2, 2);
        let c2 = DMatrix::from_row_slice(2, 2, &[-half, 0.0, 0.0, half]);
        let s2 = DMatrix::from_row_slice(2, 2, &[0.0, -half, -half, 0.0]);
        Self::new(mean, vec![zero.clone(), c2], vec![zero, s2])
    }

    /// `K(t) = -f(t) I` for a scalar trigonometric polynomial `f`.
    pub fn conformal(dim: usize, mean: f64, cos: &[f64], sin: &[f64]) -> Result<Self> {
        let eye = DMatrix::<f64>::identity(dim, dim);
        Self::new(
            -&eye * mean,
            cos.iter().map(|c| -&eye * *c).collect(),
            sin.iter().map(|s| -&eye * *s).collect(),
        )
    }

    /// `-K(t) = I + (c/2) cos(2πt) diag(1, -1)`: the two curvatures cross at
    /// `t = 1/4` and `t = 3/4`, where `-K` is the identity.
    pub fn crossing(c: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&c.abs()) {
            return Err(param("c", "need |c| < 2 for negative definiteness"));
        }
        let mean = -DMatrix::<f64>::identity(2, 2);
        let c1 = DMatrix::from_row_slice(2, 2, &[-c / 2.0, 0.0, 0.0, c / 2.0]);
        Self::new(mean, vec![c1], vec![])
    }

    /// A random degree-2 field whose `-K` has smallest eigenvalue roughly in
    /// `[0.2, 1]`.
    pub fn random<R: Rng>(dim: usize, rng: &mut R) -> Result<Self> {
        let degree = 2;
        let sym = |rng: &mut R, scale: f64| {
            let mut m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0) * scale);
            symmetrize(&mut m);
            m
        };
        let base = sym(rng, 1.0);
        let mut cos = Vec::new();
        let mut sin = Vec::new();
        for k in 1..=degree {
            cos.push(sym(rng, 1.0 / k as f64));
            sin.push(sym(rng, 1.0 / k as f64));
        }
        let target: f64 = rng.random_range(0.2..1.0);
        let mut field = Self::new(base, cos, sin)?;
        // field currently holds P(t) = -K(t) before the shift
        let mut shift = target - field.min_eigenvalue(512);
        loop {
            let eye = DMatrix::<f64>::identity(dim, dim);
            let shifted = Self::new(
                &field.mean + &eye * shift,
                field.cos.clone(),
                field.sin.clone(),
            )?;
            let low = shifted.min_eigenvalue(4096);
            if low >= 0.5 * target {
                field = shifted.negated();
                break;
            }
            shift += target - low;
        }
        Ok(field)
    }

    /// The `index`-th field for `seed`, each on its own ChaCha stream.
    pub fn random_seeded(dim: usize, seed: u64, index: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self::random(dim, &mut rng)
    }

    fn negated(&self) -> Self {
        Self {
            dim: self.dim,
            mean: -&self.mean,
            cos: self.cos.iter().map(|m| -m).collect(),
            sin: self.sin.iter().map(|m| -m).collect(),
        }
    }

    fn min_eigenvalue(&self, samples: usize) -> f64 {
        self.sample(samples)
            .iter()
            .map(|m| extremal_eigenvalues(m).0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    pub fn evaluate(&self, t: f64) -> DMatrix<f64> {
        let mut k = self.mean.clone();
        for (i, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
            let theta = TAU * (i + 1) as f64 * t;
            k += c * theta.cos() + s * theta.sin();
        }
        k
    }

    /// `K(j/m)` for `j = 0..m`.
    pub fn sample(&self, m: usize) -> Vec<DMatrix<f64>> {
        (0..m)
            .map(|j| {
                let mut k = self.mean.clone();
                for (i, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
                    let theta = TAU * (((i + 1) * j) % m) as f64 / m as f64;
                    k += c * theta.cos() + s * theta.sin();
                }
                k
            })
            .collect()
    }
}

/// Pinching constant and scalar envelope of `-K` on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PinchingData {
    /// `min_t √(λ_min(-K)/λ_max(-K))`.
    pub a: f64,
    /// `f(t) = λ_max(-K(t))` as a grid profile.
    pub f: PeriodicProfile,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
}

impl PinchingData {
    pub fn new(field: &CurvatureField, samples: usize) -> Result<Self> {
        Self::from_samples(&field.sample(samples))
    }

    fn from_samples(ks: &[DMatrix<f64>]) -> Result<Self> {
        let m = ks.len();
        let mut lambda_min = Vec::with_capacity(m);
        let mut lambda_max = Vec::with_capacity(m);
        for (j, k) in ks.iter().enumerate() {
            let (lo, hi) = extremal_eigenvalues(&-k);
            if !(lo > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "-K is not positive definite at t = {} (smallest eigenvalue {lo})",
                    j as f64 / m as f64
                )));
            }
            lambda_min.push(lo);
            lambda_max.push(hi);
        }
        let a = lambda_min
            .iter()
            .zip(&lambda_max)
            .map(|(lo, hi)| (lo / hi).sqrt())
            .fold(1.0f64, f64::min);
        let f = PeriodicProfile::grid(lambda_max.clone())?;
        Ok(Self {
            a,
            f,
            lambda_min,
            lambda_max,
        })
    }

    /// Largest violation of `a² f ≤ ⟨-K v, v⟩ ≤ f` over `directions` seeded
    /// unit vectors at every `stride`-th grid point.
    pub fn quadratic_form_violation(
        &self,
        field: &CurvatureField,
        directions: usize,
        stride: usize,
    ) -> f64 {
        let n = field.dim();
        let m = self.lambda_max.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dirs: Vec<nalgebra::DVector<f64>> = (0..directions)
            .map(|_| {
                let v = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                v.normalize()
            })
            .collect();
        let mut worst = 0.0f64;
        for j in (0..m).step_by(stride.max(1)) {
            let neg_k = -field.evaluate(j as f64 / m as f64);
            let f = self.lambda_max[j];
            for v in &dirs {
                let q = v.dot(&(&neg_k * v));
                worst = worst.max(self.a * self.a * f - q).max(q - f);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixOptions {
    pub steps: usize,
    /// Target Frobenius residual of the direct period map.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed after a loss of positive definiteness.
    pub max_halvings: usize,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self {
            steps: 8192,
            tol: 1e-10,
            max_iter: 200,
            max_halvings: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPeriodicSolution {
    pub dim: usize,
    pub steps: usize,
    pub step: f64,
    /// `U(t_i)` for `t_i = i/steps`, `i = 0..steps`.
    pub values: Vec<DMatrix<f64>>,
    /// `‖U(1) - U(0)‖_F` for the returned `U(0)`.
    pub residual: f64,
    /// Direct period-map iterations after the linear-fractional stage.
    pub iterations: usize,
    pub mobius_iterations: usize,
    pub lambda_minus: Vec<f64>,
    pub lambda_plus: Vec<f64>,
    /// Largest `‖U - Uᵀ‖_F` before re-symmetrization.
    pub symmetry_drift: f64,
}

impl MatrixPeriodicSolution {
    pub fn symmetry_error(&self) -> f64 {
        self.values.iter().map(asymmetry).fold(0.0, f64::max)
    }

    pub fn int_lambda_minus(&self) -> f64 {
        self.lambda_minus.iter().sum::<f64>() / self.lambda_minus.len() as f64
    }

    pub fn int_lambda_plus(&self) -> f64 {
        self.lambda_plus.iter().sum::<f64>() / self.lambda_plus.len() as f64
    }

    pub fn is_positive_definite(&self) -> bool {
        self.values.iter().all(|u| u.clone().cholesky().is_some())
    }
}

fn riccati_rhs(u: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    -(k + u * u)
}

struct PeriodRun {
    end: DMatrix<f64>,
    values: Vec<DMatrix<f64>>,
    drift: f64,
}

/// One period of RK4 on `U' = -K - U²`; `ks` holds `K` at half-step nodes.
fn riccati_period(
    ks: &[DMatrix<f64>],
    steps: usize,
    u0: &DMatrix<f64>,
    record: bool,
) -> Result<PeriodRun> {
    let dt = 1.0 / steps as f64;
    let mut u = u0.clone();
    let mut values = Vec::with_capacity(if record { steps } else { 0 });
    let mut drift = 0.0f64;
    for i in 0..steps {
        if record {
            values.push(u.clone());
        }
        let (k0, km, k1) = (&ks[2 * i], &ks[2 * i + 1], &ks[(2 * i + 2) % ks.len()]);
        let d1 = riccati_rhs(&u, k0);
        let d2 = riccati_rhs(&(&u + &d1 * (0.5 * dt)), km);
        let d3 = riccati_rhs(&(&u + &d2 * (0.5 * dt)), km);
        let d4 = riccati_rhs(&(&u + &d3 * dt), k1);
        u += (d1 + d2 * 2.0 + d3 * 2.0 + d4) * (dt / 6.0);
        drift = drift.max(asymmetry(&u));
        symmetrize(&mut u);
        if u.iter().any(|x| !x.is_finite()) || u.clone().cholesky().is_none() {
            return Err(Error::PositivityLost {
                t: (i + 1) as f64 * dt,
                detail: "U left the positive definite cone".into(),
            });
        }
    }
    Ok(PeriodRun {
        end: u,
        values,
        drift,
    })
}

/// RK4 for `(J, P)' = (P, -K J)` over one period from `(j0, p0)`.
fn jacobi_step(
    j: &mut DMatrix<f64>,
    p: &mut DMatrix<f64>,
    k0: &DMatrix<f64>,
    km: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    dt: f64,
) {
    let f = |jj: &DMatrix<f64>, pp: &DMatrix<f64>, k: &DMatrix<f64>| (pp.clone(), -(k * jj));
    let (a1, b1) = f(j, p, k0);
    let (a2, b2) = f(&(&*j + &a1 * (0.5 * dt)), &(&*p + &b1 * (0.5 * dt)), km);
    let (a3, b3) = f(&(&*j + &a2 * (0.5 * dt)), &(&*p + &b2 * (0.5 * dt)), km);
    let (a4, b4) = f(&(&*j + &a3 * dt), &(&*p + &b3 * dt), k1);
    *j += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    *p += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (dt / 6.0);
}

/// Blocks `(A, B, C, D)` of the period-one fundamental matrix of `(J, P)`.
fn fundamental(ks: &[DMatrix<f64>], steps: usize, n: usize) -> [DMatrix<f64>; 4] {
    let dt = 1.0 / steps as f64;
    let mut j = DMatrix::from_fn(n, 2 * n, |r, c| if r == c { 1.0 } else { 0.0 });
    let mut p = DMatrix::from_fn(n, 2 * n, |r, c| if r + n == c { 1.0 } else { 0.0 });
    for i in 0..steps {
        jacobi_step(
            &mut j,
            &mut p,
            &ks[2 * i],
            &ks[2 * i + 1],
            &ks[(2 * i + 2) % ks.len()],
            dt,
        );
    }
    [
        j.columns(0, n).into_owned(),
        j.columns(n, n).into_owned(),
        p.columns(0, n).into_owned(),
        p.columns(n, n).into_owned(),
    ]
}

/// `U ↦ (C + D U)(A + B U)⁻¹` iterated to a fixed point.
fn mobius_fixed_point(
    phi: &[DMatrix<f64>; 4],
    start: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, usize)> {
    let [a, b, c, d] = phi;
    let mut u = start.clone();
    for it in 1..=2000 {
        let x = a + b * &u;
        let y = c + d * &u;
        // U X = Y  <=>  Xᵀ Uᵀ = Yᵀ
        let mut next = x.transpose().lu().solve(&y.transpose())?.transpose();
        symmetrize(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let change = (&next - &u).norm();
        u = next;
        if change <= 1e-15 * (1.0 + u.norm()) {
            return Some((u, it));
        }
    }
    Some((u, 2000))
}

fn solve_with_steps(
    field: &CurvatureField,
    steps: usize,
    opts: &MatrixOptions,
) -> Result<MatrixPeriodicSolution> {
    let n = field.dim();
    let ks = field.sample(2 * steps);
    let top = ks
        .iter()
        .map(|k| extremal_eigenvalues(&-k).1)
        .fold(0.0f64, f64::max);
    let start = DMatrix::<f64>::identity(n, n) * top.sqrt();
    let phi = fundamental(&ks, steps, n);
    let (mut u, mobius_iterations) = match mobius_fixed_point(&phi, &start) {
        Some((u, it)) if u.clone().cholesky().is_some() => (u, it),
        _ => (start, 0),
    };
    let mut residual = f64::INFINITY;
    let mut drift = 0.0f64;
    for iteration in 0..opts.max_iter {
        let run = riccati_period(&ks, steps, &u, false)?;
        drift = drift.max(run.drift);
        residual = (&run.end - &u).norm();
        if residual < opts.tol {
            let run = riccati_period(&ks, steps, &u, true)?;
            let (lambda_minus, lambda_plus) = eigen_tracks(&run.values);
            return Ok(MatrixPeriodicSolution {
                dim: n,
                steps,
                step: 1.0 / steps as f64,
                values: run.values,
                residual,
                iterations: iteration + 1,
                mobius_iterations,
                lambda_minus,
                lambda_plus,
                symmetry_drift: drift.max(run.drift),
            });
        }
        u = run.end;
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual,
    })
}

/// The periodic positive definite solution of `U' + U² = -K`.
pub fn solve_periodic_matrix(
    field: &CurvatureField,
    opts: &MatrixOptions,
) -> Result<MatrixPeriodicSolution> {
    if opts.steps < 2 {
        return Err(param("steps", "need at least two steps per period"));
    }
    let mut steps = opts.steps;
    for attempt in 0..=opts.max_halvings {
        match solve_with_steps(field, steps, opts) {
            Err(Error::PositivityLost { .. }) if attempt < opts.max_halvings => steps *= 2,
            other => return other,
        }
    }
    unreachable!("loop returns on the last attempt")
}

fn eigen_tracks(values: &[DMatrix<f64>]) -> (Vec<f64>, Vec<f64>) {
    values.iter().map(extremal_eigenvalues).unzip()
}

/// Pointwise smallest and largest eigenvalues of `U(t_i)`.
pub fn extremal_eigen_tracks(sol: &MatrixPeriodicSolution) -> (Vec<f64>, Vec<f64>) {
    eigen_tracks(&sol.values)
}

/// Largest `|d/dt tr U + tr U² - tr(-K)|` on the grid, with a centered
/// difference for the derivative.
pub fn trace_identity_error(field: &CurvatureField, sol: &MatrixPeriodicSolution) -> f64 {
    let n = sol.values.len();
    let ks = field.sample(n);
    (0..n)
        .map(|i| {
            let next = sol.values[(i + 1) % n].trace();
            let prev = sol.values[(i + n - 1) % n].trace();
            let u = &sol.values[i];
            let derivative = (next - prev) / (2.0 * sol.step);
            (derivative + (u * u).trace() + ks[i].trace()).abs()
        })
        .fold(0.0, f64::max)
}

/// Growth rates of Jacobi fields with `J(0) = I`, `J' = P`, `P(0) = U(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiEstimate {
    pub periods: usize,
    /// `(1/m) log σ_min(J(m))`.
    pub lyap_minus: f64,
    /// `(1/m) log σ_max(J(m))`.
    pub lyap_plus: f64,
    /// Largest excursion of `log(‖J v‖/‖v‖)` outside `[t∫λ₋, t∫λ₊]` at whole periods.
    pub gronwall_violation: f64,
    /// Largest `‖P J⁻¹ - U‖_F` over the first period.
    pub consistency_error: f64,
}

pub fn jacobi_exponents(
    field: &CurvatureField,
    sol: &MatrixPeriodicSolution,
    periods: usize,
) -> Result<JacobiEstimate> {
    if periods == 0 {
        return Err(param("periods", "need at least one period"));
    }
    let n = sol.dim;
    let steps = sol.steps;
    let dt = sol.step;
    let ks = field.sample(2 * steps);
    let (lo, hi) = (sol.int_lambda_minus(), sol.int_lambda_plus());

    let mut j = DMatrix::<f64>::identity(n, n);
    let mut p = sol.values[0].clone();
    let mut log_scale = 0.0;
    let mut consistency = 0.0f64;
    let mut gronwall = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut dirs: Vec<nalgebra::DVector<f64>> = (0..n)
        .map(|i| nalgebra::DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    dirs.extend(
        (0..8)
            .map(|_| nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize()),
    );

    for period in 0..periods {
        for i in 0..steps {
            if period == 0 {
                let inv = j
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::PositivityLost {
                        t: i as f64 * dt,
                        detail: "Jacobi matrix became singular".into(),
                    })?;
                consistency = consistency.max((&p * inv - &sol.values[i]).norm());
            }
            jacobi_step(
                &mut j,
                &mut p,
                &ks[2 * i],
                &ks[2 * i + 1],
                &ks[(2 * i + 2) % ks.len()],
                dt,
            );
        }
        let elapsed = (period + 1) as f64;
        for v in &dirs {
            let growth = (&j * v).norm().ln() + log_scale;
            gronwall = gronwall
                .max(elapsed * lo - growth)
                .max(growth - elapsed * hi);
        }
        let s = j.norm();
        j /= s;
        p /= s;
        log_scale += s.ln();
    }
    let jtj = j.transpose() * &j;
    let sigma_max = symmetric_eigen(&jtj).0[n - 1].sqrt();
    let inv = j
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::PositivityLost {
            t: periods as f64,
            detail: "Jacobi matrix became singular".into(),
        })?;
    let inv_t_inv = inv.transpose() * &inv;
    let sigma_min = 1.0 / symmetric_eigen(&inv_t_inv).0[n - 1].sqrt();
    let m = periods as f64;
    Ok(JacobiEstimate {
        periods,
        lyap_minus: (sigma_min.ln() + log_scale) / m,
        lyap_plus: (sigma_max.ln() + log_scale) / m,
        gronwall_violation: gronwall.max(0.0),
        consistency_error: consistency,
    })
}

/// Outcome of the full bunching pipeline on one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub dim: usize,
    pub a: f64,
    pub int_lambda_minus: f64,
    pub int_lambda_plus: f64,
    pub bunching_ratio: f64,
    pub one_over_a: f64,
    pub lyap_minus: f64,
    pub lyap_plus: f64,
    pub residual: f64,
    pub periods: usize,
    /// Largest excursion of `λ±` outside `[η₋, η₊]`.
    pub sandwich_violation: f64,
    /// Largest excursion of the exponents outside `[∫λ₋, ∫λ₊]`.
    pub exponent_bracket_violation: f64,
    pub gronwall_violation: f64,
    pub consistency_error: f64,
    pub trace_identity_error: f64,
    pub symmetry_error: f64,
    pub pass: bool,
}

pub const BUNCHING_TOL: f64 = 1e-6;
pub const SANDWICH_TOL: f64 = 1e-7;
pub const EXPONENT_TOL: f64 = 1e-6;
pub const CONSISTENCY_TOL: f64 = 1e-7;

/// Pinching data, matrix solve, eigen tracks, scalar comparison and Jacobi
/// exponents for one field.
pub fn bunching_check(
    field: &CurvatureField,
    opts: &MatrixOptions,
    periods: usize,
) -> Result<LyapunovReport> {
    let sol = solve_periodic_matrix(field, opts)?;
    let pinching = PinchingData::new(field, 2 * sol.steps)?;
    let a = pinching.a;
    let forcing = ScalarForcing::new(pinching.f.clone());
    let scalar_opts = SolverOptions {
        steps: sol.steps,
        ..SolverOptions::default()
    };
    let eta_plus = solve_periodic(&forcing, 1.0, &scalar_opts)?;
    let eta_minus = solve_periodic(&forcing, a, &scalar_opts)?;
    let sandwich_violation = (0..sol.steps)
        .map(|i| {
            (eta_minus.values[i] - sol.lambda_minus[i])
                .max(sol.lambda_plus[i] - eta_plus.values[i])
                .max(0.0)
        })
        .fold(0.0, f64::max);
    let jac = jacobi_exponents(field, &sol, periods)?;
    let (lo, hi) = (sol.int_lambda_minus(), sol.int_lambda_plus());
    let exponent_bracket_violation = (lo - jac.lyap_minus).max(jac.lyap_plus - hi).max(0.0);
    let bunching_ratio = hi / lo;
    let mut report = LyapunovReport {
        dim: sol.dim,
        a,
        int_lambda_minus: lo,
        int_lambda_plus: hi,
        bunching_ratio,
        one_over_a: 1.0 / a,
        lyap_minus: jac.lyap_minus,
        lyap_plus: jac.lyap_plus,
        residual: sol.residual,
        periods,
        sandwich_violation,
        exponent_bracket_violation,
        gronwall_violation: jac.gronwall_violation,
        consistency_error: jac.consistency_error,
        trace_identity_error: trace_identity_error(field, &sol),
        symmetry_error: sol.symmetry_error(),
        pass: false,
    };
    report.pass = report.bunching_ratio <= report.one_over_a + BUNCHING_TOL
        && report.sandwich_violation <= SANDWICH_TOL
        && report.exponent_bracket_violation <= EXPONENT_TOL
        && report.gronwall_violation <= EXPONENT_TOL
        && report.consistency_error <= CONSISTENCY_TOL
        && report.residual <= 1e-9
        && 0.0 < report.lyap_minus
        && report.lyap_minus <= report.lyap_plus + 1e-12;
    Ok(report)
}

/// Bunching checks on `count` seeded random fields. With `dim = None` the
/// dimension alternates between 2 and 3.
pub fn matrix_fuzz(
    dim: Option<usize>,
    count: usize,
    seed: u64,
    opts: &MatrixOptions,
    periods: usize,
) -> Result<Vec<(CurvatureField, LyapunovReport)>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let d = dim.unwrap_or(2 + i % 2);
            let field = CurvatureField::random_seeded(d, seed, i as u64)?;
            let report = bunching_check(&field, opts, periods)?;
            Ok((field, report))
        })
        .collect()
}
