//! Numerical experiments around periodic Riccati equations and curvature pinching.
//!
//! The crate is organised by capability:
//!
//! - [`signals`]: positive 1-periodic profiles (step, trigonometric, gridded) and their calculus.
//! - [`inequality`]: the integral inequality `h(1 - e^{-1/h}) <= ∫μ(τ)² ∫e^{-W(τ,t)/h}`
//!   checked by quadrature, by closed form for step profiles, and by seeded fuzzing.
//! - [`riccati`]: the positive periodic solution of `λ' + λ² = a² f`, the functional
//!   `Λ(a) = ∫λ_a`, and the derivative `∂_h μ_h` used to show `Λ(a)/a` is non-increasing.
//! - [`matrix`]: the periodic matrix Riccati equation `U' + U² = -K`, eigenvalue tracks,
//!   Jacobi-field exponents and the bunching estimate `λ₊ᵘ <= λ₋ᵘ / a`.
//! - [`ghk`]: the step-forcing example with closed-form tanh/coth solutions, contrasting
//!   pointwise and averaged ratios.
//! - [`pinching`]: sectional curvature of a conformally perturbed hyperbolic metric and
//!   its relative versus global pinching constants.
//! - [`cli`]: the `pinchlab` command-line front end and its report formats.

pub mod cli;
pub mod error;
pub mod ghk;
pub mod inequality;
pub mod linalg;
pub mod matrix;
pub mod pinching;
pub mod quadrature;
pub mod riccati;
pub mod signals;

pub use error::{Error, Result};
