//! Finite-time quenching of a stochastic nonlocal parabolic equation.
//!
//! The crate simulates
//!
//! ```text
//! du = ( -(-Δ)^α u + λ/(1-u)² - γ(1-u) ) dt + (1-u) dN_t,   x ∈ (-1, 1)
//! u = 0 outside (-1, 1)
//! ```
//!
//! driven by the mixed noise `N_t = ∫ κ1 a dB + ∫ κ2 b dB^H` (a Brownian motion
//! plus an independent fractional Brownian motion with Hurst index `H > 1/2`),
//! estimates quenching probabilities and quenching-time moments by Monte Carlo,
//! and evaluates pathwise stopping-time functionals and probability bounds for
//! the quenching time.
//!
//! Module map:
//!
//! * [`operator`]: finite-difference fractional Laplacian with extended
//!   homogeneous Dirichlet conditions.
//! * [`noise`]: Brownian and fractional Gaussian increments, the Volterra
//!   kernel, mixed noise paths.
//! * [`solver`]: semi-implicit Euler stepping and quench detection.
//! * [`monte_carlo`]: ensembles and parameter sweeps.
//! * [`spectral`]: principal eigenpair of the discrete operator.
//! * [`bounds`]: analytic and sample-path bounds on quenching time/probability.
//! * [`config`], [`output`], [`validation`]: configuration, file formats and
//!   the self-check suite behind the `validate` subcommand.

pub mod bounds;
pub mod coefficient;
pub mod config;
pub mod error;
pub mod monte_carlo;
pub mod noise;
pub mod operator;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
