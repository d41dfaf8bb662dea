//! Quenching-time functionals and probability bounds.
//!
//! With `z = 1 - u`, `v = e^{N_t} z`, the growth envelope
//! `η1(λζ z^{-2} - γz) ≤ g ≤ η2(λζ z^{-2} - γz)` and the principal pair
//! `(μ1, ψ1)` normalized by `∫ψ1 = 1`, write
//!
//! ```text
//! K(t) = ½∫_0^t k²,   A(t) = ½∫_0^t a²
//! X_t  = -3(η1γt - μ1K(t) - A(t)) + 3N_t
//! w    = ⟨v0, ψ1⟩³ / (3λη1ζ_m)
//! ```
//!
//! The upper stopping time `τ*` is the first time `∫_0^t e^{X_s} ds ≥ w`;
//! the lower one `τ_*` is the first time `∫_0^t e^{3N_r} μ(r)^{-3} dr ≥ 1/(4λη2ζ_M)`.
//! All path functionals use left-endpoint sums on the path's time grid and
//! accumulate in log space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::coefficient::Coefficient;
use crate::noise::{mixed_path_with, FgnSampler, NoisePath};
use crate::operator::{assemble_with, GridSpec};
use crate::quadrature::integrate_rel;
use crate::rng::derive_seed;
use crate::solver::{initial_condition, ModelParams};
use crate::spectral::{inner_product_v0_psi1, principal_eigenpair, EigenPair};
use crate::{Error, Result};

const QUAD_REL: f64 = 1e-12;

/// How `Var(∫ b dB^H)` enters `ν(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FbmVariance {
    /// `b² t^{2H}` for constant `b`; falls back to the conservative form otherwise.
    #[default]
    Exact,
    /// `2H t^{2H-1} ∫_0^t b²`.
    Conservative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub eta1: f64,
    pub eta2: f64,
    pub zeta_m: f64,
    pub zeta_max: f64,
    pub mu1: f64,
    pub psi1: Vec<f64>,
    pub dx: f64,
    pub v0_psi1: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub hurst: f64,
    pub a_fn: Coefficient,
    pub b_fn: Coefficient,
    pub k_fn: Coefficient,
    pub fbm_variance: FbmVariance,
}

impl BoundParams {
    /// Envelope constants `η1 = η2 = 1`, `ζ ≡ 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pair: &EigenPair,
        grid: GridSpec,
        v0: &[f64],
        lambda: f64,
        gamma: f64,
        hurst: f64,
        a_fn: Coefficient,
        b_fn: Coefficient,
        k_fn: Coefficient,
    ) -> Result<Self> {
        let bp = BoundParams {
            eta1: 1.0,
            eta2: 1.0,
            zeta_m: 1.0,
            zeta_max: 1.0,
            mu1: pair.mu1,
            psi1: pair.psi1.clone(),
            dx: grid.dx(),
            v0_psi1: inner_product_v0_psi1(v0, pair, grid)?,
            gamma,
            lambda,
            hurst,
            a_fn,
            b_fn,
            k_fn,
            fbm_variance: FbmVariance::Exact,
        };
        bp.validate()?;
        Ok(bp)
    }

    /// Bound inputs for a simulated model: `v0 = 1 - u0`, `a = κ1 a_fn`,
    /// `b = κ2 b_fn`, and the eigenpair of the model's operator.
    pub fn from_model(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let grid = params.grid()?;
        let op = assemble_with(grid, params.alpha, params.rho(), params.kappa_rule)?;
        let pair = principal_eigenpair(&op)?;
        let v0: Vec<f64> = initial_condition(grid, params.c).iter().map(|u| 1.0 - u).collect();
        let (a, b) = params.noise_coefficients();
        BoundParams::new(
            &pair,
            grid,
            &v0,
            params.lambda,
            params.gamma,
            params.hurst,
            a,
            b,
            params.k_fn.clone(),
        )
    }

    /// Replaces the initial datum by `v0 = W1 ψ1`.
    pub fn with_eigen_initial(mut self, w1: f64) -> Self {
        self.v0_psi1 = w1 * self.psi_square_integral();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Parameter(msg.to_string()))
            }
        };
        check(self.eta1 > 0.0 && self.eta1 <= self.eta2, "need 0 < eta1 <= eta2")?;
        check(self.zeta_m >= 0.0 && self.zeta_m <= self.zeta_max, "need 0 <= zeta_m <= zeta_M")?;
        check(self.mu1 > 0.0, "mu1 must be positive")?;
        check(self.psi1.iter().all(|&p| p > 0.0), "psi1 must be positive")?;
        check(
            (self.dx * self.psi1.iter().sum::<f64>() - 1.0).abs() <= 1e-10,
            "psi1 must integrate to 1",
        )?;
        check(self.hurst > 0.5 && self.hurst < 1.0, "H must lie in (1/2, 1)")?;
        check(self.lambda >= 0.0 && self.gamma >= 0.0, "lambda and gamma must be >= 0")?;
        Ok(())
    }

    pub fn psi_min(&self) -> f64 {
        self.psi1.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn psi_max(&self) -> f64 {
        self.psi1.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoidal `∫ψ1²`.
    pub fn psi_square_integral(&self) -> f64 {
        self.dx * self.psi1.iter().map(|p| p * p).sum::<f64>()
    }

    /// `w = ⟨v0, ψ1⟩³ / (3λη1ζ_m)`, infinite when `λζ_m = 0`.
    pub fn threshold_w(&self) -> f64 {
        let den = 3.0 * self.lambda * self.eta1 * self.zeta_m;
        if den == 0.0 {
            f64::INFINITY
        } else {
            self.v0_psi1.powi(3) / den
        }
    }

    /// Deterministic part of `X_t`: `-3(η1γt - μ1K(t) - A(t))`.
    pub fn drift_exponent(&self, t: f64) -> f64 {
        -3.0 * (self.eta1 * self.gamma * t - self.mu1 * k_of(t, &self.k_fn) - a_of(t, &self.a_fn))
    }

    /// `Var N_t` for independent drivers.
    pub fn noise_variance(&self, t: f64) -> f64 {
        let bm = 2.0 * a_of(t, &self.a_fn);
        let fbm = match (&self.b_fn, self.fbm_variance) {
            (Coefficient::Constant(b), FbmVariance::Exact) => b * b * t.powf(2.0 * self.hurst),
            _ => fbm_variance_bound(t, self.hurst, &self.b_fn),
        };
        bm + fbm
    }
}

/// `2H t^{2H-1} ∫_0^t b²`.
fn fbm_variance_bound(t: f64, h: f64, b: &Coefficient) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    2.0 * h * t.powf(2.0 * h - 1.0) * b.square_integral(t)
}

/// `K(t) = ½∫_0^t k²`.
pub fn k_of(t: f64, k_fn: &Coefficient) -> f64 {
    0.5 * k_fn.square_integral(t)
}

/// `A(t) = ½∫_0^t a²`.
pub fn a_of(t: f64, a_fn: &Coefficient) -> f64 {
    0.5 * a_fn.square_integral(t)
}

/// `M(T) = 18∫_0^T a² + 36 H T^{2H-1} ∫_0^T b²`.
pub fn m_of(t: f64, bp: &BoundParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    18.0 * bp.a_fn.square_integral(t) + 18.0 * fbm_variance_bound(t, bp.hurst, &bp.b_fn)
}

/// `ν(T) = ∫_0^T e^{-3(γη1t - μ1K - A)} E[e^{3N_t}] dt` with
/// `E[e^{3N_t}] = e^{9/2 Var N_t}`.
pub fn nu_of(t: f64, bp: &BoundParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    integrate_rel(
        |s| (bp.drift_exponent(s) + 4.5 * bp.noise_variance(s)).exp(),
        0.0,
        t,
        QUAD_REL,
    )
    .value
}

/// `min(1, 2 exp(-(ln w - ln ν)² / (2M(T))))`, a bound on `P[τ* ≤ T]`.
pub fn tail_upper_bound(t: f64, w: f64, bp: &BoundParams, nu_t: f64) -> Result<f64> {
    if !(w > nu_t) {
        return Err(Error::ConditionViolated(format!(
            "tail bound needs w > nu(T), got w = {w:e}, nu(T) = {nu_t:e}"
        )));
    }
    let m = m_of(t, bp);
    if !(m > 0.0) {
        return Err(Error::ConditionViolated(format!("tail bound needs M(T) > 0, got {m}")));
    }
    if w.is_infinite() {
        return Ok(0.0);
    }
    let l = w.ln() - nu_t.ln();
    Ok((2.0 * (-l * l / (2.0 * m)).exp()).min(1.0))
}

/// Chebyshev-type bounds on `P[τ* ≤ T]`, each clamped to 1.
///
/// Dependent drivers (`B^H` built from a second Brownian motion on the same
/// filtration):
/// `(1/w)(∫_0^T e^{6(μ1K + A - γη1t)} dt + ∫_0^T e^{6A + 36Ht^{2H-1}∫_0^t b²} dt)`.
///
/// Independent drivers:
/// `(1/w) ∫_0^T e^{3(μ1K - γη1t + 4A + 3Ht^{2H-1}∫_0^t b²)} dt`.
pub fn chebyshev_bounds(t: f64, bp: &BoundParams, independent: bool) -> f64 {
    let w = bp.threshold_w();
    if t <= 0.0 || w.is_infinite() {
        return 0.0;
    }
    let k = |s: f64| bp.mu1 * k_of(s, &bp.k_fn);
    let a = |s: f64| a_of(s, &bp.a_fn);
    let fb = |s: f64| 0.5 * fbm_variance_bound(s, bp.hurst, &bp.b_fn);
    let g = bp.gamma * bp.eta1;
    let total = if independent {
        integrate_rel(|s| (3.0 * (k(s) - g * s + 4.0 * a(s) + 3.0 * fb(s))).exp(), 0.0, t, QUAD_REL).value
    } else {
        integrate_rel(|s| (6.0 * (k(s) + a(s) - g * s)).exp(), 0.0, t, QUAD_REL).value
            + integrate_rel(|s| (6.0 * a(s) + 36.0 * fb(s)).exp(), 0.0, t, QUAD_REL).value
    };
    (total / w).min(1.0)
}

/// The dependent-driver bound with the Brownian moment `E[e^{6∫a dB}] = e^{36A}`
/// carried through the first integral:
/// `(1/w)(∫ e^{6(μ1K - γη1t) + 36A} + ∫ e^{6A + 36Ht^{2H-1}∫b²})`.
pub fn chebyshev_dependent_full_moment(t: f64, bp: &BoundParams) -> f64 {
    let w = bp.threshold_w();
    if t <= 0.0 || w.is_infinite() {
        return 0.0;
    }
    let g = bp.gamma * bp.eta1;
    let first = integrate_rel(
        |s| (6.0 * (bp.mu1 * k_of(s, &bp.k_fn) - g * s) + 36.0 * a_of(s, &bp.a_fn)).exp(),
        0.0,
        t,
        QUAD_REL,
    )
    .value;
    let second = integrate_rel(
        |s| (6.0 * a_of(s, &bp.a_fn) + 18.0 * fbm_variance_bound(s, bp.hurst, &bp.b_fn)).exp(),
        0.0,
        t,
        QUAD_REL,
    )
    .value;
    ((first + second) / w).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBound {
    pub value: f64,
    /// `ν ≥ 0`: quenching is almost sure and the value is 1.
    pub almost_sure: bool,
    pub nu: f64,
    pub lambda_tilde: f64,
}

/// Regularized lower incomplete gamma `P(s, x)` with the limits `x = 0`
/// and `x = ∞` handled.
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || s.is_infinite() {
        return Err(Error::Domain(format!("gamma shape must be positive, got {s}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("gamma argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(s, x))
}

/// Lower bound on `P[τ < ∞]` for constant-coefficient data:
/// `ν = (1 + μ1 - γη1)/3`, `Λ̃ = 2Λ/(9w)`, bound `P(-ν, Λ̃)` when `ν < 0`.
pub fn gamma_lower_bound(bp: &BoundParams, lambda_cap: f64) -> Result<GammaBound> {
    if lambda_cap.is_nan() || lambda_cap < 0.0 {
        return Err(Error::Domain(format!("Lambda must be >= 0, got {lambda_cap}")));
    }
    let nu = (1.0 + bp.mu1 - bp.gamma * bp.eta1) / 3.0;
    let w = bp.threshold_w();
    let lambda_tilde = if w.is_infinite() { 0.0 } else { 2.0 * lambda_cap / (9.0 * w) };
    if nu >= 0.0 {
        return Ok(GammaBound {
            value: 1.0,
            almost_sure: true,
            nu,
            lambda_tilde,
        });
    }
    Ok(GammaBound {
        value: regularized_lower_gamma(-nu, lambda_tilde)?,
        almost_sure: false,
        nu,
        lambda_tilde,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFunctionalResult {
    pub threshold: f64,
    /// First grid time at which the accumulated integral reaches the
    /// threshold; `None` when it does not within the path.
    pub threshold_time: Option<f64>,
    /// Accumulated integral at `t_0, ..., t_n`.
    pub integral_series: Vec<f64>,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Left-endpoint accumulation of `∫ exp(log_integrand)`; returns the log of
/// the running integral at every grid time.
fn log_cumulative(dt: f64, n: usize, log_integrand: impl Fn(usize) -> f64) -> Vec<f64> {
    let ldt = dt.ln();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = f64::NEG_INFINITY;
    out.push(acc);
    for k in 0..n {
        acc = log_add_exp(acc, ldt + log_integrand(k));
        out.push(acc);
    }
    out
}

fn first_crossing(log_series: &[f64], log_threshold: f64, dt: f64) -> Option<f64> {
    log_series
        .iter()
        .position(|&l| l >= log_threshold)
        .map(|k| k as f64 * dt)
}

/// Log of `e^{X_{t_k}}` along a path.
fn upper_log_integrand(path: &NoisePath, bp: &BoundParams, eta: f64) -> Vec<f64> {
    let n = path.n_steps;
    let kk = bp.k_fn.cumulative_half_square(path.dt, n);
    let aa = bp.a_fn.cumulative_half_square(path.dt, n);
    (0..=n)
        .map(|k| {
            let t = path.time(k);
            -3.0 * (eta * bp.gamma * t - bp.mu1 * kk[k] - aa[k]) + 3.0 * path.n_values[k]
        })
        .collect()
}

/// Upper stopping time `τ*` on one path.
pub fn tau_star_sample(path: &NoisePath, bp: &BoundParams) -> PathFunctionalResult {
    let w = bp.threshold_w();
    let li = upper_log_integrand(path, bp, bp.eta1);
    let logs = log_cumulative(path.dt, path.n_steps, |k| li[k]);
    PathFunctionalResult {
        threshold: w,
        threshold_time: first_crossing(&logs, w.ln(), path.dt),
        integral_series: logs.iter().map(|l| l.exp()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerFunctionalResult {
    pub functional: PathFunctionalResult,
    /// `G(t) = [1 - 4λη2ζ_M ∫_0^t e^{3N} μ^{-3}]^{1/4}`, clamped to `[0, 1]`.
    pub g_series: Vec<f64>,
}

/// `μ(t) = W1 ψ_m e^{γη2t - μ1K(t) - A(t)}` for the initial datum `v0 = W1ψ1`.
pub fn eigen_mu(bp: &BoundParams, w1: f64) -> impl Fn(f64) -> f64 + '_ {
    let base = w1 * bp.psi_min();
    move |t| base * (bp.gamma * bp.eta2 * t - bp.mu1 * k_of(t, &bp.k_fn) - a_of(t, &bp.a_fn)).exp()
}

/// Lower stopping time `τ_*` on one path.
pub fn tau_lower_sample(
    path: &NoisePath,
    bp: &BoundParams,
    mu_fn: impl Fn(f64) -> f64,
) -> Result<LowerFunctionalResult> {
    let n = path.n_steps;
    let mut li = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mu = mu_fn(path.time(k));
        if !(mu > 0.0) {
            return Err(Error::Parameter(format!("mu(t) must be positive, got {mu} at t = {}", path.time(k))));
        }
        li.push(3.0 * path.n_values[k] - 3.0 * mu.ln());
    }
    let rate = 4.0 * bp.lambda * bp.eta2 * bp.zeta_max;
    let threshold = if rate == 0.0 { f64::INFINITY } else { 1.0 / rate };
    let logs = log_cumulative(path.dt, n, |k| li[k]);
    let integral_series: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let g_series = integral_series
        .iter()
        .map(|j| (1.0 - rate * j).clamp(0.0, 1.0).powf(0.25))
        .collect();
    Ok(LowerFunctionalResult {
        functional: PathFunctionalResult {
            threshold,
            threshold_time: first_crossing(&logs, threshold.ln(), path.dt),
            integral_series,
        },
        g_series,
    })
}

/// Truncated check of `∫_0^∞ e^{-3[γη2s - μ1K - A - N_s]} ds < W2`,
/// `W2 = (W1ψ_m)³/(4λη2ζ_M)`: true when the integral over the path up to
/// `t_trunc` stays below `W2` and the deterministic exponent is decreasing
/// at `t_trunc`.
pub fn global_existence_check(path: &NoisePath, bp: &BoundParams, w1: f64, t_trunc: f64) -> bool {
    let den = 4.0 * bp.lambda * bp.eta2 * bp.zeta_max;
    let w2 = if den == 0.0 {
        f64::INFINITY
    } else {
        (w1 * bp.psi_min()).powi(3) / den
    };
    if !(w2 > 0.0) {
        return false;
    }
    let n = ((t_trunc / path.dt).round() as usize).min(path.n_steps);
    let li = upper_log_integrand(path, bp, bp.eta2);
    let logs = log_cumulative(path.dt, n, |k| li[k]);
    let below = logs.iter().all(|&l| l < w2.ln());
    let k = bp.k_fn.value(t_trunc);
    let a = bp.a_fn.value(t_trunc);
    let decay = bp.gamma * bp.eta2 - 0.5 * bp.mu1 * k * k - 0.5 * a * a;
    below && decay > 0.0
}

/// Setup for the Monte Carlo part of the general lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralBoundConfig {
    /// Exponent of `h(t) = t^{2θ}`.
    pub theta: f64,
    pub n_paths: u64,
    pub t_trunc: f64,
    pub n_steps: usize,
    /// Grid points used to maximize `M(t)/(ln(w+1) + h(t))²`.
    pub n_grid: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralBound {
    pub value: f64,
    pub m_w: f64,
    pub u_w: f64,
    /// `m_w ≤ 1`: the bound carries no information.
    pub vacuous: bool,
}

/// `max_{t ∈ grid} M(t) / (ln(w+1) + t^{2θ})²` over `n_grid` uniform points of `(0, t_max]`.
pub fn u_w_on_grid(bp: &BoundParams, theta: f64, t_max: f64, n_grid: usize) -> f64 {
    let lw = bp.threshold_w().ln_1p();
    (1..=n_grid)
        .map(|i| {
            let t = t_max * i as f64 / n_grid as f64;
            m_of(t, bp) / (lw + t.powf(2.0 * theta)).powi(2)
        })
        .fold(0.0, f64::max)
}

/// `1 - exp(-(m_w - 1)² / (2U_w))` for `m_w > 1`, else 0.
pub fn general_bound_value(m_w: f64, u_w: f64) -> f64 {
    if m_w <= 1.0 {
        return 0.0;
    }
    if u_w.is_infinite() {
        return 0.0;
    }
    (1.0 - (-(m_w - 1.0).powi(2) / (2.0 * u_w)).exp()).max(0.0)
}

/// Per-path `sup_t (ln(∫_0^t e^X + 1) + h(t)) / (ln(w+1) + h(t))` on the path grid.
pub fn m_w_sample(path: &NoisePath, bp: &BoundParams, theta: f64) -> f64 {
    let lw = bp.threshold_w().ln_1p();
    let li = upper_log_integrand(path, bp, bp.eta1);
    let logs = log_cumulative(path.dt, path.n_steps, |k| li[k]);
    logs.iter()
        .enumerate()
        .map(|(k, &l)| {
            let h = path.time(k).powf(2.0 * theta);
            (log_add_exp(l, 0.0) + h) / (lw + h)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn general_lower_bound(bp: &BoundParams, cfg: &GeneralBoundConfig) -> Result<GeneralBound> {
    if cfg.n_paths == 0 || cfg.n_steps == 0 || cfg.n_grid == 0 || !(cfg.t_trunc > 0.0) {
        return Err(Error::Parameter("general bound needs paths, steps, grid and T_trunc > 0".into()));
    }
    let sampler = FgnSampler::new(cfg.n_steps, bp.hurst)?;
    let dt = cfg.t_trunc / cfg.n_steps as f64;
    let samples: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = mixed_path_with(&sampler, dt, &bp.a_fn, &bp.b_fn, derive_seed(cfg.master_seed, i));
            m_w_sample(&path, bp, cfg.theta)
        })
        .collect();
    let m_w = samples.iter().sum::<f64>() / samples.len() as f64;
    let u_w = u_w_on_grid(bp, cfg.theta, cfg.t_trunc, cfg.n_grid);
    Ok(GeneralBound {
        value: general_bound_value(m_w, u_w),
        m_w,
        u_w,
        vacuous: m_w <= 1.0,
    })
}

/// Sampled-path comparison of the stopping times with the bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathComparison {
    pub n_paths: u64,
    /// Fraction of paths with `τ* ≤ T`.
    pub p_upper: f64,
    /// Fraction of paths with `τ_* ≤ T`.
    pub p_lower: f64,
    /// Paths on which `τ_* ≤ τ*` (with `∞ ≤ ∞`).
    pub ordered_paths: u64,
}

/// Evaluates `τ*` and `τ_*` on `n_paths` independent paths over `[0, T]`
/// with eigenfunction initial data `v0 = W1ψ1`.
pub fn compare_paths(
    bp: &BoundParams,
    w1: f64,
    t_end: f64,
    n_steps: usize,
    n_paths: u64,
    master_seed: u64,
) -> Result<PathComparison> {
    let bp = bp.clone().with_eigen_initial(w1);
    let sampler = FgnSampler::new(n_steps, bp.hurst)?;
    let dt = t_end / n_steps as f64;
    let mu = eigen_mu(&bp, w1);
    let rows: Vec<Result<(Option<f64>, Option<f64>)>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = mixed_path_with(&sampler, dt, &bp.a_fn, &bp.b_fn, derive_seed(master_seed, i));
            let up = tau_star_sample(&path, &bp).threshold_time;
            let low = tau_lower_sample(&path, &bp, &mu)?.functional.threshold_time;
            Ok((up, low))
        })
        .collect();
    let mut upper = 0;
    let mut lower = 0;
    let mut ordered = 0;
    for r in rows {
        let (up, low) = r?;
        upper += up.is_some() as u64;
        lower += low.is_some() as u64;
        let ok = match (low, up) {
            (_, None) => true,
            (Some(l), Some(u)) => l <= u,
            (None, Some(_)) => false,
        };
        ordered += ok as u64;
    }
    Ok(PathComparison {
        n_paths,
        p_upper: upper as f64 / n_paths as f64,
        p_lower: lower as f64 / n_paths as f64,
        ordered_paths: ordered,
    })
}

/// Everything the `bounds` subcommand reports.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub t_end: f64,
    pub w1: f64,
    pub mu1: f64,
    pub psi_min: f64,
    pub v0_psi1: f64,
    pub w: f64,
    pub nu_t: f64,
    pub m_t: f64,
    pub tail_bound: Option<f64>,
    pub tail_bound_applicable: bool,
    pub chebyshev_dependent: f64,
    pub chebyshev_dependent_full_moment: f64,
    pub chebyshev_independent: f64,
    pub gamma_bound: Option<GammaBound>,
    pub general_bound: GeneralBound,
    pub comparison: PathComparison,
    /// The eigenpair comes from the Dirichlet discretization used by the
    /// simulator.
    pub eigenpair_source: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub t_end: f64,
    pub n_steps: usize,
    pub n_paths: u64,
    /// `v0 = W1ψ1`; `W1 = 1/max ψ1` keeps `v0 ≤ 1` when absent.
    pub w1: Option<f64>,
    pub lambda_cap: Option<f64>,
    pub general: GeneralBoundConfig,
    pub master_seed: u64,
}

pub fn bound_report(bp: &BoundParams, cfg: &ReportConfig) -> Result<BoundReport> {
    let w1 = cfg.w1.unwrap_or(1.0 / bp.psi_max());
    let eb = bp.clone().with_eigen_initial(w1);
    let w = eb.threshold_w();
    let nu_t = nu_of(cfg.t_end, &eb);
    let tail = tail_upper_bound(cfg.t_end, w, &eb, nu_t).ok();
    Ok(BoundReport {
        t_end: cfg.t_end,
        w1,
        mu1: eb.mu1,
        psi_min: eb.psi_min(),
        v0_psi1: eb.v0_psi1,
        w,
        nu_t,
        m_t: m_of(cfg.t_end, &eb),
        tail_bound: tail,
        tail_bound_applicable: tail.is_some(),
        chebyshev_dependent: chebyshev_bounds(cfg.t_end, &eb, false),
        chebyshev_dependent_full_moment: chebyshev_dependent_full_moment(cfg.t_end, &eb),
        chebyshev_independent: chebyshev_bounds(cfg.t_end, &eb, true),
        gamma_bound: cfg.lambda_cap.map(|l| gamma_lower_bound(&eb, l)).transpose()?,
        general_bound: general_lower_bound(&eb, &cfg.general)?,
        comparison: compare_paths(bp, w1, cfg.t_end, cfg.n_steps, cfg.n_paths, cfg.master_seed)?,
        eigenpair_source: "dirichlet",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{assemble_matrix, GridSpec};

    fn params(a: f64, b: f64, k: f64) -> BoundParams {
        let g = GridSpec::new(21).unwrap();
        let op = assemble_matrix(g, 0.6, 1.6).unwrap();
        let pair = principal_eigenpair(&op).unwrap();
        let v0 = vec![1.0; 20];
        BoundParams::new(
            &pair,
            g,
            &v0,
            0.4,
            0.0,
            0.75,
            Coefficient::Constant(a),
            Coefficient::Constant(b),
            Coefficient::Constant(k),
        )
        .unwrap()
    }

    fn flat_path(n: usize, dt: f64) -> NoisePath {
        NoisePath {
            dt,
            n_steps: n,
            bm_increments: vec![0.0; n],
            fbm_increments: vec![0.0; n],
            n_values: vec![0.0; n + 1],
            embedding_clipped: false,
        }
    }

    #[test]
    fn k_and_a() {
        assert_eq!(k_of(1.5, &Coefficient::Constant(2.0)), 3.0);
        assert_eq!(a_of(3.0, &Coefficient::Constant(0.0)), 0.0);
        let ramp = Coefficient::tabulated(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!((k_of(1.0, &ramp) - 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn m_of_examples() {
        assert_eq!(m_of(1.0, &params(0.0, 0.0, 0.0)), 0.0);
        assert!((m_of(1.0, &params(1.0, 1.0, 0.0)) - 45.0).abs() < 1e-12);
    }

    #[test]
    fn nu_trivial_and_monotone() {
        let bp = params(0.0, 0.0, 0.0);
        assert!((nu_of(0.7, &bp) - 0.7).abs() < 1e-12);
        let bp = params(0.2, 0.3, 1.0);
        let mut last = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0] {
            let v = nu_of(t, &bp);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn tail_bound_examples() {
        let bp = params(1.0, 1.0, 0.0);
        let m = m_of(1.0, &bp);
        let nu = 2.0;
        let w = nu * ((2.0 * m).sqrt() * 3.0).exp();
        let b = tail_upper_bound(1.0, w, &bp, nu).unwrap();
        assert!((b - 2.0 * (-9.0f64).exp()).abs() < 1e-15);
        assert_eq!(tail_upper_bound(1.0, f64::INFINITY, &bp, nu).unwrap(), 0.0);
        assert!(tail_upper_bound(1.0, 1e300, &bp, nu).unwrap() < 1e-20);
        assert!(matches!(tail_upper_bound(1.0, 1.0, &bp, nu), Err(Error::ConditionViolated(_))));
    }

    #[test]
    fn gamma_examples() {
        assert!((regularized_lower_gamma(1.0, 1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(regularized_lower_gamma(2.0, 0.0).unwrap(), 0.0);
        assert_eq!(regularized_lower_gamma(2.0, f64::INFINITY).unwrap(), 1.0);
        assert!(regularized_lower_gamma(2.0, -1.0).is_err());
        let mut bp = params(0.1, 0.1, 2.0);
        let g = gamma_lower_bound(&bp, 1.0).unwrap();
        assert!(g.almost_sure && g.value == 1.0);
        bp.gamma = 10.0;
        let g = gamma_lower_bound(&bp, 1.0).unwrap();
        assert!(!g.almost_sure && g.value > 0.0 && g.value < 1.0);
        assert!(gamma_lower_bound(&bp, -1.0).is_err());
        assert_eq!(gamma_lower_bound(&bp, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn tau_star_linear_accumulation() {
        let mut bp = params(0.0, 0.0, 0.0);
        // w = ⟨v0,ψ1⟩³/(3λ); choose λ so that w = 0.3
        bp.lambda = bp.v0_psi1.powi(3) / (3.0 * 0.3);
        let dt = 1e-3;
        let r = tau_star_sample(&flat_path(1000, dt), &bp);
        let t = r.threshold_time.unwrap();
        assert!((t - 0.3).abs() <= dt + 1e-12, "{t}");
        assert!(r.integral_series.windows(2).all(|w| w[1] >= w[0]));
        bp.lambda = 1e-9;
        assert!(tau_star_sample(&flat_path(1000, dt), &bp).threshold_time.is_none());
        bp.lambda = 0.0;
        assert!(tau_star_sample(&flat_path(10, dt), &bp).threshold_time.is_none());
    }

    #[test]
    fn tau_lower_linear_accumulation() {
        let mut bp = params(0.0, 0.0, 0.0);
        bp.lambda = 1.0 / (4.0 * 0.25);
        let dt = 1e-3;
        let r = tau_lower_sample(&flat_path(1000, dt), &bp, |_| 1.0).unwrap();
        assert!((r.functional.threshold_time.unwrap() - 0.25).abs() <= dt + 1e-12);
        assert_eq!(r.g_series[0], 1.0);
        assert!(r.g_series.iter().all(|g| (0.0..=1.0).contains(g)));
        assert!(tau_lower_sample(&flat_path(10, dt), &bp, |_| 0.0).is_err());
    }

    #[test]
    fn global_existence_examples() {
        let mut bp = params(0.0, 0.0, 0.0);
        bp.gamma = 1.0;
        bp.lambda = 1e-6;
        let p = flat_path(1000, 1e-3);
        assert!(global_existence_check(&p, &bp, 1.0, 1.0));
        assert!(!global_existence_check(&p, &bp, 0.0, 1.0));
        bp.gamma = 0.0;
        assert!(!global_existence_check(&p, &bp, 1.0, 1.0));
    }

    #[test]
    fn general_bound_limits() {
        assert_eq!(general_bound_value(1.0, 2.0), 0.0);
        assert_eq!(general_bound_value(0.5, 2.0), 0.0);
        assert_eq!(general_bound_value(3.0, f64::INFINITY), 0.0);
        assert!(general_bound_value(3.0, 1e12) < 1e-11);
        assert!(general_bound_value(3.0, 0.5) > 0.9);
    }

    #[test]
    fn u_w_refines() {
        let bp = params(0.3, 0.5, 1.0);
        let coarse = u_w_on_grid(&bp, 0.6, 5.0, 2000);
        let fine = u_w_on_grid(&bp, 0.6, 5.0, 20000);
        assert!(((coarse - fine) / fine).abs() < 0.01);
    }

    #[test]
    fn chebyshev_large_inner_product_vanishes() {
        let mut bp = params(0.1, 0.1, 2.0);
        bp.v0_psi1 = 1e6;
        assert!(chebyshev_bounds(1.0, &bp, true) < 1e-10);
        assert!(chebyshev_bounds(1.0, &bp, false) < 1e-10);
    }

    #[test]
    fn chebyshev_small_time_slope() {
        // integrand is 1 at t = 0, so the bound is T/w to first order
        let bp = params(0.1, 0.1, 2.0);
        let w = bp.threshold_w();
        let t = 1e-6;
        let b = chebyshev_bounds(t, &bp, true);
        assert!((b / (t / w) - 1.0).abs() < 1e-4);
        let b = chebyshev_bounds(t, &bp, false);
        assert!((b / (2.0 * t / w) - 1.0).abs() < 1e-4);
    }
}
