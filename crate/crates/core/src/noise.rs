//! Brownian and fractional Brownian drivers and the mixed process
//! `N_t = ∫ a dB + ∫ b dB^H`.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::beta::beta;

use crate::coefficient::Coefficient;
use crate::quadrature::integrate_rel;
use crate::rng::{stream_rng, STREAM_BM, STREAM_FGN};
use crate::solver::ModelParams;
use crate::{Error, Result};

/// `R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn covariance_rh(t: f64, s: f64, h: f64) -> f64 {
    0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, h: f64) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParams {
    h: f64,
    c_h: f64,
}

impl HurstParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(Error::Parameter(format!("Hurst index must lie in (1/2, 1), got {h}")));
        }
        let c_h = (h * (2.0 * h - 1.0) / beta(2.0 - 2.0 * h, h - 0.5)).sqrt();
        Ok(HurstParams { h, c_h })
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Kernel constant `C_H = [H(2H-1) / B(2-2H, H-1/2)]^{1/2}`.
    pub fn c_h(&self) -> f64 {
        self.c_h
    }
}

// r^{H-1/2} G^H(t, r) for 0 ≤ r < t. Substituting σ = r + y^{1/p}, p = H - 1/2,
// removes the (σ - r)^{p-1} singularity.
fn scaled_kernel(hp: &HurstParams, t: f64, r: f64) -> f64 {
    if t <= r {
        return 0.0;
    }
    let p = hp.h - 0.5;
    let upper = (t - r).powf(p);
    let inner = integrate_rel(|y: f64| (r + y.powf(1.0 / p)).powf(p), 0.0, upper, 1e-12);
    hp.c_h * inner.value / p
}

/// Volterra kernel `G^H(t, s) = C_H s^{1/2-H} ∫_s^t (σ-s)^{H-3/2} σ^{H-1/2} dσ`
/// for `t > s`, zero for `t ≤ s`. At `s = 0 < t` the kernel is infinite
/// (the singularity is square integrable), and `+∞` is returned.
pub fn volterra_kernel(t: f64, s: f64, h: f64) -> Result<f64> {
    if t < 0.0 || s < 0.0 || t.is_nan() || s.is_nan() {
        return Err(Error::Domain(format!("kernel needs t, s >= 0, got t={t}, s={s}")));
    }
    let hp = HurstParams::new(h)?;
    if t <= s {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s.powf(0.5 - h) * scaled_kernel(&hp, t, s))
}

/// `∫_0^{min(t,s)} G^H(t,r) G^H(s,r) dr`, which should equal `R_H(t, s)`.
pub fn kernel_covariance(t: f64, s: f64, h: f64) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::Domain(format!("need t, s >= 0, got t={t}, s={s}")));
    }
    let hp = HurstParams::new(h)?;
    let upper = t.min(s);
    if upper == 0.0 {
        return Ok(0.0);
    }
    // r = v^{1/q}, q = 2 - 2H, absorbs the r^{1-2H} weight
    let q = 2.0 - 2.0 * h;
    let q_int = integrate_rel(
        |v: f64| {
            let r = v.powf(1.0 / q);
            scaled_kernel(&hp, t, r) * scaled_kernel(&hp, s, r) / q
        },
        0.0,
        upper.powf(q),
        1e-9,
    );
    Ok(q_int.value)
}

/// I.i.d. `N(0, dt)` increments.
pub fn bm_increments(n_steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_BM);
    let sd = dt.sqrt();
    (0..n_steps)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FgnSample {
    pub increments: Vec<f64>,
    /// Set when the circulant embedding had negative eigenvalues that were
    /// clipped to zero (the sample is then only approximately fGN).
    pub clipped: bool,
}

/// Davies–Harte sampler for `n` fractional Gaussian noise increments.
/// The circulant eigenvalues are computed once and reused for every draw.
#[derive(Clone)]
pub struct FgnSampler {
    n: usize,
    h: f64,
    sqrt_eig: Vec<f64>,
    clipped: bool,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FgnSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnSampler")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("clipped", &self.clipped)
            .finish()
    }
}

impl FgnSampler {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("fGN sampler needs at least one step".into()));
        }
        if !(0.5..1.0).contains(&h) {
            return Err(Error::Parameter(format!("Hurst index must lie in [1/2, 1), got {h}")));
        }
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = (0..=n)
            .map(|k| Complex::new(fgn_autocovariance(k, h), 0.0))
            .collect();
        row.extend((1..n).rev().map(|k| Complex::new(fgn_autocovariance(k, h), 0.0)));
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
        let mut clipped = false;
        let sqrt_eig = row
            .iter()
            .map(|c| {
                if c.re < -1e-10 * max {
                    clipped = true;
                }
                (c.re.max(0.0) / m as f64).sqrt()
            })
            .collect();
        if clipped {
            log::warn!("circulant embedding for n={n}, H={h} has negative eigenvalues; clipped to zero");
        }
        Ok(FgnSampler {
            n,
            h,
            sqrt_eig,
            clipped,
            fft,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn hurst(&self) -> f64 {
        self.h
    }
    pub fn clipped(&self) -> bool {
        self.clipped
    }

    /// Draws `n` increments with per-step variance `dt^{2H}`.
    pub fn sample<R: Rng>(&self, rng: &mut R, dt: f64) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        let scale = dt.powf(self.h);
        buf[..self.n].iter().map(|c| c.re * scale).collect()
    }
}

pub fn fgn_circulant(n_steps: usize, dt: f64, h: f64, seed: u64) -> Result<FgnSample> {
    let sampler = FgnSampler::new(n_steps, h)?;
    let mut rng = stream_rng(seed, STREAM_FGN);
    Ok(FgnSample {
        increments: sampler.sample(&mut rng, dt),
        clipped: sampler.clipped(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub n_steps: usize,
    pub bm_increments: Vec<f64>,
    pub fbm_increments: Vec<f64>,
    /// `N` at `t_0 = 0, t_1, ..., t_{n_steps}`.
    pub n_values: Vec<f64>,
    pub embedding_clipped: bool,
}

impl NoisePath {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Increment `N_{t_{k+1}} - N_{t_k}`.
    pub fn increment(&self, k: usize) -> f64 {
        self.n_values[k + 1] - self.n_values[k]
    }

    /// CSV with columns `t, dB, dB_H, N`; row `k` holds the increments over
    /// `[t_{k-1}, t_k]` and `N(t_k)` (row 0 has zero increments).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["t", "dB", "dB_H", "N"])
            .map_err(|e| Error::csv(path, e))?;
        for k in 0..=self.n_steps {
            let (db, dbh) = if k == 0 {
                (0.0, 0.0)
            } else {
                (self.bm_increments[k - 1], self.fbm_increments[k - 1])
            };
            w.write_record(&[
                self.time(k).to_string(),
                db.to_string(),
                dbh.to_string(),
                self.n_values[k].to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds `N_{t_n} = Σ_{k<n} a(t_k) ΔB_k + Σ_{k<n} b(t_k) ΔB^H_k` from
/// independent drivers. `sampler` must have been built for `n_steps` and the
/// Hurst index of the path.
pub fn mixed_path_with(
    sampler: &FgnSampler,
    dt: f64,
    a: &Coefficient,
    b: &Coefficient,
    seed: u64,
) -> NoisePath {
    let n = sampler.n();
    let bm = bm_increments(n, dt, seed);
    let mut rng = stream_rng(seed, STREAM_FGN);
    let fbm = sampler.sample(&mut rng, dt);
    let mut n_values = Vec::with_capacity(n + 1);
    n_values.push(0.0);
    let mut acc = 0.0;
    for k in 0..n {
        let t = k as f64 * dt;
        acc += a.value(t) * bm[k] + b.value(t) * fbm[k];
        n_values.push(acc);
    }
    NoisePath {
        dt,
        n_steps: n,
        bm_increments: bm,
        fbm_increments: fbm,
        n_values,
        embedding_clipped: sampler.clipped(),
    }
}

/// Noise path of a model: `a = κ1·a_fn`, `b = κ2·b_fn`.
pub fn mixed_path(params: &ModelParams, seed: u64) -> Result<NoisePath> {
    params.validate()?;
    let sampler = FgnSampler::new(params.n_steps, params.hurst)?;
    let (a, b) = params.noise_coefficients();
    Ok(mixed_path_with(&sampler, params.dt(), &a, &b, seed))
}
