//! Ensembles of realizations and parameter sweeps.
//!
//! Realization `i` always uses `derive_seed(master, i)`, so every grid point
//! of a sweep sees the same noise paths (common random numbers). Realizations
//! run in parallel; their results are collected in index order and reduced
//! sequentially, which makes every statistic independent of the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::derive_seed;
use crate::solver::{ModelParams, RealizationResult, Simulator};
use crate::{Error, Result};

/// Running counts and quenching-time moments (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub n_realizations: u64,
    pub n_quenched: u64,
    pub failures: u64,
    pub embedding_warnings: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, r: &RealizationResult) {
        self.n_realizations += 1;
        self.embedding_warnings += r.embedding_warning as u64;
        if r.failed {
            self.failures += 1;
            return;
        }
        if let Some(t) = r.t_quench {
            self.n_quenched += 1;
            let d = t - self.mean;
            self.mean += d / self.n_quenched as f64;
            self.m2 += d * (t - self.mean);
        }
    }

    /// Pools two disjoint ensembles.
    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        let n = self.n_quenched + other.n_quenched;
        let (mean, m2) = if n == 0 {
            (0.0, 0.0)
        } else {
            let (na, nb) = (self.n_quenched as f64, other.n_quenched as f64);
            let d = other.mean - self.mean;
            (
                self.mean + d * nb / n as f64,
                self.m2 + other.m2 + d * d * na * nb / n as f64,
            )
        };
        Accumulator {
            n_realizations: self.n_realizations + other.n_realizations,
            n_quenched: n,
            failures: self.failures + other.failures,
            embedding_warnings: self.embedding_warnings + other.embedding_warnings,
            mean,
            m2,
        }
    }

    pub fn stats(&self) -> Result<EnsembleStats> {
        let valid = self.n_realizations - self.failures;
        if valid == 0 {
            return Err(Error::Ensemble(format!(
                "all {} realizations failed",
                self.n_realizations
            )));
        }
        let p = self.n_quenched as f64 / valid as f64;
        Ok(EnsembleStats {
            n_realizations: self.n_realizations,
            n_quenched: self.n_quenched,
            failures: self.failures,
            quench_probability: p,
            mean_tq: (self.n_quenched > 0).then_some(self.mean),
            var_tq: (self.n_quenched > 1).then(|| self.m2 / (self.n_quenched - 1) as f64),
            std_error_p: (p * (1.0 - p) / valid as f64).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_realizations: u64,
    pub n_quenched: u64,
    pub failures: u64,
    /// `n_quenched / (n_realizations - failures)`.
    pub quench_probability: f64,
    /// Mean quenching time over the quenched realizations.
    pub mean_tq: Option<f64>,
    /// Unbiased variance of the quenching time over the quenched realizations.
    pub var_tq: Option<f64>,
    /// Binomial standard error `√(p(1-p)/n)`.
    pub std_error_p: f64,
}

/// Realizations `start..end` of the ensemble with master seed `master`.
pub fn accumulate_range(sim: &Simulator, start: u64, end: u64, master: u64) -> Accumulator {
    let results: Vec<RealizationResult> = (start..end)
        .into_par_iter()
        .map(|i| sim.run(derive_seed(master, i)))
        .collect();
    let mut acc = Accumulator::default();
    for r in &results {
        acc.push(r);
    }
    acc
}

pub fn estimate(params: &ModelParams, n_realizations: u64, master_seed: u64) -> Result<EnsembleStats> {
    if n_realizations == 0 {
        return Err(Error::Parameter("need at least one realization".into()));
    }
    let sim = Simulator::new(params)?;
    accumulate_range(&sim, 0, n_realizations, master_seed).stats()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Parameter values, one per axis.
    pub values: Vec<f64>,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Parameter names, e.g. `["lambda"]` or `["alpha", "H"]`.
    pub axes: Vec<String>,
    pub points: Vec<SweepPoint>,
    pub master_seed: u64,
    pub n_realizations: u64,
}

impl SweepResult {
    /// Points whose `axis` value equals `value`, in sweep order.
    pub fn slice(&self, axis: usize, value: f64) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.values[axis] == value).collect()
    }
}

fn sweep(
    axes: &[&str],
    grid: Vec<Vec<f64>>,
    base: &ModelParams,
    set: impl Fn(&mut ModelParams, &[f64]),
    n_realizations: u64,
    master_seed: u64,
) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(grid.len());
    for values in grid {
        let mut p = base.clone();
        set(&mut p, &values);
        let stats = estimate(&p, n_realizations, master_seed)?;
        log::info!("{axes:?} = {values:?}: p = {:.4}", stats.quench_probability);
        points.push(SweepPoint { values, stats });
    }
    Ok(SweepResult {
        axes: axes.iter().map(|s| s.to_string()).collect(),
        points,
        master_seed,
        n_realizations,
    })
}

pub fn sweep_lambda(base: &ModelParams, lambdas: &[f64], n_realizations: u64, master_seed: u64) -> Result<SweepResult> {
    let grid = lambdas.iter().map(|&l| vec![l]).collect();
    sweep(&["lambda"], grid, base, |p, v| p.lambda = v[0], n_realizations, master_seed)
}

pub fn sweep_kappa2(base: &ModelParams, kappa2s: &[f64], n_realizations: u64, master_seed: u64) -> Result<SweepResult> {
    let grid = kappa2s.iter().map(|&k| vec![k]).collect();
    sweep(&["kappa2"], grid, base, |p, v| p.kappa2 = v[0], n_realizations, master_seed)
}

/// Row-major over `alphas` (outer) and `hs` (inner).
pub fn sweep_alpha_h(
    base: &ModelParams,
    alphas: &[f64],
    hs: &[f64],
    n_realizations: u64,
    master_seed: u64,
) -> Result<SweepResult> {
    if let Some(a) = alphas.iter().find(|a| !(0.1..=0.9).contains(*a)) {
        return Err(Error::Range(format!("alpha grid must lie in [0.1, 0.9], got {a}")));
    }
    if let Some(h) = hs.iter().find(|h| !(**h > 0.5 && **h < 1.0)) {
        return Err(Error::Range(format!("H grid must lie in (0.5, 1), got {h}")));
    }
    let grid = alphas
        .iter()
        .flat_map(|&a| hs.iter().map(move |&h| vec![a, h]))
        .collect();
    sweep(
        &["alpha", "H"],
        grid,
        base,
        |p, v| {
            p.alpha = v[0];
            p.hurst = v[1];
        },
        n_realizations,
        master_seed,
    )
}

/// Experiment presets. Desk scale uses `N = 2000` time steps; full scale
/// uses `N = 10^4` and finer grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// λ sweep.
    T1,
    /// λ sweep with the regularizer `γ = 0.1`.
    T2,
    /// κ2 sweep at `λ = 0.4`, `κ1 = 0.1`.
    T3,
    /// (α, H) grid with `κ1 = κ2 = 0.5`.
    Fig2,
    /// (α, H) grid with `κ1 = κ2 = 0.1`.
    Fig2Low,
}

pub const T1_LAMBDAS: [f64; 8] = [0.01, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4];
pub const T3_KAPPA2S: [f64; 6] = [0.05, 0.1, 0.5, 1.0, 1.5, 2.0];
pub const FIG2_ALPHAS: [f64; 3] = [0.2, 0.5, 0.8];
pub const FIG2_HS: [f64; 3] = [0.55, 0.7, 0.9];

fn step_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| ((lo + k as f64 * step) * 1e6).round() / 1e6).collect()
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::T1, Preset::T2, Preset::T3, Preset::Fig2, Preset::Fig2Low];

    pub fn name(self) -> &'static str {
        match self {
            Preset::T1 => "t1",
            Preset::T2 => "t2",
            Preset::T3 => "t3",
            Preset::Fig2 => "fig2",
            Preset::Fig2Low => "fig2-low",
        }
    }

    pub fn base(self, full: bool) -> ModelParams {
        let mut p = ModelParams {
            n_steps: if full { 10_000 } else { 2000 },
            ..ModelParams::default()
        };
        match self {
            Preset::T1 | Preset::T3 => {}
            Preset::T2 => p.gamma = 0.1,
            Preset::Fig2 => {
                p.kappa1 = 0.5;
                p.kappa2 = 0.5;
            }
            Preset::Fig2Low => {}
        }
        p
    }

    pub fn default_realizations(self, full: bool) -> u64 {
        match (self, full) {
            (_, true) => 10_000,
            (Preset::Fig2 | Preset::Fig2Low, false) => 1000,
            _ => 2000,
        }
    }

    pub fn run(self, full: bool, n_realizations: u64, master_seed: u64) -> Result<SweepResult> {
        self.run_with(&self.base(full), full, n_realizations, master_seed)
    }

    /// Runs the preset's grid on a caller-supplied base configuration.
    pub fn run_with(self, base: &ModelParams, full: bool, n_realizations: u64, master_seed: u64) -> Result<SweepResult> {
        match self {
            Preset::T1 | Preset::T2 => sweep_lambda(base, &T1_LAMBDAS, n_realizations, master_seed),
            Preset::T3 => sweep_kappa2(base, &T3_KAPPA2S, n_realizations, master_seed),
            Preset::Fig2 | Preset::Fig2Low => {
                if full {
                    let alphas = step_grid(0.1, 0.9, 0.05);
                    let hs = step_grid(0.55, 0.95, 0.05);
                    sweep_alpha_h(base, &alphas, &hs, n_realizations, master_seed)
                } else {
                    sweep_alpha_h(base, &FIG2_ALPHAS, &FIG2_HS, n_realizations, master_seed)
                }
            }
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (t1, t2, t3, fig2, fig2-low)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelParams {
        ModelParams {
            n_steps: 200,
            m: 11,
            ..ModelParams::default()
        }
    }

    #[test]
    fn quiet_ensemble_never_quenches() {
        let p = ModelParams {
            lambda: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            ..small()
        };
        let s = estimate(&p, 7, 1).unwrap();
        assert_eq!(s.quench_probability, 0.0);
        assert_eq!(s.mean_tq, None);
        assert_eq!(s.var_tq, None);
        assert_eq!(s.std_error_p, 0.0);
    }

    #[test]
    fn split_and_pool_matches_full() {
        let p = ModelParams {
            lambda: 0.8,
            kappa2: 1.0,
            ..small()
        };
        let sim = Simulator::new(&p).unwrap();
        let full = accumulate_range(&sim, 0, 60, 5);
        let pooled = accumulate_range(&sim, 0, 25, 5).merge(&accumulate_range(&sim, 25, 60, 5));
        assert_eq!(full.n_quenched, pooled.n_quenched);
        assert_eq!(full.failures, pooled.failures);
        let (a, b) = (full.stats().unwrap(), pooled.stats().unwrap());
        assert!((a.mean_tq.unwrap() - b.mean_tq.unwrap()).abs() < 1e-12);
        assert!((a.var_tq.unwrap() - b.var_tq.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn welford_matches_two_pass() {
        let ts = [0.3, 0.5, 0.55, 0.9];
        let mut acc = Accumulator::default();
        for &t in &ts {
            acc.push(&RealizationResult {
                seed: 0,
                quenched: true,
                t_quench: Some(t),
                sup_norm_series: vec![],
                steps_taken: 0,
                failed: false,
                embedding_warning: false,
            });
        }
        let s = acc.stats().unwrap();
        let m = ts.iter().sum::<f64>() / 4.0;
        let v = ts.iter().map(|t| (t - m).powi(2)).sum::<f64>() / 3.0;
        assert!((s.mean_tq.unwrap() - m).abs() < 1e-15);
        assert!((s.var_tq.unwrap() - v).abs() < 1e-15);
    }

    #[test]
    fn all_failed_is_an_error() {
        let mut acc = Accumulator::default();
        acc.push(&RealizationResult {
            seed: 0,
            quenched: false,
            t_quench: None,
            sup_norm_series: vec![],
            steps_taken: 3,
            failed: true,
            embedding_warning: false,
        });
        assert!(matches!(acc.stats(), Err(Error::Ensemble(_))));
        assert!(estimate(&small(), 0, 1).is_err());
    }

    #[test]
    fn empty_and_degenerate_sweeps() {
        let r = sweep_lambda(&small(), &[], 10, 1).unwrap();
        assert!(r.points.is_empty());
        let one = sweep_alpha_h(&small(), &[0.5], &[0.7], 20, 3).unwrap();
        let mut p = small();
        p.alpha = 0.5;
        p.hurst = 0.7;
        assert_eq!(one.points[0].stats, estimate(&p, 20, 3).unwrap());
        assert!(sweep_alpha_h(&small(), &[0.95], &[0.7], 1, 1).is_err());
        assert!(sweep_alpha_h(&small(), &[0.5], &[0.5], 1, 1).is_err());
    }

    #[test]
    fn preset_grids() {
        assert_eq!(step_grid(0.1, 0.9, 0.05).len(), 17);
        assert_eq!(step_grid(0.55, 0.95, 0.05), vec![0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]);
        assert_eq!("fig2-low".parse::<Preset>().unwrap(), Preset::Fig2Low);
        assert!("t4".parse::<Preset>().is_err());
        assert_eq!(Preset::T2.base(false).gamma, 0.1);
        assert_eq!(Preset::Fig2.base(false).kappa2, 0.5);
    }
}
