//! Semi-implicit Euler stepping and quench detection.
//!
//! One step solves
//!
//! ```text
//! (I + δt A) u^{n+1} = u^n + δt g(u^n) + (1 - u^n)^+ ΔN_n
//! ```
//!
//! where `A` is the fractional Laplacian matrix, `g(u) = λ/(1-u)² - γ(1-u)`
//! and `ΔN_n` the increment of the mixed noise over `[t_n, t_{n+1}]`.
//! A run stops at the first state with `max_j u_j > 1 - ε`; the quenching time
//! is the time of the last state that satisfied the bound.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::noise::{mixed_path_with, FgnSampler, NoisePath};
use crate::operator::{assemble_with, default_rho, GridSpec, KappaRule, OperatorMatrix};
use crate::{Error, Result};

/// Machine epsilon used by the quench test.
pub const DEFAULT_EPSILON: f64 = 2.2204e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Splitting parameter of the operator, `1 + α` when absent.
    pub rho: Option<f64>,
    pub kappa_rule: KappaRule,
    pub hurst: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Initial amplitude: `u0(x) = c (1 - x²)`.
    pub c: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub m: usize,
    /// Time profile multiplying `κ1 dB`.
    pub a_fn: Coefficient,
    /// Time profile multiplying `κ2 dB^H`.
    pub b_fn: Coefficient,
    /// Diffusion coefficient entering the bounds through `K(t)`.
    pub k_fn: Coefficient,
    pub epsilon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda: 0.4,
            gamma: 0.0,
            alpha: 0.6,
            rho: None,
            kappa_rule: KappaRule::Standard,
            hurst: 0.7,
            kappa1: 0.1,
            kappa2: 0.1,
            c: 0.1,
            t_end: 1.0,
            n_steps: 10_000,
            m: 41,
            a_fn: Coefficient::Constant(1.0),
            b_fn: Coefficient::Constant(1.0),
            k_fn: Coefficient::Constant(2.0),
            epsilon: DEFAULT_EPSILON,
        }
    }
}

fn scaled(c: &Coefficient, k: f64) -> Coefficient {
    match c {
        Coefficient::Constant(v) => Coefficient::Constant(k * v),
        Coefficient::Tabulated { times, values } => Coefficient::Tabulated {
            times: times.clone(),
            values: values.iter().map(|v| k * v).collect(),
        },
    }
}

impl ModelParams {
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or_else(|| default_rho(self.alpha))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.m)
    }

    /// Effective coefficients `(κ1 a, κ2 b)` of the two drivers.
    pub fn noise_coefficients(&self) -> (Coefficient, Coefficient) {
        (scaled(&self.a_fn, self.kappa1), scaled(&self.b_fn, self.kappa2))
    }

    pub fn validate(&self) -> Result<()> {
        let range = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Range(msg)) };
        range(self.lambda >= 0.0 && self.lambda.is_finite(), format!("lambda must be >= 0, got {}", self.lambda))?;
        range(self.gamma >= 0.0 && self.gamma.is_finite(), format!("gamma must be >= 0, got {}", self.gamma))?;
        range(self.alpha > 0.0 && self.alpha < 1.0, format!("alpha must lie in (0, 1), got {}", self.alpha))?;
        let rho = self.rho();
        range(
            rho > 2.0 * self.alpha && rho <= 2.0,
            format!("rho must lie in (2·alpha, 2], got {rho}"),
        )?;
        range(self.hurst > 0.5 && self.hurst < 1.0, format!("H must lie in (1/2, 1), got {}", self.hurst))?;
        range(self.kappa1 >= 0.0 && self.kappa1.is_finite(), format!("kappa1 must be >= 0, got {}", self.kappa1))?;
        range(self.kappa2 >= 0.0 && self.kappa2.is_finite(), format!("kappa2 must be >= 0, got {}", self.kappa2))?;
        range(self.c >= 0.0 && self.c < 1.0, format!("c must lie in [0, 1), got {}", self.c))?;
        range(self.t_end > 0.0 && self.t_end.is_finite(), format!("T must be > 0, got {}", self.t_end))?;
        range(self.n_steps >= 1, "N must be >= 1".to_string())?;
        range(self.m >= 3, format!("M must be >= 3, got {}", self.m))?;
        range(
            self.epsilon > 0.0 && self.epsilon < 1.0,
            format!("epsilon must lie in (0, 1), got {}", self.epsilon),
        )?;
        Ok(())
    }
}

/// `u0(x_j) = c (1 - x_j²)` on the interior nodes.
pub fn initial_condition(grid: GridSpec, c: f64) -> Vec<f64> {
    grid.interior_points().iter().map(|x| c * (1.0 - x * x)).collect()
}

/// `g_j = λ/(1 - u_j)² - γ(1 - u_j)`.
pub fn source_term(u: &[f64], lambda: f64, gamma: f64) -> Result<Vec<f64>> {
    u.iter()
        .enumerate()
        .map(|(j, &v)| {
            if v >= 1.0 {
                Err(Error::Singularity { index: j, value: v })
            } else {
                let z = 1.0 - v;
                Ok(lambda / (z * z) - gamma * z)
            }
        })
        .collect()
}

/// Cholesky factorization of the stepping matrix `I + δt A`.
#[derive(Debug, Clone)]
pub struct Factorization {
    chol: Cholesky<f64, Dyn>,
    dt: f64,
}

pub fn stepping_matrix(op: &OperatorMatrix, dt: f64) -> DMatrix<f64> {
    DMatrix::identity(op.dim(), op.dim()) + op.entries() * dt
}

pub fn factorize(op: &OperatorMatrix, dt: f64) -> Result<Factorization> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("time step must be > 0, got {dt}")));
    }
    let chol = Cholesky::new(stepping_matrix(op, dt)).ok_or(Error::SingularMatrix)?;
    Ok(Factorization { chol, dt })
}

impl Factorization {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: b.len(),
            });
        }
        let mut v = DVector::from_column_slice(b);
        self.chol.solve_mut(&mut v);
        Ok(v.as_slice().to_vec())
    }

    fn solve_in_place(&self, v: &mut DVector<f64>) {
        self.chol.solve_mut(v);
    }
}

/// One step: `solve(F, u + δt·g + kick)`, with `kick_j = (1-u_j)^+ ΔN`
/// already formed by the caller.
pub fn step(u: &[f64], f: &Factorization, g: &[f64], kick: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    for len in [u.len(), g.len(), kick.len()] {
        if len != n {
            return Err(Error::Dimension { expected: n, got: len });
        }
    }
    let rhs: Vec<f64> = (0..n).map(|j| u[j] + f.dt() * g[j] + kick[j]).collect();
    f.solve(&rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub seed: u64,
    pub quenched: bool,
    /// Time of the last state with `max u <= 1 - ε`.
    pub t_quench: Option<f64>,
    /// `‖u(t_n)‖∞` for every compliant state, starting at `t_0`.
    pub sup_norm_series: Vec<f64>,
    pub steps_taken: usize,
    /// The state became non-finite before quenching or reaching `T`.
    pub failed: bool,
    pub embedding_warning: bool,
}

/// Everything a realization needs that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    operator: OperatorMatrix,
    factorization: Factorization,
    sampler: FgnSampler,
    u0: Vec<f64>,
    a: Coefficient,
    b: Coefficient,
}

enum Status {
    Running,
    Quenched,
    Failed,
}

impl Simulator {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let grid = params.grid()?;
        let operator = assemble_with(grid, params.alpha, params.rho(), params.kappa_rule)?;
        let factorization = factorize(&operator, params.dt())?;
        let sampler = FgnSampler::new(params.n_steps, params.hurst)?;
        let (a, b) = params.noise_coefficients();
        Ok(Simulator {
            u0: initial_condition(grid, params.c),
            params: params.clone(),
            operator,
            factorization,
            sampler,
            a,
            b,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn operator(&self) -> &OperatorMatrix {
        &self.operator
    }
    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn noise_path(&self, seed: u64) -> NoisePath {
        mixed_path_with(&self.sampler, self.params.dt(), &self.a, &self.b, seed)
    }

    pub fn run(&self, seed: u64) -> RealizationResult {
        let path = self.noise_path(seed);
        let mut r = self.run_path(&path, |_, _| {});
        r.seed = seed;
        r
    }

    /// Runs on a given noise path. `observe(n, u)` sees every state that is
    /// inspected by the quench test, including the violating one.
    pub fn run_path(&self, path: &NoisePath, mut observe: impl FnMut(usize, &[f64])) -> RealizationResult {
        let p = &self.params;
        let dt = p.dt();
        let n_steps = p.n_steps.min(path.n_steps);
        let mut u = DVector::from_column_slice(&self.u0);
        let mut sup = Vec::with_capacity(n_steps + 1);
        let mut status = Status::Running;
        let mut last = 0;
        for n in 0..=n_steps {
            observe(n, u.as_slice());
            last = n;
            let mut max = f64::NEG_INFINITY;
            let mut norm = 0.0f64;
            let mut finite = true;
            for &v in u.iter() {
                finite &= v.is_finite();
                max = max.max(v);
                norm = norm.max(v.abs());
            }
            if !finite {
                status = Status::Failed;
                break;
            }
            if max > 1.0 - p.epsilon {
                status = Status::Quenched;
                break;
            }
            sup.push(norm);
            if n == n_steps {
                break;
            }
            let dn = path.increment(n);
            for v in u.iter_mut() {
                let z = 1.0 - *v;
                *v += dt * (p.lambda / (z * z) - p.gamma * z) + z.max(0.0) * dn;
            }
            self.factorization.solve_in_place(&mut u);
        }
        let (quenched, failed) = match status {
            Status::Quenched => (true, false),
            Status::Failed => (false, true),
            Status::Running => (false, false),
        };
        RealizationResult {
            seed: 0,
            quenched,
            t_quench: quenched.then(|| last.saturating_sub(1) as f64 * dt),
            sup_norm_series: sup,
            steps_taken: last,
            failed,
            embedding_warning: path.embedding_clipped,
        }
    }

    /// All inspected states of a realization, for diagnostics and tests.
    pub fn trajectory(&self, path: &NoisePath) -> Vec<Vec<f64>> {
        let mut states = Vec::new();
        self.run_path(path, |_, u| states.push(u.to_vec()));
        states
    }
}

pub fn run_realization(params: &ModelParams, seed: u64) -> Result<RealizationResult> {
    Ok(Simulator::new(params)?.run(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::assemble_matrix;

    fn quiet() -> ModelParams {
        ModelParams {
            lambda: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            c: 0.0,
            n_steps: 200,
            ..ModelParams::default()
        }
    }

    #[test]
    fn initial_condition_examples() {
        let g = GridSpec::new(41).unwrap();
        assert!(initial_condition(g, 0.0).iter().all(|&v| v == 0.0));
        let g = GridSpec::new(40).unwrap();
        let u = initial_condition(g, 0.1);
        assert_eq!(u.len(), 39);
        assert!((u[19] - 0.1).abs() < 1e-15);
        assert!(u[0] < 0.1 && u[38] < 0.1);
    }

    #[test]
    fn source_examples() {
        assert_eq!(source_term(&[0.0; 3], 0.7, 0.0).unwrap(), vec![0.7; 3]);
        assert!((source_term(&[0.0], 0.4, 0.1).unwrap()[0] - 0.3).abs() < 1e-15);
        assert!((source_term(&[0.5], 0.1, 0.0).unwrap()[0] - 0.4).abs() < 1e-15);
        assert!(matches!(
            source_term(&[0.2, 1.0], 0.1, 0.0),
            Err(Error::Singularity { index: 1, .. })
        ));
    }

    #[test]
    fn factorization_round_trip() {
        let op = assemble_matrix(GridSpec::new(21).unwrap(), 0.6, 1.6).unwrap();
        let f = factorize(&op, 0.01).unwrap();
        let w: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = stepping_matrix(&op, 0.01) * DVector::from_column_slice(&w);
        let back = f.solve(b.as_slice()).unwrap();
        for (x, y) in back.iter().zip(&w) {
            assert!((x - y).abs() < 1e-12);
        }
        let tiny = stepping_matrix(&op, 1e-14);
        assert!((tiny - DMatrix::identity(20, 20)).amax() < 1e-10);
        assert!(factorize(&op, 0.0).is_err());
    }

    #[test]
    fn step_fixed_point_and_positivity() {
        let op = assemble_matrix(GridSpec::new(11).unwrap(), 0.6, 1.6).unwrap();
        let f = factorize(&op, 0.01).unwrap();
        let zero = vec![0.0; 10];
        assert_eq!(step(&zero, &f, &zero, &zero).unwrap(), zero);
        let g = source_term(&zero, 0.5, 0.0).unwrap();
        assert!(step(&zero, &f, &g, &zero).unwrap().iter().all(|&v| v > 0.0));
        assert!(step(&zero[..9], &f, &g, &zero).is_err());
    }

    #[test]
    fn quiet_run_stays_at_zero() {
        let r = run_realization(&quiet(), 1).unwrap();
        assert!(!r.quenched && !r.failed);
        assert_eq!(r.sup_norm_series.len(), 201);
        assert!(r.sup_norm_series.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn immediate_quench() {
        let p = ModelParams {
            c: 0.9,
            epsilon: 0.5,
            ..quiet()
        };
        let r = run_realization(&p, 1).unwrap();
        assert!(r.quenched);
        assert_eq!(r.t_quench, Some(0.0));
        assert!(r.sup_norm_series.is_empty());
    }

    #[test]
    fn strong_forcing_quenches() {
        let p = ModelParams {
            lambda: 1.4,
            n_steps: 2000,
            ..ModelParams::default()
        };
        let sim = Simulator::new(&p).unwrap();
        for seed in 0..5 {
            let r = sim.run(seed);
            assert!(r.quenched);
            let t = r.t_quench.unwrap();
            assert!((0.0..=1.0).contains(&t));
            assert!(r.sup_norm_series.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let p = ModelParams {
            n_steps: 500,
            ..ModelParams::default()
        };
        assert_eq!(run_realization(&p, 77).unwrap(), run_realization(&p, 77).unwrap());
    }

    #[test]
    fn invalid_params() {
        let p = ModelParams {
            c: 1.0,
            ..ModelParams::default()
        };
        assert!(matches!(p.validate(), Err(Error::Range(_))));
        let p = ModelParams {
            hurst: 0.5,
            ..ModelParams::default()
        };
        assert!(p.validate().is_err());
    }
}
