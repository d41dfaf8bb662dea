//! Finite-difference fractional Laplacian on `(-1, 1)` with `u = 0` outside.
//!
//! The scheme splits the singular kernel with a parameter `ρ ∈ (2α, 2]`,
//! writing `χ = ρ - 2α` and, for a grid of `M` subintervals with `h = 2/M`,
//!
//! ```text
//! W_1 = 2^χ + κ - 1,   W_k = (k+1)^χ - (k-1)^χ  (k ≥ 2),   w_k = W_k / k^ρ
//! A_ii = C/(χ h^{2α}) · ( Σ_{k=1}^{M} w_k + χ/(α M^{2α}) )
//! A_ij = -C/(χ h^{2α}) · w_{|i-j|} / 2
//! ```
//!
//! with `C = C_{1,α}` the normalizing constant of the singular integral.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    m: usize,
}

impl GridSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::Grid(format!("need at least 3 subintervals, got {m}")));
        }
        Ok(GridSpec { m })
    }

    /// Number of subintervals of `[-1, 1]`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        2.0 / self.m as f64
    }

    /// Number of interior unknowns, `M - 1`.
    pub fn len(&self) -> usize {
        self.m - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `x_j = -1 + j·dx` for `j = 0..=M`.
    pub fn node(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.dx()
    }

    pub fn interior_points(&self) -> Vec<f64> {
        (1..self.m).map(|j| self.node(j)).collect()
    }

    /// Trapezoidal `∫ f` for an interior vector (boundary values are zero).
    pub fn integrate(&self, interior: &[f64]) -> f64 {
        self.dx() * interior.iter().sum::<f64>()
    }
}

/// How the correction `κ` in the first weight `W_1` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaRule {
    /// `κ = 1` for `ρ < 2` and `κ = 2` for `ρ = 2`.
    #[default]
    Standard,
    /// `κ = 1 + 2α` when `1 < 2α < 2`, otherwise `κ = 1`.
    Alternative,
}

impl KappaRule {
    pub fn kappa(self, alpha: f64, rho: f64) -> f64 {
        match self {
            KappaRule::Standard => {
                if rho >= 2.0 {
                    2.0
                } else {
                    1.0
                }
            }
            KappaRule::Alternative => {
                if 2.0 * alpha > 1.0 && 2.0 * alpha < 2.0 {
                    1.0 + 2.0 * alpha
                } else {
                    1.0
                }
            }
        }
    }
}

impl std::str::FromStr for KappaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" => Ok(KappaRule::Standard),
            "alternative" => Ok(KappaRule::Alternative),
            other => Err(Error::Config(format!(
                "kappa_rule must be `standard` or `alternative`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for KappaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KappaRule::Standard => "standard",
            KappaRule::Alternative => "alternative",
        })
    }
}

/// `C_{1,α} = 4^α Γ(1/2 + α) / (√π |Γ(-α)|)`.
pub fn fractional_constant(alpha: f64) -> f64 {
    4f64.powf(alpha) * gamma(0.5 + alpha) / (std::f64::consts::PI.sqrt() * gamma(-alpha).abs())
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: GridSpec,
    alpha: f64,
    rho: f64,
    kappa: f64,
    entries: DMatrix<f64>,
}

pub fn default_rho(alpha: f64) -> f64 {
    1.0 + alpha
}

/// Assembles the operator with the standard `κ` rule.
pub fn assemble_matrix(grid: GridSpec, alpha: f64, rho: f64) -> Result<OperatorMatrix> {
    assemble_with(grid, alpha, rho, KappaRule::Standard)
}

pub fn assemble_with(grid: GridSpec, alpha: f64, rho: f64, rule: KappaRule) -> Result<OperatorMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(rho > 2.0 * alpha && rho <= 2.0) {
        return Err(Error::Parameter(format!(
            "rho must lie in (2·alpha, 2] = ({}, 2], got {rho}",
            2.0 * alpha
        )));
    }
    let m = grid.m();
    let chi = rho - 2.0 * alpha;
    let kappa = rule.kappa(alpha, rho);

    let mut w = vec![0.0; m + 1];
    w[1] = 2f64.powf(chi) + kappa - 1.0;
    for (k, wk) in w.iter_mut().enumerate().skip(2) {
        let kf = k as f64;
        *wk = ((kf + 1.0).powf(chi) - (kf - 1.0).powf(chi)) / kf.powf(rho);
    }
    let scale = fractional_constant(alpha) / (chi * grid.dx().powf(2.0 * alpha));
    let diag = scale * (w[1..].iter().sum::<f64>() + chi / (alpha * (m as f64).powf(2.0 * alpha)));

    let n = grid.len();
    let entries = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else {
            -0.5 * scale * w[i.abs_diff(j)]
        }
    });
    Ok(OperatorMatrix {
        grid,
        alpha,
        rho,
        kappa,
        entries,
    })
}

impl OperatorMatrix {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn chi(&self) -> f64 {
        self.rho - 2.0 * self.alpha
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: u.len(),
            });
        }
        let v = &self.entries * DVector::from_column_slice(u);
        Ok(v.as_slice().to_vec())
    }

    /// Max row sum of absolute values.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Writes the matrix as headerless row-major CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        for row in self.entries.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `max_j |(A s)_j - f_j|` where `s` is sampled on the interior nodes and
/// `f` is a reference value of the operator applied to `s`.
pub fn discrepancy(
    op: &OperatorMatrix,
    s: impl Fn(f64) -> f64,
    reference: impl Fn(f64) -> f64,
) -> f64 {
    let x = op.grid().interior_points();
    let sv: Vec<f64> = x.iter().map(|&x| s(x)).collect();
    let av = op.apply(&sv).expect("sampled vector has grid length");
    x.iter()
        .zip(&av)
        .map(|(&x, a)| (a - reference(x)).abs())
        .fold(0.0, f64::max)
}

/// Distance between the discrete operator and the ordinary `-d²/dx²` on
/// `s(x) = sin(π(x+1)/2)`, for `α` close to 1.
pub fn laplacian_limit_check(grid: GridSpec, alpha: f64) -> Result<f64> {
    if !(0.95..1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "laplacian limit check needs alpha in [0.95, 1), got {alpha}"
        )));
    }
    let op = assemble_matrix(grid, alpha, default_rho(alpha))?;
    let k = std::f64::consts::FRAC_PI_2;
    let s = move |x: f64| (k * (x + 1.0)).sin();
    Ok(discrepancy(&op, s, move |x| k * k * s(x)))
}
