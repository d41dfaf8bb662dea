//! Principal eigenpair of the discrete operator by inverse iteration.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::operator::{GridSpec, OperatorMatrix};
use crate::rng::stream_rng;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 20_000;
const RELATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub mu1: f64,
    /// Positive, with trapezoidal integral `dx·Σψ = 1`.
    pub psi1: Vec<f64>,
    /// `‖Aψ1 - μ1ψ1‖∞` for the normalized `ψ1`.
    pub residual: f64,
    pub iterations: usize,
}

impl EigenPair {
    pub fn psi_min(&self) -> f64 {
        self.psi1.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn psi_max(&self) -> f64 {
        self.psi1.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn principal_eigenpair(op: &OperatorMatrix) -> Result<EigenPair> {
    principal_eigenpair_of(op.entries(), op.grid())
}

fn norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn residual(a: &DMatrix<f64>, v: &DVector<f64>, mu: f64) -> f64 {
    (a * v - v * mu).amax()
}

/// Smallest eigenvalue and its eigenvector for a symmetric positive definite
/// matrix on `grid`, by inverse iteration started from the constant vector.
pub fn principal_eigenpair_of(a: &DMatrix<f64>, grid: GridSpec) -> Result<EigenPair> {
    let n = a.nrows();
    if n != grid.len() || a.ncols() != n {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: n,
        });
    }
    let chol = Cholesky::new(a.clone()).ok_or(Error::SingularMatrix)?;
    let tol = RELATIVE_TOL * norm_inf(a);
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut mu = v.dot(&(a * &v));
    let mut res = residual(a, &v, mu);
    let mut it = 0;
    while res > tol {
        if it == MAX_ITERATIONS {
            return Err(Error::Spectral {
                iterations: it,
                residual: res,
            });
        }
        chol.solve_mut(&mut v);
        let norm = v.norm();
        v /= norm;
        mu = v.dot(&(a * &v));
        res = residual(a, &v, mu);
        it += 1;
    }
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    v /= grid.dx() * v.sum();
    let res = residual(a, &v, mu);
    Ok(EigenPair {
        mu1: mu,
        psi1: v.as_slice().to_vec(),
        residual: res,
        iterations: it,
    })
}

pub fn rayleigh_quotient(a: &DMatrix<f64>, u: &[f64]) -> f64 {
    let u = DVector::from_column_slice(u);
    u.dot(&(a * &u)) / u.norm_squared()
}

/// Checks `u·Au ≥ μ1 - 1e-10` for `n_trials` random unit vectors.
pub fn rayleigh_min_check(op: &OperatorMatrix, pair: &EigenPair, n_trials: usize, seed: u64) -> bool {
    let mut rng = stream_rng(seed, 0);
    let n = op.dim();
    (0..n_trials).all(|_| {
        let u: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        rayleigh_quotient(op.entries(), &u) >= pair.mu1 - 1e-10
    })
}

/// Trapezoidal `∫ v0 ψ1 dx`.
pub fn inner_product_v0_psi1(v0: &[f64], pair: &EigenPair, grid: GridSpec) -> Result<f64> {
    if v0.len() != pair.psi1.len() {
        return Err(Error::Dimension {
            expected: pair.psi1.len(),
            got: v0.len(),
        });
    }
    Ok(grid.dx() * v0.iter().zip(&pair.psi1).map(|(a, b)| a * b).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::assemble_matrix;
    use nalgebra::SymmetricEigen;

    #[test]
    fn identity() {
        let g = GridSpec::new(5).unwrap();
        let p = principal_eigenpair_of(&DMatrix::identity(4, 4), g).unwrap();
        assert_eq!(p.mu1, 1.0);
        for v in &p.psi1 {
            assert!((v - 1.0 / (4.0 * g.dx())).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let p = principal_eigenpair_of(&a, GridSpec::new(3).unwrap()).unwrap();
        assert!((p.mu1 - 1.0).abs() < 1e-12);
        assert!((p.psi1[0] - p.psi1[1]).abs() < 1e-10);
    }

    #[test]
    fn fractional_operator_pair() {
        let op = assemble_matrix(GridSpec::new(41).unwrap(), 0.6, 1.6).unwrap();
        let p = principal_eigenpair(&op).unwrap();
        assert!(p.psi_min() > 0.0);
        assert!(p.residual <= 1e-10 * op.norm_inf());
        assert!((op.grid().integrate(&p.psi1) - 1.0).abs() < 1e-10);
        let av = op.apply(&p.psi1).unwrap();
        for (x, y) in av.iter().zip(&p.psi1) {
            assert!((x - p.mu1 * y).abs() < 1e-10 * op.norm_inf());
        }
        assert!(rayleigh_min_check(&op, &p, 100, 1));
        let q = rayleigh_quotient(op.entries(), &p.psi1);
        assert!((q - p.mu1).abs() < 1e-10);
    }

    #[test]
    fn orthogonal_direction_exceeds_second_eigenvalue() {
        let op = assemble_matrix(GridSpec::new(11).unwrap(), 0.6, 1.6).unwrap();
        let p = principal_eigenpair(&op).unwrap();
        let eig = SymmetricEigen::new(op.entries().clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let psi = DVector::from_column_slice(&p.psi1).normalize();
        let mut rng = stream_rng(3, 0);
        for _ in 0..50 {
            let mut u = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
            let proj = psi.dot(&u);
            u -= &psi * proj;
            let q = rayleigh_quotient(op.entries(), u.as_slice());
            assert!(q >= ev[1] - 1e-9, "{q} < {}", ev[1]);
        }
    }

    #[test]
    fn inner_products() {
        let g = GridSpec::new(41).unwrap();
        let op = assemble_matrix(g, 0.6, 1.6).unwrap();
        let p = principal_eigenpair(&op).unwrap();
        assert_eq!(inner_product_v0_psi1(&vec![0.0; 40], &p, g).unwrap(), 0.0);
        let self_ip = inner_product_v0_psi1(&p.psi1, &p, g).unwrap();
        assert!(self_ip > 0.0);
        assert!(inner_product_v0_psi1(&[1.0], &p, g).is_err());
    }
}
