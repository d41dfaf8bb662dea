//! Small-instance trajectories against a direct re-implementation: dense
//! assembly entry by entry, Gaussian elimination with partial pivoting,
//! and the explicit update written out per node.

use quench_core::solver::ModelParams;
use statrs::function::gamma::gamma;

fn naive_matrix(m: usize, alpha: f64) -> Vec<Vec<f64>> {
    let rho = 1.0 + alpha;
    let chi = rho - 2.0 * alpha;
    let h = 2.0 / m as f64;
    let c = 4f64.powf(alpha) * gamma(0.5 + alpha) / (std::f64::consts::PI.sqrt() * gamma(-alpha).abs());
    let pref = c / (chi * h.powf(2.0 * alpha));
    let weight = |k: usize| -> f64 {
        let k = k as f64;
        if k == 1.0 {
            2f64.powf(chi) // kappa = 1 for rho < 2
        } else {
            ((k + 1.0).powf(chi) - (k - 1.0).powf(chi)) / k.powf(rho)
        }
    };
    let mut sum = 0.0;
    for k in 1..=m {
        sum += weight(k);
    }
    let diag = pref * (sum + chi / (alpha * (m as f64).powf(2.0 * alpha)));
    let n = m - 1;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == j {
                diag
            } else {
                -pref * weight(i.abs_diff(j)) / 2.0
            };
        }
    }
    a
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    x
}

/// States inspected by the quench test, in order.
pub fn naive_trajectory(p: &ModelParams, db: &[f64], dbh: &[f64]) -> Vec<Vec<f64>> {
    let m = p.m;
    let dt = p.t_end / p.n_steps as f64;
    let a = naive_matrix(m, p.alpha);
    let n = m - 1;
    let mut step = a.clone();
    for i in 0..n {
        for j in 0..n {
            step[i][j] = dt * a[i][j] + if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut u: Vec<f64> = (1..m)
        .map(|j| {
            let x = -1.0 + j as f64 * 2.0 / m as f64;
            p.c * (1.0 - x * x)
        })
        .collect();
    let mut states = Vec::new();
    for k in 0..=p.n_steps {
        states.push(u.clone());
        if u.iter().any(|v| !v.is_finite()) || u.iter().any(|&v| v > 1.0 - p.epsilon) || k == p.n_steps {
            break;
        }
        let dn = p.kappa1 * db[k] + p.kappa2 * dbh[k];
        let rhs: Vec<f64> = u
            .iter()
            .map(|&v| {
                let z = 1.0 - v;
                v + dt * (p.lambda / (z * z) - p.gamma * z) + z.max(0.0) * dn
            })
            .collect();
        u = gauss_solve(step.clone(), rhs);
    }
    states
}
