//! Time-dependent scalar coefficients `a(t)`, `b(t)`, `k(t)`.

use serde::{Deserialize, Serialize};

use crate::quadrature::integrate_rel;
use crate::{Error, Result};

/// A deterministic coefficient of time: either a constant or a piecewise
/// linear table, held constant beyond its first and last knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(0.0)
    }
}

impl Coefficient {
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Parameter(format!(
                "coefficient table needs matching non-empty columns ({} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "coefficient table times must be strictly increasing".into(),
            ));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("coefficient table has non-finite entries".into()));
        }
        Ok(Coefficient::Tabulated { times, values })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Tabulated { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let j = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[j]) / (times[j + 1] - times[j]);
                values[j] + w * (values[j + 1] - values[j])
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }

    /// `∫_0^t c(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        self.integral_of(t, |v| v)
    }

    /// `∫_0^t c(s)² ds`.
    pub fn square_integral(&self, t: f64) -> f64 {
        self.integral_of(t, |v| v * v)
    }

    /// `∫_s^t c(r)² dr` for `s ≤ t`.
    pub fn square_integral_between(&self, s: f64, t: f64) -> f64 {
        self.integral_between(s.max(0.0), t, |v| v * v)
    }

    /// `½∫_0^t c²` at `t_k = k·dt`, `k = 0..=n`.
    pub fn cumulative_half_square(&self, dt: f64, n: usize) -> Vec<f64> {
        match self {
            Coefficient::Constant(c) => (0..=n).map(|k| 0.5 * c * c * (k as f64 * dt)).collect(),
            Coefficient::Tabulated { .. } => {
                let mut out = Vec::with_capacity(n + 1);
                let mut acc = 0.0;
                out.push(0.0);
                for k in 0..n {
                    acc += 0.5 * self.square_integral_between(k as f64 * dt, (k + 1) as f64 * dt);
                    out.push(acc);
                }
                out
            }
        }
    }

    fn integral_of(&self, t: f64, g: impl Fn(f64) -> f64) -> f64 {
        self.integral_between(0.0, t, g)
    }

    fn integral_between(&self, s: f64, t: f64, g: impl Fn(f64) -> f64) -> f64 {
        if t <= s {
            return 0.0;
        }
        match self {
            Coefficient::Constant(c) => g(*c) * (t - s),
            Coefficient::Tabulated { times, .. } => {
                let mut knots = vec![s];
                knots.extend(times.iter().copied().filter(|&r| r > s && r < t));
                knots.push(t);
                knots
                    .windows(2)
                    .map(|w| integrate_rel(|s| g(self.value(s)), w[0], w[1], 1e-13).value)
                    .sum()
            }
        }
    }

    /// Flat text form used by the key=value config format.
    pub fn to_config_string(&self) -> String {
        match self {
            Coefficient::Constant(c) => format!("{c}"),
            Coefficient::Tabulated { times, values } => times
                .iter()
                .zip(values)
                .map(|(t, v)| format!("{t}:{v}"))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }

    pub fn parse_config_string(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains(':') {
            let c: f64 = s
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse coefficient `{s}`")))?;
            return Ok(Coefficient::Constant(c));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for pair in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (t, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("bad table entry `{pair}`")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{x}` in coefficient table")))
            };
            times.push(parse(t)?);
            values.push(parse(v)?);
        }
        Coefficient::tabulated(times, values).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrals() {
        let c = Coefficient::Constant(0.5);
        assert_eq!(c.integral(2.0), 1.0);
        assert_eq!(c.square_integral(2.0), 0.5);
        assert_eq!(c.square_integral(-1.0), 0.0);
    }

    #[test]
    fn table_interpolates_and_integrates() {
        let c = Coefficient::tabulated(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert!((c.value(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(c.value(3.0), 2.0);
        // ∫_0^1 (2s)² ds = 4/3, then constant 2 on [1, 2]
        assert!((c.square_integral(2.0) - (4.0 / 3.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn config_string_round_trip() {
        let c = Coefficient::tabulated(vec![0.0, 0.5, 1.0], vec![1.0, 0.25, -3.0]).unwrap();
        let back = Coefficient::parse_config_string(&c.to_config_string()).unwrap();
        assert_eq!(c, back);
        assert_eq!(
            Coefficient::parse_config_string("1.5").unwrap(),
            Coefficient::Constant(1.5)
        );
    }

    #[test]
    fn rejects_unsorted_table() {
        assert!(Coefficient::tabulated(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
