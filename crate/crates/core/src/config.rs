//! Run configuration: flat `key = value` text (one key per line, `#`
//! comments) or a flat JSON object with the same keys.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `mode` | `simulate` | `simulate`, `sweep`, `bounds`, `eigen`, `validate` |
//! | `lambda` | 0.4 | forcing strength |
//! | `gamma` | 0 | regularizer coefficient |
//! | `alpha` | 0.6 | fractional order |
//! | `rho` | `1 + alpha` | operator splitting parameter |
//! | `kappa_rule` | `standard` | `standard` or `alternative` |
//! | `H` | 0.7 | Hurst index |
//! | `kappa1`, `kappa2` | 0.1 | noise intensities |
//! | `c` | 0.1 | initial amplitude |
//! | `T` | 1 | horizon |
//! | `N` | 10000 | time steps |
//! | `M` | 41 | space subintervals |
//! | `a`, `b` | 1 | noise time profiles (number or `t:v;t:v` table) |
//! | `k` | 2 | diffusion profile used by the bounds |
//! | `epsilon` | 2.2204e-16 | quench tolerance |
//! | `eta1`, `eta2` | 1 | growth-envelope constants |
//! | `zeta_m`, `zeta_M` | 1 | envelope extrema |
//! | `fbm_variance` | `exact` | `exact` or `conservative` |
//! | `W1` | `1/max ψ1` | eigenfunction initial datum `v0 = W1 ψ1` |
//! | `Lambda` | none | constant of the gamma lower bound |
//! | `theta` | 0.6 | exponent of `h(t) = t^{2θ}` |
//! | `T_trunc` | 5 | truncation of the general lower bound |
//! | `bound_paths` | 2000 | sampled paths in the bounds report |
//! | `bound_steps` | 2000 | time steps per sampled path |
//! | `realizations` | 2000 | ensemble size |
//! | `seed` | 1 | master seed |
//! | `out` | `out` | output directory |
//! | `threads` | all cores | worker threads |
//! | `preset` | none | `t1`, `t2`, `t3`, `fig2`, `fig2-low` |
//! | `full` | false | full-scale preset (N = 10⁴, N_R = 10⁴, full grids) |

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bounds::FbmVariance;
use crate::coefficient::Coefficient;
use crate::monte_carlo::Preset;
use crate::solver::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Simulate,
    Sweep,
    Bounds,
    Eigen,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Bounds => "bounds",
            Mode::Eigen => "eigen",
            Mode::Validate => "validate",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Mode::Simulate, Mode::Sweep, Mode::Bounds, Mode::Eigen, Mode::Validate]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// Settings of the bounds module that are not part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub eta1: f64,
    pub eta2: f64,
    pub zeta_m: f64,
    pub zeta_max: f64,
    pub fbm_variance: FbmVariance,
    pub w1: Option<f64>,
    pub lambda_cap: Option<f64>,
    pub theta: f64,
    pub t_trunc: f64,
    pub n_paths: u64,
    pub n_steps: usize,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            eta1: 1.0,
            eta2: 1.0,
            zeta_m: 1.0,
            zeta_max: 1.0,
            fbm_variance: FbmVariance::Exact,
            w1: None,
            lambda_cap: None,
            theta: 0.6,
            t_trunc: 5.0,
            n_paths: 2000,
            n_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: ModelParams,
    pub bounds: BoundSettings,
    pub n_realizations: u64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub preset: Option<Preset>,
    pub full: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Simulate,
            model: ModelParams::default(),
            bounds: BoundSettings::default(),
            n_realizations: 2000,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            threads: None,
            preset: None,
            full: false,
        }
    }
}

pub const KEYS: [&str; 36] = [
    "mode", "lambda", "gamma", "alpha", "rho", "kappa_rule", "H", "kappa1", "kappa2", "c", "T", "N",
    "M", "a", "b", "k", "epsilon", "eta1", "eta2", "zeta_m", "zeta_M", "fbm_variance", "W1",
    "Lambda", "theta", "T_trunc", "bound_paths", "bound_steps", "realizations", "seed", "out",
    "threads", "preset", "full", "kappa", "include",
];

// Keys accepted in documents; "kappa" and "include" are reserved and rejected.
fn valid_keys() -> String {
    KEYS[..34].join(", ")
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

impl RunConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let m = &mut self.model;
        let b = &mut self.bounds;
        match key {
            "mode" => self.mode = v.parse()?,
            "lambda" => m.lambda = num(key, v)?,
            "gamma" => m.gamma = num(key, v)?,
            "alpha" => m.alpha = num(key, v)?,
            "rho" => m.rho = Some(num(key, v)?),
            "kappa_rule" => m.kappa_rule = v.parse()?,
            "H" => m.hurst = num(key, v)?,
            "kappa1" => m.kappa1 = num(key, v)?,
            "kappa2" => m.kappa2 = num(key, v)?,
            "c" => m.c = num(key, v)?,
            "T" => m.t_end = num(key, v)?,
            "N" => m.n_steps = num(key, v)?,
            "M" => m.m = num(key, v)?,
            "a" => m.a_fn = Coefficient::parse_config_string(v)?,
            "b" => m.b_fn = Coefficient::parse_config_string(v)?,
            "k" => m.k_fn = Coefficient::parse_config_string(v)?,
            "epsilon" => m.epsilon = num(key, v)?,
            "eta1" => b.eta1 = num(key, v)?,
            "eta2" => b.eta2 = num(key, v)?,
            "zeta_m" => b.zeta_m = num(key, v)?,
            "zeta_M" => b.zeta_max = num(key, v)?,
            "fbm_variance" => {
                b.fbm_variance = match v {
                    "exact" => FbmVariance::Exact,
                    "conservative" => FbmVariance::Conservative,
                    _ => return Err(Error::Config(format!("`fbm_variance` must be exact or conservative, got `{v}`"))),
                }
            }
            "W1" => b.w1 = Some(num(key, v)?),
            "Lambda" => b.lambda_cap = Some(num(key, v)?),
            "theta" => b.theta = num(key, v)?,
            "T_trunc" => b.t_trunc = num(key, v)?,
            "bound_paths" => b.n_paths = num(key, v)?,
            "bound_steps" => b.n_steps = num(key, v)?,
            "realizations" => self.n_realizations = num(key, v)?,
            "seed" => self.master_seed = num(key, v)?,
            "out" => self.output_dir = PathBuf::from(v),
            "threads" => self.threads = Some(num(key, v)?),
            "preset" => self.preset = Some(v.parse()?),
            "full" => self.full = num(key, v)?,
            _ => {
                return Err(Error::UnknownKey {
                    key: key.to_string(),
                    valid: valid_keys(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let b = &self.bounds;
        let range = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Range(msg.to_string())) };
        range(b.eta1 > 0.0 && b.eta1 <= b.eta2, "need 0 < eta1 <= eta2")?;
        range(b.zeta_m >= 0.0 && b.zeta_m <= b.zeta_max, "need 0 <= zeta_m <= zeta_M")?;
        range(b.w1.is_none_or(|w| w > 0.0), "W1 must be > 0")?;
        range(b.lambda_cap.is_none_or(|l| l >= 0.0), "Lambda must be >= 0")?;
        range(b.theta > 0.0, "theta must be > 0")?;
        range(b.t_trunc > 0.0, "T_trunc must be > 0")?;
        range(b.n_paths >= 1, "bound_paths must be >= 1")?;
        range(b.n_steps >= 1, "bound_steps must be >= 1")?;
        range(self.n_realizations >= 1, "realizations must be >= 1")?;
        range(self.threads.is_none_or(|t| t >= 1), "threads must be >= 1")?;
        Ok(())
    }
}

/// Parses a configuration document and applies defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        for (key, value) in map {
            let v = match value {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => return Err(Error::Config(format!("`{key}`: unsupported value {other}"))),
            };
            cfg.set(&key, &v)?;
        }
    } else {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Flat text form; `parse_config(&emit_config(c)) == c`.
pub fn emit_config(cfg: &RunConfig) -> String {
    let m = &cfg.model;
    let b = &cfg.bounds;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("mode", cfg.mode.name().to_string());
    kv("lambda", m.lambda.to_string());
    kv("gamma", m.gamma.to_string());
    kv("alpha", m.alpha.to_string());
    if let Some(r) = m.rho {
        kv("rho", r.to_string());
    }
    kv("kappa_rule", m.kappa_rule.to_string());
    kv("H", m.hurst.to_string());
    kv("kappa1", m.kappa1.to_string());
    kv("kappa2", m.kappa2.to_string());
    kv("c", m.c.to_string());
    kv("T", m.t_end.to_string());
    kv("N", m.n_steps.to_string());
    kv("M", m.m.to_string());
    kv("a", m.a_fn.to_config_string());
    kv("b", m.b_fn.to_config_string());
    kv("k", m.k_fn.to_config_string());
    kv("epsilon", m.epsilon.to_string());
    kv("eta1", b.eta1.to_string());
    kv("eta2", b.eta2.to_string());
    kv("zeta_m", b.zeta_m.to_string());
    kv("zeta_M", b.zeta_max.to_string());
    kv(
        "fbm_variance",
        match b.fbm_variance {
            FbmVariance::Exact => "exact",
            FbmVariance::Conservative => "conservative",
        }
        .to_string(),
    );
    if let Some(w) = b.w1 {
        kv("W1", w.to_string());
    }
    if let Some(l) = b.lambda_cap {
        kv("Lambda", l.to_string());
    }
    kv("theta", b.theta.to_string());
    kv("T_trunc", b.t_trunc.to_string());
    kv("bound_paths", b.n_paths.to_string());
    kv("bound_steps", b.n_steps.to_string());
    kv("realizations", cfg.n_realizations.to_string());
    kv("seed", cfg.master_seed.to_string());
    kv("out", cfg.output_dir.display().to_string());
    if let Some(t) = cfg.threads {
        kv("threads", t.to_string());
    }
    if let Some(p) = cfg.preset {
        kv("preset", p.name().to_string());
    }
    kv("full", cfg.full.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.model.m, 41);
        assert_eq!(c.model.n_steps, 10_000);
        assert_eq!(c.model.epsilon, 2.2204e-16);
    }

    #[test]
    fn lambda_row() {
        let c = parse_config("lambda = 0.4\n").unwrap();
        assert_eq!(c.model.lambda, 0.4);
        assert_eq!((c.model.alpha, c.model.hurst, c.model.kappa1, c.model.kappa2), (0.6, 0.7, 0.1, 0.1));
    }

    #[test]
    fn rejects_small_hurst() {
        let e = parse_config("H = 0.4").unwrap_err();
        assert!(matches!(e, Error::Range(ref m) if m.contains("H")), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let e = parse_config("lamda = 0.4").unwrap_err();
        match e {
            Error::UnknownKey { key, valid } => {
                assert_eq!(key, "lamda");
                assert!(valid.contains("lambda"));
            }
            other => panic!("{other}"),
        }
        assert!(parse_config("kappa = 1").is_err());
    }

    #[test]
    fn comments_and_json() {
        let c = parse_config("# header\nM = 21 # coarse\n\nmode = eigen").unwrap();
        assert_eq!(c.model.m, 21);
        assert_eq!(c.mode, Mode::Eigen);
        let j = parse_config(r#"{"M": 21, "mode": "eigen", "a": "0:1;1:0.5", "full": true}"#).unwrap();
        assert_eq!(j.model.m, 21);
        assert!(j.full);
        assert!(!j.model.a_fn.is_constant());
        assert!(parse_config("M 21").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "mode = sweep\nlambda = 0.8\ngamma = 0.1\nrho = 1.7\nkappa_rule = alternative\n\
                    a = 0:1;0.5:0.25\nW1 = 0.3\nLambda = 2\nthreads = 3\npreset = fig2-low\nfull = true\n\
                    fbm_variance = conservative\nseed = 18446744073709551615";
        let c = parse_config(text).unwrap();
        let again = parse_config(&emit_config(&c)).unwrap();
        assert_eq!(c, again);
        assert_eq!(emit_config(&again), emit_config(&c));
    }
}
