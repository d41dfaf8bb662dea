//! CSV and JSON writers for sweeps, trajectories, realizations and
//! eigenfunctions. Floats are written in shortest round-trip form, so
//! reading a table back gives bit-identical values.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::monte_carlo::{EnsembleStats, SweepPoint, SweepResult};
use crate::operator::GridSpec;
use crate::solver::RealizationResult;
use crate::spectral::EigenPair;
use crate::{Error, Result};

/// Statistic columns following the parameter columns.
pub const STAT_COLUMNS: [&str; 7] = [
    "probability",
    "mean_Tq",
    "var_Tq",
    "std_error",
    "failures",
    "n_realizations",
    "n_quenched",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per sweep point; missing moments are empty fields.
pub fn emit_table(sweep: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<&str> = sweep
        .axes
        .iter()
        .map(String::as_str)
        .chain(STAT_COLUMNS)
        .collect();
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for p in &sweep.points {
        let s = &p.stats;
        let mut row: Vec<String> = p.values.iter().map(f64::to_string).collect();
        row.extend([
            s.quench_probability.to_string(),
            opt(s.mean_tq),
            opt(s.var_tq),
            s.std_error_p.to_string(),
            s.failures.to_string(),
            s.n_realizations.to_string(),
            s.n_quenched.to_string(),
        ]);
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`emit_table`] into `(axes, points)`.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<SweepPoint>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let n_axes = header
        .len()
        .checked_sub(STAT_COLUMNS.len())
        .filter(|&n| header[n..] == STAT_COLUMNS)
        .ok_or_else(|| Error::Config(format!("{}: not a sweep table", path.display())))?;
    let bad = |f: &str| Error::Config(format!("{}: bad field `{f}`", path.display()));
    let float = |f: &str| f.parse::<f64>().map_err(|_| bad(f));
    let optional = |f: &str| if f.is_empty() { Ok(None) } else { float(f).map(Some) };
    let count = |f: &str| f.parse::<u64>().map_err(|_| bad(f));
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let f: Vec<&str> = rec.iter().collect();
        let values = f[..n_axes].iter().map(|v| float(v)).collect::<Result<Vec<_>>>()?;
        let s = &f[n_axes..];
        points.push(SweepPoint {
            values,
            stats: EnsembleStats {
                quench_probability: float(s[0])?,
                mean_tq: optional(s[1])?,
                var_tq: optional(s[2])?,
                std_error_p: float(s[3])?,
                failures: count(s[4])?,
                n_realizations: count(s[5])?,
                n_quenched: count(s[6])?,
            },
        });
    }
    Ok((header[..n_axes].to_vec(), points))
}

/// `t, sup_norm` rows for one realization.
pub fn write_trajectory(result: &RealizationResult, dt: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["t", "sup_norm"]).map_err(|e| Error::csv(path, e))?;
    for (k, v) in result.sup_norm_series.iter().enumerate() {
        w.write_record([(k as f64 * dt).to_string(), v.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct RealizationRecord {
    seed: u64,
    quenched: bool,
    #[serde(rename = "T_q")]
    t_quench: Option<f64>,
    failed: bool,
    steps_taken: usize,
    embedding_warning: bool,
}

pub fn realization_json(result: &RealizationResult) -> Result<String> {
    let rec = RealizationRecord {
        seed: result.seed,
        quenched: result.quenched,
        t_quench: result.t_quench,
        failed: result.failed,
        steps_taken: result.steps_taken,
        embedding_warning: result.embedding_warning,
    };
    Ok(serde_json::to_string_pretty(&rec)?)
}

/// `x, psi1` rows at the interior nodes.
pub fn write_eigenfunction(pair: &EigenPair, grid: GridSpec, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["x", "psi1"]).map_err(|e| Error::csv(path, e))?;
    for (x, v) in grid.interior_points().iter().zip(&pair.psi1) {
        w.write_record([x.to_string(), v.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(p: f64, mean: Option<f64>) -> EnsembleStats {
        EnsembleStats {
            n_realizations: 7,
            n_quenched: 3,
            failures: 1,
            quench_probability: p,
            mean_tq: mean,
            var_tq: mean.map(|m| m * 0.1),
            std_error_p: 0.1 / 3.0,
        }
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let sweep = SweepResult {
            axes: vec!["alpha".into(), "H".into()],
            points: vec![
                SweepPoint { values: vec![0.2, 0.55], stats: stats(3.0 / 7.0, Some(0.123456789012345678)) },
                SweepPoint { values: vec![0.1 + 0.2, 0.9], stats: stats(0.0, None) },
            ],
            master_seed: 5,
            n_realizations: 7,
        };
        emit_table(&sweep, &path).unwrap();
        let (axes, points) = read_table(&path).unwrap();
        assert_eq!(axes, sweep.axes);
        assert_eq!(points, sweep.points);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("alpha,H,probability,mean_Tq,var_Tq,std_error,failures"));
        assert!(text.lines().nth(2).unwrap().contains(",0,,,"));
    }

    #[test]
    fn realization_record() {
        let r = RealizationResult {
            seed: 9,
            quenched: true,
            t_quench: Some(0.25),
            sup_norm_series: vec![0.1, 0.2],
            steps_taken: 2,
            failed: false,
            embedding_warning: false,
        };
        let v: serde_json::Value = serde_json::from_str(&realization_json(&r).unwrap()).unwrap();
        assert_eq!(v["T_q"], 0.25);
        assert_eq!(v["seed"], 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory(&r, 0.5, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "t,sup_norm\n0,0.1\n0.5,0.2\n");
    }
}
