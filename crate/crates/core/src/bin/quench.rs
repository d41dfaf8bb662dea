use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use quench_core::bounds::{bound_report, BoundParams, GeneralBoundConfig, ReportConfig};
use quench_core::config::{parse_config, Mode, RunConfig};
use quench_core::monte_carlo::{sweep_alpha_h, sweep_kappa2, sweep_lambda, Preset, SweepResult};
use quench_core::output::{emit_table, realization_json, write_eigenfunction, write_json, write_trajectory};
use quench_core::rng::derive_seed;
use quench_core::solver::Simulator;
use quench_core::spectral::principal_eigenpair;
use quench_core::validation::run_validation;
use quench_core::{Error, Result};

#[derive(Parser)]
#[command(name = "quench", version, about = "Quenching in a stochastic fractional heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// key = value or JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    realizations: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// t1, t2, t3, fig2 or fig2-low
    #[arg(long, global = true)]
    preset: Option<Preset>,
    /// full-scale preset grids and sizes
    #[arg(long, global = true)]
    full: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One realization; writes trajectory.csv, noise.csv and realization.json
    Simulate,
    /// Preset or custom parameter sweep; writes a CSV table
    Sweep(SweepArgs),
    /// Bound report as JSON
    Bounds,
    /// Principal eigenpair; writes eigen.csv
    Eigen,
    /// Runs the numerical self-checks
    Validate,
}

#[derive(Args)]
struct SweepArgs {
    /// comma-separated lambda values
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// comma-separated kappa2 values
    #[arg(long, value_delimiter = ',')]
    kappa2: Vec<f64>,
    /// comma-separated alpha values (with --hurst)
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    hurst: Vec<f64>,
}

fn load(common: &Common, mode: Mode) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_config(&std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?)?,
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = common.realizations {
        cfg.n_realizations = n;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if common.preset.is_some() {
        cfg.preset = common.preset;
    }
    cfg.full |= common.full;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let d = cfg.output_dir.as_path();
    std::fs::create_dir_all(d).map_err(|e| Error::Io {
        path: d.to_path_buf(),
        source: e,
    })?;
    Ok(d)
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let sim = Simulator::new(&cfg.model)?;
    let seed = derive_seed(cfg.master_seed, 0);
    let path = sim.noise_path(seed);
    let mut result = sim.run_path(&path, |_, _| {});
    result.seed = seed;
    let dir = out_dir(cfg)?;
    write_trajectory(&result, cfg.model.dt(), &dir.join("trajectory.csv"))?;
    path.write_csv(&dir.join("noise.csv"))?;
    let json = realization_json(&result)?;
    std::fs::write(dir.join("realization.json"), format!("{json}\n")).map_err(|e| Error::Io {
        path: dir.join("realization.json"),
        source: e,
    })?;
    println!("{json}");
    Ok(())
}

fn sweep(cfg: &RunConfig, args: &SweepArgs, realizations_given: bool) -> Result<()> {
    let (name, result): (String, SweepResult) = if let Some(p) = cfg.preset {
        let n = if realizations_given { cfg.n_realizations } else { p.default_realizations(cfg.full) };
        info!("preset {} with {n} realizations", p.name());
        (p.name().to_string(), p.run(cfg.full, n, cfg.master_seed)?)
    } else if !args.lambda.is_empty() {
        ("lambda".into(), sweep_lambda(&cfg.model, &args.lambda, cfg.n_realizations, cfg.master_seed)?)
    } else if !args.kappa2.is_empty() {
        ("kappa2".into(), sweep_kappa2(&cfg.model, &args.kappa2, cfg.n_realizations, cfg.master_seed)?)
    } else if !args.alpha.is_empty() && !args.hurst.is_empty() {
        (
            "alpha_h".into(),
            sweep_alpha_h(&cfg.model, &args.alpha, &args.hurst, cfg.n_realizations, cfg.master_seed)?,
        )
    } else {
        return Err(Error::Config(
            "sweep needs --preset, --lambda, --kappa2, or --alpha with --hurst".into(),
        ));
    };
    let path = out_dir(cfg)?.join(format!("{name}.csv"));
    emit_table(&result, &path)?;
    println!("{}\tprobability\tmean_Tq\tvar_Tq\tfailures", result.axes.join("\t"));
    for p in &result.points {
        let s = &p.stats;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let vals: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
        println!(
            "{}\t{:.4}\t{}\t{}\t{}",
            vals.join("\t"),
            s.quench_probability,
            f(s.mean_tq),
            f(s.var_tq),
            s.failures
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn bounds(cfg: &RunConfig) -> Result<()> {
    let b = &cfg.bounds;
    let mut bp = BoundParams::from_model(&cfg.model)?;
    bp.eta1 = b.eta1;
    bp.eta2 = b.eta2;
    bp.zeta_m = b.zeta_m;
    bp.zeta_max = b.zeta_max;
    bp.fbm_variance = b.fbm_variance;
    bp.validate()?;
    let rc = ReportConfig {
        t_end: cfg.model.t_end,
        n_steps: b.n_steps,
        n_paths: b.n_paths,
        w1: b.w1,
        lambda_cap: b.lambda_cap,
        general: GeneralBoundConfig {
            theta: b.theta,
            n_paths: b.n_paths,
            t_trunc: b.t_trunc,
            n_steps: b.n_steps,
            n_grid: 2000,
            master_seed: cfg.master_seed,
        },
        master_seed: cfg.master_seed,
    };
    let report = bound_report(&bp, &rc)?;
    let path = out_dir(cfg)?.join("bounds.json");
    write_json(&report, &path)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eigen(cfg: &RunConfig) -> Result<()> {
    let sim_grid = cfg.model.grid()?;
    let op = quench_core::operator::assemble_with(sim_grid, cfg.model.alpha, cfg.model.rho(), cfg.model.kappa_rule)?;
    let pair = principal_eigenpair(&op)?;
    let path = out_dir(cfg)?.join("eigen.csv");
    write_eigenfunction(&pair, sim_grid, &path)?;
    println!("mu1 = {}", pair.mu1);
    println!("residual = {:e}", pair.residual);
    println!("iterations = {}", pair.iterations);
    Ok(())
}

fn validate() -> Result<()> {
    let checks = run_validation()?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {}  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += (!c.passed) as usize;
    }
    if failed > 0 {
        return Err(Error::ConditionViolated(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mode = match cli.command {
        Command::Simulate => Mode::Simulate,
        Command::Sweep(_) => Mode::Sweep,
        Command::Bounds => Mode::Bounds,
        Command::Eigen => Mode::Eigen,
        Command::Validate => Mode::Validate,
    };
    let cfg = load(&cli.common, mode)?;
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            warn!("could not size the thread pool: {e}");
        }
    }
    match &cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Sweep(args) => sweep(&cfg, args, cli.common.realizations.is_some()),
        Command::Bounds => bounds(&cfg),
        Command::Eigen => eigen(&cfg),
        Command::Validate => validate(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
