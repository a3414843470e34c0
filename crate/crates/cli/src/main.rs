mod bench;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use footstep_core::io::{self, PlanDocument, ScenarioFile};
use footstep_core::{
    generate, plan, swing_trajectories, validate, Error, PlannerConfig, Scenario, ScenarioKind, ScenarioSpec, Side,
};

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "footstep", version, about = "CoM trajectory and footstep planning for a SLIP biped")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a built-in or file scenario and write the plan, CSVs and an SVG.
    Plan(PlanArgs),
    /// Run the benchmark matrix and the horizon sweep.
    Bench(BenchArgs),
    /// Check a plan file against the unrelaxed constraints of a scenario.
    Validate(ValidateArgs),
    /// Write a built-in scenario to a TOML file.
    Scenario(ScenarioArgs),
}

#[derive(Args, Clone)]
struct ScenarioOpts {
    /// Built-in scenario name or path to a scenario TOML file.
    scenario: String,
    /// Horizon, s.
    #[arg(long)]
    horizon: Option<f64>,
    /// Step duration, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Terrain randomization seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct ConfigOpts {
    /// Planner config TOML; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maximum candidate footholds per step.
    #[arg(long)]
    k: Option<usize>,
    /// Reach radius, m.
    #[arg(long)]
    radius: Option<f64>,
    /// Path deviation bound, m.
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum acceleration per contact, m/s².
    #[arg(long)]
    a_max: Option<f64>,
    /// Six comma-separated weights: w0,w1,w2,w3,w4,w.
    #[arg(long, value_name = "W0,W1,W2,W3,W4,W")]
    weights: Option<String>,
    /// Reweighting ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Bound on the reweighted contact count per step.
    #[arg(long)]
    card_limit: Option<f64>,
    /// Maximum reweighting iterations.
    #[arg(long)]
    n_rw: Option<usize>,
    /// Scale factor below which a contact counts as inactive.
    #[arg(long)]
    alpha_zero_tol: Option<f64>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    #[command(flatten)]
    config: ConfigOpts,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated environments.
    #[arg(long, default_value = "flat_ground,step_stones,chasm,staircase_up")]
    envs: String,
    /// Comma-separated horizons, s.
    #[arg(long, default_value = "1.5,3.0")]
    horizons: String,
    /// Comma-separated candidate counts.
    #[arg(long = "ks", default_value = "10,20")]
    ks: String,
    /// Comma-separated horizon lengths for the flat-ground sweep; empty to skip.
    #[arg(long, default_value = "10,15,20,25,30")]
    sweep: String,
    /// Seeds per cell.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Step duration, s.
    #[arg(long, default_value_t = 0.15)]
    dt: f64,
    #[command(flatten)]
    config: ConfigOpts,
    /// Report file (JSON).
    #[arg(short, long, default_value = "bench_report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Plan JSON written by `plan`.
    plan: PathBuf,
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Also write the validation report here (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Also write the generated environment here (TOML).
    #[arg(long)]
    env: Option<PathBuf>,
    /// Scenario file to write.
    #[arg(short, long)]
    out: PathBuf,
}

fn list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("invalid {what} '{s}': {e}")))
        .collect()
}

fn load_spec(opts: &ScenarioOpts) -> Result<(ScenarioSpec, Option<ScenarioFile>)> {
    let (mut spec, file) = match opts.scenario.parse::<ScenarioKind>() {
        Ok(kind) => (ScenarioSpec::new(kind), None),
        Err(e) => {
            let path = Path::new(&opts.scenario);
            if !path.exists() {
                return Err(e.into());
            }
            let file = ScenarioFile::from_toml(&io::read_to_string(path)?)
                .with_context(|| format!("reading scenario {}", path.display()))?;
            (file.scenario.clone(), Some(file))
        }
    };
    if let Some(h) = opts.horizon {
        spec.horizon = Some(h);
    }
    if let Some(dt) = opts.dt {
        spec.dt = dt;
    }
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    Ok((spec, file))
}

/// `base` with the config file, if any, in place of its tunables. The
/// horizon always comes from `base`.
fn with_config_file(base: PlannerConfig, opts: &ConfigOpts) -> Result<PlannerConfig> {
    let Some(path) = &opts.config else {
        return Ok(base);
    };
    let cfg = io::config_from_toml(&io::read_to_string(path)?)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(PlannerConfig {
        n: base.n,
        dt: base.dt,
        ..cfg
    })
}

fn with_flags(mut cfg: PlannerConfig, opts: &ConfigOpts) -> Result<PlannerConfig> {
    if let Some(v) = opts.k {
        cfg.k = v;
    }
    if let Some(v) = opts.radius {
        cfg.radius = v;
    }
    if let Some(v) = opts.tol {
        cfg.tol = v;
    }
    if let Some(v) = opts.a_max {
        cfg.a_max = v;
    }
    if let Some(v) = opts.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = opts.card_limit {
        cfg.card_limit = v;
    }
    if let Some(v) = opts.n_rw {
        cfg.n_rw = v;
    }
    if let Some(v) = opts.alpha_zero_tol {
        cfg.alpha_zero_tol = Some(v);
    }
    if let Some(text) = &opts.weights {
        let w: Vec<f64> = list(text, "weight")?;
        let [w0, w1, w2, w3, w4, w] = w[..] else {
            bail!("--weights takes six values w0,w1,w2,w3,w4,w, got {}", w.len());
        };
        cfg.weights = footstep_core::Weights { w0, w1, w2, w3, w4, w };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Scenario with its planner config: defaults, then the config file, then
/// the scenario file's planner table, then flags.
fn load_scenario(opts: &ScenarioOpts, config: &ConfigOpts) -> Result<Scenario> {
    let (spec, file) = load_spec(opts)?;
    let mut sc = generate(&spec)?;
    let mut cfg = with_config_file(sc.config.clone(), config)?;
    if let Some(file) = &file {
        cfg = PlannerConfig {
            n: cfg.n,
            dt: cfg.dt,
            ..file.planner_config(&cfg)?
        };
    }
    sc.config = with_flags(cfg, config)?;
    Ok(sc)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_plan(args: &PlanArgs) -> Result<u8> {
    let sc = load_scenario(&args.scenario, &args.config)?;
    let cfg = &sc.config;
    let result = plan(&sc.env, &sc.path, cfg);
    let p = match result {
        Ok(p) => p,
        Err(e @ (Error::Infeasible { .. } | Error::NoCandidates)) => {
            eprintln!("planning failed: {e}");
            eprintln!(
                "scenario {} with N={} dt={} tol={} K={} R={}",
                sc.spec.kind, cfg.n, cfg.dt, cfg.tol, cfg.k, cfg.radius
            );
            return Ok(EXIT_NOT_CONVERGED);
        }
        Err(e) => return Err(e.into()),
    };
    let report = validate(&p, &sc.env, cfg);
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let feet = swing_trajectories(&p.phases, p.dt, cfg.swing_clearance);
    write(&args.out.join("com.csv"), &io::com_csv(&p))?;
    write(&args.out.join("feet.csv"), &io::feet_csv(&feet, p.dt / 5.0))?;
    write(&args.out.join("plan.svg"), &svg::render(&p, &sc.env, cfg.tol, cfg.radius))?;
    write(&args.out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    let converged = p.converged;
    let sides: String = p
        .phases
        .iter()
        .map(|ph| match ph.side {
            Side::Left => 'L',
            Side::Right => 'R',
        })
        .collect();
    println!(
        "{}: N={} converged={} reweighting iterations={} time={:.3} s",
        sc.spec.kind, p.n, converged, p.iterations_used, p.total_time
    );
    println!(
        "contacts per step {:?}, flight steps {:?}, phases {}",
        p.cardinality(),
        p.flight_steps(),
        if sides.is_empty() { "-" } else { &sides }
    );
    println!(
        "validation: {} violations, max path deviation {:.4} m",
        report.violations.len(),
        report.max_path_deviation
    );
    write(&args.out.join("plan.json"), &PlanDocument::new(p, cfg.clone()).to_json()?)?;
    println!("wrote {}", args.out.display());
    Ok(if converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8> {
    let doc = PlanDocument::from_json(&io::read_to_string(&args.plan)?)
        .with_context(|| format!("reading plan {}", args.plan.display()))?;
    let sc = load_scenario(&args.scenario, &ConfigOpts::default())?;
    if doc.plan.n != sc.config.n {
        return Err(Error::DimensionMismatch(format!(
            "plan has N={} but the scenario has N={}",
            doc.plan.n, sc.config.n
        ))
        .into());
    }
    let report = validate(&doc.plan, &sc.env, &doc.config);
    if let Some(path) = &args.report {
        write(path, &serde_json::to_string_pretty(&report)?)?;
    }
    for v in &report.violations {
        println!(
            "{:?} at step {}{}: {:.3e}",
            v.kind,
            v.step,
            v.surface_id.map(|id| format!(" surface {id}")).unwrap_or_default(),
            v.magnitude
        );
    }
    println!(
        "{} violations; max cardinality {}, max accel {:.3}, max path deviation {:.4}, max kinematic residual {:.2e}",
        report.violations.len(),
        report.max_cardinality,
        report.max_accel,
        report.max_path_deviation,
        report.max_kinematic_residual
    );
    Ok(if report.is_valid() { 0 } else { EXIT_INVALID })
}

fn cmd_scenario(args: &ScenarioArgs) -> Result<u8> {
    let (spec, _) = load_spec(&args.scenario)?;
    let sc = generate(&spec)?;
    let planner = toml::Table::try_from(&sc.config)?;
    let file = ScenarioFile {
        scenario: spec,
        planner: Some(planner),
    };
    write(&args.out, &file.to_toml()?)?;
    if let Some(path) = &args.env {
        write(path, &io::environment_to_toml(&sc.env)?)?;
    }
    println!(
        "wrote {} ({} surfaces, N={})",
        args.out.display(),
        sc.env.len(),
        sc.config.n
    );
    Ok(0)
}

fn threads() -> Result<usize> {
    match std::env::var("PLANNER_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("PLANNER_THREADS must be a positive integer, got '{v}'"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let base = with_flags(with_config_file(PlannerConfig::default(), &args.config)?, &args.config)?;
    let matrix = bench::Matrix {
        environments: list(&args.envs, "environment")?,
        horizons: list(&args.horizons, "horizon")?,
        ks: list(&args.ks, "K")?,
        sweep_ns: list(&args.sweep, "N")?,
        trials: args.trials,
        dt: args.dt,
        base,
    };
    let report = bench::run(&matrix, threads()?).map_err(|e| anyhow!(e))?;
    print!("{}", report.table());
    write(&args.out, &serde_json::to_string_pretty(&report)?)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Scenario(a) => cmd_scenario(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
