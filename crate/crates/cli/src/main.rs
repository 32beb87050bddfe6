mod config;
mod output;
mod selftest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cprs::dynamics::{self, DynamicsError, ParamError};
use cprs::graphical::{self, GraphicalError};
use cprs::lattice::{wild_set, Boundary, BoxGeometry, Configuration, SiteState};
use cprs::meanfield::{self, MeanField, MeanFieldError, System, VForm};
use cprs::montecarlo::{self, CriticalSettings, Settings, SweepParam, SWEEP_CSV_HEADER};
use cprs::quenched::{self, EnvironmentForm, EnvironmentRates, QuenchedError, BOUNDS_CSV_HEADER};
use cprs::rng::{self, domain};
use cprs::stats::chi_square_homogeneity;
use cprs::{Params, Variant};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use output::{OutputDir, RunManifest, OUTPUT_DIR_ENV};

const SUBCOMMANDS: [&str; 7] = ["simulate", "sweep", "critical", "meanfield", "quenched", "selftest", "reproduce"];

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Model(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Model(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Model(m) => write!(f, "model assumption violated: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

fn param_failure(e: ParamError) -> anyhow::Error {
    Failure::Usage(e.to_string()).into()
}

fn dynamics_failure(e: DynamicsError) -> anyhow::Error {
    match e {
        DynamicsError::Params(p) => param_failure(p),
        DynamicsError::DimensionMismatch { .. } | DynamicsError::Lattice(_) => Failure::Usage(e.to_string()).into(),
        other => Failure::Numerical(other.to_string()).into(),
    }
}

fn graphical_failure(e: GraphicalError) -> anyhow::Error {
    match e {
        GraphicalError::InvalidHorizon(_) | GraphicalError::SiteOutOfBox(_) => Failure::Usage(e.to_string()).into(),
        other => Failure::Numerical(other.to_string()).into(),
    }
}

fn meanfield_failure(e: MeanFieldError) -> anyhow::Error {
    match e {
        MeanFieldError::Inadmissible { .. } => Failure::Model(e.to_string()).into(),
        MeanFieldError::Instability { .. } => Failure::Numerical(e.to_string()).into(),
    }
}

fn quenched_failure(e: QuenchedError) -> anyhow::Error {
    match e {
        QuenchedError::Dimension(_) => Failure::Model(e.to_string()).into(),
        other => Failure::Usage(other.to_string()).into(),
    }
}

#[derive(Parser, Debug)]
#[command(name = "cprs", version, about = "Contact process with random slowdowns: simulation and analysis")]
struct Cli {
    /// Output directory [env: CPRS_OUTPUT_DIR; default: cprs-out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel trials (results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one trajectory
    Simulate(SimulateArgs),
    /// Survival estimates along a parameter grid
    Sweep(SweepArgs),
    /// Bracket the critical release rate
    Critical(CriticalArgs),
    /// Mean-field equilibria and bounds
    Meanfield(MeanfieldArgs),
    /// Random-environment bounds, criteria and simulation
    Quenched(QuenchedArgs),
    /// Run the invariant suite
    Selftest(SelftestArgs),
    /// Re-run a manifest and compare output digests
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct ModelArgs {
    /// Lattice dimension
    #[arg(long = "d", default_value_t = 1)]
    dimension: usize,
    #[arg(long, default_value_t = 4.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda2: f64,
    /// Sterile release rate
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value = "symmetric")]
    variant: Variant,
}

impl ModelArgs {
    fn params(&self) -> Result<Params> {
        Params::new(self.lambda1, self.lambda2, self.r, self.dimension, self.variant).map_err(param_failure)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BoundaryArg {
    Empty,
    Periodic,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BoxArgs {
    /// Box side; default 200 (d=1), 40 (d=2), 12 (d>=3)
    #[arg(long)]
    side: Option<usize>,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Empty)]
    boundary: BoundaryArg,
    /// Time horizon; default 100 (d=1), 50 (d=2), 30 (d>=3)
    #[arg(long)]
    tmax: Option<f64>,
}

impl BoxArgs {
    fn settings(&self, dimension: usize, trials: u64, seed: u64) -> Result<Settings> {
        let mut s = Settings::default_for(dimension, trials, seed);
        let boundary = match self.boundary {
            BoundaryArg::Empty => Boundary::EmptyExterior,
            BoundaryArg::Periodic => Boundary::Periodic,
        };
        s.geometry = BoxGeometry::new(dimension, self.side.unwrap_or(s.geometry.side), boundary)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        if let Some(t) = self.tmax {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::Usage(format!("tmax must be positive and finite, got {t}")).into());
            }
            s.t_max = t;
        }
        Ok(s)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Backend {
    Gillespie,
    Graphical,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Initial {
    /// One wild individual at the centre
    Origin,
    /// Every site wild
    Full,
    /// Each site wild with probability 1/2
    Random,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    geometry: BoxArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Backend::Gillespie)]
    backend: Backend,
    #[arg(long, value_enum, default_value_t = Initial::Origin)]
    initial: Initial,
    /// Also compare both backends over many trials
    #[arg(long)]
    crosscheck: bool,
    #[arg(long, default_value_t = 2000)]
    crosscheck_trials: u64,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    geometry: BoxArgs,
    /// Parameter to vary: r, lambda1 or lambda2
    #[arg(long, default_value = "r")]
    param: SweepParam,
    /// Comma-separated grid values
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// One shared mark stream per trial across the grid
    #[arg(long)]
    coupled: bool,
}

#[derive(Args, Debug, Serialize)]
struct CriticalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    geometry: BoxArgs,
    /// Largest number of trials per grid point
    #[arg(long, default_value_t = 400)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    resolution: f64,
    #[arg(long, default_value_t = 100)]
    batch: u64,
    /// Fixed upper end of the initial bracket
    #[arg(long)]
    r_max: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct MeanfieldArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// v_asym, u_sym, v_sym or u_asym; all four when omitted
    #[arg(long)]
    system: Option<System>,
    /// Print only the two release-rate bounds
    #[arg(long)]
    bounds: bool,
    /// Integrate from this state (three comma-separated coordinates)
    #[arg(long, value_delimiter = ',')]
    start: Option<Vec<f64>>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormArg {
    Vertex,
    Edge,
}

#[derive(Args, Debug, Serialize)]
struct QuenchedArgs {
    /// Recompute the published bounds table
    #[arg(long)]
    paper_table: bool,
    /// Evaluate all criteria at `lambda1=.. lambda2=.. r=..`
    #[arg(long, num_args = 1..)]
    check: Option<Vec<String>>,
    /// Simulate in a sampled environment
    #[arg(long)]
    simulate: bool,
    #[arg(long, value_enum, default_value_t = FormArg::Edge)]
    form: FormArg,
    #[arg(long, default_value_t = 4.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 200)]
    side: usize,
    #[arg(long, default_value_t = 100.0)]
    tmax: f64,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seed of the environment; defaults to `--seed`
    #[arg(long)]
    env_seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct SelftestArgs {
    /// Subsampled suite
    #[arg(long)]
    quick: bool,
    /// Replace one coupling-table rate by a wrong one (negative control)
    #[arg(long)]
    inject_typo: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ReproduceArgs {
    /// Manifest of the run to repeat
    #[arg(long)]
    manifest: PathBuf,
}

struct Run {
    out: OutputDir,
    started: chrono::DateTime<chrono::Utc>,
    clock: Instant,
    argv: Vec<String>,
    threads: usize,
}

impl Run {
    fn finish<T: Serialize>(self, command: &str, parameters: &T, seed: Option<u64>) -> Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            argv: self.argv,
            parameters: serde_json::to_value(parameters)?,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started,
            finished: chrono::Utc::now(),
            duration_secs: self.clock.elapsed().as_secs_f64(),
            threads: self.threads,
            outputs: Default::default(),
        };
        self.out.finish(manifest)?;
        eprintln!("outputs in {}", self.out.root.display());
        Ok(())
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            let code = e.downcast_ref::<Failure>().map(Failure::code).unwrap_or(1);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let raw: Vec<String> = std::env::args().collect();
    let argv = config::merge(raw, &SUBCOMMANDS).map_err(|e| Failure::Usage(format!("{e:#}")))?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return Ok(ExitCode::from(code));
        }
    };
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return Err(Failure::Usage("--threads must be positive".into()).into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    let root = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cprs-out"));
    let run = Run {
        out: OutputDir::create(&root)?,
        started: chrono::Utc::now(),
        clock: Instant::now(),
        argv: config::portable_argv(&argv),
        threads,
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, run),
        Command::Sweep(a) => cmd_sweep(a, run),
        Command::Critical(a) => cmd_critical(a, run),
        Command::Meanfield(a) => cmd_meanfield(a, run),
        Command::Quenched(a) => cmd_quenched(a, run),
        Command::Selftest(a) => cmd_selftest(a, run),
        Command::Reproduce(a) => cmd_reproduce(a, run),
    }
}

fn initial_config(kind: Initial, geometry: BoxGeometry, seed: u64) -> Configuration {
    match kind {
        Initial::Origin => montecarlo::origin_config(geometry),
        Initial::Full => Configuration::filled(geometry, SiteState::Wild),
        Initial::Random => {
            let mut g = rng::stream(seed, domain::INITIAL, 0);
            let states = (0..geometry.sites()).map(|_| if g.random::<bool>() { SiteState::Wild } else { SiteState::Empty }).collect();
            Configuration::from_states(geometry, states).expect("sized to box")
        }
    }
}

#[derive(Debug, Serialize)]
struct Crosscheck {
    trials: u64,
    gillespie_wild_counts: Vec<u64>,
    graphical_wild_counts: Vec<u64>,
    chi_square: f64,
    dof: usize,
    p_value: f64,
    /// Graphical runs whose active-path set differs from the wild set.
    path_mismatches: u64,
    passed: bool,
}

fn crosscheck(config: &Configuration, p: &Params, t_max: f64, trials: u64, seed: u64) -> Result<Crosscheck> {
    let n = config.len();
    let gillespie: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, domain::GILLESPIE, i);
            dynamics::simulate(config, p, t_max, &mut g, false).map(|t| t.terminal.wild_count())
        })
        .collect::<Result<_, _>>()
        .map_err(dynamics_failure)?;
    let graphical: Vec<(usize, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, domain::SCHEDULE, i);
            let sched = graphical::sample_schedule(*config.geometry(), p, t_max, &mut g)?;
            let terminal = graphical::apply_schedule(config, &sched, p.variant)?.terminal;
            let paths = graphical::active_paths(&wild_set(config), &sched, p.variant, t_max)?;
            Ok((terminal.wild_count(), paths == wild_set(&terminal)))
        })
        .collect::<Result<_, GraphicalError>>()
        .map_err(graphical_failure)?;
    let hist = |xs: &mut dyn Iterator<Item = usize>| {
        let mut h = vec![0u64; n + 1];
        xs.for_each(|w| h[w] += 1);
        h
    };
    let a = hist(&mut gillespie.iter().copied());
    let b = hist(&mut graphical.iter().map(|x| x.0));
    let test = chi_square_homogeneity(&a, &b);
    let path_mismatches = graphical.iter().filter(|x| !x.1).count() as u64;
    Ok(Crosscheck {
        trials,
        gillespie_wild_counts: a,
        graphical_wild_counts: b,
        chi_square: test.statistic,
        dof: test.dof,
        p_value: test.p_value,
        path_mismatches,
        passed: test.p_value >= 1e-3 && path_mismatches == 0,
    })
}

fn cmd_simulate(a: &SimulateArgs, mut run: Run) -> Result<ExitCode> {
    let p = a.model.params()?;
    let s = a.geometry.settings(p.dimension, 1, a.seed)?;
    let config = initial_config(a.initial, s.geometry, a.seed);
    let traj = match a.backend {
        Backend::Gillespie => {
            let mut g = rng::stream(a.seed, domain::GILLESPIE, 0);
            dynamics::simulate(&config, &p, s.t_max, &mut g, false).map_err(dynamics_failure)?
        }
        Backend::Graphical => {
            let mut g = rng::stream(a.seed, domain::SCHEDULE, 0);
            let sched = graphical::sample_schedule(s.geometry, &p, s.t_max, &mut g).map_err(graphical_failure)?;
            graphical::apply_schedule(&config, &sched, p.variant).map_err(graphical_failure)?
        }
    };
    run.out.write("trajectory.csv", traj.to_csv().as_bytes())?;
    run.out.write("initial.csv", config.to_snapshot().as_bytes())?;
    run.out.write("terminal.csv", traj.terminal.to_snapshot().as_bytes())?;
    let summary = traj.summary(a.seed, p);
    run.out.write_json("summary.json", &summary)?;
    println!("events {}  wild at end {}  extinct {}", summary.events, summary.wild_count, summary.wild_extinct);
    let mut code = ExitCode::SUCCESS;
    if a.crosscheck {
        let c = crosscheck(&config, &p, s.t_max, a.crosscheck_trials, a.seed)?;
        println!(
            "crosscheck: chi2 = {:.3} (dof {}), p = {:.4}, path mismatches {}: {}",
            c.chi_square,
            c.dof,
            c.p_value,
            c.path_mismatches,
            if c.passed { "PASS" } else { "FAIL" }
        );
        if !c.passed {
            code = ExitCode::from(4);
        }
        run.out.write_json("crosscheck.json", &c)?;
    }
    run.finish("simulate", a, Some(a.seed))?;
    Ok(code)
}

fn cmd_sweep(a: &SweepArgs, mut run: Run) -> Result<ExitCode> {
    if a.grid.is_empty() {
        return Err(Failure::Usage("empty grid".into()).into());
    }
    let template = a.model.params()?;
    let s = a.geometry.settings(template.dimension, a.trials, a.seed)?;
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    if a.coupled {
        let sw = montecarlo::sweep_param(a.param, &a.grid, &template, &s, &montecarlo::origin_config(s.geometry)).map_err(dynamics_failure)?;
        for (v, e) in sw.grid.iter().zip(&sw.estimates) {
            csv.push_str(&e.csv_row(*v));
            csv.push('\n');
        }
        println!("order violations: {}", sw.order_violations);
    } else {
        for (k, &v) in a.grid.iter().enumerate() {
            let p = a.param.apply(&template, v);
            let sk = Settings { seed: rng::derive_seed(a.seed, k as u64), ..s };
            let e = montecarlo::estimate_survival(&p, &sk).map_err(dynamics_failure)?;
            csv.push_str(&e.csv_row(v));
            csv.push('\n');
        }
    }
    print!("{csv}");
    run.out.write("sweep.csv", csv.as_bytes())?;
    run.finish("sweep", a, Some(a.seed))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_critical(a: &CriticalArgs, mut run: Run) -> Result<ExitCode> {
    let p = a.model.params()?;
    let s = a.geometry.settings(p.dimension, a.trials, a.seed)?;
    let cs = CriticalSettings { resolution: a.resolution, batch: a.batch, r_max: a.r_max, ..CriticalSettings::default() };
    let est = montecarlo::estimate_rc(p.lambda1, p.lambda2, p.variant, &s, &cs).map_err(dynamics_failure)?;
    let mut csv = String::from("r,trials,survivals,p_hat,ci_low,ci_high,side\n");
    for pt in &est.points {
        csv.push_str(&format!("{},{:?}\n", pt.estimate.csv_row(pt.r), pt.side).to_lowercase());
    }
    run.out.write("critical_points.csv", csv.as_bytes())?;
    run.out.write_json("critical.json", &est)?;
    if est.subcritical_at_zero {
        println!("subcritical at r=0: p_hat(0) = {}", est.baseline.p_hat);
    } else {
        println!("r_c in [{}, {}]  (threshold {:.4})", est.r_low, est.r_high, est.threshold);
    }
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    run.finish("critical", a, Some(a.seed))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Integration {
    system: System,
    steady: meanfield::SteadyState,
    newton: meanfield::NewtonResult,
    densities: [f64; 4],
}

fn cmd_meanfield(a: &MeanfieldArgs, mut run: Run) -> Result<ExitCode> {
    let p = a.model.params()?;
    if a.bounds {
        let b = serde_json::json!({ "bound_r0": meanfield::bound_r0(&p), "bound_r1": meanfield::bound_r1(&p) });
        println!("cond-r0 = {}", meanfield::bound_r0(&p));
        println!("cond-r1 = {}", meanfield::bound_r1(&p));
        run.out.write_json("bounds.json", &b)?;
        run.finish("meanfield", a, None)?;
        return Ok(ExitCode::SUCCESS);
    }
    let systems: Vec<System> = a.system.map(|s| vec![s]).unwrap_or_else(|| System::ALL.to_vec());
    let report = meanfield::report(&p, &systems);
    if let Some(start) = &a.start {
        let &[a0, a1, a2] = start.as_slice() else {
            return Err(Failure::Usage(format!("--start needs three coordinates, got {}", start.len())).into());
        };
        let x0 = [a0, a1, a2];
        let mut runs = Vec::new();
        for &system in &systems {
            // the last report entry of a system carries its canonical form
            let form = report.systems.iter().rev().find(|sr| sr.system == system).map_or(VForm::printed(system), |sr| sr.form);
            let mf = MeanField::with_form(system, form, &p);
            let steady = mf.integrate_to_steady_state(&x0, meanfield::DT, meanfield::T_MAX, meanfield::STEADY_TOL).map_err(meanfield_failure)?;
            let newton = mf.newton(&steady.state);
            println!("{}: steady state {:?} (residual {:.2e}), Newton {:?} (residual {:.2e})", system.name(), steady.state, steady.residual, newton.state, newton.residual);
            runs.push(Integration { system, steady, newton, densities: system.densities(&newton.state) });
        }
        run.out.write_json("integration.json", &runs)?;
    }
    for sr in &report.systems {
        println!("{} ({:?})", sr.system.name(), sr.form);
        for c in &sr.candidates {
            let verdict = if c.confirmed() { "confirmed" } else { "discrepancy" };
            println!(
                "  {:<15} {:?}  residual {:.2e}  admissible {}  stable {}  {}",
                format!("{:?}", c.provenance),
                c.state,
                c.residual,
                c.admissible,
                c.stability.stable,
                verdict
            );
        }
    }
    println!("cond-r0 = {}", report.bound_r0);
    println!("cond-r1 = {}", report.bound_r1);
    run.out.write_json("meanfield.json", &report)?;
    run.finish("meanfield", a, None)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CheckReport {
    lambda1: f64,
    lambda2: f64,
    r: f64,
    vertex_extinction: quenched::Criterion,
    edge_extinction: quenched::EdgeCriterion,
    edge_survival: quenched::EdgeCriterion,
}

fn parse_check(items: &[String]) -> Result<(f64, f64, f64)> {
    let (mut l1, mut l2, mut r) = (None, None, None);
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| Failure::Usage(format!("expected key=value, got `{item}`")))?;
        let x: f64 = v.parse().map_err(|_| Failure::Usage(format!("bad number in `{item}`")))?;
        match k {
            "lambda1" => l1 = Some(x),
            "lambda2" => l2 = Some(x),
            "r" => r = Some(x),
            other => return Err(Failure::Usage(format!("unknown key `{other}`; expected lambda1, lambda2, r")).into()),
        }
    }
    match (l1, l2, r) {
        (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
        _ => Err(Failure::Usage("--check needs lambda1=, lambda2= and r=".into()).into()),
    }
}

fn fmt_bound(x: f64) -> String {
    if x.is_infinite() { "inf".into() } else { format!("{x}") }
}

fn cmd_quenched(a: &QuenchedArgs, mut run: Run) -> Result<ExitCode> {
    if !a.paper_table && a.check.is_none() && !a.simulate {
        return Err(Failure::Usage("choose --paper-table, --check or --simulate".into()).into());
    }
    let mut seed = None;
    if a.paper_table {
        let v = quenched::verify_published_table();
        let mut csv = String::from(BOUNDS_CSV_HEADER);
        csv.push('\n');
        for row in &v.rows {
            csv.push_str(&row.csv_row());
            csv.push('\n');
        }
        println!("{:>8} {:>6} {:>8} {:>8}", "lambda1", "lambda2", "lower", "upper");
        for row in &v.rows {
            println!(
                "{:>8} {:>6} {:>8} {:>8}",
                row.lambda1,
                row.lambda2,
                fmt_bound(quenched::truncate2(row.lower)),
                fmt_bound(quenched::truncate2(row.upper))
            );
        }
        for d in &v.discrepancies {
            println!(
                "FLAG ({}, {}) {}: computed {:.4} (truncated {}) but published {}",
                d.lambda1, d.lambda2, d.bound, d.computed, d.truncated, d.published
            );
        }
        println!("{} of {} cells match the published values", v.cells.len() - v.discrepancies.len(), v.cells.len());
        run.out.write("bounds.csv", csv.as_bytes())?;
        run.out.write_json("bounds_check.json", &v)?;
    }
    if let Some(items) = &a.check {
        let (l1, l2, r) = parse_check(items)?;
        let rep = CheckReport {
            lambda1: l1,
            lambda2: l2,
            r,
            vertex_extinction: quenched::cpre_extinct_vertex(l1, l2, r).map_err(quenched_failure)?,
            edge_extinction: quenched::cpre_extinct_edge(l1, l2, r).map_err(quenched_failure)?,
            edge_survival: quenched::cpre_survive_edge(l1, l2, r).map_err(quenched_failure)?,
        };
        println!("{}", serde_json::to_string_pretty(&rep)?);
        run.out.write_json("check.json", &rep)?;
    }
    if a.simulate {
        for (name, v) in [("lambda1", a.lambda1), ("lambda2", a.lambda2), ("r", a.r)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Failure::Usage(format!("{name} must be finite and non-negative, got {v}")).into());
            }
        }
        let env_seed = a.env_seed.unwrap_or(a.seed);
        let mut g = rng::stream(env_seed, domain::ENVIRONMENT, 0);
        let (rates, form) = match a.form {
            FormArg::Vertex => (EnvironmentRates::vertex(&quenched::sample_environment(a.side, a.r, &mut g), a.lambda1, a.lambda2), EnvironmentForm::Vertex),
            FormArg::Edge => {
                let right = quenched::sample_environment(a.side, a.r, &mut g);
                let left = quenched::sample_environment(a.side, a.r, &mut g);
                (EnvironmentRates::edge(&right, &left, a.lambda1, a.lambda2), EnvironmentForm::Edge)
            }
        };
        let geometry = BoxGeometry::new(1, a.side, Boundary::EmptyExterior).map_err(|e| Failure::Usage(e.to_string()))?;
        let est = quenched::simulate_cpre(&rates, geometry, a.tmax, a.trials, a.seed).map_err(quenched_failure)?;
        println!("{form:?} environment: p_hat = {} [{}, {}] over {} trials", est.p_hat, est.ci_low, est.ci_high, est.trials);
        run.out.write_json("environment.json", &rates)?;
        run.out.write_json("survival.json", &est)?;
        seed = Some(a.seed);
    }
    run.finish("quenched", a, seed)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(a: &SelftestArgs, mut run: Run) -> Result<ExitCode> {
    let results = selftest::run(selftest::SuiteOptions { quick: a.quick, inject_typo: a.inject_typo, seed: a.seed });
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} checks passed", results.len() - failed, results.len());
    run.out.write_json("selftest.json", &results)?;
    run.finish("selftest", a, Some(a.seed))?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn cmd_reproduce(a: &ReproduceArgs, mut run: Run) -> Result<ExitCode> {
    let original = output::read_manifest(&a.manifest)?;
    if original.command == "reproduce" {
        return Err(Failure::Usage("cannot reproduce a reproduce run".into()).into());
    }
    let stochastic = !matches!(original.command.as_str(), "meanfield" | "quenched");
    if stochastic && original.seed.is_none() {
        return Err(Failure::Usage("manifest has no seed".into()).into());
    }
    let target = run.out.root.join(format!("reproduce-{}", original.command));
    let exe = std::env::current_exe().context("locating the cprs binary")?;
    let status = std::process::Command::new(exe)
        .arg("--out-dir")
        .arg(&target)
        .args(&original.argv)
        .status()
        .context("re-running the manifest command")?;
    if !status.success() && original.command != "selftest" {
        return Err(Failure::Numerical(format!("re-run exited with {status}")).into());
    }
    let again = output::read_manifest(&target.join(output::MANIFEST_FILE))?;
    let mut report = Vec::new();
    let mut all_equal = original.outputs.len() == again.outputs.len();
    for (name, digest) in &original.outputs {
        let same = again.outputs.get(name) == Some(digest);
        all_equal &= same;
        report.push(serde_json::json!({ "file": name, "original": digest, "rerun": again.outputs.get(name), "identical": same }));
        println!("{} {name}", if same { "identical" } else { "DIFFERENT" });
    }
    run.out.write_json("reproduce.json", &report)?;
    run.finish("reproduce", a, original.seed)?;
    Ok(if all_equal { ExitCode::SUCCESS } else { ExitCode::from(4) })
}
