//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 runtime
//! failure.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gridcascade::campaign::{
    export_plot_data, run_attacks, select_attacks, summarize, write_campaign, AttackStrategy,
};
use gridcascade::cascade::{run_cascade, CascadePolicy, StartStrategy};
use gridcascade::disturbance::{analyze_all_nodes, DEFAULT_POLE_ZERO_TOL};
use gridcascade::dynamics::{
    integrate_swing, write_trajectory_columns, DisturbanceSpec, KickMode, SimulationOptions,
    SwingState, Targets,
};
use gridcascade::equilibrium::{solve_equilibrium, InitialGuess, SolverConfig};
use gridcascade::gridfile::load_grid;
use gridcascade::stability::{classify_components, worst_verdict, DEFAULT_ZERO_TOL};
use gridcascade::{EdgeKey, GridError, GridTopology, NodeId};

#[derive(Parser)]
#[command(
    name = "gridcascade",
    version,
    about = "Swing-equation grid analysis and cascade simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the synchronous state and judge its stability.
    Solve(SolveArgs),
    /// Per-node pole report at the synchronous state.
    Analyze(SolveArgs),
    /// Run one attack and print (or write) its trace.
    Cascade(CascadeArgs),
    /// Run many attacks, each on the pristine grid.
    Campaign(CampaignArgs),
    /// Integrate the swing equation and export the trajectory.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    eps_lambda: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    jitter: Option<f64>,
    /// Seed for the solver jitter and any randomised start.
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverFlags {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.eps1 {
            cfg.eps1 = v;
        }
        if let Some(v) = self.eps2 {
            cfg.eps2 = v;
        }
        if let Some(v) = self.eps_lambda {
            cfg.eps_lambda = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.jitter {
            cfg.jitter_scale = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
    }

    fn config(&self) -> gridcascade::Result<SolverConfig> {
        let mut cfg = SolverConfig::default();
        self.apply(&mut cfg);
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Zeros,
    Random,
}

#[derive(Args)]
struct SolveArgs {
    grid: PathBuf,
    /// Remove these lines (`a-b`) before solving.
    #[arg(long = "cut", value_parser = parse_edge)]
    cut: Vec<EdgeKey>,
    #[arg(long, value_enum, default_value = "zeros")]
    start: StartArg,
    #[command(flatten)]
    solver: SolverFlags,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyStart {
    Zeros,
    Previous,
    Random,
    Perturbed,
}

#[derive(Args)]
struct PolicyFlags {
    /// JSON file holding a full cascade policy; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    min_island: Option<usize>,
    #[arg(long, value_enum)]
    start: Option<PolicyStart>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    attempts: Option<usize>,
    /// Kick every failing node in a full simulation and record divergence.
    #[arg(long)]
    confirm: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

impl PolicyFlags {
    fn policy(&self) -> gridcascade::Result<CascadePolicy> {
        let mut p = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| GridError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| GridError::Config(format!("{}: {e}", path.display())))?
            }
            None => CascadePolicy::default(),
        };
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = self.magnitude {
            p.disturbance_magnitude = v;
        }
        if let Some(v) = self.max_rounds {
            p.max_rounds = v;
        }
        if let Some(v) = self.min_island {
            p.min_live_island = v;
        }
        if let Some(v) = self.start {
            p.start = match v {
                PolicyStart::Zeros => StartStrategy::Zeros,
                PolicyStart::Previous => StartStrategy::Previous,
                PolicyStart::Random => StartStrategy::Random,
                PolicyStart::Perturbed => StartStrategy::Perturbed,
            };
        }
        if let Some(v) = self.spread {
            p.start_spread = v;
        }
        if let Some(v) = self.attempts {
            p.start_attempts = v;
        }
        if self.confirm {
            p.confirm_by_simulation = true;
        }
        // --seed drives the policy seed; solver seeds are derived from it
        if let Some(v) = self.solver.seed {
            p.rng_seed = v;
        }
        let seed = p.solver.rng_seed;
        self.solver.apply(&mut p.solver);
        p.solver.rng_seed = seed;
        p.check()?;
        Ok(p)
    }
}

#[derive(Args)]
struct CascadeArgs {
    grid: PathBuf,
    /// Line to cut, as `a-b`.
    #[arg(long, value_parser = parse_edge)]
    attack: EdgeKey,
    #[command(flatten)]
    policy: PolicyFlags,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Ordered,
    Random,
}

#[derive(Args)]
struct CampaignArgs {
    grid: PathBuf,
    /// Output directory for traces, summary and plot data.
    #[arg(long)]
    out: PathBuf,
    /// Number of attacks (default: every line once).
    #[arg(long)]
    attacks: Option<usize>,
    #[arg(long, value_enum, default_value = "ordered")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[command(flatten)]
    policy: PolicyFlags,
}

#[derive(Args)]
struct SimulateArgs {
    grid: PathBuf,
    /// Start from the synchronous state of the grid, then cut these lines
    /// at t = 0.
    #[arg(long = "cut", value_parser = parse_edge)]
    cut: Vec<EdgeKey>,
    /// Phase kick `node:magnitude@time`, or `all:magnitude@time`.
    #[arg(long = "kick", value_parser = parse_kick)]
    kicks: Vec<DisturbanceSpec>,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
    /// Keep every n-th sample in the output.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

fn parse_edge(s: &str) -> Result<EdgeKey, String> {
    let (a, b) = s
        .trim_start_matches(['E', 'e'])
        .split_once(['-', ','])
        .ok_or_else(|| format!("expected a-b, got {s:?}"))?;
    let id = |t: &str| {
        t.trim()
            .trim_start_matches(['N', 'n'])
            .parse::<u32>()
            .map(NodeId)
            .map_err(|e| format!("{t:?}: {e}"))
    };
    Ok(EdgeKey::new(id(a)?, id(b)?))
}

fn parse_kick(s: &str) -> Result<DisturbanceSpec, String> {
    let (target, rest) = s.split_once(':').ok_or("expected node:magnitude@time")?;
    let (mag, time) = rest.split_once('@').ok_or("expected node:magnitude@time")?;
    let targets = if target.eq_ignore_ascii_case("all") {
        Targets::All
    } else {
        Targets::Nodes(vec![NodeId(
            target.parse().map_err(|e| format!("{target:?}: {e}"))?,
        )])
    };
    Ok(DisturbanceSpec {
        targets,
        magnitude: mag.parse().map_err(|e| format!("{mag:?}: {e}"))?,
        mode: KickMode::PhaseKick,
        time: time.parse().map_err(|e| format!("{time:?}: {e}"))?,
    })
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Parse { .. }
            | GridError::Validation(_)
            | GridError::MissingEdge(_)
            | GridError::MissingNode(_)
            | GridError::InvalidAlpha(_)
            | GridError::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

/// An unreadable input grid is the caller's mistake, not a runtime fault.
fn load(path: &std::path::Path) -> Result<GridTopology, Failure> {
    load_grid(path).map_err(|e| match e {
        GridError::Io { .. } => Failure::Config(e.to_string()),
        other => other.into(),
    })
}

fn cut_lines(g: &GridTopology, cut: &[EdgeKey]) -> gridcascade::Result<GridTopology> {
    let mut out = g.clone();
    for k in cut {
        out = out.remove_edge(k.a, k.b)?;
    }
    Ok(out)
}

fn solve(args: &SolveArgs, poles: bool) -> CliResult {
    let g = cut_lines(&load(&args.grid)?, &args.cut)?;
    let cfg = args.solver.config()?;
    let guess = match args.start {
        StartArg::Zeros => InitialGuess::Zeros,
        StartArg::Random => InitialGuess::Random,
    };
    let eq = solve_equilibrium(&g, &guess, &cfg)?;
    let stability = if eq.converged {
        Some(classify_components(&g, &eq, DEFAULT_ZERO_TOL)?)
    } else {
        None
    };
    let reports = if poles && eq.converged {
        Some(analyze_all_nodes(&g, &eq, DEFAULT_POLE_ZERO_TOL)?)
    } else {
        None
    };
    let mut out = io::stdout().lock();
    if args.json {
        let doc = serde_json::json!({
            "solver": cfg,
            "node_ids": g.node_ids(),
            "equilibrium": eq,
            "stability": stability,
            "verdict": stability.as_deref().map(worst_verdict),
            "poles": reports,
        });
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&doc).map_err(GridError::from)?
        )?;
        return Ok(());
    }
    writeln!(
        out,
        "converged: {} ({:?}, {} iterations, residual {:.3e}, seed {})",
        eq.converged, eq.termination, eq.iterations, eq.residual_norm, cfg.rng_seed
    )?;
    for (n, th) in g.nodes().iter().zip(&eq.phases) {
        writeln!(out, "  {:>6}  theta = {:+.6}", n.id, th)?;
    }
    if let Some(reports) = &stability {
        for (k, r) in reports.iter().enumerate() {
            writeln!(
                out,
                "island {k}: lambda2 = {:+.6e}  {:?}",
                r.lambda2, r.verdict
            )?;
        }
        writeln!(out, "verdict: {:?}", worst_verdict(reports))?;
    }
    if let Some(reports) = reports {
        writeln!(
            out,
            "{:>8} {:>10} {:>22} {:>22}  verdict",
            "node", "beta", "s1", "s2"
        )?;
        for r in reports {
            writeln!(
                out,
                "{:>8} {:>10.4} {:>22} {:>22}  {:?}",
                r.node.to_string(),
                r.beta,
                format!("{:.4}", r.s1),
                format!("{:.4}", r.s2),
                r.verdict
            )?;
        }
    }
    Ok(())
}

fn cascade(args: &CascadeArgs) -> CliResult {
    let g = load(&args.grid)?;
    let policy = args.policy.policy()?;
    let label = args
        .grid
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let trace = run_cascade(&g, args.attack, &policy, &label)?;
    let text = trace.to_json()? + "\n";
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| GridError::Io {
            path: path.clone(),
            source: e,
        })?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    eprintln!(
        "{}: {:?}, {} rounds, {} failed nodes, {} failed lines",
        trace.attack,
        trace.outcome,
        trace.rounds.len(),
        trace.failed_nodes,
        trace.failed_edges
    );
    Ok(())
}

fn campaign(args: &CampaignArgs) -> CliResult {
    let g = load(&args.grid)?;
    let policy = args.policy.policy()?;
    let strategy = match args.strategy {
        StrategyArg::Ordered => AttackStrategy::Ordered,
        StrategyArg::Random => AttackStrategy::RandomWithoutReplacement,
    };
    let label = args
        .grid
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let attacks = select_attacks(&g, strategy, args.attacks, policy.rng_seed)?;
    let traces = run_attacks(&g, &attacks, &policy, args.parallelism, &label)?;
    let summary = summarize(&g, &traces, strategy, &policy, args.parallelism, &label);
    write_campaign(&args.out, &summary, &traces)?;
    export_plot_data(&summary, &traces, &args.out.join("plot"))?;
    println!(
        "{} attacks, {} cascades, mean failed fraction {:.4}, outcomes {:?}",
        summary.attacks_run,
        summary.cascades_triggered,
        summary.mean_failed_fraction,
        summary.outcomes
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> CliResult {
    let g = load(&args.grid)?;
    let cfg = args.solver.config()?;
    let eq = solve_equilibrium(&g, &InitialGuess::Zeros, &cfg)?;
    if !eq.converged {
        return Err(Failure::Runtime(format!(
            "no synchronous state found ({:?})",
            eq.termination
        )));
    }
    let g_run = cut_lines(&g, &args.cut)?;
    if args.stride == 0 {
        return Err(Failure::Config("stride must be >= 1".into()));
    }
    let opts = SimulationOptions {
        dt: args.dt,
        horizon: args.horizon,
        seed: cfg.rng_seed,
        ..Default::default()
    };
    let traj = integrate_swing(&g_run, &SwingState::at_rest(eq.phases), &opts, &args.kicks)?;
    match &args.out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| GridError::Io {
                path: path.clone(),
                source: e,
            })?;
            write_trajectory_columns(&traj, args.stride, io::BufWriter::new(f))?;
        }
        None => write_trajectory_columns(&traj, args.stride, io::stdout().lock())?,
    }
    for d in &traj.diverged {
        eprintln!("{} diverged at t = {:.3}", d.node, d.time);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a, false),
        Command::Analyze(a) => solve(a, true),
        Command::Cascade(a) => cascade(a),
        Command::Campaign(a) => campaign(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
