//! `msdspan`: spanning tests, set characters, simulation studies, and
//! rolling backtests from the command line.
//!
//! Exit codes: 0 success (spanning accepted where a decision is made),
//! 3 spanning rejected, 2 invalid configuration or inputs, 1 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use msdspan::analytics::{
    align_factors, drift_weights, load_factors, ols, opportunity_cost, performance, return_loss,
    run_backtest, BacktestConfig, BacktestResult, OlsFit, PerfReport,
};
use msdspan::character::{character, validate_alpha, CharacterReport};
use msdspan::resampling::Decision;
use msdspan::simulation::{run_mc, spanning_scenario, GarchSpec, McResult};
use msdspan::spanning::{run_span, SpanningResult};
use msdspan::statistic::KernelSide;
use msdspan::{
    Error, FixedZGrid, GridPolicy, GridRange, PortfolioSet, Result, ReturnPanel, SpanningConfig,
    ZGridMode,
};

#[derive(Parser)]
#[command(name = "msdspan", version, about = "Stochastic spanning tests for portfolio sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether the candidate set spans the full set
    Span(SpanArgs),
    /// Exact character of a pair of sets and the level it supports
    Character(CharacterArgs),
    /// Rejection rates of the test on simulated heteroskedastic panels
    Mc(McArgs),
    /// Roll the selected portfolio forward out of sample
    Backtest(BacktestArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for report files
    #[arg(long, env = "MSDSPAN_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,
    /// Report format; csv adds per-row files next to report.json
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SpanArgs {
    /// Return panel CSV
    #[arg(long)]
    panel: PathBuf,
    /// Candidate portfolio set JSON
    #[arg(long = "k-set")]
    k_set: PathBuf,
    /// Full portfolio set JSON, or "simplex" for every long-only portfolio
    #[arg(long = "l-set")]
    l_set: String,
    /// Nominal test level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated subsample window lengths; empty derives them from T
    #[arg(long, value_delimiter = ',')]
    subsample_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "sample-values", or "from:to:step,from:to:step" for the two sides
    #[arg(long, default_value = "sample-values", allow_hyphen_values = true)]
    z_grid: String,
    /// Rebuild the threshold grid inside each window, or share the full one
    #[arg(long, value_enum, default_value_t = GridPolicyArg::Window)]
    grid_policy: GridPolicyArg,
    /// Decide with the raw largest-window critical value
    #[arg(long)]
    no_bias_correction: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridPolicyArg {
    Window,
    Global,
}

#[derive(Args)]
struct CharacterArgs {
    /// Inner portfolio set JSON
    #[arg(long = "k-set")]
    k_set: PathBuf,
    /// Outer portfolio set JSON, or "simplex"
    #[arg(long = "l-set")]
    l_set: String,
    /// Level to check against the character bound
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct McArgs {
    /// Simulation design: the 4-asset or the 12-asset panel
    #[arg(long, value_enum, default_value_t = DesignArg::A)]
    design: DesignArg,
    /// Base assets available to the candidate sets; at least one base asset
    /// must stay outside them, so the default is two fewer than the assets
    #[arg(long)]
    active: Option<usize>,
    #[arg(long, default_value_t = 300)]
    periods: usize,
    #[arg(long, default_value_t = 200)]
    replications: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subsample window lengths; empty derives them from T
    #[arg(long, value_delimiter = ',')]
    subsample_sizes: Vec<usize>,
    /// "sample-values", or "from:to:step,from:to:step" for the two sides
    #[arg(long, default_value = "sample-values", allow_hyphen_values = true)]
    z_grid: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    A,
    B,
}

#[derive(Args)]
struct BacktestArgs {
    /// Return panel CSV
    #[arg(long)]
    panel: PathBuf,
    /// Candidate portfolio set JSON
    #[arg(long = "k-set")]
    k_set: PathBuf,
    /// Full portfolio set JSON, or "simplex"
    #[arg(long = "l-set")]
    l_set: String,
    /// Estimation window length in periods
    #[arg(long, default_value_t = 360)]
    window: usize,
    /// Proportional cost per unit of turnover
    #[arg(long, default_value_t = 0.0035)]
    cost: f64,
    /// "sample-values", or "from:to:step,from:to:step" for the two sides
    #[arg(long, default_value = "sample-values", allow_hyphen_values = true)]
    z_grid: String,
    /// Fixed comparison weights JSON enabling the comparative metrics
    #[arg(long)]
    benchmark_weights: Option<PathBuf>,
    /// Factor panel CSV; fits the net-return regression
    #[arg(long)]
    factors: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidPanel(_)
        | Error::InvalidSet(_)
        | Error::InvalidWeights(_)
        | Error::InvalidConfig(_)
        | Error::Parse { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyGridSide { .. }
        | Error::NotSubset(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Span(args) => cmd_span(args),
        Command::Character(args) => cmd_character(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Backtest(args) => cmd_backtest(args),
    }
}

/// Phase timings, reported in a separate file so reports stay byte-stable.
struct Timer {
    started: Instant,
    last: Instant,
    phases: Vec<Phase>,
}

#[derive(Serialize)]
struct Phase {
    name: &'static str,
    seconds: f64,
}

#[derive(Serialize)]
struct Timings {
    command: &'static str,
    total_seconds: f64,
    phases: Vec<Phase>,
}

impl Timer {
    fn start() -> Self {
        let now = Instant::now();
        Self {
            started: now,
            last: now,
            phases: Vec::new(),
        }
    }

    fn phase(&mut self, name: &'static str) {
        let now = Instant::now();
        self.phases.push(Phase {
            name,
            seconds: now.duration_since(self.last).as_secs_f64(),
        });
        self.last = now;
    }

    fn write(self, command: &'static str, dir: &Path) -> Result<()> {
        let timings = Timings {
            command,
            total_seconds: self.started.elapsed().as_secs_f64(),
            phases: self.phases,
        };
        write_json(&dir.join("timings.json"), &timings)
    }
}

fn parse_range(spec: &str) -> Result<GridRange> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "grid range {spec:?} is not from:to:step"
        )));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidConfig(format!("bad number {s:?} in grid range: {e}")))
    };
    Ok(GridRange {
        from: num(parts[0])?,
        to: num(parts[1])?,
        step: num(parts[2])?,
    })
}

fn parse_z_grid(spec: &str) -> Result<ZGridMode> {
    if spec == "sample-values" {
        return Ok(ZGridMode::SampleValues);
    }
    let (neg, pos) = spec.split_once(',').ok_or_else(|| {
        Error::InvalidConfig(format!(
            "z grid {spec:?} is neither \"sample-values\" nor two ranges"
        ))
    })?;
    Ok(ZGridMode::FixedGrid(FixedZGrid {
        negative: parse_range(neg)?,
        positive: parse_range(pos)?,
    }))
}

fn load_outer_set(spec: &str, assets: usize) -> Result<PortfolioSet> {
    if spec == "simplex" {
        Ok(PortfolioSet::standard_simplex(assets))
    } else {
        PortfolioSet::load(spec)
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Hash of the resolved configuration, recorded in every report.
fn config_sha256(value: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

fn side_label(side: KernelSide) -> &'static str {
    match side {
        KernelSide::Lower => "lower",
        KernelSide::Upper => "upper",
    }
}

#[derive(Serialize)]
struct SpanReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    panel_file: String,
    candidate_file: String,
    full_set: String,
    periods: usize,
    assets: usize,
    config: &'a SpanningConfig,
    config_sha256: String,
    result: &'a SpanningResult,
}

fn cmd_span(args: SpanArgs) -> Result<ExitCode> {
    let mut timer = Timer::start();
    std::fs::create_dir_all(&args.output.output_dir)?;
    let panel = ReturnPanel::load(&args.panel)?;
    let inner = PortfolioSet::load(&args.k_set)?;
    let outer = load_outer_set(&args.l_set, panel.assets())?;
    timer.phase("load");

    let mut config = SpanningConfig {
        alpha: args.alpha,
        subsample_sizes: args.subsample_sizes.clone(),
        z_grid: parse_z_grid(&args.z_grid)?,
        grid_policy: match args.grid_policy {
            GridPolicyArg::Window => GridPolicy::Window,
            GridPolicyArg::Global => GridPolicy::Global,
        },
        bias_correction: !args.no_bias_correction,
        rng_seed: args.seed,
        threads: args.output.threads,
        ..SpanningConfig::default()
    };
    let pool = thread_pool(args.output.threads)?;
    let result = pool.install(|| run_span(&panel, &outer, &inner, &config))?;
    timer.phase("span");

    // Thread count is an execution detail; reports stay identical across it.
    config.threads = 0;
    let report = SpanReport {
        tool: "msdspan",
        version: env!("CARGO_PKG_VERSION"),
        command: "span",
        panel_file: args.panel.display().to_string(),
        candidate_file: args.k_set.display().to_string(),
        full_set: args.l_set.clone(),
        periods: panel.periods(),
        assets: panel.assets(),
        config: &config,
        config_sha256: config_sha256(&config)?,
        result: &result,
    };
    write_json(&args.output.output_dir.join("report.json"), &report)?;
    if args.output.format == Format::Csv {
        write_grid_csv(&args.output.output_dir.join("grid.csv"), &result)?;
        write_subsample_csv(&args.output.output_dir.join("subsamples.csv"), &result)?;
    }
    timer.phase("write");
    timer.write("span", &args.output.output_dir)?;

    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "statistic {:.6} at z = {:.6} ({} side)",
        result.statistic.xi,
        result.statistic.best.z,
        side_label(result.statistic.best.side)
    );
    println!(
        "critical value {:.6} at level {}{}",
        result.critical_value,
        result.alpha,
        if result.bias.is_some() {
            " after bias correction"
        } else {
            ""
        }
    );
    match result.decision {
        Decision::Accept => {
            println!("decision: accept spanning");
            Ok(ExitCode::SUCCESS)
        }
        Decision::Reject => {
            println!("decision: reject spanning");
            Ok(ExitCode::from(3))
        }
    }
}

fn write_grid_csv(path: &Path, result: &SpanningResult) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["side", "z", "unscaled", "scaled"])?;
    for point in &result.statistic.per_z {
        writer.write_record([
            side_label(point.side).to_string(),
            format!("{}", point.z),
            format!("{}", point.unscaled),
            format!("{}", point.scaled),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_subsample_csv(path: &Path, result: &SpanningResult) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["block", "windows", "quantile"])?;
    for s in &result.subsamples {
        writer.write_record([
            s.block.to_string(),
            s.windows.to_string(),
            format!("{}", s.quantile),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CharacterFileReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    candidate_file: String,
    full_set: String,
    alpha: f64,
    alpha_warning: Option<String>,
    result: &'a CharacterReport,
}

fn cmd_character(args: CharacterArgs) -> Result<ExitCode> {
    let mut timer = Timer::start();
    std::fs::create_dir_all(&args.output.output_dir)?;
    let inner = PortfolioSet::load(&args.k_set)?;
    let outer = load_outer_set(&args.l_set, inner.assets())?;
    timer.phase("load");
    let tols = msdspan::Tolerances::default();
    let report = character(&outer, &inner, &tols)?;
    let alpha_warning = validate_alpha(&report, args.alpha);
    timer.phase("character");

    let file = CharacterFileReport {
        tool: "msdspan",
        version: env!("CARGO_PKG_VERSION"),
        command: "character",
        candidate_file: args.k_set.display().to_string(),
        full_set: args.l_set.clone(),
        alpha: args.alpha,
        alpha_warning: alpha_warning.clone(),
        result: &report,
    };
    write_json(&args.output.output_dir.join("report.json"), &file)?;
    if args.output.format == Format::Csv {
        let mut writer = csv::Writer::from_path(args.output.output_dir.join("effective.csv"))?;
        writer.write_record(["inner_vertex", "outer_vertex", "tie_count"])?;
        for point in &report.effective {
            writer.write_record([
                point.vertex.to_string(),
                point.outer_vertex.to_string(),
                point.adjoint.len().to_string(),
            ])?;
        }
        writer.flush()?;
    }
    timer.phase("write");
    timer.write("character", &args.output.output_dir)?;

    println!(
        "character {}/{} = {:.6}",
        report.character_numer, report.character_denom, report.character
    );
    match report.alpha_bound {
        Some(bound) => println!("supported levels: alpha < {bound:.6}"),
        None => println!("supported levels: none (character at or above 1)"),
    }
    if let Some(warning) = alpha_warning {
        eprintln!("warning: {warning}");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct McReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    design: &'static str,
    active: usize,
    config: &'a SpanningConfig,
    config_sha256: String,
    result: &'a McResult,
}

fn cmd_mc(args: McArgs) -> Result<ExitCode> {
    let mut timer = Timer::start();
    std::fs::create_dir_all(&args.output.output_dir)?;
    let (garch, design_label) = match args.design {
        DesignArg::A => (GarchSpec::panel_a(), "a"),
        DesignArg::B => (GarchSpec::panel_b(), "b"),
    };
    let active = args.active.unwrap_or(garch.assets - 2);
    let scenario = spanning_scenario(garch, active)?;
    timer.phase("setup");

    let mut config = SpanningConfig {
        alpha: args.alpha,
        subsample_sizes: args.subsample_sizes.clone(),
        z_grid: parse_z_grid(&args.z_grid)?,
        rng_seed: args.seed,
        threads: args.output.threads,
        ..SpanningConfig::default()
    };
    let pool = thread_pool(args.output.threads)?;
    let result = pool.install(|| run_mc(&scenario, args.periods, args.replications, &config))?;
    timer.phase("simulate");

    config.threads = 0;
    let report = McReport {
        tool: "msdspan",
        version: env!("CARGO_PKG_VERSION"),
        command: "mc",
        design: design_label,
        active,
        config: &config,
        config_sha256: config_sha256(&config)?,
        result: &result,
    };
    write_json(&args.output.output_dir.join("report.json"), &report)?;
    if args.output.format == Format::Csv {
        let mut writer = csv::Writer::from_path(args.output.output_dir.join("table.csv"))?;
        writer.write_record([
            "design",
            "bias_correction",
            "replications",
            "rejections",
            "rate",
            "standard_error",
        ])?;
        for cell in &result.cells {
            let design = match cell.design {
                msdspan::simulation::McDesign::SpanningHolds => "spanning-holds",
                msdspan::simulation::McDesign::SpanningFails => "spanning-fails",
            };
            writer.write_record([
                design.to_string(),
                cell.bias_correction.to_string(),
                result.replications.to_string(),
                cell.rejections.to_string(),
                format!("{}", cell.rate),
                format!("{}", cell.standard_error),
            ])?;
        }
        writer.flush()?;
    }
    timer.phase("write");
    timer.write("mc", &args.output.output_dir)?;

    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    for cell in &result.cells {
        let design = match cell.design {
            msdspan::simulation::McDesign::SpanningHolds => "spanning holds",
            msdspan::simulation::McDesign::SpanningFails => "spanning fails",
        };
        println!(
            "{design}, bias correction {}: rejection rate {:.3} (se {:.3})",
            cell.bias_correction, cell.rate, cell.standard_error
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OpportunityCostRow {
    power: f64,
    theta: f64,
    widened: bool,
}

#[derive(Serialize)]
struct BenchmarkComparison {
    weights: Vec<f64>,
    gross_performance: PerfReport,
    net_performance: PerfReport,
    /// Strategy mean at the benchmark's volatility, minus the benchmark mean.
    return_loss: f64,
    /// Sure increment making the benchmark match the strategy's utility.
    opportunity_costs: Vec<OpportunityCostRow>,
}

#[derive(Serialize)]
struct BacktestReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    panel_file: String,
    candidate_file: String,
    full_set: String,
    config: &'a BacktestConfig,
    config_sha256: String,
    result: &'a BacktestResult,
    gross_performance: PerfReport,
    net_performance: PerfReport,
    benchmark: Option<BenchmarkComparison>,
    regression: Option<OlsFit>,
}

fn cmd_backtest(args: BacktestArgs) -> Result<ExitCode> {
    let mut timer = Timer::start();
    std::fs::create_dir_all(&args.output.output_dir)?;
    let panel = ReturnPanel::load(&args.panel)?;
    let inner = PortfolioSet::load(&args.k_set)?;
    let outer = load_outer_set(&args.l_set, panel.assets())?;
    timer.phase("load");

    let config = BacktestConfig {
        window: args.window,
        transaction_cost: args.cost,
        z_grid: parse_z_grid(&args.z_grid)?,
        ..BacktestConfig::default()
    };
    let pool = thread_pool(args.output.threads)?;
    let result = pool.install(|| run_backtest(&panel, &outer, &inner, &config))?;
    timer.phase("backtest");

    let net = result.net_returns();
    let gross = result.gross_returns();

    let factors = match &args.factors {
        Some(path) => {
            let loaded = load_factors(path)?;
            let dates = result.dates();
            Some(align_factors(&loaded, dates.as_deref(), net.len())?)
        }
        None => None,
    };
    let riskfree = factors.as_ref().and_then(|(_, rf)| rf.clone());

    let gross_performance = performance(&gross, riskfree.as_deref())?;
    let net_performance = performance(&net, riskfree.as_deref())?;

    let benchmark = match &args.benchmark_weights {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let weights: Vec<f64> = serde_json::from_str(&text)?;
            PortfolioSet::singleton(weights.clone())?;
            let (bench_gross, bench_net) =
                fixed_weight_track(&panel, &weights, config.window, config.transaction_cost)?;
            let mut opportunity_costs = Vec::new();
            for power in [2.0, 3.0, 4.0] {
                let oc = opportunity_cost(&net, &bench_net, power, power, 2.25)?;
                opportunity_costs.push(OpportunityCostRow {
                    power,
                    theta: oc.theta,
                    widened: oc.widened,
                });
            }
            Some(BenchmarkComparison {
                gross_performance: performance(&bench_gross, riskfree.as_deref())?,
                net_performance: performance(&bench_net, riskfree.as_deref())?,
                return_loss: return_loss(&net, &bench_net)?,
                opportunity_costs,
                weights,
            })
        }
        None => None,
    };

    let regression = match &factors {
        Some((cols, rf)) => {
            let y: Vec<f64> = match rf {
                Some(rf) => net.iter().zip(rf).map(|(r, f)| r - f).collect(),
                None => net.clone(),
            };
            Some(ols(&y, cols)?)
        }
        None => None,
    };
    timer.phase("analytics");

    let report = BacktestReport {
        tool: "msdspan",
        version: env!("CARGO_PKG_VERSION"),
        command: "backtest",
        panel_file: args.panel.display().to_string(),
        candidate_file: args.k_set.display().to_string(),
        full_set: args.l_set.clone(),
        config: &config,
        config_sha256: config_sha256(&config)?,
        result: &result,
        gross_performance,
        net_performance,
        benchmark,
        regression,
    };
    write_json(&args.output.output_dir.join("report.json"), &report)?;
    if args.output.format == Format::Csv {
        write_records_csv(&args.output.output_dir.join("records.csv"), &panel, &result)?;
    }
    timer.phase("write");
    timer.write("backtest", &args.output.output_dir)?;

    println!(
        "{} out-of-sample periods, gross multiple {:.4}, net multiple {:.4} (cost drag {:.4})",
        result.records.len(),
        result.gross_multiple,
        result.net_multiple,
        result.cost_drag
    );
    println!(
        "net mean {:.6}, stdev {:.6}, downside ratio {:.4}",
        report.net_performance.mean,
        report.net_performance.stdev,
        report.net_performance.downside_sharpe
    );
    Ok(ExitCode::SUCCESS)
}

/// Benchmark track: the same fixed weights each period, costed on the
/// turnover against their drifted selves.
fn fixed_weight_track(
    panel: &ReturnPanel,
    weights: &[f64],
    start: usize,
    cost: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if weights.len() != panel.assets() {
        return Err(Error::DimensionMismatch {
            expected: panel.assets(),
            found: weights.len(),
        });
    }
    let mut gross = Vec::new();
    let mut net = Vec::new();
    let mut held: Option<Vec<f64>> = None;
    for t in start..panel.periods() {
        let row = panel.row(t);
        let r: f64 = weights.iter().zip(row).map(|(w, x)| w * x).sum();
        let turnover = match &held {
            None => 0.0,
            Some(prev) => weights.iter().zip(prev).map(|(w, d)| (w - d).abs()).sum(),
        };
        gross.push(r);
        net.push((1.0 + r) * (1.0 - cost * turnover) - 1.0);
        held = Some(drift_weights(weights, row)?);
    }
    Ok((gross, net))
}

fn write_records_csv(path: &Path, panel: &ReturnPanel, result: &BacktestResult) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "date".to_string(),
        "xi".to_string(),
        "gross_return".to_string(),
        "turnover".to_string(),
        "net_return".to_string(),
        "gross_wealth".to_string(),
        "net_wealth".to_string(),
    ];
    for name in panel.names() {
        header.push(format!("w_{name}"));
    }
    writer.write_record(&header)?;
    for record in &result.records {
        let mut row = vec![
            record.date.clone().unwrap_or_default(),
            format!("{}", record.xi),
            format!("{}", record.gross_return),
            format!("{}", record.turnover),
            format!("{}", record.net_return),
            format!("{}", record.gross_wealth),
            format!("{}", record.net_wealth),
        ];
        for w in record.weights.as_slice() {
            row.push(format!("{w}"));
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
