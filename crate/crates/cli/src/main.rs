use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use safegov::bounds::BoundMethod;
use safegov::sim::{monte_carlo_peak, run_closed_loop, Outcome, Scenario};
use serde_json::{json, Value};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 2;
const EXIT_HORIZON: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "safegov", version, about = "Peak-output bounds and governed navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute peak-output bounds for the scenario's relaxed system.
    Bound(BoundArgs),
    /// Run the closed-loop navigation simulation and write its trace.
    Simulate(SimulateArgs),
    /// Check the bounds against sampled disturbance trajectories.
    Montecarlo(MonteCarloArgs),
    /// Parse and check a scenario without running anything.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Override a scenario field, e.g. `--set k_g=0.5` or `--set plant.wheelbase_m=0.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report or trace destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sdp,
    Lyap,
    Both,
}

impl MethodArg {
    fn methods(self) -> &'static [BoundMethod] {
        match self {
            MethodArg::Sdp => &[BoundMethod::Sdp],
            MethodArg::Lyap => &[BoundMethod::Lyap],
            MethodArg::Both => &[BoundMethod::Lyap, BoundMethod::Sdp],
        }
    }
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the trace as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the final occupancy grid as PGM with a JSON sidecar.
    #[arg(long)]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    #[arg(long)]
    trials: Option<usize>,
    /// Multiplies the computed bounds before comparison (oracle self-test).
    #[arg(long, hide = true, default_value_t = 1.0)]
    scale_bound: f64,
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("override {kv:?} is not KEY=VALUE"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn load(common: &CommonArgs) -> Result<Scenario> {
    let mut overrides = parse_overrides(&common.overrides)?;
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    Scenario::load(&common.scenario, &overrides)
        .with_context(|| format!("loading scenario {}", common.scenario.display()))
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit(report: &Value, out: Option<&Path>) -> Result<()> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<u8> {
    let scn = load(&args.common)?;
    let setup = scn.build()?;
    let z0 = scn.initial_error_state(&setup)?;
    let mut report = json!({
        "scenario": scn.name,
        "alpha_bar": setup.system.alpha_bar(),
        "z0": z0.as_slice(),
    });
    for &m in args.method.methods() {
        let start = Instant::now();
        let b = safegov::bounds::peak_bound(&setup.system, &z0, m)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        report[format!("delta_{m}")] = json!(b.delta);
        report[format!("alpha_star_{m}")] = json!(b.alpha_star);
        report[format!("wall_time_ms_{m}")] = json!(ms);
        if args.common.verbose {
            eprintln!("{m}: delta = {} at alpha = {} ({ms:.1} ms)", b.delta, b.alpha_star);
        }
    }
    emit(&report, args.common.out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8> {
    let scn = load(&args.common)?;
    let map = scn.load_map()?;
    let res = run_closed_loop(&scn, &map)?;
    let trace = &res.trace;
    match &args.common.out {
        Some(p) => trace.write_ndjson(BufWriter::new(File::create(p)?))?,
        None => trace.write_ndjson(BufWriter::new(std::io::stdout().lock()))?,
    }
    if let Some(p) = &args.csv {
        trace.write_csv(BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &args.grid {
        res.grid.write_pgm(p)?;
    }
    let s = &trace.summary;
    if args.common.verbose || args.common.out.is_some() {
        eprintln!(
            "{:?} at t = {:.2}s after {} steps; min clearance {:.3} m, {} stalled steps",
            s.outcome, s.time_s, s.steps, s.min_clearance_m, s.stalled_steps
        );
    }
    if s.outcome == Outcome::Collision || s.safety_breaches > 0 {
        if let Some(r) = trace.records.iter().find(|r| r.flags.governor_moved && !r.flags.chain_ok) {
            eprintln!("first safety-chain breach: {}", serde_json::to_string(r)?);
        } else if let Some(r) = trace.records.last() {
            eprintln!("collision after record: {}", serde_json::to_string(r)?);
        }
        return Ok(EXIT_VIOLATION);
    }
    Ok(match s.outcome {
        Outcome::GoalReached => EXIT_OK,
        _ => EXIT_HORIZON,
    })
}

fn cmd_montecarlo(args: &MonteCarloArgs) -> Result<u8> {
    let scn = load(&args.common)?;
    let setup = scn.build()?;
    let z0 = scn.initial_error_state(&setup)?;
    let mut spec = scn.montecarlo;
    if let Some(n) = args.trials {
        spec.trials = n;
    }
    let mc = monte_carlo_peak(&setup.system, &z0, &spec, scn.seed)?;
    let mut report = json!({
        "scenario": scn.name,
        "sampled_peak": mc.peak,
        "trials": spec.trials,
        "seed": scn.seed,
    });
    let mut violations = 0usize;
    for &m in args.method.methods() {
        let delta = safegov::bounds::peak_bound(&setup.system, &z0, m)?.delta * args.scale_bound;
        report[format!("delta_{m}")] = json!(delta);
        violations += mc.trial_peaks.iter().filter(|&&p| p > delta + 1e-6).count();
    }
    report["violations"] = json!(violations);
    emit(&report, args.common.out.as_deref())?;
    Ok(if violations == 0 { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_validate(args: &CommonArgs) -> Result<u8> {
    let scn = load(args)?;
    let setup = scn.build()?;
    if scn.map.is_some() {
        scn.load_map()?;
    }
    let report = json!({
        "scenario": scn.name,
        "valid": true,
        "states": setup.system.state_dim(),
        "alpha_bar": setup.system.alpha_bar(),
    });
    emit(&report, args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
