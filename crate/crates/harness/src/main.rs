use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recal_core::receiver::optimal_configuration;
use recal_core::{DisplacementGrid, EnvironmentSpec, Mode};
use recal_harness::batch::{run_batch, run_metrics, run_trace, BatchSummary};
use recal_harness::emit::{
    emit_trace, write_aligned_csv, write_summary_csv, write_summary_json, TraceFormat,
};
use recal_harness::error::{HarnessError, Result};
use recal_harness::metrics::{aligned_series, CURVE_WINDOW};
use recal_harness::scenario_file::{load_scenario, DEFAULT_GRID};

/// Simulate automatic re-calibration of a Kennedy receiver.
#[derive(Parser)]
#[command(name = "recal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed and write its trace, curves and value-table snapshots.
    Run(RunArgs),
    /// Run a range of seeds and write per-seed statistics.
    Batch(BatchArgs),
    /// Run the proposed method and plain Q-learning on the same seeds.
    Compare(BatchArgs),
    /// Print the best grid configuration for an environment.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Proposed,
    Baseline,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Proposed => Mode::Proposed,
            ModeArg::Baseline => Mode::Baseline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormatArg {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SummaryFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "proposed")]
    mode: ModeArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: TraceFormatArg,
    /// Trailing window of the reward curve.
    #[arg(long, default_value_t = CURVE_WINDOW)]
    window: usize,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// `A..B` (end excluded), `A..=B` or a comma-separated list.
    #[arg(long, default_value = "0..25")]
    seeds: String,
    #[arg(long, value_enum, default_value = "proposed")]
    mode: ModeArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: SummaryFormat,
}

#[derive(Args)]
struct OracleArgs {
    /// Take the grid and every environment from a scenario file.
    #[arg(long, conflicts_with_all = ["intensity", "prior_bias", "gain"])]
    scenario: Option<PathBuf>,
    #[arg(long, required_unless_present = "scenario")]
    intensity: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    prior_bias: f64,
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    #[arg(long, default_value_t = DEFAULT_GRID.0, allow_hyphen_values = true)]
    grid_min: f64,
    #[arg(long, default_value_t = DEFAULT_GRID.1)]
    grid_max: f64,
    #[arg(long, default_value_t = DEFAULT_GRID.2)]
    grid_points: usize,
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || HarnessError::Invalid(format!("--seeds: cannot read {spec:?}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = spec.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(HarnessError::Invalid("--seeds selects no seed".into()));
    }
    Ok(seeds)
}

fn core_validation(context: &str) -> impl FnOnce(recal_core::Error) -> HarnessError + '_ {
    move |source| HarnessError::Validation {
        context: context.into(),
        source,
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    if args.window == 0 {
        return Err(HarnessError::Invalid("--window must be at least 1".into()));
    }
    let cfg = load_scenario(&args.scenario)?;
    let mode = Mode::from(args.mode);
    let trace = run_trace(&cfg.scenario, cfg.hyperparameters, mode, args.seed, &cfg.id)?;
    let format = match args.format {
        TraceFormatArg::Jsonl => TraceFormat::Jsonl,
        TraceFormatArg::Csv => TraceFormat::Csv,
    };
    let path = emit_trace(&trace, &args.out, format)?;
    write_aligned_csv(
        &aligned_series(&trace, args.window),
        &args.out.join("curve.csv"),
    )?;
    let m = run_metrics(&cfg.scenario, cfg.hyperparameters, mode, args.seed)?;
    println!(
        "{} seed {} ({}): {} experiments -> {}",
        cfg.id,
        args.seed,
        mode.as_str(),
        trace.records.len(),
        path.display()
    );
    println!(
        "final theta {} guess {:?} score {:.6} (optimum {:.6}), recalibrations {}",
        m.final_theta, m.final_guess, m.final_score, m.optimal_score, m.recalibrations
    );
    Ok(())
}

fn write_summary(summary: &BatchSummary, out: &Path, format: SummaryFormat) -> Result<PathBuf> {
    let path = match format {
        SummaryFormat::Csv => out.join(format!("summary_{}.csv", summary.mode)),
        SummaryFormat::Json => out.join(format!("summary_{}.json", summary.mode)),
    };
    match format {
        SummaryFormat::Csv => write_summary_csv(summary, &path)?,
        SummaryFormat::Json => write_summary_json(summary, &path)?,
    }
    Ok(path)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.0}"))
}

fn print_summary(s: &BatchSummary) {
    println!(
        "{} {}: {} seeds, converged {:.2}, detected {:.2}, convergence median {} [{} .. {}], latency max {}",
        s.scenario_id,
        s.mode,
        s.runs.len(),
        s.fraction_converged,
        s.fraction_detected,
        opt(s.convergence_median),
        opt(s.convergence_q25),
        opt(s.convergence_q75),
        s.latency_max.map_or_else(|| "-".into(), |l| l.to_string()),
    );
}

fn cmd_batch(args: BatchArgs) -> Result<()> {
    let cfg = load_scenario(&args.scenario)?;
    let seeds = parse_seeds(&args.seeds)?;
    let summary = run_batch(
        &cfg.scenario,
        cfg.hyperparameters,
        &seeds,
        args.mode.into(),
        &cfg.id,
    )?;
    let path = write_summary(&summary, &args.out, args.format)?;
    print_summary(&summary);
    println!("-> {}", path.display());
    Ok(())
}

fn cmd_compare(args: BatchArgs) -> Result<()> {
    let cfg = load_scenario(&args.scenario)?;
    let seeds = parse_seeds(&args.seeds)?;
    let mut medians = Vec::new();
    for mode in [Mode::Proposed, Mode::Baseline] {
        let summary = run_batch(&cfg.scenario, cfg.hyperparameters, &seeds, mode, &cfg.id)?;
        let path = write_summary(&summary, &args.out, args.format)?;
        print_summary(&summary);
        println!("-> {}", path.display());
        medians.push(summary.censored_convergence_median());
    }
    println!(
        "convergence median, unconverged runs as infinite: proposed {} baseline {} ratio {:.2}",
        medians[0],
        medians[1],
        medians[1] / medians[0]
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let (grid, envs) = match &args.scenario {
        Some(path) => {
            let cfg = load_scenario(path)?;
            let s = &cfg.scenario;
            let envs = (0..=s.changes().len()).map(|id| *s.env(id)).collect();
            (s.grid().clone(), envs)
        }
        None => {
            let grid = DisplacementGrid::uniform(args.grid_min, args.grid_max, args.grid_points)
                .map_err(core_validation("grid"))?;
            let intensity = args.intensity.expect("clap requires --intensity");
            let env = EnvironmentSpec::new(intensity, args.prior_bias, args.gain)
                .map_err(core_validation("environment"))?;
            (grid, vec![env])
        }
    };
    println!("env,intensity,prior_bias,gain,index,theta,guess_n0,guess_n1,score");
    for (id, env) in envs.iter().enumerate() {
        let (index, rule, score) = optimal_configuration(env, &grid);
        println!(
            "{id},{},{},{},{index},{},{},{},{score}",
            env.intensity(),
            env.prior_bias(),
            env.displacement_gain(),
            rule.displacement,
            rule.guess[0],
            rule.guess[1]
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
