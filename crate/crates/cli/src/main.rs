use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dpsubmod::audit::{audit_bandit_delta, estimate_epsilon, AuditFile};
use dpsubmod::experiment::{run_experiment, slope_from_csv, ExperimentConfig, RunOptions};
use dpsubmod::submodular::{check_bounds, check_monotone, check_submodular, FunctionStream};
use dpsubmod::Error;

#[derive(Parser)]
#[command(name = "dpsubmod", version, about = "Private online submodular maximization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config at its horizon(s).
    Run(RunArgs),
    /// Run a horizon grid and fit the log-log regret slope.
    Sweep(RunArgs),
    /// Estimate the privacy loss between two neighboring streams.
    Audit(AuditArgs),
    /// Check every round of a stream file for submodularity, monotonicity
    /// and range.
    CheckStream { path: PathBuf },
    /// Fit the log-log slope of mean regret against T from a results CSV.
    Slope { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_PRECONDITION })
        }
    }
}

fn dispatch(command: Command) -> dpsubmod::Result<()> {
    match command {
        Command::Run(args) => run(args, false),
        Command::Sweep(args) => run(args, true),
        Command::Audit(args) => audit(args),
        Command::CheckStream { path } => check_stream(&path),
        Command::Slope { path } => {
            let fit = slope_from_csv(&path)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(())
        }
    }
}

fn run(args: RunArgs, sweep: bool) -> dpsubmod::Result<()> {
    let config = ExperimentConfig::load(&args.config)?;
    if sweep && config.horizons.is_none() {
        return Err(Error::Config {
            path: "horizons".into(),
            message: "sweep needs a horizon grid".into(),
        });
    }
    if args.out.is_none() && config.output_dir.is_none() {
        return Err(Error::Config {
            path: "output_dir".into(),
            message: "set output_dir in the config or pass --out".into(),
        });
    }
    let options = RunOptions {
        workers: args.workers,
        seed_base: args.seed_base,
        out: args.out,
    };
    let result = run_experiment(&config, &options)?;
    eprintln!("{} runs written", result.rows.len());
    if let Some(fit) = &result.slope {
        println!("{}", serde_json::to_string_pretty(fit)?);
    } else if sweep {
        eprintln!("no slope fit (needs four horizons with positive mean regret)");
    }
    Ok(())
}

fn audit(args: AuditArgs) -> dpsubmod::Result<()> {
    let file = AuditFile::load(&args.config)?;
    let mut config = file.to_config()?;
    config.seed_base = config.seed_base.wrapping_add(args.seed_base);
    let run = || -> dpsubmod::Result<serde_json::Value> {
        Ok(if file.bandit_delta {
            serde_json::to_value(audit_bandit_delta(&config)?)?
        } else {
            serde_json::to_value(estimate_epsilon(&config)?)?
        })
    };
    let report = match args.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("audit.json"), &text)?;
    }
    println!("{text}");
    Ok(())
}

fn check_stream(path: &Path) -> dpsubmod::Result<()> {
    let stream = FunctionStream::read_json(BufReader::new(File::open(path)?))?;
    let ground = stream.ground();
    let mut failures = Vec::new();
    for (i, f) in stream.rounds().iter().enumerate() {
        let checks = [
            ("submodular", check_submodular(f, ground)?),
            ("monotone", check_monotone(f, ground)?),
            ("bounds", check_bounds(f, ground)?),
        ];
        for (name, outcome) in checks {
            if let (false, Some(w)) = (outcome.holds, outcome.witness) {
                failures.push(json!({
                    "t": i + 1,
                    "check": name,
                    "a": ground.names(&w.a),
                    "b": ground.names(&w.b),
                    "x": w.x.map(|x| ground.name(x).to_string()),
                }));
            }
        }
    }
    let ok = failures.is_empty();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "rounds": stream.horizon(),
            "n": ground.len(),
            "ok": ok,
            "failures": failures,
        }))?
    );
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{} property check(s) failed", failures.len())))
    }
}
