//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dse_smc::experiment::{self, Algorithm, RunSpec, Subject};
use dse_smc::targets::{list_subjects, FailurePolicy, SubjectSpec, SubprocessTargetConfig};
use dse_smc::EngineConfig;

#[derive(Parser)]
#[command(
    name = "dse-smc",
    version,
    about = "Worst-case resource-usage input search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search one subject for inputs that maximize its tick count.
    Run(Box<RunArgs>),
    /// Print the built-in subjects.
    ListSubjects,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in subject name, or `subprocess` to drive an external program
    /// given after `--`.
    #[arg(long)]
    subject: String,
    /// Array length, key count or byte count, depending on the subject.
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long)]
    lo: Option<i64>,
    #[arg(long)]
    hi: Option<i64>,
    /// Key length in bytes (hash-table).
    #[arg(long)]
    key_len: Option<usize>,

    #[arg(long, value_enum, default_value_t = Algorithm::DseSmc)]
    algorithm: Algorithm,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long)]
    max_epochs: Option<u64>,
    #[arg(long)]
    max_evaluations: Option<u64>,
    #[arg(long)]
    max_wall_ms: Option<u64>,
    /// Record real elapsed time in the CSVs (makes them nondeterministic).
    #[arg(long)]
    record_wall_time: bool,
    /// JSON engine configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for run CSVs and summary.json.
    #[arg(long)]
    out: PathBuf,

    /// Genome length in bytes for a subprocess subject.
    #[arg(long)]
    genome_len: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Tick recorded when the subprocess fails twice; without it the run aborts.
    #[arg(long, allow_hyphen_values = true)]
    penalty: Option<f64>,
    /// Subprocess program and arguments.
    #[arg(last = true)]
    command: Vec<String>,
}

fn build_spec(a: RunArgs) -> dse_smc::Result<RunSpec> {
    let mut config = match &a.config {
        Some(path) => experiment::load_config(path)?,
        None => EngineConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if a.max_epochs.is_some() {
        config.max_epochs = a.max_epochs;
    }
    if a.max_evaluations.is_some() {
        config.max_evaluations = a.max_evaluations;
    }
    if a.max_wall_ms.is_some() {
        config.max_wall_ms = a.max_wall_ms;
    }
    if a.record_wall_time {
        config.record_wall_time = true;
    }
    config.validate()?;

    let subject = if a.subject == "subprocess" {
        if a.command.is_empty() {
            return Err(dse_smc::Error::Config(
                "subprocess subject needs a command after `--`".into(),
            ));
        }
        let genome_len = a.genome_len.ok_or_else(|| {
            dse_smc::Error::Config("subprocess subject needs --genome-len".into())
        })?;
        let mut cfg = SubprocessTargetConfig::new(a.command);
        cfg.timeout_ms = a.timeout_ms;
        if let Some(v) = a.penalty {
            cfg.failure_policy = FailurePolicy::Penalty(v);
        }
        Subject::Subprocess {
            config: cfg,
            genome_len,
        }
    } else {
        let mut spec = SubjectSpec::new(&a.subject, a.size);
        if let Some(lo) = a.lo {
            spec.lo = lo;
        }
        if let Some(hi) = a.hi {
            spec.hi = hi;
        }
        if let Some(k) = a.key_len {
            spec.key_len = k;
        }
        Subject::Builtin(spec)
    };

    Ok(RunSpec {
        subject,
        algorithm: a.algorithm,
        config,
        repetitions: a.repetitions,
        output: a.out,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListSubjects => {
            for (name, about) in list_subjects() {
                println!("{name:<16}{about}");
            }
            Ok(())
        }
        Command::Run(args) => build_spec(*args).and_then(|spec| {
            let summary = experiment::run_experiment(&spec)?;
            println!(
                "{} on {}: best tick median {} (min {}, max {}) over {} run(s); output in {}",
                summary.algorithm.as_str(),
                summary.target,
                summary.best_tick.median,
                summary.best_tick.min,
                summary.best_tick.max,
                summary.runs.len(),
                spec.output.display()
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dse-smc: error: {e}");
            ExitCode::FAILURE
        }
    }
}
