//! Experiment runner: the three search algorithms behind one interface,
//! seeded repetitions, and CSV/JSON reporting.
//!
//! Every algorithm spends the same currency (target calls), so the curves
//! of a run are comparable on the evaluations axis.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig, EpochStats};
use crate::error::{Error, Result};
use crate::kernels::AcceptRule;
use crate::population::Genome;
use crate::rng::{self, Phase};
use crate::targets::{Evaluator, SubjectSpec, SubprocessTarget, SubprocessTargetConfig, Target};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Dual-strategy evolutionary SMC.
    DseSmc,
    /// Same loop with greedy keep-best rejuvenation.
    LocalOpt,
    /// Uniformly random genomes.
    Random,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::DseSmc => "dse-smc",
            Algorithm::LocalOpt => "local-opt",
            Algorithm::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Subject {
    Builtin(SubjectSpec),
    Subprocess {
        config: SubprocessTargetConfig,
        genome_len: usize,
    },
}

impl Subject {
    pub fn build(&self) -> Result<Box<dyn Target + Send + Sync>> {
        match self {
            Subject::Builtin(spec) => spec.build(),
            Subject::Subprocess { config, genome_len } => Ok(Box::new(SubprocessTarget::new(
                config.clone(),
                *genome_len,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub subject: Subject,
    pub algorithm: Algorithm,
    pub config: EngineConfig,
    pub repetitions: usize,
    pub output: PathBuf,
}

/// Result of one search run, whichever algorithm produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_genome: Genome,
    pub best_tick: f64,
    pub evaluations: u64,
    pub stats: Vec<EpochStats>,
}

pub fn run_dse_smc(cfg: &EngineConfig, target: &dyn Target) -> Result<SearchResult> {
    let out = Engine::new(cfg.clone(), target)?.run()?;
    Ok(SearchResult {
        best_tick: out.best.tick().expect("best particle is evaluated"),
        best_genome: out.best.genome,
        evaluations: out.evaluations,
        stats: out.stats,
    })
}

/// The engine loop with every MH acceptance replaced by strict improvement.
pub fn run_local_opt(cfg: &EngineConfig, target: &dyn Target) -> Result<SearchResult> {
    let mut cfg = cfg.clone();
    cfg.kernel.accept = AcceptRule::Greedy;
    run_dse_smc(&cfg, target)
}

/// Mean evaluations per epoch of a short engine run with the same
/// configuration, used as the random baseline's reporting block.
pub fn epoch_equivalent_block(cfg: &EngineConfig, target: &dyn Target) -> Result<u64> {
    let mut dry = cfg.clone();
    dry.max_epochs = Some(cfg.max_epochs.unwrap_or(5).clamp(1, 5));
    let out = Engine::new(dry, target)?.run()?;
    let epochs = out.stats.last().map_or(0, |s| s.epoch).max(1);
    Ok((out.evaluations / epochs).max(1))
}

/// Uniform random search until the evaluation, wall-clock or block budget
/// (`max_epochs` blocks) is spent. One stats row per `block` evaluations;
/// draws answered from the memo are free.
pub fn run_random_baseline(
    cfg: &EngineConfig,
    target: &dyn Target,
    block: u64,
) -> Result<SearchResult> {
    cfg.validate()?;
    if block == 0 {
        return Err(Error::Config(
            "random baseline block size must be positive".into(),
        ));
    }
    let started = Instant::now();
    let deadline = cfg
        .max_wall_ms
        .map(|ms| started + Duration::from_millis(ms));
    let mut ev = Evaluator::with_budget(target, cfg.max_evaluations, deadline);
    if cfg.memoize {
        ev = ev.memoized();
    }
    let mut rng = rng::stream(cfg.seed, 0, Phase::Baseline, 0);
    let mut stats = Vec::new();
    let mut epoch = 0u64;
    let row = |epoch: u64, ev: &Evaluator<'_>| {
        let (g, t) = ev.best().expect("at least one evaluation");
        EpochStats {
            epoch,
            evaluations: ev.evaluations(),
            wall_ms: if cfg.record_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            best_tick: t,
            best_genome_hex: g.to_hex(),
            ess: f64::NAN,
            pop_size: block as usize,
            n_extreme_k: 0,
            n_mild_k: 0,
            n_r: 0,
            resampled: false,
            migration_rate_r_to_k: f64::NAN,
            r_tick_std: Vec::new(),
        }
    };
    let mut reported = 0;
    while cfg.max_epochs.is_none_or(|m| epoch < m) {
        let genome = Genome::random(target.genome_len(), &mut rng);
        let exhausted = match ev.tick(&genome) {
            Ok(_) => false,
            Err(Error::BudgetExhausted) => true,
            Err(e) => return Err(e),
        };
        let done = ev.evaluations() - reported;
        if done >= block || (exhausted && done > 0) {
            epoch += 1;
            reported = ev.evaluations();
            stats.push(row(epoch, &ev));
        }
        if exhausted {
            break;
        }
    }
    let (g, t) = ev.best().ok_or(Error::BudgetExhausted)?;
    Ok(SearchResult {
        best_genome: g.clone(),
        best_tick: t,
        evaluations: ev.evaluations(),
        stats,
    })
}

/// CSV row layout; column order is part of the output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub epoch: u64,
    pub evaluations: u64,
    pub wall_ms: u64,
    pub best_tick: f64,
    pub ess: f64,
    pub pop_size: usize,
    pub n_extreme_k: usize,
    pub n_mild_k: usize,
    pub n_r: usize,
    pub resampled: bool,
    pub migration_rate_r_to_k: f64,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "epoch",
    "evaluations",
    "wall_ms",
    "best_tick",
    "ess",
    "pop_size",
    "n_extreme_k",
    "n_mild_k",
    "n_r",
    "resampled",
    "migration_rate_r_to_k",
];

impl From<&EpochStats> for CsvRow {
    fn from(s: &EpochStats) -> Self {
        CsvRow {
            epoch: s.epoch,
            evaluations: s.evaluations,
            wall_ms: s.wall_ms,
            best_tick: s.best_tick,
            ess: s.ess,
            pop_size: s.pop_size,
            n_extreme_k: s.n_extreme_k,
            n_mild_k: s.n_mild_k,
            n_r: s.n_r,
            resampled: s.resampled,
            migration_rate_r_to_k: s.migration_rate_r_to_k,
        }
    }
}

pub fn write_stats_csv<W: Write>(writer: W, stats: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in stats {
        w.serialize(CsvRow::from(s))?;
    }
    if stats.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stats_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub seed: u64,
    pub best_tick: f64,
    pub best_genome_hex: String,
    pub evaluations: u64,
    pub epochs: u64,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSummary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub algorithm: Algorithm,
    pub subject: Subject,
    pub target: String,
    pub config: EngineConfig,
    /// Mean evaluations per epoch used for the random baseline rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_block: Option<u64>,
    pub runs: Vec<RunRecord>,
    pub best_tick: TickSummary,
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Runs one algorithm on a target with the given configuration.
pub fn run_algorithm(
    algorithm: Algorithm,
    cfg: &EngineConfig,
    target: &dyn Target,
    random_block: Option<u64>,
) -> Result<SearchResult> {
    match algorithm {
        Algorithm::DseSmc => run_dse_smc(cfg, target),
        Algorithm::LocalOpt => run_local_opt(cfg, target),
        Algorithm::Random => {
            let block = match random_block {
                Some(b) => b,
                None => epoch_equivalent_block(cfg, target)?,
            };
            run_random_baseline(cfg, target, block)
        }
    }
}

/// Seeded repetitions with per-run CSVs and a `summary.json`. Repetition
/// `r` uses seed `config.seed + r`.
pub fn run_experiment(spec: &RunSpec) -> Result<Summary> {
    if spec.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    spec.config.validate()?;
    fs::create_dir_all(&spec.output)?;

    let probe = spec.subject.build()?;
    let target_name = probe.name().to_string();
    let random_block = match spec.algorithm {
        Algorithm::Random => Some(epoch_equivalent_block(&spec.config, probe.as_ref())?),
        _ => None,
    };
    drop(probe);

    let mut runs = Vec::with_capacity(spec.repetitions);
    for r in 0..spec.repetitions {
        let mut cfg = spec.config.clone();
        cfg.seed = spec.config.seed.wrapping_add(r as u64);
        let target = spec.subject.build()?;
        let result = run_algorithm(spec.algorithm, &cfg, target.as_ref(), random_block)?;
        let csv_name = format!("run_{r:03}.csv");
        write_stats_csv(File::create(spec.output.join(&csv_name))?, &result.stats)?;
        log::info!(
            "run {r} (seed {}): best tick {} after {} evaluations",
            cfg.seed,
            result.best_tick,
            result.evaluations
        );
        runs.push(RunRecord {
            repetition: r,
            seed: cfg.seed,
            best_tick: result.best_tick,
            best_genome_hex: result.best_genome.to_hex(),
            evaluations: result.evaluations,
            epochs: result.stats.last().map_or(0, |s| s.epoch),
            csv: csv_name,
        });
    }

    let ticks: Vec<f64> = runs.iter().map(|r| r.best_tick).collect();
    let summary = Summary {
        tool: "dse-smc".into(),
        version: VERSION.into(),
        algorithm: spec.algorithm,
        subject: spec.subject.clone(),
        target: target_name,
        config: spec.config.clone(),
        random_block,
        best_tick: TickSummary {
            median: median(&ticks),
            min: ticks.iter().copied().fold(f64::INFINITY, f64::min),
            max: ticks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        runs,
    };
    let mut f = File::create(spec.output.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    Ok(summary)
}

/// Reads an engine configuration file. Missing keys take their defaults;
/// unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<EngineConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<EngineConfig> {
    let cfg: EngineConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
