//! The epoch loop: reweight, migrate, adaptive resample, group-wise
//! rejuvenation. Runs until an epoch, evaluation or wall-clock budget is
//! spent and reports the best genome ever evaluated.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{rejuvenate_group, KernelParams, RejuvenationReport, Strategy, StreamKey};
use crate::migration::{migrate, MigrationParams};
use crate::population::{ess, resample, reweight, Genome, Group, Particle, Population};
use crate::rng::{self, Phase};
use crate::targets::{Evaluator, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Initial population size.
    #[serde(alias = "L0")]
    pub initial_population: usize,
    /// Population threshold; larger populations are always resampled down.
    #[serde(alias = "L_max")]
    pub max_population: usize,
    /// Resample when `ESS < ceil(ess_min_fraction * L)`.
    pub ess_min_fraction: f64,
    pub kernel: KernelParams,
    pub migration: MigrationParams,
    pub max_epochs: Option<u64>,
    pub max_evaluations: Option<u64>,
    pub max_wall_ms: Option<u64>,
    pub seed: u64,
    /// Probability that an initial particle starts in R.
    pub initial_group_split: f64,
    /// Report measured wall time in stats. Off by default so that
    /// transcripts are byte-reproducible.
    pub record_wall_time: bool,
    /// Answer repeated genomes from a tick cache instead of the target.
    /// Cache hits are not counted as evaluations. Disable for targets
    /// whose ticks are not a function of the genome.
    pub memoize: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            initial_population: 64,
            max_population: 256,
            ess_min_fraction: 0.5,
            kernel: KernelParams::default(),
            migration: MigrationParams::default(),
            max_epochs: Some(100),
            max_evaluations: Some(200_000),
            max_wall_ms: None,
            seed: 0,
            initial_group_split: 0.5,
            record_wall_time: false,
            memoize: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_population == 0 || self.initial_population > self.max_population {
            return Err(Error::Config(format!(
                "need 1 <= initial_population ({}) <= max_population ({})",
                self.initial_population, self.max_population
            )));
        }
        if !(self.ess_min_fraction > 0.0 && self.ess_min_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "ess_min_fraction must be in (0, 1], got {}",
                self.ess_min_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_group_split) {
            return Err(Error::Config(format!(
                "initial_group_split must be in [0, 1], got {}",
                self.initial_group_split
            )));
        }
        if self.max_epochs.is_none() && self.max_evaluations.is_none() && self.max_wall_ms.is_none()
        {
            return Err(Error::Config("at least one budget must be finite".into()));
        }
        if self.max_evaluations == Some(0) {
            return Err(Error::Config("max_evaluations must be positive".into()));
        }
        self.kernel.validate()?;
        self.migration.validate()
    }

    /// `ceil(f * L)`.
    pub fn ess_min(&self, len: usize) -> f64 {
        (self.ess_min_fraction * len as f64 - 1e-9).ceil()
    }
}

/// One telemetry row per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub evaluations: u64,
    pub wall_ms: u64,
    /// Best tick ever evaluated; non-decreasing over a run.
    pub best_tick: f64,
    pub best_genome_hex: String,
    /// ESS of the reweighted population, before any resampling.
    pub ess: f64,
    /// Population size at the end of the epoch.
    pub pop_size: usize,
    pub n_extreme_k: usize,
    pub n_mild_k: usize,
    pub n_r: usize,
    pub resampled: bool,
    pub migration_rate_r_to_k: f64,
    /// Per R sweep: std of the proposal ticks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub r_tick_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: Particle,
    pub stats: Vec<EpochStats>,
    pub evaluations: u64,
    pub population: Population,
}

/// `initial_population` uniformly random genomes with random groups and
/// zero log-weights.
pub fn init_population<R: Rng + ?Sized>(
    cfg: &EngineConfig,
    genome_len: usize,
    rng: &mut R,
) -> Population {
    let particles = (0..cfg.initial_population)
        .map(|_| {
            let genome = Genome::random(genome_len, rng);
            let group = if rng.gen_bool(cfg.initial_group_split) {
                Group::R
            } else if rng.gen_bool(cfg.migration.mild_fraction) {
                Group::MildK
            } else {
                Group::ExtremeK
            };
            Particle::new(genome, group)
        })
        .collect();
    Population::new(particles)
}

pub struct Engine<'t> {
    cfg: EngineConfig,
    target: &'t dyn Target,
}

struct EpochCtx {
    started: Instant,
}

impl<'t> Engine<'t> {
    pub fn new(cfg: EngineConfig, target: &'t dyn Target) -> Result<Self> {
        cfg.validate()?;
        Ok(Engine { cfg, target })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn run(&self) -> Result<RunOutcome> {
        self.run_with(|_| {})
    }

    /// Runs to budget exhaustion, handing each stats row to `observer` as
    /// soon as its epoch finishes.
    pub fn run_with(&self, mut observer: impl FnMut(&EpochStats)) -> Result<RunOutcome> {
        let cfg = &self.cfg;
        let ctx = EpochCtx {
            started: Instant::now(),
        };
        let deadline = cfg
            .max_wall_ms
            .map(|ms| ctx.started + Duration::from_millis(ms));
        let mut ev = Evaluator::with_budget(self.target, cfg.max_evaluations, deadline);
        if cfg.memoize {
            ev = ev.memoized();
        }

        let mut init_rng = rng::stream(cfg.seed, 0, Phase::Init, 0);
        let mut pop = init_population(cfg, self.target.genome_len(), &mut init_rng);
        let mut stats = Vec::new();

        let mut exhausted = absorb_budget(reweight(&mut pop, &mut ev))?;
        let first = self.stats_row(
            &pop,
            &ev,
            &ctx,
            ess(&pop).unwrap_or(0.0),
            false,
            0.0,
            Vec::new(),
        )?;
        observer(&first);
        stats.push(first);

        while !exhausted && !ev.is_exhausted() && cfg.max_epochs.is_none_or(|m| pop.epoch < m) {
            let (next, row, hit) = self.epoch(pop, &mut ev, &ctx)?;
            pop = next;
            exhausted = hit;
            observer(&row);
            stats.push(row);
        }

        let best = match ev.best() {
            Some((g, t)) => Particle::evaluated(g.clone(), t, Group::ExtremeK),
            None => return Err(Error::BudgetExhausted),
        };
        Ok(RunOutcome {
            best,
            stats,
            evaluations: ev.evaluations(),
            population: pop,
        })
    }

    /// One epoch starting from `pop`. The flag reports whether a budget ran
    /// out part-way; the returned population then reflects every move that
    /// completed.
    pub fn run_epoch(
        &self,
        pop: Population,
        ev: &mut Evaluator<'_>,
    ) -> Result<(Population, EpochStats, bool)> {
        let ctx = EpochCtx {
            started: Instant::now(),
        };
        self.epoch(pop, ev, &ctx)
    }

    fn epoch(
        &self,
        mut pop: Population,
        ev: &mut Evaluator<'_>,
        ctx: &EpochCtx,
    ) -> Result<(Population, EpochStats, bool)> {
        let cfg = &self.cfg;
        pop.epoch += 1;
        let t = pop.epoch;

        if absorb_budget(reweight(&mut pop, ev))? {
            let ess_now = ess(&pop).unwrap_or(0.0);
            let row = self.stats_row(&pop, ev, ctx, ess_now, false, 0.0, Vec::new())?;
            return Ok((pop, row, true));
        }

        let (migrated, report) = migrate(
            &pop,
            &cfg.migration,
            &mut rng::stream(cfg.seed, t, Phase::Migrate, 0),
        )?;
        pop = migrated;

        let len = pop.len();
        let ess_now = ess(&pop)?;
        let resampled = len > cfg.max_population || ess_now < cfg.ess_min(len);
        if resampled {
            let target_len = len.min(cfg.max_population);
            pop = resample(
                &pop,
                target_len,
                &mut rng::stream(cfg.seed, t, Phase::Resample, 0),
            )?;
        }

        let (mut k, mut r): (Vec<Particle>, Vec<Particle>) =
            pop.particles.drain(..).partition(|p| p.group.is_k());
        let key = StreamKey {
            seed: cfg.seed,
            epoch: t,
        };
        let mut rejuvenation = RejuvenationReport::default();
        let mut exhausted = false;
        for (group, strategy) in [(&mut k, Strategy::K), (&mut r, Strategy::R)] {
            if exhausted || group.is_empty() {
                continue;
            }
            exhausted = absorb_budget(rejuvenate_group(
                group,
                strategy,
                ev,
                &cfg.kernel,
                key,
                &mut rejuvenation,
            ))?;
        }
        pop.particles = k;
        pop.particles.append(&mut r);
        pop.evaluations = ev.evaluations();

        let row = self.stats_row(
            &pop,
            ev,
            ctx,
            ess_now,
            resampled,
            report.rate_r_to_k,
            rejuvenation.r_tick_std,
        )?;
        log::debug!(
            "epoch {t}: evals {} best {} ess {:.2} size {} resampled {}",
            row.evaluations,
            row.best_tick,
            row.ess,
            row.pop_size,
            row.resampled
        );
        Ok((pop, row, exhausted))
    }

    #[allow(clippy::too_many_arguments)]
    fn stats_row(
        &self,
        pop: &Population,
        ev: &Evaluator<'_>,
        ctx: &EpochCtx,
        ess_now: f64,
        resampled: bool,
        rate: f64,
        r_tick_std: Vec<f64>,
    ) -> Result<EpochStats> {
        let (best_genome_hex, best_tick) = match ev.best() {
            Some((g, t)) => (g.to_hex(), t),
            None => (String::new(), f64::NEG_INFINITY),
        };
        Ok(EpochStats {
            epoch: pop.epoch,
            evaluations: ev.evaluations(),
            wall_ms: if self.cfg.record_wall_time {
                ctx.started.elapsed().as_millis() as u64
            } else {
                0
            },
            best_tick,
            best_genome_hex,
            ess: ess_now,
            pop_size: pop.len(),
            n_extreme_k: pop.count(Group::ExtremeK),
            n_mild_k: pop.count(Group::MildK),
            n_r: pop.count(Group::R),
            resampled,
            migration_rate_r_to_k: rate,
            r_tick_std,
        })
    }
}

/// Turns a budget error into `Ok(true)`; other errors pass through.
fn absorb_budget(result: Result<()>) -> Result<bool> {
    match result {
        Ok(()) => Ok(false),
        Err(Error::BudgetExhausted) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Convenience wrapper: `Engine::new(cfg, target)?.run()`.
pub fn run(cfg: &EngineConfig, target: &dyn Target) -> Result<RunOutcome> {
    Engine::new(cfg.clone(), target)?.run()
}
