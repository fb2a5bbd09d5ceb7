//! Black-box worst-case resource-usage search.
//!
//! A program's accumulated resource usage (its *tick* total) is read as the
//! log-likelihood of an unnormalized posterior, so the worst-case input is the
//! posterior mode. The search maintains a weighted population of byte-vector
//! genomes and evolves it with an adaptive resample-move sequential Monte
//! Carlo loop whose rejuvenation kernels are genetic operators (uniform
//! crossover, bit-flip mutation) recast as Metropolis-Hastings moves. The
//! population is split into an exploiting K group and an exploring R group
//! that exchange members every epoch.
//!
//! Module map:
//!
//! - [`semantics`]: tick and log-score values and the conversion between them.
//! - [`population`]: particles, weight normalization, ESS, resampling.
//! - [`kernels`]: MH acceptance, mutation and crossover moves, stop criteria.
//! - [`migration`]: group migration between K and R.
//! - [`engine`]: the epoch loop, budgets and telemetry.
//! - [`targets`]: the black-box target trait, built-in subjects and the
//!   subprocess line protocol.
//! - [`experiment`]: baselines, seeded repetitions and CSV/JSON reporting.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod migration;
pub mod population;
pub mod rng;
pub mod semantics;
pub mod targets;

pub use engine::{Engine, EngineConfig, EpochStats, RunOutcome};
pub use error::{Error, Result, TargetError};
pub use kernels::{AcceptRule, KernelParams};
pub use migration::MigrationParams;
pub use population::{Genome, Group, Particle, Population};
pub use semantics::{LogScore, TickValue};
pub use targets::Target;
