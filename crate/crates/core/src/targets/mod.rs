//! Black-box targets.
//!
//! A [`Target`] maps a fixed-length genome to the tick total of one run. The
//! engine only ever sees that number. Built-in subjects live in [`subjects`],
//! the external process protocol in [`subprocess`], and [`Evaluator`] wraps
//! a target with call accounting, budgets and best-ever tracking.

use std::collections::HashMap;
use std::time::Instant;

use crate::error::{Error, Result, TargetError};
use crate::population::Genome;

pub mod subjects;
pub mod subprocess;

pub use subjects::{
    decode_int_array, hash_table_target, insertion_sort_target, list_subjects,
    ordered_pairs_target, popcount_target, quicksort_target, tree_sort_target, FnTarget,
    SubjectSpec,
};
pub use subprocess::{FailurePolicy, SubprocessTarget, SubprocessTargetConfig};

/// A deterministic resource-usage oracle over fixed-length byte genomes.
///
/// Implementations must be pure: the same genome always yields the same
/// tick. Tick caching and the MH acceptance ratios both rely on it.
pub trait Target {
    fn name(&self) -> &str;

    fn genome_len(&self) -> usize;

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError>;
}

impl<T: Target + ?Sized> Target for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn genome_len(&self) -> usize {
        (**self).genome_len()
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        (**self).evaluate(genome)
    }
}

/// Counts target calls, enforces the evaluation and wall-clock budgets and
/// remembers the best genome ever evaluated.
pub struct Evaluator<'t> {
    target: &'t dyn Target,
    evaluations: u64,
    max_evaluations: Option<u64>,
    deadline: Option<Instant>,
    best: Option<(Genome, f64)>,
    memo: Option<HashMap<Genome, f64>>,
    memo_hits: u64,
}

/// Entries kept by a memoizing evaluator; later genomes are evaluated
/// without being stored.
pub const MEMO_CAPACITY: usize = 1 << 20;

impl<'t> Evaluator<'t> {
    pub fn new(target: &'t dyn Target) -> Self {
        Self::with_budget(target, None, None)
    }

    pub fn with_budget(
        target: &'t dyn Target,
        max_evaluations: Option<u64>,
        deadline: Option<Instant>,
    ) -> Self {
        Evaluator {
            target,
            evaluations: 0,
            max_evaluations,
            deadline,
            best: None,
            memo: None,
            memo_hits: 0,
        }
    }

    /// Remembers ticks by genome so repeated genomes cost no target call.
    /// Only sound for deterministic targets.
    pub fn memoized(mut self) -> Self {
        self.memo = Some(HashMap::new());
        self
    }

    /// Lookups answered from the memo instead of the target.
    pub fn memo_hits(&self) -> u64 {
        self.memo_hits
    }

    pub fn target(&self) -> &'t dyn Target {
        self.target
    }

    pub fn genome_len(&self) -> usize {
        self.target.genome_len()
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn is_exhausted(&self) -> bool {
        if let Some(max) = self.max_evaluations {
            if self.evaluations >= max {
                return true;
            }
        }
        if self
            .memo
            .as_ref()
            .is_some_and(|m| self.space_enumerated(m.len()))
        {
            return true;
        }
        matches!(self.deadline, Some(d) if Instant::now() >= d)
    }

    /// True once `seen` distinct genomes cover the whole genome space, at
    /// which point the best tick is the global maximum.
    fn space_enumerated(&self, seen: usize) -> bool {
        let bits = self.target.genome_len() * 8;
        bits < usize::BITS as usize && seen >= 1usize << bits
    }

    /// Best genome seen so far and its tick. Earliest wins on ties.
    pub fn best(&self) -> Option<(&Genome, f64)> {
        self.best.as_ref().map(|(g, t)| (g, *t))
    }

    /// Evaluates `genome`, failing with [`Error::BudgetExhausted`] without
    /// calling the target once a budget is spent (or, when memoizing, once
    /// every genome has been evaluated).
    pub fn tick(&mut self, genome: &Genome) -> Result<f64> {
        if self.is_exhausted() {
            return Err(Error::BudgetExhausted);
        }
        let expected = self.target.genome_len();
        if genome.len() != expected {
            return Err(Error::contract(format!(
                "genome has {} bytes, target `{}` takes {}",
                genome.len(),
                self.target.name(),
                expected
            )));
        }
        if let Some(&tick) = self.memo.as_ref().and_then(|m| m.get(genome)) {
            self.memo_hits += 1;
            return Ok(tick);
        }
        self.evaluations += 1;
        let tick = self.target.evaluate(genome.as_bytes())?;
        if !tick.is_finite() {
            return Err(TargetError::NonFinite(tick).into());
        }
        if let Some(m) = self.memo.as_mut().filter(|m| m.len() < MEMO_CAPACITY) {
            m.insert(genome.clone(), tick);
        }
        if self.best.as_ref().is_none_or(|(_, b)| tick > *b) {
            self.best = Some((genome.clone(), tick));
        }
        Ok(tick)
    }
}
