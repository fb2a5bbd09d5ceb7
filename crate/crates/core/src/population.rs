//! Particles, populations and the weight arithmetic of the SMC loop.
//!
//! Log-weights are ticks, so every normalization goes through log-sum-exp.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::Evaluator;

/// A candidate input: a fixed-length byte vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<u8>);

impl Genome {
    pub fn zeroed(len: usize) -> Self {
        Genome(vec![0; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0; len];
        rng.fill_bytes(&mut bytes);
        Genome(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_mut_bytes(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit_len(&self) -> usize {
        self.0.len() * 8
    }

    /// Bit `i` counts from the least significant bit of byte `i / 8`.
    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn flip_bit(&mut self, i: usize) {
        self.0[i / 8] ^= 1 << (i % 8);
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        hex::decode(s)
            .map(Genome)
            .map_err(|e| Error::contract(format!("bad genome hex: {e}")))
    }
}

impl From<Vec<u8>> for Genome {
    fn from(bytes: Vec<u8>) -> Self {
        Genome(bytes)
    }
}

impl From<&[u8]> for Genome {
    fn from(bytes: &[u8]) -> Self {
        Genome(bytes.to_vec())
    }
}

impl fmt::Debug for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genome({})", self.to_hex())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    ExtremeK,
    MildK,
    R,
}

impl Group {
    /// Both K subgroups rejuvenate with the K strategy.
    pub fn is_k(self) -> bool {
        matches!(self, Group::ExtremeK | Group::MildK)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub genome: Genome,
    pub log_weight: f64,
    pub group: Group,
    /// Tick of `genome` if it has been evaluated. Targets are pure, so this
    /// survives resampling even though the weight does not.
    pub(crate) tick: Option<f64>,
}

impl Particle {
    pub fn new(genome: Genome, group: Group) -> Self {
        Particle {
            genome,
            log_weight: 0.0,
            group,
            tick: None,
        }
    }

    /// A particle whose tick is known; its log-weight is set to that tick.
    pub fn evaluated(genome: Genome, tick: f64, group: Group) -> Self {
        Particle {
            genome,
            log_weight: tick,
            group,
            tick: Some(tick),
        }
    }

    pub fn tick(&self) -> Option<f64> {
        self.tick
    }

    /// Returns the tick, evaluating the genome only if it is not cached.
    pub fn ensure_tick(&mut self, ev: &mut Evaluator<'_>) -> Result<f64> {
        match self.tick {
            Some(t) => Ok(t),
            None => {
                let t = ev.tick(&self.genome)?;
                self.tick = Some(t);
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Population {
    pub particles: Vec<Particle>,
    pub epoch: u64,
    /// Cumulative target calls charged to this population.
    pub evaluations: u64,
}

impl Population {
    pub fn new(particles: Vec<Particle>) -> Self {
        Population {
            particles,
            epoch: 0,
            evaluations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight).collect()
    }

    pub fn count(&self, group: Group) -> usize {
        self.particles.iter().filter(|p| p.group == group).count()
    }
}

/// Sets every log-weight to the tick of its genome. Ticks already known are
/// reused; the population's evaluation counter grows by the calls made.
/// Progress made before an error is kept.
pub fn reweight(pop: &mut Population, ev: &mut Evaluator<'_>) -> Result<()> {
    let expected = ev.genome_len();
    if let Some(p) = pop.particles.iter().find(|p| p.genome.len() != expected) {
        return Err(Error::contract(format!(
            "genome of {} bytes in a population for a {expected}-byte target",
            p.genome.len()
        )));
    }
    for p in &mut pop.particles {
        let before = ev.evaluations();
        let result = p.ensure_tick(ev);
        pop.evaluations += ev.evaluations() - before;
        p.log_weight = result?;
    }
    Ok(())
}

/// `log(sum(exp(x)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax of log-weights.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    if log_weights.is_empty() {
        return Err(Error::contract("cannot normalize an empty weight vector"));
    }
    if let Some(w) = log_weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::contract(format!("log-weight {w} is not finite")));
    }
    let lse = log_sum_exp(log_weights);
    Ok(log_weights.iter().map(|w| (w - lse).exp()).collect())
}

pub fn normalized_weights(pop: &Population) -> Result<Vec<f64>> {
    normalize_log_weights(&pop.log_weights())
}

/// Effective sample size `1 / sum(p^2)` of normalized weights.
pub fn ess_of_log_weights(log_weights: &[f64]) -> Result<f64> {
    // (sum w)^2 / sum w^2 with w shifted by the max, so equal weights give
    // exactly L
    normalize_log_weights(log_weights)?;
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (sum, sum_sq) = log_weights.iter().fold((0.0, 0.0), |(s, q), &l| {
        let w = (l - max).exp();
        (s + w, q + w * w)
    });
    Ok((sum * sum / sum_sq).clamp(1.0, log_weights.len() as f64))
}

pub fn ess(pop: &Population) -> Result<f64> {
    ess_of_log_weights(&pop.log_weights())
}

/// Draws one index by inverse CDF; `cdf` is a running sum of weights.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let u = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Multinomial resampling to `target_len` particles. Children copy their
/// parent's genome, group and cached tick; all log-weights reset to 0.
pub fn resample<R: Rng + ?Sized>(
    pop: &Population,
    target_len: usize,
    rng: &mut R,
) -> Result<Population> {
    if target_len == 0 {
        return Err(Error::contract("resample target size must be at least 1"));
    }
    let cdf = cumulative(&normalized_weights(pop)?);
    let particles = (0..target_len)
        .map(|_| {
            let parent = &pop.particles[sample_categorical(&cdf, rng)];
            Particle {
                log_weight: 0.0,
                ..parent.clone()
            }
        })
        .collect();
    Ok(Population {
        particles,
        epoch: pop.epoch,
        evaluations: pop.evaluations,
    })
}

/// Index of the heaviest particle; the lowest index wins ties.
pub fn best_index(pop: &Population) -> Result<usize> {
    if pop.is_empty() {
        return Err(Error::contract("best of an empty population"));
    }
    let mut best = 0;
    for (i, p) in pop.particles.iter().enumerate().skip(1) {
        if p.log_weight > pop.particles[best].log_weight {
            best = i;
        }
    }
    Ok(best)
}

pub fn best(pop: &Population) -> Result<&Particle> {
    best_index(pop).map(|i| &pop.particles[i])
}
