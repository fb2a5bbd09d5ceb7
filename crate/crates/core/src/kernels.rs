//! Genetic operators recast as Metropolis-Hastings moves, and the
//! group-specific rejuvenation loops built from them.
//!
//! Both proposals are symmetric. A bit-flip proposal from `g` to `g'` has
//! probability `p^d (1-p)^(bits-d)` with `d` their Hamming distance, and the
//! same mask that produced a crossover child pair maps it back to the
//! parents with the same probability. The proposal terms therefore cancel
//! and acceptance depends on the tick difference alone.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Genome, Particle};
use crate::rng::{self, Phase};
use crate::targets::Evaluator;

/// How a proposed move is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptRule {
    /// Metropolis-Hastings on `e^tick`.
    #[default]
    Metropolis,
    /// Keep a proposal only if it strictly improves the tick (local search).
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    /// Per-bit flip probability; `None` means `1 / (8 * genome_len)`.
    pub p_flip: Option<f64>,
    /// Probability that a crossover mask bit is one.
    pub crossover_rate: f64,
    /// Single-bit neighbors probed by the K stop criterion.
    pub k_neighbors: usize,
    /// Cap on K-strategy mutation iterations per particle.
    pub k_max_iters: usize,
    /// R-strategy mutation sweeps.
    pub r_iters: usize,
    /// The R group may grow to this multiple of its size through crossover.
    pub r_offspring_factor: f64,
    pub accept: AcceptRule,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            p_flip: None,
            crossover_rate: 0.5,
            k_neighbors: 8,
            k_max_iters: 64,
            r_iters: 12,
            r_offspring_factor: 2.0,
            accept: AcceptRule::Metropolis,
        }
    }
}

impl KernelParams {
    pub fn p_flip_for(&self, genome_len: usize) -> f64 {
        self.p_flip
            .unwrap_or_else(|| 1.0 / (8.0 * genome_len.max(1) as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.p_flip {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("p_flip must be in (0, 1), got {p}")));
            }
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config(format!(
                "crossover_rate must be in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        if self.k_neighbors == 0 || self.k_max_iters == 0 || self.r_iters == 0 {
            return Err(Error::Config(
                "k_neighbors, k_max_iters and r_iters must be at least 1".into(),
            ));
        }
        if self.r_offspring_factor.is_nan() || self.r_offspring_factor < 1.0 {
            return Err(Error::Config(format!(
                "r_offspring_factor must be >= 1, got {}",
                self.r_offspring_factor
            )));
        }
        Ok(())
    }
}

/// Metropolis-Hastings acceptance in log space. Uphill and level moves are
/// accepted without touching `rng`; otherwise exactly one uniform is drawn.
pub fn mh_accept<R: Rng + ?Sized>(
    log_new: f64,
    log_old: f64,
    log_q_fwd: f64,
    log_q_bwd: f64,
    rng: &mut R,
) -> bool {
    let log_ratio = log_new - log_old + log_q_bwd - log_q_fwd;
    if log_ratio >= 0.0 {
        return true;
    }
    rng.gen::<f64>() < log_ratio.exp()
}

fn accept<R: Rng + ?Sized>(rule: AcceptRule, log_new: f64, log_old: f64, rng: &mut R) -> bool {
    match rule {
        AcceptRule::Metropolis => mh_accept(log_new, log_old, 0.0, 0.0, rng),
        AcceptRule::Greedy => log_new > log_old,
    }
}

/// Flips every bit of `g` independently with probability `p_flip`.
pub fn mutate_proposal<R: Rng + ?Sized>(g: &Genome, p_flip: f64, rng: &mut R) -> Genome {
    let mut out = g.clone();
    for i in 0..out.bit_len() {
        if rng.gen_bool(p_flip) {
            out.flip_bit(i);
        }
    }
    out
}

fn known_tick(p: &Particle, ev: &mut Evaluator<'_>) -> Result<f64> {
    match p.tick() {
        Some(t) => Ok(t),
        None => ev.tick(&p.genome),
    }
}

/// Outcome of one mutation move.
#[derive(Debug, Clone)]
pub struct MutationStep {
    pub particle: Particle,
    pub proposal_tick: f64,
    pub accepted: bool,
}

/// One mutation move with full bookkeeping. A proposal identical to the
/// current genome reuses its tick instead of calling the target.
pub fn mutation_step<R: Rng + ?Sized>(
    p: &Particle,
    ev: &mut Evaluator<'_>,
    params: &KernelParams,
    rng: &mut R,
) -> Result<MutationStep> {
    let old = known_tick(p, ev)?;
    let proposal = mutate_proposal(&p.genome, params.p_flip_for(p.genome.len()), rng);
    let new = if proposal == p.genome {
        old
    } else {
        ev.tick(&proposal)?
    };
    if accept(params.accept, new, old, rng) {
        Ok(MutationStep {
            particle: Particle::evaluated(proposal, new, p.group),
            proposal_tick: new,
            accepted: true,
        })
    } else {
        let mut kept = p.clone();
        kept.tick = Some(old);
        Ok(MutationStep {
            particle: kept,
            proposal_tick: new,
            accepted: false,
        })
    }
}

/// MH mutation move: propose by bit flips, accept on the tick difference.
pub fn mh_mutate<R: Rng + ?Sized>(
    p: &Particle,
    ev: &mut Evaluator<'_>,
    params: &KernelParams,
    rng: &mut R,
) -> Result<Particle> {
    mutation_step(p, ev, params, rng).map(|s| s.particle)
}

/// Uniform crossover. Mask bit `i` is one with probability `crossover_rate`;
/// where it is one the first child takes bit `i` from `g2` and the second
/// from `g1`. Returns the mask (same layout as the genomes).
pub fn uniform_crossover_proposal<R: Rng + ?Sized>(
    g1: &Genome,
    g2: &Genome,
    crossover_rate: f64,
    rng: &mut R,
) -> Result<(Genome, Genome, Vec<u8>)> {
    if g1.len() != g2.len() {
        return Err(Error::contract(format!(
            "crossover parents differ in length ({} vs {})",
            g1.len(),
            g2.len()
        )));
    }
    let mut mask = vec![0u8; g1.len()];
    for byte in mask.iter_mut() {
        for bit in 0..8 {
            if rng.gen_bool(crossover_rate) {
                *byte |= 1 << bit;
            }
        }
    }
    let (c1, c2) = apply_mask(g1, g2, &mask);
    Ok((c1, c2, mask))
}

/// Applies a crossover mask. Applying the same mask to the children
/// restores the parents.
pub fn apply_mask(g1: &Genome, g2: &Genome, mask: &[u8]) -> (Genome, Genome) {
    let (a, b) = (g1.as_bytes(), g2.as_bytes());
    let c1 = a
        .iter()
        .zip(b)
        .zip(mask)
        .map(|((x, y), m)| (x & !m) | (y & m))
        .collect::<Vec<_>>();
    let c2 = a
        .iter()
        .zip(b)
        .zip(mask)
        .map(|((x, y), m)| (y & !m) | (x & m))
        .collect::<Vec<_>>();
    (Genome::from(c1), Genome::from(c2))
}

/// Outcome of one pair move.
#[derive(Debug, Clone)]
pub struct PairMove {
    pub first: Particle,
    pub second: Particle,
    pub accepted: bool,
    /// Whether the accepted children differ from the parents as a pair.
    pub changed: bool,
}

/// MH crossover move on a pair. The pair is accepted or rejected jointly on
/// `(t_new1 + t_new2) - (t_old1 + t_old2)`. Children equal to a parent reuse
/// that parent's tick.
pub fn mh_crossover<R: Rng + ?Sized>(
    p1: &Particle,
    p2: &Particle,
    ev: &mut Evaluator<'_>,
    params: &KernelParams,
    rng: &mut R,
) -> Result<PairMove> {
    let t1 = known_tick(p1, ev)?;
    let t2 = known_tick(p2, ev)?;
    let (c1, c2, _mask) =
        uniform_crossover_proposal(&p1.genome, &p2.genome, params.crossover_rate, rng)?;
    let tick_of = |c: &Genome, ev: &mut Evaluator<'_>| -> Result<f64> {
        if *c == p1.genome {
            Ok(t1)
        } else if *c == p2.genome {
            Ok(t2)
        } else {
            ev.tick(c)
        }
    };
    let n1 = tick_of(&c1, ev)?;
    let n2 = tick_of(&c2, ev)?;
    let changed = !(c1 == p1.genome && c2 == p2.genome || c1 == p2.genome && c2 == p1.genome);
    if accept(params.accept, n1 + n2, t1 + t2, rng) {
        Ok(PairMove {
            first: Particle::evaluated(c1, n1, p1.group),
            second: Particle::evaluated(c2, n2, p2.group),
            accepted: true,
            changed,
        })
    } else {
        let mut a = p1.clone();
        let mut b = p2.clone();
        a.tick = Some(t1);
        b.tick = Some(t2);
        Ok(PairMove {
            first: a,
            second: b,
            accepted: false,
            changed: false,
        })
    }
}

/// K criterion: stop once the candidate is at least as good as every probed
/// neighbor.
pub fn k_stop(candidate_tick: f64, neighbor_ticks: &[f64]) -> Result<bool> {
    if neighbor_ticks.is_empty() {
        return Err(Error::contract("k_stop needs at least one neighbor tick"));
    }
    Ok(neighbor_ticks.iter().all(|&t| candidate_tick >= t))
}

/// R criterion: a fixed budget of mutation sweeps.
pub fn r_stop(iteration: usize, params: &KernelParams) -> bool {
    iteration >= params.r_iters
}

/// Evaluates up to `k` distinct single-bit-flip neighbors of `g`, chosen
/// uniformly without replacement.
pub fn sample_neighbor_ticks<R: Rng + ?Sized>(
    g: &Genome,
    k: usize,
    ev: &mut Evaluator<'_>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let bits = g.bit_len();
    let picks = index::sample(rng, bits, k.min(bits));
    let mut ticks = Vec::with_capacity(picks.len());
    for bit in picks.iter() {
        let mut n = g.clone();
        n.flip_bit(bit);
        ticks.push(ev.tick(&n)?);
    }
    Ok(ticks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    K,
    R,
}

/// Seed and epoch that key the per-particle random streams.
#[derive(Debug, Clone, Copy)]
pub struct StreamKey {
    pub seed: u64,
    pub epoch: u64,
}

impl StreamKey {
    fn get(&self, phase: Phase, index: usize) -> rng::Rng {
        rng::stream(self.seed, self.epoch, phase, index as u64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejuvenationReport {
    pub crossovers: usize,
    pub crossovers_accepted: usize,
    pub mutations: usize,
    pub mutations_accepted: usize,
    /// R strategy: standard deviation of the proposal ticks of each sweep.
    pub r_tick_std: Vec<f64>,
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Rejuvenates one group in place: one crossover pass over a random
/// pairing, then mutation until the strategy's stop criterion holds.
///
/// K keeps its size: crossover replaces parents, and each particle mutates
/// until [`k_stop`] or `k_max_iters`. R keeps parents and appends accepted
/// child pairs (up to `r_offspring_factor` times the input size; beyond that
/// accepted children replace their parents), then runs `r_iters` sweeps.
///
/// If the budget runs out, `particles` holds the state after the last
/// completed move and the error is returned.
pub fn rejuvenate_group(
    particles: &mut Vec<Particle>,
    strategy: Strategy,
    ev: &mut Evaluator<'_>,
    params: &KernelParams,
    key: StreamKey,
    report: &mut RejuvenationReport,
) -> Result<()> {
    let (pair_phase, cross_phase, mutate_phase) = match strategy {
        Strategy::K => (Phase::PairK, Phase::CrossoverK, Phase::MutateK),
        Strategy::R => (Phase::PairR, Phase::CrossoverR, Phase::MutateR),
    };
    let n0 = particles.len();
    let mut order: Vec<usize> = (0..n0).collect();
    order.shuffle(&mut key.get(pair_phase, 0));
    let growth_cap = ((params.r_offspring_factor * n0 as f64).ceil() as usize).max(n0);

    for (j, pair) in order.chunks_exact(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let mut rng = key.get(cross_phase, j);
        let m = mh_crossover(&particles[a], &particles[b], ev, params, &mut rng)?;
        report.crossovers += 1;
        if m.accepted {
            report.crossovers_accepted += 1;
        }
        match strategy {
            Strategy::R if m.accepted && m.changed && particles.len() + 2 <= growth_cap => {
                particles.push(m.first);
                particles.push(m.second);
            }
            _ => {
                particles[a] = m.first;
                particles[b] = m.second;
            }
        }
    }

    match strategy {
        Strategy::K => {
            for (i, particle) in particles.iter_mut().enumerate() {
                let mut rng = key.get(mutate_phase, i);
                for _ in 0..params.k_max_iters {
                    let current = known_tick(particle, ev)?;
                    particle.tick = Some(current);
                    let neighbors =
                        sample_neighbor_ticks(&particle.genome, params.k_neighbors, ev, &mut rng)?;
                    if k_stop(current, &neighbors)? {
                        break;
                    }
                    let step = mutation_step(particle, ev, params, &mut rng)?;
                    report.mutations += 1;
                    report.mutations_accepted += usize::from(step.accepted);
                    *particle = step.particle;
                }
            }
        }
        Strategy::R => {
            let mut rngs: Vec<_> = (0..particles.len())
                .map(|i| key.get(mutate_phase, i))
                .collect();
            let mut sweep = 0;
            while !r_stop(sweep, params) {
                let mut proposal_ticks = Vec::with_capacity(particles.len());
                for (i, rng) in rngs.iter_mut().enumerate() {
                    let step = mutation_step(&particles[i], ev, params, rng)?;
                    report.mutations += 1;
                    report.mutations_accepted += usize::from(step.accepted);
                    proposal_ticks.push(step.proposal_tick);
                    particles[i] = step.particle;
                }
                let sd = std_dev(&proposal_ticks);
                log::trace!("R sweep {sweep}: proposal tick std {sd:.4}");
                report.r_tick_std.push(sd);
                sweep += 1;
            }
        }
    }
    Ok(())
}
