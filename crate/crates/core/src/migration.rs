//! Migration between the K and R groups.
//!
//! R members are drawn into extreme-K at a rate set by how the two groups'
//! average weights compare; K members are culled back to R at a fixed rate,
//! weakest first; finally K is re-split by weight into extreme-K and mild-K.
//! Only group labels change.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{cumulative, normalized_weights, sample_categorical, Group, Population};

const INVERSE_WEIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MigrationParams {
    /// Per-member probability of moving from K to R each epoch.
    pub k_to_r_rate: f64,
    /// Ceiling on the computed R-to-K rate.
    pub r_to_k_cap: f64,
    /// Share of K kept in mild-K after rebalancing.
    pub mild_fraction: f64,
}

impl Default for MigrationParams {
    fn default() -> Self {
        MigrationParams {
            k_to_r_rate: 0.1,
            r_to_k_cap: 0.5,
            mild_fraction: 0.5,
        }
    }
}

impl MigrationParams {
    /// No migration at all: the rebalance still runs.
    pub fn disabled() -> Self {
        MigrationParams {
            k_to_r_rate: 0.0,
            r_to_k_cap: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_to_r_rate", self.k_to_r_rate),
            ("r_to_k_cap", self.r_to_k_cap),
            ("mild_fraction", self.mild_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// `clamp((avg_R - avg_K) / max_p, 0, cap)` over normalized weights, where
/// the averages are per-group means of the normalized weights. Zero when
/// either group is empty.
pub fn migration_rate_from_weights(probs: &[f64], groups: &[Group], cap: f64) -> f64 {
    let (mut sum_k, mut n_k, mut sum_r, mut n_r) = (0.0, 0usize, 0.0, 0usize);
    for (&p, g) in probs.iter().zip(groups) {
        if g.is_k() {
            sum_k += p;
            n_k += 1;
        } else {
            sum_r += p;
            n_r += 1;
        }
    }
    if n_k == 0 || n_r == 0 {
        return 0.0;
    }
    let max_p = probs.iter().copied().fold(0.0, f64::max);
    let raw = -(sum_k / n_k as f64 - sum_r / n_r as f64) / max_p;
    raw.clamp(0.0, cap)
}

pub fn migration_rate_r_to_k(pop: &Population, params: &MigrationParams) -> Result<f64> {
    if pop.is_empty() {
        return Ok(0.0);
    }
    let probs = normalized_weights(pop)?;
    let groups: Vec<Group> = pop.particles.iter().map(|p| p.group).collect();
    Ok(migration_rate_from_weights(
        &probs,
        &groups,
        params.r_to_k_cap,
    ))
}

/// Roulette-wheel selection of `count` distinct indices. Each draw is
/// categorical in the linear `weights` of the indices not yet chosen.
pub fn roulette_select<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count > weights.len() {
        return Err(Error::contract(format!(
            "cannot select {count} of {} candidates",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::contract(format!("roulette weight {w} is invalid")));
    }
    let mut pool: Vec<usize> = (0..weights.len()).collect();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let w: Vec<f64> = pool.iter().map(|&i| weights[i]).collect();
        let pick = if w.iter().sum::<f64>() > 0.0 {
            sample_categorical(&cumulative(&w), rng)
        } else {
            rng.gen_range(0..pool.len())
        };
        chosen.push(pool.remove(pick));
    }
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MigrationReport {
    pub rate_r_to_k: f64,
    pub moved_r_to_k: usize,
    pub moved_k_to_r: usize,
}

/// Relabels groups. Genomes, weights and particle order are untouched.
pub fn migrate<R: Rng + ?Sized>(
    pop: &Population,
    params: &MigrationParams,
    rng: &mut R,
) -> Result<(Population, MigrationReport)> {
    let mut out = pop.clone();
    let mut report = MigrationReport::default();
    if pop.is_empty() {
        return Ok((out, report));
    }
    let probs = normalized_weights(pop)?;
    let groups: Vec<Group> = pop.particles.iter().map(|p| p.group).collect();
    let rate = migration_rate_from_weights(&probs, &groups, params.r_to_k_cap);
    report.rate_r_to_k = rate;

    let r_members: Vec<usize> = (0..groups.len()).filter(|&i| !groups[i].is_k()).collect();
    let k_members: Vec<usize> = (0..groups.len()).filter(|&i| groups[i].is_k()).collect();

    // R -> extreme-K, favoring heavy particles
    let n_up = (rate * r_members.len() as f64).floor() as usize;
    if n_up > 0 {
        let w: Vec<f64> = r_members.iter().map(|&i| probs[i]).collect();
        for pick in roulette_select(&w, n_up, rng)? {
            out.particles[r_members[pick]].group = Group::ExtremeK;
        }
        report.moved_r_to_k = n_up;
    }

    // K -> R at a fixed rate, favoring light particles
    if params.k_to_r_rate > 0.0 && !k_members.is_empty() {
        let n_down = (0..k_members.len())
            .filter(|_| rng.gen_bool(params.k_to_r_rate))
            .count();
        if n_down > 0 {
            let max_p = probs.iter().copied().fold(0.0, f64::max);
            let w: Vec<f64> = k_members
                .iter()
                .map(|&i| max_p - probs[i] + INVERSE_WEIGHT_EPS)
                .collect();
            for pick in roulette_select(&w, n_down, rng)? {
                out.particles[k_members[pick]].group = Group::R;
            }
            report.moved_k_to_r = n_down;
        }
    }

    rebalance_k(&mut out, params.mild_fraction);
    Ok((out, report))
}

/// Labels the heaviest `ceil((1 - mild_fraction) * |K|)` K members
/// extreme-K and the rest mild-K. Equal weights keep index order.
pub fn rebalance_k(pop: &mut Population, mild_fraction: f64) {
    let mut k: Vec<usize> = (0..pop.len())
        .filter(|&i| pop.particles[i].group.is_k())
        .collect();
    if k.is_empty() {
        return;
    }
    k.sort_by(|&a, &b| {
        pop.particles[b]
            .log_weight
            .total_cmp(&pop.particles[a].log_weight)
            .then(a.cmp(&b))
    });
    let n_extreme = (((1.0 - mild_fraction) * k.len() as f64) - 1e-9)
        .ceil()
        .max(0.0) as usize;
    for (rank, &i) in k.iter().enumerate() {
        pop.particles[i].group = if rank < n_extreme {
            Group::ExtremeK
        } else {
            Group::MildK
        };
    }
}
