//! Acceptance criteria, one line of output per criterion.
//!
//! Runs without the libtest harness so that every verdict is printed even
//! when all criteria pass. Exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use dse_smc::experiment::{self, run_algorithm, Algorithm, RunSpec, Subject};
use dse_smc::kernels::{mh_crossover, mutation_step};
use dse_smc::population::{ess_of_log_weights, resample};
use dse_smc::semantics::score_of_tick;
use dse_smc::targets::{
    hash_table_target, insertion_sort_target, ordered_pairs_target, popcount_target, Evaluator,
    FnTarget, SubjectSpec,
};
use dse_smc::{EngineConfig, Genome, Group, KernelParams, Particle, Population, Target};

type Flow = HashMap<((u8, u8), (u8, u8)), f64>;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Insertion sort tick count written independently of the library: one per
/// outer iteration, one per shifted element.
fn oracle_insertion_ticks(a: &[i64]) -> u64 {
    let n = a.len() as u64;
    let mut inversions = 0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if a[i] > a[j] {
                inversions += 1;
            }
        }
    }
    n.saturating_sub(1) + inversions
}

/// All arrays of length `n` over `0..k`, in lexicographic order.
fn all_arrays(n: usize, k: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..k).map(move |v| {
                    let mut b = a.clone();
                    b.push(v);
                    b
                })
            })
            .collect();
    }
    out
}

fn bytes_of(a: &[i64]) -> Vec<u8> {
    a.iter().map(|&v| v as u8).collect()
}

fn argmax_set(xs: &[f64]) -> Vec<usize> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..xs.len()).filter(|&i| xs[i] == max).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let target = insertion_sort_target(4, 0, 3).unwrap();
    let inputs = all_arrays(4, 4);
    let ticks: Vec<f64> = inputs
        .iter()
        .map(|a| target.evaluate(&bytes_of(a)).unwrap())
        .collect();
    let scores: Vec<f64> = ticks
        .iter()
        .map(|&t| score_of_tick(t).unwrap().get())
        .collect();
    let oracle: Vec<u64> = inputs.iter().map(|a| oracle_insertion_ticks(a)).collect();
    let oracle_max = *oracle.iter().max().unwrap() as f64;
    let tick_max = ticks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let same_argmax = argmax_set(&ticks) == argmax_set(&scores);
    let elapsed = start.elapsed();
    verdict(
        inputs.len() == 256 && same_argmax && tick_max == oracle_max && within(elapsed, 1),
        format!(
            "{} inputs, argmax sets equal: {same_argmax}, max tick {tick_max} vs oracle {oracle_max}, {elapsed:?}",
            inputs.len()
        ),
    )
}

fn criterion_2() -> Verdict {
    let target = insertion_sort_target(5, 0, 255).unwrap();
    let t = target.evaluate(&[5, 4, 3, 2, 1]).unwrap();
    verdict(t == 14.0, format!("evaluate([5,4,3,2,1]) = {t}"))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=64);
        let lw: Vec<f64> = (0..len).map(|_| rng.gen_range(-30.0..30.0)).collect();
        // direct formula on explicitly normalized weights
        let z: f64 = lw.iter().map(|w| w.exp()).sum();
        let p: Vec<f64> = lw.iter().map(|w| w.exp() / z).collect();
        let direct = 1.0 / p.iter().map(|x| x * x).sum::<f64>();
        let got = ess_of_log_weights(&lw).unwrap();
        worst = worst.max(((got - direct) / direct).abs());
    }
    let uniform_exact = (1..=64).all(|l| ess_of_log_weights(&vec![1.25; l]).unwrap() == l as f64);
    let mut dominant = vec![0.0; 32];
    dominant[7] = 5000.0;
    let dom = ess_of_log_weights(&dominant).unwrap();
    verdict(
        worst < 1e-10 && uniform_exact && (dom - 1.0).abs() < 1e-9,
        format!(
            "max relative error {worst:.2e}, uniform exact: {uniform_exact}, dominant ESS {dom}"
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let probs = [0.5, 0.3, 0.2];
    let pop = Population::new(
        probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut q = Particle::new(Genome::from(vec![i as u8]), Group::R);
                q.log_weight = f64::ln(p);
                q
            })
            .collect(),
    );
    let n = 100_000;
    let out = resample(&pop, n, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let mut counts = [0f64; 3];
    for p in &out.particles {
        counts[p.genome.as_bytes()[0] as usize] += 1.0;
    }
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&o, p)| {
            let e = p * n as f64;
            (o - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(stat);
    let elapsed = start.elapsed();
    verdict(
        p_value > 0.001 && within(elapsed, 5),
        format!("counts {counts:?}, chi2 {stat:.3}, p = {p_value:.4}, {elapsed:?}"),
    )
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let target = popcount_target(1);
    let mut ev = Evaluator::new(&target);
    let params = KernelParams {
        p_flip: Some(1.0 / 8.0),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = Particle::new(Genome::zeroed(1), Group::R);
    p.ensure_tick(&mut ev).unwrap();
    let steps = 1_000_000;
    let mut hist = [0f64; 9];
    for _ in 0..steps {
        p = mutation_step(&p, &mut ev, &params, &mut rng)
            .unwrap()
            .particle;
        hist[p.genome.as_bytes()[0].count_ones() as usize] += 1.0;
    }
    let exact: Vec<f64> = (0..=8).map(|k| binomial(8, k) * (k as f64).exp()).collect();
    let z: f64 = exact.iter().sum();
    let tv = 0.5
        * (0..=8)
            .map(|k| (hist[k] / steps as f64 - exact[k] / z).abs())
            .sum::<f64>();
    let elapsed = start.elapsed();
    verdict(
        tv < 0.02 && within(elapsed, 30),
        format!("TV distance {tv:.5} after {steps} steps, {elapsed:?}"),
    )
}

/// Largest |F(s, s') - F(s', s)| over state pairs, where F is the empirical
/// joint law of (s, s') with s drawn from the pair target and s' one
/// crossover move from s.
fn crossover_flow_residual(target: &dyn Target, draws: usize, seed: u64) -> f64 {
    let tick = |g: u8| target.evaluate(&[g]).unwrap();
    // pair target over 4-bit genomes: P(g1, g2) ∝ exp(tick(g1) + tick(g2))
    let states: Vec<(u8, u8)> = (0..16).flat_map(|a| (0..16).map(move |b| (a, b))).collect();
    let w: Vec<f64> = states
        .iter()
        .map(|&(a, b)| (tick(a) + tick(b)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    let mut cdf = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for x in &w {
        acc += x / z;
        cdf.push(acc);
    }
    let params = KernelParams::default();
    let mut ev = Evaluator::new(target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flow = Flow::new();
    for _ in 0..draws {
        let u: f64 = rng.gen();
        let (a, b) = states[cdf.partition_point(|&c| c <= u).min(states.len() - 1)];
        let p1 = Particle::evaluated(Genome::from(vec![a]), tick(a), Group::R);
        let p2 = Particle::evaluated(Genome::from(vec![b]), tick(b), Group::R);
        let m = mh_crossover(&p1, &p2, &mut ev, &params, &mut rng).unwrap();
        let next = (m.first.genome.as_bytes()[0], m.second.genome.as_bytes()[0]);
        *flow.entry(((a, b), next)).or_default() += 1.0 / draws as f64;
    }
    flow.iter()
        .map(|(&(s, t), &f)| (f - flow.get(&(t, s)).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let popcount = FnTarget::new("popcount4", 1, |g| f64::from(g[0].count_ones()));
    let r_pop = crossover_flow_residual(&popcount, 1_000_000, 6);
    // a tick that crossover does not conserve, so rejections occur
    let skewed = FnTarget::new("weighted4", 1, |g| {
        (0..4)
            .map(|i| f64::from(g[0] >> i & 1) * (0.4 + 0.3 * i as f64))
            .sum()
    });
    let r_skew = crossover_flow_residual(&skewed, 1_000_000, 7);
    let elapsed = start.elapsed();
    verdict(
        r_pop < 0.01 && r_skew < 0.01 && within(elapsed, 60),
        format!(
            "max residual {r_pop:.2e} (popcount), {r_skew:.2e} (non-conserved tick), {elapsed:?}"
        ),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let target = insertion_sort_target(5, 0, 4).unwrap();
    let brute = all_arrays(5, 5)
        .iter()
        .map(|a| oracle_insertion_ticks(a))
        .max()
        .unwrap() as f64;
    let mut hits = 0;
    for seed in 0..20 {
        let cfg = EngineConfig {
            seed,
            max_evaluations: Some(2_000),
            ..Default::default()
        };
        let out = run_algorithm(Algorithm::DseSmc, &cfg, &target, None).unwrap();
        if out.best_tick == brute {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        brute == 14.0 && hits >= 18 && within(elapsed, 30),
        format!("reached brute-force max {brute} in {hits}/20 seeds, {elapsed:?}"),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let target = insertion_sort_target(16, 0, 255).unwrap();
    let descending: Vec<u8> = (0..16).rev().collect();
    let witness = target.evaluate(&descending).unwrap();
    let analytic = 15.0 + 120.0;
    let bests: Vec<f64> = (0..10)
        .map(|seed| {
            let cfg = EngineConfig {
                seed,
                max_evaluations: Some(200_000),
                ..Default::default()
            };
            run_algorithm(Algorithm::DseSmc, &cfg, &target, None)
                .unwrap()
                .best_tick
        })
        .collect();
    let med = median(bests.clone());
    let elapsed = start.elapsed();
    verdict(
        witness == analytic && med >= 0.9 * analytic && within(elapsed, 300),
        format!(
            "median best {med} (threshold {}), bests {bests:?}, {elapsed:?}",
            0.9 * analytic
        ),
    )
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let subjects: Vec<(&str, Box<dyn Target>)> = vec![
        ("hash-table 8x4", Box::new(hash_table_target(8, 4).unwrap())),
        (
            "ordered-pairs n=16",
            Box::new(ordered_pairs_target(16, 0, 255).unwrap()),
        ),
    ];
    let mut dominance_ok = true;
    let mut median_ok_somewhere = false;
    let mut detail = Vec::new();
    for (name, target) in &subjects {
        let base = EngineConfig {
            max_evaluations: Some(50_000),
            ..Default::default()
        };
        let block = experiment::epoch_equivalent_block(&base, target.as_ref()).unwrap();
        let mut smc = Vec::new();
        let mut random = Vec::new();
        let mut local = Vec::new();
        for seed in 0..10 {
            let cfg = EngineConfig {
                seed,
                ..base.clone()
            };
            smc.push(
                run_algorithm(Algorithm::DseSmc, &cfg, target.as_ref(), None)
                    .unwrap()
                    .best_tick,
            );
            random.push(
                run_algorithm(Algorithm::Random, &cfg, target.as_ref(), Some(block))
                    .unwrap()
                    .best_tick,
            );
            local.push(
                run_algorithm(Algorithm::LocalOpt, &cfg, target.as_ref(), None)
                    .unwrap()
                    .best_tick,
            );
        }
        let wins = smc.iter().zip(&random).filter(|(s, r)| s >= r).count();
        dominance_ok &= wins >= 8;
        let (ms, ml) = (median(smc), median(local));
        median_ok_somewhere |= ms >= ml;
        detail.push(format!(
            "{name}: beats random {wins}/10, median {ms} vs local-opt {ml} (random median {})",
            median(random)
        ));
    }
    let elapsed = start.elapsed();
    verdict(
        dominance_ok && median_ok_somewhere && within(elapsed, 600),
        format!("{}; {elapsed:?}", detail.join("; ")),
    )
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut files = 0;
    for algorithm in [Algorithm::DseSmc, Algorithm::LocalOpt, Algorithm::Random] {
        let spec = |out: &str| RunSpec {
            subject: Subject::Builtin(SubjectSpec::new("ordered-pairs", 8)),
            algorithm,
            config: EngineConfig {
                seed: 10,
                max_evaluations: Some(20_000),
                ..Default::default()
            },
            repetitions: 2,
            output: dir.path().join(format!("{}-{out}", algorithm.as_str())),
        };
        let (a, b) = (spec("a"), spec("b"));
        experiment::run_experiment(&a).unwrap();
        experiment::run_experiment(&b).unwrap();
        for r in 0..2 {
            let name = format!("run_{r:03}.csv");
            let x = fs::read(a.output.join(&name)).unwrap();
            let y = fs::read(b.output.join(&name)).unwrap();
            identical &= x == y && !x.is_empty();
            files += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        identical && within(elapsed, 60),
        format!("{files} CSV pairs byte-identical: {identical}, {elapsed:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("isomorphism argmax equivalence", criterion_1),
        ("insertion-sort point value", criterion_2),
        ("ESS correctness", criterion_3),
        ("resampling unbiasedness", criterion_4),
        ("MH stationarity", criterion_5),
        ("crossover detailed balance", criterion_6),
        ("end-to-end convergence", criterion_7),
        ("scaled worst-case search", criterion_8),
        ("baseline dominance", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {}",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
