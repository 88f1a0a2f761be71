//! Differential Evolution (rand/1/bin) over the leader domain.

use rand::Rng;
use rayon::prelude::*;

use crate::belief::{expected_value, BeliefSpec};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, HPolytope, LpResult};
use crate::polytope::rng_from_seed;
use crate::problem::BilevelProblem;
use crate::reaction::{domain_box, domain_contains};

const INIT_TRIES: usize = 200;
const REPAIR_TRIES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct DEConfig {
    pub pop_size: usize,
    pub weight_f: f64,
    pub crossover_cr: f64,
    pub max_generations: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub stall_generations: usize,
    pub stall_tol: f64,
    /// Evaluate every candidate with the same sample seed, so DE minimizes
    /// one fixed sample-average surface instead of independent noisy draws.
    pub common_random_numbers: bool,
    /// Re-evaluate incumbents with fresh seeds every generation. Needs
    /// `common_random_numbers` off.
    pub reevaluate_incumbents: bool,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

impl DEConfig {
    /// Defaults for a leader of dimension `d`.
    pub fn for_dim(d: usize) -> Self {
        DEConfig {
            pop_size: (10 * d).max(20),
            weight_f: 0.8,
            crossover_cr: 0.9,
            max_generations: 200,
            mc_samples: 1_000_000,
            seed: 0,
            stall_generations: 30,
            stall_tol: 1e-6,
            common_random_numbers: true,
            reevaluate_incumbents: false,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.pop_size < 4 {
            return bad(format!("pop_size must be at least 4, got {}", self.pop_size));
        }
        if !(self.weight_f > 0.0 && self.weight_f <= 2.0) {
            return bad(format!("weight_f must lie in (0, 2], got {}", self.weight_f));
        }
        if !(0.0..=1.0).contains(&self.crossover_cr) {
            return bad(format!("crossover_cr must lie in [0, 1], got {}", self.crossover_cr));
        }
        if self.mc_samples < 2 {
            return bad(format!("mc_samples must be at least 2, got {}", self.mc_samples));
        }
        if !(self.stall_tol >= 0.0) {
            return bad(format!("stall_tol must be nonnegative, got {}", self.stall_tol));
        }
        if self.common_random_numbers && self.reevaluate_incumbents {
            return bad("reevaluate_incumbents needs common_random_numbers off".into());
        }
        Ok(())
    }

    /// Sample seed for one evaluation.
    pub fn evaluation_seed(&self, generation: u64, member: u64) -> u64 {
        if self.common_random_numbers {
            fixed_seed_stream(self.seed, 0, 0)
        } else {
            fixed_seed_stream(self.seed, generation, member)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub best_stderr: f64,
    /// Per generation: (best value, mean of finite values). Entry 0 is the
    /// initial population.
    pub history: Vec<(f64, f64)>,
    pub evaluations: usize,
    pub config_echo: DEConfig,
    pub problem_name: String,
}

impl SolveReport {
    /// Number of generations run after initialization.
    pub fn generations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one evaluation: three chained SplitMix64 rounds over
/// `seed`, `generation` and `member`.
pub fn fixed_seed_stream(seed: u64, generation: u64, member: u64) -> u64 {
    let h = splitmix64(seed);
    let h = splitmix64(h ^ generation.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(h ^ member.wrapping_mul(0xA076_1D64_78BD_642F))
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    value: f64,
    stderr: f64,
}

/// Closest point of the domain to `target` in the 1-norm, by one LP over
/// `(x, y, t)` with `|x - target| <= t`.
fn project_to_domain(problem: &BilevelProblem, target: &[f64]) -> Result<Vec<f64>> {
    let joint = problem.lower.joint_polytope()?;
    let (d, p) = (problem.leader_dim(), problem.follower_dim());
    let n = 2 * d + p;
    let mut rows = Vec::new();
    let mut h = Vec::new();
    for (row, rhs) in joint.rows() {
        let mut r = row.to_vec();
        r.resize(n, 0.0);
        rows.push(r);
        h.push(rhs);
    }
    for j in 0..d {
        let mut up = vec![0.0; n];
        up[j] = 1.0;
        up[d + p + j] = -1.0;
        rows.push(up);
        h.push(target[j]);
        let mut down = vec![0.0; n];
        down[j] = -1.0;
        down[d + p + j] = -1.0;
        rows.push(down);
        h.push(-target[j]);
    }
    let mut cost = vec![0.0; n];
    cost[d + p..].iter_mut().for_each(|c| *c = 1.0);
    match solve_lp(&cost, &HPolytope::new(rows, h)?)? {
        LpResult::Optimal { point, .. } => Ok(point[..d].to_vec()),
        _ => Err(Error::EmptyDomain),
    }
}

fn uniform_in_box<R: Rng>(rng: &mut R, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// Minimize the estimated belief value over the leader domain.
pub fn de_minimize(problem: &BilevelProblem, belief: &BeliefSpec, config: &DEConfig) -> Result<SolveReport> {
    config.validate()?;
    let pool = if config.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let run = || minimize(problem, belief, config);
    match pool {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

fn minimize(problem: &BilevelProblem, belief: &BeliefSpec, config: &DEConfig) -> Result<SolveReport> {
    let bounds = domain_box(&problem.lower).map_err(|e| match e {
        Error::EmptyJointPolytope => Error::EmptyDomain,
        other => other,
    })?;
    let d = bounds.len();
    let np = config.pop_size;
    let mut rng = rng_from_seed(fixed_seed_stream(config.seed, u64::MAX, u64::MAX));

    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut centre: Option<Vec<f64>> = None;
    for _ in 0..np {
        let mut found = None;
        for _ in 0..INIT_TRIES {
            let cand = uniform_in_box(&mut rng, &bounds);
            if domain_contains(&problem.lower, &cand)? {
                found = Some(cand);
                break;
            }
        }
        let member = match found {
            Some(x) => x,
            None => {
                if centre.is_none() {
                    let mid: Vec<f64> = bounds.iter().map(|(lo, hi)| (lo + hi) / 2.0).collect();
                    let x = project_to_domain(problem, &mid)?;
                    if !domain_contains(&problem.lower, &x)? {
                        return Err(Error::EmptyDomain);
                    }
                    centre = Some(x);
                }
                centre.clone().unwrap_or_default()
            }
        };
        pop.push(member);
    }

    let evaluate = |generation: u64, offset: u64, xs: &[Vec<f64>]| -> Vec<Scored> {
        xs.par_iter()
            .enumerate()
            .map(|(i, x)| {
                let seed = config.evaluation_seed(generation, offset + i as u64);
                match expected_value(problem, x, belief, config.mc_samples, seed) {
                    Ok(est) if est.mean.is_finite() => Scored {
                        value: est.mean,
                        stderr: est.stderr,
                    },
                    _ => Scored {
                        value: f64::INFINITY,
                        stderr: f64::INFINITY,
                    },
                }
            })
            .collect()
    };

    let mut scores = evaluate(0, 0, &pop);
    let mut evaluations = np;
    let mut history = vec![summary(&scores)];
    let (mut best_i, _) = argmin(&scores);
    let mut best_x = pop[best_i].clone();
    let mut best = scores[best_i];
    let mut stalled = 0usize;

    for generation in 1..=config.max_generations as u64 {
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let [r1, r2, r3] = distinct_three(&mut rng, np, i);
            let forced = rng.random_range(0..d);
            let mut trial = pop[i].clone();
            let mut mutated = Vec::new();
            for j in 0..d {
                if j == forced || rng.random::<f64>() < config.crossover_cr {
                    trial[j] = pop[r1][j] + config.weight_f * (pop[r2][j] - pop[r3][j]);
                    mutated.push(j);
                }
            }
            trials.push(repair(problem, &mut rng, &bounds, trial, &mutated, &pop[i])?);
        }
        let trial_scores = evaluate(generation, 0, &trials);
        evaluations += np;
        if config.reevaluate_incumbents {
            let fresh = evaluate(generation, np as u64, &pop);
            evaluations += np;
            scores = fresh;
        }
        for i in 0..np {
            if trial_scores[i].value < scores[i].value {
                pop[i] = trials[i].clone();
                scores[i] = trial_scores[i];
            }
        }
        let (gen_best, gen_value) = argmin(&scores);
        let previous = best.value;
        if gen_value < best.value {
            best_i = gen_best;
            best = scores[best_i];
            best_x = pop[best_i].clone();
        }
        history.push(summary(&scores));
        if previous - best.value < config.stall_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if stalled >= config.stall_generations {
            break;
        }
    }

    Ok(SolveReport {
        best_x,
        best_value: best.value,
        best_stderr: best.stderr,
        history,
        evaluations,
        config_echo: config.clone(),
        problem_name: problem.name.clone(),
    })
}

fn argmin(scores: &[Scored]) -> (usize, f64) {
    let mut best = (0, scores[0].value);
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.value < best.1 {
            best = (i, s.value);
        }
    }
    best
}

fn summary(scores: &[Scored]) -> (f64, f64) {
    let (_, best) = argmin(scores);
    let finite: Vec<f64> = scores.iter().map(|s| s.value).filter(|v| v.is_finite()).collect();
    let mean = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    (best, mean)
}

fn distinct_three<R: Rng>(rng: &mut R, np: usize, exclude: usize) -> [usize; 3] {
    let mut out = [exclude; 3];
    for k in 0..3 {
        loop {
            let r = rng.random_range(0..np);
            if r != exclude && !out[..k].contains(&r) {
                out[k] = r;
                break;
            }
        }
    }
    out
}

/// Keep a trial inside the domain: resample the mutated coordinates
/// uniformly in the domain box, then fall back to the incumbent.
fn repair<R: Rng>(
    problem: &BilevelProblem,
    rng: &mut R,
    bounds: &[(f64, f64)],
    mut trial: Vec<f64>,
    mutated: &[usize],
    incumbent: &[f64],
) -> Result<Vec<f64>> {
    let inside_box = |t: &[f64]| t.iter().zip(bounds).all(|(v, (lo, hi))| v >= lo && v <= hi);
    if inside_box(&trial) && domain_contains(&problem.lower, &trial)? {
        return Ok(trial);
    }
    for _ in 0..REPAIR_TRIES {
        for &j in mutated {
            let (lo, hi) = bounds[j];
            trial[j] = lo + (hi - lo) * rng.random::<f64>();
        }
        if domain_contains(&problem.lower, &trial)? {
            return Ok(trial);
        }
    }
    Ok(incumbent.to_vec())
}
