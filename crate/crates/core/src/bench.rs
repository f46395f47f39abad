//! Monte Carlo benchmarking: sample worlds from a belief, run competing
//! replanning strategies over them, and collect success/length statistics,
//! plus product-size and planning-time scaling sweeps.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::executor::{check_word, run_episode, Outcome, ReplanMode, RunConfig};
use crate::model::{grid_world, Belief, Environment, LabeledMdp};
use crate::planner::{self, PlannerConfig};
use crate::product::ProductAutomaton;
use crate::scltl::{Alphabet, Formula, Letter, ObsId, TotalDfa};

/// Fixed ingredients of a benchmark: the map, prior, task and sensing range.
#[derive(Debug, Clone, Copy)]
pub struct BenchSetup<'a> {
    pub mdp: &'a LabeledMdp,
    pub belief: &'a Belief,
    pub dfa: &'a TotalDfa,
    pub start: usize,
    /// Observations that must exist somewhere for the task to be satisfiable,
    /// with the candidate states a repair may place them in.
    pub required: &'a [(ObsId, Vec<usize>)],
    pub h: u32,
}

/// States whose prior puts positive mass on some letter containing `obs`.
pub fn candidates_from_belief(belief: &Belief, obs: ObsId) -> Vec<usize> {
    (0..belief.n_states())
        .filter(|&x| {
            belief
                .support(x)
                .iter()
                .any(|&(l, p)| l.contains(obs) && p > 0.0)
        })
        .collect()
}

/// Samples one true map from the belief: each state independently draws a
/// letter from its prior. Afterwards, any required observation with no
/// realized instance is forced into a uniformly chosen candidate state, so
/// reach-style tasks stay satisfiable.
pub fn map_generate(
    belief: &Belief,
    required: &[(ObsId, Vec<usize>)],
    h: u32,
    seed: u64,
) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Vec::with_capacity(belief.n_states());
    for x in 0..belief.n_states() {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let support = belief.support(x);
        let mut picked = support.last().map_or(Letter::EMPTY, |&(l, _)| l);
        for &(l, p) in support {
            acc += p;
            if u < acc {
                picked = l;
                break;
            }
        }
        truth.push(picked);
    }
    for (obs, candidates) in required {
        if candidates.is_empty() {
            continue;
        }
        if !truth.iter().any(|l| l.contains(*obs)) {
            let pick = candidates[rng.gen_range(0..candidates.len())];
            truth[pick] = truth[pick].with(*obs);
        }
    }
    Environment::new(truth, h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldOutcome {
    Accepted,
    StepCapExceeded,
    Infeasible,
    Error(String),
}

/// One strategy's result on one sampled world. Everything here is
/// deterministic for a fixed seed except `plan_secs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldResult {
    pub world: usize,
    pub seed: u64,
    pub strategy: ReplanMode,
    pub outcome: WorldOutcome,
    /// Number of actions taken (also defined for failed episodes).
    pub length: usize,
    pub replans: usize,
    /// Value-iteration sweeps summed over all replans.
    pub sweeps: usize,
    /// Wall-clock planning time summed over all replans.
    pub plan_secs: f64,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyStats {
    pub strategy: ReplanMode,
    pub worlds: usize,
    pub successes: usize,
    pub step_cap_failures: usize,
    pub infeasible_failures: usize,
    pub errors: usize,
    /// Statistics over accepted trajectory lengths, absent without successes.
    pub mean_length: Option<f64>,
    pub median_length: Option<f64>,
    pub sd_length: Option<f64>,
    pub total_replans: usize,
    pub total_sweeps: usize,
    /// Wall-clock planning time across all episodes (not deterministic).
    pub plan_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub worlds: usize,
    pub seed: u64,
    pub step_cap: usize,
    pub per_strategy: Vec<StrategyStats>,
    pub world_results: Vec<WorldResult>,
}

impl BenchReport {
    /// Zeroes the wall-clock fields; everything left is a pure function of
    /// the scenario and seed.
    pub fn scrub_timings(&mut self) {
        for s in &mut self.per_strategy {
            s.plan_secs = 0.0;
        }
        for r in &mut self.world_results {
            r.plan_secs = 0.0;
        }
    }
}

fn mixed_seed(master: u64, world: usize) -> u64 {
    // SplitMix64 step so consecutive world indices decorrelate.
    let mut z = master.wrapping_add((world as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Default episode cap: four times the product size.
pub fn default_step_cap(mdp: &LabeledMdp, dfa: &TotalDfa) -> usize {
    4 * mdp.n_states() * dfa.state_count()
}

/// Runs every strategy over `worlds` sampled maps and aggregates statistics.
/// Per-episode failures (including hard errors) are counted, never raised.
pub fn run_benchmark(
    setup: &BenchSetup,
    planner_cfg: &PlannerConfig,
    worlds: usize,
    seed: u64,
    strategies: &[ReplanMode],
    step_cap: Option<usize>,
) -> BenchReport {
    let cap = step_cap.unwrap_or_else(|| default_step_cap(setup.mdp, setup.dfa));
    let mut world_results: Vec<WorldResult> = (0..worlds)
        .into_par_iter()
        .flat_map_iter(|w| {
            let world_seed = mixed_seed(seed, w);
            let env = map_generate(setup.belief, setup.required, setup.h, world_seed);
            strategies.iter().map(move |&strategy| {
                let rc = RunConfig {
                    step_cap: cap,
                    replan: strategy,
                };
                match run_episode(
                    setup.mdp,
                    setup.belief,
                    &env,
                    setup.dfa,
                    planner_cfg,
                    &rc,
                    setup.start,
                ) {
                    Ok(trace) => {
                        let outcome = match trace.outcome {
                            // Success is certified by DFA replay, not by the
                            // executor's own flag.
                            Outcome::Accepted if check_word(&trace, setup.dfa) => {
                                WorldOutcome::Accepted
                            }
                            Outcome::Accepted => {
                                WorldOutcome::Error("accepted flag failed word replay".into())
                            }
                            Outcome::StepCapExceeded => WorldOutcome::StepCapExceeded,
                            Outcome::Infeasible => WorldOutcome::Infeasible,
                        };
                        WorldResult {
                            world: w,
                            seed: world_seed,
                            strategy,
                            outcome,
                            length: trace.len(),
                            replans: trace.replans.len(),
                            sweeps: trace.replans.iter().map(|r| r.sweeps).sum(),
                            plan_secs: trace
                                .replans
                                .iter()
                                .map(|r| r.duration.as_secs_f64())
                                .sum(),
                            actions: trace.actions,
                        }
                    }
                    Err(e) => WorldResult {
                        world: w,
                        seed: world_seed,
                        strategy,
                        outcome: WorldOutcome::Error(e.to_string()),
                        length: 0,
                        replans: 0,
                        sweeps: 0,
                        plan_secs: 0.0,
                        actions: Vec::new(),
                    },
                }
            })
        })
        .collect();
    world_results.sort_by_key(|r| (r.world, strategy_rank(r.strategy, strategies)));

    let per_strategy = strategies
        .iter()
        .map(|&strategy| {
            let rs: Vec<&WorldResult> = world_results
                .iter()
                .filter(|r| r.strategy == strategy)
                .collect();
            let accepted: Vec<f64> = rs
                .iter()
                .filter(|r| r.outcome == WorldOutcome::Accepted)
                .map(|r| r.length as f64)
                .collect();
            StrategyStats {
                strategy,
                worlds,
                successes: accepted.len(),
                step_cap_failures: rs
                    .iter()
                    .filter(|r| r.outcome == WorldOutcome::StepCapExceeded)
                    .count(),
                infeasible_failures: rs
                    .iter()
                    .filter(|r| r.outcome == WorldOutcome::Infeasible)
                    .count(),
                errors: rs
                    .iter()
                    .filter(|r| matches!(r.outcome, WorldOutcome::Error(_)))
                    .count(),
                mean_length: mean(&accepted),
                median_length: median(&accepted),
                sd_length: std_dev(&accepted),
                total_replans: rs.iter().map(|r| r.replans).sum(),
                total_sweeps: rs.iter().map(|r| r.sweeps).sum(),
                plan_secs: rs.iter().map(|r| r.plan_secs).sum(),
            }
        })
        .collect();

    BenchReport {
        worlds,
        seed,
        step_cap: cap,
        per_strategy,
        world_results,
    }
}

fn strategy_rank(s: ReplanMode, order: &[ReplanMode]) -> usize {
    order.iter().position(|&o| o == s).unwrap_or(usize::MAX)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    Some(var.sqrt())
}

/// One row of the scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub width: u32,
    pub height: u32,
    pub uncertain_fraction: f64,
    pub mdp_states: usize,
    pub mdp_transitions: usize,
    pub dfa_states: usize,
    pub product_states: usize,
    pub product_edges: usize,
    pub build_secs: f64,
    pub plan_secs: f64,
    pub sweeps: usize,
}

/// Prior used for scaling runs on the states declared uncertain: the empty
/// letter keeps mass 0.3 and the rest is spread uniformly over the nonempty
/// letters (0.1 each at three observations).
pub fn uncertain_prior(n_obs: usize) -> Vec<(Letter, f64)> {
    let nonempty = (1 << n_obs) - 1;
    let each = 0.7 / nonempty as f64;
    let mut row = vec![(Letter::EMPTY, 0.3)];
    row.extend(Letter::all(n_obs).skip(1).map(|l| (l, each)));
    row
}

/// Belief over an open grid where the first `fraction` of states carry the
/// uncertain prior and the rest are pinned to the empty letter.
pub fn uncertain_belief(n_states: usize, n_obs: usize, fraction: f64) -> Belief {
    let k = ((n_states as f64) * fraction).ceil() as usize;
    let rows = (0..n_states)
        .map(|x| {
            if x < k {
                uncertain_prior(n_obs)
            } else {
                vec![(Letter::EMPTY, 1.0)]
            }
        })
        .collect();
    Belief::new(n_obs, rows).expect("uncertain prior normalizes")
}

fn median_duration(mut xs: Vec<Duration>) -> f64 {
    xs.sort();
    xs[xs.len() / 2].as_secs_f64()
}

/// Builds the product and times construction plus one cold planning pass for
/// every grid size and uncertainty fraction. Timings are medians of three
/// repetitions; sizes are exact.
pub fn scaling_table(
    sizes: &[(u32, u32)],
    alphabet: &Alphabet,
    formula: &Formula,
    fractions: &[f64],
    planner_cfg: &PlannerConfig,
) -> Vec<ScalingRow> {
    let dfa = TotalDfa::compile(alphabet, formula).expect("scaling formula compiles");
    let mut rows = Vec::new();
    for &(w, h) in sizes {
        let (_, mdp) = grid_world(w, h, &BTreeSet::new()).expect("open grid");
        for &fraction in fractions {
            let belief = uncertain_belief(mdp.n_states(), alphabet.len(), fraction);

            let mut build_times = Vec::new();
            let mut product = None;
            for _ in 0..3 {
                let t0 = Instant::now();
                let p = ProductAutomaton::build(&mdp, &belief, &dfa);
                build_times.push(t0.elapsed());
                product = Some(p);
            }
            let product = product.unwrap();

            let mut plan_times = Vec::new();
            let mut sweeps = 0;
            for _ in 0..3 {
                let t0 = Instant::now();
                let plan = planner::value_iteration(&product, planner_cfg)
                    .expect("scaling plan converges");
                plan_times.push(t0.elapsed());
                sweeps = plan.sweeps;
            }

            rows.push(ScalingRow {
                width: w,
                height: h,
                uncertain_fraction: fraction,
                mdp_states: mdp.n_states(),
                mdp_transitions: mdp.transition_count(),
                dfa_states: dfa.state_count(),
                product_states: product.state_count(),
                product_edges: product.edge_count(),
                build_secs: median_duration(build_times),
                plan_secs: median_duration(plan_times),
                sweeps,
            });
        }
    }
    rows
}
