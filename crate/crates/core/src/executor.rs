//! Online mission execution: sense, decide whether new information warrants a
//! replan, update beliefs and product edges, act, and track the DFA run until
//! the consumed word becomes a good prefix.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Belief, Environment, LabeledMdp, ModelError};
use crate::planner::{self, Plan, PlanError, PlannerConfig};
use crate::product::ProductAutomaton;
use crate::scltl::{Letter, TotalDfa};

/// Replans fire when the information norm is strictly positive beyond this
/// float tolerance.
pub const TRIGGER_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanMode {
    /// Replan when the sensed neighborhood contradicts the prior belief.
    Trigger,
    /// Replan after every action.
    EveryStep,
    /// Plan once from the initial belief and never adapt (baseline).
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub step_cap: usize,
    pub replan: ReplanMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            step_cap: 10_000,
            replan: ReplanMode::Trigger,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("start state {0} out of range")]
    BadStart(usize),
    #[error("environment covers {truth} states but the model has {states}")]
    TruthSizeMismatch { truth: usize, states: usize },
    #[error("policy undefined at product state {state}")]
    PolicyUndefined { state: usize },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Discrepancy table between a prior belief and one batch of observations:
/// one row per sensed state, one column per letter. The entry is the absolute
/// difference between the observed indicator of that letter and its prior
/// probability, so the matrix is all-zero exactly when the prior already
/// pinned every sensed truth.
#[derive(Debug, Clone)]
pub struct InformationMatrix {
    rows: Vec<InfoRow>,
}

#[derive(Debug, Clone)]
struct InfoRow {
    state: usize,
    truth: Letter,
    prior: Vec<(Letter, f64)>,
}

impl InformationMatrix {
    pub fn new(prior: &Belief, observations: &[(usize, Letter)]) -> InformationMatrix {
        InformationMatrix {
            rows: observations
                .iter()
                .map(|&(state, truth)| InfoRow {
                    state,
                    truth,
                    prior: prior.support(state).to_vec(),
                })
                .collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn state(&self, row: usize) -> usize {
        self.rows[row].state
    }

    pub fn entry(&self, row: usize, letter: Letter) -> f64 {
        let r = &self.rows[row];
        let prior = r
            .prior
            .iter()
            .find(|(l, _)| *l == letter)
            .map_or(0.0, |&(_, p)| p);
        let indicator = if r.truth == letter { 1.0 } else { 0.0 };
        (indicator - prior).abs()
    }

    /// Row sum over all letters. The prior mass not on the truth is counted
    /// twice (once missing from the truth column, once as surplus), which is
    /// what the sparse form below computes.
    pub fn row_sum(&self, row: usize) -> f64 {
        let r = &self.rows[row];
        let truth_mass: f64 = r
            .prior
            .iter()
            .find(|(l, _)| *l == r.truth)
            .map_or(0.0, |&(_, p)| p);
        let off_mass: f64 = r
            .prior
            .iter()
            .filter(|(l, _)| *l != r.truth)
            .map(|&(_, p)| p)
            .sum();
        (1.0 - truth_mass) + off_mass
    }

    /// Infinity norm: the largest row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows.len())
            .map(|r| self.row_sum(r))
            .fold(0.0, f64::max)
    }
}

/// Infinity norm of the information matrix for one sensing batch against the
/// belief held before the batch is applied.
pub fn information_norm(prior: &Belief, observations: &[(usize, Letter)]) -> f64 {
    InformationMatrix::new(prior, observations).inf_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    StepCapExceeded,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct ReplanRecord {
    /// Step index at which the replan happened (0 is the initial plan).
    pub t: usize,
    pub sweeps: usize,
    pub residual: f64,
    pub duration: Duration,
}

/// Everything observable about one episode.
///
/// `states`, `letters` and `dfa_states` cover the whole realized trajectory:
/// `letters[i]` is the true label of `states[i]`, `dfa_states[0]` is the DFA
/// initial state and `dfa_states[i + 1]` is the state after consuming
/// `letters[i]`. `actions[i]` moves `states[i]` to `states[i + 1]`.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub outcome: Outcome,
    pub actions: Vec<usize>,
    pub states: Vec<usize>,
    pub letters: Vec<Letter>,
    pub dfa_states: Vec<usize>,
    pub replans: Vec<ReplanRecord>,
    /// Size of the uncertain set after each step's sensing, indexed by step.
    pub uncertain_sizes: Vec<usize>,
    /// Total trajectory cost, `beta` per action taken.
    pub cost: f64,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// True iff some visited product state had a trash DFA component.
    pub fn visited_trash(&self, dfa: &TotalDfa) -> bool {
        self.dfa_states.iter().any(|&s| dfa.is_trash(s))
    }
}

/// Replays the realized word through the automaton from scratch; the
/// episode-level success oracle, independent of the loop's bookkeeping.
pub fn check_word(trace: &EpisodeTrace, dfa: &TotalDfa) -> bool {
    dfa.accepts(trace.letters.iter().copied())
}

/// Runs one episode from `x0`.
///
/// Per step: sense the `h`-ball, compute the information norm against the
/// prior belief, fold the observations into the belief, and if the norm was
/// positive (or this is the first step, or the mode says always) refresh the
/// product edges to the updated belief and replan, warm-starting from the
/// previous value table. Then execute the policy, advance the DFA on the true
/// label of the new state, and shrink the uncertain set. Stops on acceptance,
/// on the step cap, or as infeasible when no satisfying policy can exist from
/// the current product state.
pub fn run_episode(
    mdp: &LabeledMdp,
    initial_belief: &Belief,
    env: &Environment,
    dfa: &TotalDfa,
    planner_cfg: &PlannerConfig,
    run_cfg: &RunConfig,
    x0: usize,
) -> Result<EpisodeTrace, ExecError> {
    if x0 >= mdp.n_states() {
        return Err(ExecError::BadStart(x0));
    }
    if env.truths().len() != mdp.n_states() {
        return Err(ExecError::TruthSizeMismatch {
            truth: env.truths().len(),
            states: mdp.n_states(),
        });
    }

    let mut belief = initial_belief.clone();
    let mut product = ProductAutomaton::build(mdp, &belief, dfa);

    // The word includes the initial state's label, so the DFA consumes it
    // before the first action.
    let l0 = env.truth(x0);
    let mut x = x0;
    let mut s = dfa.step(dfa.initial(), l0);

    let mut trace = EpisodeTrace {
        outcome: Outcome::StepCapExceeded,
        actions: Vec::new(),
        states: vec![x0],
        letters: vec![l0],
        dfa_states: vec![dfa.initial(), s],
        replans: Vec::new(),
        uncertain_sizes: Vec::new(),
        cost: 0.0,
    };

    let mut plan: Option<Plan> = None;
    // Belief rows updated since the product was last refreshed. Changes can
    // outlive a step when the norm sits under the trigger tolerance.
    let mut pending_changes: Vec<usize> = Vec::new();
    let mut t = 0usize;
    loop {
        if dfa.is_accepting(s) {
            trace.outcome = Outcome::Accepted;
            break;
        }
        if t >= run_cfg.step_cap {
            trace.outcome = Outcome::StepCapExceeded;
            break;
        }

        let observations = env.sense(mdp, x);
        let norm = information_norm(&belief, &observations);
        pending_changes.extend(belief.update_map(&observations)?);
        // The uncertain set is exactly the complement of the revealed set.
        trace
            .uncertain_sizes
            .push(mdp.n_states() - belief.revealed_count());

        let replan_now = match run_cfg.replan {
            ReplanMode::Never => t == 0,
            ReplanMode::EveryStep => true,
            ReplanMode::Trigger => t == 0 || norm > TRIGGER_EPS,
        };
        if replan_now {
            if !pending_changes.is_empty() {
                pending_changes.sort_unstable();
                pending_changes.dedup();
                product.refresh_edges(mdp, &belief, dfa, &pending_changes);
                pending_changes.clear();
            }
            debug_assert_eq!(product.belief_version(), belief.version());
            let started = Instant::now();
            let new_plan = match &plan {
                Some(prev) => planner::value_iteration_warm(&product, planner_cfg, &prev.values)?,
                None => planner::value_iteration(&product, planner_cfg)?,
            };
            trace.replans.push(ReplanRecord {
                t,
                sweeps: new_plan.sweeps,
                residual: new_plan.residual,
                duration: started.elapsed(),
            });
            plan = Some(new_plan);

            let sp = product.state_id(x, s);
            if product.is_trash(sp) || !product.feasibility_check(sp) {
                trace.outcome = Outcome::Infeasible;
                break;
            }
        }

        let sp = product.state_id(x, s);
        let policy = &plan.as_ref().expect("planned at t = 0").policy;
        let a = policy
            .action(sp)
            .ok_or(ExecError::PolicyUndefined { state: sp })?;
        let x_next = mdp
            .successor(x, a)
            .ok_or(ExecError::PolicyUndefined { state: sp })?;

        trace.actions.push(a);
        x = x_next;
        let l = env.truth(x);
        s = dfa.step(s, l);
        trace.states.push(x);
        trace.letters.push(l);
        trace.dfa_states.push(s);
        t += 1;
    }

    trace.cost = trace.actions.len() as f64 * planner_cfg.beta;
    Ok(trace)
}
