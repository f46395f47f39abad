//! Discounted value iteration over the product automaton, with policy
//! extraction, the satisfiability threshold test, and an exact
//! policy-evaluation oracle backed by a dense linear solve.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::product::ProductAutomaton;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Discount factor, in `[0, 1)`.
    pub gamma: f64,
    /// Uniform per-transition cost, strictly positive.
    pub beta: f64,
    /// Convergence threshold on the max-norm sweep residual.
    pub epsilon: f64,
    pub max_sweeps: usize,
    /// Use synchronous (Jacobi) parallel sweeps instead of in-place ones.
    /// Either mode is deterministic for a fixed flag value.
    pub parallel: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            gamma: 0.99,
            beta: 1.0,
            epsilon: 0.01,
            max_sweeps: 100_000,
            parallel: false,
        }
    }
}

impl PlannerConfig {
    /// Return of a trajectory that never reaches an accepting state:
    /// `-beta / (1 - gamma)`, the lower bound of every value.
    pub fn value_floor(&self) -> f64 {
        -self.beta / (1.0 - self.gamma)
    }

    /// Numeric slack used by the satisfiability threshold test.
    pub fn threshold_slack(&self) -> f64 {
        10.0 * self.epsilon
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("value iteration did not converge after {sweeps} sweeps (residual {residual})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("product has {size} states, above the exact-evaluation cap {cap}")]
    OracleCapExceeded { size: usize, cap: usize },
    #[error("policy does not pick an action at non-terminal state {state}")]
    PolicyIncomplete { state: usize },
}

/// Expected-return estimates per product state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    v: Vec<f64>,
}

impl ValueTable {
    pub fn get(&self, sp: usize) -> f64 {
        self.v[sp]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Deterministic action choice per product state; `None` at terminals and at
/// states with no feasible action.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    actions: Vec<Option<usize>>,
}

impl Policy {
    pub fn from_actions(actions: Vec<Option<usize>>) -> Policy {
        Policy { actions }
    }

    pub fn action(&self, sp: usize) -> Option<usize> {
        self.actions[sp]
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.actions
    }
}

/// Converged result of a value-iteration run.
#[derive(Debug, Clone)]
pub struct Plan {
    pub values: ValueTable,
    pub policy: Policy,
    pub sweeps: usize,
    /// Final max-norm residual.
    pub residual: f64,
    /// Residual after each sweep, in order.
    pub residual_history: Vec<f64>,
}

/// Per-edge reward along a structurally possible product transition, cases in
/// order: stepping from a non-trash state into trash is penalized with the
/// whole discounted-cost floor, anything leaving an accepting or trash state
/// is free, and every other step costs `beta`.
pub fn reward(p: &ProductAutomaton, sp: usize, sp_next: usize, cfg: &PlannerConfig) -> f64 {
    if !p.is_trash(sp) && p.is_trash(sp_next) {
        cfg.value_floor()
    } else if p.is_accepting(sp) || p.is_trash(sp) {
        0.0
    } else {
        -cfg.beta
    }
}

fn backup(p: &ProductAutomaton, cfg: &PlannerConfig, v: &[f64], sp: usize) -> Option<f64> {
    let mut best = f64::NEG_INFINITY;
    let mut any = false;
    for a in 0..p.n_actions() {
        let edges = p.edges(sp, a);
        if edges.is_empty() {
            continue;
        }
        any = true;
        let mut q = 0.0;
        for &(sp2, prob) in edges {
            q += prob * (reward(p, sp, sp2, cfg) + cfg.gamma * v[sp2]);
        }
        if q > best {
            best = q;
        }
    }
    any.then_some(best)
}

/// Value iteration from scratch; terminal states are pinned at zero and
/// everything else starts at the value floor (same fixed point as a zero
/// start, but states that cannot reach acceptance converge immediately).
pub fn value_iteration(p: &ProductAutomaton, cfg: &PlannerConfig) -> Result<Plan, PlanError> {
    let init = init_table(p, cfg, None);
    iterate(p, cfg, init)
}

/// Value iteration warm-started from a previous table (typically the plan for
/// the belief before the latest reveal). Terminal pins are re-applied.
pub fn value_iteration_warm(
    p: &ProductAutomaton,
    cfg: &PlannerConfig,
    warm: &ValueTable,
) -> Result<Plan, PlanError> {
    let init = init_table(p, cfg, Some(warm));
    iterate(p, cfg, init)
}

fn init_table(p: &ProductAutomaton, cfg: &PlannerConfig, warm: Option<&ValueTable>) -> Vec<f64> {
    let n = p.state_count();
    let mut v = match warm {
        Some(w) if w.len() == n => w.v.clone(),
        _ => vec![cfg.value_floor(); n],
    };
    for (sp, slot) in v.iter_mut().enumerate() {
        if p.is_terminal(sp) {
            *slot = 0.0;
        }
    }
    v
}

fn iterate(p: &ProductAutomaton, cfg: &PlannerConfig, mut v: Vec<f64>) -> Result<Plan, PlanError> {
    let n = p.state_count();
    let mut history = Vec::new();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_sweeps {
        let eps = if cfg.parallel {
            let new_v: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|sp| {
                    if p.is_terminal(sp) {
                        0.0
                    } else {
                        backup(p, cfg, &v, sp).unwrap_or(cfg.value_floor())
                    }
                })
                .collect();
            let eps = v
                .iter()
                .zip(&new_v)
                .map(|(old, new)| (old - new).abs())
                .fold(0.0f64, f64::max);
            v = new_v;
            eps
        } else {
            let mut eps = 0.0f64;
            for sp in 0..n {
                if p.is_terminal(sp) {
                    continue;
                }
                let new = backup(p, cfg, &v, sp).unwrap_or(cfg.value_floor());
                eps = eps.max((new - v[sp]).abs());
                v[sp] = new;
            }
            eps
        };
        history.push(eps);
        residual = eps;
        if eps <= cfg.epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PlanError::NonConvergence {
            sweeps: cfg.max_sweeps,
            residual,
        });
    }
    let policy = extract_policy(p, cfg, &v);
    Ok(Plan {
        values: ValueTable { v },
        policy,
        sweeps: history.len(),
        residual,
        residual_history: history,
    })
}

/// One-step greedy lookahead on the final table; ties break toward the lowest
/// action index so traces are reproducible.
fn extract_policy(p: &ProductAutomaton, cfg: &PlannerConfig, v: &[f64]) -> Policy {
    let actions = (0..p.state_count())
        .map(|sp| {
            if p.is_terminal(sp) {
                return None;
            }
            let mut best: Option<(usize, f64)> = None;
            for a in 0..p.n_actions() {
                let edges = p.edges(sp, a);
                if edges.is_empty() {
                    continue;
                }
                let mut q = 0.0;
                for &(sp2, prob) in edges {
                    q += prob * (reward(p, sp, sp2, cfg) + cfg.gamma * v[sp2]);
                }
                if best.is_none_or(|(_, bq)| q > bq) {
                    best = Some((a, q));
                }
            }
            best.map(|(a, _)| a)
        })
        .collect();
    Policy { actions }
}

/// Minimum value over non-terminal states, `None` when every state is terminal.
pub fn min_nonterminal(vt: &ValueTable, p: &ProductAutomaton) -> Option<f64> {
    (0..p.state_count())
        .filter(|&sp| !p.is_terminal(sp))
        .map(|sp| vt.get(sp))
        .min_by(|a, b| a.total_cmp(b))
}

/// Minimum value over non-terminal states reachable from `from` through
/// positive-probability edges (trash states are not expanded).
pub fn min_reachable_nonterminal(
    vt: &ValueTable,
    p: &ProductAutomaton,
    from: usize,
) -> Option<f64> {
    let mut seen = vec![false; p.state_count()];
    let mut stack = vec![from];
    seen[from] = true;
    let mut min: Option<f64> = None;
    while let Some(sp) = stack.pop() {
        if !p.is_terminal(sp) {
            let val = vt.get(sp);
            min = Some(min.map_or(val, |m: f64| m.min(val)));
        }
        if p.is_trash(sp) || p.is_accepting(sp) {
            continue;
        }
        for a in 0..p.n_actions() {
            for &(sp2, _) in p.edges(sp, a) {
                if !seen[sp2] {
                    seen[sp2] = true;
                    stack.push(sp2);
                }
            }
        }
    }
    min
}

/// A converged table certifies the task is satisfiable with positive
/// probability iff every non-terminal value clears the floor by the slack.
pub fn is_satisfying(vt: &ValueTable, p: &ProductAutomaton, cfg: &PlannerConfig) -> bool {
    match min_nonterminal(vt, p) {
        Some(min) => min > cfg.value_floor() + cfg.threshold_slack(),
        None => true,
    }
}

/// Restricted variant of [`is_satisfying`] over the states reachable from
/// `from`; this is the check used online, where unreachable pockets of the
/// product may be hopeless without affecting the mission.
pub fn is_satisfying_from(
    vt: &ValueTable,
    p: &ProductAutomaton,
    cfg: &PlannerConfig,
    from: usize,
) -> bool {
    if p.is_trash(from) {
        return false;
    }
    match min_reachable_nonterminal(vt, p, from) {
        Some(min) => min > cfg.value_floor() + cfg.threshold_slack(),
        None => true,
    }
}

/// Cap on the product size accepted by [`exact_policy_value`].
pub const EXACT_EVAL_CAP: usize = 200;

/// Exact expected return of a fixed policy, by solving the linear fixed point
/// `v = r + gamma * P v` over the non-terminal states directly.
///
/// Independent of the iterative machinery above, which it serves as an oracle
/// for. States where the policy picks no action (none feasible) are assigned
/// the value floor.
pub fn exact_policy_value(
    p: &ProductAutomaton,
    policy: &Policy,
    cfg: &PlannerConfig,
) -> Result<ValueTable, PlanError> {
    let n = p.state_count();
    if n > EXACT_EVAL_CAP {
        return Err(PlanError::OracleCapExceeded {
            size: n,
            cap: EXACT_EVAL_CAP,
        });
    }
    let free: Vec<usize> = (0..n)
        .filter(|&sp| !p.is_terminal(sp) && policy_has_action(p, policy, sp))
        .collect();
    let col_of: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (i, &sp) in free.iter().enumerate() {
            m[sp] = Some(i);
        }
        m
    };
    for sp in 0..n {
        if !p.is_terminal(sp) && policy.action(sp).is_none() && has_feasible_action(p, sp) {
            return Err(PlanError::PolicyIncomplete { state: sp });
        }
    }

    let m = free.len();
    let mut mat = DMatrix::<f64>::identity(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (i, &sp) in free.iter().enumerate() {
        let a = policy.action(sp).unwrap();
        for &(sp2, prob) in p.edges(sp, a) {
            rhs[i] += prob * reward(p, sp, sp2, cfg);
            match col_of[sp2] {
                Some(j) => mat[(i, j)] -= cfg.gamma * prob,
                // Terminal successors contribute value 0; action-less
                // successors sit at the floor.
                None => {
                    if !p.is_terminal(sp2) {
                        rhs[i] += cfg.gamma * prob * cfg.value_floor();
                    }
                }
            }
        }
    }
    let sol = mat
        .lu()
        .solve(&rhs)
        .expect("I - gamma*P is strictly diagonally dominant, hence invertible");

    let mut v = vec![0.0; n];
    for sp in 0..n {
        v[sp] = match col_of[sp] {
            Some(i) => sol[i],
            None if p.is_terminal(sp) => 0.0,
            None => cfg.value_floor(),
        };
    }
    Ok(ValueTable { v })
}

fn policy_has_action(p: &ProductAutomaton, policy: &Policy, sp: usize) -> bool {
    policy
        .action(sp)
        .is_some_and(|a| !p.edges(sp, a).is_empty())
}

fn has_feasible_action(p: &ProductAutomaton, sp: usize) -> bool {
    (0..p.n_actions()).any(|a| !p.edges(sp, a).is_empty())
}
