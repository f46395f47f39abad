//! Product of the motion model (with its current label belief) and the task
//! automaton.
//!
//! A product state pairs a physical state `x` with a DFA state `s`, indexed
//! as `x * |S| + s`. For every feasible action the successor distribution
//! groups the belief mass of the destination's candidate letters by the DFA
//! state they lead to, so edge probabilities always sum to one per action.

use serde::Serialize;

use crate::model::{Belief, LabeledMdp};
use crate::scltl::TotalDfa;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductAutomaton {
    n_x: usize,
    n_s: usize,
    n_actions: usize,
    initial_dfa: usize,
    accepting_dfa: Vec<bool>,
    trash_dfa: Option<usize>,
    /// Successor lists per `(product state, action)`, sorted by successor id;
    /// empty when the action is infeasible. Only positive mass is stored.
    edges: Vec<Vec<(usize, f64)>>,
    belief_version: u64,
}

impl ProductAutomaton {
    pub fn build(mdp: &LabeledMdp, belief: &Belief, dfa: &TotalDfa) -> ProductAutomaton {
        assert_eq!(mdp.n_states(), belief.n_states());
        assert_eq!(belief.n_obs(), dfa.alphabet().len());
        let n_x = mdp.n_states();
        let n_s = dfa.state_count();
        let n_actions = mdp.n_actions();
        let mut p = ProductAutomaton {
            n_x,
            n_s,
            n_actions,
            initial_dfa: dfa.initial(),
            accepting_dfa: (0..n_s).map(|s| dfa.is_accepting(s)).collect(),
            trash_dfa: dfa.trash(),
            edges: vec![Vec::new(); n_x * n_s * n_actions],
            belief_version: belief.version(),
        };
        for x in 0..n_x {
            p.rebuild_rows_into(mdp, belief, dfa, x);
        }
        p
    }

    /// Recomputes every edge whose destination physical state is `x_dest`.
    fn rebuild_rows_into(
        &mut self,
        mdp: &LabeledMdp,
        belief: &Belief,
        dfa: &TotalDfa,
        x_dest: usize,
    ) {
        // Group once per source DFA state, shared by all physical sources.
        let mut grouped: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_s];
        for (s, group) in grouped.iter_mut().enumerate() {
            for &(l, prob) in belief.support(x_dest) {
                let s2 = dfa.step(s, l);
                let sp2 = x_dest * self.n_s + s2;
                match group.iter_mut().find(|(t, _)| *t == sp2) {
                    Some((_, mass)) => *mass += prob,
                    None => group.push((sp2, prob)),
                }
            }
            group.sort_by_key(|&(t, _)| t);
        }
        for x in 0..self.n_x {
            for (a, x2) in mdp.actions_from(x) {
                if x2 != x_dest {
                    continue;
                }
                for (s, group) in grouped.iter().enumerate() {
                    let slot = (x * self.n_s + s) * self.n_actions + a;
                    self.edges[slot] = group.clone();
                }
            }
        }
    }

    /// Recomputes only the edges whose destination state is in `changed`.
    /// The result is identical to a full rebuild against the same belief.
    pub fn refresh_edges(
        &mut self,
        mdp: &LabeledMdp,
        belief: &Belief,
        dfa: &TotalDfa,
        changed: &[usize],
    ) {
        for &x in changed {
            self.rebuild_rows_into(mdp, belief, dfa, x);
        }
        self.belief_version = belief.version();
    }

    pub fn state_count(&self) -> usize {
        self.n_x * self.n_s
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_mdp_states(&self) -> usize {
        self.n_x
    }

    pub fn n_dfa_states(&self) -> usize {
        self.n_s
    }

    pub fn state_id(&self, x: usize, s: usize) -> usize {
        debug_assert!(x < self.n_x && s < self.n_s);
        x * self.n_s + s
    }

    pub fn split(&self, sp: usize) -> (usize, usize) {
        (sp / self.n_s, sp % self.n_s)
    }

    /// The initial product state for a robot starting at `x0` (DFA component
    /// still in its initial state; no letter consumed yet).
    pub fn initial_state(&self, x0: usize) -> usize {
        self.state_id(x0, self.initial_dfa)
    }

    pub fn is_accepting(&self, sp: usize) -> bool {
        self.accepting_dfa[sp % self.n_s]
    }

    pub fn is_trash(&self, sp: usize) -> bool {
        self.trash_dfa == Some(sp % self.n_s)
    }

    pub fn is_terminal(&self, sp: usize) -> bool {
        self.is_accepting(sp) || self.is_trash(sp)
    }

    pub fn edges(&self, sp: usize, a: usize) -> &[(usize, f64)] {
        &self.edges[sp * self.n_actions + a]
    }

    /// Version of the belief these edge probabilities reflect.
    pub fn belief_version(&self) -> u64 {
        self.belief_version
    }

    /// Total number of stored (positive-probability) product edges.
    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|e| e.len()).sum()
    }

    /// True iff an accepting state is reachable from `from` through
    /// positive-probability edges that never enter a trash state.
    pub fn feasibility_check(&self, from: usize) -> bool {
        if self.is_trash(from) {
            return false;
        }
        if self.is_accepting(from) {
            return true;
        }
        let mut seen = vec![false; self.state_count()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(sp) = stack.pop() {
            for a in 0..self.n_actions {
                for &(sp2, _) in self.edges(sp, a) {
                    if seen[sp2] || self.is_trash(sp2) {
                        continue;
                    }
                    if self.is_accepting(sp2) {
                        return true;
                    }
                    seen[sp2] = true;
                    stack.push(sp2);
                }
            }
        }
        false
    }

    /// Debug dump mirroring the in-memory structure.
    pub fn to_json(&self) -> ProductJson {
        ProductJson {
            states: self.state_count(),
            accepting: (0..self.state_count())
                .filter(|&sp| self.is_accepting(sp))
                .collect(),
            trash: (0..self.state_count())
                .filter(|&sp| self.is_trash(sp))
                .collect(),
            edges: (0..self.state_count())
                .flat_map(|sp| (0..self.n_actions).map(move |a| (sp, a)))
                .flat_map(|(sp, a)| {
                    self.edges(sp, a)
                        .iter()
                        .map(move |&(to, prob)| ProductEdgeJson {
                            from: sp,
                            action: a,
                            to,
                            prob,
                        })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProductJson {
    pub states: usize,
    pub edges: Vec<ProductEdgeJson>,
    pub accepting: Vec<usize>,
    pub trash: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct ProductEdgeJson {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    pub prob: f64,
}
