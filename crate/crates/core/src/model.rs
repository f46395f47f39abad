//! Motion model: deterministic transitions over indexed states, a mutable
//! per-state label belief, and the hidden ground-truth environment.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::scltl::Letter;

/// Tolerance for belief row normalization checks.
pub const NORMALIZATION_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("grid has no free cells")]
    AllBlocked,
    #[error("state {0} out of range ({1} states)")]
    StateOutOfRange(usize, usize),
    #[error("belief row for state {state} sums to {sum}, expected 1")]
    NotNormalized { state: usize, sum: f64 },
    #[error("belief row for state {state} has a negative probability")]
    NegativeProbability { state: usize },
    #[error("belief row for state {state} repeats a letter")]
    DuplicateLetter { state: usize },
    #[error("letter uses observations outside the alphabet (state {state})")]
    LetterOutOfRange { state: usize },
}

/// Deterministic MDP whose states will carry probabilistic semantic labels.
///
/// Transitions are stored densely: `delta[x * n_actions + a]` is the unique
/// successor of `x` under action `a`, or `None` when the action is infeasible
/// there.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMdp {
    n_states: usize,
    action_names: Vec<String>,
    delta: Vec<Option<usize>>,
}

impl LabeledMdp {
    pub fn new(n_states: usize, action_names: Vec<String>, delta: Vec<Option<usize>>) -> Self {
        assert_eq!(delta.len(), n_states * action_names.len());
        for succ in delta.iter().flatten() {
            assert!(*succ < n_states);
        }
        LabeledMdp {
            n_states,
            action_names,
            delta,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.action_names[a]
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn action_id(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|n| n == name)
    }

    pub fn successor(&self, x: usize, a: usize) -> Option<usize> {
        self.delta[x * self.n_actions() + a]
    }

    /// Feasible `(action, successor)` pairs from `x`, ascending by action.
    pub fn actions_from(&self, x: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let base = x * self.n_actions();
        (0..self.n_actions()).filter_map(move |a| self.delta[base + a].map(|x2| (a, x2)))
    }

    /// Number of feasible `(state, action)` pairs.
    pub fn transition_count(&self) -> usize {
        self.delta.iter().filter(|s| s.is_some()).count()
    }

    /// States reachable from `x` within at most `h` hops of the transition
    /// graph, including `x` itself. Sorted ascending.
    pub fn neighborhood(&self, x: usize, h: u32) -> Vec<usize> {
        let mut seen = vec![false; self.n_states];
        let mut frontier = vec![x];
        seen[x] = true;
        for _ in 0..h {
            let mut next = Vec::new();
            for &y in &frontier {
                for (_, y2) in self.actions_from(y) {
                    if !seen[y2] {
                        seen[y2] = true;
                        next.push(y2);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        (0..self.n_states).filter(|&i| seen[i]).collect()
    }
}

/// Grid cell, `(x, y)` with the origin at the bottom-left corner.
pub type Cell = (u32, u32);

pub const GRID_ACTIONS: [&str; 5] = ["Up", "Right", "Down", "Left", "Stay"];

/// Bijection between free grid cells and state indices (row-major by `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: BTreeSet<Cell>,
    states: Vec<Cell>,
    index: Vec<Option<usize>>,
}

impl GridMap {
    pub fn new(width: u32, height: u32, blocked: &BTreeSet<Cell>) -> Result<GridMap, ModelError> {
        let mut states = Vec::new();
        let mut index = vec![None; (width * height) as usize];
        for y in 0..height {
            for x in 0..width {
                if !blocked.contains(&(x, y)) {
                    index[(y * width + x) as usize] = Some(states.len());
                    states.push((x, y));
                }
            }
        }
        if states.is_empty() {
            return Err(ModelError::AllBlocked);
        }
        Ok(GridMap {
            width,
            height,
            blocked: blocked.clone(),
            states,
            index,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn blocked(&self) -> &BTreeSet<Cell> {
        &self.blocked
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_at(&self, cell: Cell) -> Option<usize> {
        let (x, y) = cell;
        if x >= self.width || y >= self.height {
            return None;
        }
        self.index[(y * self.width + x) as usize]
    }

    pub fn cell_of(&self, state: usize) -> Cell {
        self.states[state]
    }

    /// The motion model over the free cells: four cardinal moves where the
    /// target cell is in bounds and unblocked, plus `Stay` everywhere.
    pub fn mdp(&self) -> LabeledMdp {
        let n = self.states.len();
        let mut delta = vec![None; n * GRID_ACTIONS.len()];
        for (i, &(x, y)) in self.states.iter().enumerate() {
            let moves: [Option<Cell>; 5] = [
                if y + 1 < self.height {
                    Some((x, y + 1))
                } else {
                    None
                }, // Up
                if x + 1 < self.width {
                    Some((x + 1, y))
                } else {
                    None
                }, // Right
                if y > 0 { Some((x, y - 1)) } else { None }, // Down
                if x > 0 { Some((x - 1, y)) } else { None }, // Left
                Some((x, y)),                                // Stay
            ];
            for (a, target) in moves.iter().enumerate() {
                delta[i * GRID_ACTIONS.len() + a] = target.and_then(|c| self.state_at(c));
            }
        }
        LabeledMdp::new(
            n,
            GRID_ACTIONS.iter().map(|s| s.to_string()).collect(),
            delta,
        )
    }
}

/// Builds an open or partially blocked grid world.
pub fn grid_world(
    width: u32,
    height: u32,
    blocked: &BTreeSet<Cell>,
) -> Result<(GridMap, LabeledMdp), ModelError> {
    let grid = GridMap::new(width, height, blocked)?;
    let mdp = grid.mdp();
    Ok((grid, mdp))
}

#[derive(Debug, Clone, PartialEq)]
struct BeliefRow {
    /// Positive-probability letters, sorted by bitmask; probabilities sum to 1.
    entries: Vec<(Letter, f64)>,
    revealed: bool,
}

/// Per-state distribution over label sets, mutable as truth is revealed.
///
/// Rows are sparse over their support. A state becomes *revealed* once a
/// sensor observation pins its row to the single true letter; the set of
/// revealed states only grows.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    n_obs: usize,
    rows: Vec<BeliefRow>,
    version: u64,
}

impl Belief {
    /// Validates support, normalization and letter ranges.
    pub fn new(n_obs: usize, rows: Vec<Vec<(Letter, f64)>>) -> Result<Belief, ModelError> {
        let mut out = Vec::with_capacity(rows.len());
        for (state, mut entries) in rows.into_iter().enumerate() {
            entries.sort_by_key(|(l, _)| *l);
            let mut sum = 0.0;
            for window in entries.windows(2) {
                if window[0].0 == window[1].0 {
                    return Err(ModelError::DuplicateLetter { state });
                }
            }
            for &(l, p) in &entries {
                if !l.fits(n_obs) {
                    return Err(ModelError::LetterOutOfRange { state });
                }
                if p < 0.0 {
                    return Err(ModelError::NegativeProbability { state });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > NORMALIZATION_EPS {
                return Err(ModelError::NotNormalized { state, sum });
            }
            entries.retain(|&(_, p)| p > 0.0);
            out.push(BeliefRow {
                entries,
                revealed: false,
            });
        }
        Ok(Belief {
            n_obs,
            rows: out,
            version: 0,
        })
    }

    /// Degenerate belief that pins every state to the given letter (without
    /// marking anything revealed; only sensing reveals).
    pub fn certain(n_obs: usize, labels: &[Letter]) -> Belief {
        Belief {
            n_obs,
            rows: labels
                .iter()
                .map(|&l| BeliefRow {
                    entries: vec![(l, 1.0)],
                    revealed: false,
                })
                .collect(),
            version: 0,
        }
    }

    /// Every state carries the empty letter with probability one.
    pub fn empty_labels(n_obs: usize, n_states: usize) -> Belief {
        Belief::certain(n_obs, &vec![Letter::EMPTY; n_states])
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// Support of state `x`: positive-probability letters, sorted by bitmask.
    pub fn support(&self, x: usize) -> &[(Letter, f64)] {
        &self.rows[x].entries
    }

    pub fn prob(&self, x: usize, l: Letter) -> f64 {
        self.rows[x]
            .entries
            .iter()
            .find(|(cand, _)| *cand == l)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn is_revealed(&self, x: usize) -> bool {
        self.rows[x].revealed
    }

    pub fn revealed_count(&self) -> usize {
        self.rows.iter().filter(|r| r.revealed).count()
    }

    /// Monotone counter, bumped whenever an update changes some distribution.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Collapses each observed state onto its true letter with probability
    /// one, overwriting the prior unconditionally (incorrect priors included).
    /// Returns the states whose distribution actually changed.
    pub fn update_map(
        &mut self,
        observations: &[(usize, Letter)],
    ) -> Result<Vec<usize>, ModelError> {
        let mut changed = Vec::new();
        for &(x, l) in observations {
            if x >= self.rows.len() {
                return Err(ModelError::StateOutOfRange(x, self.rows.len()));
            }
            if !l.fits(self.n_obs) {
                return Err(ModelError::LetterOutOfRange { state: x });
            }
            let row = &mut self.rows[x];
            let pinned = row.entries.len() == 1 && row.entries[0] == (l, 1.0);
            if !pinned {
                row.entries = vec![(l, 1.0)];
                changed.push(x);
            }
            row.revealed = true;
        }
        changed.sort_unstable();
        changed.dedup();
        if !changed.is_empty() {
            self.version += 1;
        }
        Ok(changed)
    }
}

/// Hidden ground truth: one letter per state plus the sensor range.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    truth: Vec<Letter>,
    h: u32,
}

impl Environment {
    pub fn new(truth: Vec<Letter>, h: u32) -> Environment {
        Environment { truth, h }
    }

    pub fn truth(&self, x: usize) -> Letter {
        self.truth[x]
    }

    pub fn truths(&self) -> &[Letter] {
        &self.truth
    }

    pub fn sensor_range(&self) -> u32 {
        self.h
    }

    /// True labels of every state within `h` hops of `x`, ascending by state.
    pub fn sense(&self, mdp: &LabeledMdp, x: usize) -> Vec<(usize, Letter)> {
        mdp.neighborhood(x, self.h)
            .into_iter()
            .map(|y| (y, self.truth[y]))
            .collect()
    }
}
