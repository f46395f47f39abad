//! Shared test machinery: an independent good-prefix semantics oracle, seeded
//! formula and product generators, exhaustive policy enumeration, and graph
//! oracles. Everything here stays independent of the compilation and planning
//! code paths it is used to check.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scltl_planner::model::{Belief, LabeledMdp};
use scltl_planner::planner::Policy;
use scltl_planner::product::ProductAutomaton;
use scltl_planner::scltl::{Alphabet, Formula, Letter, ObsId, TotalDfa};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Direct recursive evaluation of finite-prefix satisfaction: an until holds
/// on a word iff its right side holds on some suffix and the left side holds
/// on every earlier suffix; an eventuality holds iff its body holds on some
/// suffix. This is the semantics oracle the automaton path is checked against.
pub fn good_prefix_eval(f: &Formula, word: &[Letter]) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Obs(o) => !word.is_empty() && word[0].contains(*o),
        Formula::NegObs(o) => !word.is_empty() && !word[0].contains(*o),
        Formula::And(cs) => cs.iter().all(|c| good_prefix_eval(c, word)),
        Formula::Or(cs) => cs.iter().any(|c| good_prefix_eval(c, word)),
        Formula::Until(a, b) => (0..word.len()).any(|i| {
            good_prefix_eval(b, &word[i..]) && (0..i).all(|j| good_prefix_eval(a, &word[j..]))
        }),
        Formula::Eventually(s) => (0..word.len()).any(|i| good_prefix_eval(s, &word[i..])),
    }
}

/// Flattened subformula table in child-before-parent order, for sweeping the
/// oracle over every word up to a length bound in one pass per word tree.
struct SubTable {
    nodes: Vec<SubNode>,
    root: usize,
}

enum SubNode {
    True,
    False,
    Obs(ObsId),
    NegObs(ObsId),
    And(Vec<usize>),
    Or(Vec<usize>),
    Until(usize, usize),
    Eventually(usize),
}

impl SubTable {
    fn build(f: &Formula) -> SubTable {
        fn intern(
            f: &Formula,
            nodes: &mut Vec<SubNode>,
            memo: &mut HashMap<Formula, usize>,
        ) -> usize {
            if let Some(&i) = memo.get(f) {
                return i;
            }
            let node = match f {
                Formula::True => SubNode::True,
                Formula::False => SubNode::False,
                Formula::Obs(o) => SubNode::Obs(*o),
                Formula::NegObs(o) => SubNode::NegObs(*o),
                Formula::And(cs) => {
                    SubNode::And(cs.iter().map(|c| intern(c, nodes, memo)).collect())
                }
                Formula::Or(cs) => SubNode::Or(cs.iter().map(|c| intern(c, nodes, memo)).collect()),
                Formula::Until(a, b) => {
                    SubNode::Until(intern(a, nodes, memo), intern(b, nodes, memo))
                }
                Formula::Eventually(s) => SubNode::Eventually(intern(s, nodes, memo)),
            };
            nodes.push(node);
            let i = nodes.len() - 1;
            memo.insert(f.clone(), i);
            i
        }
        let mut nodes = Vec::new();
        let mut memo = HashMap::new();
        let root = intern(f, &mut nodes, &mut memo);
        SubTable { nodes, root }
    }

    /// Values on the empty word.
    fn empty_vals(&self) -> Vec<bool> {
        let mut vals = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            vals[i] = match node {
                SubNode::True => true,
                SubNode::And(cs) => cs.iter().all(|&c| vals[c]),
                SubNode::Or(cs) => cs.iter().any(|&c| vals[c]),
                _ => false,
            };
        }
        vals
    }

    /// Values on `l . s` given the values on `s`.
    fn prepend(&self, old: &[bool], l: Letter) -> Vec<bool> {
        let mut vals = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            vals[i] = match node {
                SubNode::True => true,
                SubNode::False => false,
                SubNode::Obs(o) => l.contains(*o),
                SubNode::NegObs(o) => !l.contains(*o),
                SubNode::And(cs) => cs.iter().all(|&c| vals[c]),
                SubNode::Or(cs) => cs.iter().any(|&c| vals[c]),
                SubNode::Until(a, b) => vals[*b] || (vals[*a] && old[i]),
                SubNode::Eventually(s) => vals[*s] || old[i],
            };
        }
        vals
    }
}

/// Checks `dfa.accepts` against the semantics oracle on every word of length
/// at most `max_len` over the alphabet. Returns the number of words checked;
/// panics with a counterexample on the first disagreement.
pub fn assert_dfa_matches_oracle(
    f: &Formula,
    dfa: &TotalDfa,
    n_obs: usize,
    max_len: usize,
) -> usize {
    let table = SubTable::build(f);
    let mut word_rev: Vec<Letter> = Vec::new();
    let mut checked = 0usize;

    fn recurse(
        table: &SubTable,
        dfa: &TotalDfa,
        n_obs: usize,
        depth_left: usize,
        vals: &[bool],
        word_rev: &mut Vec<Letter>,
        checked: &mut usize,
    ) {
        let expected = vals[table.root];
        let actual = dfa.accepts(word_rev.iter().rev().copied());
        assert_eq!(
            actual,
            expected,
            "automaton disagrees with the semantics oracle on word {:?}",
            word_rev.iter().rev().collect::<Vec<_>>()
        );
        *checked += 1;
        if depth_left == 0 {
            return;
        }
        for l in Letter::all(n_obs) {
            let new_vals = table.prepend(vals, l);
            word_rev.push(l);
            recurse(
                table,
                dfa,
                n_obs,
                depth_left - 1,
                &new_vals,
                word_rev,
                checked,
            );
            word_rev.pop();
        }
    }

    let empty = table.empty_vals();
    recurse(
        &table,
        dfa,
        n_obs,
        max_len,
        &empty,
        &mut word_rev,
        &mut checked,
    );
    checked
}

/// Seeded random canonical formula with operator nesting up to `depth`.
pub fn gen_formula(rng: &mut ChaCha8Rng, n_obs: usize, depth: usize) -> Formula {
    let atom = |rng: &mut ChaCha8Rng| {
        let o = ObsId(rng.gen_range(0..n_obs) as u8);
        match rng.gen_range(0..5) {
            0 => Formula::True,
            1 | 2 => Formula::obs(o),
            _ => Formula::neg_obs(o),
        }
    };
    if depth == 0 || rng.gen_range(0..5) == 0 {
        return atom(rng);
    }
    match rng.gen_range(0..4) {
        0 => {
            let k = rng.gen_range(2..=3);
            Formula::and((0..k).map(|_| gen_formula(rng, n_obs, depth - 1)))
        }
        1 => {
            let k = rng.gen_range(2..=3);
            Formula::or((0..k).map(|_| gen_formula(rng, n_obs, depth - 1)))
        }
        2 => Formula::until(
            gen_formula(rng, n_obs, depth - 1),
            gen_formula(rng, n_obs, depth - 1),
        ),
        _ => Formula::eventually(gen_formula(rng, n_obs, depth - 1)),
    }
}

pub fn gen_word(rng: &mut ChaCha8Rng, n_obs: usize, len: usize) -> Vec<Letter> {
    (0..len)
        .map(|_| Letter(rng.gen_range(0..(1u32 << n_obs)) as u16))
        .collect()
}

/// A randomly generated small planning instance.
pub struct SmallInstance {
    pub mdp: LabeledMdp,
    pub belief: Belief,
    pub alphabet: Alphabet,
    pub dfa: TotalDfa,
    pub product: ProductAutomaton,
}

/// Generates a small product with at most `max_nonterminal` non-terminal
/// states and at most 3 actions. Action 0 is always a self-loop so every
/// state keeps a feasible action; belief probabilities are multiples of 1/8
/// so reach probabilities stay well away from zero.
pub fn gen_small_instance(seed: u64, max_nonterminal: usize) -> SmallInstance {
    let mut attempt = 0u64;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E37)));
        attempt += 1;

        let n_obs = rng.gen_range(1..=2usize);
        let n_states = rng.gen_range(2..=6usize);
        let n_actions = rng.gen_range(2..=3usize);
        let mut delta = vec![None; n_states * n_actions];
        for x in 0..n_states {
            delta[x * n_actions] = Some(x); // self-loop
            for a in 1..n_actions {
                if rng.gen_bool(0.8) {
                    delta[x * n_actions + a] = Some(rng.gen_range(0..n_states));
                }
            }
        }
        let action_names = (0..n_actions).map(|a| format!("a{a}")).collect();
        let mdp = LabeledMdp::new(n_states, action_names, delta);

        let n_letters = 1usize << n_obs;
        let rows = (0..n_states)
            .map(|_| {
                let k = rng.gen_range(1..=2usize.min(n_letters));
                let mut letters: Vec<u16> = (0..n_letters as u16).collect();
                for i in 0..k {
                    let j = rng.gen_range(i..letters.len());
                    letters.swap(i, j);
                }
                let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=4) as f64).collect();
                let total: f64 = weights.iter().sum();
                letters[..k]
                    .iter()
                    .zip(&weights)
                    .map(|(&l, w)| (Letter(l), w / total))
                    .collect::<Vec<_>>()
            })
            .collect();
        let belief = Belief::new(n_obs, rows).unwrap();

        let names: Vec<String> = (0..n_obs).map(|i| format!("o{i}")).collect();
        let alphabet = Alphabet::new(names).unwrap();
        let formula = gen_formula(&mut rng, n_obs, 2);
        let dfa = match TotalDfa::compile(&alphabet, &formula) {
            Ok(d) => d,
            Err(_) => continue,
        };
        if dfa.state_count() < 2 {
            continue;
        }
        let product = ProductAutomaton::build(&mdp, &belief, &dfa);
        let nonterminal = (0..product.state_count())
            .filter(|&sp| !product.is_terminal(sp))
            .count();
        if nonterminal == 0 || nonterminal > max_nonterminal {
            continue;
        }
        if policy_space_size(&product, 200_000).is_none() {
            continue;
        }
        return SmallInstance {
            mdp,
            belief,
            alphabet,
            dfa,
            product,
        };
    }
}

/// Product of per-state feasible action counts, or `None` above `cap`.
pub fn policy_space_size(p: &ProductAutomaton, cap: usize) -> Option<usize> {
    let mut total = 1usize;
    for sp in 0..p.state_count() {
        if p.is_terminal(sp) {
            continue;
        }
        let k = (0..p.n_actions())
            .filter(|&a| !p.edges(sp, a).is_empty())
            .count();
        if k == 0 {
            continue;
        }
        total = total.checked_mul(k)?;
        if total > cap {
            return None;
        }
    }
    Some(total)
}

/// Enumerates every deterministic policy over the non-terminal states.
pub fn enumerate_policies(p: &ProductAutomaton) -> Vec<Policy> {
    let slots: Vec<(usize, Vec<usize>)> = (0..p.state_count())
        .filter(|&sp| !p.is_terminal(sp))
        .map(|sp| {
            let actions: Vec<usize> = (0..p.n_actions())
                .filter(|&a| !p.edges(sp, a).is_empty())
                .collect();
            (sp, actions)
        })
        .filter(|(_, actions)| !actions.is_empty())
        .collect();
    let mut out = Vec::new();
    let mut counter = vec![0usize; slots.len()];
    loop {
        let mut actions = vec![None; p.state_count()];
        for (i, (sp, choices)) in slots.iter().enumerate() {
            actions[*sp] = Some(choices[counter[i]]);
        }
        out.push(Policy::from_actions(actions));
        // Mixed-radix increment.
        let mut i = 0;
        loop {
            if i == slots.len() {
                return out;
            }
            counter[i] += 1;
            if counter[i] < slots[i].1.len() {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

/// True iff some trajectory under `policy` from `from` reaches an accepting
/// state (search over the positive-probability successor tree).
pub fn policy_can_accept(p: &ProductAutomaton, policy: &Policy, from: usize) -> bool {
    let mut seen = vec![false; p.state_count()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(sp) = stack.pop() {
        if p.is_accepting(sp) {
            return true;
        }
        if p.is_trash(sp) {
            continue;
        }
        let Some(a) = policy.action(sp) else { continue };
        for &(sp2, _) in p.edges(sp, a) {
            if !seen[sp2] {
                seen[sp2] = true;
                stack.push(sp2);
            }
        }
    }
    false
}

/// Fewest actions needed to reach an accepting product state from `from`,
/// assuming all edges are deterministic (fully revealed belief).
pub fn bfs_shortest_accept(p: &ProductAutomaton, from: usize) -> Option<usize> {
    let mut dist = vec![usize::MAX; p.state_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[from] = 0;
    queue.push_back(from);
    while let Some(sp) = queue.pop_front() {
        if p.is_accepting(sp) {
            return Some(dist[sp]);
        }
        if p.is_trash(sp) {
            continue;
        }
        for a in 0..p.n_actions() {
            for &(sp2, _) in p.edges(sp, a) {
                if dist[sp2] == usize::MAX {
                    dist[sp2] = dist[sp] + 1;
                    queue.push_back(sp2);
                }
            }
        }
    }
    None
}
