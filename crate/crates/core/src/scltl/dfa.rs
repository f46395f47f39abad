use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::formula::{Alphabet, Formula, Letter};

/// Default cap on the number of automaton states explored during compilation.
pub const DEFAULT_MAX_STATES: usize = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("state limit of {limit} exceeded while compiling the automaton")]
    StateLimitExceeded { limit: usize },
    #[error("formula mentions observation {obs} but the alphabet has {len} observations")]
    ObservationOutOfRange { obs: u8, len: usize },
}

/// Deterministic finite automaton over letters in `2^O`, total by construction.
///
/// States are canonical formulas produced by progression; the state annotated
/// `true` is the unique accepting state and the state annotated `false`, when
/// some progression reaches it, is the absorbing trash state. Both are fixed
/// points of progression, so acceptance is never revoked and trash is never
/// escaped. A run accepts as soon as it visits the accepting state: the word
/// consumed so far is a good prefix of the task.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalDfa {
    alphabet: Alphabet,
    states: Vec<Formula>,
    initial: usize,
    /// Dense transition table, `states.len() x n_letters`, row-major.
    table: Vec<usize>,
    accepting: Vec<bool>,
    trash: Option<usize>,
}

impl TotalDfa {
    /// Compiles a canonical formula by fixed-point exploration of its
    /// progressions, with the default state cap.
    pub fn compile(alphabet: &Alphabet, f: &Formula) -> Result<TotalDfa, CompileError> {
        Self::compile_with_limit(alphabet, f, DEFAULT_MAX_STATES)
    }

    pub fn compile_with_limit(
        alphabet: &Alphabet,
        f: &Formula,
        max_states: usize,
    ) -> Result<TotalDfa, CompileError> {
        if let Some(obs) = f.max_obs() {
            if obs as usize >= alphabet.len() {
                return Err(CompileError::ObservationOutOfRange {
                    obs,
                    len: alphabet.len(),
                });
            }
        }
        let n_letters = alphabet.n_letters();
        let mut index: BTreeMap<Formula, usize> = BTreeMap::new();
        let mut states: Vec<Formula> = Vec::new();
        let mut table: Vec<usize> = Vec::new();
        index.insert(f.clone(), 0);
        states.push(f.clone());

        let mut next = 0;
        while next < states.len() {
            let g = states[next].clone();
            for l in Letter::all(alphabet.len()) {
                let h = g.progress(l);
                let id = match index.get(&h) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        if id >= max_states {
                            return Err(CompileError::StateLimitExceeded { limit: max_states });
                        }
                        index.insert(h.clone(), id);
                        states.push(h);
                        id
                    }
                };
                table.push(id);
            }
            next += 1;
        }
        debug_assert_eq!(table.len(), states.len() * n_letters);

        let accepting = states.iter().map(|s| *s == Formula::True).collect();
        let trash = states.iter().position(|s| *s == Formula::False);
        Ok(TotalDfa {
            alphabet: alphabet.clone(),
            states,
            initial: 0,
            table,
            accepting,
            trash,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn formula(&self, s: usize) -> &Formula {
        &self.states[s]
    }

    pub fn is_accepting(&self, s: usize) -> bool {
        self.accepting[s]
    }

    /// The absorbing trash state, present only if the task can be violated.
    pub fn trash(&self) -> Option<usize> {
        self.trash
    }

    pub fn is_trash(&self, s: usize) -> bool {
        self.trash == Some(s)
    }

    pub fn step(&self, s: usize, l: Letter) -> usize {
        debug_assert!(l.fits(self.alphabet.len()));
        self.table[s * self.alphabet.n_letters() + l.0 as usize]
    }

    /// True iff the run over `word` visits the accepting state at or before
    /// consuming the whole word.
    pub fn accepts(&self, word: impl IntoIterator<Item = Letter>) -> bool {
        let mut s = self.initial;
        if self.accepting[s] {
            return true;
        }
        for l in word {
            s = self.step(s, l);
            if self.accepting[s] {
                return true;
            }
        }
        false
    }

    /// Graphviz rendering with letters grouped per edge.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n");
        for (i, f) in self.states.iter().enumerate() {
            let shape = if self.accepting[i] {
                "doublecircle"
            } else if self.is_trash(i) {
                "box"
            } else {
                "circle"
            };
            let label = f.display(&self.alphabet).replace('"', "\\\"");
            out.push_str(&format!("  s{i} [shape={shape},label=\"{i}: {label}\"];\n"));
        }
        out.push_str(&format!(
            "  init [shape=point]; init -> s{};\n",
            self.initial
        ));
        for from in 0..self.states.len() {
            let mut grouped: BTreeMap<usize, Vec<String>> = BTreeMap::new();
            for l in Letter::all(self.alphabet.len()) {
                let to = self.step(from, l);
                let names = self.alphabet.letter_names(l).join(",");
                grouped.entry(to).or_default().push(format!("{{{names}}}"));
            }
            for (to, letters) in grouped {
                out.push_str(&format!(
                    "  s{from} -> s{to} [label=\"{}\"];\n",
                    letters.join("|")
                ));
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> DfaJson {
        DfaJson {
            states: (0..self.states.len())
                .map(|i| DfaStateJson {
                    id: i,
                    formula: self.states[i].display(&self.alphabet),
                    accepting: self.accepting[i],
                    trash: self.is_trash(i),
                })
                .collect(),
            initial: self.initial,
            transitions: (0..self.states.len())
                .flat_map(|from| Letter::all(self.alphabet.len()).map(move |l| (from, l)))
                .map(|(from, l)| DfaTransitionJson {
                    from,
                    letter: self.alphabet.letter_names(l),
                    to: self.step(from, l),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DfaJson {
    pub states: Vec<DfaStateJson>,
    pub initial: usize,
    pub transitions: Vec<DfaTransitionJson>,
}

#[derive(Debug, Serialize)]
pub struct DfaStateJson {
    pub id: usize,
    pub formula: String,
    pub accepting: bool,
    pub trash: bool,
}

#[derive(Debug, Serialize)]
pub struct DfaTransitionJson {
    pub from: usize,
    pub letter: Vec<String>,
    pub to: usize,
}
