//! Co-safe LTL frontend: formula AST, parser, and compilation to a total DFA.
//!
//! Formulas follow the co-safe fragment without the next operator: negation
//! is allowed only directly on observations, so satisfaction of a formula is
//! always decided by a finite good prefix. Compilation works by formula
//! progression: states of the resulting automaton are canonical formulas, the
//! `true` state accepts and the `false` state (when reachable) is the
//! absorbing trash state.

mod dfa;
mod formula;
mod parse;

pub use dfa::{CompileError, TotalDfa, DEFAULT_MAX_STATES};
pub use formula::{Alphabet, AlphabetError, Formula, Letter, ObsId, MAX_OBSERVATIONS};
pub use parse::{parse, ParseError};
