use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on alphabet size; letters are bitmasks over the alphabet.
pub const MAX_OBSERVATIONS: usize = 16;

/// Index of an observation in its [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObsId(pub u8);

/// A subset of the observation alphabet, i.e. one input symbol of the DFA.
///
/// Bit `i` is set iff observation `i` holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(pub u16);

impl Letter {
    pub const EMPTY: Letter = Letter(0);

    pub fn singleton(o: ObsId) -> Letter {
        Letter(1 << o.0)
    }

    pub fn contains(self, o: ObsId) -> bool {
        self.0 & (1 << o.0) != 0
    }

    pub fn with(self, o: ObsId) -> Letter {
        Letter(self.0 | (1 << o.0))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Observations present in this letter, ascending.
    pub fn iter(self) -> impl Iterator<Item = ObsId> {
        (0..MAX_OBSERVATIONS as u8)
            .filter(move |i| self.0 & (1 << i) != 0)
            .map(ObsId)
    }

    /// All letters over an alphabet of `n_obs` observations, ascending by bitmask.
    pub fn all(n_obs: usize) -> impl Iterator<Item = Letter> {
        assert!(n_obs <= MAX_OBSERVATIONS);
        (0..(1u32 << n_obs)).map(|bits| Letter(bits as u16))
    }

    /// True iff every set bit refers to an observation below `n_obs`.
    pub fn fits(self, n_obs: usize) -> bool {
        n_obs >= MAX_OBSERVATIONS || self.0 < (1 << n_obs)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("alphabet has {0} observations, the cap is {MAX_OBSERVATIONS}")]
    TooLarge(usize),
    #[error("duplicate observation name `{0}`")]
    Duplicate(String),
    #[error("`{0}` is reserved and cannot be an observation name")]
    Reserved(String),
    #[error("`{0}` is not a valid observation name")]
    Invalid(String),
}

const RESERVED_NAMES: &[&str] = &["true", "false", "U", "F", "X", "G"];

/// Ordered set of observation names; formulas refer to observations by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, AlphabetError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > MAX_OBSERVATIONS {
            return Err(AlphabetError::TooLarge(names.len()));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            let mut chars = n.chars();
            let head_ok = chars
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
            if !head_ok || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(AlphabetError::Invalid(n.clone()));
            }
            if RESERVED_NAMES.contains(&n.as_str()) {
                return Err(AlphabetError::Reserved(n.clone()));
            }
            if !seen.insert(n.clone()) {
                return Err(AlphabetError::Duplicate(n.clone()));
            }
        }
        Ok(Alphabet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn n_letters(&self) -> usize {
        1 << self.names.len()
    }

    pub fn id(&self, name: &str) -> Option<ObsId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ObsId(i as u8))
    }

    pub fn name(&self, o: ObsId) -> &str {
        &self.names[o.0 as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn letter_from_names<S: AsRef<str>>(
        &self,
        names: impl IntoIterator<Item = S>,
    ) -> Option<Letter> {
        let mut l = Letter::EMPTY;
        for n in names {
            l = l.with(self.id(n.as_ref())?);
        }
        Some(l)
    }

    pub fn letter_names(&self, l: Letter) -> Vec<String> {
        l.iter().map(|o| self.name(o).to_string()).collect()
    }
}

/// Canonical co-safe LTL formula.
///
/// The constructors keep every formula in a disjunctive normal form over
/// *literals* (observations, negated observations, untils, eventualities):
/// a canonical formula is `False`, `True`, a literal, a sorted deduplicated
/// conjunction of literals, or a sorted disjunction of such conjunctions.
/// Conjunctions containing an observation together with its negation are
/// dropped, and a disjunct that subsumes another (superset of its literals)
/// is absorbed. This keeps the closure under progression finite, so two
/// semantically identical progressions of the same task compare structurally
/// equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Obs(ObsId),
    NegObs(ObsId),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
}

impl Formula {
    pub fn obs(o: ObsId) -> Formula {
        Formula::Obs(o)
    }

    pub fn neg_obs(o: ObsId) -> Formula {
        Formula::NegObs(o)
    }

    fn is_literal(&self) -> bool {
        matches!(
            self,
            Formula::Obs(_) | Formula::NegObs(_) | Formula::Until(_, _) | Formula::Eventually(_)
        )
    }

    /// The formula as a set of conjunctions of literals. `True` is the empty
    /// conjunction, `False` the empty disjunction.
    fn monomials(self) -> Vec<BTreeSet<Formula>> {
        match self {
            Formula::True => vec![BTreeSet::new()],
            Formula::False => vec![],
            Formula::And(cs) => vec![cs.into_iter().collect()],
            Formula::Or(cs) => cs
                .into_iter()
                .map(|c| match c {
                    Formula::And(cs) => cs.into_iter().collect(),
                    lit => [lit].into_iter().collect(),
                })
                .collect(),
            lit => vec![[lit].into_iter().collect()],
        }
    }

    /// A conjunction of an observation and its negation is unsatisfiable on
    /// every word (empty or not), so such monomials are dropped whole.
    fn contradictory(m: &BTreeSet<Formula>) -> bool {
        m.iter().any(|lit| match lit {
            Formula::NegObs(o) => m.contains(&Formula::Obs(*o)),
            _ => false,
        })
    }

    fn assemble(mut monomials: Vec<BTreeSet<Formula>>) -> Formula {
        monomials.retain(|m| !Self::contradictory(m));
        // Absorption: a disjunct implied by a smaller one adds nothing.
        monomials.sort_by_key(|m| m.len());
        let mut kept: Vec<BTreeSet<Formula>> = Vec::new();
        for m in monomials {
            if !kept.iter().any(|k| k.is_subset(&m)) {
                kept.push(m);
            }
        }
        if kept.iter().any(|m| m.is_empty()) {
            return Formula::True;
        }
        let mut parts: Vec<Formula> = kept
            .into_iter()
            .map(|m| {
                let lits: Vec<Formula> = m.into_iter().collect();
                if lits.len() == 1 {
                    lits.into_iter().next().unwrap()
                } else {
                    Formula::And(lits)
                }
            })
            .collect();
        parts.sort();
        parts.dedup();
        match parts.len() {
            0 => Formula::False,
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    /// Canonical conjunction: distributes disjunctions, so the result stays
    /// in normal form.
    pub fn and(children: impl IntoIterator<Item = Formula>) -> Formula {
        let mut acc: Vec<BTreeSet<Formula>> = vec![BTreeSet::new()];
        for c in children {
            debug_assert!(c.is_canonical());
            match &c {
                Formula::True => continue,
                Formula::False => return Formula::False,
                _ => {}
            }
            let rhs = c.monomials();
            let mut next = Vec::with_capacity(acc.len() * rhs.len());
            for m in &acc {
                for r in &rhs {
                    let mut u = m.clone();
                    u.extend(r.iter().cloned());
                    next.push(u);
                }
            }
            acc = next;
        }
        Self::assemble(acc)
    }

    /// Canonical disjunction, dual of [`Formula::and`].
    pub fn or(children: impl IntoIterator<Item = Formula>) -> Formula {
        let mut acc = Vec::new();
        for c in children {
            debug_assert!(c.is_canonical());
            if c == Formula::True {
                return Formula::True;
            }
            acc.extend(c.monomials());
        }
        Self::assemble(acc)
    }

    /// Structural check of the normal-form invariant (used in debug builds
    /// and tests).
    pub fn is_canonical(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Obs(_) | Formula::NegObs(_) => true,
            Formula::Until(a, b) => a.is_canonical() && b.is_canonical(),
            Formula::Eventually(s) => s.is_canonical(),
            Formula::And(cs) => {
                cs.len() >= 2
                    && cs.windows(2).all(|w| w[0] < w[1])
                    && cs.iter().all(|c| c.is_literal() && c.is_canonical())
            }
            Formula::Or(cs) => {
                cs.len() >= 2
                    && cs.windows(2).all(|w| w[0] < w[1])
                    && cs.iter().all(|c| match c {
                        Formula::And(_) => c.is_canonical(),
                        other => other.is_literal() && other.is_canonical(),
                    })
            }
        }
    }

    /// Canonical until. A `False` operand collapses: nothing can be awaited
    /// through a violated left side, and a `False` right side never arrives.
    /// `False` therefore only ever occurs as a whole formula.
    pub fn until(lhs: Formula, rhs: Formula) -> Formula {
        match (lhs, rhs) {
            (_, Formula::False) => Formula::False,
            (Formula::False, rhs) => rhs,
            (lhs, rhs) => Formula::Until(Box::new(lhs), Box::new(rhs)),
        }
    }

    pub fn eventually(sub: Formula) -> Formula {
        if sub == Formula::False {
            return Formula::False;
        }
        Formula::Eventually(Box::new(sub))
    }

    /// Observations that occur positively (outside negation), ascending.
    /// These are the labels a world must realize somewhere for the task to
    /// have a chance; negated observations are excluded.
    pub fn positive_observations(&self) -> Vec<ObsId> {
        fn walk(f: &Formula, out: &mut Vec<ObsId>) {
            match f {
                Formula::True | Formula::False | Formula::NegObs(_) => {}
                Formula::Obs(o) => out.push(*o),
                Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| walk(c, out)),
                Formula::Until(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Formula::Eventually(s) => walk(s, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Largest observation index mentioned, if any.
    pub fn max_obs(&self) -> Option<u8> {
        match self {
            Formula::True | Formula::False => None,
            Formula::Obs(o) | Formula::NegObs(o) => Some(o.0),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().filter_map(|c| c.max_obs()).max(),
            Formula::Until(a, b) => a.max_obs().max(b.max_obs()),
            Formula::Eventually(s) => s.max_obs(),
        }
    }

    /// One-step progression: the residual obligation after reading `l`.
    ///
    /// A word `l . w` is a good prefix of `self` exactly when `w` is a good
    /// prefix of the progressed formula. The result is canonical.
    pub fn progress(&self, l: Letter) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Obs(o) => {
                if l.contains(*o) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Formula::NegObs(o) => {
                if l.contains(*o) {
                    Formula::False
                } else {
                    Formula::True
                }
            }
            Formula::And(cs) => Formula::and(cs.iter().map(|c| c.progress(l))),
            Formula::Or(cs) => Formula::or(cs.iter().map(|c| c.progress(l))),
            Formula::Until(a, b) => {
                Formula::or([b.progress(l), Formula::and([a.progress(l), self.clone()])])
            }
            Formula::Eventually(s) => Formula::or([s.progress(l), self.clone()]),
        }
    }

    /// Renders the formula in the surface syntax accepted by [`crate::scltl::parse`].
    pub fn display(&self, alphabet: &Alphabet) -> String {
        let mut s = String::new();
        self.fmt_prec(alphabet, Prec::Or, &mut s);
        s
    }
}

/// Binding strength, loosest first. Unary operators bind tightest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,
    And,
    Until,
    Unary,
}

impl Formula {
    fn prec(&self) -> Prec {
        match self {
            Formula::Or(_) => Prec::Or,
            Formula::And(_) => Prec::And,
            Formula::Until(_, _) => Prec::Until,
            _ => Prec::Unary,
        }
    }

    fn fmt_prec(&self, alphabet: &Alphabet, ctx: Prec, out: &mut String) {
        let parens = self.prec() < ctx;
        if parens {
            out.push('(');
        }
        match self {
            Formula::True => out.push_str("true"),
            Formula::False => out.push_str("false"),
            Formula::Obs(o) => out.push_str(alphabet.name(*o)),
            Formula::NegObs(o) => {
                out.push('!');
                out.push_str(alphabet.name(*o));
            }
            Formula::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" & ");
                    }
                    c.fmt_prec(alphabet, Prec::Until, out);
                }
            }
            Formula::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" | ");
                    }
                    c.fmt_prec(alphabet, Prec::And, out);
                }
            }
            Formula::Until(a, b) => {
                a.fmt_prec(alphabet, Prec::Unary, out);
                out.push_str(" U ");
                // Right-associative: a bare until on the right needs no parens.
                let rhs_ctx = if matches!(**b, Formula::Until(_, _)) {
                    Prec::Until
                } else {
                    Prec::Unary
                };
                b.fmt_prec(alphabet, rhs_ctx, out);
            }
            Formula::Eventually(s) => {
                out.push_str("F ");
                s.fmt_prec(alphabet, Prec::Unary, out);
            }
        }
        if parens {
            out.push(')');
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, o) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", o.0)?;
        }
        write!(f, "}}")
    }
}
