//! Mission planner for co-safe LTL tasks in environments whose semantic
//! labels are known only probabilistically.
//!
//! The pipeline: compile the task to a total DFA ([`scltl`]), pair it with a
//! deterministic motion model carrying a per-state label belief ([`model`])
//! to obtain a probabilistically weighted product automaton ([`product`]),
//! solve the product with discounted value iteration ([`planner`]), and run
//! the plan online with sensing, belief updates and triggered replanning
//! ([`executor`]). [`mod@bench`] adds Monte Carlo world generation and strategy
//! comparisons; [`formats`] and [`render`] provide the JSON map/scenario
//! schemas and SVG trace rendering used by the CLI.

pub mod bench;
pub mod executor;
pub mod formats;
pub mod model;
pub mod planner;
pub mod product;
pub mod render;
pub mod scltl;

pub use executor::{check_word, run_episode, EpisodeTrace, Outcome, ReplanMode, RunConfig};
pub use model::{grid_world, Belief, Environment, GridMap, LabeledMdp};
pub use planner::{value_iteration, Plan, PlannerConfig, Policy, ValueTable};
pub use product::ProductAutomaton;
pub use scltl::{parse, Alphabet, Formula, Letter, TotalDfa};
