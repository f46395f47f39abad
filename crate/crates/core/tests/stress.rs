//! Heavier randomized cross-validation, excluded from the default run.
//! Execute with `cargo test --test stress -- --ignored --nocapture`.

mod common;

use common::{assert_dfa_matches_oracle, gen_formula};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scltl_planner::scltl::{Alphabet, TotalDfa};

/// Depth-5 formulas, exhaustive words up to length 5, three observations.
#[test]
#[ignore]
fn deep_formulas_agree_with_the_oracle() {
    let mut compiled = 0usize;
    let mut capped = 0usize;
    let mut max_states = 0usize;
    for seed in 0..2000u64 {
        let n_obs = 1 + (seed % 3) as usize;
        let alphabet = Alphabet::new((0..n_obs).map(|i| format!("o{i}"))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x57E55 + seed);
        let f = gen_formula(&mut rng, n_obs, 5);
        match TotalDfa::compile(&alphabet, &f) {
            Ok(dfa) => {
                max_states = max_states.max(dfa.state_count());
                assert_dfa_matches_oracle(&f, &dfa, n_obs, 5);
                compiled += 1;
            }
            Err(e) => {
                capped += 1;
                println!("seed {seed}: {e}");
            }
        }
    }
    println!("{compiled} compiled ok (largest automaton: {max_states} states), {capped} hit the cap");
    assert_eq!(capped, 0, "state cap reached on depth-5 formulas");
}

/// The shipped mission formulas over their full four-observation alphabet,
/// checked exhaustively against the oracle on all words up to length four.
#[test]
#[ignore]
fn shipped_formulas_agree_with_the_oracle() {
    let alphabet = Alphabet::new(["A", "B", "C", "D"]).unwrap();
    for text in [
        "(!C U B) & F C & F A & (!D U A) & (!D U C)",
        "F (A & F (B & F C))",
        "F A & F B & F C",
        "(!C U B) & F C",
        "!D U (A & F (B & !D U C))",
    ] {
        let f = scltl_planner::scltl::parse(text, &alphabet).unwrap();
        let dfa = TotalDfa::compile(&alphabet, &f).unwrap();
        let words = assert_dfa_matches_oracle(&f, &dfa, 4, 4);
        println!("{text}: {} states, {words} words checked", dfa.state_count());
    }
}
