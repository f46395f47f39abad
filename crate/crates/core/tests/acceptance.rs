//! Acceptance suite. Each test implements one numbered criterion at its
//! stated scale and tolerance and prints one PASS line; run with
//! `cargo test --test acceptance -- --nocapture` to see them.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    assert_dfa_matches_oracle, enumerate_policies, fixture, gen_formula, gen_small_instance,
};
use scltl_planner::bench::{self, BenchSetup};
use scltl_planner::executor::{check_word, run_episode, Outcome, ReplanMode, RunConfig};
use scltl_planner::formats;
use scltl_planner::model::{grid_world, Belief};
use scltl_planner::planner::{self, PlannerConfig};
use scltl_planner::product::ProductAutomaton;
use scltl_planner::scltl::{parse, Alphabet, Letter, ObsId, TotalDfa};

const ORDERED_VISIT: &str = "F (A & F (B & F C))";
const PICKUP_DELIVERY: &str = "F (Pickup & F Delivery)";
const COVERAGE: &str = "F A & F B & F C";
const CASE_STUDY: &str = "(!C U B) & F C & F A & (!D U A) & (!D U C)";

fn abc() -> Alphabet {
    Alphabet::new(["A", "B", "C"]).unwrap()
}

/// Criterion 1: for at least 500 generated formulas (alphabets of up to three
/// observations, nesting depth up to four), automaton acceptance matches the
/// independent good-prefix oracle on every word of length up to six.
#[test]
fn criterion_01_dfa_oracle_suite() {
    let started = Instant::now();
    let mut formulas = 0usize;
    let mut words = 0usize;
    let mut seed = 0u64;
    while formulas < 501 {
        let n_obs = 1 + (formulas % 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seed += 1;
        let f = gen_formula(&mut rng, n_obs, 4);
        let alphabet = Alphabet::new((0..n_obs).map(|i| format!("o{i}"))).unwrap();
        let dfa = match TotalDfa::compile(&alphabet, &f) {
            Ok(d) => d,
            Err(e) => panic!("formula {formulas} failed to compile: {e}"),
        };
        words += assert_dfa_matches_oracle(&f, &dfa, n_obs, 6);
        formulas += 1;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "took {elapsed:?}, budget is one minute"
    );
    println!("criterion 1 PASS - {formulas} formulas, {words} words, 0 mismatches, {elapsed:?}");
}

/// Criterion 2: the ordered-visit task on an open 10x10 grid yields exactly
/// 400 product states, and the motion model has exactly 460 transitions.
#[test]
fn criterion_02_product_identity() {
    let (_, mdp) = grid_world(10, 10, &BTreeSet::new()).unwrap();
    assert_eq!(mdp.n_states(), 100);
    assert_eq!(mdp.transition_count(), 460);

    let alphabet = abc();
    let f = parse(ORDERED_VISIT, &alphabet).unwrap();
    let dfa = TotalDfa::compile(&alphabet, &f).unwrap();
    assert_eq!(dfa.state_count(), 4);

    let belief = bench::uncertain_belief(100, 3, 1.0);
    let product = ProductAutomaton::build(&mdp, &belief, &dfa);
    assert_eq!(product.state_count(), 400);
    assert_eq!(product.state_count(), mdp.n_states() * dfa.state_count());
    println!(
        "criterion 2 PASS - |S_p| = 400, M transitions = 460 (product edges: {})",
        product.edge_count()
    );
}

/// Criterion 3: on 100 random products with at most 12 non-terminal states
/// and at most 3 actions, the exact evaluated value of the value-iteration
/// policy is within 10 * epsilon of the best enumerated deterministic policy
/// at every state.
#[test]
fn criterion_03_value_iteration_oracle() {
    let started = Instant::now();
    let cfg = PlannerConfig {
        gamma: 0.95,
        epsilon: 1e-8,
        ..PlannerConfig::default()
    };
    let slack = cfg.threshold_slack();
    let mut instances = 0usize;
    let mut policies_evaluated = 0usize;
    for seed in 0..100u64 {
        let inst = gen_small_instance(seed.wrapping_mul(77).wrapping_add(5), 12);
        let p = &inst.product;
        let plan = planner::value_iteration(p, &cfg).unwrap();
        let vi_exact = planner::exact_policy_value(p, &plan.policy, &cfg).unwrap();

        let mut best = vec![f64::NEG_INFINITY; p.state_count()];
        for policy in enumerate_policies(p) {
            let v = planner::exact_policy_value(p, &policy, &cfg).unwrap();
            policies_evaluated += 1;
            for (sp, b) in best.iter_mut().enumerate() {
                *b = b.max(v.get(sp));
            }
        }
        for sp in (0..p.state_count()).filter(|&sp| !p.is_terminal(sp)) {
            if best[sp] == f64::NEG_INFINITY {
                continue;
            }
            let gap = best[sp] - vi_exact.get(sp);
            assert!(
                gap <= slack,
                "seed {seed}, state {sp}: gap {gap} beyond {slack}"
            );
        }
        instances += 1;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "took {elapsed:?}, budget is five minutes"
    );
    println!(
        "criterion 3 PASS - {instances} products, {policies_evaluated} policies enumerated, {elapsed:?}"
    );
}

/// Criterion 4: on feasible instances, the minimum reachable non-terminal
/// value clears the floor by more than 10 * epsilon; on infeasible ones it
/// equals the floor within 10 * epsilon.
#[test]
fn criterion_04_satisfiability_threshold() {
    let cfg = PlannerConfig::default();
    let slack = cfg.threshold_slack();
    let floor = cfg.value_floor();
    let mut feasible_checked = 0usize;
    let mut infeasible_checked = 0usize;

    let mut check = |p: &ProductAutomaton, start_sp: usize| {
        let plan = planner::value_iteration(p, &cfg).unwrap();
        let min = planner::min_reachable_nonterminal(&plan.values, p, start_sp);
        let feasible = p.feasibility_check(start_sp);
        match (feasible, min) {
            (true, Some(min)) => {
                assert!(min > floor + slack, "feasible instance has min {min}");
                feasible_checked += 1;
            }
            (true, None) => feasible_checked += 1, // immediate acceptance
            (false, Some(min)) => {
                assert!(
                    (min - floor).abs() <= slack,
                    "infeasible instance has min {min}"
                );
                infeasible_checked += 1;
            }
            (false, None) => infeasible_checked += 1,
        }
        assert_eq!(
            feasible,
            planner::is_satisfying_from(&plan.values, p, &cfg, start_sp),
            "threshold test disagrees with graph reachability"
        );
    };

    // Feasible: the shipped case study under its prior.
    let map = formats::load_map(&fixture("case_study_5x5.json")).unwrap();
    let f1 = parse(CASE_STUDY, &map.alphabet).unwrap();
    let dfa1 = TotalDfa::compile(&map.alphabet, &f1).unwrap();
    let p1 = ProductAutomaton::build(&map.mdp, &map.belief, &dfa1);
    check(&p1, p1.initial_state(map.start));

    // Feasible: seeded pickup/delivery products on the benchmark belief.
    let bmap = formats::load_map(&fixture("bench_6x6.json")).unwrap();
    let f3 = parse(PICKUP_DELIVERY, &bmap.alphabet).unwrap();
    let dfa3 = TotalDfa::compile(&bmap.alphabet, &f3).unwrap();
    let p3 = ProductAutomaton::build(&bmap.mdp, &bmap.belief, &dfa3);
    check(&p3, p3.initial_state(bmap.start));

    // Feasible: fully revealed ordered-visit worlds.
    let (grid, mdp) = grid_world(5, 5, &BTreeSet::new()).unwrap();
    let alphabet = abc();
    let f2 = parse(ORDERED_VISIT, &alphabet).unwrap();
    let dfa2 = TotalDfa::compile(&alphabet, &f2).unwrap();
    let mut truth = vec![Letter::EMPTY; 25];
    truth[grid.state_at((4, 0)).unwrap()] = Letter(0b001);
    truth[grid.state_at((4, 4)).unwrap()] = Letter(0b010);
    truth[grid.state_at((0, 4)).unwrap()] = Letter(0b100);
    let known = Belief::certain(3, &truth);
    let p2 = ProductAutomaton::build(&mdp, &known, &dfa2);
    check(&p2, p2.initial_state(grid.state_at((0, 0)).unwrap()));

    // Infeasible: a reach task with no positive mass anywhere.
    let hollow = Belief::empty_labels(3, 25);
    let p_inf = ProductAutomaton::build(&mdp, &hollow, &dfa2);
    check(&p_inf, p_inf.initial_state(0));

    // Infeasible: every letter violates the task immediately.
    let a_everywhere = Belief::certain(2, &[Letter(0b01); 4]);
    let (_, mdp2) = grid_world(2, 2, &BTreeSet::new()).unwrap();
    let guard_alphabet = Alphabet::new(["A", "B"]).unwrap();
    let guard = parse("!A U B", &guard_alphabet).unwrap();
    let dfa_g = TotalDfa::compile(&guard_alphabet, &guard).unwrap();
    let p_g = ProductAutomaton::build(&mdp2, &a_everywhere, &dfa_g);
    check(&p_g, p_g.initial_state(0));

    // Seeded random instances, classified by graph reachability.
    for seed in 0..40u64 {
        let inst = gen_small_instance(seed.wrapping_add(900), 12);
        let start = (0..inst.product.state_count())
            .find(|&sp| !inst.product.is_terminal(sp))
            .unwrap();
        check(&inst.product, start);
    }

    assert!(feasible_checked >= 3 && infeasible_checked >= 2);
    println!(
        "criterion 4 PASS - {feasible_checked} feasible and {infeasible_checked} infeasible instances"
    );
}

fn bench_setup_6x6() -> (formats::LoadedMap, TotalDfa, Vec<(ObsId, Vec<usize>)>) {
    let map = formats::load_map(&fixture("bench_6x6.json")).unwrap();
    let f = parse(PICKUP_DELIVERY, &map.alphabet).unwrap();
    let dfa = TotalDfa::compile(&map.alphabet, &f).unwrap();
    let required = f
        .positive_observations()
        .into_iter()
        .map(|o| (o, bench::candidates_from_belief(&map.belief, o)))
        .collect();
    (map, dfa, required)
}

/// Criterion 5: 200 seeded 6x6 pickup/delivery worlds, trigger mode: all 200
/// accepted per word replay, no trash visits, and the uncertain set strictly
/// shrinks between consecutive replans.
#[test]
fn criterion_05_desk_scale_termination() {
    let started = Instant::now();
    let (map, dfa, required) = bench_setup_6x6();
    let cfg = PlannerConfig::default();
    let step_cap = bench::default_step_cap(&map.mdp, &dfa);
    let mut accepted = 0usize;
    for world in 0..200u64 {
        let env = bench::map_generate(&map.belief, &required, 1, 0xC5_0000 + world);
        let trace = run_episode(
            &map.mdp,
            &map.belief,
            &env,
            &dfa,
            &cfg,
            &RunConfig {
                step_cap,
                replan: ReplanMode::Trigger,
            },
            map.start,
        )
        .unwrap();
        assert_eq!(
            trace.outcome,
            Outcome::Accepted,
            "world {world} not accepted"
        );
        assert!(check_word(&trace, &dfa), "world {world} failed word replay");
        assert!(!trace.visited_trash(&dfa), "world {world} visited trash");
        for pair in trace.replans.windows(2) {
            let (t1, t2) = (pair[0].t, pair[1].t);
            assert!(
                trace.uncertain_sizes[t2] < trace.uncertain_sizes[t1],
                "world {world}: uncertain set did not shrink between replans"
            );
        }
        accepted += 1;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "took {elapsed:?}, budget is five minutes"
    );
    println!("criterion 5 PASS - {accepted}/200 accepted, 0 trash visits, {elapsed:?}");
}

/// Criterion 6: on the same 200 worlds, the no-replanning baseline wins
/// strictly fewer worlds than trigger mode whenever some world's truth
/// deviates from the belief's optimistic mode along the baseline trajectory;
/// trigger-mode length statistics are reported (not asserted).
#[test]
fn criterion_06_benchmark_dominance() {
    let (map, dfa, required) = bench_setup_6x6();
    let setup = BenchSetup {
        mdp: &map.mdp,
        belief: &map.belief,
        dfa: &dfa,
        start: map.start,
        required: &required,
        h: 1,
    };
    let cfg = PlannerConfig::default();
    let report = bench::run_benchmark(
        &setup,
        &cfg,
        200,
        0xC6_0000,
        &[ReplanMode::Trigger, ReplanMode::Never],
        None,
    );
    let trigger = &report.per_strategy[0];
    let never = &report.per_strategy[1];
    assert_eq!(trigger.successes, 200);
    assert!(
        never.successes <= trigger.successes,
        "replanning dominance violated"
    );

    // Deviation check: does some world's truth differ, along the baseline's
    // realized trajectory, from the row's highest-probability letter (ties
    // broken toward the labeled letter the static plan bets on)?
    let mode_of = |x: usize| -> Letter {
        map.belief
            .support(x)
            .iter()
            .cloned()
            .max_by(|(la, pa), (lb, pb)| {
                pa.total_cmp(pb)
                    .then_with(|| (la.0.count_ones()).cmp(&lb.0.count_ones()))
            })
            .map(|(l, _)| l)
            .unwrap()
    };
    let mut deviation_worlds = 0usize;
    for r in report
        .world_results
        .iter()
        .filter(|r| r.strategy == ReplanMode::Never)
    {
        let env = bench::map_generate(&map.belief, &required, 1, r.seed);
        let mut x = map.start;
        let mut deviated = env.truth(x) != mode_of(x);
        for &a in &r.actions {
            x = map.mdp.successor(x, a).unwrap();
            deviated |= env.truth(x) != mode_of(x);
        }
        deviation_worlds += usize::from(deviated);
    }
    if deviation_worlds > 0 {
        assert!(
            never.successes < trigger.successes,
            "{deviation_worlds} deviating worlds but no strict dominance"
        );
    }
    println!(
        "criterion 6 PASS - trigger {}/200 (mean {:.2?} median {:.2?} sd {:.2?}), never {}/200, {} deviating worlds",
        trigger.successes,
        trigger.mean_length,
        trigger.median_length,
        trigger.sd_length,
        never.successes,
        deviation_worlds
    );
}

/// Criterion 7: the shipped 5x5 case study completes with a certified word in
/// which no D-letter precedes the discharge of both the A and C obligations.
#[test]
fn criterion_07_case_study() {
    let started = Instant::now();
    let map = formats::load_map(&fixture("case_study_5x5.json")).unwrap();
    let f = parse(CASE_STUDY, &map.alphabet).unwrap();
    let dfa = TotalDfa::compile(&map.alphabet, &f).unwrap();
    let env = map.environment(1).unwrap();
    let trace = run_episode(
        &map.mdp,
        &map.belief,
        &env,
        &dfa,
        &PlannerConfig::default(),
        &RunConfig::default(),
        map.start,
    )
    .unwrap();
    assert_eq!(trace.outcome, Outcome::Accepted);
    assert!(check_word(&trace, &dfa), "word replay rejected the episode");

    let first = |name: &str| {
        let o = map.alphabet.id(name).unwrap();
        trace.letters.iter().position(|l| l.contains(o))
    };
    let first_a = first("A").expect("A reached");
    let first_c = first("C").expect("C reached");
    if let Some(first_d) = first("D") {
        assert!(
            first_d > first_a && first_d > first_c,
            "a D-letter precedes the A/C obligations"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 10,
        "took {elapsed:?}, budget is ten seconds"
    );
    println!(
        "criterion 7 PASS - accepted in {} actions, {} replans, {elapsed:?}",
        trace.len(),
        trace.replans.len()
    );
}

/// Criterion 8: product build and single-plan times are nondecreasing in the
/// product size across 10x10, 20x20 and 30x30 grids under the ordered-visit
/// task, and the product has exactly 4 states per cell. Seconds are reported,
/// not asserted.
#[test]
fn criterion_08_scaling_trend() {
    let alphabet = abc();
    let f = parse(ORDERED_VISIT, &alphabet).unwrap();
    let sizes = [(10, 10), (20, 20), (30, 30)];
    let mut rows =
        bench::scaling_table(&sizes, &alphabet, &f, &[1.0], &PlannerConfig::default());
    // A second pass and a pointwise minimum smooth out scheduler noise from
    // concurrently running tests; the true costs differ by ~9x per step.
    let second = bench::scaling_table(&sizes, &alphabet, &f, &[1.0], &PlannerConfig::default());
    for (r, s) in rows.iter_mut().zip(&second) {
        r.build_secs = r.build_secs.min(s.build_secs);
        r.plan_secs = r.plan_secs.min(s.plan_secs);
    }
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.dfa_states, 4);
        assert_eq!(r.product_states, r.mdp_states * 4);
    }
    for w in rows.windows(2) {
        assert!(w[1].product_states > w[0].product_states);
        assert!(
            w[1].build_secs >= w[0].build_secs,
            "build time decreased: {} -> {}",
            w[0].build_secs,
            w[1].build_secs
        );
        assert!(
            w[1].plan_secs >= w[0].plan_secs,
            "plan time decreased: {} -> {}",
            w[0].plan_secs,
            w[1].plan_secs
        );
    }
    for r in &rows {
        println!(
            "criterion 8 report - {}x{}: |S_p| = {}, build {:.4}s, plan {:.4}s ({} sweeps)",
            r.width, r.height, r.product_states, r.build_secs, r.plan_secs, r.sweeps
        );
    }
    println!("criterion 8 PASS - times nondecreasing in product size");
}

/// Criterion 9: for a 10x10 grid under the three-region coverage task, the
/// product state count is exactly 800 at every uncertainty fraction.
#[test]
fn criterion_09_uncertainty_invariance() {
    let alphabet = abc();
    let f = parse(COVERAGE, &alphabet).unwrap();
    let dfa = TotalDfa::compile(&alphabet, &f).unwrap();
    assert_eq!(dfa.state_count(), 8);
    let rows = bench::scaling_table(
        &[(10, 10)],
        &alphabet,
        &f,
        &[0.25, 0.5, 0.75, 1.0],
        &PlannerConfig::default(),
    );
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.product_states, 800, "fraction {}", r.uncertain_fraction);
        assert_eq!(r.product_states, r.mdp_states * r.dfa_states);
    }
    println!(
        "criterion 9 PASS - |S_p| = 800 across fractions {:?} (edges {:?})",
        rows.iter()
            .map(|r| r.uncertain_fraction)
            .collect::<Vec<_>>(),
        rows.iter().map(|r| r.product_edges).collect::<Vec<_>>()
    );
}

/// Criterion 10: fifty random reveal sequences on 4x4 worlds; incremental
/// edge refresh is bit-identical to a full rebuild after every batch.
#[test]
fn criterion_10_incremental_equivalence() {
    let alphabet = Alphabet::new(["A", "B"]).unwrap();
    let mut sequences = 0usize;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAA00 + seed);
        let (_, mdp) = grid_world(4, 4, &BTreeSet::new()).unwrap();
        let rows = (0..16)
            .map(|_| {
                let k = rng.gen_range(1..=3usize);
                let mut letters: Vec<u16> = vec![0, 1, 2, 3];
                for i in 0..k {
                    let j = rng.gen_range(i..4);
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
        let mut belief = Belief::new(2, rows).unwrap();
        let truth: Vec<Letter> = (0..16).map(|_| Letter(rng.gen_range(0..4u16))).collect();

        let formula = gen_formula(&mut rng, 2, 3);
        let dfa = match TotalDfa::compile(&alphabet, &formula) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let mut incremental = ProductAutomaton::build(&mdp, &belief, &dfa);

        let mut order: Vec<usize> = (0..16).collect();
        for i in 0..16 {
            let j = rng.gen_range(i..16);
            order.swap(i, j);
        }
        for batch in order.chunks(rng.gen_range(1..=4)) {
            let observations: Vec<(usize, Letter)> = batch.iter().map(|&x| (x, truth[x])).collect();
            let changed = belief.update_map(&observations).unwrap();
            incremental.refresh_edges(&mdp, &belief, &dfa, &changed);
            let rebuilt = ProductAutomaton::build(&mdp, &belief, &dfa);
            assert_eq!(
                incremental, rebuilt,
                "seed {seed}: refresh differs from rebuild"
            );
        }
        sequences += 1;
    }
    assert!(
        sequences >= 50,
        "only {sequences} reveal sequences executed"
    );
    println!("criterion 10 PASS - {sequences} reveal sequences, all bit-identical");
}

/// The full motion-model identity behind criterion 2's transition count,
/// restated for the record on the exact grid the scaling rows use.
#[test]
fn criterion_02b_model_edge_convention() {
    let (_, mdp) = grid_world(10, 10, &BTreeSet::new()).unwrap();
    let stay: usize = 100;
    let cardinal = 2 * (2 * 10 * 10 - 10 - 10);
    assert_eq!(mdp.transition_count(), stay + cardinal);
    println!("criterion 2 note - edge convention: feasible (state, action) pairs");
}

/// `LabeledMdp` sanity used across criteria: deterministic sensing.
#[test]
fn sensing_is_deterministic_for_fixed_world() {
    let (map, dfa, required) = bench_setup_6x6();
    let env = bench::map_generate(&map.belief, &required, 1, 1234);
    let env2 = bench::map_generate(&map.belief, &required, 1, 1234);
    assert_eq!(env, env2);
    let _ = dfa;
    let obs1 = env.sense(&map.mdp, map.start);
    let obs2 = env.sense(&map.mdp, map.start);
    assert_eq!(obs1, obs2);
}

/// Helper used by several criteria, asserted once here: generated instances
/// stay within the documented probability floor.
#[test]
fn generated_beliefs_keep_probabilities_above_one_eighth() {
    for seed in 0..20u64 {
        let inst = gen_small_instance(seed, 12);
        let belief: &Belief = &inst.belief;
        for x in 0..belief.n_states() {
            for &(_, p) in belief.support(x) {
                assert!(p >= 0.125 - 1e-12);
            }
        }
    }
}
