use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use scltl_planner::bench::{self, BenchSetup};
use scltl_planner::executor::{self, EpisodeTrace, Outcome, ReplanMode, RunConfig};
use scltl_planner::formats::{self, LoadedMap, ScenarioFile};
use scltl_planner::model::Environment;
use scltl_planner::planner::{self, PlannerConfig};
use scltl_planner::product::ProductAutomaton;
use scltl_planner::render;
use scltl_planner::scltl::{parse, Alphabet, TotalDfa};

/// Exit codes: 0 success, 2 schema/parse error, 3 infeasible task,
/// 4 step cap or non-convergence.
const EXIT_SCHEMA: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CAP: u8 = 4;

#[derive(Parser)]
#[command(
    name = "scltl-planner",
    version,
    about = "Plan and execute co-safe LTL missions on probabilistically labeled grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a formula to its total DFA.
    Compile(CompileArgs),
    /// Build the product for a map and run value iteration once.
    Plan(PlanArgs),
    /// Execute one episode with online sensing and replanning.
    Run(RunArgs),
    /// Run a Monte Carlo benchmark from a scenario file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    formula: String,
    /// Comma-separated observation names, e.g. A,B,C.
    #[arg(long)]
    alphabet: String,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, default_value_t = scltl_planner::scltl::DEFAULT_MAX_STATES)]
    max_states: usize,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    formula: String,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the product automaton for debugging.
    #[arg(long)]
    dump_product: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    formula: String,
    /// Samples a world from the belief when the map carries no truth.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ReplanArg::Trigger)]
    replan: ReplanArg,
    #[arg(long, default_value_t = 1)]
    h: u32,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long)]
    step_cap: Option<usize>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplanArg {
    Trigger,
    Every,
    Never,
}

impl From<ReplanArg> for ReplanMode {
    fn from(a: ReplanArg) -> ReplanMode {
        match a {
            ReplanArg::Trigger => ReplanMode::Trigger,
            ReplanArg::Every => ReplanMode::EveryStep,
            ReplanArg::Never => ReplanMode::Never,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(args) => cmd_compile(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let err = json!({"error": {"kind": error_kind(&e), "message": format!("{e:#}")}});
            eprintln!("{err}");
            ExitCode::from(error_code(&e))
        }
    }
}

/// Errors from parsing and validation map to the schema exit code; planner
/// non-convergence maps to the cap code.
fn error_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<planner::PlanError>()) {
        EXIT_CAP
    } else {
        EXIT_SCHEMA
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if e.chain().any(|c| c.is::<planner::PlanError>()) {
        "planner"
    } else if e.chain().any(|c| c.is::<formats::FormatError>()) {
        "schema"
    } else if e
        .chain()
        .any(|c| c.is::<scltl_planner::scltl::ParseError>())
    {
        "formula"
    } else {
        "error"
    }
}

fn parse_alphabet(spec: &str) -> Result<Alphabet> {
    let names: Vec<&str> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    Alphabet::new(names).map_err(|e| anyhow!(e))
}

fn compile_task(formula: &str, alphabet: &Alphabet, max_states: usize) -> Result<TotalDfa> {
    let f = parse(formula, alphabet).with_context(|| format!("parsing `{formula}`"))?;
    TotalDfa::compile_with_limit(alphabet, &f, max_states).map_err(|e| anyhow!(e))
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content).with_context(|| format!("writing {}", p.display()))?
        }
        None => println!("{content}"),
    }
    Ok(())
}

fn cmd_compile(args: CompileArgs) -> Result<u8> {
    let alphabet = parse_alphabet(&args.alphabet)?;
    let dfa = compile_task(&args.formula, &alphabet, args.max_states)?;
    if let Some(dot) = &args.dot {
        std::fs::write(dot, dfa.to_dot()).with_context(|| format!("writing {}", dot.display()))?;
    }
    let payload = serde_json::to_string_pretty(&dfa.to_json())?;
    match &args.json {
        Some(p) => {
            std::fs::write(p, &payload).with_context(|| format!("writing {}", p.display()))?
        }
        None if args.dot.is_none() => println!("{payload}"),
        None => {}
    }
    eprintln!(
        "compiled: {} states, accepting {}, trash {}",
        dfa.state_count(),
        (0..dfa.state_count())
            .filter(|&s| dfa.is_accepting(s))
            .count(),
        dfa.trash().map_or("none".to_string(), |t| t.to_string()),
    );
    Ok(0)
}

#[derive(Serialize)]
struct PlanOutput {
    values: Vec<f64>,
    policy: Vec<Option<String>>,
    min_nonterminal_value: Option<f64>,
    satisfying: bool,
    sweeps: usize,
    residual: f64,
}

fn cmd_plan(args: PlanArgs) -> Result<u8> {
    let map = formats::load_map(&args.map)?;
    let dfa = compile_task(
        &args.formula,
        &map.alphabet,
        scltl_planner::scltl::DEFAULT_MAX_STATES,
    )?;
    let cfg = PlannerConfig {
        gamma: args.gamma,
        beta: args.beta,
        epsilon: args.eps,
        ..Default::default()
    };
    let product = ProductAutomaton::build(&map.mdp, &map.belief, &dfa);
    if let Some(dump) = &args.dump_product {
        std::fs::write(dump, serde_json::to_string_pretty(&product.to_json())?)?;
    }
    let plan = planner::value_iteration(&product, &cfg)?;
    let start_sp = product.initial_state(map.start);
    let satisfying = planner::is_satisfying_from(&plan.values, &product, &cfg, start_sp);
    let output = PlanOutput {
        values: plan.values.as_slice().to_vec(),
        policy: plan
            .policy
            .as_slice()
            .iter()
            .map(|a| a.map(|a| map.mdp.action_name(a).to_string()))
            .collect(),
        min_nonterminal_value: planner::min_nonterminal(&plan.values, &product),
        satisfying,
        sweeps: plan.sweeps,
        residual: plan.residual,
    };
    write_or_print(&args.out, &serde_json::to_string_pretty(&output)?)?;
    if !satisfying {
        eprintln!(
            "{}",
            json!({"error": {"kind": "infeasible", "message": "no satisfying policy exists from the start state under the current belief"}})
        );
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

#[derive(Serialize)]
struct TraceOutput {
    outcome: Outcome,
    actions: Vec<String>,
    states: Vec<(u32, u32)>,
    letters: Vec<Vec<String>>,
    dfa_states: Vec<usize>,
    replans: Vec<ReplanOutput>,
    cost: f64,
}

#[derive(Serialize)]
struct ReplanOutput {
    t: usize,
    sweeps: usize,
    residual: f64,
}

fn trace_output(trace: &EpisodeTrace, map: &LoadedMap) -> TraceOutput {
    TraceOutput {
        outcome: trace.outcome,
        actions: trace
            .actions
            .iter()
            .map(|&a| map.mdp.action_name(a).to_string())
            .collect(),
        states: trace.states.iter().map(|&s| map.grid.cell_of(s)).collect(),
        letters: trace
            .letters
            .iter()
            .map(|&l| map.alphabet.letter_names(l))
            .collect(),
        dfa_states: trace.dfa_states.clone(),
        replans: trace
            .replans
            .iter()
            .map(|r| ReplanOutput {
                t: r.t,
                sweeps: r.sweeps,
                residual: r.residual,
            })
            .collect(),
        cost: trace.cost,
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let map = formats::load_map(&args.map)?;
    let dfa = compile_task(
        &args.formula,
        &map.alphabet,
        scltl_planner::scltl::DEFAULT_MAX_STATES,
    )?;
    let cfg = PlannerConfig {
        gamma: args.gamma,
        beta: args.beta,
        epsilon: args.eps,
        ..Default::default()
    };

    let env: Environment = match (&map.truth, args.seed) {
        (Some(truth), _) => Environment::new(truth.clone(), args.h),
        // No ground truth in the map: sample one world from the belief.
        // No repair here; the sampled world may be infeasible for the task.
        (None, Some(seed)) => bench::map_generate(&map.belief, &[], args.h, seed),
        (None, None) => {
            return Err(anyhow!(formats::FormatError::Schema {
                pointer: "/truth".into(),
                message: "map has no truth; pass --seed to sample a world from the belief".into(),
            }))
        }
    };

    let rc = RunConfig {
        step_cap: args
            .step_cap
            .unwrap_or_else(|| bench::default_step_cap(&map.mdp, &dfa)),
        replan: args.replan.into(),
    };
    let trace = executor::run_episode(&map.mdp, &map.belief, &env, &dfa, &cfg, &rc, map.start)?;

    let payload = serde_json::to_string_pretty(&trace_output(&trace, &map))?;
    write_or_print(&args.trace, &payload)?;
    if let Some(svg_path) = &args.svg {
        let svg = render::render_trace(&map.grid, &map.alphabet, &map.belief, Some(&trace));
        std::fs::write(svg_path, svg).with_context(|| format!("writing {}", svg_path.display()))?;
    }

    let certified = executor::check_word(&trace, &dfa);
    eprintln!(
        "outcome: {:?} ({} actions, {} replans, word certified: {certified})",
        trace.outcome,
        trace.len(),
        trace.replans.len()
    );
    match trace.outcome {
        Outcome::Accepted => Ok(0),
        Outcome::Infeasible => {
            eprintln!(
                "{}",
                json!({"error": {"kind": "infeasible", "message": "episode terminated: no satisfying policy exists under the revealed labels"}})
            );
            Ok(EXIT_INFEASIBLE)
        }
        Outcome::StepCapExceeded => {
            eprintln!(
                "{}",
                json!({"error": {"kind": "step_cap", "message": "episode hit the step cap before acceptance"}})
            );
            Ok(EXIT_CAP)
        }
    }
}

#[derive(Serialize)]
struct BenchOutput {
    scenario: ScenarioFile,
    report: bench::BenchReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<Vec<bench::ScalingRow>>,
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let loaded = formats::load_scenario(&args.scenario)?;
    let map = &loaded.map;
    let scenario = &loaded.scenario;
    let formula = parse(&scenario.formula, &map.alphabet)
        .with_context(|| format!("parsing `{}`", scenario.formula))?;
    let dfa = TotalDfa::compile(&map.alphabet, &formula).map_err(|e| anyhow!(e))?;
    let cfg = scenario.planner.to_config()?;

    let bench_spec = scenario.bench.as_ref().ok_or_else(|| {
        anyhow!(formats::FormatError::Schema {
            pointer: "/bench".into(),
            message: "scenario has no bench block".into(),
        })
    })?;

    // Worlds must realize every positively required observation somewhere;
    // candidates come from the belief's support.
    let required: Vec<_> = formula
        .positive_observations()
        .into_iter()
        .map(|o| (o, bench::candidates_from_belief(&map.belief, o)))
        .collect();
    let setup = BenchSetup {
        mdp: &map.mdp,
        belief: &map.belief,
        dfa: &dfa,
        start: map.start,
        required: &required,
        h: scenario.run.h,
    };
    let report = bench::run_benchmark(
        &setup,
        &cfg,
        bench_spec.worlds,
        args.seed,
        &bench_spec.strategies,
        bench_spec.step_cap,
    );

    for s in &report.per_strategy {
        eprintln!(
            "{:?}: {}/{} accepted (mean {:?}, median {:?}, sd {:?}), {} cap, {} infeasible, {} errors",
            s.strategy,
            s.successes,
            s.worlds,
            s.mean_length,
            s.median_length,
            s.sd_length,
            s.step_cap_failures,
            s.infeasible_failures,
            s.errors
        );
    }

    let scaling = scenario.scaling.as_ref().map(|spec| {
        bench::scaling_table(&spec.sizes, &map.alphabet, &formula, &spec.fractions, &cfg)
    });
    if let Some(rows) = &scaling {
        for r in rows {
            eprintln!(
                "{}x{} B={:.2}: product {} states / {} edges, build {:.3}s, plan {:.3}s ({} sweeps)",
                r.width, r.height, r.uncertain_fraction, r.product_states, r.product_edges,
                r.build_secs, r.plan_secs, r.sweeps
            );
        }
    }

    let output = BenchOutput {
        scenario: scenario.clone(),
        report,
        scaling,
    };
    let payload = serde_json::to_string_pretty(&output)?;
    match &args.out {
        Some(p) => {
            std::fs::write(p, &payload).with_context(|| format!("writing {}", p.display()))?
        }
        None => println!("{payload}"),
    }
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, report_csv(&output.report))
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    Ok(0)
}

fn report_csv(report: &bench::BenchReport) -> String {
    let mut out = String::from(
        "strategy,worlds,successes,step_cap_failures,infeasible_failures,errors,mean_length,median_length,sd_length,total_replans\n",
    );
    for s in &report.per_strategy {
        out.push_str(&format!(
            "{:?},{},{},{},{},{},{},{},{},{}\n",
            s.strategy,
            s.worlds,
            s.successes,
            s.step_cap_failures,
            s.infeasible_failures,
            s.errors,
            s.mean_length.map_or(String::new(), |v| format!("{v}")),
            s.median_length.map_or(String::new(), |v| format!("{v}")),
            s.sd_length.map_or(String::new(), |v| format!("{v}")),
            s.total_replans,
        ));
    }
    out
}
