//! C ABI for the planner: opaque session handles, status codes, and JSON
//! strings across the boundary.
//!
//! Conventions: every function that can fail returns an [`SclpStatus`];
//! output strings are allocated here and must be released with
//! [`sclp_string_free`]; a human-readable description of the most recent
//! failure on the calling thread is available via
//! [`sclp_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use scltl_planner::bench;
use scltl_planner::executor::{self, Outcome, ReplanMode, RunConfig};
use scltl_planner::formats::{self, LoadedMap};
use scltl_planner::model::Environment;
use scltl_planner::planner::{self, PlannerConfig};
use scltl_planner::product::ProductAutomaton;
use scltl_planner::scltl::{parse, Alphabet, TotalDfa, DEFAULT_MAX_STATES};

/// Result of a C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SclpStatus {
    Ok = 0,
    /// A required pointer was null or an argument was out of range.
    InvalidArgument = 1,
    /// The formula text did not parse.
    FormulaError = 2,
    /// The map or scenario JSON failed validation.
    SchemaError = 3,
    /// Automaton compilation failed (state cap exceeded).
    CompileError = 4,
    /// Value iteration failed to converge.
    PlanError = 5,
    /// The task is not satisfiable under the current belief (a trace or plan
    /// JSON is still written when one exists).
    Infeasible = 6,
    /// The episode hit its step cap before acceptance (trace still written).
    StepCapExceeded = 7,
    /// The episode failed for another reason.
    ExecError = 8,
    /// An internal panic was caught.
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg.replace('\0', " ")).unwrap();
    });
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sclp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn sclp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned through an out-parameter of this
/// library, or null.
#[no_mangle]
pub unsafe extern "C" fn sclp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SclpStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        return Err(SclpStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SclpStatus::InvalidArgument
    })
}

fn write_out_string(out: *mut *mut c_char, payload: String) -> SclpStatus {
    let cstring = match CString::new(payload) {
        Ok(s) => s,
        Err(_) => {
            set_error("output contained an interior NUL byte");
            return SclpStatus::Panic;
        }
    };
    unsafe { *out = cstring.into_raw() };
    SclpStatus::Ok
}

fn guarded(f: impl FnOnce() -> SclpStatus) -> SclpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SclpStatus::Panic
        }
    }
}

/// Compiles a formula over a comma-separated alphabet and writes the
/// automaton as JSON to `out_json`.
///
/// # Safety
/// `formula` and `alphabet_csv` must be valid NUL-terminated strings and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sclp_compile(
    formula: *const c_char,
    alphabet_csv: *const c_char,
    out_json: *mut *mut c_char,
) -> SclpStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("out_json is null");
            return SclpStatus::InvalidArgument;
        }
        let formula = match read_str(formula, "formula") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let alphabet_csv = match read_str(alphabet_csv, "alphabet") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let names: Vec<&str> = alphabet_csv
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let alphabet = match Alphabet::new(names) {
            Ok(a) => a,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::SchemaError;
            }
        };
        let f = match parse(formula, &alphabet) {
            Ok(f) => f,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::FormulaError;
            }
        };
        let dfa = match TotalDfa::compile_with_limit(&alphabet, &f, DEFAULT_MAX_STATES) {
            Ok(d) => d,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::CompileError;
            }
        };
        match serde_json_string(&dfa.to_json()) {
            Ok(s) => write_out_string(out_json, s),
            Err(st) => st,
        }
    })
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Result<String, SclpStatus> {
    serde_json::to_string_pretty(value).map_err(|e| {
        set_error(e.to_string());
        SclpStatus::Panic
    })
}

/// A loaded map plus compiled task, reusable across plans and runs.
pub struct SclpSession {
    map: LoadedMap,
    dfa: TotalDfa,
    cfg: PlannerConfig,
}

/// Creates a session from map JSON and a formula over the map's alphabet.
/// Pass non-finite values to use the defaults (gamma 0.99, beta 1, eps 0.01).
///
/// # Safety
/// `map_json` and `formula` must be valid NUL-terminated strings; `out` must
/// be a valid pointer. The returned session must be released with
/// [`sclp_session_free`].
#[no_mangle]
pub unsafe extern "C" fn sclp_session_new(
    map_json: *const c_char,
    formula: *const c_char,
    gamma: f64,
    beta: f64,
    epsilon: f64,
    out: *mut *mut SclpSession,
) -> SclpStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return SclpStatus::InvalidArgument;
        }
        *out = ptr::null_mut();
        let map_json = match read_str(map_json, "map_json") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let formula = match read_str(formula, "formula") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let map = match formats::parse_map_str(map_json) {
            Ok(m) => m,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::SchemaError;
            }
        };
        let f = match parse(formula, &map.alphabet) {
            Ok(f) => f,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::FormulaError;
            }
        };
        let dfa = match TotalDfa::compile(&map.alphabet, &f) {
            Ok(d) => d,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::CompileError;
            }
        };
        let defaults = PlannerConfig::default();
        let cfg = PlannerConfig {
            gamma: if gamma.is_finite() {
                gamma
            } else {
                defaults.gamma
            },
            beta: if beta.is_finite() {
                beta
            } else {
                defaults.beta
            },
            epsilon: if epsilon.is_finite() {
                epsilon
            } else {
                defaults.epsilon
            },
            ..defaults
        };
        if !(0.0..1.0).contains(&cfg.gamma) || cfg.beta <= 0.0 || cfg.epsilon <= 0.0 {
            set_error("gamma must be in [0,1), beta and epsilon positive");
            return SclpStatus::InvalidArgument;
        }
        *out = Box::into_raw(Box::new(SclpSession { map, dfa, cfg }));
        SclpStatus::Ok
    })
}

/// Releases a session.
///
/// # Safety
/// `session` must have come from [`sclp_session_new`] (or be null) and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sclp_session_free(session: *mut SclpSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Runs value iteration on the session's product and writes the plan JSON
/// (values, policy, satisfiability, sweeps) to `out_json`. Returns
/// `Infeasible` when no satisfying policy exists from the start state; the
/// JSON is still written in that case.
///
/// # Safety
/// `session` must be a live session pointer and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn sclp_session_plan(
    session: *mut SclpSession,
    out_json: *mut *mut c_char,
) -> SclpStatus {
    guarded(|| {
        if session.is_null() || out_json.is_null() {
            set_error("session or out_json is null");
            return SclpStatus::InvalidArgument;
        }
        let s = &*session;
        let product = ProductAutomaton::build(&s.map.mdp, &s.map.belief, &s.dfa);
        let plan = match planner::value_iteration(&product, &s.cfg) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::PlanError;
            }
        };
        let start_sp = product.initial_state(s.map.start);
        let satisfying = planner::is_satisfying_from(&plan.values, &product, &s.cfg, start_sp);
        let payload = serde_json::json!({
            "values": plan.values.as_slice(),
            "policy": plan.policy.as_slice().iter()
                .map(|a| a.map(|a| s.map.mdp.action_name(a).to_string()))
                .collect::<Vec<_>>(),
            "min_nonterminal_value": planner::min_nonterminal(&plan.values, &product),
            "satisfying": satisfying,
            "sweeps": plan.sweeps,
            "residual": plan.residual,
        });
        let status = match serde_json_string(&payload) {
            Ok(text) => write_out_string(out_json, text),
            Err(st) => return st,
        };
        if status == SclpStatus::Ok && !satisfying {
            set_error("no satisfying policy exists from the start state");
            return SclpStatus::Infeasible;
        }
        status
    })
}

/// Executes one episode and writes the trace JSON to `out_json`.
///
/// `replan`: 0 trigger, 1 every step, 2 never. `h` is the sensor range.
/// `step_cap` of 0 uses the default (four times the product size). When the
/// map has no ground truth, a world is sampled from the belief with `seed`
/// (`has_seed` must then be true). Returns `Infeasible` or `StepCapExceeded`
/// for failed episodes; the trace JSON is still written.
///
/// # Safety
/// `session` must be a live session pointer and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn sclp_session_run(
    session: *mut SclpSession,
    replan: i32,
    h: u32,
    step_cap: usize,
    seed: u64,
    has_seed: bool,
    out_json: *mut *mut c_char,
) -> SclpStatus {
    guarded(|| {
        if session.is_null() || out_json.is_null() {
            set_error("session or out_json is null");
            return SclpStatus::InvalidArgument;
        }
        let s = &*session;
        let replan = match replan {
            0 => ReplanMode::Trigger,
            1 => ReplanMode::EveryStep,
            2 => ReplanMode::Never,
            other => {
                set_error(format!("invalid replan mode {other}"));
                return SclpStatus::InvalidArgument;
            }
        };
        let env: Environment = match (&s.map.truth, has_seed) {
            (Some(truth), _) => Environment::new(truth.clone(), h),
            (None, true) => bench::map_generate(&s.map.belief, &[], h, seed),
            (None, false) => {
                set_error("map has no truth; pass a seed to sample a world");
                return SclpStatus::InvalidArgument;
            }
        };
        let rc = RunConfig {
            step_cap: if step_cap == 0 {
                bench::default_step_cap(&s.map.mdp, &s.dfa)
            } else {
                step_cap
            },
            replan,
        };
        let trace = match executor::run_episode(
            &s.map.mdp,
            &s.map.belief,
            &env,
            &s.dfa,
            &s.cfg,
            &rc,
            s.map.start,
        ) {
            Ok(t) => t,
            Err(e) => {
                set_error(e.to_string());
                return SclpStatus::ExecError;
            }
        };
        let payload = serde_json::json!({
            "outcome": trace.outcome,
            "actions": trace.actions.iter()
                .map(|&a| s.map.mdp.action_name(a).to_string())
                .collect::<Vec<_>>(),
            "states": trace.states.iter().map(|&x| s.map.grid.cell_of(x)).collect::<Vec<_>>(),
            "letters": trace.letters.iter()
                .map(|&l| s.map.alphabet.letter_names(l))
                .collect::<Vec<_>>(),
            "dfa_states": trace.dfa_states,
            "replans": trace.replans.iter()
                .map(|r| serde_json::json!({"t": r.t, "sweeps": r.sweeps, "residual": r.residual}))
                .collect::<Vec<_>>(),
            "cost": trace.cost,
            "word_certified": executor::check_word(&trace, &s.dfa),
        });
        let status = match serde_json_string(&payload) {
            Ok(text) => write_out_string(out_json, text),
            Err(st) => return st,
        };
        if status != SclpStatus::Ok {
            return status;
        }
        match trace.outcome {
            Outcome::Accepted => SclpStatus::Ok,
            Outcome::Infeasible => {
                set_error("episode infeasible under the revealed labels");
                SclpStatus::Infeasible
            }
            Outcome::StepCapExceeded => {
                set_error("episode hit its step cap");
                SclpStatus::StepCapExceeded
            }
        }
    })
}
