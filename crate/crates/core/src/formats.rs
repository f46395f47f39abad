//! JSON schemas for maps and scenarios, with validation that reports
//! JSON-pointer paths, plus the loaders that turn them into model objects.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::ReplanMode;
use crate::model::{Belief, Cell, Environment, GridMap, LabeledMdp, NORMALIZATION_EPS};
use crate::planner::PlannerConfig;
use crate::scltl::{Alphabet, Letter};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// On-disk map: grid geometry, observation alphabet, label belief, optional
/// ground truth, and the start cell. Cells without a belief row default to
/// the empty letter with probability one; the same default applies to truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapFile {
    pub grid: GridSpec,
    pub alphabet: Vec<String>,
    pub start: Cell,
    #[serde(default)]
    pub belief: Vec<BeliefRowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<TruthSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub blocked: Vec<Cell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefRowSpec {
    pub cell: Cell,
    pub letters: Vec<LetterProbSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LetterProbSpec {
    pub set: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSpec {
    pub cell: Cell,
    pub set: Vec<String>,
}

/// A parsed and validated map.
#[derive(Debug, Clone)]
pub struct LoadedMap {
    pub grid: GridMap,
    pub mdp: LabeledMdp,
    pub alphabet: Alphabet,
    pub belief: Belief,
    pub truth: Option<Vec<Letter>>,
    pub start: usize,
}

impl LoadedMap {
    pub fn environment(&self, h: u32) -> Option<Environment> {
        self.truth.as_ref().map(|t| Environment::new(t.clone(), h))
    }
}

pub fn load_map(path: &Path) -> Result<LoadedMap, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map_str(&text)
}

pub fn parse_map_str(text: &str) -> Result<LoadedMap, FormatError> {
    let file: MapFile = serde_json::from_str(text)?;
    build_map(&file)
}

pub fn build_map(file: &MapFile) -> Result<LoadedMap, FormatError> {
    let alphabet = Alphabet::new(file.alphabet.iter().cloned())
        .map_err(|e| schema("/alphabet", e.to_string()))?;

    if file.grid.width == 0 || file.grid.height == 0 {
        return Err(schema("/grid", "width and height must be at least 1"));
    }
    let mut blocked = BTreeSet::new();
    for (i, &cell) in file.grid.blocked.iter().enumerate() {
        if !in_bounds(cell, &file.grid) {
            return Err(schema(format!("/grid/blocked/{i}"), "cell out of bounds"));
        }
        blocked.insert(cell);
    }
    let grid = GridMap::new(file.grid.width, file.grid.height, &blocked)
        .map_err(|e| schema("/grid", e.to_string()))?;
    let mdp = grid.mdp();

    let mut rows: Vec<Vec<(Letter, f64)>> = vec![vec![(Letter::EMPTY, 1.0)]; grid.n_states()];
    let mut seen_cells = BTreeSet::new();
    for (i, row) in file.belief.iter().enumerate() {
        let pointer = format!("/belief/{i}");
        let state = grid
            .state_at(row.cell)
            .ok_or_else(|| schema(&pointer, "cell out of bounds or blocked"))?;
        if !seen_cells.insert(row.cell) {
            return Err(schema(&pointer, "duplicate belief row for this cell"));
        }
        let mut entries = Vec::new();
        let mut sum = 0.0;
        for (j, lp) in row.letters.iter().enumerate() {
            let lp_pointer = format!("{pointer}/letters/{j}");
            let letter = alphabet
                .letter_from_names(&lp.set)
                .ok_or_else(|| schema(&lp_pointer, "unknown observation in letter"))?;
            if lp.p < 0.0 {
                return Err(schema(&lp_pointer, "negative probability"));
            }
            if entries.iter().any(|&(l, _)| l == letter) {
                return Err(schema(&lp_pointer, "duplicate letter in belief row"));
            }
            sum += lp.p;
            entries.push((letter, lp.p));
        }
        if (sum - 1.0).abs() > NORMALIZATION_EPS {
            return Err(schema(
                &pointer,
                format!(
                    "belief for cell ({}, {}) sums to {sum}, expected 1",
                    row.cell.0, row.cell.1
                ),
            ));
        }
        rows[state] = entries;
    }
    let belief = Belief::new(alphabet.len(), rows).map_err(|e| schema("/belief", e.to_string()))?;

    let truth = match &file.truth {
        None => None,
        Some(specs) => {
            let mut letters = vec![Letter::EMPTY; grid.n_states()];
            let mut covered = BTreeSet::new();
            for (i, spec) in specs.iter().enumerate() {
                let pointer = format!("/truth/{i}");
                let state = grid
                    .state_at(spec.cell)
                    .ok_or_else(|| schema(&pointer, "cell out of bounds or blocked"))?;
                if !covered.insert(state) {
                    return Err(schema(&pointer, "duplicate truth row for this cell"));
                }
                letters[state] = alphabet
                    .letter_from_names(&spec.set)
                    .ok_or_else(|| schema(&pointer, "unknown observation in letter"))?;
            }
            Some(letters)
        }
    };

    let start = grid
        .state_at(file.start)
        .ok_or_else(|| schema("/start", "start cell out of bounds or blocked"))?;

    Ok(LoadedMap {
        grid,
        mdp,
        alphabet,
        belief,
        truth,
        start,
    })
}

/// Serializes a loaded map back into its file form (probabilities preserved
/// exactly; rows pinned to the empty letter are omitted).
pub fn map_to_file(map: &LoadedMap) -> MapFile {
    let belief = (0..map.belief.n_states())
        .filter(|&x| map.belief.support(x) != [(Letter::EMPTY, 1.0)])
        .map(|x| BeliefRowSpec {
            cell: map.grid.cell_of(x),
            letters: map
                .belief
                .support(x)
                .iter()
                .map(|&(l, p)| LetterProbSpec {
                    set: map.alphabet.letter_names(l),
                    p,
                })
                .collect(),
        })
        .collect();
    let truth = map.truth.as_ref().map(|letters| {
        letters
            .iter()
            .enumerate()
            .filter(|&(_, l)| !l.is_empty())
            .map(|(x, &l)| TruthSpec {
                cell: map.grid.cell_of(x),
                set: map.alphabet.letter_names(l),
            })
            .collect()
    });
    MapFile {
        grid: GridSpec {
            width: map.grid.width(),
            height: map.grid.height(),
            blocked: map.grid.blocked().iter().copied().collect(),
        },
        alphabet: map.alphabet.names().to_vec(),
        start: map.grid.cell_of(map.start),
        belief,
        truth,
    }
}

fn in_bounds(cell: Cell, grid: &GridSpec) -> bool {
    cell.0 < grid.width && cell.1 < grid.height
}

/// On-disk scenario: a map (by path or inline), the task, and the planner,
/// run and benchmark parameter blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub map: MapRef,
    pub formula: String,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapRef {
    Path(String),
    Inline { inline: MapFile },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSpec {
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub parallel: bool,
}

impl Default for PlannerSpec {
    fn default() -> Self {
        let cfg = PlannerConfig::default();
        PlannerSpec {
            gamma: cfg.gamma,
            beta: cfg.beta,
            epsilon: cfg.epsilon,
            max_sweeps: cfg.max_sweeps,
            parallel: cfg.parallel,
        }
    }
}

impl PlannerSpec {
    pub fn to_config(&self) -> Result<PlannerConfig, FormatError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(schema("/planner/gamma", "discount must be in [0, 1)"));
        }
        if self.beta <= 0.0 {
            return Err(schema("/planner/beta", "step cost must be positive"));
        }
        if self.epsilon <= 0.0 {
            return Err(schema("/planner/epsilon", "threshold must be positive"));
        }
        Ok(PlannerConfig {
            gamma: self.gamma,
            beta: self.beta,
            epsilon: self.epsilon,
            max_sweeps: self.max_sweeps,
            parallel: self.parallel,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub h: u32,
    pub replan: ReplanMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            h: 1,
            replan: ReplanMode::Trigger,
            step_cap: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    pub worlds: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<ReplanMode>,
    #[serde(default)]
    pub step_cap: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_strategies() -> Vec<ReplanMode> {
    vec![
        ReplanMode::Trigger,
        ReplanMode::EveryStep,
        ReplanMode::Never,
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub sizes: Vec<(u32, u32)>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

/// A scenario with its map resolved.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub map: LoadedMap,
    pub scenario: ScenarioFile,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario: ScenarioFile = serde_json::from_str(&text)?;
    let map = match &scenario.map {
        MapRef::Inline { inline } => build_map(inline)?,
        MapRef::Path(rel) => {
            let map_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            load_map(&map_path)?
        }
    };
    Ok(LoadedScenario { map, scenario })
}
