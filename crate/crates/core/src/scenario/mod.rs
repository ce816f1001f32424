//! Scenario files: the macro graph, its parameters, per-vertex micro games
//! and named zoom plans.
//!
//! A scenario is a JSON document with `"format_version": 1`. Tree paths are
//! resolved relative to the scenario file. Unknown keys are rejected.

mod results;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_tree::{GameTree, TreeError};
use crate::markov_game::{MacroGame, SolveOptions};
use crate::multires::{self, MultiResError, MultiResSession, Op, Operation, OperationPlan};

pub use results::{export_results, render_csv, render_json, ExportError, Format, ResultSet, RunRecord, StepLog};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: parse error: {source}", .path.display())]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{}: `{key}`: {message}", .path.display())]
    Invalid { path: PathBuf, key: String, message: String },
}

impl ScenarioError {
    fn invalid(path: &Path, key: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid { path: path.to_path_buf(), key: key.into(), message: message.into() }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, ScenarioError::Io { .. })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    vertices: Vec<VertexRecord>,
    edges: Vec<(String, String)>,
    beta: f64,
    gamma: f64,
    #[serde(rename = "lambda_A")]
    lambda_a: f64,
    #[serde(default)]
    trees: BTreeMap<String, String>,
    #[serde(default)]
    plans: BTreeMap<String, Vec<(Op, String)>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRecord {
    id: String,
    nu: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub game: MacroGame,
    /// Tree file per vertex, as written in the scenario.
    pub tree_refs: BTreeMap<String, String>,
    pub trees: BTreeMap<String, GameTree>,
    pub plans: BTreeMap<String, OperationPlan>,
    /// Directory tree references are resolved against.
    pub base_dir: PathBuf,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, path, &base_dir)
}

/// Parses scenario text; `path` is only used in error messages.
pub fn parse_scenario(text: &str, path: &Path, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|source| ScenarioError::Parse { path: path.into(), source })?;
    if file.format_version != FORMAT_VERSION {
        return Err(ScenarioError::invalid(
            path,
            "format_version",
            format!("unsupported format version {} (expected {FORMAT_VERSION})", file.format_version),
        ));
    }
    let game = build_game(&file, path)?;

    let mut trees = BTreeMap::new();
    for (vertex, rel) in &file.trees {
        let key = format!("trees.{vertex}");
        let s = game
            .index_of(vertex)
            .map_err(|_| ScenarioError::invalid(path, &key, format!("unknown vertex `{vertex}`")))?;
        let tree_path = base_dir.join(rel);
        let text = match fs::read_to_string(&tree_path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ScenarioError::invalid(path, key, format!("tree file `{}` not found", tree_path.display())))
            }
            Err(source) => return Err(ScenarioError::Io { path: tree_path, source }),
        };
        let tree = GameTree::from_json(&text).map_err(|e| match e {
            TreeError::Parse(source) => ScenarioError::Parse { path: tree_path.clone(), source },
            other => ScenarioError::invalid(&tree_path, "", other.to_string()),
        })?;
        multires::check_tree(&game, s, &tree).map_err(|e| {
            let message = match e {
                MultiResError::InvalidTree { source, .. } => source.to_string(),
                other => other.to_string(),
            };
            ScenarioError::invalid(&tree_path, &key, message)
        })?;
        trees.insert(vertex.clone(), tree);
    }

    let mut plans = BTreeMap::new();
    for (name, ops) in &file.plans {
        for (i, (_, v)) in ops.iter().enumerate() {
            if game.index_of(v).is_err() {
                return Err(ScenarioError::invalid(path, format!("plans.{name}[{i}]"), format!("unknown vertex `{v}`")));
            }
        }
        let plan = OperationPlan(ops.iter().map(|(op, v)| Operation { op: *op, vertex: v.clone() }).collect());
        if let Some(v) = plan.validate().first() {
            return Err(ScenarioError::invalid(path, format!("plans.{name}[{}]", v.index), v.to_string()));
        }
        plans.insert(name.clone(), plan);
    }

    Ok(Scenario {
        name: file.name,
        description: file.description,
        game,
        tree_refs: file.trees,
        trees,
        plans,
        base_dir: base_dir.to_path_buf(),
    })
}

fn build_game(file: &ScenarioFile, path: &Path) -> Result<MacroGame, ScenarioError> {
    let mut seen = BTreeMap::new();
    for (i, v) in file.vertices.iter().enumerate() {
        if seen.insert(v.id.as_str(), i).is_some() {
            return Err(ScenarioError::invalid(path, format!("vertices[{i}].id"), format!("duplicate vertex `{}`", v.id)));
        }
        if !(v.nu.is_finite() && v.nu > 0.0) {
            return Err(ScenarioError::invalid(path, format!("vertices[{i}].nu"), "nu must be > 0"));
        }
    }
    if file.vertices.is_empty() {
        return Err(ScenarioError::invalid(path, "vertices", "at least one vertex required"));
    }
    for (i, (a, b)) in file.edges.iter().enumerate() {
        for end in [a, b] {
            if !seen.contains_key(end.as_str()) {
                return Err(ScenarioError::invalid(path, format!("edges[{i}]"), format!("unknown vertex `{end}`")));
            }
        }
    }
    if !(file.beta < 0.0 && file.beta.is_finite()) {
        return Err(ScenarioError::invalid(path, "beta", "beta must be < 0"));
    }
    if !(file.gamma >= 0.0 && file.gamma < 1.0) {
        let msg = if file.gamma >= 1.0 { "gamma must be < 1" } else { "gamma must be >= 0" };
        return Err(ScenarioError::invalid(path, "gamma", msg));
    }
    if !(0.0..=1.0).contains(&file.lambda_a) {
        return Err(ScenarioError::invalid(path, "lambda_A", "lambda_A must lie in [0, 1]"));
    }
    MacroGame::new(
        file.vertices.iter().map(|v| (v.id.clone(), v.nu)).collect(),
        &file.edges,
        file.beta,
        file.gamma,
        file.lambda_a,
    )
    .map_err(|e| ScenarioError::invalid(path, "", e.to_string()))
}

impl Scenario {
    pub fn to_json(&self) -> String {
        let game = &self.game;
        let file = ScenarioFile {
            format_version: FORMAT_VERSION,
            name: self.name.clone(),
            description: self.description.clone(),
            vertices: (0..game.len()).map(|s| VertexRecord { id: game.id(s).to_string(), nu: game.nu(s) }).collect(),
            edges: game.edges(),
            beta: game.beta(),
            gamma: game.gamma(),
            lambda_a: game.lambda_a(),
            trees: self.tree_refs.clone(),
            plans: self
                .plans
                .iter()
                .map(|(k, p)| (k.clone(), p.0.iter().map(|o| (o.op, o.vertex.clone())).collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("scenario serialization cannot fail")
    }

    /// Named plan from the scenario, falling back to the built-in baselines.
    pub fn plan(&self, name: &str) -> Option<OperationPlan> {
        self.plans.get(name).cloned().or_else(|| OperationPlan::builtin(name))
    }

    /// Completely abstracted session at the given attacker capability and
    /// (optionally overridden) discount.
    pub fn session(
        &self,
        lambda_a: Option<f64>,
        gamma: Option<f64>,
        opts: SolveOptions,
    ) -> Result<MultiResSession, MultiResError> {
        let mut game = self.game.clone();
        if let Some(l) = lambda_a {
            game = game.with_lambda(l)?;
        }
        if let Some(g) = gamma {
            game = game.with_gamma(g)?;
        }
        MultiResSession::new(game, self.trees.clone(), opts)
    }

    /// Starts from the CAG equilibrium, runs `plan` and records the result.
    pub fn run(
        &self,
        plan_name: &str,
        plan: &OperationPlan,
        lambda_a: Option<f64>,
        gamma: Option<f64>,
        opts: SolveOptions,
    ) -> Result<RunRecord, MultiResError> {
        let mut session = self.session(lambda_a, gamma, opts)?;
        session.run_plan(plan)?;
        Ok(RunRecord::from_session(&self.name, plan_name, &session))
    }
}
