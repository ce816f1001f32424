use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::multires::{MultiResSession, Op};

pub const CSV_HEADER: &str = "scenario,plan,lambda_A,gamma,vertex,value";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("no results to export")]
    Empty,
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub op: Op,
    pub vertex: String,
    pub values: BTreeMap<String, f64>,
}

/// Outcome of running one plan at one attacker capability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    pub plan: String,
    #[serde(rename = "lambda_A")]
    pub lambda_a: f64,
    pub gamma: f64,
    pub values: BTreeMap<String, f64>,
    /// Vertex -> target vertex -> probability.
    pub attacker_strategy: BTreeMap<String, BTreeMap<String, f64>>,
    pub defender_strategy: BTreeMap<String, BTreeMap<String, f64>>,
    pub pinned: Vec<String>,
    pub steps: Vec<StepLog>,
}

impl RunRecord {
    pub fn from_session(scenario: &str, plan: &str, session: &MultiResSession) -> Self {
        let game = session.game();
        let sol = session.solution();
        let by_id = |values: &[f64]| -> BTreeMap<String, f64> {
            game.ids().iter().cloned().zip(values.iter().copied()).collect()
        };
        RunRecord {
            scenario: scenario.to_string(),
            plan: plan.to_string(),
            lambda_a: game.lambda_a(),
            gamma: game.gamma(),
            values: by_id(&sol.values.0),
            attacker_strategy: (0..game.len()).map(|s| (game.id(s).to_string(), sol.attacker.by_target(game, s))).collect(),
            defender_strategy: (0..game.len()).map(|s| (game.id(s).to_string(), sol.defender.by_target(game, s))).collect(),
            pinned: session.pinned_ids().into_iter().map(String::from).collect(),
            steps: session
                .log()
                .iter()
                .map(|st| StepLog { op: st.op, vertex: st.vertex.clone(), values: by_id(&st.values) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ResultSet {
    pub records: Vec<RunRecord>,
}

impl ResultSet {
    pub fn push(&mut self, record: RunRecord) {
        self.records.push(record);
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records ordered by plan name, then attacker capability.
    pub fn sorted(&self) -> Vec<&RunRecord> {
        let mut out: Vec<&RunRecord> = self.records.iter().collect();
        out.sort_by(|a, b| match a.plan.cmp(&b.plan) {
            Ordering::Equal => a.lambda_a.total_cmp(&b.lambda_a),
            o => o,
        });
        out
    }
}

/// Fixed-point rendering that never prints a negative zero.
pub(crate) fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn render_csv(results: &ResultSet) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results.sorted() {
        for (vertex, value) in &r.values {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.scenario, r.plan, r.lambda_a, r.gamma, vertex, fixed(*value, 6));
        }
    }
    out
}

pub fn render_json(results: &ResultSet) -> String {
    let sorted = ResultSet { records: results.sorted().into_iter().cloned().collect() };
    let mut s = serde_json::to_string_pretty(&sorted).expect("result serialization cannot fail");
    s.push('\n');
    s
}

pub fn export_results(results: &ResultSet, format: Format, path: impl AsRef<Path>) -> Result<(), ExportError> {
    if results.is_empty() {
        return Err(ExportError::Empty);
    }
    let text = match format {
        Format::Csv => render_csv(results),
        Format::Json => render_json(results),
    };
    let path = path.as_ref();
    fs::write(path, text).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })
}
