//! Resolution configurations and the zoom operators.
//!
//! A [`MultiResSession`] starts from the completely abstracted game (every
//! vertex at macro level, equilibrium from Shapley iteration). Zooming in on
//! a vertex grounds the terminal utilities of its micro game from the
//! current macro profile and solves the micro game by backward induction.
//! Zooming out turns the micro outcome distribution into the attacker's
//! macro mix at that vertex, pins it, and re-solves the macro game with the
//! attacker free only at unpinned vertices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_tree::{GameTree, OutcomeSpec, Spne, TreeError};
use crate::markov_game::{self, MacroGame, MacroSolution, MarkovError, Pins, SolveOptions, ValueFunction, VertexIdx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    Macro,
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "in")]
    ZoomIn,
    #[serde(rename = "out")]
    ZoomOut,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::ZoomIn => "in",
            Op::ZoomOut => "out",
        })
    }
}

impl FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in" => Ok(Op::ZoomIn),
            "out" => Ok(Op::ZoomOut),
            other => Err(format!("unknown operation `{other}` (expected `in` or `out`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub op: Op,
    pub vertex: String,
}

impl Operation {
    pub fn zoom_in(vertex: impl Into<String>) -> Self {
        Operation { op: Op::ZoomIn, vertex: vertex.into() }
    }

    pub fn zoom_out(vertex: impl Into<String>) -> Self {
        Operation { op: Op::ZoomOut, vertex: vertex.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OperationPlan(pub Vec<Operation>);

/// A zoom-out at position `index` without a live zoom-in on its vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanViolation {
    pub index: usize,
    pub vertex: String,
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "operation {}: zoom-out on `{}` is not preceded by a zoom-in", self.index + 1, self.vertex)
    }
}

impl OperationPlan {
    /// Zoom in and straight back out on each vertex in turn.
    pub fn cycles<'a>(vertices: impl IntoIterator<Item = &'a str>) -> Self {
        OperationPlan(
            vertices
                .into_iter()
                .flat_map(|v| [Operation::zoom_in(v), Operation::zoom_out(v)])
                .collect(),
        )
    }

    /// Plans named after the case-study baselines: `CAG` (no operations),
    /// `Seq3` (cycles on s1, s3, s5) and `Seq5` (cycles on s1..s5).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "CAG" => Some(OperationPlan::default()),
            "Seq3" => Some(Self::cycles(["s1", "s3", "s5"])),
            "Seq5" => Some(Self::cycles(["s1", "s2", "s3", "s4", "s5"])),
            _ => None,
        }
    }

    /// Parses the line format: `in <vertex>` or `out <vertex>` per line,
    /// `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self, String> {
        let mut ops = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(op), Some(vertex), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(format!("line {}: expected `in <vertex>` or `out <vertex>`", n + 1));
            };
            let op = op.parse().map_err(|e| format!("line {}: {e}", n + 1))?;
            ops.push(Operation { op, vertex: vertex.to_string() });
        }
        Ok(OperationPlan(ops))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|o| format!("{} {}\n", o.op, o.vertex)).collect()
    }

    /// Every zoom-out must follow a zoom-in on the same vertex with no
    /// zoom-out on it in between.
    pub fn validate(&self) -> Vec<PlanViolation> {
        let mut live = BTreeSet::new();
        let mut violations = Vec::new();
        for (index, o) in self.0.iter().enumerate() {
            match o.op {
                Op::ZoomIn => {
                    live.insert(o.vertex.as_str());
                }
                Op::ZoomOut => {
                    if !live.remove(o.vertex.as_str()) {
                        violations.push(PlanViolation { index, vertex: o.vertex.clone() });
                    }
                }
            }
        }
        violations
    }
}

#[derive(Debug, Error)]
pub enum MultiResError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("no micro game registered for `{0}`")]
    MissingTree(String),
    #[error("micro game for `{vertex}`: terminal `{terminal}` refers to `{target}`, which is not an outcome of `{vertex}`")]
    InconsistentTree { vertex: String, terminal: String, target: String },
    #[error("micro game for `{vertex}` is invalid: {source}")]
    InvalidTree { vertex: String, source: TreeError },
    #[error("zoom-out on `{0}` without a preceding zoom-in")]
    PlanOrder(String),
    #[error("plan violates zoom ordering:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidPlan(Vec<PlanViolation>),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Macro(#[from] MarkovError),
}

/// What zooming in on a vertex produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroRecord {
    /// The micro game with grounded terminal utilities.
    pub tree: GameTree,
    pub spne: Spne,
    /// Reach probability of every terminal under the SPNE.
    pub terminal_probs: BTreeMap<String, f64>,
    /// Attacker macro mix implied by the outcome distribution, aligned with
    /// the vertex's actions.
    pub outcome_mix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub op: Op,
    pub vertex: String,
    /// Vertex values after the operation, in game order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MultiResSession {
    game: MacroGame,
    trees: BTreeMap<VertexIdx, GameTree>,
    config: Vec<Level>,
    solution: MacroSolution,
    micro: BTreeMap<VertexIdx, MicroRecord>,
    pins: Pins,
    log: Vec<StepRecord>,
    opts: SolveOptions,
}

impl MultiResSession {
    /// Completely abstracted start: all vertices at macro level with the
    /// unconstrained equilibrium.
    pub fn new(
        game: MacroGame,
        trees: BTreeMap<String, GameTree>,
        opts: SolveOptions,
    ) -> Result<Self, MultiResError> {
        let mut indexed = BTreeMap::new();
        for (id, tree) in trees {
            let s = game.index_of(&id).map_err(|_| MultiResError::UnknownVertex(id.clone()))?;
            check_tree(&game, s, &tree)?;
            indexed.insert(s, tree);
        }
        let solution = markov_game::solve_spe(&game, &opts)?;
        Ok(MultiResSession {
            config: vec![Level::Macro; game.len()],
            game,
            trees: indexed,
            solution,
            micro: BTreeMap::new(),
            pins: Pins::new(),
            log: Vec::new(),
            opts,
        })
    }

    pub fn game(&self) -> &MacroGame {
        &self.game
    }

    pub fn solution(&self) -> &MacroSolution {
        &self.solution
    }

    pub fn values(&self) -> &ValueFunction {
        &self.solution.values
    }

    pub fn config(&self) -> &[Level] {
        &self.config
    }

    pub fn level(&self, vertex: &str) -> Result<Level, MultiResError> {
        Ok(self.config[self.index(vertex)?])
    }

    pub fn pins(&self) -> &Pins {
        &self.pins
    }

    /// Ids of pinned vertices.
    pub fn pinned_ids(&self) -> Vec<&str> {
        self.pins.keys().map(|&s| self.game.id(s)).collect()
    }

    pub fn micro(&self, vertex: &str) -> Option<&MicroRecord> {
        self.micro.get(&self.game.index_of(vertex).ok()?)
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    fn index(&self, vertex: &str) -> Result<VertexIdx, MultiResError> {
        self.game.index_of(vertex).map_err(|_| MultiResError::UnknownVertex(vertex.to_string()))
    }

    /// Outcome vertices of the micro game at `vertex`: itself first, then
    /// its successors.
    pub fn outcome_set(&self, vertex: &str) -> Result<Vec<String>, MultiResError> {
        let s = self.index(vertex)?;
        Ok(self.game.action_targets(s).into_iter().map(|t| self.game.id(t).to_string()).collect())
    }

    /// Attacker utility of ending the micro game at `vertex` in outcome
    /// `target`, given the current macro profile: the defender's macro mix
    /// weighted expected reward plus discounted continuation value of the
    /// attacker heading for `target`.
    pub fn outcome_utility(&self, vertex: &str, target: &str) -> Result<f64, MultiResError> {
        let s = self.index(vertex)?;
        let t = self.index(target)?;
        let targets = self.game.action_targets(s);
        if !targets.contains(&t) {
            return Err(MultiResError::InconsistentTree {
                vertex: vertex.to_string(),
                terminal: String::new(),
                target: target.to_string(),
            });
        }
        Ok(self.outcome_utility_idx(s, t))
    }

    fn outcome_utility_idx(&self, s: VertexIdx, t: VertexIdx) -> f64 {
        let v = &self.solution.values.0;
        self.game
            .action_targets(s)
            .iter()
            .zip(&self.solution.defender.0[s])
            .map(|(&secure, &q)| q * self.game.stage_entry(s, t, secure, v))
            .sum()
    }

    pub fn zoom_in(&mut self, vertex: &str) -> Result<(), MultiResError> {
        let s = self.index(vertex)?;
        let mut tree = self.trees.get(&s).cloned().ok_or_else(|| MultiResError::MissingTree(vertex.to_string()))?;
        tree.clear_grounding();
        let targets = self.game.action_targets(s);

        let mut outcome_of = BTreeMap::new();
        for (terminal, spec) in &tree.outcomes {
            let action = match spec {
                OutcomeSpec::SuccessorRef(v) => self.outcome_action(s, terminal, v)?,
                // absorbing outcomes leave the macro token where it is
                OutcomeSpec::LocalPayoff(_) => 0,
            };
            outcome_of.insert(terminal.clone(), action);
        }
        for (terminal, spec) in tree.outcomes.clone() {
            if matches!(spec, OutcomeSpec::SuccessorRef(_)) {
                let u = self.outcome_utility_idx(s, targets[outcome_of[&terminal]]);
                tree.ground(&terminal, u)?;
            }
        }

        let spne = tree.solve_spne()?;
        let terminal_probs = tree.outcome_distribution(&spne.profile)?;
        let mut outcome_mix = vec![0.0; targets.len()];
        for (terminal, p) in &terminal_probs {
            outcome_mix[outcome_of[terminal]] += p;
        }

        self.micro.insert(s, MicroRecord { tree, spne, terminal_probs, outcome_mix });
        self.config[s] = Level::Micro;
        self.record(Op::ZoomIn, s);
        Ok(())
    }

    fn outcome_action(&self, s: VertexIdx, terminal: &str, target: &str) -> Result<usize, MultiResError> {
        let inconsistent = || MultiResError::InconsistentTree {
            vertex: self.game.id(s).to_string(),
            terminal: terminal.to_string(),
            target: target.to_string(),
        };
        let t = self.game.index_of(target).map_err(|_| inconsistent())?;
        self.game.action_targets(s).iter().position(|&x| x == t).ok_or_else(inconsistent)
    }

    pub fn zoom_out(&mut self, vertex: &str) -> Result<(), MultiResError> {
        let s = self.index(vertex)?;
        if self.config[s] != Level::Micro {
            return Err(MultiResError::PlanOrder(vertex.to_string()));
        }
        let record = self.micro.get(&s).ok_or_else(|| MultiResError::PlanOrder(vertex.to_string()))?;
        self.pins.insert(s, record.outcome_mix.clone());
        self.solution = markov_game::solve_pinned_spe(&self.game, &self.pins, &self.opts)?;
        self.config[s] = Level::Macro;
        self.record(Op::ZoomOut, s);
        Ok(())
    }

    pub fn apply(&mut self, operation: &Operation) -> Result<(), MultiResError> {
        match operation.op {
            Op::ZoomIn => self.zoom_in(&operation.vertex),
            Op::ZoomOut => self.zoom_out(&operation.vertex),
        }
    }

    /// Applies a whole plan after checking its ordering.
    pub fn run_plan(&mut self, plan: &OperationPlan) -> Result<(), MultiResError> {
        let violations = plan.validate();
        if !violations.is_empty() {
            return Err(MultiResError::InvalidPlan(violations));
        }
        for operation in &plan.0 {
            self.apply(operation)?;
        }
        Ok(())
    }

    fn record(&mut self, op: Op, s: VertexIdx) {
        self.log.push(StepRecord { op, vertex: self.game.id(s).to_string(), values: self.solution.values.0.clone() });
    }
}

/// Structural validity plus: every successor reference is an outcome of `s`.
pub fn check_tree(game: &MacroGame, s: VertexIdx, tree: &GameTree) -> Result<(), MultiResError> {
    let vertex = game.id(s).to_string();
    let report = tree.validate();
    if !report.is_empty() {
        return Err(MultiResError::InvalidTree { vertex, source: TreeError::Invalid(report) });
    }
    let targets = game.action_targets(s);
    for (terminal, spec) in &tree.outcomes {
        if let OutcomeSpec::SuccessorRef(target) = spec {
            let ok = game.index_of(target).map(|t| targets.contains(&t)).unwrap_or(false);
            if !ok {
                return Err(MultiResError::InconsistentTree {
                    vertex,
                    terminal: terminal.clone(),
                    target: target.clone(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_tree::{Node, Player};

    fn plan(ops: &[(&str, &str)]) -> OperationPlan {
        OperationPlan(ops.iter().map(|(o, v)| Operation { op: o.parse().unwrap(), vertex: v.to_string() }).collect())
    }

    #[test]
    fn plan_validation() {
        assert_eq!(plan(&[("out", "s2")]).validate(), vec![PlanViolation { index: 0, vertex: "s2".into() }]);
        assert!(plan(&[("in", "s2"), ("out", "s2")]).validate().is_empty());
        assert!(plan(&[("in", "s1"), ("in", "s2"), ("out", "s2"), ("out", "s1")]).validate().is_empty());
        assert_eq!(plan(&[("in", "s1"), ("out", "s1"), ("out", "s1")]).validate().len(), 1);
        assert!(plan(&[("in", "s1"), ("in", "s1"), ("out", "s1")]).validate().is_empty());
    }

    #[test]
    fn plan_text_format() {
        let text = "# baseline\nin s1\n  out s1   # back\n\nin s3\n";
        let p = OperationPlan::parse_text(text).unwrap();
        assert_eq!(p, plan(&[("in", "s1"), ("out", "s1"), ("in", "s3")]));
        assert_eq!(OperationPlan::parse_text(&p.to_text()).unwrap(), p);
        assert!(OperationPlan::parse_text("zoom s1").is_err());
        assert!(OperationPlan::parse_text("in").is_err());
        assert!(OperationPlan::parse_text("in s1 s2").is_err());
    }

    #[test]
    fn builtin_plans() {
        assert!(OperationPlan::builtin("CAG").unwrap().0.is_empty());
        let seq3 = OperationPlan::builtin("Seq3").unwrap();
        assert_eq!(seq3, plan(&[("in", "s1"), ("out", "s1"), ("in", "s3"), ("out", "s3"), ("in", "s5"), ("out", "s5")]));
        assert_eq!(OperationPlan::builtin("Seq5").unwrap().0.len(), 10);
        assert!(OperationPlan::builtin("Seq4").is_none());
    }

    fn two_vertex() -> MacroGame {
        MacroGame::new(
            vec![("s".into(), 1.0), ("t".into(), 10.0)],
            &[("s".into(), "t".into())],
            -2.0,
            0.9,
            0.6,
        )
        .unwrap()
    }

    /// attacker picks `go` (reach t) or `wait` (stay at s)
    fn choice_tree() -> GameTree {
        let mut t = GameTree::new();
        t.add_node(Node::decision("r", Player::Attacker));
        t.add_node(Node::terminal("zt"));
        t.add_node(Node::terminal("zs"));
        t.add_edge("r", "zt", "go").add_edge("r", "zs", "wait");
        t.set_outcome("zt", OutcomeSpec::SuccessorRef("t".into()));
        t.set_outcome("zs", OutcomeSpec::SuccessorRef("s".into()));
        t
    }

    #[test]
    fn outcome_sets() {
        let session = MultiResSession::new(two_vertex(), BTreeMap::new(), SolveOptions::default()).unwrap();
        assert_eq!(session.outcome_set("s").unwrap(), vec!["s", "t"]);
        assert_eq!(session.outcome_set("t").unwrap(), vec!["t"]);
        assert!(session.outcome_set("x").is_err());
    }

    #[test]
    fn zoom_in_grounds_utilities() {
        let game = two_vertex().with_gamma(0.0).unwrap();
        let trees = BTreeMap::from([("s".to_string(), choice_tree())]);
        let mut session = MultiResSession::new(game, trees, SolveOptions::default()).unwrap();
        // Put the defender on the self-loop (no blocking) so the grounded
        // utility can be checked by hand.
        session.solution.defender.0[0] = vec![1.0, 0.0];
        session.zoom_in("s").unwrap();
        let rec = session.micro("s").unwrap();
        // 0.6 * 10 + 0.4 * (-2)
        assert!((rec.tree.attacker_utility("zt").unwrap() - 5.2).abs() < 1e-12);
        assert_eq!(rec.tree.attacker_utility("zs").unwrap(), -2.0);
        assert_eq!(rec.outcome_mix, vec![0.0, 1.0]);
        assert_eq!(session.level("s").unwrap(), Level::Micro);
    }

    #[test]
    fn stay_outcome_is_beta_plus_continuation() {
        let trees = BTreeMap::from([("s".to_string(), choice_tree())]);
        let mut session = MultiResSession::new(two_vertex(), trees, SolveOptions::default()).unwrap();
        let v = session.values().0.clone();
        session.zoom_in("s").unwrap();
        let u = session.micro("s").unwrap().tree.attacker_utility("zs").unwrap();
        assert!((u - (-2.0 + 0.9 * v[0])).abs() < 1e-12);
    }

    #[test]
    fn local_payoff_tree() {
        let mut t = GameTree::new();
        t.add_node(Node::terminal("loot"));
        t.set_outcome("loot", OutcomeSpec::LocalPayoff(15.0));
        let trees = BTreeMap::from([("t".to_string(), t)]);
        let mut session = MultiResSession::new(two_vertex(), trees, SolveOptions::default()).unwrap();
        session.zoom_in("t").unwrap();
        assert_eq!(session.micro("t").unwrap().spne.value, 15.0);
        session.zoom_out("t").unwrap();
        assert_eq!(session.pins()[&1], vec![1.0]);
    }

    #[test]
    fn zoom_out_requires_zoom_in() {
        let trees = BTreeMap::from([("s".to_string(), choice_tree())]);
        let mut session = MultiResSession::new(two_vertex(), trees, SolveOptions::default()).unwrap();
        assert!(matches!(session.zoom_out("s"), Err(MultiResError::PlanOrder(_))));
        assert!(matches!(session.zoom_in("t"), Err(MultiResError::MissingTree(_))));
        assert!(matches!(session.run_plan(&plan(&[("out", "s")])), Err(MultiResError::InvalidPlan(_))));
        assert!(session.log().is_empty());
    }

    #[test]
    fn zoom_out_pins_outcome_distribution() {
        let trees = BTreeMap::from([("s".to_string(), choice_tree())]);
        let mut session = MultiResSession::new(two_vertex(), trees, SolveOptions::default()).unwrap();
        session.run_plan(&plan(&[("in", "s"), ("out", "s")])).unwrap();
        let mix = session.micro("s").unwrap().outcome_mix.clone();
        assert_eq!(session.pins()[&0], mix);
        assert_eq!(session.solution().attacker.0[0], mix);
        assert_eq!(session.level("s").unwrap(), Level::Macro);
        assert_eq!(session.log().len(), 2);
        assert_eq!(session.pinned_ids(), vec!["s"]);
    }

    #[test]
    fn chance_mixes_outcomes() {
        // chance picks between a root where the attacker can only advance
        // and one where it can only wait
        let mut t = GameTree::new();
        t.add_node(Node::decision("a", Player::Attacker));
        t.add_node(Node::decision("b", Player::Attacker));
        for (id, target) in [("za", "t"), ("zb", "s")] {
            t.add_node(Node::terminal(id));
            t.set_outcome(id, OutcomeSpec::SuccessorRef(target.into()));
        }
        t.add_edge("a", "za", "x").add_edge("b", "zb", "x");
        t.set_chance("a", 0.75).set_chance("b", 0.25);
        let trees = BTreeMap::from([("s".to_string(), t)]);
        let mut session = MultiResSession::new(two_vertex(), trees, SolveOptions::default()).unwrap();
        session.zoom_in("s").unwrap();
        session.zoom_out("s").unwrap();
        assert_eq!(session.solution().attacker.0[0], vec![0.25, 0.75]);
    }

    #[test]
    fn inconsistent_successor_refs() {
        let mut t = choice_tree();
        t.set_outcome("zt", OutcomeSpec::SuccessorRef("nowhere".into()));
        let trees = BTreeMap::from([("s".to_string(), t.clone())]);
        assert!(matches!(
            MultiResSession::new(two_vertex(), trees, SolveOptions::default()),
            Err(MultiResError::InconsistentTree { .. })
        ));
        // t -> s is not an edge
        t.set_outcome("zt", OutcomeSpec::SuccessorRef("s".into()));
        let trees = BTreeMap::from([("t".to_string(), t)]);
        assert!(matches!(
            MultiResSession::new(two_vertex(), trees, SolveOptions::default()),
            Err(MultiResError::InconsistentTree { .. })
        ));
    }

    #[test]
    fn empty_plan_is_identity() {
        let trees = BTreeMap::from([("s".to_string(), choice_tree())]);
        let mut session = MultiResSession::new(two_vertex(), trees, SolveOptions::default()).unwrap();
        let before = session.solution().clone();
        session.run_plan(&OperationPlan::default()).unwrap();
        assert_eq!(session.solution(), &before);
        assert_eq!(before, markov_game::solve_spe(session.game(), &SolveOptions::default()).unwrap());
    }
}
