//! Extensive-form micro games.
//!
//! A [`GameTree`] stores the raw structure of a two-player game tree (nodes,
//! labelled edges, information sets, the chance distribution over initial
//! nodes and terminal outcomes). Any candidate structure can be stored;
//! [`GameTree::validate`] reports which structural requirements it breaks.
//! Evaluation and solving operate on validated trees only.

mod file;
pub mod oracle;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use validate::{ValidationReport, Violation, ViolationKind};

/// Tolerance for probability vectors that are required to sum to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Player {
    #[serde(rename = "A")]
    Attacker,
    #[serde(rename = "D")]
    Defender,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Attacker => Player::Defender,
            Player::Defender => Player::Attacker,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Attacker => f.write_str("A"),
            Player::Defender => f.write_str("D"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Decision,
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub owner: Option<Player>,
    /// Explicit information-set id. A decision node without one forms a
    /// singleton set whose id is the node id.
    pub info_set: Option<String>,
}

impl Node {
    pub fn decision(id: impl Into<String>, owner: Player) -> Self {
        Node { id: id.into(), kind: NodeKind::Decision, owner: Some(owner), info_set: None }
    }

    pub fn terminal(id: impl Into<String>) -> Self {
        Node { id: id.into(), kind: NodeKind::Terminal, owner: None, info_set: None }
    }

    pub fn in_info_set(mut self, info_set: impl Into<String>) -> Self {
        self.info_set = Some(info_set.into());
        self
    }

    /// Id of the information set this decision node belongs to.
    pub fn info_set_id(&self) -> &str {
        self.info_set.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub action: String,
}

/// What reaching a terminal node means.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeSpec {
    /// The play moves (or stays) at a macro vertex; its utility is supplied
    /// by zoom-in grounding.
    SuccessorRef(String),
    /// Absorbing outcome with a fixed attacker payoff.
    LocalPayoff(f64),
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("tree parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid tree:\n{0}")]
    Invalid(ValidationReport),
    #[error("incomplete profile: no distribution for information set `{0}`")]
    IncompleteProfile(String),
    #[error("invalid distribution at information set `{info_set}`: {reason}")]
    InvalidDistribution { info_set: String, reason: String },
    #[error("utilities not grounded at terminal `{0}`; zoom-in required")]
    Ungrounded(String),
    #[error("imperfect information unsupported at micro solver (information set `{0}` has several nodes)")]
    ImperfectInformation(String),
    #[error("oracle budget exceeded: {0}")]
    OracleBudget(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// Per-information-set action distributions of one player.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorStrategy(pub BTreeMap<String, BTreeMap<String, f64>>);

impl BehaviorStrategy {
    pub fn set(&mut self, info_set: impl Into<String>, dist: BTreeMap<String, f64>) {
        self.0.insert(info_set.into(), dist);
    }

    pub fn set_pure(&mut self, info_set: impl Into<String>, action: impl Into<String>) {
        self.0.insert(info_set.into(), BTreeMap::from([(action.into(), 1.0)]));
    }

    pub fn get(&self, info_set: &str) -> Option<&BTreeMap<String, f64>> {
        self.0.get(info_set)
    }
}

/// Strategies of both players; chance is always the tree's own policy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub attacker: BehaviorStrategy,
    pub defender: BehaviorStrategy,
}

impl BehaviorProfile {
    pub fn strategy(&self, player: Player) -> &BehaviorStrategy {
        match player {
            Player::Attacker => &self.attacker,
            Player::Defender => &self.defender,
        }
    }

    pub fn strategy_mut(&mut self, player: Player) -> &mut BehaviorStrategy {
        match player {
            Player::Attacker => &mut self.attacker,
            Player::Defender => &mut self.defender,
        }
    }
}

/// One action per owned information set.
pub type PureStrategy = BTreeMap<String, String>;

/// Backward-induction result.
#[derive(Debug, Clone, PartialEq)]
pub struct Spne {
    pub profile: BehaviorProfile,
    /// Attacker expected utility, weighted by the chance policy.
    pub value: f64,
    /// Subgame value at every node.
    pub node_values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GameTree {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub chance: BTreeMap<String, f64>,
    pub outcomes: BTreeMap<String, OutcomeSpec>,
    /// Attacker utilities filled in for `SuccessorRef` terminals.
    grounded: BTreeMap<String, f64>,
}

/// Index-based view of a validated tree.
#[derive(Debug)]
pub(crate) struct Arena {
    pub ids: Vec<String>,
    pub parent: Vec<Option<(usize, String)>>,
    /// Children sorted by action label.
    pub children: Vec<Vec<(String, usize)>>,
    pub roots: Vec<usize>,
}

impl Arena {
    /// Nodes in breadth-first order from the initial nodes.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = self.roots.clone();
        let mut head = 0;
        while head < order.len() {
            let n = order[head];
            head += 1;
            order.extend(self.children[n].iter().map(|(_, c)| *c));
        }
        order
    }
}

impl GameTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: Node) -> &mut Self {
        self.nodes.push(node);
        self
    }

    pub fn add_edge(&mut self, from: &str, to: &str, action: &str) -> &mut Self {
        self.edges.push(Edge { from: from.into(), to: to.into(), action: action.into() });
        self
    }

    pub fn set_outcome(&mut self, node: &str, outcome: OutcomeSpec) -> &mut Self {
        self.outcomes.insert(node.into(), outcome);
        self
    }

    pub fn set_chance(&mut self, node: &str, prob: f64) -> &mut Self {
        self.chance.insert(node.into(), prob);
        self
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Terminal node ids in declaration order.
    pub fn terminals(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Terminal)
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self).0
    }

    pub(crate) fn arena(&self) -> Result<Arena, TreeError> {
        match validate::validate(self) {
            (report, Some(arena)) if report.is_empty() => Ok(arena),
            (report, _) => Err(TreeError::Invalid(report)),
        }
    }

    /// Probability of starting at initial node `id`. An empty chance map on
    /// a tree with a single initial node puts all mass on it.
    pub fn chance_prob(&self, id: &str) -> f64 {
        if self.chance.is_empty() {
            let initial = self.initial_nodes();
            if initial.len() == 1 && initial[0] == id {
                return 1.0;
            }
            return 0.0;
        }
        self.chance.get(id).copied().unwrap_or(0.0)
    }

    /// Nodes without a parent, in declaration order.
    pub fn initial_nodes(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| !self.edges.iter().any(|e| e.to == n.id))
            .map(|n| n.id.as_str())
            .collect()
    }

    /// Attacker utility at a terminal, if known.
    pub fn attacker_utility(&self, terminal: &str) -> Option<f64> {
        match self.outcomes.get(terminal)? {
            OutcomeSpec::LocalPayoff(p) => Some(*p),
            OutcomeSpec::SuccessorRef(_) => self.grounded.get(terminal).copied(),
        }
    }

    pub fn utility(&self, terminal: &str, player: Player) -> Option<f64> {
        let u = self.attacker_utility(terminal)?;
        Some(match player {
            Player::Attacker => u,
            Player::Defender => -u,
        })
    }

    /// Sets the attacker utility of a `SuccessorRef` terminal. Local payoffs
    /// are absorbing and cannot be overwritten.
    pub fn ground(&mut self, terminal: &str, attacker_utility: f64) -> Result<(), TreeError> {
        match self.outcomes.get(terminal) {
            Some(OutcomeSpec::SuccessorRef(_)) => {
                self.grounded.insert(terminal.to_string(), attacker_utility);
                Ok(())
            }
            Some(OutcomeSpec::LocalPayoff(_)) => Ok(()),
            None => Err(TreeError::UnknownNode(terminal.to_string())),
        }
    }

    pub fn clear_grounding(&mut self) {
        self.grounded.clear();
    }

    pub fn is_grounded(&self) -> bool {
        self.terminals().all(|t| self.attacker_utility(&t.id).is_some())
    }

    /// Checks that `profile` assigns a valid distribution to exactly the
    /// information sets each player owns.
    pub fn validate_profile(&self, profile: &BehaviorProfile) -> Result<(), TreeError> {
        let arena = self.arena()?;
        let sets = self.info_sets(&arena);
        for player in [Player::Attacker, Player::Defender] {
            let strategy = profile.strategy(player);
            for (h, (owner, actions)) in &sets {
                if *owner != player {
                    continue;
                }
                let dist = strategy.get(h).ok_or_else(|| TreeError::IncompleteProfile(h.clone()))?;
                check_distribution(h, dist, actions)?;
            }
            if let Some(extra) = strategy.0.keys().find(|h| sets.get(*h).map(|s| s.0) != Some(player)) {
                return Err(TreeError::InvalidDistribution {
                    info_set: extra.clone(),
                    reason: format!("not an information set owned by {player}"),
                });
            }
        }
        Ok(())
    }

    /// Owner and available actions per information set.
    fn info_sets(&self, arena: &Arena) -> BTreeMap<String, (Player, Vec<String>)> {
        let mut sets = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kind != NodeKind::Decision {
                continue;
            }
            let actions = arena.children[i].iter().map(|(a, _)| a.clone()).collect();
            sets.entry(node.info_set_id().to_string())
                .or_insert((node.owner.expect("validated decision node has an owner"), actions));
        }
        sets
    }

    /// Probability of reaching every terminal under `profile`.
    pub fn outcome_distribution(
        &self,
        profile: &BehaviorProfile,
    ) -> Result<BTreeMap<String, f64>, TreeError> {
        let arena = self.arena()?;
        let mut reach = vec![0.0; self.nodes.len()];
        for &r in &arena.roots {
            reach[r] = self.chance_prob(&arena.ids[r]);
        }
        let mut tau = BTreeMap::new();
        for n in arena.bfs_order() {
            let node = &self.nodes[n];
            if node.kind == NodeKind::Terminal {
                tau.insert(node.id.clone(), reach[n]);
                continue;
            }
            let h = node.info_set_id();
            let owner = node.owner.expect("validated decision node has an owner");
            let dist = match profile.strategy(owner).get(h) {
                Some(d) => d,
                None if reach[n] == 0.0 => {
                    // Unreached; children keep zero mass.
                    continue;
                }
                None => return Err(TreeError::IncompleteProfile(h.to_string())),
            };
            let actions: Vec<String> = arena.children[n].iter().map(|(a, _)| a.clone()).collect();
            check_distribution(h, dist, &actions)?;
            for (action, child) in &arena.children[n] {
                reach[*child] = reach[n] * dist.get(action).copied().unwrap_or(0.0);
            }
        }
        Ok(tau)
    }

    pub fn expected_utility(&self, profile: &BehaviorProfile, player: Player) -> Result<f64, TreeError> {
        if let Some(t) = self.terminals().find(|t| self.attacker_utility(&t.id).is_none()) {
            return Err(TreeError::Ungrounded(t.id.clone()));
        }
        let tau = self.outcome_distribution(profile)?;
        let attacker: f64 = self
            .terminals()
            .map(|t| tau[&t.id] * self.attacker_utility(&t.id).unwrap_or(0.0))
            .sum();
        Ok(match player {
            Player::Attacker => attacker,
            Player::Defender => -attacker,
        })
    }

    /// Backward induction on a perfect-information tree.
    ///
    /// The attacker maximises and the defender minimises the attacker's
    /// subgame value; equal values go to the lexicographically smallest
    /// action label.
    pub fn solve_spne(&self) -> Result<Spne, TreeError> {
        let arena = self.arena()?;
        let mut set_sizes: BTreeMap<&str, usize> = BTreeMap::new();
        for node in self.nodes.iter().filter(|n| n.kind == NodeKind::Decision) {
            *set_sizes.entry(node.info_set_id()).or_default() += 1;
        }
        if let Some((h, _)) = set_sizes.iter().find(|(_, &n)| n > 1) {
            return Err(TreeError::ImperfectInformation(h.to_string()));
        }
        if let Some(t) = self.terminals().find(|t| self.attacker_utility(&t.id).is_none()) {
            return Err(TreeError::Ungrounded(t.id.clone()));
        }

        let mut values = vec![0.0; self.nodes.len()];
        let mut profile = BehaviorProfile::default();
        for n in arena.bfs_order().into_iter().rev() {
            let node = &self.nodes[n];
            if node.kind == NodeKind::Terminal {
                values[n] = self.attacker_utility(&node.id).unwrap_or(0.0);
                continue;
            }
            let owner = node.owner.expect("validated decision node has an owner");
            // children are sorted by label, so strict improvement keeps the
            // smallest label among ties
            let mut best: Option<(&str, f64)> = None;
            for (action, child) in &arena.children[n] {
                let v = values[*child];
                let better = match (best, owner) {
                    (None, _) => true,
                    (Some((_, b)), Player::Attacker) => v > b,
                    (Some((_, b)), Player::Defender) => v < b,
                };
                if better {
                    best = Some((action, v));
                }
            }
            let (action, v) = best.expect("validated decision node has children");
            values[n] = v;
            profile.strategy_mut(owner).set_pure(node.info_set_id(), action);
        }

        let value = arena
            .roots
            .iter()
            .map(|&r| self.chance_prob(&arena.ids[r]) * values[r])
            .sum();
        let node_values = arena.ids.iter().cloned().zip(values).collect();
        Ok(Spne { profile, value, node_values })
    }

    pub fn from_json(text: &str) -> Result<GameTree, TreeError> {
        file::from_json(text)
    }

    pub fn to_json(&self) -> String {
        file::to_json(self)
    }
}

fn check_distribution(h: &str, dist: &BTreeMap<String, f64>, actions: &[String]) -> Result<(), TreeError> {
    let bad = |reason: String| TreeError::InvalidDistribution { info_set: h.to_string(), reason };
    let mut sum = 0.0;
    for (a, &p) in dist {
        if !actions.iter().any(|x| x == a) {
            return Err(bad(format!("action `{a}` not available")));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(bad(format!("probability {p} for `{a}`")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(bad(format!("probabilities sum to {sum}")));
    }
    Ok(())
}
