//! JSON tree file format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Edge, GameTree, Node, NodeKind, OutcomeSpec, Player, TreeError};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    #[serde(default)]
    chance: BTreeMap<String, f64>,
    outcomes: BTreeMap<String, OutcomeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    owner: Option<Player>,
    #[serde(default)]
    info_set: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: String,
    to: String,
    action: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
enum OutcomeRecord {
    #[serde(rename = "succ")]
    Succ(String),
    #[serde(rename = "payoff")]
    Payoff(f64),
}

pub(super) fn from_json(text: &str) -> Result<GameTree, TreeError> {
    let file: TreeFile = serde_json::from_str(text)?;
    Ok(GameTree {
        nodes: file
            .nodes
            .into_iter()
            .map(|n| Node { id: n.id, kind: n.kind, owner: n.owner, info_set: n.info_set })
            .collect(),
        edges: file
            .edges
            .into_iter()
            .map(|e| Edge { from: e.from, to: e.to, action: e.action })
            .collect(),
        chance: file.chance,
        outcomes: file
            .outcomes
            .into_iter()
            .map(|(k, o)| {
                let spec = match o {
                    OutcomeRecord::Succ(v) => OutcomeSpec::SuccessorRef(v),
                    OutcomeRecord::Payoff(p) => OutcomeSpec::LocalPayoff(p),
                };
                (k, spec)
            })
            .collect(),
        grounded: BTreeMap::new(),
    })
}

pub(super) fn to_json(tree: &GameTree) -> String {
    let file = TreeFile {
        nodes: tree
            .nodes
            .iter()
            .map(|n| NodeRecord { id: n.id.clone(), kind: n.kind, owner: n.owner, info_set: n.info_set.clone() })
            .collect(),
        edges: tree
            .edges
            .iter()
            .map(|e| EdgeRecord { from: e.from.clone(), to: e.to.clone(), action: e.action.clone() })
            .collect(),
        chance: tree.chance.clone(),
        outcomes: tree
            .outcomes
            .iter()
            .map(|(k, o)| {
                let rec = match o {
                    OutcomeSpec::SuccessorRef(v) => OutcomeRecord::Succ(v.clone()),
                    OutcomeSpec::LocalPayoff(p) => OutcomeRecord::Payoff(*p),
                };
                (k.clone(), rec)
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("tree file serialization cannot fail")
}
