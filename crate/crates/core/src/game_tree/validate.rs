use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{Arena, GameTree, NodeKind, OutcomeSpec, Player, PROB_SUM_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    DuplicateNode,
    DanglingEdge,
    Arborescence,
    DuplicateAction,
    NodeKind,
    Owner,
    InfoSetOwner,
    InfoSetActions,
    PerfectRecall,
    Chance,
    Outcome,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::DuplicateNode => "duplicate node id",
            ViolationKind::DanglingEdge => "dangling edge",
            ViolationKind::Arborescence => "arborescence violated",
            ViolationKind::DuplicateAction => "duplicate action label",
            ViolationKind::NodeKind => "node kind inconsistent",
            ViolationKind::Owner => "owner inconsistent",
            ViolationKind::InfoSetOwner => "information set owner mismatch",
            ViolationKind::InfoSetActions => "information set action mismatch",
            ViolationKind::PerfectRecall => "perfect recall violated",
            ViolationKind::Chance => "chance policy invalid",
            ViolationKind::Outcome => "outcome invalid",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending node or information-set id.
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: `{}`: {}", self.kind, self.subject, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, subject: &str, detail: impl Into<String>) {
        self.violations.push(Violation { kind, subject: subject.to_string(), detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Runs every structural check. The arena is returned whenever the node
/// graph itself is a well-formed arborescence, even if later checks fail.
pub(super) fn validate(tree: &GameTree) -> (ValidationReport, Option<Arena>) {
    let mut report = ValidationReport::default();
    let arena = structure(tree, &mut report);
    node_roles(tree, arena.as_ref(), &mut report);
    if let Some(arena) = &arena {
        info_sets(tree, arena, &mut report);
    }
    chance(tree, &mut report);
    outcomes(tree, &mut report);
    (report, arena)
}

fn structure(tree: &GameTree, report: &mut ValidationReport) -> Option<Arena> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut ok = true;
    for (i, node) in tree.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            report.push(ViolationKind::DuplicateNode, &node.id, "node id declared more than once");
            ok = false;
        }
    }

    let n = tree.nodes.len();
    let mut parent: Vec<Option<(usize, String)>> = vec![None; n];
    let mut children: Vec<Vec<(String, usize)>> = vec![Vec::new(); n];
    for e in &tree.edges {
        let (Some(&from), Some(&to)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
            report.push(
                ViolationKind::DanglingEdge,
                &format!("{}->{}", e.from, e.to),
                "edge endpoint is not a declared node",
            );
            ok = false;
            continue;
        };
        if from == to {
            report.push(ViolationKind::Arborescence, &e.from, "self-loop edge");
            ok = false;
            continue;
        }
        if let Some((p, _)) = &parent[to] {
            report.push(
                ViolationKind::Arborescence,
                &e.to,
                format!("node has two parents (`{}` and `{}`)", tree.nodes[*p].id, e.from),
            );
            ok = false;
            continue;
        }
        parent[to] = Some((from, e.action.clone()));
        if children[from].iter().any(|(a, _)| *a == e.action) {
            report.push(
                ViolationKind::DuplicateAction,
                &e.from,
                format!("action `{}` labels more than one successor", e.action),
            );
            ok = false;
        }
        children[from].push((e.action.clone(), to));
    }
    for c in &mut children {
        c.sort();
    }

    let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
    if n > 0 && roots.is_empty() {
        report.push(ViolationKind::Arborescence, "", "no initial node");
        ok = false;
    }
    let arena = Arena { ids: tree.nodes.iter().map(|x| x.id.clone()).collect(), parent, children, roots };
    if ok {
        let mut seen = vec![false; n];
        for i in arena.bfs_order() {
            seen[i] = true;
        }
        for (i, reached) in seen.iter().enumerate() {
            if !reached {
                report.push(
                    ViolationKind::Arborescence,
                    &tree.nodes[i].id,
                    "node lies on a cycle and is unreachable from any initial node",
                );
                ok = false;
            }
        }
    }
    ok.then_some(arena)
}

fn node_roles(tree: &GameTree, arena: Option<&Arena>, report: &mut ValidationReport) {
    for (i, node) in tree.nodes.iter().enumerate() {
        let has_children = match arena {
            Some(a) => !a.children[i].is_empty(),
            None => tree.edges.iter().any(|e| e.from == node.id),
        };
        match node.kind {
            NodeKind::Decision => {
                if !has_children {
                    report.push(ViolationKind::NodeKind, &node.id, "decision node without successors");
                }
                if node.owner.is_none() {
                    report.push(ViolationKind::Owner, &node.id, "decision node without owner");
                }
            }
            NodeKind::Terminal => {
                if has_children {
                    report.push(ViolationKind::NodeKind, &node.id, "terminal node with successors");
                }
                if node.owner.is_some() || node.info_set.is_some() {
                    report.push(ViolationKind::Owner, &node.id, "terminal node carries owner or information set");
                }
            }
        }
    }
}

fn info_sets(tree: &GameTree, arena: &Arena, report: &mut ValidationReport) {
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.kind == NodeKind::Decision {
            members.entry(node.info_set_id()).or_default().push(i);
        }
    }

    for (h, nodes) in &members {
        let first = nodes[0];
        let actions = |i: usize| arena.children[i].iter().map(|(a, _)| a.as_str()).collect::<Vec<_>>();
        for &x in &nodes[1..] {
            if tree.nodes[x].owner != tree.nodes[first].owner {
                report.push(
                    ViolationKind::InfoSetOwner,
                    h,
                    format!("`{}` and `{}` have different owners", tree.nodes[first].id, tree.nodes[x].id),
                );
            }
            if actions(x) != actions(first) {
                report.push(
                    ViolationKind::InfoSetActions,
                    h,
                    format!("`{}` and `{}` offer different actions", tree.nodes[first].id, tree.nodes[x].id),
                );
            }
        }

        // Perfect recall: every member must share the owner's own history of
        // (information set, action) pairs from the root.
        let Some(owner) = tree.nodes[first].owner else { continue };
        let reference = own_history(tree, arena, first, owner);
        for &x in &nodes[1..] {
            if own_history(tree, arena, x, owner) != reference {
                report.push(
                    ViolationKind::PerfectRecall,
                    h,
                    format!(
                        "`{}` and `{}` are reached through different own histories",
                        tree.nodes[first].id, tree.nodes[x].id
                    ),
                );
            }
        }
    }
}

fn own_history<'a>(tree: &'a GameTree, arena: &'a Arena, node: usize, player: Player) -> Vec<(&'a str, &'a str)> {
    let mut history = Vec::new();
    let mut cur = node;
    while let Some((p, action)) = &arena.parent[cur] {
        let pn = &tree.nodes[*p];
        if pn.owner == Some(player) {
            history.push((pn.info_set_id(), action.as_str()));
        }
        cur = *p;
    }
    history.reverse();
    history
}

fn chance(tree: &GameTree, report: &mut ValidationReport) {
    let initial: BTreeSet<&str> = tree.initial_nodes().into_iter().collect();
    if tree.chance.is_empty() {
        if initial.len() > 1 {
            report.push(ViolationKind::Chance, "", "several initial nodes but no chance policy");
        }
        return;
    }
    let mut sum = 0.0;
    for (id, &p) in &tree.chance {
        if !initial.contains(id.as_str()) {
            report.push(ViolationKind::Chance, id, "chance move at a non-initial node");
        }
        if !p.is_finite() || p < 0.0 {
            report.push(ViolationKind::Chance, id, format!("invalid probability {p}"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        report.push(ViolationKind::Chance, "", format!("probabilities sum to {sum}"));
    }
}

fn outcomes(tree: &GameTree, report: &mut ValidationReport) {
    for node in tree.terminals() {
        if !tree.outcomes.contains_key(&node.id) {
            report.push(ViolationKind::Outcome, &node.id, "terminal node without outcome");
        }
    }
    for (id, spec) in &tree.outcomes {
        match tree.node(id) {
            None => report.push(ViolationKind::Outcome, id, "outcome for undeclared node"),
            Some(n) if n.kind != NodeKind::Terminal => {
                report.push(ViolationKind::Outcome, id, "outcome attached to a decision node")
            }
            _ => {}
        }
        if let OutcomeSpec::LocalPayoff(p) = spec {
            if !p.is_finite() {
                report.push(ViolationKind::Outcome, id, format!("non-finite payoff {p}"));
            }
        }
    }
}
