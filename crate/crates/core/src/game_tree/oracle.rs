//! Brute-force minimax over pure strategies.
//!
//! Works directly from the raw node and edge lists, so it shares no code
//! with backward induction. Only meant for small perfect-information trees.

use std::collections::HashMap;

use super::{GameTree, NodeKind, Player, TreeError};

/// Maximum number of decision nodes the oracle accepts.
pub const ORACLE_MAX_DECISIONS: usize = 12;

/// `max` over attacker pure strategies of `min` over defender pure
/// strategies of the attacker's expected utility.
pub fn enumerate_minimax_oracle(tree: &GameTree) -> Result<f64, TreeError> {
    let report = tree.validate();
    if !report.is_empty() {
        return Err(TreeError::Invalid(report));
    }
    let decisions: Vec<&super::Node> = tree.nodes.iter().filter(|n| n.kind == NodeKind::Decision).collect();
    if decisions.len() > ORACLE_MAX_DECISIONS {
        return Err(TreeError::OracleBudget(format!(
            "{} decision nodes, limit {ORACLE_MAX_DECISIONS}",
            decisions.len()
        )));
    }
    let mut set_count: HashMap<&str, usize> = HashMap::new();
    for d in &decisions {
        *set_count.entry(d.info_set_id()).or_default() += 1;
    }
    if let Some((h, _)) = set_count.iter().find(|(_, &c)| c > 1) {
        return Err(TreeError::ImperfectInformation(h.to_string()));
    }

    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &tree.edges {
        succ.entry(e.from.as_str()).or_default().push(e.to.as_str());
    }
    let roots = tree.initial_nodes();

    let owned = |p: Player| -> Vec<&str> {
        decisions.iter().filter(|d| d.owner == Some(p)).map(|d| d.id.as_str()).collect()
    };
    let attacker_nodes = owned(Player::Attacker);
    let defender_nodes = owned(Player::Defender);

    let mut utility: HashMap<&str, f64> = HashMap::new();
    for t in tree.terminals() {
        let u = tree.attacker_utility(&t.id).ok_or_else(|| TreeError::Ungrounded(t.id.clone()))?;
        utility.insert(t.id.as_str(), u);
    }

    let radices = |nodes: &[&str]| -> Vec<usize> { nodes.iter().map(|n| succ[n].len()).collect() };
    let a_radix = radices(&attacker_nodes);
    let d_radix = radices(&defender_nodes);

    let mut choice: HashMap<&str, usize> = HashMap::new();
    let play = |choice: &HashMap<&str, usize>| -> f64 {
        let mut total = 0.0;
        for &r in &roots {
            let mut cur = r;
            while let Some(next) = succ.get(cur) {
                cur = next[choice[cur]];
            }
            total += tree.chance_prob(r) * utility[cur];
        }
        total
    };

    let mut best = f64::NEG_INFINITY;
    let mut a_digits = vec![0usize; attacker_nodes.len()];
    loop {
        for (n, &d) in attacker_nodes.iter().zip(&a_digits) {
            choice.insert(n, d);
        }
        let mut worst = f64::INFINITY;
        let mut d_digits = vec![0usize; defender_nodes.len()];
        loop {
            for (n, &d) in defender_nodes.iter().zip(&d_digits) {
                choice.insert(n, d);
            }
            worst = worst.min(play(&choice));
            if !advance(&mut d_digits, &d_radix) {
                break;
            }
        }
        best = best.max(worst);
        if !advance(&mut a_digits, &a_radix) {
            break;
        }
    }
    Ok(best)
}

/// Mixed-radix increment; false once every combination has been visited.
fn advance(digits: &mut [usize], radix: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}
