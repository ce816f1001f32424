#![allow(dead_code)]

use multires_core::game_tree::{GameTree, Node, OutcomeSpec, Player};
use multires_core::markov_game::MacroGame;
use rand::Rng;

/// Random perfect-information tree with integer payoffs. Depth and branching
/// are bounded, and the number of decision nodes stays within `max_decisions`.
/// With `roots > 1` the initial nodes get dyadic chance probabilities.
pub fn random_tree(rng: &mut impl Rng, max_depth: usize, max_branch: usize, max_decisions: usize, roots: usize) -> GameTree {
    let mut tree = GameTree::new();
    let mut next = 0usize;
    let mut decisions = 0usize;
    let mut frontier = Vec::new();
    for _ in 0..roots {
        let id = format!("n{next}");
        next += 1;
        frontier.push((id, 0usize));
    }
    let probs = dyadic(rng, roots);
    for ((id, _), p) in frontier.iter().zip(&probs) {
        if roots > 1 {
            tree.set_chance(id, *p);
        }
    }
    while let Some((id, depth)) = frontier.pop() {
        let leaf = depth >= max_depth || decisions >= max_decisions || (depth > 0 && rng.gen_bool(0.3));
        if leaf {
            tree.add_node(Node::terminal(&id));
            tree.set_outcome(&id, OutcomeSpec::LocalPayoff(f64::from(rng.gen_range(-9i32..=9))));
            continue;
        }
        decisions += 1;
        let owner = if rng.gen_bool(0.5) { Player::Attacker } else { Player::Defender };
        tree.add_node(Node::decision(&id, owner));
        for k in 0..rng.gen_range(1..=max_branch) {
            let child = format!("n{next}");
            next += 1;
            tree.add_edge(&id, &child, &format!("a{k}"));
            frontier.push((child, depth + 1));
        }
    }
    tree
}

/// `n` probabilities that are multiples of 1/8 (or finer) and sum to one.
fn dyadic(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let units = 16u32.max(n as u32);
    let mut cuts: Vec<u32> = (0..n - 1).map(|_| rng.gen_range(0..=units)).collect();
    cuts.sort();
    let mut out = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(units)) {
        out.push(f64::from(c - prev) / f64::from(units));
        prev = c;
    }
    out
}

/// Random macro game on `n` vertices with edges drawn with probability `density`.
pub fn random_macro(rng: &mut impl Rng, n: usize, density: f64) -> MacroGame {
    let vertices = (0..n).map(|i| (format!("v{i}"), f64::from(rng.gen_range(1..=10)))).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density) {
                edges.push((format!("v{a}"), format!("v{b}")));
            }
        }
    }
    let beta = -f64::from(rng.gen_range(1..=5));
    let gamma = rng.gen_range(0.0..0.95);
    let lambda = rng.gen_range(0.0..=1.0);
    MacroGame::new(vertices, &edges, beta, gamma, lambda).unwrap()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}
