//! The macro-strategic game: a zero-sum Markov game over a directed graph
//! of micro games.
//!
//! At vertex `s` both players pick an edge leaving `s` or the implicit
//! self-loop. The attacker tries to traverse its edge; the defender secures
//! one. An unsecured traversal succeeds with probability `lambda_a`. Entering
//! vertex `v` pays the attacker `nu(v)`, staying put costs `beta`.
//!
//! States and actions are addressed by index. Vertex `i` is the `i`-th
//! vertex given to [`MacroGame::new`]; action `k` at a vertex is the `k`-th
//! entry of [`MacroGame::action_targets`] (self-loop first, then successors
//! sorted by id).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::matrix_game::{self, MatrixGameError, PayoffMatrix};

pub type VertexIdx = usize;

/// Attacker mixes fixed at some states, keyed by vertex.
pub type Pins = BTreeMap<VertexIdx, Vec<f64>>;

const STRATEGY_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MarkovError {
    #[error("invalid macro game: {0}")]
    InvalidGame(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("action to `{action}` is not available at `{state}`")]
    NotIncident { state: String, action: String },
    #[error("invalid strategy at `{state}`: {reason}")]
    InvalidStrategy { state: String, reason: String },
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Stage(#[from] MatrixGameError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroGame {
    ids: Vec<String>,
    nu: Vec<f64>,
    /// Out-neighbours other than the vertex itself, sorted by id.
    successors: Vec<Vec<VertexIdx>>,
    index: HashMap<String, VertexIdx>,
    beta: f64,
    gamma: f64,
    lambda_a: f64,
}

impl MacroGame {
    pub fn new(
        vertices: Vec<(String, f64)>,
        edges: &[(String, String)],
        beta: f64,
        gamma: f64,
        lambda_a: f64,
    ) -> Result<Self, MarkovError> {
        let invalid = |m: String| Err(MarkovError::InvalidGame(m));
        if vertices.is_empty() {
            return invalid("no vertices".into());
        }
        let mut index = HashMap::new();
        for (i, (id, nu)) in vertices.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return invalid(format!("duplicate vertex `{id}`"));
            }
            if !(nu.is_finite() && *nu > 0.0) {
                return invalid(format!("nu({id}) must be positive, got {nu}"));
            }
        }
        let mut succ: Vec<BTreeSet<(String, VertexIdx)>> = vec![BTreeSet::new(); vertices.len()];
        for (from, to) in edges {
            let f = *index.get(from).ok_or_else(|| MarkovError::UnknownVertex(from.clone()))?;
            let t = *index.get(to).ok_or_else(|| MarkovError::UnknownVertex(to.clone()))?;
            if f != t {
                succ[f].insert((to.clone(), t));
            }
        }
        let (ids, nu) = vertices.into_iter().unzip();
        let game = MacroGame {
            ids,
            nu,
            successors: succ.into_iter().map(|s| s.into_iter().map(|(_, t)| t).collect()).collect(),
            index,
            beta,
            gamma,
            lambda_a,
        };
        game.check_parameters()?;
        Ok(game)
    }

    fn check_parameters(&self) -> Result<(), MarkovError> {
        let invalid = |m: &str| Err(MarkovError::InvalidGame(m.into()));
        if !(self.beta < 0.0 && self.beta.is_finite()) {
            return invalid("beta must be < 0");
        }
        if !(self.gamma >= 0.0) {
            return invalid("gamma must be >= 0");
        }
        if !(self.gamma < 1.0) {
            return invalid("gamma must be < 1");
        }
        if !(0.0..=1.0).contains(&self.lambda_a) {
            return invalid("lambda_A must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda_a: f64) -> Result<Self, MarkovError> {
        let g = MacroGame { lambda_a, ..self.clone() };
        g.check_parameters()?;
        Ok(g)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self, MarkovError> {
        let g = MacroGame { gamma, ..self.clone() };
        g.check_parameters()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, s: VertexIdx) -> &str {
        &self.ids[s]
    }

    pub fn index_of(&self, id: &str) -> Result<VertexIdx, MarkovError> {
        self.index.get(id).copied().ok_or_else(|| MarkovError::UnknownVertex(id.to_string()))
    }

    pub fn nu(&self, s: VertexIdx) -> f64 {
        self.nu[s]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda_a(&self) -> f64 {
        self.lambda_a
    }

    /// Explicit edges, self-loops excluded, in vertex then target-id order.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (s, succ) in self.successors.iter().enumerate() {
            out.extend(succ.iter().map(|&t| (self.ids[s].clone(), self.ids[t].clone())));
        }
        out
    }

    /// Target vertex of each action available at `s`: the self-loop first,
    /// then successors sorted by id. Both players share this list.
    pub fn action_targets(&self, s: VertexIdx) -> Vec<VertexIdx> {
        std::iter::once(s).chain(self.successors[s].iter().copied()).collect()
    }

    /// Available actions at `s` as `(from, to)` edges.
    pub fn actions_at(&self, s: &str) -> Result<Vec<(String, String)>, MarkovError> {
        let i = self.index_of(s)?;
        Ok(self.action_targets(i).into_iter().map(|t| (s.to_string(), self.ids[t].clone())).collect())
    }

    fn check_action(&self, s: VertexIdx, target: VertexIdx) -> Result<(), MarkovError> {
        if target == s || self.successors[s].contains(&target) {
            Ok(())
        } else {
            Err(MarkovError::NotIncident {
                state: self.ids[s].clone(),
                action: self.ids.get(target).cloned().unwrap_or_else(|| format!("#{target}")),
            })
        }
    }

    /// Next-state distribution when the attacker heads for `attack` and the
    /// defender secures the edge to `secure` (both given as target vertices).
    pub fn transition(
        &self,
        s: VertexIdx,
        attack: VertexIdx,
        secure: VertexIdx,
    ) -> Result<Vec<(VertexIdx, f64)>, MarkovError> {
        self.check_action(s, attack)?;
        self.check_action(s, secure)?;
        Ok(self.transition_unchecked(s, attack, secure))
    }

    fn transition_unchecked(&self, s: VertexIdx, attack: VertexIdx, secure: VertexIdx) -> Vec<(VertexIdx, f64)> {
        if attack == s || attack == secure {
            vec![(s, 1.0)]
        } else {
            vec![(attack, self.lambda_a), (s, 1.0 - self.lambda_a)]
        }
    }

    /// Attacker reward for moving from `s` to `next`. Does not depend on the
    /// actions; the defender receives the negation.
    pub fn reward(&self, s: VertexIdx, next: VertexIdx) -> f64 {
        if next == s {
            self.beta
        } else {
            self.nu[next]
        }
    }

    /// `Σ_s' T(s'|s,a,d) [R(s,a,d,s') + γ V(s')]` for one action pair.
    pub fn stage_entry(&self, s: VertexIdx, attack: VertexIdx, secure: VertexIdx, v: &[f64]) -> f64 {
        self.transition_unchecked(s, attack, secure)
            .into_iter()
            .map(|(next, p)| p * (self.reward(s, next) + self.gamma * v[next]))
            .sum()
    }

    /// One-shot game at `s` against continuation values `v`; rows and
    /// columns follow [`MacroGame::action_targets`].
    pub fn stage_matrix(&self, s: VertexIdx, v: &ValueFunction) -> PayoffMatrix {
        let targets = self.action_targets(s);
        PayoffMatrix::from_fn(targets.len(), targets.len(), |i, j| self.stage_entry(s, targets[i], targets[j], &v.0))
            .expect("stage matrix is non-empty and finite")
    }

    /// `max(|β|, max ν) / (1 - γ)`.
    pub fn value_bound(&self) -> f64 {
        let r = self.nu.iter().copied().fold(self.beta.abs(), f64::max);
        r / (1.0 - self.gamma)
    }

    pub fn check_strategy(&self, strategy: &MacroStrategy) -> Result<(), MarkovError> {
        if strategy.0.len() != self.len() {
            return Err(MarkovError::InvalidStrategy {
                state: String::new(),
                reason: format!("covers {} states, game has {}", strategy.0.len(), self.len()),
            });
        }
        for (s, dist) in strategy.0.iter().enumerate() {
            self.check_mix(s, dist)?;
        }
        Ok(())
    }

    fn check_mix(&self, s: VertexIdx, dist: &[f64]) -> Result<(), MarkovError> {
        let bad = |reason: String| Err(MarkovError::InvalidStrategy { state: self.ids[s].clone(), reason });
        let n = self.successors[s].len() + 1;
        if dist.len() != n {
            return bad(format!("{} entries for {n} actions", dist.len()));
        }
        if dist.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return bad("negative or non-finite probability".into());
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > STRATEGY_SUM_TOL {
            return bad(format!("probabilities sum to {sum}"));
        }
        Ok(())
    }
}

/// Per-state distribution over the actions of [`MacroGame::action_targets`].
#[derive(Debug, Clone, PartialEq)]
pub struct MacroStrategy(pub Vec<Vec<f64>>);

impl MacroStrategy {
    /// Distribution at `s` keyed by target vertex id.
    pub fn by_target(&self, game: &MacroGame, s: VertexIdx) -> BTreeMap<String, f64> {
        game.action_targets(s)
            .into_iter()
            .zip(&self.0[s])
            .map(|(t, &p)| (game.id(t).to_string(), p))
            .collect()
    }

    pub fn pure(game: &MacroGame, choose: impl Fn(VertexIdx) -> usize) -> Self {
        MacroStrategy(
            (0..game.len())
                .map(|s| {
                    let mut d = vec![0.0; game.action_targets(s).len()];
                    d[choose(s)] = 1.0;
                    d
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn constant(n: usize, c: f64) -> Self {
        ValueFunction(vec![c; n])
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// Infinite-horizon discounted fixed point.
    Discounted,
    /// Exactly `K` backward-recursion steps from `V ≡ 0`.
    Finite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Sup-norm residual at which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
    pub horizon: Horizon,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-9, max_iters: 100_000, horizon: Horizon::Discounted }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroSolution {
    pub values: ValueFunction,
    pub attacker: MacroStrategy,
    pub defender: MacroStrategy,
    pub iterations: usize,
    /// Sup-norm change of every sweep.
    pub residuals: Vec<f64>,
}

/// Shapley value iteration from `V ≡ 0`.
pub fn solve_spe(game: &MacroGame, opts: &SolveOptions) -> Result<MacroSolution, MarkovError> {
    solve_pinned_from(game, &Pins::new(), opts, &ValueFunction::constant(game.len(), 0.0))
}

/// Value iteration with the attacker fixed to `pins` at pinned states,
/// where the defender best-responds with a pure column.
pub fn solve_pinned_spe(game: &MacroGame, pins: &Pins, opts: &SolveOptions) -> Result<MacroSolution, MarkovError> {
    solve_pinned_from(game, pins, opts, &ValueFunction::constant(game.len(), 0.0))
}

/// [`solve_pinned_spe`] from an arbitrary starting value function. The
/// finite-horizon mode always starts from zero.
pub fn solve_pinned_from(
    game: &MacroGame,
    pins: &Pins,
    opts: &SolveOptions,
    start: &ValueFunction,
) -> Result<MacroSolution, MarkovError> {
    if !(opts.tol > 0.0) {
        return Err(MatrixGameError::BadTolerance(opts.tol).into());
    }
    for (&s, pin) in pins {
        if s >= game.len() {
            return Err(MarkovError::UnknownVertex(format!("#{s}")));
        }
        game.check_mix(s, pin)?;
    }

    let (mut v, sweeps) = match opts.horizon {
        Horizon::Discounted => (start.clone(), opts.max_iters),
        Horizon::Finite(k) => (ValueFunction::constant(game.len(), 0.0), k),
    };
    let mut residuals = Vec::new();
    let mut attacker = Vec::new();
    let mut defender = Vec::new();
    for _ in 0..sweeps {
        let mut next = Vec::with_capacity(game.len());
        attacker.clear();
        defender.clear();
        for s in 0..game.len() {
            let m = game.stage_matrix(s, &v);
            let (value, x, y) = stage_solution(&m, pins.get(&s))?;
            next.push(value);
            attacker.push(x);
            defender.push(y);
        }
        let next = ValueFunction(next);
        let residual = next.sup_distance(&v);
        residuals.push(residual);
        v = next;
        if opts.horizon == Horizon::Discounted && residual <= opts.tol {
            break;
        }
    }

    let iterations = residuals.len();
    if opts.horizon == Horizon::Discounted {
        let last = residuals.last().copied().unwrap_or(f64::INFINITY);
        if !(last <= opts.tol) {
            return Err(MarkovError::NotConverged { iterations, residual: last });
        }
    } else if iterations == 0 {
        // K = 0: no stage was solved, report the myopic strategies instead.
        for s in 0..game.len() {
            let (_, x, y) = stage_solution(&game.stage_matrix(s, &v), pins.get(&s))?;
            attacker.push(x);
            defender.push(y);
        }
    }
    Ok(MacroSolution {
        values: v,
        attacker: MacroStrategy(attacker),
        defender: MacroStrategy(defender),
        iterations,
        residuals,
    })
}

fn stage_solution(m: &PayoffMatrix, pin: Option<&Vec<f64>>) -> Result<(f64, Vec<f64>, Vec<f64>), MarkovError> {
    match pin {
        None => {
            let sol = matrix_game::solve_matrix_game(m, matrix_game::DEFAULT_TOL)?;
            Ok((sol.value, sol.row_mix, sol.col_mix))
        }
        Some(x) => {
            let cols = m.column_payoffs(x);
            let mut best = 0;
            for (j, &c) in cols.iter().enumerate() {
                if c < cols[best] {
                    best = j;
                }
            }
            let mut y = vec![0.0; cols.len()];
            y[best] = 1.0;
            Ok((cols[best], x.clone(), y))
        }
    }
}

/// Value of a fixed stationary profile, by iterating its linear Bellman
/// operator from zero.
pub fn evaluate_profile(
    game: &MacroGame,
    attacker: &MacroStrategy,
    defender: &MacroStrategy,
    opts: &SolveOptions,
) -> Result<ValueFunction, MarkovError> {
    game.check_strategy(attacker)?;
    game.check_strategy(defender)?;
    if !(opts.tol > 0.0) {
        return Err(MatrixGameError::BadTolerance(opts.tol).into());
    }
    let sweeps = match opts.horizon {
        Horizon::Discounted => opts.max_iters,
        Horizon::Finite(k) => k,
    };
    let mut v = ValueFunction::constant(game.len(), 0.0);
    let mut residual = f64::INFINITY;
    for _ in 0..sweeps {
        let next = ValueFunction(
            (0..game.len())
                .map(|s| {
                    let m = game.stage_matrix(s, &v);
                    let cols = m.column_payoffs(&attacker.0[s]);
                    cols.iter().zip(&defender.0[s]).map(|(c, q)| c * q).sum()
                })
                .collect(),
        );
        residual = next.sup_distance(&v);
        v = next;
        if opts.horizon == Horizon::Discounted && residual <= opts.tol {
            return Ok(v);
        }
    }
    match opts.horizon {
        Horizon::Finite(_) => Ok(v),
        Horizon::Discounted => Err(MarkovError::NotConverged { iterations: sweeps, residual }),
    }
}
