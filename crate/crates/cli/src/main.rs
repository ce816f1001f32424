//! `multires`: validate scenarios, run zoom plans, inspect micro games.
//!
//! Exit codes: 0 success, 2 validation, 3 I/O, 4 solver convergence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multires_core::game_tree::{GameTree, NodeKind, OutcomeSpec, Player};
use multires_core::markov_game::{Horizon, MarkovError, SolveOptions};
use multires_core::multires::{MultiResError, OperationPlan};
use multires_core::scenario::{self, ExportError, Format, ResultSet, Scenario, ScenarioError};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;

#[derive(Parser)]
#[command(name = "multires", version, about = "Multi-resolution attacker/defender game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and all of its micro game trees.
    Validate {
        #[arg(long)]
        scenario: String,
    },
    /// Run zoom plans from the completely abstracted equilibrium and report vertex values.
    Solve(SolveArgs),
    /// Zoom into one vertex under the abstracted equilibrium and dump the grounded tree.
    Inspect {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        vertex: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: String,
    /// Plan names or plan text files; defaults to every plan in the scenario.
    #[arg(long, value_delimiter = ',')]
    plan: Vec<String>,
    /// Attacker capabilities to sweep; defaults to the scenario's value.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Run exactly K Bellman sweeps instead of iterating to convergence.
    #[arg(long, value_name = "K")]
    horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        Failure { code, message: e.to_string() }
    }
}

impl From<MultiResError> for Failure {
    fn from(e: MultiResError) -> Self {
        let code = match &e {
            MultiResError::Macro(MarkovError::NotConverged { .. } | MarkovError::Stage(_)) => EXIT_CONVERGENCE,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        let code = match e {
            ExportError::Empty => EXIT_VALIDATION,
            ExportError::Io { .. } => EXIT_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Solve(args) => solve(&args),
        Command::Inspect { scenario, vertex, lambda, gamma, tol } => inspect(&scenario, &vertex, lambda, gamma, tol),
    };
    match result {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(EXIT_IO);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// A path, or the name of a scenario shipped under `scenarios/<name>/`.
fn resolve_scenario(arg: &str) -> PathBuf {
    let path = PathBuf::from(arg);
    if path.exists() || arg.contains(['/', '\\', '.']) {
        return path;
    }
    let shipped = Path::new("scenarios").join(arg).join(format!("{arg}.scenario"));
    if shipped.exists() {
        shipped
    } else {
        path
    }
}

fn load(arg: &str) -> Result<Scenario, Failure> {
    Ok(scenario::load_scenario(resolve_scenario(arg))?)
}

fn styled() -> bool {
    std::env::var_os("MULTIRES_NO_COLOR").is_none() && io::stdout().is_terminal()
}

fn bold(s: &str) -> String {
    if styled() {
        format!("\x1b[1m{s}\x1b[0m")
    } else {
        s.to_string()
    }
}

fn f4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        s[1..].to_string()
    } else {
        s
    }
}

fn validate(arg: &str) -> Result<String, Failure> {
    let sc = load(arg)?;
    Ok(format!(
        "ok: scenario `{}` ({} vertices, {} edges, {} trees, {} plans)\n",
        sc.name,
        sc.game.len(),
        sc.game.edges().len(),
        sc.trees.len(),
        sc.plans.len()
    ))
}

fn options(tol: f64, horizon: Option<usize>) -> Result<SolveOptions, Failure> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::validation(format!("--tol must be a positive number, got {tol}")));
    }
    let horizon = match horizon {
        None => Horizon::Discounted,
        Some(0) => return Err(Failure::validation("--horizon must be at least 1")),
        Some(k) => Horizon::Finite(k),
    };
    Ok(SolveOptions { tol, horizon, ..SolveOptions::default() })
}

/// Scenario plans first, then the built-in baselines, then a plan text file.
fn find_plan(sc: &Scenario, name: &str) -> Result<OperationPlan, Failure> {
    if let Some(p) = sc.plan(name) {
        return Ok(p);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Failure::validation(format!("unknown plan `{name}`")));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) })?;
    let plan = OperationPlan::parse_text(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    for op in &plan.0 {
        if sc.game.index_of(&op.vertex).is_err() {
            return Err(Failure::validation(format!("{}: unknown vertex `{}`", path.display(), op.vertex)));
        }
    }
    Ok(plan)
}

fn check_overrides(sc: &Scenario, lambdas: &[f64], gamma: Option<f64>) -> Result<(), Failure> {
    for &l in lambdas {
        sc.game.with_lambda(l).map_err(|e| Failure::validation(format!("--lambda {l}: {e}")))?;
    }
    if let Some(g) = gamma {
        sc.game.with_gamma(g).map_err(|e| Failure::validation(format!("--gamma {g}: {e}")))?;
    }
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<String, Failure> {
    let sc = load(&args.scenario)?;
    let opts = options(args.tol, args.horizon)?;
    let plan_names: Vec<String> = if args.plan.is_empty() {
        if sc.plans.is_empty() {
            vec!["CAG".to_string()]
        } else {
            sc.plans.keys().cloned().collect()
        }
    } else {
        args.plan.clone()
    };
    let plans = plan_names
        .iter()
        .map(|n| Ok((n.clone(), find_plan(&sc, n)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let lambdas = if args.lambda.is_empty() { vec![sc.game.lambda_a()] } else { args.lambda.clone() };
    check_overrides(&sc, &lambdas, args.gamma)?;

    let mut results = ResultSet::default();
    for (name, plan) in &plans {
        for &l in &lambdas {
            results.push(sc.run(name, plan, Some(l), args.gamma, opts)?);
        }
    }
    if let Some(out) = &args.out {
        scenario::export_results(&results, args.format, out)?;
    }
    Ok(table(&results))
}

fn table(results: &ResultSet) -> String {
    let rows: Vec<[String; 5]> = results
        .sorted()
        .into_iter()
        .flat_map(|r| {
            r.values
                .iter()
                .map(|(v, x)| [r.plan.clone(), r.lambda_a.to_string(), r.gamma.to_string(), v.clone(), f4(*x)])
        })
        .collect();
    let header = ["plan", "lambda_A", "gamma", "vertex", "value"];
    let mut width = header.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 5]| -> String {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            // numbers right-aligned, labels left-aligned
            if i == 1 || i == 2 || i == 4 {
                let _ = write!(s, "{cell:>w$}");
            } else {
                let _ = write!(s, "{cell:<w$}");
            }
        }
        s.trim_end().to_string()
    };
    let mut out = bold(&line(header));
    out.push('\n');
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4]]));
        out.push('\n');
    }
    out
}

fn inspect(arg: &str, vertex: &str, lambda: Option<f64>, gamma: Option<f64>, tol: f64) -> Result<String, Failure> {
    let sc = load(arg)?;
    let opts = options(tol, None)?;
    check_overrides(&sc, lambda.as_slice(), gamma)?;
    if sc.game.index_of(vertex).is_err() {
        return Err(Failure::validation(format!("unknown vertex `{vertex}`")));
    }
    if !sc.trees.contains_key(vertex) {
        return Err(Failure::validation(format!("no micro game registered for `{vertex}`")));
    }
    let mut session = sc.session(lambda, gamma, opts)?;
    session.zoom_in(vertex)?;
    let record = session.micro(vertex).expect("zoomed-in vertex has a record");
    let game = session.game();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}",
        bold(&format!("vertex {vertex}  lambda_A {}  gamma {}", game.lambda_a(), game.gamma()))
    );
    let _ = writeln!(out, "macro value {}", f4(session.values().0[game.index_of(vertex).unwrap()]));
    let _ = writeln!(out, "outcome utilities:");
    for target in session.outcome_set(vertex)? {
        let _ = writeln!(out, "  {target}  {}", f4(session.outcome_utility(vertex, &target)?));
    }
    let _ = writeln!(out, "tree (SPNE value {}):", f4(record.spne.value));
    let tree = &record.tree;
    let children = children_by_label(tree);
    for root in tree.initial_nodes() {
        let _ = writeln!(out, "  [chance {}]", f4(tree.chance_prob(root)));
        dump(&mut out, record, &children, root, None, 2);
    }
    let _ = writeln!(out, "outcome mix:");
    for (target, p) in session.outcome_set(vertex)?.iter().zip(&record.outcome_mix) {
        let _ = writeln!(out, "  {target}  {}", f4(*p));
    }
    Ok(out)
}

fn children_by_label(tree: &GameTree) -> BTreeMap<&str, Vec<(&str, &str)>> {
    let mut map: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
    for e in &tree.edges {
        map.entry(e.from.as_str()).or_default().push((e.action.as_str(), e.to.as_str()));
    }
    for v in map.values_mut() {
        v.sort();
    }
    map
}

fn dump(
    out: &mut String,
    record: &multires_core::multires::MicroRecord,
    children: &BTreeMap<&str, Vec<(&str, &str)>>,
    id: &str,
    via: Option<&str>,
    depth: usize,
) {
    let tree = &record.tree;
    let node = tree.node(id).expect("node exists");
    let indent = "  ".repeat(depth);
    let prefix = via.map(|a| format!("{a}: ")).unwrap_or_default();
    match node.kind {
        NodeKind::Terminal => {
            let kind = match tree.outcomes.get(id) {
                Some(OutcomeSpec::SuccessorRef(v)) => format!("succ {v}"),
                Some(OutcomeSpec::LocalPayoff(_)) => "payoff".to_string(),
                None => "?".to_string(),
            };
            let r = tree.attacker_utility(id).map(f4).unwrap_or_else(|| "?".into());
            let tau = record.terminal_probs.get(id).copied().unwrap_or(0.0);
            let _ = writeln!(out, "{indent}{prefix}{id}  {kind}  r_A {r}  tau {}", f4(tau));
        }
        NodeKind::Decision => {
            let owner = node.owner.unwrap_or(Player::Attacker);
            let chosen = record
                .spne
                .profile
                .strategy(owner)
                .get(node.info_set_id())
                .and_then(|d| d.iter().find(|(_, &p)| p > 0.5).map(|(a, _)| a.clone()))
                .unwrap_or_default();
            let value = record.spne.node_values.get(id).copied().unwrap_or(f64::NAN);
            let who = match owner {
                Player::Attacker => "A",
                Player::Defender => "D",
            };
            let _ = writeln!(out, "{indent}{prefix}{id} ({who})  value {}  -> {chosen}", f4(value));
            for (action, child) in children.get(id).map(Vec::as_slice).unwrap_or_default() {
                dump(out, record, children, child, Some(action), depth + 1);
            }
        }
    }
}
