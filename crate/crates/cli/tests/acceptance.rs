//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use multires_core::game_tree::oracle::enumerate_minimax_oracle;
use multires_core::game_tree::{GameTree, Node, OutcomeSpec, Player};
use multires_core::markov_game::{evaluate_profile, solve_pinned_from, solve_spe, Pins, SolveOptions, ValueFunction};
use multires_core::matrix_game::oracle::support_enumeration_oracle;
use multires_core::matrix_game::{solve_matrix_game, PayoffMatrix, DEFAULT_TOL};
use multires_core::scenario::{load_scenario, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDAS: [f64; 3] = [0.5, 0.6, 0.7];

fn case_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/case_study")
}

fn case_study() -> Scenario {
    load_scenario(case_dir().join("case_study.scenario")).expect("shipped scenario loads")
}

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(elapsed < limit, format!("{detail}; {elapsed:.2?} (limit {limit:?})"))
}

fn matrix_exactness() -> Outcome {
    let m = PayoffMatrix::new(vec![vec![3.0, -1.0], vec![-2.0, 4.0]]).unwrap();
    let t = Instant::now();
    let s = solve_matrix_game(&m, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let first = t.elapsed();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let ok = close(s.value, 1.0)
        && close(s.row_mix[0], 0.6)
        && close(s.row_mix[1], 0.4)
        && close(s.col_mix[0], 0.5)
        && close(s.col_mix[1], 0.5);
    let pennies = PayoffMatrix::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let t = Instant::now();
    let p = solve_matrix_game(&pennies, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let second = t.elapsed();
    let detail = format!(
        "value {} rows {:?} cols {:?}; pennies {}; {first:.2?} / {second:.2?}",
        s.value, s.row_mix, s.col_mix, p.value
    );
    let limit = Duration::from_millis(1);
    check(ok && p.value.abs() <= 1e-9 && first < limit && second < limit, detail)
}

fn lp_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let t = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let rows = (0..r).map(|_| (0..c).map(|_| f64::from(rng.gen_range(-9i32..=9))).collect()).collect();
        let m = PayoffMatrix::new(rows).unwrap();
        let lp = solve_matrix_game(&m, DEFAULT_TOL).map_err(|e| e.to_string())?.value;
        let oracle = support_enumeration_oracle(&m).map_err(|e| e.to_string())?;
        worst = worst.max((lp - oracle).abs());
    }
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(1), format!("100 matrices, max gap {worst:e}"))
        .and_then(|d| check(worst <= 1e-6, d))
}

/// Perfect-information tree, depth at most 4, branching at most 3, integer
/// payoffs, small enough for the enumeration oracle.
fn random_tree(rng: &mut ChaCha8Rng) -> GameTree {
    let mut tree = GameTree::new();
    let mut frontier = vec![("n0".to_string(), 0usize)];
    let (mut next, mut decisions) = (1usize, 0usize);
    while let Some((id, depth)) = frontier.pop() {
        let leaf = depth == 4 || decisions == 12 || (depth > 0 && rng.gen_bool(0.3));
        if leaf {
            tree.add_node(Node::terminal(&id));
            tree.set_outcome(&id, OutcomeSpec::LocalPayoff(f64::from(rng.gen_range(-9i32..=9))));
            continue;
        }
        decisions += 1;
        let owner = if rng.gen_bool(0.5) { Player::Attacker } else { Player::Defender };
        tree.add_node(Node::decision(&id, owner));
        for k in 0..rng.gen_range(1..=3) {
            let child = format!("n{next}");
            next += 1;
            tree.add_edge(&id, &child, &format!("a{k}"));
            frontier.push((child, depth + 1));
        }
    }
    tree
}

fn backward_induction_vs_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let t = Instant::now();
    let mut mismatches = 0;
    for _ in 0..200 {
        let tree = random_tree(&mut rng);
        let spne = tree.solve_spne().map_err(|e| e.to_string())?.value;
        let oracle = enumerate_minimax_oracle(&tree).map_err(|e| e.to_string())?;
        if spne != oracle {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(5), format!("200 trees, {mismatches} mismatches"))
        .and_then(|d| check(mismatches == 0, d))
}

fn value_iteration_soundness() -> Outcome {
    let game = case_study().game.with_lambda(0.6).unwrap();
    let opts = SolveOptions::default();
    let t = Instant::now();
    let from_zero = solve_spe(&game, &opts).map_err(|e| e.to_string())?;
    let from_hundred = solve_pinned_from(&game, &Pins::new(), &opts, &ValueFunction::constant(game.len(), 100.0))
        .map_err(|e| e.to_string())?;
    let evaluated = evaluate_profile(&game, &from_zero.attacker, &from_zero.defender, &opts).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let residual = *from_zero.residuals.last().unwrap();
    let starts = from_zero.values.sup_distance(&from_hundred.values);
    let eval = evaluated.sup_distance(&from_zero.values);
    within(
        elapsed,
        Duration::from_secs(1),
        format!("residual {residual:e}, start gap {starts:e}, profile gap {eval:e}"),
    )
    .and_then(|d| check(residual <= 1e-9 && starts <= 1e-8 && eval <= 1e-6, d))
}

fn transition_normalization() -> Outcome {
    let game = case_study().game;
    let mut triples = 0;
    for s in 0..game.len() {
        let targets = game.action_targets(s);
        for &a in &targets {
            for &d in &targets {
                let dist = game.transition(s, a, d).map_err(|e| e.to_string())?;
                let sum: f64 = dist.iter().map(|(_, p)| p).sum();
                if sum != 1.0 || dist.iter().any(|&(x, _)| x != s && x != a) {
                    return Err(format!("bad distribution at ({s}, {a}, {d}): {dist:?}"));
                }
                triples += 1;
            }
        }
    }
    Ok(format!("{triples} (state, attack, defense) triples"))
}

fn lambda_monotonicity() -> Outcome {
    let sc = case_study();
    let values = LAMBDAS
        .iter()
        .map(|&l| Ok(solve_spe(&sc.game.with_lambda(l).unwrap(), &SolveOptions::default()).map_err(|e| e.to_string())?.values))
        .collect::<Result<Vec<_>, String>>()?;
    let ok = values.windows(2).all(|w| w[0].0.iter().zip(&w[1].0).all(|(a, b)| *a <= b + 1e-9));
    check(ok, format!("CAG values at 0.5/0.6/0.7: {:?}", values.iter().map(|v| &v.0).collect::<Vec<_>>()))
}

fn defender_advantage() -> Outcome {
    let sc = case_study();
    let run = |name: &str| -> Result<Vec<f64>, String> {
        let plan = sc.plan(name).ok_or(format!("plan {name} missing"))?;
        let rec = sc.run(name, &plan, Some(0.6), None, SolveOptions::default()).map_err(|e| e.to_string())?;
        Ok(rec.values.into_values().collect())
    };
    let (cag, seq3, seq5) = (run("CAG")?, run("Seq3")?, run("Seq5")?);
    let ok = (0..cag.len()).all(|i| seq5[i] <= seq3[i] + 1e-6 && seq3[i] <= cag[i] + 1e-6);
    check(ok, format!("CAG {cag:.4?} Seq3 {seq3:.4?} Seq5 {seq5:.4?}"))
}

fn zoom_idempotence() -> Outcome {
    let sc = case_study();
    let mut worst = 0.0f64;
    for v in sc.game.ids() {
        let mut session = sc.session(None, None, SolveOptions::default()).map_err(|e| e.to_string())?;
        let s = sc.game.index_of(v).unwrap();
        let cycle = |session: &mut multires_core::multires::MultiResSession| -> Result<(), String> {
            session.zoom_in(v).map_err(|e| e.to_string())?;
            session.zoom_out(v).map_err(|e| e.to_string())
        };
        cycle(&mut session)?;
        let (values, mix) = (session.values().clone(), session.solution().attacker.0[s].clone());
        cycle(&mut session)?;
        let dv = session.values().sup_distance(&values);
        let dpi = mix.iter().zip(&session.solution().attacker.0[s]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dv).max(dpi);
    }
    check(worst < 1e-9, format!("largest change on the second cycle {worst:e}"))
}

fn golden_file() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("results.csv");
    let t = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_multires"))
        .args(["solve", "--scenario"])
        .arg(case_dir().join("case_study.scenario"))
        .args(["--plan", "CAG,Seq3,Seq5", "--lambda", "0.5,0.6,0.7", "--out"])
        .arg(&out)
        .env("MULTIRES_NO_COLOR", "1")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    if !status.status.success() {
        return Err(format!("solve exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)));
    }
    let produced = std::fs::read(&out).map_err(|e| e.to_string())?;
    let golden = std::fs::read(case_dir().join("golden.csv")).map_err(|e| e.to_string())?;
    let rows = produced.iter().filter(|&&b| b == b'\n').count() - 1;
    within(elapsed, Duration::from_secs(10), format!("{rows} rows"))
        .and_then(|d| check(produced == golden, format!("{d}, byte-identical: {}", produced == golden)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("matrix game exactness", matrix_exactness),
        ("LP agrees with support enumeration", lp_vs_oracle),
        ("backward induction agrees with enumeration", backward_induction_vs_enumeration),
        ("value iteration soundness", value_iteration_soundness),
        ("transition normalization", transition_normalization),
        ("attacker capability monotonicity", lambda_monotonicity),
        ("multi-resolution defender advantage", defender_advantage),
        ("zoom-cycle idempotence", zoom_idempotence),
        ("golden-file determinism", golden_file),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
