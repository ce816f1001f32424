//! Two-player zero-sum matrix games.
//!
//! Rows belong to the maximising attacker, columns to the minimising
//! defender, entries are attacker payoffs. [`solve_matrix_game`] first looks
//! for a pure saddle point and otherwise solves the minimax linear program
//! with a dense tableau simplex using Bland's pivoting rule.

pub mod oracle;

use std::fmt;

use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Pivot elements and reduced costs below this are treated as zero.
const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixGameError {
    #[error("malformed stage game: {0}")]
    Malformed(String),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("simplex did not reach a saddle point (duality gap {0:e})")]
    Numerical(f64),
    #[error("oracle budget exceeded: {0}")]
    OracleBudget(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, MatrixGameError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(MatrixGameError::Malformed("empty matrix".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatrixGameError::Malformed("ragged matrix".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(MatrixGameError::Malformed("non-finite entry".into()));
        }
        Ok(PayoffMatrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self, MatrixGameError> {
        Self::new((0..rows).map(|i| (0..cols).map(|j| f(i, j)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PayoffMatrix {
        PayoffMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// `-Mᵀ`: the same game seen from the defender's side.
    pub fn negated_transpose(&self) -> PayoffMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(-self.get(i, j));
            }
        }
        PayoffMatrix { rows: self.cols, cols: self.rows, data }
    }

    /// `(xᵀM)_j` for every column.
    pub fn column_payoffs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| x[i] * self.get(i, j)).sum()).collect()
    }

    /// `(My)_i` for every row.
    pub fn row_payoffs(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|x| format!("{x:.4}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_mix: Vec<f64>,
    pub col_mix: Vec<f64>,
}

impl MatrixGameSolution {
    /// Worst case for the row player and best case for the column player
    /// under the returned mixes.
    pub fn security_levels(&self, m: &PayoffMatrix) -> (f64, f64) {
        let lower = m.column_payoffs(&self.row_mix).into_iter().fold(f64::INFINITY, f64::min);
        let upper = m.row_payoffs(&self.col_mix).into_iter().fold(f64::NEG_INFINITY, f64::max);
        (lower, upper)
    }
}

pub fn solve_matrix_game(m: &PayoffMatrix, tol: f64) -> Result<MatrixGameSolution, MatrixGameError> {
    if !(tol > 0.0) {
        return Err(MatrixGameError::BadTolerance(tol));
    }
    if let Some(sol) = pure_saddle(m) {
        return Ok(sol);
    }
    let sol = simplex_solve(m);
    let (lower, upper) = sol.security_levels(m);
    if lower < sol.value - tol || upper > sol.value + tol {
        return Err(MatrixGameError::Numerical(upper - lower));
    }
    Ok(sol)
}

/// Pure saddle point with the smallest row and column indices, if any.
fn pure_saddle(m: &PayoffMatrix) -> Option<MatrixGameSolution> {
    let mut best_row = (0, f64::NEG_INFINITY);
    for i in 0..m.rows {
        let low = m.row(i).iter().copied().fold(f64::INFINITY, f64::min);
        if low > best_row.1 {
            best_row = (i, low);
        }
    }
    let mut best_col = (0, f64::INFINITY);
    for j in 0..m.cols {
        let high = (0..m.rows).map(|i| m.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
        if high < best_col.1 {
            best_col = (j, high);
        }
    }
    (best_row.1 == best_col.1).then(|| MatrixGameSolution {
        value: best_row.1,
        row_mix: unit(m.rows, best_row.0),
        col_mix: unit(m.cols, best_col.0),
    })
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Solves `max 1ᵀw  s.t. (M + k) w <= 1, w >= 0` with `k` making every
/// entry at least one. The optimum `z` gives value `1/z - k`, the column mix
/// `w / z` and, from the slack prices, the row mix.
fn simplex_solve(m: &PayoffMatrix) -> MatrixGameSolution {
    let (rows, cols) = (m.rows, m.cols);
    let min = m.data.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;

    // Columns: w_0..w_{cols-1}, slack_0..slack_{rows-1}, rhs.
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut tab = vec![vec![0.0; width]; rows + 1];
    for i in 0..rows {
        for j in 0..cols {
            tab[i][j] = m.get(i, j) + shift;
        }
        tab[i][cols + i] = 1.0;
        tab[i][rhs] = 1.0;
    }
    let obj = rows;
    for j in 0..cols {
        tab[obj][j] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    // Bland: lowest-index improving column, ratio ties to lowest basic index.
    while let Some(enter) = (0..width - 1).find(|&j| tab[obj][j] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let a = tab[i][enter];
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = tab[i][rhs] / a;
            leave = match leave {
                Some((r, best)) if ratio > best || (ratio == best && basis[i] > basis[r]) => Some((r, best)),
                _ => Some((i, ratio)),
            };
        }
        // The feasible region is bounded because every entry is positive.
        let (pr, _) = leave.expect("bounded LP always has a leaving row");
        pivot(&mut tab, pr, enter);
        basis[pr] = enter;
    }

    let z = tab[obj][rhs];
    let mut w = vec![0.0; cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            w[b] = tab[i][rhs];
        }
    }
    let y = normalize(w);
    let x = normalize((0..rows).map(|i| tab[obj][cols + i]).collect());
    MatrixGameSolution { value: 1.0 / z - shift, row_mix: x, col_mix: y }
}

fn pivot(tab: &mut [Vec<f64>], pr: usize, pc: usize) {
    let p = tab[pr][pc];
    for v in tab[pr].iter_mut() {
        *v /= p;
    }
    let prow = tab[pr].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == pr {
            continue;
        }
        let f = row[pc];
        if f != 0.0 {
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::oracle::support_enumeration_oracle;
    use super::*;

    fn m(rows: &[&[f64]]) -> PayoffMatrix {
        PayoffMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn two_by_two_equalization() {
        let s = solve_matrix_game(&m(&[&[3.0, -1.0], &[-2.0, 4.0]]), DEFAULT_TOL).unwrap();
        assert!((s.value - 1.0).abs() <= 1e-9, "{}", s.value);
        assert!(close(&s.row_mix, &[0.6, 0.4], 1e-9), "{:?}", s.row_mix);
        assert!(close(&s.col_mix, &[0.5, 0.5], 1e-9), "{:?}", s.col_mix);
    }

    #[test]
    fn matching_pennies() {
        let s = solve_matrix_game(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), DEFAULT_TOL).unwrap();
        assert!(s.value.abs() <= 1e-9);
        assert!(close(&s.row_mix, &[0.5, 0.5], 1e-9));
        assert!(close(&s.col_mix, &[0.5, 0.5], 1e-9));
    }

    #[test]
    fn constant_matrix_is_exact() {
        for c in [0.1, -7.3, 2.2, 1e6] {
            let s = solve_matrix_game(&PayoffMatrix::from_fn(3, 2, |_, _| c).unwrap(), DEFAULT_TOL).unwrap();
            assert_eq!(s.value, c);
        }
    }

    #[test]
    fn pure_saddle_point() {
        let s = solve_matrix_game(&m(&[&[2.0, 3.0], &[1.0, 5.0]]), DEFAULT_TOL).unwrap();
        assert_eq!(s.value, 2.0);
        assert_eq!(s.row_mix, vec![1.0, 0.0]);
        assert_eq!(s.col_mix, vec![1.0, 0.0]);
        assert_eq!(support_enumeration_oracle(&m(&[&[2.0, 3.0], &[1.0, 5.0]])).unwrap(), 2.0);
    }

    #[test]
    fn rectangular_games() {
        // rock-paper-scissors with an extra dominated row
        let g = m(&[&[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0], &[-1.0, 1.0, 0.0], &[-2.0, -2.0, -2.0]]);
        let s = solve_matrix_game(&g, DEFAULT_TOL).unwrap();
        assert!(s.value.abs() < 1e-9);
        assert!(close(&s.row_mix, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0], 1e-9));
        let g = m(&[&[4.0, 0.0, 1.0]]);
        assert_eq!(solve_matrix_game(&g, DEFAULT_TOL).unwrap().value, 0.0);
    }

    #[test]
    fn degenerate_lp_terminates() {
        let g = m(&[&[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0], &[1.0, 1.0, 0.0]]);
        let s = solve_matrix_game(&g, DEFAULT_TOL).unwrap();
        assert!((s.value - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(PayoffMatrix::new(vec![]), Err(MatrixGameError::Malformed(_))));
        assert!(matches!(PayoffMatrix::new(vec![vec![]]), Err(MatrixGameError::Malformed(_))));
        assert!(matches!(PayoffMatrix::new(vec![vec![1.0], vec![1.0, 2.0]]), Err(MatrixGameError::Malformed(_))));
        assert!(PayoffMatrix::new(vec![vec![f64::NAN]]).is_err());
        assert!(matches!(solve_matrix_game(&m(&[&[0.0]]), 0.0), Err(MatrixGameError::BadTolerance(_))));
    }

    #[test]
    fn one_by_one() {
        assert_eq!(solve_matrix_game(&m(&[&[-2.0]]), DEFAULT_TOL).unwrap().value, -2.0);
        assert_eq!(support_enumeration_oracle(&m(&[&[0.0]])).unwrap(), 0.0);
    }
}
