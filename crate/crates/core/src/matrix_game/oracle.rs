//! Support enumeration for small matrix games.
//!
//! Every pair of equal-size row/column supports is tried: the equalisation
//! systems are solved by Gaussian elimination and the first pair whose
//! mixes are non-negative and form a saddle point gives the value.

use super::{MatrixGameError, PayoffMatrix};

pub const ORACLE_MAX_DIM: usize = 4;

const CHECK_EPS: f64 = 1e-9;

pub fn support_enumeration_oracle(m: &PayoffMatrix) -> Result<f64, MatrixGameError> {
    if m.rows() > ORACLE_MAX_DIM || m.cols() > ORACLE_MAX_DIM {
        return Err(MatrixGameError::OracleBudget(format!(
            "{}x{} matrix, limit {ORACLE_MAX_DIM}x{ORACLE_MAX_DIM}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows().min(m.cols());
    for k in 1..=n {
        for rows in subsets(m.rows(), k) {
            for cols in subsets(m.cols(), k) {
                if let Some(v) = try_supports(m, &rows, &cols) {
                    return Ok(v);
                }
            }
        }
    }
    // Every finite matrix game has an equilibrium on some square support pair.
    unreachable!("support enumeration found no equilibrium")
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

fn try_supports(m: &PayoffMatrix, rows: &[usize], cols: &[usize]) -> Option<f64> {
    // Row mix x on `rows` equalising the columns in `cols`.
    let (x_s, v_x) = equalize(rows.len(), |a, b| m.get(rows[a], cols[b]))?;
    // Column mix y on `cols` equalising the rows in `rows`.
    let (y_s, v_y) = equalize(cols.len(), |a, b| m.get(rows[b], cols[a]))?;
    if (v_x - v_y).abs() > CHECK_EPS {
        return None;
    }
    if x_s.iter().chain(&y_s).any(|&p| p < -CHECK_EPS) {
        return None;
    }
    let mut x = vec![0.0; m.rows()];
    for (&i, &p) in rows.iter().zip(&x_s) {
        x[i] = p;
    }
    let mut y = vec![0.0; m.cols()];
    for (&j, &p) in cols.iter().zip(&y_s) {
        y[j] = p;
    }
    let guaranteed = m.column_payoffs(&x).into_iter().all(|c| c >= v_x - CHECK_EPS);
    let capped = m.row_payoffs(&y).into_iter().all(|r| r <= v_x + CHECK_EPS);
    (guaranteed && capped).then_some(v_x)
}

/// Solves `Σ_a p_a A(a, b) = v` for every `b`, `Σ p = 1`.
fn equalize(k: usize, entry: impl Fn(usize, usize) -> f64) -> Option<(Vec<f64>, f64)> {
    // unknowns p_0..p_{k-1}, v
    let mut a = vec![vec![0.0; k + 2]; k + 1];
    for b in 0..k {
        for p in 0..k {
            a[b][p] = entry(p, b);
        }
        a[b][k] = -1.0;
    }
    for p in 0..k {
        a[k][p] = 1.0;
    }
    a[k][k + 1] = 1.0;
    let sol = gauss(a)?;
    Some((sol[..k].to_vec(), sol[k]))
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}
