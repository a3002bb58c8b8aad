//! Primal simplex for the scenario LP
//!
//! ```text
//! max  sum_S alpha_S f(S)
//! s.t. sum_{S ∋ i} alpha_S = p_i   (i = 0..n-1)
//!      sum_S alpha_S       = 1
//!      alpha >= 0
//! ```
//!
//! The constraint matrix has `n + 1` rows and one column per subset. Columns are
//! never stored: the column of `S` is the indicator of `S` with a trailing 1, so
//! pricing a column against duals `(lambda, gamma)` is `f(S) - gamma - lambda(S)`,
//! and `lambda(S)` for all `S` is one pass of subset sums.
//!
//! The basis inverse is rebuilt from scratch every iteration. With at most 17
//! rows that costs far less than pricing 2^16 columns, and it keeps the iterates
//! free of accumulated update error.
//!
//! The starting basis is the nested chain `∅ ⊂ S_1 ⊂ ... ⊂ S_n` over elements
//! sorted by decreasing marginal. Its masses are `1 - p_1`, `p_k - p_{k+1}` and
//! `p_n`, all nonnegative, so no phase one is needed.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Pivot and pricing tolerance (pricing is scaled by `max |f|`).
    pub pivot_tol: f64,
    /// Iteration cap; `None` means `50 * 2^n`.
    pub max_iterations: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { pivot_tol: 1e-9, max_iterations: None }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// Basic columns (subset masks) and their values.
    pub basis: Vec<u32>,
    pub primal: Vec<f64>,
    /// `lambda_0 .. lambda_{n-1}`, then `gamma`.
    pub duals: Vec<f64>,
}

/// Consecutive degenerate pivots tolerated under largest-coefficient pricing
/// before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 32;

/// Elements sorted by decreasing marginal, ties by ascending index.
pub(crate) fn descending_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    order
}

pub(crate) fn solve(objective: &[f64], p: &[f64], options: &LpOptions) -> Result<LpSolution> {
    let n = p.len();
    let m = n + 1;
    let columns = 1usize << n;
    debug_assert_eq!(objective.len(), columns);
    let cap = options.max_iterations.unwrap_or(50 * columns);
    let tol = options.pivot_tol;
    let scale = objective.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let price_tol = tol * scale;

    let mut rhs = p.to_vec();
    rhs.push(1.0);

    let order = descending_order(p);
    let mut basis = Vec::with_capacity(m);
    let mut chain = 0u32;
    basis.push(chain);
    for &i in &order {
        chain |= 1 << i;
        basis.push(chain);
    }

    let mut sums = vec![0.0f64; columns];
    let mut degenerate_run = 0usize;
    let mut iterations = 0usize;

    loop {
        let inverse = invert(&basis_matrix(&basis, n))
            .ok_or_else(|| Error::invalid("simplex basis became singular"))?;
        let primal = mat_vec(&inverse, &rhs);
        let cost: Vec<f64> = basis.iter().map(|&s| objective[s as usize]).collect();
        let duals: Vec<f64> = (0..m).map(|j| (0..m).map(|k| cost[k] * inverse[k][j]).sum()).collect();
        let gamma = duals[n];

        for s in 1..columns {
            let low = s.trailing_zeros() as usize;
            sums[s] = sums[s & (s - 1)] + duals[low];
        }

        let bland = degenerate_run >= DEGENERATE_SWITCH;
        let mut entering: Option<(usize, f64)> = None;
        for s in 0..columns {
            let d = objective[s] - gamma - sums[s];
            if d > price_tol {
                if bland {
                    entering = Some((s, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d > best) {
                    entering = Some((s, d));
                }
            }
        }

        let Some((q, _)) = entering else {
            return Ok(LpSolution { basis, primal, duals });
        };

        if iterations >= cap {
            return Err(Error::IterationCap(cap));
        }
        iterations += 1;

        let column = column_of(q as u32, n);
        let direction = mat_vec(&inverse, &column);

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if direction[r] > tol {
                let ratio = primal[r].max(0.0) / direction[r];
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        if ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[r] < basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
        }
        // The feasible region is a subset of the probability simplex, so an
        // improving ray cannot exist; reaching this means numerical breakdown.
        let (r, step) = leave.ok_or_else(|| Error::invalid("simplex found no leaving row"))?;

        if step <= 1e-12 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        basis[r] = q as u32;
    }
}

fn column_of(s: u32, n: usize) -> Vec<f64> {
    let mut col: Vec<f64> = (0..n).map(|i| (s >> i & 1) as f64).collect();
    col.push(1.0);
    col
}

fn basis_matrix(basis: &[u32], n: usize) -> Vec<Vec<f64>> {
    let m = n + 1;
    let mut b = vec![vec![0.0; m]; m];
    for (k, &s) in basis.iter().enumerate() {
        for (row, v) in column_of(s, n).into_iter().enumerate() {
            b[row][k] = v;
        }
    }
    b
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|j| (i == j) as u8 as f64));
            r
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| work[x][col].abs().total_cmp(&work[y][col].abs()))?;
        if work[pivot][col].abs() < 1e-12 {
            return None;
        }
        work.swap(col, pivot);
        let inv = 1.0 / work[col][col];
        for v in work[col].iter_mut() {
            *v *= inv;
        }
        for row in 0..m {
            if row != col {
                let factor = work[row][col];
                if factor != 0.0 {
                    for j in 0..2 * m {
                        work[row][j] -= factor * work[col][j];
                    }
                }
            }
        }
    }
    Some(work.into_iter().map(|r| r[m..].to_vec()).collect())
}
