//! Dense two-phase simplex for small linear programs.
//!
//! Solves `min c.x` subject to linear rows and `x >= 0`. Bland's rule is used
//! for both entering and leaving variables, so the method cannot cycle.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Minimizes `objective . x` over `x >= 0` subject to `constraints`.
pub fn minimize(objective: &[f64], constraints: &[Constraint]) -> Result<Solution> {
    let n = objective.len();
    let m = constraints.len();
    if constraints.iter().any(|c| c.coeffs.len() != n) {
        return Err(Error::Argument("constraint width does not match objective".into()));
    }

    // Column layout: structural | slack/surplus | artificial | rhs.
    let num_slack = constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let num_art = constraints
        .iter()
        .filter(|c| {
            let flip = c.rhs < 0.0;
            matches!(
                (c.relation, flip),
                (Relation::Eq, _) | (Relation::Ge, false) | (Relation::Le, true)
            )
        })
        .count();
    let width = n + num_slack + num_art + 1;
    let rhs_col = width - 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let (mut next_slack, mut next_art) = (n, n + num_slack);
    for (i, c) in constraints.iter().enumerate() {
        let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        let relation = match (c.relation, sign < 0.0) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        };
        for (j, &a) in c.coeffs.iter().enumerate() {
            t[i][j] = sign * a;
        }
        t[i][rhs_col] = sign * c.rhs;
        match relation {
            Relation::Le => {
                t[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t[i][next_slack] = -1.0;
                next_slack += 1;
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    let art_start = n + num_slack;
    if num_art > 0 {
        let mut phase1 = vec![0.0; width - 1];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        let value = run_simplex(&mut t, &mut basis, &phase1, width - 1)?;
        if value > 1e-9 {
            return Err(Error::Argument("linear program is infeasible".into()));
        }
        // Drive any artificial still basic (at zero) out of the basis.
        for i in 0..m {
            if basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, j);
                }
            }
        }
    }

    let mut phase2 = vec![0.0; art_start];
    phase2[..n].copy_from_slice(objective);
    // Artificial columns are excluded from entering in phase two.
    let objective_value = run_simplex(&mut t, &mut basis, &phase2, art_start)?;
    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = t[i][rhs_col];
        }
    }
    Ok(Solution {
        objective: objective_value,
        x,
    })
}

/// Runs primal simplex on the tableau, allowing columns `< num_cols` to enter.
/// Returns the optimal objective value.
fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], num_cols: usize) -> Result<f64> {
    let m = t.len();
    let rhs_col = t.first().map_or(0, |r| r.len() - 1);
    let cost_of = |j: usize| cost.get(j).copied().unwrap_or(0.0);
    let max_pivots = 50 * (m + num_cols) + 1000;
    for _ in 0..max_pivots {
        // Reduced costs: c_j - c_B B^-1 A_j, read directly off the tableau.
        let entering = (0..num_cols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let reduced = cost_of(j) - (0..m).map(|i| cost_of(basis[i]) * t[i][j]).sum::<f64>();
            reduced < -EPS
        });
        let Some(j) = entering else {
            return Ok((0..m).map(|i| cost_of(basis[i]) * t[i][rhs_col]).sum());
        };
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][j] > EPS {
                let ratio = t[i][rhs_col] / t[i][j];
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
        }
        let Some((i, _)) = leaving else {
            return Err(Error::Argument("linear program is unbounded".into()));
        };
        pivot(t, basis, i, j);
    }
    Err(Error::Internal("simplex exceeded its pivot budget".into()))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            r[col] = 0.0;
        }
    }
    basis[row] = col;
}
