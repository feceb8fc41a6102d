//! Small dense two-phase simplex solver.
//!
//! Solves `min c·x` subject to `A x >= b`, `x >= 0` on a dense tableau with
//! Bland's rule for both the entering and leaving choices, which rules out
//! cycling. Sized for desk-scale problems (hundreds of constraints, a
//! handful of variables); this is the engine behind the omniscience-rate
//! oracle and is deliberately independent of any closed-form shortcut.

// Dense tableau arithmetic reads clearest with explicit row/column indices.
#![allow(clippy::needless_range_loop)]

use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimplexError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("pivot limit reached")]
    PivotLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution<F> {
    pub objective: F,
    pub x: Vec<F>,
}

/// Minimizes `c·x` subject to `rows[k]·x >= rhs[k]` for all k and `x >= 0`.
pub fn solve_min_geq<F: Real>(
    c: &[F],
    rows: &[Vec<F>],
    rhs: &[F],
    max_pivots: usize,
) -> Result<SimplexSolution<F>, SimplexError> {
    assert_eq!(rows.len(), rhs.len(), "one rhs per constraint row");
    for row in rows {
        assert_eq!(row.len(), c.len(), "constraint width must match objective");
    }
    let n = c.len();
    let m = rows.len();

    // Normalize every constraint to rhs >= 0. A `>=` row keeps a surplus and
    // an artificial variable; a flipped row becomes `<=` and takes a slack.
    enum Kind {
        Geq,
        Leq,
    }
    let mut normal: Vec<(Vec<F>, F, Kind)> = Vec::with_capacity(m);
    for (row, &b) in rows.iter().zip(rhs) {
        if b < F::zero() {
            normal.push((row.iter().map(|&v| -v).collect(), -b, Kind::Leq));
        } else {
            normal.push((row.clone(), b, Kind::Geq));
        }
    }
    let slack_count = normal
        .iter()
        .filter(|(_, _, k)| matches!(k, Kind::Leq))
        .count();
    let geq_count = m - slack_count;
    let slack_offset = n;
    let surplus_offset = slack_offset + slack_count;
    let artificial_offset = surplus_offset + geq_count;
    let total = artificial_offset + geq_count;
    let rhs_col = total;

    // tableau rows 0..m are constraints; row m is the objective.
    let mut tableau = vec![vec![F::zero(); total + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let mut slack_idx = 0;
    let mut geq_idx = 0;
    for (row_idx, (row, b, kind)) in normal.iter().enumerate() {
        tableau[row_idx][..n].copy_from_slice(row);
        tableau[row_idx][rhs_col] = *b;
        match kind {
            Kind::Leq => {
                let col = slack_offset + slack_idx;
                slack_idx += 1;
                tableau[row_idx][col] = F::one();
                basis[row_idx] = col;
            }
            Kind::Geq => {
                tableau[row_idx][surplus_offset + geq_idx] = -F::one();
                let art = artificial_offset + geq_idx;
                geq_idx += 1;
                tableau[row_idx][art] = F::one();
                basis[row_idx] = art;
            }
        }
    }

    let eps = simplex_eps::<F>();
    let mut pivots = 0usize;

    // Phase I: minimize the sum of artificial variables. The objective row
    // holds reduced costs of `min`; canonicalize against the artificial basis.
    for col in artificial_offset..total {
        tableau[m][col] = F::one();
    }
    for row in 0..m {
        if basis[row] >= artificial_offset {
            for col in 0..=total {
                let v = tableau[row][col];
                tableau[m][col] = tableau[m][col] - v;
            }
        }
    }
    iterate(
        &mut tableau,
        &mut basis,
        total,
        eps,
        max_pivots,
        &mut pivots,
        |_| true,
    )?;
    if tableau[m][rhs_col].abs() > real::<F>(1e-7).max(eps) {
        return Err(SimplexError::Infeasible);
    }

    // Drive any artificial variable still basic at level zero out of the
    // basis, so that no later pivot can lift it back above zero. Rows whose
    // non-artificial entries are all zero are redundant and stay inert.
    for row in 0..m {
        if basis[row] >= artificial_offset {
            if let Some(col) = (0..artificial_offset).find(|&col| tableau[row][col].abs() > eps) {
                let pivot_val = tableau[row][col];
                for c in 0..=total {
                    tableau[row][c] = tableau[row][c] / pivot_val;
                }
                for other in 0..=m {
                    if other == row {
                        continue;
                    }
                    let factor = tableau[other][col];
                    if factor.abs() > F::zero() {
                        for c in 0..=total {
                            let delta = factor * tableau[row][c];
                            tableau[other][c] = tableau[other][c] - delta;
                        }
                    }
                }
                basis[row] = col;
            }
        }
    }

    // Phase II: original objective, artificial columns barred from entering.
    for col in 0..=total {
        tableau[m][col] = if col < n { c[col] } else { F::zero() };
    }
    for row in 0..m {
        let pivot_col = basis[row];
        let factor = tableau[m][pivot_col];
        if factor.abs() > F::zero() {
            for col in 0..=total {
                let v = tableau[row][col];
                tableau[m][col] = tableau[m][col] - factor * v;
            }
        }
    }
    iterate(
        &mut tableau,
        &mut basis,
        total,
        eps,
        max_pivots,
        &mut pivots,
        |col| col < artificial_offset,
    )?;

    let mut x = vec![F::zero(); n];
    for row in 0..m {
        if basis[row] < n {
            x[basis[row]] = tableau[row][rhs_col];
        }
    }
    // The objective row carries -(c·x_basic) after canonical eliminations.
    Ok(SimplexSolution {
        objective: -tableau[m][rhs_col],
        x,
    })
}

fn simplex_eps<F: Real>() -> F {
    real::<F>(1e-10).max(F::epsilon() * real(64.0))
}

/// Runs simplex pivots until optimality: entering column = lowest index with
/// reduced cost < -eps (Bland), leaving row = minimum ratio with lowest
/// basis index tie-break.
fn iterate<F: Real>(
    tableau: &mut [Vec<F>],
    basis: &mut [usize],
    total: usize,
    eps: F,
    max_pivots: usize,
    pivots: &mut usize,
    allow: impl Fn(usize) -> bool,
) -> Result<(), SimplexError> {
    let m = basis.len();
    let rhs_col = total;
    loop {
        let mut entering = None;
        for col in 0..total {
            if allow(col) && tableau[m][col] < -eps {
                entering = Some(col);
                break;
            }
        }
        let Some(entering) = entering else {
            return Ok(());
        };
        let mut leaving: Option<(usize, F)> = None;
        for row in 0..m {
            let coeff = tableau[row][entering];
            if coeff > eps {
                let ratio = tableau[row][rhs_col] / coeff;
                let better = match leaving {
                    None => true,
                    Some((best_row, best_ratio)) => {
                        ratio < best_ratio - eps
                            || (ratio <= best_ratio + eps && basis[row] < basis[best_row])
                    }
                };
                if better {
                    leaving = Some((row, ratio));
                }
            }
        }
        let Some((pivot_row, _)) = leaving else {
            return Err(SimplexError::Unbounded);
        };
        if *pivots >= max_pivots {
            return Err(SimplexError::PivotLimit);
        }
        *pivots += 1;

        let pivot_val = tableau[pivot_row][entering];
        for col in 0..=total {
            tableau[pivot_row][col] = tableau[pivot_row][col] / pivot_val;
        }
        for row in 0..=m {
            if row == pivot_row {
                continue;
            }
            let factor = tableau[row][entering];
            if factor.abs() > F::zero() {
                for col in 0..=total {
                    let delta = factor * tableau[pivot_row][col];
                    tableau[row][col] = tableau[row][col] - delta;
                }
            }
        }
        basis[pivot_row] = entering;
    }
}
