//! Dense LU with partial pivoting, row-major storage.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular: pivot {pivot:e} at column {column} (row scale {scale:e})")]
    SingularMatrix { column: usize, pivot: f64, scale: f64 },
    #[error("dimension mismatch: matrix {rows}x{rows}, rhs {rhs}")]
    Dimension { rows: usize, rhs: usize },
}

/// Relative pivot threshold below which a system is reported singular.
pub const PIVOT_REL_TOL: f64 = 1e-14;

/// Diagnostics from a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Smallest |pivot| / row scale met during elimination.
    pub min_rel_pivot: f64,
}

/// Solves `a · x = b` in place (`a` is n×n row-major and is destroyed,
/// `b` becomes the solution).
pub fn solve_in_place(a: &mut [f64], b: &mut [f64]) -> Result<SolveStats, LinalgError> {
    let n = b.len();
    if a.len() != n * n {
        return Err(LinalgError::Dimension { rows: (a.len() as f64).sqrt() as usize, rhs: n });
    }
    // implicit row scaling for the pivot test
    let scale: Vec<f64> = (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let mut scale = scale;
    let mut min_rel = f64::INFINITY;
    for col in 0..n {
        let (piv_row, piv_abs) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let s = scale[piv_row];
        let rel = if s > 0.0 { piv_abs / s } else { 0.0 };
        if !(rel >= PIVOT_REL_TOL) {
            return Err(LinalgError::SingularMatrix { column: col, pivot: piv_abs, scale: s });
        }
        min_rel = min_rel.min(rel);
        if piv_row != col {
            for j in 0..n {
                a.swap(col * n + j, piv_row * n + j);
            }
            b.swap(col, piv_row);
            scale.swap(col, piv_row);
        }
        let pivot = a[col * n + col];
        let (head, tail) = a.split_at_mut((col + 1) * n);
        let prow = &head[col * n..];
        let bc = b[col];
        for (k, row) in tail.chunks_exact_mut(n).enumerate() {
            let factor = row[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            row[col] = 0.0;
            for j in col + 1..n {
                row[j] -= factor * prow[j];
            }
            b[col + 1 + k] -= factor * bc;
        }
    }
    for i in (0..n).rev() {
        let row = &a[i * n..(i + 1) * n];
        let s: f64 = (i + 1..n).map(|j| row[j] * b[j]).sum();
        b[i] = (b[i] - s) / row[i];
    }
    Ok(SolveStats { min_rel_pivot: min_rel })
}
