//! Small numerical kernels shared by the pressure, measure and spectrum code:
//! log-sum-exp with pairwise summation, Perron power iteration, Aitken's
//! Δ² extrapolation, least-squares slopes and a dense linear solve.

use crate::error::{Error, Result};

/// Default relative tolerance for the Perron power iteration.
pub const POWER_TOL: f64 = 1e-13;
/// Default iteration cap for the Perron power iteration.
pub const POWER_MAX_ITER: usize = 1_000_000;
/// Aitken denominators below this are treated as numerically unstable.
pub const AITKEN_MIN_DENOM: f64 = 1e-14;

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the rounding pattern is fixed for a given input order and the error is
/// O(ε log n) for any order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `log Σ exp(x_i)`, shifted by the maximum and summed pairwise.
/// Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let shifted: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

/// Perron data of a nonnegative primitive matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub eigenvalue: f64,
    /// Strictly positive eigenvector normalized to sum 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration for the Perron root and right eigenvector of a square
/// nonnegative matrix given row-major. Stops when both the eigenvalue and the
/// normalized vector change by less than `tol` (relative for the eigenvalue).
pub fn perron_power_iteration(matrix: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<PerronPair> {
    let m = matrix.len();
    if m == 0 || matrix.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidArgument("power iteration needs a nonempty square matrix".into()));
    }
    let mut v = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        for (i, row) in matrix.iter().enumerate() {
            next[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let norm: f64 = next.iter().sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NoConvergence { iterations: it });
        }
        // v sums to one, so the eigenvalue estimate is the mass of Mv.
        let new_lambda = norm;
        let mut delta: f64 = 0.0;
        for i in 0..m {
            let x = next[i] / norm;
            delta = delta.max((x - v[i]).abs());
            v[i] = x;
        }
        let lambda_change = (new_lambda - lambda).abs();
        lambda = new_lambda;
        if it > 1 && delta < tol && lambda_change <= tol * lambda {
            return Ok(PerronPair { eigenvalue: lambda, vector: v, iterations: it });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

/// Transpose of a square row-major matrix.
pub fn transpose(matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = matrix.len();
    (0..m).map(|j| (0..m).map(|i| matrix[i][j]).collect()).collect()
}

/// One step of Aitken's Δ² process on three consecutive terms. Returns `None`
/// when the second difference is below [`AITKEN_MIN_DENOM`].
pub fn aitken(s0: f64, s1: f64, s2: f64) -> Option<f64> {
    let d1 = s2 - s1;
    let d0 = s1 - s0;
    let denom = d1 - d0;
    if denom.abs() < AITKEN_MIN_DENOM || !denom.is_finite() {
        return None;
    }
    Some(s2 - d1 * d1 / denom)
}

/// Ordinary least-squares slope of `y` against `x`. `None` with fewer than two
/// points or a degenerate abscissa.
pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("linear system dimension mismatch".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidArgument("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Stationary distribution of a row-stochastic matrix: solves `π Q = π`,
/// `Σ π = 1` by replacing one balance equation with the normalization.
pub fn stationary_distribution(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = q.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            // row i of (Q^T - I)
            a[i][j] = q[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    solve_linear(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_on_small_inputs() {
        let xs = [0.1, -2.0, 3.5, 0.0];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_survives_large_exponents() {
        let xs = [1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn perron_of_golden_matrix() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        let p = perron_power_iteration(&m, POWER_TOL, POWER_MAX_ITER).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.eigenvalue - golden).abs() < 1e-12);
        assert!((p.vector[0] / p.vector[1] - golden).abs() < 1e-11);
    }

    #[test]
    fn aitken_is_exact_on_geometric_sequences() {
        let s = |n: i32| 2.0 + 0.5f64.powi(n);
        let acc = aitken(s(3), s(4), s(5)).unwrap();
        assert!((acc - 2.0).abs() < 1e-14);
        assert!(aitken(1.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let q = vec![vec![0.9, 0.1], vec![0.5, 0.5]];
        let pi = stationary_distribution(&q).unwrap();
        assert!((pi[0] - 5.0 / 6.0).abs() < 1e-14);
        assert!((pi[1] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        assert!((ls_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert!(ls_slope(&pts[..1]).is_none());
    }
}
