//! Dense linear algebra over any [`Scalar`].
//!
//! Pivoting compares only the value component, so the same elimination
//! sequence is applied to every derivative order and jets flow through
//! solves exactly.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::Scalar;

/// Row-major dense matrix.
pub type Matrix<S> = Vec<Vec<S>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular at elimination step {step}")]
    Singular { step: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

pub fn identity<S: Scalar>(n: usize) -> Matrix<S> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| S::constant(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn zeros<S: Scalar>(rows: usize, cols: usize) -> Matrix<S> {
    vec![vec![S::zero(); cols]; rows]
}

/// Solves `A X = B` by Gauss-Jordan elimination with partial pivoting.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Result<Matrix<S>, LinalgError> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) || b.len() != n {
        return Err(LinalgError::Shape(format!(
            "left side must be square with {n} rows matching the right side ({} rows)",
            b.len()
        )));
    }
    let mut a: Matrix<S> = a.to_vec();
    let mut b: Matrix<S> = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))
            .expect("non-empty range");
        if a[pivot][col].value() == 0.0 || !a[pivot][col].value().is_finite() {
            return Err(LinalgError::Singular { step: col });
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = S::constant(1.0) / a[col][col].clone();
        for j in col..n {
            a[col][j] = a[col][j].clone() * inv.clone();
        }
        for x in b[col].iter_mut() {
            *x = x.clone() * inv.clone();
        }
        for row in 0..n {
            if row == col || a[row][col].is_exact_zero() {
                continue;
            }
            let factor = a[row][col].clone();
            for j in col..n {
                let t = factor.clone() * a[col][j].clone();
                a[row][j] = a[row][j].clone() - t;
            }
            for j in 0..b[row].len() {
                let t = factor.clone() * b[col][j].clone();
                b[row][j] = b[row][j].clone() - t;
            }
        }
    }
    Ok(b)
}

pub fn inverse<S: Scalar>(a: &[Vec<S>]) -> Result<Matrix<S>, LinalgError> {
    solve(a, &identity::<S>(a.len()))
}

pub fn mat_mul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Matrix<S> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(S::zero(), |acc, k| acc + row[k].clone() * b[k][j].clone())
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec<S: Scalar>(a: &[Vec<S>], v: &[S]) -> Vec<S> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(S::zero(), |acc, (m, x)| acc + m.clone() * x.clone())
        })
        .collect()
}

pub fn values<S: Scalar>(a: &[Vec<S>]) -> Matrix<f64> {
    a.iter()
        .map(|r| r.iter().map(Scalar::value).collect())
        .collect()
}

/// Ratio of smallest to largest singular value of a (possibly rectangular)
/// matrix, `0.0` for an all-zero matrix.
pub fn singular_value_ratio(a: &[Vec<f64>]) -> f64 {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| a[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
