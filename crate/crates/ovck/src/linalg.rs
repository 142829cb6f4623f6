//! Exact dense linear algebra over the rationals: elimination, rank,
//! determinant, nullspace, and linear solves. Rank decisions are exact —
//! there are no tolerances anywhere in this module.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Dense row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rational>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::from_integer(1.into());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

/// Reduced row echelon form; returns the pivot column of each pivot row.
pub fn rref(m: &mut Matrix) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m.cols {
        if row == m.rows {
            break;
        }
        let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
            continue;
        };
        m.swap_rows(row, p);
        let inv = m[(row, col)].recip();
        for c in col..m.cols {
            let v = std::mem::replace(&mut m[(row, c)], Rational::zero());
            m[(row, c)] = v * &inv;
        }
        for r in 0..m.rows {
            if r != row && !m[(r, col)].is_zero() {
                let factor = m[(r, col)].clone();
                for c in col..m.cols {
                    let sub = &factor * &m[(row, c)];
                    let v = std::mem::replace(&mut m[(r, c)], Rational::zero());
                    m[(r, c)] = v - sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank(m: &Matrix) -> usize {
    let mut work = m.clone();
    rref(&mut work).len()
}

/// Exact determinant by fraction-preserving Gaussian elimination.
pub fn determinant(m: &Matrix) -> Rational {
    assert_eq!(m.rows, m.cols, "determinant of non-square matrix");
    let n = m.rows;
    let mut work = m.clone();
    let mut det = Rational::from_integer(1.into());
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !work[(r, col)].is_zero()) else {
            return Rational::zero();
        };
        if p != col {
            work.swap_rows(col, p);
            det = -det;
        }
        let pivot = work[(col, col)].clone();
        det *= &pivot;
        for r in col + 1..n {
            if work[(r, col)].is_zero() {
                continue;
            }
            let factor = &work[(r, col)] / &pivot;
            for c in col..n {
                let sub = &factor * &work[(col, c)];
                let v = std::mem::replace(&mut work[(r, c)], Rational::zero());
                work[(r, c)] = v - sub;
            }
        }
    }
    det
}

/// Basis of the right nullspace `{v : Mv = 0}`.
pub fn nullspace(m: &Matrix) -> Vec<Vec<Rational>> {
    let mut work = m.clone();
    let pivots = rref(&mut work);
    let mut basis = Vec::new();
    let mut pivot_of_col = vec![None; m.cols];
    for (r, &c) in pivots.iter().enumerate() {
        pivot_of_col[c] = Some(r);
    }
    for free in 0..m.cols {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = vec![Rational::zero(); m.cols];
        v[free] = Rational::from_integer(1.into());
        for (col, pr) in pivot_of_col.iter().enumerate() {
            if let Some(r) = pr {
                v[col] = -work[(*r, free)].clone();
            }
        }
        basis.push(v);
    }
    basis
}

/// Outcome of an exact linear solve.
pub enum SolveOutcome {
    Unique(Vec<Rational>),
    /// Consistent but with free variables remaining.
    Underdetermined,
    /// The row index (in the original system) of a falsified equation.
    Inconsistent(usize),
}

/// Solves `Ax = b` exactly, reporting inconsistency or underdetermination.
pub fn solve(a: &Matrix, b: &[Rational]) -> SolveOutcome {
    assert_eq!(a.rows, b.len());
    let mut aug = Matrix::zero(a.rows, a.cols + 1);
    // Track original row identity through the elimination's row swaps.
    let mut origin: Vec<usize> = (0..a.rows).collect();
    for i in 0..a.rows {
        for j in 0..a.cols {
            aug[(i, j)] = a[(i, j)].clone();
        }
        aug[(i, a.cols)] = b[i].clone();
    }
    // Inline rref with origin tracking.
    let mut row = 0;
    let mut pivot_cols = Vec::new();
    for col in 0..a.cols {
        if row == aug.rows {
            break;
        }
        let Some(p) = (row..aug.rows).find(|&r| !aug[(r, col)].is_zero()) else {
            continue;
        };
        aug.swap_rows(row, p);
        origin.swap(row, p);
        let inv = aug[(row, col)].recip();
        for c in col..=a.cols {
            let v = std::mem::replace(&mut aug[(row, c)], Rational::zero());
            aug[(row, c)] = v * &inv;
        }
        for r in 0..aug.rows {
            if r != row && !aug[(r, col)].is_zero() {
                let factor = aug[(r, col)].clone();
                for c in col..=a.cols {
                    let sub = &factor * &aug[(row, c)];
                    let v = std::mem::replace(&mut aug[(r, c)], Rational::zero());
                    aug[(r, c)] = v - sub;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    for r in row..aug.rows {
        if !aug[(r, a.cols)].is_zero() {
            return SolveOutcome::Inconsistent(origin[r]);
        }
    }
    if pivot_cols.len() < a.cols {
        return SolveOutcome::Underdetermined;
    }
    let mut x = vec![Rational::zero(); a.cols];
    for (r, &c) in pivot_cols.iter().enumerate() {
        x[c] = aug[(r, a.cols)].clone();
    }
    SolveOutcome::Unique(x)
}

/// Solves with a unique solution required; errors otherwise.
pub fn solve_unique(a: &Matrix, b: &[Rational]) -> Result<Vec<Rational>> {
    match solve(a, b) {
        SolveOutcome::Unique(x) => Ok(x),
        SolveOutcome::Underdetermined => Err(Error::DegenerateSystem(
            "underdetermined linear system".into(),
        )),
        SolveOutcome::Inconsistent(r) => Err(Error::DegenerateSystem(format!(
            "inconsistent linear system at equation {r}"
        ))),
    }
}

/// Dimension of the span of a set of vectors.
pub fn span_dimension(vectors: &[Vec<Rational>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    rank(&Matrix::from_rows(vectors.to_vec()))
}

/// True when `v` lies in the span of `basis`.
pub fn in_span(basis: &[Vec<Rational>], v: &[Rational]) -> bool {
    let d = span_dimension(basis);
    let mut all: Vec<Vec<Rational>> = basis.to_vec();
    all.push(v.to_vec());
    span_dimension(&all) == d
}
