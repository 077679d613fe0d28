//! Dense row-major matrices and LU factorization with full pivoting.
//!
//! Factorizations reuse their storage, so repeated factor/solve cycles of a
//! fixed shape do not allocate.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out = self · x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Copies `src` into the block starting at `(r0, c0)`, scaled by `k`.
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix, k: f64) {
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = k * src[(i, j)];
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LuError {
    #[error("matrix is rank deficient: rank {rank} of {needed} (pivot {pivot:e})")]
    RankDeficient {
        rank: usize,
        needed: usize,
        pivot: f64,
    },
    #[error("more rows ({0}) than columns ({1})")]
    Shape(usize, usize),
}

/// `P·A·Q = L·U` for an `r × c` matrix with `r ≤ c`. For square input this
/// is an ordinary full-pivot LU; for wide input the first `r` pivot columns
/// form the best-conditioned square block (coordinate partitioning).
#[derive(Clone, Debug)]
pub struct FullPivLu {
    lu: Matrix,
    /// `row_perm[k]`: original row at position `k`.
    row_perm: Vec<usize>,
    /// `col_perm[k]`: original column at position `k`.
    col_perm: Vec<usize>,
    work: Vec<f64>,
    factored: bool,
}

/// Relative pivot threshold below which a matrix is declared singular.
const PIVOT_TOL: f64 = 1e-12;

impl FullPivLu {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            lu: Matrix::zeros(rows, cols),
            row_perm: (0..rows).collect(),
            col_perm: (0..cols).collect(),
            work: vec![0.0; rows.max(cols)],
            factored: false,
        }
    }

    /// Factors `a`, reusing storage when the shape matches.
    pub fn factor(&mut self, a: &Matrix) -> Result<(), LuError> {
        let (r, c) = (a.rows(), a.cols());
        if r > c {
            return Err(LuError::Shape(r, c));
        }
        if self.lu.rows() != r || self.lu.cols() != c {
            *self = Self::new(r, c);
        }
        self.lu.as_mut_slice().copy_from_slice(a.as_slice());
        for (k, p) in self.row_perm.iter_mut().enumerate() {
            *p = k;
        }
        for (k, p) in self.col_perm.iter_mut().enumerate() {
            *p = k;
        }
        self.factored = false;
        let scale = a.max_abs();
        let lu = &mut self.lu;
        for k in 0..r {
            let (mut pi, mut pj, mut best) = (k, k, -1.0);
            for i in k..r {
                for j in k..c {
                    let v = lu[(i, j)].abs();
                    if v > best {
                        best = v;
                        pi = i;
                        pj = j;
                    }
                }
            }
            if !(best > PIVOT_TOL * scale) || scale == 0.0 {
                return Err(LuError::RankDeficient {
                    rank: k,
                    needed: r,
                    pivot: best,
                });
            }
            if pi != k {
                for j in 0..c {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(pi, j)];
                    lu[(pi, j)] = t;
                }
                self.row_perm.swap(k, pi);
            }
            if pj != k {
                for i in 0..r {
                    let t = lu[(i, k)];
                    lu[(i, k)] = lu[(i, pj)];
                    lu[(i, pj)] = t;
                }
                self.col_perm.swap(k, pj);
            }
            let piv = lu[(k, k)];
            for i in k + 1..r {
                let l = lu[(i, k)] / piv;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..c {
                        lu[(i, j)] -= l * lu[(k, j)];
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn is_factored(&self) -> bool {
        self.factored
    }

    pub fn rows(&self) -> usize {
        self.lu.rows()
    }

    pub fn cols(&self) -> usize {
        self.lu.cols()
    }

    /// Column indices of the pivot block (dependent coordinates), in pivot
    /// order.
    pub fn dependent(&self) -> &[usize] {
        &self.col_perm[..self.lu.rows()]
    }

    /// Remaining columns (independent coordinates).
    pub fn independent(&self) -> &[usize] {
        &self.col_perm[self.lu.rows()..]
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    pub fn factors(&self) -> &Matrix {
        &self.lu
    }

    /// Solves `A_d·z = b` where `A_d` is the pivot block; writes
    /// `z[k]` to `x[col_perm[k]]` and leaves other entries of `x` untouched.
    pub fn solve_dependent(&mut self, b: &[f64], x: &mut [f64]) {
        let r = self.lu.rows();
        debug_assert!(self.factored);
        let y = &mut self.work[..r];
        for k in 0..r {
            y[k] = b[self.row_perm[k]];
        }
        for i in 0..r {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s;
        }
        for i in (0..r).rev() {
            let mut s = y[i];
            for j in i + 1..r {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        for k in 0..r {
            x[self.col_perm[k]] = y[k];
        }
    }

    /// Square solve `A·x = b`.
    pub fn solve(&mut self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(self.lu.rows(), self.lu.cols());
        self.solve_dependent(b, x);
    }

    /// `|U_kk|` extremes of the pivot block, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let r = self.lu.rows();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for k in 0..r {
            let v = self.lu[(k, k)].abs();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if r == 0 {
            1.0
        } else {
            hi / lo
        }
    }
}
