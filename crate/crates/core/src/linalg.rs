//! Exact rational linear algebra.
//!
//! Everything on the counting path goes through this module: determinants of
//! integer evaluation matrices, fiber solves `A x = P`, and the incremental
//! row-echelon system used to prune the fiber search.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms with positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<Rational, LinalgError> {
    let err = || LinalgError::Parse(s.to_string());
    let t = s.trim();
    match t.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(t.parse().map_err(|_| err())?)),
    }
}

/// Formats as `"p/q"`, or `"p"` for integers.
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Dense row-major matrix of rationals.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Outcome of an exact linear solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Unique(Vec<Rational>),
    NoSolution,
    UnderDetermined,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, entries: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        let n = rows.len();
        Ok(Matrix { rows: n, cols, entries: rows.into_iter().flatten().collect() })
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Result<Self, LinalgError> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn push_row(&mut self, row: Vec<Rational>) -> Result<(), LinalgError> {
        if self.rows > 0 && row.len() != self.cols {
            return Err(LinalgError::Dimension(format!(
                "row of length {} pushed onto {} columns",
                row.len(),
                self.cols
            )));
        }
        if self.rows == 0 {
            self.cols = row.len();
        }
        self.entries.extend(row);
        self.rows += 1;
        Ok(())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = &other[(k, c)];
                    if !b.is_zero() {
                        out[(r, c)] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Result<Vec<Rational>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::Dimension(format!("vector of length {} against {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// Exact determinant by Gaussian elimination with first-nonzero pivoting.
    pub fn det(&self) -> Result<Rational, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let mut a = self.entries.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !a[r * n + col].is_zero()) else {
                return Ok(Rational::zero());
            };
            if p != col {
                for c in 0..n {
                    a.swap(p * n + c, col * n + c);
                }
                det = -det;
            }
            let pivot = a[col * n + col].clone();
            det *= &pivot;
            for r in col + 1..n {
                if a[r * n + col].is_zero() {
                    continue;
                }
                let factor = &a[r * n + col] / &pivot;
                for c in col..n {
                    let sub = &factor * &a[col * n + c];
                    a[r * n + c] -= sub;
                }
            }
        }
        Ok(det)
    }

    pub fn rank(&self) -> usize {
        let mut sys = EchelonSystem::new(self.cols);
        for r in 0..self.rows {
            sys.push(self.row(r).to_vec(), Rational::zero());
        }
        sys.rank()
    }

    /// Classifies and solves `self * x = rhs` exactly.
    pub fn solve(&self, rhs: &[Rational]) -> Result<Solution, LinalgError> {
        if rhs.len() != self.rows {
            return Err(LinalgError::Dimension(format!("rhs of length {} against {} rows", rhs.len(), self.rows)));
        }
        let mut sys = EchelonSystem::new(self.cols);
        for r in 0..self.rows {
            if sys.push(self.row(r).to_vec(), rhs[r].clone()) == RowOutcome::Inconsistent {
                return Ok(Solution::NoSolution);
            }
        }
        match sys.unique_solution() {
            Some(x) => Ok(Solution::Unique(x)),
            None => Ok(Solution::UnderDetermined),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Rational;
    fn index(&self, (r, c): (usize, usize)) -> &Rational {
        &self.entries[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Rational {
        &mut self.entries[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOutcome {
    /// The row raised the rank.
    Independent,
    /// The row was a combination of earlier rows with matching right-hand side.
    Redundant,
    /// The row was a combination of earlier rows but its right-hand side disagrees.
    Inconsistent,
}

/// Reduced row-echelon form of a growing system `A x = b`.
///
/// Rows can be appended one at a time; every pivot column is kept cleared in
/// all other rows so that determined linear functionals can be read off
/// without re-eliminating.
#[derive(Debug, Clone)]
pub struct EchelonSystem {
    cols: usize,
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    pivots: Vec<usize>,
    // pivot column -> row index
    pivot_row: Vec<Option<usize>>,
}

impl EchelonSystem {
    pub fn new(cols: usize) -> Self {
        EchelonSystem { cols, rows: Vec::new(), rhs: Vec::new(), pivots: Vec::new(), pivot_row: vec![None; cols] }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, mut row: Vec<Rational>, mut rhs: Rational) -> RowOutcome {
        assert_eq!(row.len(), self.cols, "row length must match column count");
        for (i, &p) in self.pivots.iter().enumerate() {
            if row[p].is_zero() {
                continue;
            }
            let f = row[p].clone();
            for (c, x) in self.rows[i].iter().enumerate() {
                if !x.is_zero() {
                    row[c] -= &f * x;
                }
            }
            rhs -= &f * &self.rhs[i];
        }
        let Some(p) = row.iter().position(|x| !x.is_zero()) else {
            return if rhs.is_zero() { RowOutcome::Redundant } else { RowOutcome::Inconsistent };
        };
        let inv = row[p].recip();
        if !inv.is_one() {
            for x in row.iter_mut().filter(|x| !x.is_zero()) {
                *x *= &inv;
            }
            rhs *= &inv;
        }
        for i in 0..self.rows.len() {
            if self.rows[i][p].is_zero() {
                continue;
            }
            let f = self.rows[i][p].clone();
            for c in 0..self.cols {
                if !row[c].is_zero() {
                    let sub = &f * &row[c];
                    self.rows[i][c] -= sub;
                }
            }
            let sub = &f * &rhs;
            self.rhs[i] -= sub;
        }
        self.pivot_row[p] = Some(self.rows.len());
        self.pivots.push(p);
        self.rows.push(row);
        self.rhs.push(rhs);
        RowOutcome::Independent
    }

    /// Value of `sum coeffs[k].1 * x[coeffs[k].0]` if the system pins it down.
    pub fn determined_value(&self, functional: &[(usize, i64)]) -> Option<Rational> {
        let mut value = Rational::zero();
        // Non-pivot columns touched by the functional or by the pivot rows it pulls in.
        let mut residual: Vec<(usize, Rational)> = Vec::new();
        let add = |residual: &mut Vec<(usize, Rational)>, c: usize, x: Rational| {
            if let Some(e) = residual.iter_mut().find(|e| e.0 == c) {
                e.1 += x;
            } else {
                residual.push((c, x));
            }
        };
        for &(c, k) in functional {
            if k == 0 {
                continue;
            }
            match self.pivot_row[c] {
                Some(r) => {
                    let kr = int(k);
                    value += &kr * &self.rhs[r];
                    for (j, x) in self.rows[r].iter().enumerate() {
                        if j != c && !x.is_zero() {
                            add(&mut residual, j, -(&kr * x));
                        }
                    }
                }
                None => add(&mut residual, c, int(k)),
            }
        }
        residual.iter().all(|(_, x)| x.is_zero()).then_some(value)
    }

    /// The unique solution, if the system has full column rank.
    pub fn unique_solution(&self) -> Option<Vec<Rational>> {
        if self.rows.len() != self.cols {
            return None;
        }
        let mut x = vec![Rational::zero(); self.cols];
        for (i, &p) in self.pivots.iter().enumerate() {
            x[p] = self.rhs[i].clone();
        }
        Some(x)
    }
}
