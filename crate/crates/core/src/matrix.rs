//! Small square matrices of expressions.
//!
//! Determinants use cofactor expansion and inverses the adjugate, so no
//! pivot on a symbolic entry ever has to be chosen.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    n: usize,
    entries: Vec<Expr>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("matrix with {n} rows is not square")));
        }
        Ok(Matrix { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Result<Expr>>(n: usize, mut f: F) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j)?);
            }
        }
        Ok(Matrix { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n * n).map(|k| if k / n == k % n { Expr::one() } else { Expr::zero() }).collect();
        Matrix { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Expr] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let entries = (0..n * n).map(|k| self.get(k % n, k / n).clone()).collect();
        Matrix { n, entries }
    }

    pub fn map<F: FnMut(&Expr) -> Result<Expr>>(&self, f: F) -> Result<Matrix> {
        Ok(Matrix { n: self.n, entries: self.entries.iter().map(f).collect::<Result<_>>()? })
    }

    pub fn normalize(&self) -> Result<Matrix> {
        self.map(Expr::normalize)
    }

    /// The same matrix with row `i` replaced.
    pub fn with_row(&self, i: usize, row: &[Expr]) -> Result<Matrix> {
        if row.len() != self.n {
            return Err(Error::Dimension(format!("row of length {} for a {}x{} matrix", row.len(), self.n, self.n)));
        }
        let mut out = self.clone();
        out.entries[i * self.n..(i + 1) * self.n].clone_from_slice(row);
        Ok(out)
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> Matrix {
        let n = self.n;
        let mut entries = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|&i| i != skip_row) {
            for j in (0..n).filter(|&j| j != skip_col) {
                entries.push(self.get(i, j).clone());
            }
        }
        Matrix { n: n - 1, entries }
    }

    /// Determinant by expansion along the first row, not normalized.
    pub fn det_raw(&self) -> Expr {
        match self.n {
            0 => Expr::one(),
            1 => self.get(0, 0).clone(),
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            n => Expr::add(
                (0..n)
                    .filter(|&j| !self.get(0, j).is_zero())
                    .map(|j| {
                        let term = self.get(0, j) * &self.minor(0, j).det_raw();
                        if j % 2 == 0 { term } else { -term }
                    })
                    .collect(),
            ),
        }
    }

    pub fn det(&self) -> Result<Expr> {
        self.det_raw().normalize()
    }

    pub fn cofactor(&self, i: usize, j: usize) -> Result<Expr> {
        let m = self.minor(i, j).det_raw();
        let signed = if (i + j).is_multiple_of(2) { m } else { -m };
        signed.normalize()
    }

    /// Transpose of the cofactor matrix.
    pub fn adjugate(&self) -> Result<Matrix> {
        if self.n == 1 {
            return Ok(Matrix::identity(1));
        }
        Matrix::from_fn(self.n, |i, j| self.cofactor(j, i))
    }

    /// Inverse as adjugate over determinant; fails when the determinant
    /// normalizes to zero.
    pub fn inverse(&self) -> Result<Matrix> {
        let det = self.det()?;
        if det.is_zero() {
            return Err(Error::DegenerateChange("the Jacobian determinant vanishes identically".into()));
        }
        let inv_det = det.recip();
        self.adjugate()?.map(|e| (e * &inv_det).normalize())
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.n != other.n {
            return Err(Error::Dimension(format!("{}x{} times {}x{}", self.n, self.n, other.n, other.n)));
        }
        Matrix::from_fn(self.n, |i, j| {
            Expr::add((0..self.n).map(|k| self.get(i, k) * other.get(k, j)).collect()).normalize()
        })
    }

    pub fn mul_vec(&self, v: &[Expr]) -> Result<Vec<Expr>> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!("vector of length {} for a {}x{} matrix", v.len(), self.n, self.n)));
        }
        Ok((0..self.n).map(|i| Expr::add((0..self.n).map(|k| self.get(i, k) * &v[k]).collect())).collect())
    }

    /// True when every entry normalizes to the identity matrix's.
    pub fn is_identity(&self) -> Result<bool> {
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { Expr::one() } else { Expr::zero() };
                if !(self.get(i, j) - &target).normalizes_to_zero()? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
