use num_traits::{Float, FromPrimitive, Zero};

use super::{Field, Matrix};
use crate::scalar::Real;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<E> {
    lu: Matrix<E>,
    perm: Vec<usize>,
}

impl<E: Field> Lu<E> {
    /// Factors a square matrix. Returns `None` when a pivot falls below
    /// `n * eps * max|a_ij|`.
    pub fn factor(a: &Matrix<E>) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "LU of non-square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a
            .as_slice()
            .iter()
            .fold(E::Real::zero(), |m, x| m.max(x.modulus()));
        let n_real = E::Real::from_usize(n.max(1)).unwrap();
        let thresh = n_real * E::Real::epsilon() * scale;
        for col in 0..n {
            let (piv, pmod) = (col..n)
                .map(|r| (r, lu[(r, col)].modulus()))
                .fold((col, E::Real::neg_infinity()), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
            if !(pmod > thresh) {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(col, piv);
            }
            let p = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] / p;
                lu[(r, col)] = f;
                if f.modulus() == E::Real::zero() {
                    continue;
                }
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu[(r, j)] = lu[(r, j)] - f * v;
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_vec(&self, b: &[E]) -> Vec<E> {
        let n = self.dim();
        assert_eq!(b.len(), n, "LU rhs length");
        let mut x: Vec<E> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solves for every column of `b`.
    pub fn solve(&self, b: &Matrix<E>) -> Matrix<E> {
        assert_eq!(b.rows(), self.dim(), "LU rhs rows");
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.col(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Convenience: solve `A x = b` for a real system.
pub fn solve_real<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    Lu::factor(a).map(|lu| lu.solve_vec(b))
}
