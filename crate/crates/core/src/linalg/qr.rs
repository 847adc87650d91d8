use super::Matrix;
use crate::scalar::Real;

/// Parametrization `x = particular + null_basis * y` of the solutions of an
/// underdetermined (or square) linear system `G x = h`.
#[derive(Clone, Debug)]
pub struct AffineSolutionSet<T> {
    pub particular: Vec<T>,
    /// Columns span the null space of `G`; shape `n x (n - rank)`.
    pub null_basis: Matrix<T>,
    pub rank: usize,
    /// `max |G x0 - h|` of the particular solution; nonzero when the system
    /// is inconsistent.
    pub residual: T,
}

impl<T: Real> AffineSolutionSet<T> {
    pub fn dim(&self) -> usize {
        self.null_basis.cols()
    }

    pub fn point(&self, y: &[T]) -> Vec<T> {
        let mut x = self.particular.clone();
        if !y.is_empty() {
            for (xi, d) in x.iter_mut().zip(self.null_basis.mul_vec(y)) {
                *xi += d;
            }
        }
        x
    }
}

/// Minimum-norm particular solution and null-space basis of `G x = h`.
///
/// Householder QR with column pivoting of `G^T`; rank is decided with the
/// relative tolerance `rank_tol`.
pub fn affine_solutions<T: Real>(g: &Matrix<T>, h: &[T], rank_tol: T) -> AffineSolutionSet<T> {
    let (m, n) = g.shape();
    assert_eq!(h.len(), m, "rhs length");
    // Work on W = G^T (n x m): W P = Q R.
    let mut w = g.transpose();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut reflectors: Vec<Vec<T>> = Vec::new();
    let kmax = m.min(n);
    let mut col_norms: Vec<T> = (0..m).map(|j| col_norm(&w, j, 0)).collect();
    let scale = col_norms.iter().fold(T::zero(), |a, &b| a.max(b));
    let mut rank = 0;
    for k in 0..kmax {
        let (p, pn) = (k..m)
            .map(|j| (j, col_norms[j]))
            .fold((k, T::neg_infinity()), |b, c| if c.1 > b.1 { c } else { b });
        if !(pn > rank_tol * scale) || scale == T::zero() {
            break;
        }
        if p != k {
            for i in 0..n {
                let t = w[(i, k)];
                w[(i, k)] = w[(i, p)];
                w[(i, p)] = t;
            }
            perm.swap(k, p);
            col_norms.swap(k, p);
        }
        let alpha = col_norm(&w, k, k);
        let sign = if w[(k, k)] >= T::zero() { T::one() } else { -T::one() };
        let mut v: Vec<T> = (k..n).map(|i| w[(i, k)]).collect();
        v[0] += sign * alpha;
        let vn2: T = v.iter().map(|&x| x * x).sum();
        if vn2 > T::zero() {
            apply_reflector(&mut w, &v, k, vn2);
        }
        reflectors.push(v);
        rank += 1;
        for j in k + 1..m {
            col_norms[j] = col_norm(&w, j, k + 1);
        }
    }

    // Q = H_0 H_1 ... H_{r-1}; build its full n x n form.
    let mut q = Matrix::identity(n);
    for (k, v) in reflectors.iter().enumerate().rev() {
        let vn2: T = v.iter().map(|&x| x * x).sum();
        if vn2 > T::zero() {
            apply_reflector(&mut q, v, k, vn2);
        }
    }

    // G x = h  <=>  R^T (Q^T x) = P^T h. Forward-substitute the leading r rows.
    let hp: Vec<T> = perm.iter().map(|&i| h[i]).collect();
    let mut y1 = vec![T::zero(); rank];
    for i in 0..rank {
        let mut acc = hp[i];
        for j in 0..i {
            acc -= w[(j, i)] * y1[j];
        }
        y1[i] = acc / w[(i, i)];
    }
    let particular: Vec<T> = (0..n)
        .map(|i| (0..rank).map(|j| q[(i, j)] * y1[j]).sum())
        .collect();
    let null_basis = Matrix::from_fn(n, n - rank, |i, j| q[(i, rank + j)]);
    let gx = g.mul_vec(&particular);
    let residual = gx
        .iter()
        .zip(h)
        .fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()));
    AffineSolutionSet {
        particular,
        null_basis,
        rank,
        residual,
    }
}

fn col_norm<T: Real>(w: &Matrix<T>, j: usize, from: usize) -> T {
    (from..w.rows()).map(|i| w[(i, j)] * w[(i, j)]).sum::<T>().sqrt()
}

/// Applies `I - 2 v v^T / |v|^2` (acting on rows `k..`) from the left.
fn apply_reflector<T: Real>(w: &mut Matrix<T>, v: &[T], k: usize, vn2: T) {
    let two = T::lit(2.0);
    for j in 0..w.cols() {
        let d: T = v.iter().enumerate().map(|(i, &vi)| vi * w[(k + i, j)]).sum();
        let f = two * d / vn2;
        for (i, &vi) in v.iter().enumerate() {
            w[(k + i, j)] -= f * vi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system() {
        let g = Matrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let s = affine_solutions(&g, &[3.0, 5.0], 1e-12);
        assert_eq!(s.rank, 2);
        assert_eq!(s.dim(), 0);
        assert!((s.particular[0] - 0.8).abs() < 1e-14);
        assert!((s.particular[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_min_norm_and_null_space() {
        // x + y + z = 3
        let g = Matrix::<f64>::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let s = affine_solutions(&g, &[3.0], 1e-12);
        assert_eq!(s.rank, 1);
        assert_eq!(s.dim(), 2);
        for x in &s.particular {
            assert!((x - 1.0).abs() < 1e-14);
        }
        for j in 0..2 {
            let col = s.null_basis.col(j);
            assert!(col.iter().sum::<f64>().abs() < 1e-14);
        }
        let p = s.point(&[0.3, -2.0]);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rank_deficient_inconsistent() {
        let g = Matrix::<f64>::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let s = affine_solutions(&g, &[1.0, 3.0], 1e-12);
        assert_eq!(s.rank, 1);
        assert!(s.residual > 0.1);
    }
}
