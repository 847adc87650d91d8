use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use super::Matrix;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("eigenvalue iteration did not converge after {iterations} sweeps")]
pub struct EigenError {
    pub iterations: usize,
}

const SWEEPS_PER_EIGENVALUE: usize = 60;

/// Eigenvalues of a small dense complex matrix.
///
/// Householder reduction to upper Hessenberg form followed by single-shift
/// QR sweeps with Wilkinson shifts and deflation. Order of the returned
/// values is unspecified.
pub fn eigenvalues<T: Real>(a: &Matrix<Complex<T>>) -> Result<Vec<Complex<T>>, EigenError> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "eigenvalues of non-square matrix");
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![a[(0, 0)]]),
        _ => {}
    }
    let mut h = a.clone();
    hessenberg(&mut h);

    let eps = T::epsilon();
    let mut out = vec![Complex::zero(); n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let cap = SWEEPS_PER_EIGENVALUE * n;
    loop {
        if hi == 0 {
            out[0] = h[(0, 0)];
            break;
        }
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let tiny = T::min_positive_value() * T::lit(1e3);
            if sub <= eps * diag || sub <= tiny {
                h[(lo, lo - 1)] = Complex::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            out[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > cap {
            return Err(EigenError { iterations: total });
        }
        let shift = if iter % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex::new(h[(hi, hi - 1)].norm() * T::lit(0.75), T::zero())
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_sweep(&mut h, lo, hi, shift);
    }
    Ok(out)
}

fn wilkinson_shift<T: Real>(h: &Matrix<Complex<T>>, hi: usize) -> Complex<T> {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let half = T::lit(0.5);
    let tr = (a + d) * half;
    let det = a * d - b * c;
    let disc = (tr * tr - det).sqrt();
    let l1 = tr + disc;
    let l2 = tr - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// One explicit shifted QR step on the active window `lo..=hi`.
fn qr_sweep<T: Real>(h: &mut Matrix<Complex<T>>, lo: usize, hi: usize, shift: Complex<T>) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rots: Vec<(T, Complex<T>)> = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = y * c - s.conj() * x;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for i in lo..=top {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = y * c - x * s;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` with real `c` mapping `(x, y)` to `(r, 0)`.
fn givens<T: Real>(x: Complex<T>, y: Complex<T>) -> (T, Complex<T>) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == T::zero() {
        return (T::one(), Complex::zero());
    }
    if ax == T::zero() {
        return (T::zero(), Complex::one());
    }
    let r = ax.hypot(ay);
    let c = ax / r;
    let s = (x / ax) * y.conj() / r;
    (c, s)
}

fn hessenberg<T: Real>(h: &mut Matrix<Complex<T>>) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        let alpha_norm = (k + 1..n)
            .map(|i| h[(i, k)].norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if alpha_norm == T::zero() {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == T::zero() {
            Complex::one()
        } else {
            x0 / x0.norm()
        };
        // v = x + phase*|x| e1, reflector P = I - 2 v v^H / (v^H v)
        let mut v: Vec<Complex<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2 = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        // left: H = P H on rows k+1..n
        for j in 0..n {
            let mut dotv = Complex::zero();
            for (idx, vi) in v.iter().enumerate() {
                dotv += vi.conj() * h[(k + 1 + idx, j)];
            }
            let f = dotv * (two / vnorm2);
            for (idx, vi) in v.iter().enumerate() {
                h[(k + 1 + idx, j)] -= *vi * f;
            }
        }
        // right: H = H P on columns k+1..n
        for i in 0..n {
            let mut dotv = Complex::zero();
            for (idx, vi) in v.iter().enumerate() {
                dotv += h[(i, k + 1 + idx)] * *vi;
            }
            let f = dotv * (two / vnorm2);
            for (idx, vi) in v.iter().enumerate() {
                h[(i, k + 1 + idx)] -= f * vi.conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex::zero();
        }
    }
}
