//! Small dense linear algebra: matrices, LU solves, eigenvalues, QR.
//!
//! Everything here is sized for GLM work (dimensions well under 20), so the
//! routines favour simplicity over blocking or cache tuning.

mod eigen;
mod lu;
mod matrix;
mod qr;

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

pub use eigen::{eigenvalues, EigenError};
pub use lu::{solve_real, Lu};
pub use matrix::Matrix;
pub use qr::{affine_solutions, AffineSolutionSet};

/// Element type for LU factorization: real or complex.
pub trait Field:
    Copy
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    type Real: Real;

    fn modulus(self) -> Self::Real;
}

impl<T: Real> Field for T {
    type Real = T;

    fn modulus(self) -> T {
        self.abs()
    }
}

impl<T: Real> Field for Complex<T> {
    type Real = T;

    fn modulus(self) -> T {
        self.norm()
    }
}

pub type CMatrix<T> = Matrix<Complex<T>>;
