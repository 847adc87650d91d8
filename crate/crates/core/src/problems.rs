//! Built-in test problems `u' = f(t, u)`.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Real;

pub type RhsFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(T, &[T]) -> Matrix<T> + Send + Sync>;
pub type ExactFn<T> = Arc<dyn Fn(T) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
pub struct OdeProblem<T> {
    pub name: String,
    pub f: RhsFn<T>,
    pub jacobian: Option<JacobianFn<T>>,
    pub u0: Vec<T>,
    pub t_span: (T, T),
    pub exact: Option<ExactFn<T>>,
    /// `<u, f(t, u)> <= 0` for all `u`.
    pub dissipative: bool,
    /// Set when `f(t, u) = L u`.
    pub linear: Option<Matrix<T>>,
}

impl<T: Real> std::fmt::Debug for OdeProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("u0", &self.u0)
            .field("t_span", &self.t_span)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem '{0}'")]
    Unknown(String),
    #[error("bad argument for {problem}: {reason}")]
    Argument { problem: String, reason: String },
}

impl<T: Real> OdeProblem<T> {
    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn eval(&self, t: T, u: &[T]) -> Vec<T> {
        (self.f)(t, u)
    }

    pub fn with_t_span(mut self, t0: T, tf: T) -> Self {
        self.t_span = (t0, tf);
        if let Some(exact) = &self.exact {
            self.u0 = exact(t0);
        }
        self
    }

    /// `u' = L u` with the given exact solution.
    pub fn linear(name: impl Into<String>, l: Matrix<T>, u0: Vec<T>, t_span: (T, T), exact: Option<ExactFn<T>>) -> Self {
        let lf = l.clone();
        let lj = l.clone();
        Self {
            name: name.into(),
            f: Arc::new(move |_, u| lf.mul_vec(u)),
            jacobian: Some(Arc::new(move |_, _| lj.clone())),
            u0,
            t_span,
            exact,
            dissipative: false,
            linear: Some(l),
        }
    }
}

/// `u' = lambda u`, `u(0) = 1` on `[0, 4]`.
pub fn dahlquist<T: Real>(lambda: T) -> OdeProblem<T> {
    let l = Matrix::from_fn(1, 1, |_, _| lambda);
    let mut p = OdeProblem::linear(
        format!("dahlquist({lambda})"),
        l,
        vec![T::one()],
        (T::zero(), T::lit(4.0)),
        Some(Arc::new(move |t: T| vec![(lambda * t).exp()])),
    );
    p.dissipative = lambda <= T::zero();
    p
}

/// `u' = p t^(p-1)`, `u(0) = 0` on `[0, 1]`; exact `t^p`.
pub fn poly<T: Real>(p: u32) -> OdeProblem<T> {
    let pt = T::lit(p as f64);
    let pi = p as i32;
    OdeProblem {
        name: format!("poly({p})"),
        f: Arc::new(move |t, _| vec![pt * t.powi(pi - 1)]),
        jacobian: Some(Arc::new(|_, _| Matrix::zeros(1, 1))),
        u0: vec![T::zero()],
        t_span: (T::zero(), T::one()),
        exact: Some(Arc::new(move |t: T| vec![t.powi(pi)])),
        dissipative: false,
        linear: None,
    }
}

/// `u' = -u + cos t`, `u(0) = 1` on `[0, 4]`.
pub fn decay_forced<T: Real>() -> OdeProblem<T> {
    let half = T::lit(0.5);
    OdeProblem {
        name: "decay_forced".into(),
        f: Arc::new(|t: T, u: &[T]| vec![-u[0] + t.cos()]),
        jacobian: Some(Arc::new(|_, _| Matrix::from_fn(1, 1, |_, _| -T::one()))),
        u0: vec![T::one()],
        t_span: (T::zero(), T::lit(4.0)),
        exact: Some(Arc::new(move |t: T| vec![half * (t.cos() + t.sin()) + half * (-t).exp()])),
        dissipative: false,
        linear: None,
    }
}

/// `u' = -u^3`, `u(0) = 1/sqrt(3)` on `[0, 4]`; exact `1/sqrt(3 + 2t)`.
pub fn cubic_dissipative<T: Real>() -> OdeProblem<T> {
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    OdeProblem {
        name: "cubic_dissipative".into(),
        f: Arc::new(|_, u: &[T]| vec![-u[0] * u[0] * u[0]]),
        jacobian: Some(Arc::new(move |_, u: &[T]| Matrix::from_fn(1, 1, |_, _| -three * u[0] * u[0]))),
        u0: vec![T::one() / three.sqrt()],
        t_span: (T::zero(), T::lit(4.0)),
        exact: Some(Arc::new(move |t: T| vec![T::one() / (three + two * t).sqrt()])),
        dissipative: true,
        linear: None,
    }
}

/// Default stiff matrix: eigenvalues `-1` and `-199`.
pub fn default_stiff_matrix<T: Real>() -> [T; 3] {
    [T::lit(-100.0), T::lit(99.0), T::lit(-100.0)]
}

/// `u' = L u` with symmetric negative semi-definite `L = [[a, b], [b, c]]`,
/// `u(0) = (1, 0)` on `[0, 2]`.
pub fn stiff_linear<T: Real>(abc: [T; 3]) -> Result<OdeProblem<T>, ProblemError> {
    let [a, b, c] = abc;
    if a + c > T::zero() || a * c - b * b < T::zero() {
        return Err(ProblemError::Argument {
            problem: "stiff_linear".into(),
            reason: "L must be negative semi-definite".into(),
        });
    }
    let (lams, vecs) = sym2_eigen(a, b, c);
    let u0 = vec![T::one(), T::zero()];
    let coef = [
        vecs[0][0] * u0[0] + vecs[0][1] * u0[1],
        vecs[1][0] * u0[0] + vecs[1][1] * u0[1],
    ];
    let exact: ExactFn<T> = Arc::new(move |t: T| {
        let e0 = coef[0] * (lams[0] * t).exp();
        let e1 = coef[1] * (lams[1] * t).exp();
        vec![e0 * vecs[0][0] + e1 * vecs[1][0], e0 * vecs[0][1] + e1 * vecs[1][1]]
    });
    let l = Matrix::from_row_slice(2, 2, &[a, b, b, c]);
    let mut p = OdeProblem::linear(format!("stiff_linear({a},{b},{c})"), l, u0, (T::zero(), T::lit(2.0)), Some(exact));
    p.dissipative = true;
    Ok(p)
}

/// Eigenpairs of `[[a, b], [b, c]]`; eigenvectors are orthonormal rows.
pub fn sym2_eigen<T: Real>(a: T, b: T, c: T) -> ([T; 2], [[T; 2]; 2]) {
    let half = T::lit(0.5);
    let mean = half * (a + c);
    let rad = (half * (a - c)).hypot(b);
    let lams = [mean - rad, mean + rad];
    if b == T::zero() {
        return if a <= c {
            ([a, c], [[T::one(), T::zero()], [T::zero(), T::one()]])
        } else {
            ([c, a], [[T::zero(), T::one()], [T::one(), T::zero()]])
        };
    }
    let vec_for = |lam: T| {
        let (x, y) = (b, lam - a);
        let n = x.hypot(y);
        [x / n, y / n]
    };
    (lams, [vec_for(lams[0]), vec_for(lams[1])])
}

/// Predator-prey system `x' = 2/3 x - 4/3 x y`, `y' = x y - y` from `(1, 1)`
/// on `[0, 5]`. No closed form.
pub fn lotka_volterra<T: Real>() -> OdeProblem<T> {
    let (a, b) = (T::ratio(2, 3), T::ratio(4, 3));
    OdeProblem {
        name: "lotka_volterra".into(),
        f: Arc::new(move |_, u: &[T]| vec![a * u[0] - b * u[0] * u[1], u[0] * u[1] - u[1]]),
        jacobian: Some(Arc::new(move |_, u: &[T]| {
            Matrix::from_row_slice(2, 2, &[a - b * u[1], -b * u[0], u[1], u[0] - T::one()])
        })),
        u0: vec![T::one(), T::one()],
        t_span: (T::zero(), T::lit(5.0)),
        exact: None,
        dissipative: false,
        linear: None,
    }
}

/// Parses `dahlquist(-1)`, `poly(3)`, `decay_forced`, `cubic_dissipative`,
/// `stiff_linear` or `stiff_linear(a,b,c)`, `lotka_volterra`.
pub fn by_name<T: Real>(spec: &str) -> Result<OdeProblem<T>, ProblemError> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(i) if spec.ends_with(')') => (&spec[..i], Some(&spec[i + 1..spec.len() - 1])),
        Some(_) => return Err(ProblemError::Unknown(spec.into())),
        None => (spec, None),
    };
    let bad = |reason: &str| ProblemError::Argument {
        problem: name.into(),
        reason: reason.into(),
    };
    let nums = |s: &str| -> Result<Vec<f64>, ProblemError> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad(&format!("'{x}' is not a number"))))
            .collect()
    };
    match (name, args) {
        ("dahlquist", None) => Ok(dahlquist(-T::one())),
        ("dahlquist", Some(a)) => match nums(a)?.as_slice() {
            [l] => Ok(dahlquist(T::lit(*l))),
            _ => Err(bad("expected one value")),
        },
        ("poly", Some(a)) => match nums(a)?.as_slice() {
            [p] if *p >= 1.0 && p.fract() == 0.0 => Ok(poly(*p as u32)),
            _ => Err(bad("expected a positive integer")),
        },
        ("decay_forced", None) => Ok(decay_forced()),
        ("cubic_dissipative", None) => Ok(cubic_dissipative()),
        ("stiff_linear", None) => stiff_linear(default_stiff_matrix()),
        ("stiff_linear", Some(a)) => match nums(a)?.as_slice() {
            [x, y, z] => stiff_linear([T::lit(*x), T::lit(*y), T::lit(*z)]),
            _ => Err(bad("expected a,b,c for L = [[a,b],[b,c]]")),
        },
        ("lotka_volterra", None) => Ok(lotka_volterra()),
        _ => Err(ProblemError::Unknown(spec.into())),
    }
}
