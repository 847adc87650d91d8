//! GLM tableaux, the compact (step-copy) form, and structural checks.
//!
//! A tableau advances `k` stored steps with `s` stages:
//!
//! ```text
//! y_i     = sum_l d[i][l] u_l + h sum_l a_hat[i][l] F(u_l) + h sum_j a[i][j] F(y_j)
//! u_{n+1} = sum_l theta[l] u_l + h sum_l b_hat[l] F(u_l) + h sum_j b[j] F(y_j)
//! ```
//!
//! Steps are stored oldest first, so `u_{k-1}` is the newest value `u^n` and
//! the derivative weights `a_hat`, `b_hat` only reach the `k - 1` older steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{max_abs, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("block `{block}` has shape {found}, expected {expected}")]
    Dimension {
        block: &'static str,
        expected: String,
        found: String,
    },
    #[error("k and s must be at least 1")]
    EmptyMethod,
    #[error("step offsets must be strictly increasing and end at 0")]
    StepOffsets,
    #[error("step offsets other than -[k-1, ..., 0] require explicit carry rows")]
    MissingCarry,
    #[error("not in core form: {0}")]
    NotCoreForm(String),
}

fn dim_err(block: &'static str, expected: (usize, usize), found: (usize, usize)) -> GlmError {
    GlmError::Dimension {
        block,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}

/// One output row: weights on steps, old-step derivatives and stage derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateRow<T> {
    pub theta: Vec<T>,
    pub b_hat: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> UpdateRow<T> {
    pub fn zeros(k: usize, s: usize) -> Self {
        Self {
            theta: vec![T::zero(); k],
            b_hat: vec![T::zero(); k.saturating_sub(1)],
            b: vec![T::zero(); s],
        }
    }

    /// `[b_hat | b]`, the derivative weights in compact ordering.
    pub fn b_tilde(&self) -> Vec<T> {
        self.b_hat.iter().chain(&self.b).copied().collect()
    }

    fn check(&self, k: usize, s: usize) -> Result<(), GlmError> {
        if self.theta.len() != k {
            return Err(dim_err("Theta", (1, k), (1, self.theta.len())));
        }
        if self.b_hat.len() != k - 1 {
            return Err(dim_err("bhat", (1, k - 1), (1, self.b_hat.len())));
        }
        if self.b.len() != s {
            return Err(dim_err("b", (1, s), (1, self.b.len())));
        }
        Ok(())
    }
}

/// Coefficient blocks of a `k`-step, `s`-stage general linear method.
///
/// `step_offsets` and `carry` describe methods whose stored values are not
/// equally spaced by one step (the error-inhibiting IE variant keeps a value
/// at `t_n - h/3`). When absent the offsets are `-[k-1, ..., 0]` and the
/// history shifts by one slot per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MethodJson<T>",
    into = "MethodJson<T>",
    bound(serialize = "T: Real", deserialize = "T: Real")
)]
pub struct GlmTableau<T> {
    pub name: String,
    pub k: usize,
    pub s: usize,
    /// Stage coupling, `s x s`.
    pub a: Matrix<T>,
    /// Stage weights on derivatives of the older steps, `s x (k-1)`.
    pub a_hat: Matrix<T>,
    /// Stage weights on stored steps, `s x k`.
    pub d: Matrix<T>,
    pub theta: Vec<T>,
    pub b: Vec<T>,
    pub b_hat: Vec<T>,
    pub step_offsets: Option<Vec<T>>,
    /// Rows producing history slots `0..k-1` of the next step.
    pub carry: Option<Vec<UpdateRow<T>>>,
}

impl<T: Real> GlmTableau<T> {
    /// Builds a tableau with standard step offsets, checking every block shape.
    pub fn new(
        name: impl Into<String>,
        a: Matrix<T>,
        a_hat: Matrix<T>,
        d: Matrix<T>,
        update: UpdateRow<T>,
    ) -> Result<Self, GlmError> {
        let s = a.rows();
        let k = d.cols();
        let t = Self {
            name: name.into(),
            k,
            s,
            a,
            a_hat,
            d,
            theta: update.theta,
            b: update.b,
            b_hat: update.b_hat,
            step_offsets: None,
            carry: None,
        };
        t.check_dims()?;
        Ok(t)
    }

    /// Convenience constructor from nested row vectors.
    pub fn from_rows(
        name: impl Into<String>,
        a: &[Vec<T>],
        a_hat: &[Vec<T>],
        d: &[Vec<T>],
        theta: &[T],
        b: &[T],
        b_hat: &[T],
    ) -> Result<Self, GlmError> {
        let s = a.len();
        let k = theta.len();
        if s == 0 || k == 0 {
            return Err(GlmError::EmptyMethod);
        }
        let a_m = Matrix::from_rows(a, s).ok_or_else(|| ragged("A", s, s))?;
        let a_hat_rows: Vec<Vec<T>> = if a_hat.is_empty() && k == 1 {
            vec![Vec::new(); s]
        } else {
            a_hat.to_vec()
        };
        let ah = Matrix::from_rows(&a_hat_rows, k - 1).ok_or_else(|| ragged("Ahat", s, k - 1))?;
        let d_m = Matrix::from_rows(d, k).ok_or_else(|| ragged("D", s, k))?;
        Self::new(
            name,
            a_m,
            ah,
            d_m,
            UpdateRow {
                theta: theta.to_vec(),
                b: b.to_vec(),
                b_hat: b_hat.to_vec(),
            },
        )
    }

    /// Attaches non-standard step offsets with their carry rows.
    pub fn with_step_offsets(
        mut self,
        offsets: Vec<T>,
        carry: Vec<UpdateRow<T>>,
    ) -> Result<Self, GlmError> {
        self.step_offsets = Some(offsets);
        self.carry = Some(carry);
        self.check_dims()?;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn check_dims(&self) -> Result<(), GlmError> {
        let (k, s) = (self.k, self.s);
        if k == 0 || s == 0 {
            return Err(GlmError::EmptyMethod);
        }
        if self.a.shape() != (s, s) {
            return Err(dim_err("A", (s, s), self.a.shape()));
        }
        if self.a_hat.shape() != (s, k - 1) {
            return Err(dim_err("Ahat", (s, k - 1), self.a_hat.shape()));
        }
        if self.d.shape() != (s, k) {
            return Err(dim_err("D", (s, k), self.d.shape()));
        }
        self.update_row().check(k, s)?;
        if let Some(ell) = &self.step_offsets {
            if ell.len() != k {
                return Err(dim_err("ell", (1, k), (1, ell.len())));
            }
            let increasing = ell.windows(2).all(|w| w[0] < w[1]);
            if !increasing || ell[k - 1] != T::zero() {
                return Err(GlmError::StepOffsets);
            }
            let unit = ell
                .iter()
                .enumerate()
                .all(|(i, &x)| x == -T::from_usize(k - 1 - i).unwrap());
            if !unit && self.carry.is_none() {
                return Err(GlmError::MissingCarry);
            }
        }
        if let Some(carry) = &self.carry {
            if carry.len() != k - 1 {
                return Err(dim_err("carry", (k - 1, 1), (carry.len(), 1)));
            }
            for row in carry {
                row.check(k, s)?;
            }
        }
        Ok(())
    }

    pub fn update_row(&self) -> UpdateRow<T> {
        UpdateRow {
            theta: self.theta.clone(),
            b_hat: self.b_hat.clone(),
            b: self.b.clone(),
        }
    }

    pub fn set_update_row(&mut self, row: UpdateRow<T>) {
        self.theta = row.theta;
        self.b_hat = row.b_hat;
        self.b = row.b;
    }

    /// Step offsets `ell`, defaulting to `-[k-1, ..., 0]`.
    pub fn offsets(&self) -> Vec<T> {
        self.step_offsets
            .clone()
            .unwrap_or_else(|| standard_offsets(self.k))
    }

    pub fn has_standard_offsets(&self) -> bool {
        self.carry.is_none()
    }

    /// Drops stages whose derivative is never used: zero column in `A` and
    /// zero weight in every output row. At least one stage is always kept.
    pub fn without_dead_stages(&self) -> Self {
        let carry_uses = |j: usize| {
            self.carry
                .as_ref()
                .is_some_and(|rows| rows.iter().any(|r| r.b[j] != T::zero()))
        };
        let keep: Vec<usize> = (0..self.s)
            .filter(|&j| {
                self.b[j] != T::zero()
                    || carry_uses(j)
                    || (0..self.s).any(|i| self.a[(i, j)] != T::zero())
            })
            .collect();
        let keep = if keep.is_empty() { vec![self.s - 1] } else { keep };
        let s = keep.len();
        let pick = |v: &[T]| keep.iter().map(|&j| v[j]).collect::<Vec<T>>();
        Self {
            name: self.name.clone(),
            k: self.k,
            s,
            a: Matrix::from_fn(s, s, |i, j| self.a[(keep[i], keep[j])]),
            a_hat: Matrix::from_fn(s, self.k - 1, |i, j| self.a_hat[(keep[i], j)]),
            d: Matrix::from_fn(s, self.k, |i, j| self.d[(keep[i], j)]),
            theta: self.theta.clone(),
            b: pick(&self.b),
            b_hat: self.b_hat.clone(),
            step_offsets: self.step_offsets.clone(),
            carry: self.carry.as_ref().map(|rows| {
                rows.iter()
                    .map(|r| UpdateRow {
                        theta: r.theta.clone(),
                        b_hat: r.b_hat.clone(),
                        b: pick(&r.b),
                    })
                    .collect()
            }),
        }
    }

    /// Largest coefficient difference against a tableau of the same shape.
    pub fn max_coefficient_diff(&self, other: &Self) -> Option<T> {
        if self.k != other.k || self.s != other.s || self.carry.is_some() != other.carry.is_some() {
            return None;
        }
        let diff = |x: &[T], y: &[T]| {
            x.iter()
                .zip(y)
                .fold(T::zero(), |m, (&p, &q)| m.max((p - q).abs()))
        };
        let mut m = diff(self.a.as_slice(), other.a.as_slice())
            .max(diff(self.a_hat.as_slice(), other.a_hat.as_slice()))
            .max(diff(self.d.as_slice(), other.d.as_slice()))
            .max(diff(&self.theta, &other.theta))
            .max(diff(&self.b, &other.b))
            .max(diff(&self.b_hat, &other.b_hat))
            .max(diff(&self.offsets(), &other.offsets()));
        if let (Some(x), Some(y)) = (&self.carry, &other.carry) {
            for (r, q) in x.iter().zip(y) {
                m = m
                    .max(diff(&r.theta, &q.theta))
                    .max(diff(&r.b, &q.b))
                    .max(diff(&r.b_hat, &q.b_hat));
            }
        }
        Some(m)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tableau serializes")
    }
}

fn ragged(block: &'static str, rows: usize, cols: usize) -> GlmError {
    GlmError::Dimension {
        block,
        expected: format!("{rows}x{cols}"),
        found: "ragged rows".into(),
    }
}

pub fn standard_offsets<T: Real>(k: usize) -> Vec<T> {
    (0..k).map(|i| -T::from_usize(k - 1 - i).unwrap()).collect()
}

/// Output row in compact coordinates together with the time offset (in
/// steps, relative to `t_n`) of the value it produces.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactRow<T> {
    pub theta: Vec<T>,
    pub b_tilde: Vec<T>,
    pub target: T,
}

/// Compact form: the `k - 1` older steps become trivial copy stages so that
/// all derivative weights act on one stage vector of length `s + k - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactGlm<T> {
    pub k: usize,
    pub s: usize,
    pub a_tilde: Matrix<T>,
    pub d_tilde: Matrix<T>,
    pub b_tilde: Vec<T>,
    pub theta: Vec<T>,
    pub offsets: Vec<T>,
    /// Explicit history rows; empty when the history shifts by one slot.
    pub carry: Vec<CompactRow<T>>,
}

impl<T: Real> CompactGlm<T> {
    pub fn stages(&self) -> usize {
        self.s + self.k - 1
    }

    /// The final update row, targeting `t_n + h`.
    pub fn update(&self) -> CompactRow<T> {
        CompactRow {
            theta: self.theta.clone(),
            b_tilde: self.b_tilde.clone(),
            target: T::one(),
        }
    }

    /// Every row whose output is checked for accuracy: carry rows first,
    /// then the update.
    pub fn output_rows(&self) -> Vec<CompactRow<T>> {
        let mut rows = self.carry.clone();
        rows.push(self.update());
        rows
    }

    pub fn with_b_tilde(&self, b_tilde: Vec<T>) -> Self {
        Self {
            b_tilde,
            ..self.clone()
        }
    }
}

/// Places the tableau blocks into compact form. No arithmetic is performed.
pub fn to_compact<T: Real>(tableau: &GlmTableau<T>) -> Result<CompactGlm<T>, GlmError> {
    tableau.check_dims()?;
    let (k, s) = (tableau.k, tableau.s);
    let n = s + k - 1;
    let mut a_tilde = Matrix::zeros(n, n);
    a_tilde.set_block(k - 1, 0, &tableau.a_hat);
    a_tilde.set_block(k - 1, k - 1, &tableau.a);
    let mut d_tilde = Matrix::zeros(n, k);
    for i in 0..k - 1 {
        d_tilde[(i, i)] = T::one();
    }
    d_tilde.set_block(k - 1, 0, &tableau.d);
    let b_tilde = tableau.update_row().b_tilde();
    let offsets = tableau.offsets();
    let carry = tableau
        .carry
        .as_ref()
        .map(|rows| {
            rows.iter()
                .zip(&offsets)
                .map(|(r, &ell)| CompactRow {
                    theta: r.theta.clone(),
                    b_tilde: r.b_tilde(),
                    target: ell + T::one(),
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(CompactGlm {
        k,
        s,
        a_tilde,
        d_tilde,
        b_tilde,
        theta: tableau.theta.clone(),
        offsets,
        carry,
    })
}

/// Step offsets, the ones vector, and stage abscissas `c = A~ e + D~ ell`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOffsets<T> {
    pub ell: Vec<T>,
    pub e: Vec<T>,
    pub c: Vec<T>,
}

pub fn abscissas<T: Real>(compact: &CompactGlm<T>) -> StepOffsets<T> {
    let n = compact.stages();
    let e = vec![T::one(); n];
    let ae = compact.a_tilde.mul_vec(&e);
    let dl = compact.d_tilde.mul_vec(&compact.offsets);
    let c = ae.iter().zip(&dl).map(|(&x, &y)| x + y).collect();
    StepOffsets {
        ell: compact.offsets.clone(),
        e,
        c,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport<T> {
    /// `|Theta e - 1|`, maximized over all output rows.
    pub theta_residual: T,
    /// Largest deviation of a `D~` row sum from one.
    pub d_row_residual: T,
    pub tol: T,
    pub pass: bool,
}

pub fn validate<T: Real>(compact: &CompactGlm<T>, tol: T) -> ConsistencyReport<T> {
    let theta_residual = compact
        .output_rows()
        .iter()
        .map(|r| (r.theta.iter().copied().sum::<T>() - T::one()).abs())
        .fold(T::zero(), T::max);
    let row_dev: Vec<T> = (0..compact.d_tilde.rows())
        .map(|i| compact.d_tilde.row(i).iter().copied().sum::<T>() - T::one())
        .collect();
    let d_row_residual = max_abs(&row_dev);
    ConsistencyReport {
        theta_residual,
        d_row_residual,
        tol,
        pass: theta_residual <= tol && d_row_residual <= tol,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct CarryJson<T> {
    #[serde(rename = "Theta")]
    theta: Vec<T>,
    #[serde(default)]
    bhat: Vec<T>,
    b: Vec<T>,
}

/// On-disk method layout.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct MethodJson<T> {
    name: String,
    k: usize,
    s: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<T>>,
    #[serde(rename = "Ahat", default)]
    a_hat: Option<Vec<Vec<T>>>,
    #[serde(rename = "D")]
    d: Vec<Vec<T>>,
    #[serde(rename = "Theta")]
    theta: Vec<T>,
    b: Vec<T>,
    #[serde(default)]
    bhat: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ell: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    carry: Option<Vec<CarryJson<T>>>,
}

impl<T: Real> TryFrom<MethodJson<T>> for GlmTableau<T> {
    type Error = GlmError;

    fn try_from(m: MethodJson<T>) -> Result<Self, GlmError> {
        if m.k == 0 || m.s == 0 {
            return Err(GlmError::EmptyMethod);
        }
        let missing = |block| GlmError::Dimension {
            block,
            expected: "present when k > 1".into(),
            found: "missing".into(),
        };
        let a_hat = match m.a_hat {
            Some(rows) if !(m.k == 1 && rows.is_empty()) => rows,
            None if m.k > 1 => return Err(missing("Ahat")),
            _ => vec![Vec::new(); m.s],
        };
        let bhat = match m.bhat {
            Some(v) => v,
            None if m.k > 1 => return Err(missing("bhat")),
            None => Vec::new(),
        };
        let a = Matrix::from_rows(&m.a, m.s).ok_or_else(|| ragged("A", m.s, m.s))?;
        let ah = Matrix::from_rows(&a_hat, m.k - 1).ok_or_else(|| ragged("Ahat", m.s, m.k - 1))?;
        let d = Matrix::from_rows(&m.d, m.k).ok_or_else(|| ragged("D", m.s, m.k))?;
        let t = Self {
            name: m.name,
            k: m.k,
            s: m.s,
            a,
            a_hat: ah,
            d,
            theta: m.theta,
            b: m.b,
            b_hat: bhat,
            step_offsets: m.ell,
            carry: m.carry.map(|rows| {
                rows.into_iter()
                    .map(|r| UpdateRow {
                        theta: r.theta,
                        b_hat: r.bhat,
                        b: r.b,
                    })
                    .collect()
            }),
        };
        t.check_dims()?;
        Ok(t)
    }
}

impl<T: Real> From<GlmTableau<T>> for MethodJson<T> {
    fn from(t: GlmTableau<T>) -> Self {
        Self {
            name: t.name,
            k: t.k,
            s: t.s,
            a: t.a.to_rows(),
            a_hat: Some(t.a_hat.to_rows()),
            d: t.d.to_rows(),
            theta: t.theta,
            b: t.b,
            bhat: Some(t.b_hat),
            ell: t.step_offsets,
            carry: t.carry.map(|rows| {
                rows.into_iter()
                    .map(|r| CarryJson {
                        theta: r.theta,
                        bhat: r.b_hat,
                        b: r.b,
                    })
                    .collect()
            }),
        }
    }
}
