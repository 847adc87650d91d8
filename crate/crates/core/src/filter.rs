//! Pre- and post-filters wrapped around a core time-stepper.
//!
//! A core method starts with the copy stage `y_0 = u^n` and ends with
//! `u^{n+1} = y_{s-1}`. A pre-filter replaces the copy stage by a linear
//! combination of stored steps; every later stage that read `u^n` now reads
//! the filtered value. A post-filter replaces the final update row.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::{GlmError, GlmTableau, UpdateRow};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error(transparent)]
    Structure(#[from] GlmError),
    #[error("{what} has length {found}, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("pre-filter is not given as a strength and stencil")]
    NotStencil,
    #[error("stencil entries sum to {0}, expected 0")]
    StencilSum(f64),
    #[error("LMM needs {expected} beta coefficients for {k} alpha coefficients, found {found}")]
    LmmShape {
        k: usize,
        expected: usize,
        found: usize,
    },
}

/// A tableau verified to be in core form.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreMethod<T> {
    tableau: GlmTableau<T>,
}

impl<T: Real> CoreMethod<T> {
    pub fn new(tableau: GlmTableau<T>) -> Result<Self, FilterError> {
        tableau.check_dims()?;
        let (k, s) = (tableau.k, tableau.s);
        let bad = |why: &str| Err(GlmError::NotCoreForm(why.to_string()).into());
        if tableau.carry.is_some() {
            return bad("carry rows are not allowed");
        }
        if s < 2 {
            return bad("needs a copy stage and at least one more stage");
        }
        let copy_row = tableau.d.row(0);
        let selects_newest = copy_row
            .iter()
            .enumerate()
            .all(|(j, &x)| x == if j == k - 1 { T::one() } else { T::zero() });
        if !selects_newest {
            return bad("first stage must copy u^n");
        }
        let zero = |xs: &[T]| xs.iter().all(|&x| x == T::zero());
        if !zero(tableau.a.row(0)) || !zero(tableau.a_hat.row(0)) {
            return bad("first stage must not use derivatives");
        }
        let last = s - 1;
        if tableau.theta != tableau.d.row(last)
            || tableau.b != tableau.a.row(last)
            || tableau.b_hat != tableau.a_hat.row(last)
        {
            return bad("update must equal the last stage");
        }
        Ok(Self { tableau })
    }

    /// Core form of a linear multistep method
    /// `u^{n+1} = sum alpha_l u_l + h sum beta_l F(u_l) + h beta_{k+1} F(u^{n+1})`.
    ///
    /// `alpha` has `k` entries and `beta` has `k + 1`, both oldest first.
    pub fn from_lmm(alpha: &[T], beta: &[T]) -> Result<Self, FilterError> {
        let k = alpha.len();
        if k == 0 || beta.len() != k + 1 {
            return Err(FilterError::LmmShape {
                k,
                expected: k + 1,
                found: beta.len(),
            });
        }
        let mut d = Matrix::zeros(2, k);
        d[(0, k - 1)] = T::one();
        d.row_mut(1).copy_from_slice(alpha);
        let mut a_hat = Matrix::zeros(2, k - 1);
        a_hat.row_mut(1).copy_from_slice(&beta[..k - 1]);
        let mut a = Matrix::zeros(2, 2);
        a[(1, 0)] = beta[k - 1];
        a[(1, 1)] = beta[k];
        let update = UpdateRow {
            theta: alpha.to_vec(),
            b_hat: beta[..k - 1].to_vec(),
            b: vec![beta[k - 1], beta[k]],
        };
        Self::new(GlmTableau::new("LMM", a, a_hat, d, update)?)
    }

    pub fn tableau(&self) -> &GlmTableau<T> {
        &self.tableau
    }

    pub fn into_tableau(self) -> GlmTableau<T> {
        self.tableau
    }

    pub fn k(&self) -> usize {
        self.tableau.k
    }

    pub fn s(&self) -> usize {
        self.tableau.s
    }

    pub fn name(&self) -> &str {
        &self.tableau.name
    }

    /// Same method viewed as a `k`-step method: zero weights on the extra,
    /// older steps.
    pub fn lift(&self, k: usize) -> Self {
        let t = &self.tableau;
        if k <= t.k {
            return self.clone();
        }
        let pad = k - t.k;
        let s = t.s;
        let d = Matrix::from_fn(s, k, |i, j| if j < pad { T::zero() } else { t.d[(i, j - pad)] });
        let a_hat = Matrix::from_fn(s, k - 1, |i, j| {
            if j < pad {
                T::zero()
            } else {
                t.a_hat[(i, j - pad)]
            }
        });
        let tableau = GlmTableau {
            name: t.name.clone(),
            k,
            s,
            a: t.a.clone(),
            a_hat,
            d,
            theta: pad_left(&t.theta, k),
            b: t.b.clone(),
            b_hat: pad_left(&t.b_hat, k - 1),
            step_offsets: None,
            carry: None,
        };
        Self { tableau }
    }
}

/// Zero-pads on the oldest side to length `n`.
pub fn pad_left<T: Real>(v: &[T], n: usize) -> Vec<T> {
    assert!(v.len() <= n, "cannot pad {} entries to {n}", v.len());
    let mut out = vec![T::zero(); n - v.len()];
    out.extend_from_slice(v);
    out
}

/// Replacement for the copy stage.
#[derive(Clone, Debug, PartialEq)]
pub enum PreFilter<T> {
    /// Weights on the stored steps, oldest first.
    Row(Vec<T>),
    /// `u^n - (strength / 2) * sum stencil_l u_l`.
    Stencil { strength: T, stencil: Vec<T> },
}

impl<T: Real> PreFilter<T> {
    /// The filter that leaves `u^n` unchanged.
    pub fn identity() -> Self {
        PreFilter::Row(vec![T::one()])
    }

    pub fn steps(&self) -> usize {
        match self {
            PreFilter::Row(r) => r.len(),
            PreFilter::Stencil { stencil, .. } => stencil.len(),
        }
    }

    /// First-stage row padded to `k` steps.
    pub fn row(&self, k: usize) -> Vec<T> {
        match self {
            PreFilter::Row(r) => pad_left(r, k),
            PreFilter::Stencil { strength, stencil } => {
                let half = *strength / T::lit(2.0);
                let mut row: Vec<T> = pad_left(stencil, k).iter().map(|&q| -half * q).collect();
                row[k - 1] += T::one();
                row
            }
        }
    }
}

/// Replacement for the final update row.
#[derive(Clone, Debug, PartialEq)]
pub enum PostFilter<T> {
    /// Explicit update row; `theta` and `b_hat` may be shorter than the
    /// filtered method and are padded on the oldest side.
    Direct(UpdateRow<T>),
    /// `y_last - (strength / 2) * sum stencil_l u_l`.
    Stencil { strength: T, stencil: Vec<T> },
    /// `sum steps_l u_l + sum stages_j y_j`, with the stages of the
    /// pre-filtered method substituted.
    Combination { steps: Vec<T>, stages: Vec<T> },
}

impl<T: Real> PostFilter<T> {
    /// Keeps the core update `u^{n+1} = y_last`.
    pub fn identity(s: usize) -> Self {
        let mut stages = vec![T::zero(); s];
        stages[s - 1] = T::one();
        PostFilter::Combination {
            steps: Vec::new(),
            stages,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            PostFilter::Direct(r) => r.theta.len(),
            PostFilter::Stencil { stencil, .. } => stencil.len(),
            PostFilter::Combination { steps, .. } => steps.len(),
        }
    }
}

/// Builds the GLM of `pre -> core -> post`.
///
/// The step count is the largest demanded by the core or either filter.
/// Stages that read `u^n` with weight `w` read `w * d1` after filtering;
/// stage coupling and derivative weights are unchanged.
pub fn apply_filters<T: Real>(
    core: &CoreMethod<T>,
    pre: &PreFilter<T>,
    post: &PostFilter<T>,
) -> Result<GlmTableau<T>, FilterError> {
    let k = core.k().max(pre.steps()).max(post.steps()).max(1);
    let core = core.lift(k);
    let t = core.tableau();
    let s = t.s;
    let d1 = pre.row(k);

    let mut d = Matrix::zeros(s, k);
    d.row_mut(0).copy_from_slice(&d1);
    for i in 1..s {
        let w = t.d[(i, k - 1)];
        for l in 0..k - 1 {
            d[(i, l)] = w * d1[l] + t.d[(i, l)];
        }
        d[(i, k - 1)] = w * d1[k - 1];
    }

    let update = match post {
        PostFilter::Direct(row) => {
            if row.b.len() != s {
                return Err(FilterError::Length {
                    what: "post-filter b",
                    expected: s,
                    found: row.b.len(),
                });
            }
            if row.b_hat.len() > k - 1 {
                return Err(FilterError::Length {
                    what: "post-filter bhat",
                    expected: k - 1,
                    found: row.b_hat.len(),
                });
            }
            UpdateRow {
                theta: pad_left(&row.theta, k),
                b_hat: pad_left(&row.b_hat, k - 1),
                b: row.b.clone(),
            }
        }
        PostFilter::Stencil { strength, stencil } => {
            let half = *strength / T::lit(2.0);
            let q = pad_left(stencil, k);
            UpdateRow {
                theta: d.row(s - 1).iter().zip(&q).map(|(&x, &y)| x - half * y).collect(),
                b_hat: t.a_hat.row(s - 1).to_vec(),
                b: t.a.row(s - 1).to_vec(),
            }
        }
        PostFilter::Combination { steps, stages } => {
            if stages.len() != s {
                return Err(FilterError::Length {
                    what: "post-filter stage weights",
                    expected: s,
                    found: stages.len(),
                });
            }
            let mut row = UpdateRow {
                theta: pad_left(steps, k),
                b_hat: vec![T::zero(); k - 1],
                b: vec![T::zero(); s],
            };
            for (j, &w) in stages.iter().enumerate() {
                if w == T::zero() {
                    continue;
                }
                for (x, &y) in row.theta.iter_mut().zip(d.row(j)) {
                    *x += w * y;
                }
                for (x, &y) in row.b_hat.iter_mut().zip(t.a_hat.row(j)) {
                    *x += w * y;
                }
                for (x, &y) in row.b.iter_mut().zip(t.a.row(j)) {
                    *x += w * y;
                }
            }
            row
        }
    };

    let name = format!("{}-filtered", core.name());
    Ok(GlmTableau::new(name, t.a.clone(), t.a_hat.clone(), d, update)?)
}

/// Filtered linear multistep method: the LMM as a two-stage core with the
/// filters applied.
pub fn filter_lmm<T: Real>(
    alpha: &[T],
    beta: &[T],
    pre: &PreFilter<T>,
    post: &PostFilter<T>,
) -> Result<GlmTableau<T>, FilterError> {
    apply_filters(&CoreMethod::from_lmm(alpha, beta)?, pre, post)
}

/// How a pre-filter scales the discrete fluctuation `sum stencil_l u_l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fluctuation<T> {
    /// `1 - strength * stencil_k / 2`.
    pub factor: T,
    /// `0 < strength * stencil_k < 2`: magnitude strictly reduced, sign kept.
    pub reducing: bool,
}

pub fn fluctuation_factor<T: Real>(pre: &PreFilter<T>) -> Result<Fluctuation<T>, FilterError> {
    let PreFilter::Stencil { strength, stencil } = pre else {
        return Err(FilterError::NotStencil);
    };
    let sum: T = stencil.iter().copied().sum();
    let scale = stencil.iter().fold(T::one(), |m, x| m.max(x.abs()));
    if sum.abs() > T::lit(64.0) * T::epsilon() * scale {
        return Err(FilterError::StencilSum(sum.as_f64()));
    }
    let last = *stencil.last().ok_or(FilterError::Length {
        what: "stencil",
        expected: 1,
        found: 0,
    })?;
    let prod = *strength * last;
    Ok(Fluctuation {
        factor: T::one() - prod / T::lit(2.0),
        reducing: prod > T::zero() && prod < T::lit(2.0),
    })
}

/// On-disk filter pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<PreFilterJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<PostFilterJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PreFilterJson {
    Row { d1: Vec<f64> },
    Stencil { alpha: f64, dhat: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PostFilterJson {
    Direct {
        theta: Vec<f64>,
        #[serde(default)]
        bhat: Vec<f64>,
        b: Vec<f64>,
    },
    Stencil { omega: f64, qhat: Vec<f64> },
    Combination { steps: Vec<f64>, stages: Vec<f64> },
}

impl FilterSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn pre_filter<T: Real>(&self) -> PreFilter<T> {
        match &self.pre {
            None => PreFilter::identity(),
            Some(PreFilterJson::Row { d1 }) => PreFilter::Row(convert(d1)),
            Some(PreFilterJson::Stencil { alpha, dhat }) => PreFilter::Stencil {
                strength: T::lit(*alpha),
                stencil: convert(dhat),
            },
        }
    }

    /// Post-filter for a core with `s` stages.
    pub fn post_filter<T: Real>(&self, s: usize) -> PostFilter<T> {
        match &self.post {
            None => PostFilter::identity(s),
            Some(PostFilterJson::Direct { theta, bhat, b }) => PostFilter::Direct(UpdateRow {
                theta: convert(theta),
                b_hat: convert(bhat),
                b: convert(b),
            }),
            Some(PostFilterJson::Stencil { omega, qhat }) => PostFilter::Stencil {
                strength: T::lit(*omega),
                stencil: convert(qhat),
            },
            Some(PostFilterJson::Combination { steps, stages }) => PostFilter::Combination {
                steps: convert(steps),
                stages: convert(stages),
            },
        }
    }

    /// Applies both filters to `core` and drops stages left unused.
    pub fn apply<T: Real>(&self, core: &CoreMethod<T>) -> Result<GlmTableau<T>, FilterError> {
        let t = apply_filters(core, &self.pre_filter(), &self.post_filter(core.s()))?;
        let name = self
            .name
            .clone()
            .unwrap_or_else(|| format!("{}-filtered", core.name()));
        Ok(t.without_dead_stages().with_name(name))
    }
}

fn convert<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::to_compact;
    use crate::order::order_of;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> f64 {
        f64::ratio(n, d)
    }

    /// Implicit Euler in core form: copy stage, then `y = u^n + h F(y)`.
    fn ie_core() -> CoreMethod<f64> {
        CoreMethod::new(
            GlmTableau::from_rows(
                "IE",
                &[vec![0.0, 0.0], vec![0.0, 1.0]],
                &[],
                &[vec![1.0], vec![1.0]],
                &[1.0],
                &[0.0, 1.0],
                &[],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn ie_pre_post_from_filters() {
        let pre = PreFilter::Row(vec![-0.5, 1.0, 0.5]);
        let post = PostFilter::Combination {
            steps: vec![r(5, 11), r(-15, 11), r(15, 11)],
            stages: vec![0.0, r(6, 11)],
        };
        let t = apply_filters(&ie_core(), &pre, &post).unwrap();
        assert_eq!(t.d.row(1), &[-0.5, 1.0, 0.5]);
        let p = t.without_dead_stages();
        assert_close(&p.theta, &[r(2, 11), r(-9, 11), r(18, 11)], 1e-15);
        assert_close(&p.b, &[r(6, 11)], 1e-15);
        assert_eq!(order_of(&to_compact(&p).unwrap(), 1e-13), 3);
    }

    #[test]
    fn identity_filters_return_core() {
        let core = ie_core().lift(2);
        let t = apply_filters(&core, &PreFilter::identity(), &PostFilter::identity(2)).unwrap();
        assert_eq!(t.max_coefficient_diff(core.tableau()), Some(0.0));
        let direct = PostFilter::Direct(core.tableau().update_row());
        let t = apply_filters(&core, &PreFilter::identity(), &direct).unwrap();
        assert_eq!(t.max_coefficient_diff(core.tableau()), Some(0.0));
    }

    #[test]
    fn two_point_family_update() {
        for d in [0.0, 0.25, 0.5, 0.9] {
            let pre = PreFilter::Row(vec![d, 1.0 - d]);
            let den = 3.0 - 2.0 * d;
            // u^{n+1} = (2 y + 2(1-d) u^n - u^{n-1}) / (3 - 2d)
            let post = PostFilter::Combination {
                steps: vec![-1.0 / den, 2.0 * (1.0 - d) / den],
                stages: vec![0.0, 2.0 / den],
            };
            let t = apply_filters(&ie_core(), &pre, &post).unwrap().without_dead_stages();
            assert_close(
                &t.theta,
                &[(2.0 * d - 1.0) / den, 4.0 * (1.0 - d) / den],
                1e-15,
            );
            assert_close(&t.b, &[2.0 / den], 1e-15);
            if d == 0.5 {
                assert_close(&t.theta, &[0.0, 1.0], 0.0);
                assert_close(&t.b, &[1.0], 0.0);
            }
        }
    }

    #[test]
    fn lmm_identities() {
        let alpha = [r(-1, 3), r(4, 3)];
        let beta = [0.0, 0.0, r(2, 3)];
        let pre = PreFilter::Row(vec![0.3, -0.2, 0.9]);
        let post = PostFilter::Stencil {
            strength: 0.4,
            stencil: vec![1.0, -2.0, 1.0],
        };
        let t = filter_lmm(&alpha, &beta, &pre, &post).unwrap();
        let a = pad_left(&alpha, 3);
        let d1 = t.d.row(0).to_vec();
        let ak = a[2];
        for l in 0..2 {
            assert!((t.d[(1, l)] - (ak * d1[l] + a[l])).abs() < 1e-15);
        }
        assert!((t.d[(1, 2)] - ak * d1[2]).abs() < 1e-15);
        assert_eq!(t.a[(1, 0)], beta[1]);
        assert_eq!(t.a[(1, 1)], beta[2]);
        for l in 0..3 {
            let q = [1.0, -2.0, 1.0][l];
            assert!((t.theta[l] - (t.d[(1, l)] - 0.2 * q)).abs() < 1e-15);
        }
        assert_eq!(t.b, t.a.row(1));
    }

    #[test]
    fn zero_strength_lmm_is_bdf2() {
        let pre = PreFilter::Stencil {
            strength: 0.0,
            stencil: vec![1.0, -2.0, 1.0],
        };
        let post = PostFilter::Stencil {
            strength: 0.0,
            stencil: vec![1.0, -2.0, 1.0],
        };
        let t = filter_lmm(&[r(-1, 3), r(4, 3)], &[0.0, 0.0, r(2, 3)], &pre, &post)
            .unwrap()
            .without_dead_stages();
        assert_eq!(t.s, 1);
        assert_close(&t.d.row(0)[1..], &[r(-1, 3), r(4, 3)], 0.0);
        assert_close(&t.theta[1..], &[r(-1, 3), r(4, 3)], 0.0);
        assert_eq!(t.theta[0], 0.0);
        assert_eq!(t.b, vec![r(2, 3)]);
    }

    #[test]
    fn ie_lmm_with_curvature_prefilter() {
        let pre = PreFilter::Stencil {
            strength: 1.0,
            stencil: vec![1.0, -2.0, 1.0],
        };
        let t = filter_lmm(&[1.0], &[0.0, 1.0], &pre, &PostFilter::identity(2)).unwrap();
        assert_eq!(t.d.row(0), &[-0.5, 1.0, 0.5]);
        let p = t.without_dead_stages();
        assert_eq!(p.s, 1);
        assert_eq!(p.theta, vec![-0.5, 1.0, 0.5]);
        assert_eq!(order_of(&to_compact(&p).unwrap(), 1e-13), 2);
    }

    #[test]
    fn mp_prefilter_expansion() {
        // u^n + 5/6 (u^n - 3/2 u^{n-1} + 3/5 u^{n-2} - 1/10 u^{n-3})
        let pre = PreFilter::Stencil {
            strength: 1.0,
            stencil: vec![r(1, 6), -1.0, r(5, 2), r(-5, 3)],
        };
        assert_close(
            &pre.row(4),
            &[r(-1, 12), 0.5, r(-5, 4), r(11, 6)],
            1e-15,
        );
    }

    #[test]
    fn fluctuation_examples() {
        let f = fluctuation_factor(&PreFilter::Stencil {
            strength: 1.0,
            stencil: vec![1.0, -2.0, 1.0],
        })
        .unwrap();
        assert_eq!(f.factor, 0.5);
        assert!(f.reducing);
        let f = fluctuation_factor(&PreFilter::Stencil {
            strength: 0.0,
            stencil: vec![1.0, -2.0, 1.0],
        })
        .unwrap();
        assert_eq!((f.factor, f.reducing), (1.0, false));
        let f = fluctuation_factor(&PreFilter::Stencil {
            strength: 2.0,
            stencil: vec![-1.0, 1.0],
        })
        .unwrap();
        assert_eq!((f.factor, f.reducing), (0.0, false));
        assert_eq!(
            fluctuation_factor(&PreFilter::Row(vec![0.5, 0.5])),
            Err(FilterError::NotStencil)
        );
        assert!(matches!(
            fluctuation_factor(&PreFilter::Stencil {
                strength: 1.0,
                stencil: vec![1.0, 1.0]
            }),
            Err(FilterError::StencilSum(_))
        ));
    }

    #[test]
    fn non_core_rejected() {
        let t = GlmTableau::from_rows("IE", &[vec![1.0]], &[], &[vec![1.0]], &[1.0], &[1.0], &[])
            .unwrap();
        assert!(matches!(
            CoreMethod::new(t),
            Err(FilterError::Structure(GlmError::NotCoreForm(_)))
        ));
    }

    #[test]
    fn filter_json_variants() {
        let spec = FilterSpec::from_json(
            r#"{"pre": {"alpha": 1, "dhat": [1, -2, 1]}, "post": {"omega": 0.5, "qhat": [1, -1]}}"#,
        )
        .unwrap();
        assert!(matches!(spec.pre, Some(PreFilterJson::Stencil { .. })));
        assert!(matches!(spec.post, Some(PostFilterJson::Stencil { .. })));
        let spec =
            FilterSpec::from_json(r#"{"pre": {"d1": [0.5, 0.5]}, "post": {"theta": [0, 1], "b": [0, 1]}}"#)
                .unwrap();
        assert!(matches!(spec.post, Some(PostFilterJson::Direct { .. })));
        let spec = FilterSpec::from_json(r#"{"post": {"steps": [1], "stages": [0, 1]}}"#).unwrap();
        assert!(spec.pre.is_none());
        assert!(FilterSpec::from_json(r#"{"pre": {"d2": [1]}}"#).is_err());
    }

    proptest! {
        #[test]
        fn filtered_rows_stay_consistent(
            raw in prop::collection::vec(-3.0f64..3.0, 3),
            w in -2.0f64..2.0,
        ) {
            // pre row summing to one
            let mut d1 = raw.clone();
            let s: f64 = d1.iter().sum();
            d1[2] += 1.0 - s;
            // core stage reading u^n with weight w and u^{n-1} with 1 - w
            let core = CoreMethod::new(GlmTableau::from_rows(
                "c",
                &[vec![0.0, 0.0], vec![0.0, 1.0]],
                &[vec![0.0], vec![0.0]],
                &[vec![0.0, 1.0], vec![1.0 - w, w]],
                &[1.0 - w, w],
                &[0.0, 1.0],
                &[0.0],
            ).unwrap()).unwrap();
            let t = apply_filters(&core, &PreFilter::Row(d1), &PostFilter::identity(2)).unwrap();
            for i in 0..t.s {
                let sum: f64 = t.d.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn fluctuation_identity(
            strength in -3.0f64..3.0,
            raw in prop::collection::vec(-2.0f64..2.0, 4),
            u in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            let mut stencil = raw.clone();
            let s: f64 = stencil.iter().sum();
            stencil[0] -= s;
            let pre = PreFilter::Stencil { strength, stencil: stencil.clone() };
            let row = pre.row(4);
            let u_pre: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            let fluct: f64 = stencil.iter().zip(&u).map(|(a, b)| a * b).sum();
            let lhs = stencil[3] * u_pre + (0..3).map(|l| stencil[l] * u[l]).sum::<f64>();
            let f = fluctuation_factor(&pre).unwrap();
            prop_assert!((lhs - f.factor * fluct).abs() < 1e-10 * (1.0 + fluct.abs()));
        }
    }
}
