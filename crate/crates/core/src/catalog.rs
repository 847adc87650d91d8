//! Named methods with their declared properties.

use serde::Serialize;
use thiserror::Error;

use crate::filter::{apply_filters, CoreMethod, FilterError, PostFilter, PreFilter};
use crate::glm::{GlmTableau, UpdateRow};
use crate::scalar::Real;

/// Decimal coefficients of the optimized 4-step BDF2 filters.
pub mod bdf2_pre_post3 {
    pub const D: [f64; 4] = [
        2.670130894410204,
        -3.311517498805319,
        -3.489799303077245,
        5.131185907472361,
    ];
    pub const THETA: [f64; 4] = [
        0.370742163920604,
        -0.631064728171402,
        -0.729528261935270,
        1.989850826186068,
    ];
    pub const B: f64 = 0.120568773483737;
    /// Published forcing abscissa and pressure-recovery weights.
    pub const LISTED_ABSCISSA: f64 = 3.930023404911324;
    pub const RECOVERY: [f64; 3] = [2.827506874208412, -2.7249903435055, 0.8974834692970881];
}

/// Decimal coefficients of the filtered Lobatto IIIC pair.
pub mod rk22_pre_post3 {
    pub const D: [f64; 2] = [0.373461706729200, 0.626538293270800];
    pub const Q: [f64; 4] = [
        -0.075425887737539,
        0.551112405533260,
        -0.596071637983322,
        1.120385120187601,
    ];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unknown method '{0}'")]
    Unknown(String),
    #[error("IE-Filt parameter d = {0} outside [0, 3/2)")]
    ParameterOutOfRange(f64),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    /// Exact ratios rounded once.
    Rational,
    /// Printed decimals.
    Decimal,
}

/// Where forcing is sampled, and how an auxiliary quantity solved alongside
/// the stage (such as pressure) is recombined to the new time level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbscissaInfo {
    /// Published forcing abscissas of the solves, as offsets from `t_n` in
    /// units of the step.
    pub listed: Vec<f64>,
    /// Recombination weights on the auxiliary values of the last solves,
    /// oldest first.
    pub recovery_weights: Vec<f64>,
    pub note: Option<String>,
}

impl AbscissaInfo {
    fn at(listed: Vec<f64>, recovery_weights: Vec<f64>) -> Self {
        Self {
            listed,
            recovery_weights,
            note: None,
        }
    }

    fn end_of_step() -> Self {
        Self::at(vec![1.0], vec![1.0])
    }
}

/// A sibling update row sharing every solve with the primary method.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedRow<T> {
    pub name: String,
    pub order: u32,
    pub row: UpdateRow<T>,
}

/// Core method plus filters that reproduce the entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Construction<T> {
    pub core: CoreMethod<T>,
    pub pre: PreFilter<T>,
    pub post: PostFilter<T>,
}

impl<T: Real> Construction<T> {
    pub fn build(&self) -> Result<GlmTableau<T>, FilterError> {
        apply_filters(&self.core, &self.pre, &self.post)
    }
}

/// Two explicit recombinations around the two implicit solves of the
/// error-inhibiting method, reading the previous step's stages.
#[derive(Clone, Debug, PartialEq)]
pub struct RetainedStageForm<T> {
    /// `y1 = w0 y2_prev + w1 u^n + w2 y1_prev + w3 y3_prev`.
    pub first: [T; 4],
    /// `y3 = w0 u^n + w1 y2 + w2 y3_prev + w3 y1`.
    pub third: [T; 4],
    /// Stage times of the solves `y2 = y1 + h F(y2)` and
    /// `u^{n+1} = y3 + h F(u^{n+1})`.
    pub solve_times: [T; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry<T> {
    pub name: String,
    pub tableau: GlmTableau<T>,
    pub declared_order: u32,
    pub declared_observed_order: u32,
    /// Problems on which `declared_observed_order` applies, when narrower
    /// than all smooth problems.
    pub observed_order_scope: Option<String>,
    pub declared_alpha_deg: f64,
    pub declared_l_stable: bool,
    pub implicit_solves_per_step: u32,
    pub retains_stages: bool,
    pub coefficients: CoefficientKind,
    pub abscissa: AbscissaInfo,
    pub embedded: Vec<EmbeddedRow<T>>,
    pub construction: Option<Construction<T>>,
    pub retained_form: Option<RetainedStageForm<T>>,
    pub warnings: Vec<String>,
}

/// Serializable summary for listings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryMeta {
    pub name: String,
    pub k: usize,
    pub s: usize,
    pub declared_order: u32,
    pub declared_observed_order: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_order_scope: Option<String>,
    pub declared_alpha_deg: f64,
    pub declared_l_stable: bool,
    pub implicit_solves_per_step: u32,
    pub retains_stages: bool,
    pub coefficients: CoefficientKind,
    pub abscissa: AbscissaInfo,
    pub embedded: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl<T: Real> CatalogEntry<T> {
    pub fn meta(&self) -> EntryMeta {
        EntryMeta {
            name: self.name.clone(),
            k: self.tableau.k,
            s: self.tableau.s,
            declared_order: self.declared_order,
            declared_observed_order: self.declared_observed_order,
            observed_order_scope: self.observed_order_scope.clone(),
            declared_alpha_deg: self.declared_alpha_deg,
            declared_l_stable: self.declared_l_stable,
            implicit_solves_per_step: self.implicit_solves_per_step,
            retains_stages: self.retains_stages,
            coefficients: self.coefficients,
            abscissa: self.abscissa.clone(),
            embedded: self.embedded.iter().map(|e| e.name.clone()).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// Tableau with the update row replaced by the named sibling.
    pub fn sibling(&self, name: &str) -> Option<GlmTableau<T>> {
        let e = self.embedded.iter().find(|e| e.name == name)?;
        let mut t = self.tableau.clone().with_name(&e.name);
        t.set_update_row(e.row.clone());
        Some(t)
    }
}

/// Fixed names, in listing order.
pub const NAMES: [&str; 14] = [
    "IE",
    "IE-Pre-2",
    "IE-Pre-Post-3",
    "IE-EIS-3",
    "MP",
    "MP-Pre-Post-2",
    "MP-Pre-Post-3",
    "MP-Pre-Post-4",
    "BDF2",
    "BDF2-Post-3",
    "BDF2-Pre-Post-3",
    "RK22",
    "RK22-Pre-Post-3",
    "IE-Filt",
];

/// The IE-Filt parameter whose global error is third order on linear
/// problems.
pub fn ie_filt_special_d() -> f64 {
    (3.0 - 3f64.sqrt()) / 3.0
}

const SPECIAL_D_NAME: &str = "IE-Filt((3-sqrt(3))/3)";

/// Looks up a fixed name or `IE-Filt(<d>)`.
pub fn get<T: Real>(name: &str) -> Result<CatalogEntry<T>, CatalogError> {
    if let Some(arg) = name.strip_prefix("IE-Filt(").and_then(|s| s.strip_suffix(')')) {
        let d = if name == SPECIAL_D_NAME {
            ie_filt_special_d()
        } else {
            arg.trim()
                .parse::<f64>()
                .map_err(|_| CatalogError::Unknown(name.to_string()))?
        };
        return get_parametric("IE-Filt", d);
    }
    let entry = match name {
        "IE" => ie(),
        "IE-Pre-2" => ie_pre2(),
        "IE-Pre-Post-3" => ie_pre_post3(),
        "IE-EIS-3" => ie_eis3(),
        "MP" => mp(),
        "MP-Pre-Post-2" => mp_family(2),
        "MP-Pre-Post-3" => mp_family(3),
        "MP-Pre-Post-4" => mp_family(4),
        "BDF2" => bdf2(),
        "BDF2-Post-3" => bdf2_post3(),
        "BDF2-Pre-Post-3" => bdf2_pre_post3(),
        "RK22" => rk22(),
        "RK22-Pre-Post-3" => rk22_pre_post3(),
        _ => return Err(CatalogError::Unknown(name.to_string())),
    };
    Ok(entry)
}

/// Parametric families; only `IE-Filt` exists.
pub fn get_parametric<T: Real>(name: &str, d: f64) -> Result<CatalogEntry<T>, CatalogError> {
    if name != "IE-Filt" {
        return Err(CatalogError::Unknown(name.to_string()));
    }
    if !(0.0..1.5).contains(&d) {
        return Err(CatalogError::ParameterOutOfRange(d));
    }
    Ok(ie_filt(d))
}

/// Every fixed entry plus IE-Filt at `d = 0` and the linear-superconvergent
/// parameter.
pub fn list<T: Real>() -> Vec<CatalogEntry<T>> {
    let mut out: Vec<CatalogEntry<T>> = NAMES[..13]
        .iter()
        .map(|n| get(n).expect("fixed names resolve"))
        .collect();
    out.push(ie_filt(0.0));
    out.push(ie_filt(ie_filt_special_d()));
    out
}

fn q<T: Real>(n: i64, d: i64) -> T {
    T::ratio(n, d)
}

fn v<T: Real>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::lit(x)).collect()
}

fn tab<T: Real>(
    name: &str,
    a: &[Vec<T>],
    a_hat: &[Vec<T>],
    d: &[Vec<T>],
    update: UpdateRow<T>,
) -> GlmTableau<T> {
    GlmTableau::from_rows(name, a, a_hat, d, &update.theta, &update.b, &update.b_hat)
        .expect("catalog tableau shapes")
}

fn entry<T: Real>(tableau: GlmTableau<T>, order: u32, alpha: f64, l_stable: bool) -> CatalogEntry<T> {
    CatalogEntry {
        name: tableau.name.clone(),
        tableau,
        declared_order: order,
        declared_observed_order: order,
        observed_order_scope: None,
        declared_alpha_deg: alpha,
        declared_l_stable: l_stable,
        implicit_solves_per_step: 1,
        retains_stages: false,
        coefficients: CoefficientKind::Rational,
        abscissa: AbscissaInfo::end_of_step(),
        embedded: Vec::new(),
        construction: None,
        retained_form: None,
        warnings: Vec::new(),
    }
}

fn zeros<T: Real>(n: usize) -> Vec<T> {
    vec![T::zero(); n]
}

/// Implicit Euler in core form: copy stage, then `y = u^n + h F(y)`.
pub fn ie_core<T: Real>() -> CoreMethod<T> {
    let one = T::one();
    let z = T::zero();
    CoreMethod::new(tab(
        "IE",
        &[vec![z, z], vec![z, one]],
        &[],
        &[vec![one], vec![one]],
        UpdateRow {
            theta: vec![one],
            b_hat: vec![],
            b: vec![z, one],
        },
    ))
    .expect("IE core form")
}

/// Implicit midpoint in core form: `y1 = u^n`, `y2 = y1 + h/2 F(y2)`,
/// `y3 = 2 y2 - y1 = y1 + h F(y2)`.
pub fn mp_core<T: Real>() -> CoreMethod<T> {
    let (z, one, half) = (T::zero(), T::one(), q::<T>(1, 2));
    CoreMethod::new(tab(
        "MP",
        &[vec![z, z, z], vec![z, half, z], vec![z, one, z]],
        &[],
        &[vec![one], vec![one], vec![one]],
        UpdateRow {
            theta: vec![one],
            b_hat: vec![],
            b: vec![z, one, z],
        },
    ))
    .expect("MP core form")
}

pub fn bdf2_core<T: Real>() -> CoreMethod<T> {
    let mut c = CoreMethod::from_lmm(&[q(-1, 3), q(4, 3)], &[T::zero(), T::zero(), q(2, 3)])
        .expect("BDF2 core form");
    c = CoreMethod::new(c.into_tableau().with_name("BDF2")).expect("BDF2 core form");
    c
}

/// Two-stage Lobatto IIIC in core form.
pub fn rk22_core<T: Real>() -> CoreMethod<T> {
    let (z, one, h) = (T::zero(), T::one(), q::<T>(1, 2));
    CoreMethod::new(tab(
        "RK22",
        &[vec![z, z, z], vec![z, h, -h], vec![z, h, h]],
        &[],
        &[vec![one], vec![one], vec![one]],
        UpdateRow {
            theta: vec![one],
            b_hat: vec![],
            b: vec![z, h, h],
        },
    ))
    .expect("RK22 core form")
}

fn ie<T: Real>() -> CatalogEntry<T> {
    let one = T::one();
    let t = tab(
        "IE",
        &[vec![one]],
        &[],
        &[vec![one]],
        UpdateRow {
            theta: vec![one],
            b_hat: vec![],
            b: vec![one],
        },
    );
    let mut e = entry(t, 1, 90.0, true);
    e.construction = Some(Construction {
        core: ie_core(),
        pre: PreFilter::identity(),
        post: PostFilter::identity(2),
    });
    e
}

fn ie_filt<T: Real>(d: f64) -> CatalogEntry<T> {
    let dd = T::lit(d);
    let one = T::one();
    let two = T::lit(2.0);
    let den = T::lit(3.0) - two * dd;
    let name = if d == ie_filt_special_d() {
        SPECIAL_D_NAME.to_string()
    } else {
        format!("IE-Filt({d})")
    };
    let t = tab(
        &name,
        &[vec![one]],
        &[vec![T::zero()]],
        &[vec![dd, one - dd]],
        UpdateRow {
            theta: vec![(two * dd - one) / den, T::lit(4.0) * (one - dd) / den],
            b_hat: vec![T::zero()],
            b: vec![two / den],
        },
    );
    let mut e = entry(t, 2, 90.0, false);
    if d == ie_filt_special_d() {
        e.declared_observed_order = 3;
        e.observed_order_scope = Some("linear problems".into());
    }
    if d > 1.0 {
        e.warnings
            .push(format!("d = {d} lies outside [0, 1], where energy stability is established"));
    }
    e.abscissa = AbscissaInfo::at(vec![1.0 - d], vec![-d, 1.0 + d]);
    e.construction = Some(Construction {
        core: ie_core(),
        pre: PreFilter::Row(vec![dd, one - dd]),
        post: PostFilter::Combination {
            steps: vec![-one / den, two * (one - dd) / den],
            stages: vec![T::zero(), two / den],
        },
    });
    e
}

fn ie_pre_row<T: Real>() -> Vec<T> {
    vec![q(-1, 2), T::one(), q(1, 2)]
}

fn ie_pre2<T: Real>() -> CatalogEntry<T> {
    let t = tab(
        "IE-Pre-2",
        &[vec![T::one()]],
        &[zeros(2)],
        &[ie_pre_row()],
        UpdateRow {
            theta: ie_pre_row(),
            b_hat: zeros(2),
            b: vec![T::one()],
        },
    );
    let mut e = entry(t, 2, 90.0, true);
    e.embedded = vec![EmbeddedRow {
        name: "IE-Pre-Post-3".into(),
        order: 3,
        row: ie_pre_post3_row(),
    }];
    e.construction = Some(Construction {
        core: ie_core(),
        pre: PreFilter::Row(ie_pre_row()),
        post: PostFilter::identity(2),
    });
    e
}

fn ie_pre_post3_row<T: Real>() -> UpdateRow<T> {
    UpdateRow {
        theta: vec![q(2, 11), q(-9, 11), q(18, 11)],
        b_hat: zeros(2),
        b: vec![q(6, 11)],
    }
}

fn ie_pre_post3<T: Real>() -> CatalogEntry<T> {
    let t = tab(
        "IE-Pre-Post-3",
        &[vec![T::one()]],
        &[zeros(2)],
        &[ie_pre_row()],
        ie_pre_post3_row(),
    );
    let mut e = entry(t, 3, 71.51, false);
    e.embedded = vec![EmbeddedRow {
        name: "IE-Pre-2".into(),
        order: 2,
        row: UpdateRow {
            theta: ie_pre_row(),
            b_hat: zeros(2),
            b: vec![T::one()],
        },
    }];
    e.construction = Some(Construction {
        core: ie_core(),
        pre: PreFilter::Row(ie_pre_row()),
        post: PostFilter::Combination {
            steps: vec![q(5, 11), q(-15, 11), q(15, 11)],
            stages: vec![T::zero(), q(6, 11)],
        },
    });
    e
}

/// Error-inhibiting method on the history `(u^{n-1/3}, u^n)`: stage 2 is
/// `u^{n+2/3}` and becomes the older history slot.
fn ie_eis3<T: Real>() -> CatalogEntry<T> {
    let z = T::zero();
    let one = T::one();
    let theta = vec![q(14, 5), q(-9, 5)];
    let t = tab(
        "IE-EIS-3",
        &[
            vec![z, z, z],
            vec![q(-6, 5), one, z],
            vec![q(-47, 60), q(-1, 12), one],
        ],
        &[vec![z], vec![q(9, 5)], vec![q(9, 5)]],
        &[vec![z, one], theta.clone(), theta.clone()],
        UpdateRow {
            theta: theta.clone(),
            b_hat: vec![q(9, 5)],
            b: vec![q(-47, 60), q(-1, 12), one],
        },
    )
    .with_step_offsets(
        vec![q(-1, 3), z],
        vec![UpdateRow {
            theta,
            b_hat: vec![q(9, 5)],
            b: vec![q(-6, 5), one, z],
        }],
    )
    .expect("EIS offsets");
    let mut e = entry(t, 2, 90.0, false);
    e.declared_observed_order = 3;
    e.implicit_solves_per_step = 2;
    e.retains_stages = true;
    e.abscissa = AbscissaInfo {
        listed: vec![2.0 / 3.0, 1.0],
        recovery_weights: vec![1.0],
        note: Some("the intermediate solve yields the auxiliary value at t_n + 2h/3".into()),
    };
    e.retained_form = Some(RetainedStageForm {
        first: [q(23, 5), q(-3, 1), q(-9, 5), q(6, 5)],
        third: [q(5, 12), q(-1, 12), q(-5, 12), q(13, 12)],
        solve_times: [q(2, 3), one],
    });
    e
}

fn mp<T: Real>() -> CatalogEntry<T> {
    let one = T::one();
    let t = tab(
        "MP",
        &[vec![q(1, 2)]],
        &[],
        &[vec![one]],
        UpdateRow {
            theta: vec![one],
            b_hat: vec![],
            b: vec![one],
        },
    );
    let mut e = entry(t, 2, 90.0, false);
    e.abscissa = AbscissaInfo::at(vec![0.5], vec![-0.5, 1.5]);
    e.construction = Some(Construction {
        core: mp_core(),
        pre: PreFilter::identity(),
        post: PostFilter::identity(3),
    });
    e
}

fn mp_pre_row<T: Real>() -> Vec<T> {
    vec![q(-1, 12), q(1, 2), q(-5, 4), q(11, 6)]
}

/// Post-filter of the MP family in stage form: weights on the stored steps
/// and on `(y1, y2, y3)`.
fn mp_post<T: Real>(order: u32) -> (Vec<T>, Vec<T>) {
    let z = T::zero();
    match order {
        // 12/11 u_3rd + (1/22, -5/22, 9/22, -7/22)
        2 => (
            vec![q(1, 22), q(-5, 22), q(9, 22), q(-7, 22)],
            vec![q(6, 11), z, q(6, 11)],
        ),
        3 => (zeros(4), vec![q(1, 2), z, q(1, 2)]),
        4 => (
            vec![q(-2, 25), q(2, 5), q(-21, 25), q(26, 25)],
            vec![z, z, q(12, 25)],
        ),
        _ => unreachable!("MP family orders are 2, 3, 4"),
    }
}

/// Update row after substituting `y1 = d1 u` and `y3 = d1 u + h F(y2)`.
fn mp_row<T: Real>(order: u32) -> UpdateRow<T> {
    let (steps, stages) = mp_post::<T>(order);
    let w = stages[0] + stages[2];
    let d1 = mp_pre_row::<T>();
    UpdateRow {
        theta: steps.iter().zip(&d1).map(|(&s, &d)| s + w * d).collect(),
        b_hat: zeros(3),
        b: vec![T::zero(), stages[2], T::zero()],
    }
}

fn mp_family<T: Real>(order: u32) -> CatalogEntry<T> {
    let z = T::zero();
    let d1 = mp_pre_row::<T>();
    let name = format!("MP-Pre-Post-{order}");
    let t = tab(
        &name,
        &[vec![z, z, z], vec![z, q(1, 2), z], vec![z, T::one(), z]],
        &[zeros(3), zeros(3), zeros(3)],
        &[d1.clone(), d1.clone(), d1.clone()],
        mp_row(order),
    );
    let alpha = match order {
        3 => 79.4,
        4 => 70.64,
        _ => 90.0,
    };
    let mut e = entry(t, order, alpha, false);
    e.embedded = [2, 3, 4]
        .into_iter()
        .filter(|&o| o != order)
        .map(|o| EmbeddedRow {
            name: format!("MP-Pre-Post-{o}"),
            order: o,
            row: mp_row(o),
        })
        .collect();
    let (steps, stages) = mp_post(order);
    e.construction = Some(Construction {
        core: mp_core(),
        pre: PreFilter::Row(d1),
        post: PostFilter::Combination { steps, stages },
    });
    e
}

fn bdf2<T: Real>() -> CatalogEntry<T> {
    let t = tab(
        "BDF2",
        &[vec![q(2, 3)]],
        &[vec![T::zero()]],
        &[vec![q(-1, 3), q(4, 3)]],
        UpdateRow {
            theta: vec![q(-1, 3), q(4, 3)],
            b_hat: vec![T::zero()],
            b: vec![q(2, 3)],
        },
    );
    let mut e = entry(t, 2, 90.0, true);
    e.construction = Some(Construction {
        core: bdf2_core(),
        pre: PreFilter::identity(),
        post: PostFilter::identity(2),
    });
    e
}

fn bdf2_post3<T: Real>() -> CatalogEntry<T> {
    let t = tab(
        "BDF2-Post-3",
        &[vec![q(2, 3)]],
        &[zeros(2)],
        &[vec![T::zero(), q(-1, 3), q(4, 3)]],
        UpdateRow {
            theta: vec![q(2, 11), q(-9, 11), q(18, 11)],
            b_hat: zeros(2),
            b: vec![q(6, 11)],
        },
    );
    let mut e = entry(t, 3, 83.89, false);
    e.construction = Some(Construction {
        core: bdf2_core(),
        pre: PreFilter::identity(),
        post: PostFilter::Combination {
            steps: vec![q(2, 11), q(-6, 11), q(6, 11)],
            stages: vec![T::zero(), q(9, 11)],
        },
    });
    e
}

fn bdf2_pre_post3<T: Real>() -> CatalogEntry<T> {
    use bdf2_pre_post3::*;
    let z = T::zero();
    let d1: Vec<T> = v(&D);
    let mut d2: Vec<T> = d1.iter().map(|&x| q::<T>(4, 3) * x).collect();
    d2[2] += q(-1, 3);
    let b = vec![z, T::lit(B)];
    let t = tab(
        "BDF2-Pre-Post-3",
        &[vec![z, z], vec![z, q(2, 3)]],
        &[zeros(3), zeros(3)],
        &[d1.clone(), d2],
        UpdateRow {
            theta: v(&THETA),
            b_hat: zeros(3),
            b: b.clone(),
        },
    );
    let mut e = entry(t, 3, 89.59, false);
    e.coefficients = CoefficientKind::Decimal;
    e.abscissa = AbscissaInfo {
        listed: vec![LISTED_ABSCISSA],
        recovery_weights: RECOVERY.to_vec(),
        note: Some(
            "the listed abscissa differs from the stage abscissa c = A~e + D~l; \
             the integrator samples forcing at the stage abscissa"
                .into(),
        ),
    };
    e.construction = Some(Construction {
        core: bdf2_core(),
        pre: PreFilter::Row(d1),
        post: PostFilter::Direct(UpdateRow {
            theta: v(&THETA),
            b_hat: vec![],
            b,
        }),
    });
    e
}

fn rk22<T: Real>() -> CatalogEntry<T> {
    let (one, h) = (T::one(), q::<T>(1, 2));
    let t = tab(
        "RK22",
        &[vec![h, -h], vec![h, h]],
        &[],
        &[vec![one], vec![one]],
        UpdateRow {
            theta: vec![one],
            b_hat: vec![],
            b: vec![h, h],
        },
    );
    let mut e = entry(t, 2, 90.0, true);
    e.abscissa = AbscissaInfo::at(vec![0.0, 1.0], vec![]);
    e.construction = Some(Construction {
        core: rk22_core(),
        pre: PreFilter::identity(),
        post: PostFilter::identity(3),
    });
    e
}

fn rk22_pre_post3<T: Real>() -> CatalogEntry<T> {
    use rk22_pre_post3::*;
    let h = q::<T>(1, 2);
    let d: Vec<T> = v(&D);
    let qq: Vec<T> = v(&Q);
    let w = qq[2] + qq[3];
    let t = tab(
        "RK22-Pre-Post-3",
        &[vec![h, -h], vec![h, h]],
        &[vec![T::zero()], vec![T::zero()]],
        &[d.clone(), d.clone()],
        UpdateRow {
            theta: vec![qq[0] + w * d[0], qq[1] + w * d[1]],
            b_hat: vec![T::zero()],
            b: vec![h * w, h * (qq[3] - qq[2])],
        },
    );
    let mut e = entry(t, 3, 90.0, false);
    e.coefficients = CoefficientKind::Decimal;
    e.abscissa = AbscissaInfo::at(vec![], vec![]);
    e.construction = Some(Construction {
        core: rk22_core(),
        pre: PreFilter::Row(d),
        post: PostFilter::Combination {
            steps: vec![qq[0], qq[1]],
            stages: vec![T::zero(), qq[2], qq[3]],
        },
    });
    e
}
