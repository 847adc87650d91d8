//! Order-condition residuals through fourth order and order classification.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::glm::{abscissas, CompactGlm, CompactRow};
use crate::scalar::{dot, signed_max_abs, Real};

/// Default classification tolerance.
pub const DEFAULT_ORDER_TOL: f64 = 1e-9;

/// Highest order with implemented conditions.
pub const MAX_ORDER: i32 = 4;

/// An order condition, identified by its order `q` and index within that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub order: u8,
    pub index: u8,
}

impl Condition {
    pub const ALL: [Condition; 10] = [
        Condition::new(0, 1),
        Condition::new(0, 2),
        Condition::new(1, 1),
        Condition::new(2, 1),
        Condition::new(3, 1),
        Condition::new(3, 2),
        Condition::new(4, 1),
        Condition::new(4, 2),
        Condition::new(4, 3),
        Condition::new(4, 4),
    ];

    pub const fn new(order: u8, index: u8) -> Self {
        Self { order, index }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau_{}_{}", self.order, self.index)
    }
}

/// Residual of every condition, in `Condition::ALL` order.
#[derive(Clone, Debug, PartialEq)]
pub struct TauResiduals<T> {
    values: Vec<(Condition, T)>,
}

impl<T: Real> TauResiduals<T> {
    pub fn get(&self, c: Condition) -> T {
        self.values
            .iter()
            .find(|(k, _)| *k == c)
            .map(|(_, v)| *v)
            .expect("every condition is evaluated")
    }

    pub fn iter(&self) -> impl Iterator<Item = (Condition, T)> + '_ {
        self.values.iter().copied()
    }

    /// Largest magnitude among conditions of order `q`.
    pub fn max_at_order(&self, q: u8) -> T {
        self.values
            .iter()
            .filter(|(c, _)| c.order == q)
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    /// Largest magnitude among all conditions up to order `p`.
    pub fn max_through(&self, p: u8) -> T {
        (0..=p).fold(T::zero(), |m, q| m.max(self.max_at_order(q)))
    }

    /// Largest `p` such that every condition of order `<= p` is within `tol`,
    /// or `-1` when consistency fails.
    pub fn classify(&self, tol: T) -> i32 {
        let mut p = -1;
        for q in 0..=MAX_ORDER as u8 {
            if self.max_at_order(q) <= tol {
                p = q as i32;
            } else {
                break;
            }
        }
        p
    }
}

/// Serializable summary: `{ "residuals": {label: value}, "order": p, "tol": t }`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct OrderResidualReport<T> {
    pub residuals: BTreeMap<String, T>,
    pub order: i32,
    pub tol: T,
}

impl<T: Real> OrderResidualReport<T> {
    pub fn new(compact: &CompactGlm<T>, tol: T) -> Self {
        let tau = tau_residuals(compact);
        Self {
            residuals: tau.iter().map(|(c, v)| (c.label(), v)).collect(),
            order: tau.classify(tol),
            tol,
        }
    }

    pub fn residual(&self, c: Condition) -> T {
        self.residuals[&c.label()]
    }
}

/// Conditions evaluated per output row, in `Condition::ALL` order without
/// the stage condition `tau_0_2`.
pub const ROW_CONDITIONS: [Condition; 9] = [
    Condition::new(0, 1),
    Condition::new(1, 1),
    Condition::new(2, 1),
    Condition::new(3, 1),
    Condition::new(3, 2),
    Condition::new(4, 1),
    Condition::new(4, 2),
    Condition::new(4, 3),
    Condition::new(4, 4),
];

/// Stage quantities shared by every output row. Row residuals are affine in
/// the row's `(theta, b~)`.
pub struct RowConditions<T> {
    ell: Vec<T>,
    ell2: Vec<T>,
    ell3: Vec<T>,
    ell4: Vec<T>,
    c: Vec<T>,
    c2: Vec<T>,
    c3: Vec<T>,
    ac: Vec<T>,
    ac2: Vec<T>,
    aac: Vec<T>,
    dl2: Vec<T>,
    dl3: Vec<T>,
    adl2: Vec<T>,
    c_ac: Vec<T>,
    c_dl2: Vec<T>,
}

impl<T: Real> RowConditions<T> {
    pub fn new(compact: &CompactGlm<T>) -> Self {
        let off = abscissas(compact);
        let at = &compact.a_tilde;
        let dt = &compact.d_tilde;
        let pow = |v: &[T], p: i32| -> Vec<T> { v.iter().map(|x| x.powi(p)).collect() };
        let had = |x: &[T], y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(&a, &b)| a * b).collect() };
        let c = off.c;
        let ell = off.ell;
        let c2 = pow(&c, 2);
        let ac = at.mul_vec(&c);
        let dl2 = dt.mul_vec(&pow(&ell, 2));
        Self {
            ell2: pow(&ell, 2),
            ell3: pow(&ell, 3),
            ell4: pow(&ell, 4),
            c3: pow(&c, 3),
            ac2: at.mul_vec(&c2),
            aac: at.mul_vec(&ac),
            dl3: dt.mul_vec(&pow(&ell, 3)),
            adl2: at.mul_vec(&dl2),
            c_ac: had(&c, &ac),
            c_dl2: had(&c, &dl2),
            ell,
            c,
            c2,
            ac,
            dl2,
        }
    }

    /// Residuals of one row, in `ROW_CONDITIONS` order.
    pub fn eval(&self, row: &CompactRow<T>) -> [T; 9] {
        let r = T::ratio;
        let th = &row.theta;
        let bt = &row.b_tilde;
        let sg = row.target;
        let e_sum = bt.iter().copied().sum::<T>();
        [
            th.iter().copied().sum::<T>() - T::one(),
            e_sum + dot(th, &self.ell) - sg,
            dot(bt, &self.c) + r(1, 2) * dot(th, &self.ell2) - r(1, 2) * sg.powi(2),
            dot(bt, &self.c2) + r(1, 3) * dot(th, &self.ell3) - r(1, 3) * sg.powi(3),
            dot(bt, &self.ac) + r(1, 2) * dot(bt, &self.dl2) + r(1, 6) * dot(th, &self.ell3)
                - r(1, 6) * sg.powi(3),
            dot(bt, &self.c3) + r(1, 4) * dot(th, &self.ell4) - r(1, 4) * sg.powi(4),
            dot(bt, &self.ac2) + r(1, 3) * dot(bt, &self.dl3) + r(1, 12) * dot(th, &self.ell4)
                - r(1, 12) * sg.powi(4),
            dot(bt, &self.aac) + r(1, 2) * dot(bt, &self.adl2) + r(1, 6) * dot(bt, &self.dl3)
                + r(1, 24) * dot(th, &self.ell4)
                - r(1, 24) * sg.powi(4),
            dot(bt, &self.c_ac) + r(1, 2) * dot(bt, &self.c_dl2) + r(1, 8) * dot(th, &self.ell4)
                - r(1, 8) * sg.powi(4),
        ]
    }
}

/// Evaluates all residuals. Vector powers and products are elementwise.
///
/// Rows that produce values at an offset other than `t_n + h` (carry rows)
/// are checked against `sigma^q / gamma` instead of `1 / gamma`; each
/// reported residual is the largest in magnitude over all output rows.
pub fn tau_residuals<T: Real>(compact: &CompactGlm<T>) -> TauResiduals<T> {
    let dt = &compact.d_tilde;
    let d_row_dev: Vec<T> = (0..dt.rows())
        .map(|i| dt.row(i).iter().copied().sum::<T>() - T::one())
        .collect();
    let tau02 = signed_max_abs(&d_row_dev);

    let rows = RowConditions::new(compact);
    let mut worst = [T::zero(); 9];
    for row in compact.output_rows() {
        for (w, v) in worst.iter_mut().zip(rows.eval(&row)) {
            if v.abs() > w.abs() {
                *w = v;
            }
        }
    }
    let mut values = Vec::with_capacity(10);
    values.push((Condition::new(0, 1), worst[0]));
    values.push((Condition::new(0, 2), tau02));
    for (c, v) in ROW_CONDITIONS[1..].iter().zip(&worst[1..]) {
        values.push((*c, *v));
    }
    TauResiduals { values }
}

pub fn order_of<T: Real>(compact: &CompactGlm<T>, tol: T) -> i32 {
    tau_residuals(compact).classify(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{to_compact, GlmTableau};

    fn ie() -> GlmTableau<f64> {
        GlmTableau::from_rows("IE", &[vec![1.0]], &[], &[vec![1.0]], &[1.0], &[1.0], &[]).unwrap()
    }

    fn rk4() -> GlmTableau<f64> {
        let a = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let d = vec![vec![1.0]; 4];
        GlmTableau::from_rows(
            "RK4",
            &a,
            &[],
            &d,
            &[1.0],
            &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn implicit_euler_residuals() {
        let tau = tau_residuals(&to_compact(&ie()).unwrap());
        assert_eq!(tau.get(Condition::new(1, 1)), 0.0);
        assert_eq!(tau.get(Condition::new(2, 1)), 0.5);
        assert_eq!(tau.classify(1e-12), 1);
    }

    #[test]
    fn classical_rk4_is_fourth_order() {
        let tau = tau_residuals(&to_compact(&rk4()).unwrap());
        assert!(tau.max_through(4) <= 1e-14, "{tau:?}");
        assert_eq!(tau.classify(1e-14), 4);
    }

    #[test]
    fn inconsistent_method_is_minus_one() {
        let mut t = ie();
        t.theta[0] = 0.9;
        assert_eq!(order_of(&to_compact(&t).unwrap(), 1e-9), -1);
    }

    #[test]
    fn report_json_shape() {
        let rep = OrderResidualReport::new(&to_compact(&ie()).unwrap(), 1e-9);
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["order"], 1);
        assert_eq!(v["residuals"]["tau_2_1"], 0.5);
        assert_eq!(v["residuals"].as_object().unwrap().len(), 10);
    }

    #[test]
    fn works_in_single_precision() {
        let t: GlmTableau<f32> =
            GlmTableau::from_rows("IE", &[vec![1.0]], &[], &[vec![1.0]], &[1.0], &[1.0], &[])
                .unwrap();
        assert_eq!(order_of(&to_compact(&t).unwrap(), 1e-6), 1);
    }
}
