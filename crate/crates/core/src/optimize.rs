//! Filter optimization: choose free pre/post-filter coefficients that keep a
//! target order while maximizing a stability measure.
//!
//! The outer loop bisects on the stability parameter `r`. For each trial `r`
//! a penalty is minimized by Nelder-Mead from several seeded starts. The
//! linear parts of the order conditions are eliminated exactly:
//! the pre-filter row is restricted to `sum d1 = 1`, and for a fixed pre-filter
//! the update-row conditions are affine in the free update coefficients, so
//! those are parametrized over the solution set of the conditions.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{apply_filters, CoreMethod, FilterError, PostFilter, PreFilter};
use crate::glm::{to_compact, CompactGlm, GlmError, GlmTableau, UpdateRow};
use crate::linalg::{affine_solutions, Matrix};
use crate::order::{tau_residuals, OrderResidualReport, RowConditions, ROW_CONDITIONS};
use crate::scalar::{logspace, Real};
use crate::stability::{
    alpha_from_r, scan_moduli, stability_report, wedge_angle, wedge_rays, EvolutionOperator, ScanConfig,
    StabilityError, StabilityReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("{what} has length {found}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("target order {0} is outside 1..=4")]
    TargetOrder(u32),
    #[error("no feasible filter at r = 0 (best penalty {penalty:e})")]
    Infeasible {
        penalty: f64,
        /// Order residuals of the best point found.
        residuals: Vec<(String, f64)>,
    },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Wedge parameter `r`, reported as the A(alpha) angle.
    AAlpha,
    ImagAxis,
    NegRealAxis,
}

/// Which filter coefficients the optimizer may change.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeMask {
    #[serde(default)]
    pub pre: Vec<bool>,
    #[serde(default)]
    pub theta: Vec<bool>,
    #[serde(default)]
    pub b_hat: Vec<bool>,
    #[serde(default)]
    pub b: Vec<bool>,
}

impl FreeMask {
    pub fn none(k: usize, s: usize) -> Self {
        Self {
            pre: vec![false; k],
            theta: vec![false; k],
            b_hat: vec![false; k - 1],
            b: vec![false; s],
        }
    }

    pub fn count(&self) -> usize {
        [&self.pre, &self.theta, &self.b_hat, &self.b]
            .iter()
            .map(|v| v.iter().filter(|&&x| x).count())
            .sum()
    }
}

/// Pre-filter row and final update row of a filtered method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterValues<T> {
    pub pre: Vec<T>,
    pub theta: Vec<T>,
    pub b_hat: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> FilterValues<T> {
    /// No pre-filter and the core update `u^{n+1} = y_last`.
    pub fn identity(core: &CoreMethod<T>) -> Self {
        let t = core.tableau();
        let (k, s) = (t.k, t.s);
        let mut pre = vec![T::zero(); k];
        pre[k - 1] = T::one();
        Self {
            pre,
            theta: t.d.row(s - 1).to_vec(),
            b_hat: t.a_hat.row(s - 1).to_vec(),
            b: t.a.row(s - 1).to_vec(),
        }
    }

    pub fn update_row(&self) -> UpdateRow<T> {
        UpdateRow {
            theta: self.theta.clone(),
            b_hat: self.b_hat.clone(),
            b: self.b.clone(),
        }
    }

    pub fn tableau(&self, core: &CoreMethod<T>, name: &str) -> Result<GlmTableau<T>, OptimizeError> {
        let t = apply_filters(core, &PreFilter::Row(self.pre.clone()), &PostFilter::Direct(self.update_row()))?;
        Ok(t.with_name(name))
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationProblem<T> {
    /// Core lifted to the number of steps the filters act on.
    pub core: CoreMethod<T>,
    pub free: FreeMask,
    /// Starting values of the free entries and fixed values of the others.
    pub values: FilterValues<T>,
    pub target_order: u32,
    pub objective: Objective,
    /// Box `|x| <= bound` on every free coefficient.
    pub bound: f64,
}

impl<T: Real> OptimizationProblem<T> {
    /// Identity filters on `core` lifted to `k` steps, nothing free.
    pub fn new(core: &CoreMethod<T>, k: usize, target_order: u32, objective: Objective) -> Self {
        let core = core.lift(k);
        let (k, s) = (core.k(), core.s());
        Self {
            values: FilterValues::identity(&core),
            free: FreeMask::none(k, s),
            core,
            target_order,
            objective,
            bound: 10.0,
        }
    }

    fn check(&self) -> Result<(), OptimizeError> {
        if !(1..=4).contains(&self.target_order) {
            return Err(OptimizeError::TargetOrder(self.target_order));
        }
        let (k, s) = (self.core.k(), self.core.s());
        let checks: [(&'static str, usize, usize); 8] = [
            ("free.pre", k, self.free.pre.len()),
            ("free.theta", k, self.free.theta.len()),
            ("free.b_hat", k - 1, self.free.b_hat.len()),
            ("free.b", s, self.free.b.len()),
            ("values.pre", k, self.values.pre.len()),
            ("values.theta", k, self.values.theta.len()),
            ("values.b_hat", k - 1, self.values.b_hat.len()),
            ("values.b", s, self.values.b.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(OptimizeError::Shape { what, expected, found });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub multistarts: usize,
    pub seed: u64,
    /// Nelder-Mead evaluations per start.
    pub max_evals_per_start: usize,
    /// Overall evaluation budget; exceeding it ends the search early.
    pub max_total_evals: usize,
    pub penalty_weight: f64,
    /// Required gap `1 - rho` at every sample during the search.
    pub margin: f64,
    /// A penalty at or below this counts as feasible.
    pub feasibility: f64,
    /// Bisection stops when the bracket on `r` is this narrow.
    pub r_tol: f64,
    pub scan: ScanConfig,
    /// Upper end of the bisection for the axis objectives.
    pub axis_r_max: f64,
    pub axis_samples: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            multistarts: 20,
            seed: 0,
            max_evals_per_start: 800,
            max_total_evals: 20_000_000,
            penalty_weight: 1e6,
            margin: 1e-6,
            feasibility: 1e-12,
            r_tol: 1e-3,
            scan: ScanConfig::default(),
            axis_r_max: 100.0,
            axis_samples: 200,
        }
    }
}

/// Starts evaluated together; results merge by lowest penalty, ties to the
/// lower start index, so the outcome does not depend on the thread count.
const START_CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct OptimizationResult<T> {
    #[serde(skip)]
    pub tableau: GlmTableau<T>,
    pub values: FilterValues<T>,
    pub achieved_r: f64,
    pub achieved_alpha_deg: f64,
    pub order_report: OrderResidualReport<T>,
    pub feasible: bool,
    /// Nelder-Mead iterations over all starts and trials.
    pub iterations: usize,
    pub evaluations: usize,
    pub seed: u64,
    pub target_order: u32,
    pub objective: Objective,
    /// True when the evaluation budget ran out before the bisection closed.
    pub budget_exhausted: bool,
}

impl<T: Real> OptimizationResult<T> {
    /// Wraps an existing method so it can go through [`verify_result`].
    pub fn candidate(
        tableau: GlmTableau<T>,
        target_order: u32,
        objective: Objective,
        achieved_r: f64,
    ) -> Result<Self, OptimizeError> {
        let compact = to_compact(&tableau)?;
        let order_report = OrderResidualReport::new(&compact, T::lit(1e-8));
        let feasible = order_report.order >= target_order as i32;
        let u = tableau.update_row();
        Ok(Self {
            values: FilterValues {
                pre: tableau.d.row(0).to_vec(),
                theta: u.theta,
                b_hat: u.b_hat,
                b: u.b,
            },
            tableau,
            achieved_r,
            achieved_alpha_deg: match objective {
                Objective::AAlpha => alpha_from_r(achieved_r),
                _ => f64::NAN,
            },
            order_report,
            feasible,
            iterations: 0,
            evaluations: 0,
            seed: 0,
            target_order,
            objective,
            budget_exhausted: false,
        })
    }
}

/// A free filter coefficient.
#[derive(Clone, Copy, Debug)]
enum Slot {
    Pre(usize),
    Theta(usize),
    BHat(usize),
    B(usize),
}

/// Free coefficients as a flat vector, and the order conditions on them.
struct Param<'a, T> {
    problem: &'a OptimizationProblem<T>,
    slots: Vec<Slot>,
}

/// Gauss-Newton iterations allowed when projecting onto the order
/// conditions.
const PROJECTION_ITERS: usize = 30;

/// Residual size at which a projection counts as converged.
const PROJECTION_TOL: f64 = 1e-13;

impl<'a, T: Real> Param<'a, T> {
    fn new(problem: &'a OptimizationProblem<T>) -> Self {
        let f = &problem.free;
        let mut slots = Vec::new();
        slots.extend((0..f.pre.len()).filter(|&i| f.pre[i]).map(Slot::Pre));
        slots.extend((0..f.theta.len()).filter(|&i| f.theta[i]).map(Slot::Theta));
        slots.extend((0..f.b_hat.len()).filter(|&i| f.b_hat[i]).map(Slot::BHat));
        slots.extend((0..f.b.len()).filter(|&i| f.b[i]).map(Slot::B));
        Self { problem, slots }
    }

    fn get(&self, v: &FilterValues<T>) -> Vec<f64> {
        self.slots
            .iter()
            .map(|slot| match *slot {
                Slot::Pre(i) => v.pre[i],
                Slot::Theta(i) => v.theta[i],
                Slot::BHat(i) => v.b_hat[i],
                Slot::B(i) => v.b[i],
            })
            .map(|x| x.as_f64())
            .collect()
    }

    fn values(&self, x: &[f64]) -> FilterValues<T> {
        let mut v = self.problem.values.clone();
        for (slot, &xi) in self.slots.iter().zip(x) {
            let xi = T::lit(xi);
            match *slot {
                Slot::Pre(i) => v.pre[i] = xi,
                Slot::Theta(i) => v.theta[i] = xi,
                Slot::BHat(i) => v.b_hat[i] = xi,
                Slot::B(i) => v.b[i] = xi,
            }
        }
        v
    }

    fn compact(&self, x: &[f64]) -> Option<CompactGlm<T>> {
        let t = self.values(x).tableau(&self.problem.core, "candidate").ok()?;
        to_compact(&t).ok()
    }

    /// Stage row sums minus one, then every output row's conditions through
    /// the target order.
    fn constraints(&self, x: &[f64]) -> Option<Vec<f64>> {
        let c = self.compact(x)?;
        let p = self.problem.target_order;
        let dt = &c.d_tilde;
        let mut out: Vec<f64> = (c.k - 1..dt.rows())
            .map(|i| (dt.row(i).iter().copied().sum::<T>() - T::one()).as_f64())
            .collect();
        let rc = RowConditions::new(&c);
        for row in c.output_rows() {
            let r = rc.eval(&row);
            out.extend(
                ROW_CONDITIONS
                    .iter()
                    .zip(r)
                    .filter(|(cond, _)| cond.order as u32 <= p)
                    .map(|(_, v)| v.as_f64()),
            );
        }
        Some(out)
    }

    /// Central differences; the conditions are polynomials of degree at most
    /// five in the coefficients, so the truncation error is tiny.
    fn jacobian(&self, x: &[f64]) -> Option<Matrix<f64>> {
        let n = x.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (cp, cm) = (self.constraints(&xp)?, self.constraints(&xm)?);
            cols.push(cp.iter().zip(&cm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
        }
        let m = cols.first().map_or(0, |c| c.len());
        Some(Matrix::from_fn(m, n, |i, j| cols[j][i]))
    }

    /// Nearest point of the order-condition set by minimum-norm
    /// Gauss-Newton with step halving. Returns the last iterate when the
    /// conditions cannot be met; the penalty then sees the residual.
    fn project(&self, x0: &[f64]) -> Vec<f64> {
        let mut x = x0.to_vec();
        if x.is_empty() {
            return x;
        }
        let Some(mut c) = self.constraints(&x) else { return x };
        let size = |c: &[f64]| c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..PROJECTION_ITERS {
            let now = size(&c);
            if now <= PROJECTION_TOL {
                break;
            }
            let Some(j) = self.jacobian(&x) else { break };
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            let step = affine_solutions(&j, &neg, 1e-10).particular;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..12 {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + t * d).collect();
                if let Some(ct) = self.constraints(&trial) {
                    if size(&ct) < now {
                        x = trial;
                        c = ct;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }

    /// Local coordinates on the condition set around a projected point.
    fn chart(&self, x0: &[f64]) -> Chart {
        let origin = self.project(x0);
        let basis = match self.jacobian(&origin) {
            Some(j) if j.rows() > 0 => affine_solutions(&j, &vec![0.0; j.rows()], 1e-8).null_basis,
            _ => Matrix::identity(origin.len()),
        };
        Chart { origin, basis }
    }

    /// Free pre-filter entries uniform in half the box, the rest in `[-1, 1]`.
    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let half = 0.5 * self.problem.bound;
        self.slots
            .iter()
            .map(|slot| match slot {
                Slot::Pre(_) => rng.gen_range(-half..half),
                _ => rng.gen_range(-1.0..1.0),
            })
            .collect()
    }
}

struct Chart {
    origin: Vec<f64>,
    basis: Matrix<f64>,
}

impl Chart {
    fn dim(&self) -> usize {
        self.basis.cols()
    }

    fn point(&self, y: &[f64]) -> Vec<f64> {
        if y.is_empty() {
            return self.origin.clone();
        }
        self.origin.iter().zip(self.basis.mul_vec(y)).map(|(a, b)| a + b).collect()
    }
}

/// Every this many wedge rays contributes to the outer arc samples.
const ARC_RAY_STRIDE: usize = 5;

/// Stability samples for a trial value of the objective parameter.
struct Samples {
    search: Vec<Complex<f64>>,
}

impl Samples {
    /// For the wedge: the edge ray (all scan moduli, every fourth extended
    /// one) plus a thinned outer arc. The spectral radius of `M(z)` is log-subharmonic away from poles,
    /// so on a pole-free sector its maximum sits on this boundary; every
    /// candidate is still confirmed on the full sample set.
    fn new(objective: Objective, r: f64, cfg: &OptimizerConfig) -> Self {
        let search = match objective {
            Objective::AAlpha => {
                let (base, extended) = scan_moduli(&cfg.scan);
                let edge = wedge_angle(r);
                let far = extended[base.len()..].iter().step_by(4).chain(extended.last());
                let mut z: Vec<Complex<f64>> =
                    base.iter().chain(far).map(|&m| Complex::from_polar(m, edge)).collect();
                let rays = wedge_rays(r, &cfg.scan);
                for mu in rays.iter().step_by(ARC_RAY_STRIDE) {
                    for m in [cfg.scan.modulus_max, cfg.scan.verify_max] {
                        z.push(Complex::from_polar(m, wedge_angle(*mu)));
                    }
                }
                z
            }
            Objective::ImagAxis | Objective::NegRealAxis => {
                if r <= 0.0 {
                    Vec::new()
                } else {
                    let pts = logspace(1e-3f64.min(r), r, cfg.axis_samples);
                    pts.into_iter()
                        .map(|m| match objective {
                            Objective::ImagAxis => Complex::new(0.0, m),
                            _ => Complex::new(-m, 0.0),
                        })
                        .collect()
                }
            }
        };
        Self { search }
    }
}

/// Penalty of a point already on (or projected toward) the condition set.
fn penalty<T: Real>(param: &Param<'_, T>, samples: &Samples, cfg: &OptimizerConfig, x: &[f64]) -> f64 {
    let Some(compact) = param.compact(x) else { return f64::MAX };
    let p = param.problem.target_order as u8;
    let tau = tau_residuals(&compact);
    let order: f64 = tau.iter().filter(|(c, _)| c.order <= p).map(|(_, v)| v.as_f64().powi(2)).sum();
    let boxed: f64 = x.iter().map(|v| (v.abs() - param.problem.bound).max(0.0).powi(2)).sum();
    let op = EvolutionOperator::new(&compact);
    let ceiling = 1.0 - cfg.margin;
    let mut stab = 0.0;
    for z in &samples.search {
        let rho = match op.spectral_radius(Complex::new(T::lit(z.re), T::lit(z.im))) {
            Ok(r) => r.as_f64(),
            Err(_) => 2.0,
        };
        stab += (rho - ceiling).max(0.0).powi(2);
    }
    cfg.penalty_weight * order + stab + boxed
}

/// Exact feasibility of a candidate at `r` on the full sample set.
fn confirm<T: Real>(compact: &CompactGlm<T>, objective: Objective, r: f64, cfg: &OptimizerConfig) -> bool {
    let samples = dense_samples(objective, r, &VerificationConfig::default());
    max_excess(&EvolutionOperator::new(compact), &samples) <= cfg.scan.root_tol
}

/// Verification samples: the wedge for `r` with `density` times the rays and
/// moduli of the default scan, or the axis segment `[0, r]`.
fn dense_samples(objective: Objective, r: f64, cfg: &VerificationConfig) -> Vec<Complex<f64>> {
    match objective {
        Objective::AAlpha => {
            let dense = ScanConfig {
                rays: ScanConfig::default().rays * cfg.density,
                moduli: ScanConfig::default().moduli * cfg.density,
                verify_moduli: ScanConfig::default().verify_moduli * cfg.density,
                verify_max: cfg.max_modulus,
                ..ScanConfig::default()
            };
            let (_, moduli) = scan_moduli(&dense);
            wedge_rays(r, &dense)
                .into_iter()
                .flat_map(|mu| moduli.iter().map(move |&m| Complex::from_polar(m, wedge_angle(mu))))
                .collect()
        }
        _ if r <= 0.0 => Vec::new(),
        Objective::ImagAxis => logspace(1e-3f64.min(r), r, 200 * cfg.density)
            .into_iter()
            .map(|m| Complex::new(0.0, m))
            .collect(),
        Objective::NegRealAxis => logspace(1e-3f64.min(r), r, 200 * cfg.density)
            .into_iter()
            .map(|m| Complex::new(-m, 0.0))
            .collect(),
    }
}

/// Largest `rho(M(z)) - 1`; samples on a pole are skipped.
fn max_excess<T: Real>(op: &EvolutionOperator<T>, samples: &[Complex<f64>]) -> f64 {
    samples
        .par_iter()
        .map(|z| match op.spectral_radius(Complex::new(T::lit(z.re), T::lit(z.im))) {
            Ok(rho) => rho.as_f64() - 1.0,
            Err(StabilityError::Pole { .. }) => f64::NEG_INFINITY,
            Err(_) => f64::INFINITY,
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

struct NmOutcome {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    iterations: usize,
}

/// A start is abandoned when its best value improved by less than 0.1% over
/// this many evaluations per simplex vertex.
const STALL_EVALS_PER_DIM: usize = 40;

/// Nelder-Mead with standard coefficients. Stops at `target`, after
/// `max_evals`, when progress stalls, or when the simplex has collapsed.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize, target: f64) -> NmOutcome {
    let n = x0.len();
    let mut evals = 1;
    let f0 = f(x0);
    if n == 0 || f0 <= target {
        return NmOutcome {
            x: x0.to_vec(),
            f: f0,
            evals,
            iterations: 0,
        };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        evals += 1;
        simplex.push((x, fx));
    }
    let mut iterations = 0;
    let mut ref_best = f64::INFINITY;
    let mut last_gain = evals;
    let along = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best < ref_best * (1.0 - 1e-3) {
            ref_best = best;
            last_gain = evals;
        }
        let stalled = evals - last_gain > STALL_EVALS_PER_DIM * (n + 1);
        let collapsed = worst - best <= 1e-15 * (1.0 + best.abs()) && size < 1e-9;
        if best <= target || evals >= max_evals || stalled || collapsed || size < 1e-12 {
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let xr = along(&centroid, &simplex[n].0, -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(&centroid, &simplex[n].0, -2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(&centroid, &xr, 0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(&centroid, &simplex[n].0, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for (x, fx) in simplex[1..].iter_mut() {
                    *x = along(&x0, x, 0.5);
                    *fx = f(x);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    NmOutcome {
        x,
        f: fx,
        evals,
        iterations,
    }
}

struct Trial {
    x: Vec<f64>,
    penalty: f64,
    feasible: bool,
}

/// Feasibility search at one value of `r`. Each start is projected onto the
/// order conditions and Nelder-Mead runs in tangent coordinates there.
fn search<T: Real>(
    param: &Param<'_, T>,
    r: f64,
    warm: &[f64],
    rng: &mut ChaCha8Rng,
    cfg: &OptimizerConfig,
    counters: &mut (usize, usize),
) -> Trial {
    let samples = Samples::new(param.problem.objective, r, cfg);
    let starts = if warm.is_empty() { 1 } else { cfg.multistarts.max(1) };
    // odd starts perturb the warm point, even ones sample the whole box
    let points: Vec<Vec<f64>> = (0..starts)
        .map(|i| match i {
            0 => warm.to_vec(),
            i if i % 2 == 1 => warm.iter().map(|&w| w + rng.gen_range(-1.0..1.0)).collect(),
            _ => param.random(rng),
        })
        .collect();
    let mut best: Option<Trial> = None;
    for (c, chunk) in points.chunks(START_CHUNK).enumerate() {
        let outcomes: Vec<(NmOutcome, Vec<f64>, bool)> = chunk
            .par_iter()
            .enumerate()
            .map(|(j, x0)| {
                let chart = param.chart(x0);
                let f = |y: &[f64]| penalty(param, &samples, cfg, &param.project(&chart.point(y)));
                let step = if c == 0 && j == 0 { 0.05 } else { 0.5 };
                let y0 = vec![0.0; chart.dim()];
                let out = nelder_mead(f, &y0, step, cfg.max_evals_per_start, cfg.feasibility);
                let x = param.project(&chart.point(&out.x));
                let ok = out.f <= cfg.feasibility
                    && param.compact(&x).is_some_and(|c| confirm(&c, param.problem.objective, r, cfg));
                (out, x, ok)
            })
            .collect();
        for (out, x, ok) in outcomes {
            counters.0 += out.evals;
            counters.1 += out.iterations;
            let better = match &best {
                None => true,
                Some(b) => (ok && !b.feasible) || (ok == b.feasible && out.f < b.penalty),
            };
            if better {
                best = Some(Trial {
                    x,
                    penalty: out.f,
                    feasible: ok,
                });
            }
        }
        if best.as_ref().is_some_and(|b| b.feasible) || counters.0 >= cfg.max_total_evals {
            break;
        }
    }
    best.expect("at least one start")
}

/// Bisection on the objective parameter with a penalty search per trial.
pub fn optimize_filters<T: Real>(
    problem: &OptimizationProblem<T>,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult<T>, OptimizeError> {
    problem.check()?;
    let param = Param::new(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counters = (0usize, 0usize);
    let r_max = match problem.objective {
        Objective::AAlpha => cfg.scan.r_max,
        _ => cfg.axis_r_max,
    };

    let start = param.get(&problem.values);
    let first = search(&param, 0.0, &start, &mut rng, cfg, &mut counters);
    if !first.feasible {
        let residuals = param
            .compact(&first.x)
            .map(|c| tau_residuals(&c).iter().map(|(c, v)| (c.label(), v.as_f64())).collect())
            .unwrap_or_default();
        return Err(OptimizeError::Infeasible {
            penalty: first.penalty,
            residuals,
        });
    }
    let mut best_x = first.x;
    let mut lo = 0.0;
    let mut exhausted = false;
    let top = search(&param, r_max, &best_x, &mut rng, cfg, &mut counters);
    if top.feasible {
        lo = r_max;
        best_x = top.x;
    } else {
        let mut hi = r_max;
        while hi - lo > cfg.r_tol {
            if counters.0 >= cfg.max_total_evals {
                exhausted = true;
                break;
            }
            let mid = 0.5 * (lo + hi);
            let t = search(&param, mid, &best_x, &mut rng, cfg, &mut counters);
            if t.feasible {
                lo = mid;
                best_x = t.x;
            } else {
                hi = mid;
            }
        }
    }

    let values = param.values(&best_x);
    let name = format!("{}-optimized", problem.core.name());
    let tableau = values.tableau(&problem.core, &name)?;
    let compact = to_compact(&tableau)?;
    let order_report = OrderResidualReport::new(&compact, T::lit(1e-8));
    let order_ok = order_report.order >= problem.target_order as i32;
    let mut result = OptimizationResult {
        tableau,
        values,
        achieved_r: lo,
        achieved_alpha_deg: f64::NAN,
        order_report,
        feasible: order_ok && !exhausted,
        iterations: counters.1,
        evaluations: counters.0,
        seed: cfg.seed,
        target_order: problem.target_order,
        objective: problem.objective,
        budget_exhausted: exhausted,
    };
    let check = verify_result(&result, &VerificationConfig::default())?;
    result.feasible &= check.feasible;
    result.achieved_alpha_deg = match problem.objective {
        Objective::AAlpha if lo >= r_max && check.stability.a_stable => 90.0,
        Objective::AAlpha => alpha_from_r(lo),
        _ => check.stability.alpha_deg.unwrap_or(0.0),
    };
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationConfig {
    /// Multiplier on rays and moduli of the default scan.
    pub density: usize,
    pub max_modulus: f64,
    pub violation_tol: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            density: 4,
            max_modulus: 1e8,
            violation_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct Verification<T> {
    pub stability: StabilityReport,
    pub order: OrderResidualReport<T>,
    /// Largest `rho - 1` over the dense samples at the reported parameter.
    pub max_excess: f64,
    /// Largest order residual through the target order.
    pub max_residual: f64,
    pub feasible: bool,
}

/// Independent re-check on a denser sample set reaching `max_modulus`.
pub fn verify_result<T: Real>(
    result: &OptimizationResult<T>,
    cfg: &VerificationConfig,
) -> Result<Verification<T>, OptimizeError> {
    let compact = to_compact(&result.tableau)?;
    let tau = tau_residuals(&compact);
    let max_residual = tau.max_through(result.target_order as u8).as_f64();
    let order = OrderResidualReport::new(&compact, T::lit(1e-8));
    let samples = dense_samples(result.objective, result.achieved_r, cfg);
    let max_excess = max_excess(&EvolutionOperator::new(&compact), &samples);
    let stability = stability_report(&compact, &ScanConfig::default())?;
    let feasible = result.feasible && max_excess <= cfg.violation_tol && max_residual <= cfg.violation_tol;
    Ok(Verification {
        stability,
        order,
        max_excess,
        max_residual,
        feasible,
    })
}

/// Problem file: `{"core": <catalog name or method JSON>, "steps": k, "free": {...},
/// "values": {...}, "order": p, "objective": "a_alpha", "seed": n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemJson {
    pub core: serde_json::Value,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub free: FreeMaskJson,
    #[serde(default)]
    pub values: Option<PartialValues>,
    pub order: u32,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub multistarts: Option<usize>,
    #[serde(default)]
    pub bound: Option<f64>,
}

fn default_objective() -> Objective {
    Objective::AAlpha
}

/// Each field is either `true`/`false` for the whole block or a per-entry
/// list.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeMaskJson {
    #[serde(default)]
    pub pre: Option<MaskField>,
    #[serde(default)]
    pub theta: Option<MaskField>,
    #[serde(default)]
    pub b_hat: Option<MaskField>,
    #[serde(default)]
    pub b: Option<MaskField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskField {
    All(bool),
    Entries(Vec<bool>),
}

impl MaskField {
    fn expand(&self, n: usize, what: &'static str) -> Result<Vec<bool>, OptimizeError> {
        match self {
            MaskField::All(b) => Ok(vec![*b; n]),
            MaskField::Entries(v) if v.len() == n => Ok(v.clone()),
            MaskField::Entries(v) => Err(OptimizeError::Shape {
                what,
                expected: n,
                found: v.len(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialValues {
    #[serde(default)]
    pub pre: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub b_hat: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
}

impl ProblemJson {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Builds the problem for an already resolved core.
    pub fn to_problem<T: Real>(&self, core: &CoreMethod<T>) -> Result<OptimizationProblem<T>, OptimizeError> {
        let k = self.steps.unwrap_or(core.k()).max(core.k());
        let mut p = OptimizationProblem::new(core, k, self.order, self.objective);
        let (k, s) = (p.core.k(), p.core.s());
        let mask = |f: &Option<MaskField>, n, what| f.as_ref().map_or(Ok(vec![false; n]), |m| m.expand(n, what));
        p.free = FreeMask {
            pre: mask(&self.free.pre, k, "free.pre")?,
            theta: mask(&self.free.theta, k, "free.theta")?,
            b_hat: mask(&self.free.b_hat, k - 1, "free.b_hat")?,
            b: mask(&self.free.b, s, "free.b")?,
        };
        if let Some(v) = &self.values {
            let set = |dst: &mut Vec<T>, src: &Option<Vec<f64>>, what| -> Result<(), OptimizeError> {
                if let Some(src) = src {
                    if src.len() != dst.len() {
                        return Err(OptimizeError::Shape {
                            what,
                            expected: dst.len(),
                            found: src.len(),
                        });
                    }
                    *dst = src.iter().map(|&x| T::lit(x)).collect();
                }
                Ok(())
            };
            set(&mut p.values.pre, &v.pre, "values.pre")?;
            set(&mut p.values.theta, &v.theta, "values.theta")?;
            set(&mut p.values.b_hat, &v.b_hat, "values.b_hat")?;
            set(&mut p.values.b, &v.b, "values.b")?;
        }
        if let Some(b) = self.bound {
            p.bound = b;
        }
        Ok(p)
    }

    pub fn config(&self) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(m) = self.multistarts {
            cfg.multistarts = m;
        }
        cfg
    }
}
