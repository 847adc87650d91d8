//! Runs a GLM on an ODE problem: startup, stage solves, embedded outputs,
//! energy monitoring and convergence studies.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{CatalogEntry, EmbeddedRow, RetainedStageForm};
use crate::glm::{abscissas, to_compact, GlmError, GlmTableau, UpdateRow};
use crate::linalg::{Lu, Matrix};
use crate::problems::OdeProblem;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("dt = {0} must be positive and finite")]
    BadStep(f64),
    #[error("time span {span} is not a whole number of steps of size {dt}")]
    NotWholeSteps { span: f64, dt: f64 },
    #[error("step {step} at t = {t}: nonlinear solve stopped after {iterations} iterations with residual {residual:e}")]
    Solve {
        step: usize,
        t: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("step {step} at t = {t}: solution is no longer finite")]
    NonFinite { step: usize, t: f64 },
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("energy check needs an IE-Filt record, got {0}")]
    NotIeFilt(String),
    #[error("record has fewer than two embedded outputs")]
    NoEmbedded,
    #[error("halving study needs at least {needed} step sizes, got {found}")]
    TooFewLevels { needed: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Startup {
    /// Exact values when the problem has them, RK4 otherwise.
    Auto,
    Rk4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig<T> {
    pub dt: T,
    /// Residual tolerance, scaled by `max(1, |y|)`.
    pub newton_tol: T,
    pub newton_max_iters: usize,
    /// Retry a failed Newton solve with damped fixed-point iteration.
    pub fixed_point_fallback: bool,
    pub startup: Startup,
    /// RK4 steps per startup interval.
    pub bootstrap_substeps: usize,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            newton_tol: T::lit(1e-12),
            newton_max_iters: 50,
            fixed_point_fallback: false,
            startup: Startup::Auto,
            bootstrap_substeps: 100,
        }
    }

    pub fn with_dt(&self, dt: T) -> Self {
        Self { dt, ..self.clone() }
    }
}

/// What the stepper executes: a tableau, optional sibling update rows, and
/// optionally the retained-stage form of the error-inhibiting method.
#[derive(Clone, Debug, PartialEq)]
pub struct Method<T> {
    pub name: String,
    pub tableau: GlmTableau<T>,
    pub order: Option<u32>,
    pub embedded: Vec<EmbeddedRow<T>>,
    pub retained: Option<RetainedStageForm<T>>,
}

impl<T: Real> From<&CatalogEntry<T>> for Method<T> {
    fn from(e: &CatalogEntry<T>) -> Self {
        Self {
            name: e.name.clone(),
            tableau: e.tableau.clone(),
            order: Some(e.declared_order),
            embedded: e.embedded.clone(),
            retained: e.retained_form.clone(),
        }
    }
}

impl<T: Real> From<GlmTableau<T>> for Method<T> {
    fn from(t: GlmTableau<T>) -> Self {
        Self {
            name: t.name.clone(),
            tableau: t,
            order: None,
            embedded: Vec::new(),
            retained: None,
        }
    }
}

impl<T: Real> Method<T> {
    /// Same method executed through the plain GLM recurrence.
    pub fn without_retained(mut self) -> Self {
        self.retained = None;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperState<T> {
    /// Oldest first, at `t + offset_j * dt`.
    pub history: Vec<Vec<T>>,
    /// Previous step's `(y1, y2, y3)` for the retained-stage form.
    pub retained: Option<[Vec<T>; 3]>,
    pub t: T,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub jacobian_evaluations: usize,
    pub fixed_point_fallbacks: usize,
}

pub struct StepOutput<T> {
    pub state: StepperState<T>,
    /// One value per embedded row, in method order.
    pub alternates: Vec<Vec<T>>,
}

pub struct Stepper<'a, T> {
    method: &'a Method<T>,
    problem: &'a OdeProblem<T>,
    cfg: &'a SolveConfig<T>,
    offsets: Vec<T>,
    /// Abscissas of the tableau stages.
    c: Vec<T>,
    coupled: bool,
    needs_history_f: bool,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(method: &'a Method<T>, problem: &'a OdeProblem<T>, cfg: &'a SolveConfig<T>) -> Result<Self, IntegrateError> {
        if !(cfg.dt > T::zero() && cfg.dt.is_finite()) {
            return Err(IntegrateError::BadStep(cfg.dt.as_f64()));
        }
        let t = &method.tableau;
        let compact = to_compact(t)?;
        let c = abscissas(&compact).c[t.k - 1..].to_vec();
        let coupled = (0..t.s).any(|i| (i + 1..t.s).any(|j| t.a[(i, j)] != T::zero()));
        let nonzero = |v: &[T]| v.iter().any(|&x| x != T::zero());
        let needs_history_f = nonzero(t.a_hat.as_slice())
            || nonzero(&t.b_hat)
            || t.carry.iter().flatten().any(|r| nonzero(&r.b_hat))
            || method.embedded.iter().any(|e| nonzero(&e.row.b_hat));
        Ok(Self {
            method,
            problem,
            cfg,
            offsets: t.offsets(),
            c,
            coupled,
            needs_history_f,
        })
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    /// Fills the history. Exact values sit at `t0 + offset_j dt` (so before
    /// `t0`); the RK4 startup instead advances from `t0` and begins stepping
    /// at the first whole step with every history time at or after `t0`.
    pub fn bootstrap_history(&self) -> StepperState<T> {
        let p = self.problem;
        let h = self.cfg.dt;
        let t0 = p.t_span.0;
        let (t, history) = match (&p.exact, self.cfg.startup) {
            (Some(exact), Startup::Auto) => {
                let hist = self.offsets.iter().map(|&l| exact(t0 + l * h)).collect();
                (t0, hist)
            }
            _ => {
                let lead = self.offsets.iter().fold(T::zero(), |m, &l| m.max(-l));
                let m = (lead - T::lit(1e-12)).ceil().max(T::zero());
                let tn = t0 + m * h;
                let mut hist = Vec::with_capacity(self.offsets.len());
                let (mut tc, mut uc) = (t0, p.u0.clone());
                for &l in &self.offsets {
                    let target = tn + l * h;
                    uc = rk4(p, tc, &uc, target, self.cfg.bootstrap_substeps);
                    tc = target;
                    hist.push(uc.clone());
                }
                (tn, hist)
            }
        };
        let retained = self.method.retained.as_ref().map(|_| {
            // y2 of the previous step is u^{n-1/3}; the two solves give y1, y3
            let y2 = history[0].clone();
            let un = &history[history.len() - 1];
            let f2 = p.eval(t + self.offsets[0] * h, &y2);
            let fu = p.eval(t, un);
            let y1 = y2.iter().zip(&f2).map(|(&y, &f)| y - h * f).collect();
            let y3 = un.iter().zip(&fu).map(|(&y, &f)| y - h * f).collect();
            [y1, y2, y3]
        });
        StepperState {
            history,
            retained,
            t,
            n: 0,
        }
    }

    pub fn step(&self, state: &StepperState<T>, stats: &mut SolverStats) -> Result<StepOutput<T>, IntegrateError> {
        let out = match (&self.method.retained, &state.retained) {
            (Some(form), Some(prev)) => self.step_retained(form, prev, state, stats)?,
            _ => self.step_glm(state, stats)?,
        };
        stats.steps += 1;
        Ok(out)
    }

    fn step_glm(&self, state: &StepperState<T>, stats: &mut SolverStats) -> Result<StepOutput<T>, IntegrateError> {
        let tab = &self.method.tableau;
        let (k, s) = (tab.k, tab.s);
        let h = self.cfg.dt;
        let t = state.t;
        let m = self.problem.dim();
        let u = &state.history;
        let fh: Vec<Vec<T>> = if self.needs_history_f {
            u.iter()
                .zip(&self.offsets)
                .map(|(x, &l)| self.problem.eval(t + l * h, x))
                .collect()
        } else {
            Vec::new()
        };

        // explicit part of each stage: D u + h Ahat F(u)
        let base: Vec<Vec<T>> = (0..s)
            .map(|i| {
                let mut r = vec![T::zero(); m];
                for l in 0..k {
                    axpy(&mut r, tab.d[(i, l)], &u[l]);
                }
                if self.needs_history_f {
                    for l in 0..k - 1 {
                        axpy(&mut r, h * tab.a_hat[(i, l)], &fh[l]);
                    }
                }
                r
            })
            .collect();

        let times: Vec<T> = self.c.iter().map(|&c| t + c * h).collect();
        let mut fy: Vec<Vec<T>> = Vec::with_capacity(s);
        if self.coupled {
            let implicit: Vec<usize> = (0..s).filter(|&j| (0..s).any(|i| tab.a[(i, j)] != T::zero())).collect();
            let ys = self.solve_coupled(&base, &times, &implicit, state, stats)?;
            for i in 0..s {
                fy.push(self.problem.eval(times[i], &ys[i]));
            }
        } else {
            for i in 0..s {
                let mut r = base[i].clone();
                for j in 0..i {
                    axpy(&mut r, h * tab.a[(i, j)], &fy[j]);
                }
                let aii = tab.a[(i, i)];
                let yi = if aii == T::zero() {
                    r
                } else {
                    self.solve_implicit(&r, h * aii, times[i], state, stats)?
                };
                fy.push(self.problem.eval(times[i], &yi));
            }
        }

        let output = |row: &UpdateRow<T>| -> Vec<T> {
            let mut v = vec![T::zero(); m];
            for l in 0..k {
                axpy(&mut v, row.theta[l], &u[l]);
            }
            if self.needs_history_f {
                for l in 0..k - 1 {
                    axpy(&mut v, h * row.b_hat[l], &fh[l]);
                }
            }
            for j in 0..s {
                axpy(&mut v, h * row.b[j], &fy[j]);
            }
            v
        };
        let new = output(&tab.update_row());
        let history = match &tab.carry {
            None => {
                let mut hist: Vec<Vec<T>> = u[1..].to_vec();
                hist.push(new);
                hist
            }
            Some(rows) => {
                let mut hist: Vec<Vec<T>> = rows.iter().map(&output).collect();
                hist.push(new);
                hist
            }
        };
        let alternates = self.method.embedded.iter().map(|e| output(&e.row)).collect();
        Ok(StepOutput {
            state: StepperState {
                history,
                retained: None,
                t: t + h,
                n: state.n + 1,
            },
            alternates,
        })
    }

    fn step_retained(
        &self,
        form: &RetainedStageForm<T>,
        prev: &[Vec<T>; 3],
        state: &StepperState<T>,
        stats: &mut SolverStats,
    ) -> Result<StepOutput<T>, IntegrateError> {
        let h = self.cfg.dt;
        let t = state.t;
        let un = &state.history[state.history.len() - 1];
        let m = un.len();
        let [y1p, y2p, y3p] = prev;
        let mut y1 = vec![T::zero(); m];
        for (w, v) in form.first.iter().zip([y2p, un, y1p, y3p]) {
            axpy(&mut y1, *w, v);
        }
        let y2 = self.solve_implicit(&y1, h, t + form.solve_times[0] * h, state, stats)?;
        let mut y3 = vec![T::zero(); m];
        for (w, v) in form.third.iter().zip([un, &y2, y3p, &y1]) {
            axpy(&mut y3, *w, v);
        }
        let next = self.solve_implicit(&y3, h, t + form.solve_times[1] * h, state, stats)?;
        Ok(StepOutput {
            state: StepperState {
                history: vec![y2.clone(), next],
                retained: Some([y1, y2, y3]),
                t: t + h,
                n: state.n + 1,
            },
            alternates: Vec::new(),
        })
    }

    /// Solves `y = r + gamma f(t, y)`.
    fn solve_implicit(
        &self,
        r: &[T],
        gamma: T,
        t: T,
        state: &StepperState<T>,
        stats: &mut SolverStats,
    ) -> Result<Vec<T>, IntegrateError> {
        let coeff = Matrix::from_fn(1, 1, |_, _| gamma);
        let ys = self.newton(&[r.to_vec()], &[t], &coeff, state, stats)?;
        Ok(ys.into_iter().next().expect("one block"))
    }

    /// Solves the stages listed in `implicit` simultaneously; the others are
    /// explicit combinations evaluated afterwards.
    fn solve_coupled(
        &self,
        base: &[Vec<T>],
        times: &[T],
        implicit: &[usize],
        state: &StepperState<T>,
        stats: &mut SolverStats,
    ) -> Result<Vec<Vec<T>>, IntegrateError> {
        let tab = &self.method.tableau;
        let h = self.cfg.dt;
        let s = tab.s;
        // stages that no stage derivative depends on must be explicit in the
        // implicit set; anything referencing a non-implicit stage's F is not
        // supported by this path
        let is_imp = |j: usize| implicit.contains(&j);
        let refs: Vec<Vec<T>> = implicit.iter().map(|&i| base[i].clone()).collect();
        let coeff = Matrix::from_fn(implicit.len(), implicit.len(), |a, b| h * tab.a[(implicit[a], implicit[b])]);
        let t_imp: Vec<T> = implicit.iter().map(|&i| times[i]).collect();
        let ys_imp = self.newton(&refs, &t_imp, &coeff, state, stats)?;
        let f_imp: Vec<Vec<T>> = implicit
            .iter()
            .zip(&ys_imp)
            .map(|(&i, y)| self.problem.eval(times[i], y))
            .collect();
        Ok((0..s)
            .map(|i| {
                if let Some(pos) = implicit.iter().position(|&j| j == i) {
                    return ys_imp[pos].clone();
                }
                let mut r = base[i].clone();
                for (pos, &j) in implicit.iter().enumerate() {
                    debug_assert!(is_imp(j));
                    axpy(&mut r, h * tab.a[(i, j)], &f_imp[pos]);
                }
                r
            })
            .collect())
    }

    /// Newton on `y_a - r_a - sum_b coeff[a][b] f(t_b, y_b) = 0` over blocks.
    fn newton(
        &self,
        refs: &[Vec<T>],
        times: &[T],
        coeff: &Matrix<T>,
        state: &StepperState<T>,
        stats: &mut SolverStats,
    ) -> Result<Vec<Vec<T>>, IntegrateError> {
        let nb = refs.len();
        let m = self.problem.dim();
        let n = nb * m;
        let mut y: Vec<T> = refs.concat();
        let residual = |y: &[T]| -> Vec<T> {
            let fs: Vec<Vec<T>> = (0..nb).map(|b| self.problem.eval(times[b], &y[b * m..(b + 1) * m])).collect();
            let mut g: Vec<T> = y.to_vec();
            for a in 0..nb {
                for i in 0..m {
                    g[a * m + i] -= refs[a][i];
                }
                for b in 0..nb {
                    let cab = coeff[(a, b)];
                    if cab != T::zero() {
                        for i in 0..m {
                            g[a * m + i] -= cab * fs[b][i];
                        }
                    }
                }
            }
            g
        };
        let scaled = |g: &[T], y: &[T]| norm_inf(g) / T::one().max(norm_inf(y));
        let tol = self.cfg.newton_tol;
        let mut g = residual(&y);
        let mut iters = 0;
        while scaled(&g, &y) > tol && iters < self.cfg.newton_max_iters {
            let jblocks: Vec<Matrix<T>> = (0..nb).map(|b| self.jacobian(times[b], &y[b * m..(b + 1) * m])).collect();
            stats.jacobian_evaluations += nb;
            let jac = Matrix::from_fn(n, n, |r, c| {
                let (a, i) = (r / m, r % m);
                let (b, j) = (c / m, c % m);
                let id = if r == c { T::one() } else { T::zero() };
                id - coeff[(a, b)] * jblocks[b][(i, j)]
            });
            let Some(lu) = Lu::factor(&jac) else { break };
            let neg: Vec<T> = g.iter().map(|&x| -x).collect();
            let dy = lu.solve_vec(&neg);
            for (yi, d) in y.iter_mut().zip(&dy) {
                *yi += *d;
            }
            iters += 1;
            g = residual(&y);
            // increments at rounding level: accept
            if norm_inf(&dy) <= T::lit(4.0) * T::epsilon() * T::one().max(norm_inf(&y)) {
                break;
            }
        }
        stats.newton_iterations += iters;
        let small = T::lit(1e3) * T::epsilon();
        if scaled(&g, &y) > tol.max(small) {
            if self.cfg.fixed_point_fallback {
                stats.fixed_point_fallbacks += 1;
                let omega = T::lit(0.5);
                let mut fp = refs.concat();
                let mut gf = residual(&fp);
                let mut it = 0;
                while scaled(&gf, &fp) > tol && it < 20 * self.cfg.newton_max_iters {
                    for (yi, gi) in fp.iter_mut().zip(&gf) {
                        *yi -= omega * *gi;
                    }
                    gf = residual(&fp);
                    it += 1;
                }
                if scaled(&gf, &fp) <= tol.max(small) {
                    return Ok(split(fp, nb, m));
                }
            }
            return Err(IntegrateError::Solve {
                step: state.n,
                t: state.t.as_f64(),
                iterations: iters,
                residual: scaled(&g, &y).as_f64(),
            });
        }
        Ok(split(y, nb, m))
    }

    fn jacobian(&self, t: T, y: &[T]) -> Matrix<T> {
        if let Some(j) = &self.problem.jacobian {
            return j(t, y);
        }
        let m = y.len();
        let delta = T::lit(1e-7) * (T::one() + norm_inf(y));
        let mut jac = Matrix::zeros(m, m);
        for c in 0..m {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[c] += delta;
            ym[c] -= delta;
            let fp = self.problem.eval(t, &yp);
            let fm = self.problem.eval(t, &ym);
            for r in 0..m {
                jac[(r, c)] = (fp[r] - fm[r]) / (delta + delta);
            }
        }
        jac
    }
}

fn split<T: Real>(v: Vec<T>, nb: usize, m: usize) -> Vec<Vec<T>> {
    (0..nb).map(|b| v[b * m..(b + 1) * m].to_vec()).collect()
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    if a == T::zero() {
        return;
    }
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Classical RK4 from `(t0, u0)` to `t1` in `n` equal steps.
pub fn rk4<T: Real>(p: &OdeProblem<T>, t0: T, u0: &[T], t1: T, n: usize) -> Vec<T> {
    if t1 == t0 {
        return u0.to_vec();
    }
    let n = n.max(1);
    let h = (t1 - t0) / T::lit(n as f64);
    let half = T::lit(0.5);
    let sixth = T::ratio(1, 6);
    let two = T::lit(2.0);
    let mut u = u0.to_vec();
    for i in 0..n {
        let t = t0 + T::lit(i as f64) * h;
        let shift = |base: &[T], k: &[T], c: T| -> Vec<T> { base.iter().zip(k).map(|(&b, &x)| b + c * h * x).collect() };
        let k1 = p.eval(t, &u);
        let k2 = p.eval(t + half * h, &shift(&u, &k1, half));
        let k3 = p.eval(t + half * h, &shift(&u, &k2, half));
        let k4 = p.eval(t + h, &shift(&u, &k3, T::one()));
        for j in 0..u.len() {
            u[j] += sixth * h * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
        }
    }
    u
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedTrace<T> {
    pub name: String,
    pub order: u32,
    /// Aligned with `SolutionRecord::times[1..]`.
    pub states: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionRecord<T> {
    pub method: String,
    pub problem: String,
    pub dt: T,
    pub primary_order: Option<u32>,
    /// History at the start, oldest first, at `times[0] + offset_j dt`.
    pub initial_history: Vec<Vec<T>>,
    pub offsets: Vec<T>,
    /// Start time followed by the end of every completed step.
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub embedded: Vec<EmbeddedTrace<T>>,
    pub stats: SolverStats,
    /// Set when a step failed; the record holds the steps before it.
    pub failure: Option<IntegrateError>,
}

/// Steps from the bootstrapped history to the end of the time span.
pub fn integrate<T: Real>(
    problem: &OdeProblem<T>,
    method: &Method<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolutionRecord<T>, IntegrateError> {
    let stepper = Stepper::new(method, problem, cfg)?;
    let (t0, tf) = problem.t_span;
    let steps_f = ((tf - t0) / cfg.dt).as_f64();
    let whole = steps_f.round();
    if (steps_f - whole).abs() > 1e-9 * whole.max(1.0) || whole < 1.0 {
        return Err(IntegrateError::NotWholeSteps {
            span: (tf - t0).as_f64(),
            dt: cfg.dt.as_f64(),
        });
    }
    let mut state = stepper.bootstrap_history();
    let start_steps = ((state.t - t0) / cfg.dt).as_f64().round();
    let steps = (whole - start_steps).max(0.0) as usize;

    let mut record = SolutionRecord {
        method: method.name.clone(),
        problem: problem.name.clone(),
        dt: cfg.dt,
        primary_order: method.order,
        initial_history: state.history.clone(),
        offsets: stepper.offsets().to_vec(),
        times: vec![state.t],
        states: vec![state.history[state.history.len() - 1].clone()],
        embedded: method
            .embedded
            .iter()
            .map(|e| EmbeddedTrace {
                name: e.name.clone(),
                order: e.order,
                states: Vec::with_capacity(steps),
            })
            .collect(),
        stats: SolverStats::default(),
        failure: None,
    };
    for i in 0..steps {
        match stepper.step(&state, &mut record.stats) {
            Ok(out) if out.state.history.iter().flatten().any(|x| !x.is_finite()) => {
                record.failure = Some(IntegrateError::NonFinite {
                    step: state.n,
                    t: state.t.as_f64(),
                });
                break;
            }
            Ok(out) => {
                state = out.state;
                // recompute the time from the step count to avoid drift
                state.t = t0 + T::lit(start_steps + (i + 1) as f64) * cfg.dt;
                record.times.push(state.t);
                record.states.push(state.history[state.history.len() - 1].clone());
                for (trace, alt) in record.embedded.iter_mut().zip(out.alternates) {
                    trace.states.push(alt);
                }
            }
            Err(e) => {
                record.failure = Some(e);
                break;
            }
        }
    }
    Ok(record)
}

/// Per-step max-norm difference between the primary output and the sibling
/// closest in order above it (or below, when none is higher).
pub fn embedded_error_estimate<T: Real>(record: &SolutionRecord<T>) -> Result<Vec<T>, IntegrateError> {
    let primary = record.primary_order.unwrap_or(0);
    let pick = record
        .embedded
        .iter()
        .filter(|e| e.order > primary)
        .min_by_key(|e| e.order)
        .or_else(|| record.embedded.iter().max_by_key(|e| e.order))
        .ok_or(IntegrateError::NoEmbedded)?;
    Ok(record.states[1..]
        .iter()
        .zip(&pick.states)
        .map(|(a, b)| norm_inf(&a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<_>>()))
        .collect())
}

/// Weighted pair norm of `(u^n, u^{n-1})` for IE-Filt(d).
pub fn energy_matrix<T: Real>(d: T) -> [[T; 2]; 2] {
    let q = T::lit(0.25);
    let (two, three, seven) = (T::lit(2.0), T::lit(3.0), T::lit(7.0));
    let off = -(two * d - three) * (d - T::one()) * q;
    [
        [(two * d * d - seven * d + T::lit(6.0)) * q, off],
        [off, (two * d * d - three * d + two) * q],
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyTrace<T> {
    pub g: [[T; 2]; 2],
    /// `|X^n|_G^2` from the first full pair on.
    pub norms: Vec<T>,
    pub monotone: bool,
}

/// Checks that the G-norm never grows beyond `1e-12 (1 + |X^n|_G^2)`.
pub fn energy_check<T: Real>(record: &SolutionRecord<T>, d: T) -> Result<EnergyTrace<T>, IntegrateError> {
    if !record.method.starts_with("IE-Filt") || record.initial_history.len() != 2 {
        return Err(IntegrateError::NotIeFilt(record.method.clone()));
    }
    let g = energy_matrix(d);
    let seq: Vec<&Vec<T>> = record.initial_history.iter().chain(&record.states[1..]).collect();
    let norms: Vec<T> = seq
        .windows(2)
        .map(|w| {
            let (old, new) = (w[0], w[1]);
            new.iter()
                .zip(old)
                .map(|(&a, &b)| g[0][0] * a * a + (g[0][1] + g[1][0]) * a * b + g[1][1] * b * b)
                .sum()
        })
        .collect();
    let slack = T::lit(1e-12);
    let monotone = norms.windows(2).all(|w| w[1] <= w[0] + slack * (T::one() + w[0]));
    Ok(EnergyTrace { g, norms, monotone })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub dt: f64,
    /// Absent when the run failed.
    pub error: Option<f64>,
    pub order_estimate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub method: String,
    pub problem: String,
    pub levels: Vec<ConvergenceLevel>,
    /// Median of the pairwise order estimates.
    pub slope: Option<f64>,
}

impl ConvergenceTable {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "dt,error,order_estimate")?;
        for l in &self.levels {
            let err = l.error.map_or("---".to_string(), |e| format!("{e:e}"));
            let ord = match (l.error, l.order_estimate) {
                (None, _) => "---".to_string(),
                (_, Some(o)) => format!("{o:.4}"),
                (_, None) => String::new(),
            };
            writeln!(out, "{},{err},{ord}", l.dt)?;
        }
        Ok(())
    }
}

/// `dt0, dt0/2, ...` with `levels` entries.
pub fn halving(dt0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| dt0 / 2f64.powi(i as i32)).collect()
}

/// Errors measured against the exact solution, or against a fine RK4
/// reference on the finest step grid when the problem has none.
///
/// The error of a run is the largest max-norm deviation over all computed
/// steps, divided by the max norm of the solution at the final time.
pub fn observed_order<T: Real>(
    problem: &OdeProblem<T>,
    method: &Method<T>,
    dts: &[f64],
    cfg: &SolveConfig<T>,
) -> Result<ConvergenceTable, IntegrateError> {
    if dts.len() < 2 {
        return Err(IntegrateError::TooFewLevels {
            needed: 2,
            found: dts.len(),
        });
    }
    let reference = match &problem.exact {
        Some(_) => None,
        None => Some(fine_reference(problem, dts.iter().copied().fold(f64::INFINITY, f64::min))),
    };
    let tf = problem.t_span.1;
    let scale_at_tf = match (&problem.exact, &reference) {
        (Some(ex), _) => norm_inf(&ex(tf)),
        (None, Some((_, _, vals))) => norm_inf(vals.last().expect("reference")),
        _ => unreachable!(),
    };
    let errors: Vec<Result<Option<f64>, IntegrateError>> = dts
        .par_iter()
        .map(|&dt| {
            let rec = integrate(problem, method, &cfg.with_dt(T::lit(dt)))?;
            if rec.failure.is_some() {
                return Ok(None);
            }
            let mut worst = T::zero();
            for (t, u) in rec.times.iter().zip(&rec.states).skip(1) {
                let exact = match (&problem.exact, &reference) {
                    (Some(ex), _) => ex(*t),
                    (None, Some((t0, h, vals))) => {
                        let idx = ((*t - *t0) / *h).as_f64().round() as usize;
                        vals[idx].clone()
                    }
                    _ => unreachable!(),
                };
                let e = u.iter().zip(&exact).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
                worst = worst.max(e);
            }
            Ok(Some((worst / scale_at_tf).as_f64()))
        })
        .collect();
    let mut levels = Vec::with_capacity(dts.len());
    for (i, (&dt, err)) in dts.iter().zip(errors).enumerate() {
        let error = err?;
        let order_estimate = match (i.checked_sub(1).and_then(|j| levels.get(j)), error) {
            (Some(ConvergenceLevel { error: Some(prev), dt: pdt, .. }), Some(e)) => {
                Some((prev / e).ln() / (pdt / dt).ln())
            }
            _ => None,
        };
        levels.push(ConvergenceLevel { dt, error, order_estimate });
    }
    let mut est: Vec<f64> = levels.iter().filter_map(|l| l.order_estimate).collect();
    est.sort_by(|a, b| a.total_cmp(b));
    let slope = median(&est);
    Ok(ConvergenceTable {
        method: method.name.clone(),
        problem: problem.name.clone(),
        levels,
        slope,
    })
}

pub fn median(sorted: &[f64]) -> Option<f64> {
    match sorted.len() {
        0 => None,
        n if n % 2 == 1 => Some(sorted[n / 2]),
        n => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

/// RK4 solution stored every `dt_min`, computed with 32 substeps each.
fn fine_reference<T: Real>(p: &OdeProblem<T>, dt_min: f64) -> (T, T, Vec<Vec<T>>) {
    let (t0, tf) = p.t_span;
    let h = T::lit(dt_min);
    let n = ((tf - t0) / h).as_f64().round() as usize;
    let mut vals = Vec::with_capacity(n + 1);
    let mut u = p.u0.clone();
    vals.push(u.clone());
    for i in 0..n {
        let ta = t0 + T::lit(i as f64) * h;
        u = rk4(p, ta, &u, ta + h, 32);
        vals.push(u.clone());
    }
    (t0, h, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::problems::{dahlquist, decay_forced, poly};

    fn entry(name: &str) -> Method<f64> {
        Method::from(&catalog::get::<f64>(name).unwrap())
    }

    #[test]
    fn ie_one_step() {
        let p = dahlquist(-1.0);
        let m = entry("IE");
        let cfg = SolveConfig::new(0.1);
        let s = Stepper::new(&m, &p, &cfg).unwrap();
        let st = s.bootstrap_history();
        assert_eq!(st.history, vec![vec![1.0]]);
        let out = s.step(&st, &mut SolverStats::default()).unwrap();
        assert!((out.state.history[0][0] - 1.0 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn exact_startup_uses_offsets() {
        let p = dahlquist(-2.0);
        let m = entry("IE-Pre-2");
        let cfg = SolveConfig::new(0.1);
        let st = Stepper::new(&m, &p, &cfg).unwrap().bootstrap_history();
        for (j, l) in [-2.0, -1.0, 0.0].iter().enumerate() {
            assert!((st.history[j][0] - (-2.0 * l * 0.1f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn rk4_startup_accuracy() {
        let mut p = dahlquist(-1.0);
        p.exact = None;
        let m = entry("IE-Pre-2");
        let cfg = SolveConfig::new(0.1);
        let st = Stepper::new(&m, &p, &cfg).unwrap().bootstrap_history();
        assert!((st.t - 0.2).abs() < 1e-15);
        for (j, u) in st.history.iter().enumerate() {
            let t = 0.1 * j as f64;
            assert!((u[0] - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn midpoint_samples_forcing_at_half_step() {
        // u' = t: the midpoint stage sees t_n + h/2, exact for linear forcing
        let p = poly(2);
        let m = entry("MP");
        let cfg = SolveConfig::new(0.125);
        let rec = integrate(&p, &m, &cfg).unwrap();
        let last = rec.states.last().unwrap()[0];
        assert!((last - 1.0).abs() < 1e-14);
    }

    #[test]
    fn partial_step_rejected() {
        let p = dahlquist(-1.0);
        let m = entry("IE");
        assert!(matches!(
            integrate(&p, &m, &SolveConfig::new(0.3)),
            Err(IntegrateError::NotWholeSteps { .. })
        ));
    }

    #[test]
    fn retained_and_glm_paths_agree() {
        let p = decay_forced();
        let m = entry("IE-EIS-3");
        let plain = m.clone().without_retained();
        let cfg = SolveConfig::new(0.05);
        let a = integrate(&p, &m, &cfg).unwrap();
        let b = integrate(&p, &plain, &cfg).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x[0] - y[0]).abs() < 1e-12, "{x:?} {y:?}");
        }
    }

    #[test]
    fn embedded_outputs_match_sibling_runs() {
        let p = decay_forced();
        let cfg = SolveConfig::new(0.1);
        let e = catalog::get::<f64>("MP-Pre-Post-3").unwrap();
        let rec = integrate(&p, &Method::from(&e), &cfg).unwrap();
        let trace = rec.embedded.iter().find(|t| t.order == 4).unwrap();
        // one step from the same exact history
        let sib = Method::from(e.sibling("MP-Pre-Post-4").unwrap());
        let s = Stepper::new(&sib, &p, &cfg).unwrap();
        let out = s.step(&s.bootstrap_history(), &mut SolverStats::default()).unwrap();
        assert_eq!(out.state.history.last().unwrap(), &trace.states[0]);
        let est = embedded_error_estimate(&rec).unwrap();
        assert_eq!(est.len(), rec.states.len() - 1);
        let single = integrate(&p, &entry("IE"), &cfg).unwrap();
        assert_eq!(embedded_error_estimate(&single), Err(IntegrateError::NoEmbedded));
    }

    #[test]
    fn energy_matrix_values() {
        assert_eq!(energy_matrix(0.0), [[1.5, -0.75], [-0.75, 0.5]]);
        assert_eq!(energy_matrix(1.0), [[0.25, 0.0], [0.0, 0.25]]);
    }

    #[test]
    fn energy_decays_for_ie_filt() {
        let mut p = dahlquist(-1.0);
        p.t_span = (0.0, 60.0);
        let m = entry("IE-Filt(0.5)");
        let rec = integrate(&p, &m, &SolveConfig::new(0.3)).unwrap();
        assert_eq!(rec.states.len(), 201);
        let tr = energy_check(&rec, 0.5).unwrap();
        assert!(tr.monotone);
        let ie = integrate(&p, &entry("IE"), &SolveConfig::new(0.3)).unwrap();
        assert!(matches!(energy_check(&ie, 0.5), Err(IntegrateError::NotIeFilt(_))));
    }

    #[test]
    fn coupled_solve_runs_lobatto() {
        let rec = integrate(&decay_forced(), &entry("RK22"), &SolveConfig::new(0.05)).unwrap();
        let exact = (decay_forced::<f64>().exact.unwrap())(4.0)[0];
        assert!((rec.states.last().unwrap()[0] - exact).abs() < 1e-3);
        assert!(rec.failure.is_none());
    }

    #[test]
    fn convergence_csv_marks_failures() {
        let t = ConvergenceTable {
            method: "m".into(),
            problem: "p".into(),
            levels: vec![
                ConvergenceLevel { dt: 0.2, error: Some(1e-2), order_estimate: None },
                ConvergenceLevel { dt: 0.1, error: None, order_estimate: None },
            ],
            slope: None,
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("0.1,---,---"));
    }

    #[test]
    fn ie_slope_is_one() {
        let t = observed_order(&dahlquist(-1.0), &entry("IE"), &halving(0.2, 4), &SolveConfig::new(0.2)).unwrap();
        assert!((t.slope.unwrap() - 1.0).abs() < 0.1, "{t:?}");
    }
}
