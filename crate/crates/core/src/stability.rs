//! Linear stability: the evolution operator `M(z)` on `u' = lambda u`,
//! `z = h lambda`, the root condition, A(alpha) angles and region rasters.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::glm::CompactGlm;
use crate::linalg::{eigenvalues, CMatrix, EigenError, Lu, Matrix};
use crate::scalar::{logspace, Real};

/// Boundary tolerance for region membership.
pub const ROOT_TOL: f64 = 1e-8;

/// Moduli `|z|` of the L-stability probes on the negative real axis.
pub const L_PROBES: [f64; 3] = [1e6, 1e9, 1e12];

/// Largest spectral radius accepted at the last L-stability probe.
pub const L_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("I - z A~ is singular at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// `M(z)` for one method, with the coefficient blocks converted to complex
/// once.
#[derive(Clone, Debug)]
pub struct EvolutionOperator<T> {
    k: usize,
    a_tilde: CMatrix<T>,
    d_tilde: CMatrix<T>,
    /// Output rows of `M`: carry rows (if any) then the update.
    rows: Vec<(Vec<Complex<T>>, Vec<Complex<T>>)>,
    shifts: bool,
}

impl<T: Real> EvolutionOperator<T> {
    pub fn new(compact: &CompactGlm<T>) -> Self {
        let c = |x: T| Complex::new(x, T::zero());
        let cv = |v: &[T]| v.iter().map(|&x| c(x)).collect::<Vec<_>>();
        Self {
            k: compact.k,
            a_tilde: compact.a_tilde.map(c),
            d_tilde: compact.d_tilde.map(c),
            rows: compact
                .output_rows()
                .iter()
                .map(|r| (cv(&r.theta), cv(&r.b_tilde)))
                .collect(),
            shifts: compact.carry.is_empty(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `M(z)`; the history rows are `[0 | I]` unless the method carries
    /// explicit rows.
    pub fn matrix(&self, z: Complex<T>) -> Result<CMatrix<T>, StabilityError> {
        let k = self.k;
        let n = self.a_tilde.rows();
        let lhs = Matrix::from_fn(n, n, |i, j| {
            let id = if i == j { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) };
            id - z * self.a_tilde[(i, j)]
        });
        let lu = Lu::factor(&lhs).ok_or(StabilityError::Pole {
            re: z.re.as_f64(),
            im: z.im.as_f64(),
        })?;
        let w = lu.solve(&self.d_tilde);
        let mut m = Matrix::zeros(k, k);
        let phi = |theta: &[Complex<T>], bt: &[Complex<T>]| -> Vec<Complex<T>> {
            let bw = w.vec_mul(bt);
            theta.iter().zip(bw).map(|(&t, x)| t + z * x).collect()
        };
        if self.shifts {
            for i in 0..k - 1 {
                m[(i, i + 1)] = Complex::new(T::one(), T::zero());
            }
            let (theta, bt) = &self.rows[0];
            m.row_mut(k - 1).copy_from_slice(&phi(theta, bt));
        } else {
            for (i, (theta, bt)) in self.rows.iter().enumerate() {
                m.row_mut(i).copy_from_slice(&phi(theta, bt));
            }
        }
        Ok(m)
    }

    pub fn eigenvalues(&self, z: Complex<T>) -> Result<Vec<Complex<T>>, StabilityError> {
        Ok(eigenvalues(&self.matrix(z)?)?)
    }

    pub fn spectral_radius(&self, z: Complex<T>) -> Result<T, StabilityError> {
        Ok(max_modulus(&self.eigenvalues(z)?))
    }

    pub fn root_condition(&self, z: Complex<T>, tol: T) -> Result<bool, StabilityError> {
        Ok(roots_satisfy_condition(&self.eigenvalues(z)?, tol))
    }
}

pub fn evolution_matrix<T: Real>(
    compact: &CompactGlm<T>,
    z: Complex<T>,
) -> Result<CMatrix<T>, StabilityError> {
    EvolutionOperator::new(compact).matrix(z)
}

pub fn spectral_radius<T: Real>(m: &CMatrix<T>) -> Result<T, EigenError> {
    Ok(max_modulus(&eigenvalues(m)?))
}

fn max_modulus<T: Real>(ev: &[Complex<T>]) -> T {
    ev.iter().fold(T::zero(), |a, z| a.max(z.norm()))
}

/// All roots within `1 + tol`, and roots with modulus above `1 - tol` simple.
///
/// Rounding splits a double root by about `sqrt(eps)`, so two roots count as
/// one repeated root when they lie within `sqrt(tol)` of each other.
pub fn roots_satisfy_condition<T: Real>(ev: &[Complex<T>], tol: T) -> bool {
    let one = T::one();
    if ev.iter().any(|z| z.norm() > one + tol) {
        return false;
    }
    let radius = tol.sqrt();
    let outer: Vec<_> = ev.iter().filter(|z| z.norm() > one - tol).collect();
    for (i, a) in outer.iter().enumerate() {
        for b in &outer[i + 1..] {
            if (**a - **b).norm() <= radius {
                return false;
            }
        }
    }
    true
}

pub fn satisfies_root_condition<T: Real>(
    compact: &CompactGlm<T>,
    z: Complex<T>,
    tol: T,
) -> Result<bool, StabilityError> {
    EvolutionOperator::new(compact).root_condition(z, tol)
}

/// Sampling used by [`a_alpha_angle`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanConfig {
    /// Rays with `mu > 0`; the negative real axis (`mu = 0`) is always added.
    pub rays: usize,
    /// Smallest ray parameter as a fraction of `r`.
    pub ray_min_fraction: f64,
    pub moduli: usize,
    pub modulus_min: f64,
    pub modulus_max: f64,
    pub verify_moduli: usize,
    pub verify_max: f64,
    pub angle_tol_deg: f64,
    pub r_max: f64,
    pub root_tol: f64,
    /// Samples for the imaginary-axis check behind `a_stable`.
    pub axis_samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            rays: 40,
            ray_min_fraction: 1e-3,
            moduli: 60,
            modulus_min: 1e-3,
            modulus_max: 1e4,
            verify_moduli: 24,
            verify_max: 1e8,
            angle_tol_deg: 0.05,
            r_max: 50.0,
            root_tol: ROOT_TOL,
            axis_samples: 400,
        }
    }
}

/// Angle of the wedge edge for ray parameter `mu`, in radians from the
/// positive real axis.
pub fn wedge_angle(mu: f64) -> f64 {
    std::f64::consts::PI * (mu * mu + 1.0) / (2.0 * mu * mu + 1.0)
}

/// `alpha` in degrees for wedge parameter `r`.
pub fn alpha_from_r(r: f64) -> f64 {
    180.0 * (1.0 - (r * r + 1.0) / (2.0 * r * r + 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanMeta {
    pub config: ScanConfig,
    /// Samples skipped because `I - z A~` was singular.
    pub skipped_poles: usize,
    /// The angle held on the extended modulus range without a rerun.
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleResult {
    /// Absent when the root condition fails on the negative real axis.
    pub alpha_deg: Option<f64>,
    pub r: Option<f64>,
    pub a_stable: bool,
    pub scan: ScanMeta,
}

struct Wedge<'a, T> {
    op: &'a EvolutionOperator<T>,
    moduli: Vec<f64>,
    cfg: &'a ScanConfig,
}

impl<T: Real> Wedge<'_, T> {
    /// Returns (feasible, skipped poles).
    fn feasible(&self, r: f64) -> Result<(bool, usize), StabilityError> {
        let mus = wedge_rays(r, self.cfg);
        let tol = T::lit(self.cfg.root_tol);
        let per_ray: Vec<Result<(bool, usize), StabilityError>> = mus
            .par_iter()
            .map(|&mu| {
                let th = wedge_angle(mu);
                let mut skipped = 0;
                for &m in &self.moduli {
                    let z = Complex::from_polar(T::lit(m), T::lit(th));
                    match self.op.root_condition(z, tol) {
                        Ok(true) => {}
                        Ok(false) => return Ok((false, skipped)),
                        Err(StabilityError::Pole { .. }) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
                Ok((true, skipped))
            })
            .collect();
        let mut ok = true;
        let mut skipped = 0;
        for r in per_ray {
            let (f, s) = r?;
            ok &= f;
            skipped += s;
        }
        Ok((ok, skipped))
    }
}

/// Ray parameters of the wedge sample set for `r`: `0` and `cfg.rays`
/// log-spaced values ending at `r`.
pub fn wedge_rays(r: f64, cfg: &ScanConfig) -> Vec<f64> {
    let mut mus = vec![0.0];
    if r > 0.0 {
        mus.extend(logspace(r * cfg.ray_min_fraction, r, cfg.rays));
    }
    mus
}

/// Scan moduli and the same list extended to `cfg.verify_max`.
pub fn scan_moduli(cfg: &ScanConfig) -> (Vec<f64>, Vec<f64>) {
    let base = logspace(cfg.modulus_min, cfg.modulus_max, cfg.moduli);
    let mut extended = base.clone();
    extended.extend(logspace(cfg.modulus_max, cfg.verify_max, cfg.verify_moduli + 1).into_iter().skip(1));
    (base, extended)
}

/// Root condition on every wedge sample for `r` over the given moduli.
/// Returns the verdict and the number of samples skipped at poles.
pub fn wedge_feasible<T: Real>(
    op: &EvolutionOperator<T>,
    r: f64,
    moduli: &[f64],
    cfg: &ScanConfig,
) -> Result<(bool, usize), StabilityError> {
    Wedge { op, moduli: moduli.to_vec(), cfg }.feasible(r)
}

/// Largest A(alpha) angle found by bisection on the wedge parameter.
///
/// When the whole scanned wedge is stable, the imaginary axis is checked as
/// well and a pass is reported as `alpha = 90`, `a_stable = true`.
pub fn a_alpha_angle<T: Real>(
    compact: &CompactGlm<T>,
    cfg: &ScanConfig,
) -> Result<AngleResult, StabilityError> {
    let op = EvolutionOperator::new(compact);
    let (base, extended) = scan_moduli(cfg);
    let (lo, skipped) = bisect(&Wedge { op: &op, moduli: base, cfg }, cfg)?;
    let check = Wedge { op: &op, moduli: extended, cfg };
    let (verified, mut skipped) = match lo {
        Some(r) => {
            let (ok, s) = check.feasible(r)?;
            (ok, skipped + s)
        }
        None => (true, skipped),
    };
    let r = if verified {
        lo
    } else {
        let (r, s) = bisect(&check, cfg)?;
        skipped += s;
        r
    };
    let mut a_stable = false;
    let mut alpha = r.map(alpha_from_r);
    if r == Some(cfg.r_max) {
        let axis = axis_stability_radius(&op, Axis::Imaginary, cfg.verify_max, cfg.axis_samples, T::lit(cfg.root_tol));
        if axis >= cfg.verify_max {
            a_stable = true;
            alpha = Some(90.0);
        }
    }
    Ok(AngleResult {
        alpha_deg: alpha,
        r,
        a_stable,
        scan: ScanMeta {
            config: cfg.clone(),
            skipped_poles: skipped,
            verified,
        },
    })
}

fn bisect<T: Real>(w: &Wedge<'_, T>, cfg: &ScanConfig) -> Result<(Option<f64>, usize), StabilityError> {
    let (ok, mut skipped) = w.feasible(cfg.r_max)?;
    if ok {
        return Ok((Some(cfg.r_max), skipped));
    }
    let (ok, s) = w.feasible(0.0)?;
    skipped += s;
    if !ok {
        return Ok((None, skipped));
    }
    let (mut lo, mut hi) = (0.0, cfg.r_max);
    while alpha_from_r(hi) - alpha_from_r(lo) > cfg.angle_tol_deg {
        let mid = 0.5 * (lo + hi);
        let (ok, s) = w.feasible(mid)?;
        skipped += s;
        if ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((Some(lo), skipped))
}

/// Spectral radii at the L-stability probes. A probe sitting on a pole is
/// moved by a seeded relative perturbation of at most 1%.
pub fn l_probe_radii<T: Real>(op: &EvolutionOperator<T>) -> Result<Vec<T>, StabilityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    L_PROBES
        .iter()
        .map(|&m| {
            let mut z = Complex::new(T::lit(-m), T::zero());
            for _ in 0..16 {
                match op.spectral_radius(z) {
                    Err(StabilityError::Pole { .. }) => {
                        let f: f64 = rng.gen_range(-0.01..0.01);
                        z = Complex::new(T::lit(-m * (1.0 + f)), T::zero());
                    }
                    other => return other,
                }
            }
            op.spectral_radius(z)
        })
        .collect()
}

/// Probe radii below this are rounding noise and count as decayed.
pub const L_NOISE_FLOOR: f64 = 1e-10;

/// Decreasing probe radii ending at or below [`L_THRESHOLD`]. Once a radius
/// reaches [`L_NOISE_FLOOR`] the sequence is not required to keep falling.
pub fn probes_decay<T: Real>(radii: &[T]) -> bool {
    let floor = T::lit(L_NOISE_FLOOR);
    radii.windows(2).all(|w| w[1] < w[0] || w[1] <= floor)
        && radii.last().is_some_and(|&x| x <= T::lit(L_THRESHOLD))
}

/// L-stability: A-stable and the spectral radius vanishing along the
/// negative real axis.
pub fn is_l_stable<T: Real>(compact: &CompactGlm<T>) -> Result<bool, StabilityError> {
    let angle = a_alpha_angle(compact, &ScanConfig::default())?;
    if !angle.a_stable {
        return Ok(false);
    }
    Ok(probes_decay(&l_probe_radii(&EvolutionOperator::new(compact))?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Imaginary,
    NegativeReal,
}

impl Axis {
    fn point<T: Real>(self, mu: f64) -> Complex<T> {
        match self {
            Axis::Imaginary => Complex::new(T::zero(), T::lit(mu)),
            Axis::NegativeReal => Complex::new(T::lit(-mu), T::zero()),
        }
    }
}

/// Largest `nu <= zmax` with the root condition holding on `(0, nu]` of the
/// axis. Samples are log-spaced from `1e-6 zmax`; the first crossing is
/// refined by bisection. Returns `zmax` when no violation is found.
pub fn axis_stability_radius<T: Real>(
    op: &EvolutionOperator<T>,
    axis: Axis,
    zmax: f64,
    samples: usize,
    tol: T,
) -> f64 {
    let holds = |mu: f64| matches!(op.root_condition(axis.point(mu), tol), Ok(true) | Err(StabilityError::Pole { .. }));
    let mus = logspace(zmax * 1e-6, zmax, samples.max(2));
    let Some(first_bad) = mus.iter().position(|&mu| !holds(mu)) else {
        return zmax;
    };
    let (mut lo, mut hi) = if first_bad == 0 {
        (0.0, mus[0])
    } else {
        (mus[first_bad - 1], mus[first_bad])
    };
    while hi - lo > 1e-12 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    lo
}

/// Axis radius for a compact method with the default boundary tolerance.
pub fn axis_radius<T: Real>(compact: &CompactGlm<T>, axis: Axis, zmax: f64) -> f64 {
    axis_stability_radius(&EvolutionOperator::new(compact), axis, zmax, 400, T::lit(ROOT_TOL))
}

/// Everything the `analyze` command reports about linear stability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub alpha_deg: Option<f64>,
    pub r: Option<f64>,
    pub a_stable: bool,
    pub l_stable: bool,
    pub l_probes: Vec<f64>,
    pub imag_radius: f64,
    pub neg_real_radius: f64,
    pub scan: ScanMeta,
}

pub fn stability_report<T: Real>(
    compact: &CompactGlm<T>,
    cfg: &ScanConfig,
) -> Result<StabilityReport, StabilityError> {
    let op = EvolutionOperator::new(compact);
    let angle = a_alpha_angle(compact, cfg)?;
    let probes = l_probe_radii(&op)?;
    let tol = T::lit(cfg.root_tol);
    Ok(StabilityReport {
        alpha_deg: angle.alpha_deg,
        r: angle.r,
        a_stable: angle.a_stable,
        l_stable: angle.a_stable && probes_decay(&probes),
        l_probes: probes.iter().map(|x| x.as_f64()).collect(),
        imag_radius: axis_stability_radius(&op, Axis::Imaginary, cfg.modulus_max, cfg.axis_samples, tol),
        neg_real_radius: axis_stability_radius(&op, Axis::NegativeReal, cfg.modulus_max, cfg.axis_samples, tol),
        scan: angle.scan,
    })
}

/// Rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// Spectral radii on a grid; rows run over the imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `rho[j * nx + i]` at `re[i] + im[j] i`; infinite at poles and NaN
    /// where the eigenvalue iteration failed.
    pub rho: Vec<f64>,
}

impl Raster {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.rho[j * self.re.len() + i]
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re,im,rho")?;
        for (j, &y) in self.im.iter().enumerate() {
            for (i, &x) in self.re.iter().enumerate() {
                writeln!(out, "{x},{y},{}", self.at(i, j))?;
            }
        }
        Ok(())
    }
}

pub fn region_raster<T: Real>(compact: &CompactGlm<T>, window: Window, nx: usize, ny: usize) -> Raster {
    assert!(nx >= 2 && ny >= 2, "raster needs at least 2x2 points");
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let re = grid(window.re_min, window.re_max, nx);
    let im = grid(window.im_min, window.im_max, ny);
    let op = EvolutionOperator::new(compact);
    let rho = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let z = Complex::new(T::lit(re[idx % nx]), T::lit(im[idx / nx]));
            match op.spectral_radius(z) {
                Ok(r) => r.as_f64(),
                Err(StabilityError::Pole { .. }) => f64::INFINITY,
                Err(StabilityError::Eigen(_)) => f64::NAN,
            }
        })
        .collect();
    Raster { re, im, rho }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{to_compact, GlmTableau};
    use proptest::prelude::*;

    fn one_step(a: f64, b: f64) -> CompactGlm<f64> {
        // theta-method: y = u + h a F(y), u' = u + h b F(y)
        to_compact(&GlmTableau::from_rows("m", &[vec![a]], &[], &[vec![1.0]], &[1.0], &[b], &[]).unwrap())
            .unwrap()
    }

    fn ie() -> CompactGlm<f64> {
        one_step(1.0, 1.0)
    }

    fn ie_pre2() -> CompactGlm<f64> {
        to_compact(
            &GlmTableau::from_rows(
                "IE-Pre-2",
                &[vec![1.0]],
                &[vec![0.0, 0.0]],
                &[vec![-0.5, 1.0, 0.5]],
                &[-0.5, 1.0, 0.5],
                &[1.0],
                &[0.0, 0.0],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn bdf2() -> CompactGlm<f64> {
        to_compact(
            &GlmTableau::from_rows(
                "BDF2",
                &[vec![2.0 / 3.0]],
                &[vec![0.0]],
                &[vec![-1.0 / 3.0, 4.0 / 3.0]],
                &[-1.0 / 3.0, 4.0 / 3.0],
                &[2.0 / 3.0],
                &[0.0],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn explicit_euler() -> CompactGlm<f64> {
        to_compact(&GlmTableau::from_rows("EE", &[vec![0.0]], &[], &[vec![1.0]], &[1.0], &[1.0], &[]).unwrap())
            .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ie_pre2_bottom_row() {
        for z in [c(-1.0, 0.0), c(-3.0, 2.0), c(0.5, -0.25)] {
            let m = evolution_matrix(&ie_pre2(), z).unwrap();
            let f = 1.0 / (1.0 - z);
            let expect = [-0.5 * f, f, 0.5 * f];
            for j in 0..3 {
                assert!((m[(2, j)] - expect[j]).norm() < 1e-14);
            }
            assert_eq!(m[(0, 1)], c(1.0, 0.0));
            assert_eq!(m[(1, 2)], c(1.0, 0.0));
        }
    }

    #[test]
    fn phi_at_zero_is_theta() {
        let m = evolution_matrix(&bdf2(), c(0.0, 0.0)).unwrap();
        assert_eq!(m[(1, 0)], c(-1.0 / 3.0, 0.0));
        assert_eq!(m[(1, 1)], c(4.0 / 3.0, 0.0));
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ie_at_minus_one() {
        let m = evolution_matrix(&ie(), c(-1.0, 0.0)).unwrap();
        assert_eq!(m[(0, 0)], c(0.5, 0.0));
    }

    #[test]
    fn pole_reported() {
        assert_eq!(
            evolution_matrix(&ie(), c(1.0, 0.0)).unwrap_err(),
            StabilityError::Pole { re: 1.0, im: 0.0 }
        );
    }

    #[test]
    fn nilpotent_radius() {
        let m = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(spectral_radius(&m).unwrap() < 1e-12);
    }

    #[test]
    fn ie_pre2_decays_at_large_z() {
        // lambda^3 = f/2 lambda^2 + f lambda - f/2 with f = 1/(1 - z): the
        // roots shrink like (f/2)^(1/3), not like f.
        let op = EvolutionOperator::new(&ie_pre2());
        for m in L_PROBES {
            let rho = op.spectral_radius(c(-m, 0.0)).unwrap();
            let expect = (0.5 / (1.0 + m)).cbrt();
            assert!((rho / expect - 1.0).abs() < 1e-2, "{rho} vs {expect}");
        }
        let probes = l_probe_radii(&op).unwrap();
        assert!(probes_decay(&probes));
        assert!(probes_decay(&[2e-12, 0.0, 2e-16]));
        assert!(!probes_decay(&[0.5, 0.5, 0.5]));
        assert!(!probes_decay(&[1e-3, 1e-5, 1e-3]));
    }

    #[test]
    fn root_condition_examples() {
        assert!(satisfies_root_condition(&ie(), c(-1.0, 0.0), 1e-8).unwrap());
        assert!(satisfies_root_condition(&bdf2(), c(0.0, 0.0), 1e-8).unwrap());
        assert!(!satisfies_root_condition(&explicit_euler(), c(-3.0, 0.0), 1e-8).unwrap());
    }

    #[test]
    fn repeated_unit_root_fails() {
        let one = c(1.0, 0.0);
        assert!(!roots_satisfy_condition(&[one, one + c(1e-9, 0.0)], 1e-8));
        assert!(roots_satisfy_condition(&[one, c(-1.0, 0.0)], 1e-8));
        assert!(roots_satisfy_condition(&[c(0.5, 0.0), c(0.5, 0.0)], 1e-8));
    }

    #[test]
    fn ie_is_a_and_l_stable() {
        let a = a_alpha_angle(&ie(), &ScanConfig::default()).unwrap();
        assert!(a.a_stable);
        assert!((a.alpha_deg.unwrap() - 90.0).abs() <= 0.05);
        assert!(is_l_stable(&ie()).unwrap());
        // trapezoidal rule: A-stable, |R| -> 1
        assert!(!is_l_stable(&one_step(0.5, 1.0)).unwrap());
    }

    #[test]
    fn explicit_euler_angle_absent() {
        let a = a_alpha_angle(&explicit_euler(), &ScanConfig::default()).unwrap();
        assert_eq!(a.alpha_deg, None);
        assert!(!a.a_stable);
    }

    #[test]
    fn axis_radii() {
        assert_eq!(axis_radius(&ie(), Axis::NegativeReal, 1e4), 1e4);
        let r = axis_radius(&explicit_euler(), Axis::NegativeReal, 1e4);
        assert!((r - 2.0).abs() < 1e-6, "{r}");
        let r = axis_radius(&explicit_euler(), Axis::Imaginary, 1e4);
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn raster_values() {
        let w = Window {
            re_min: -3.0,
            re_max: 1.0,
            im_min: -2.0,
            im_max: 2.0,
        };
        let r = region_raster(&ie(), w, 5, 5);
        // z = -1 at i = 2, j = 2
        assert!((r.at(2, 2) - 0.5).abs() < 1e-14);
        // z = 1 is the pole
        assert!(r.at(4, 2).is_infinite());
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("re,im,rho\n"));
        assert_eq!(text.lines().count(), 26);
    }

    #[test]
    fn scalar_methods_match_stability_function() {
        for (a, b) in [(1.0, 1.0), (0.5, 1.0)] {
            let op = EvolutionOperator::new(&one_step(a, b));
            for z in [c(-0.3, 0.7), c(-5.0, -1.0), c(0.2, 0.1)] {
                let phi = 1.0 + z * b / (1.0 - a * z);
                assert!((op.spectral_radius(z).unwrap() - phi.norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn alpha_formula() {
        assert_eq!(alpha_from_r(0.0), 0.0);
        assert!((alpha_from_r(50.0) - 89.982).abs() < 1e-3);
        assert!((wedge_angle(0.0) - std::f64::consts::PI).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(re in -20.0f64..0.9, im in -20.0f64..20.0) {
            let op = EvolutionOperator::new(&bdf2());
            let a = op.spectral_radius(c(re, im)).unwrap();
            let b = op.spectral_radius(c(re, -im)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
