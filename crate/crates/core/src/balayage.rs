//! Integrals against the balayage measure on the curve, the uniform measure
//! on its interior and the semicircle law, plus the equilibrium-energy check.

use crate::curve::{ContourGrid, PolynomialCurve};
use crate::error::{Error, Result};
use crate::inversion::{deform, DeformationSchedule, Trajectory};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Highest polynomial degree accepted for test functions.
pub const MAX_TEST_DEGREE: usize = 12;

/// Gauss-Chebyshev nodes used for the semicircle law.
pub const SEMICIRCLE_NODES: usize = 16;

/// Accepted samples per Monte Carlo work unit; fixes the substream layout.
const CHUNK: usize = 1 << 14;

/// Polyline resolution for Monte Carlo membership.
const SAMPLING_NODES: usize = 4096;

/// A polynomial test function `f(z) = sum c_k z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    coeffs: Vec<Complex64>,
}

impl TestFunction {
    pub fn monomial(k: usize) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = Complex64::new(1.0, 0.0);
        Self::polynomial(coeffs)
    }

    /// Ascending coefficients `c_0, c_1, ...`.
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Validation("test function needs at least one coefficient".into()));
        }
        if coeffs.len() > MAX_TEST_DEGREE + 1 {
            return Err(Error::Validation(format!(
                "test function degree {} exceeds {MAX_TEST_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("test function coefficients must be finite".into()));
        }
        Ok(TestFunction { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
}

/// `(1/(2 pi i t_0)) \oint_gamma f(z) S(z) dz`, by the trapezoid rule on `|w| = 1`.
///
/// The integrand is a Laurent polynomial, so the rule is exact once the grid
/// has more than `(deg f + 1) n + 1` nodes.
pub fn balayage_integral(curve: &PolynomialCurve, f: &TestFunction, grid: &ContourGrid) -> Result<Complex64> {
    curve.require_certified()?;
    let t0 = curve.area_t0();
    if t0 <= 0.0 {
        return Err(Error::Domain(format!("t0 = {t0} is not positive")));
    }
    let n = curve.degree();
    let required = (f.degree() + 1) * n + 2;
    if grid.len() < required {
        return Err(Error::GridTooSmall {
            nodes: grid.len(),
            degree: n,
            required,
        });
    }
    Ok(contour_mean(curve, grid, |z| f.eval(z)) / t0)
}

/// `(1/m) sum g(h(w)) conj(h)(1/w) h'(w) w`, i.e. `(1/(2 pi i)) \oint g S dz`.
fn contour_mean(curve: &PolynomialCurve, grid: &ContourGrid, g: impl Fn(Complex64) -> Complex64) -> Complex64 {
    let sum: Complex64 = grid
        .nodes()
        .iter()
        .map(|&w| g(curve.h(w)) * curve.reflected(w) * curve.dh(w) * w)
        .sum();
    sum / grid.len() as f64
}

/// A grid on which [`balayage_integral`] is exact for `f`.
pub fn balayage_grid(curve: &PolynomialCurve, f: &TestFunction) -> ContourGrid {
    let n = curve.degree();
    let required = ((f.degree() + 1) * n + 2).max(4 * (n + 2)).max(64);
    ContourGrid::new(required.next_power_of_two()).expect("power of two")
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaEstimate {
    pub value: Complex64,
    pub std_error: f64,
    pub samples: usize,
}

/// `(1/(pi t_0)) \int_D f d^2z` for each `f`, from `n_samples` points drawn
/// uniformly in the interior by rejection from the bounding box.
///
/// Work is split into fixed chunks with one ChaCha substream each, so the
/// result is bit-identical for a given seed whatever the thread count.
pub fn area_integrals(
    curve: &PolynomialCurve,
    fs: &[TestFunction],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<AreaEstimate>> {
    curve.require_certified()?;
    if n_samples < 2 {
        return Err(Error::Validation("at least two samples are needed".into()));
    }
    let grid = ContourGrid::new(SAMPLING_NODES.max(ContourGrid::for_geometry(curve.degree()).len()))?;
    let polyline = curve.polyline(&grid);
    let pts = polyline.points();
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.re), b.max(p.re)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.im), b.max(p.im)));

    let chunks = n_samples.div_ceil(CHUNK);
    // per chunk and per f: (sum, sum of |.|^2 split into re/im)
    let partial: Vec<Vec<(Complex64, f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let quota = CHUNK.min(n_samples - chunk * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut acc = vec![(Complex64::new(0.0, 0.0), 0.0, 0.0); fs.len()];
            let mut accepted = 0;
            while accepted < quota {
                let z = Complex64::new(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
                if !matches!(polyline.winding_number(z), Ok(1)) {
                    continue;
                }
                accepted += 1;
                for (slot, f) in acc.iter_mut().zip(fs) {
                    let v = f.eval(z);
                    slot.0 += v;
                    slot.1 += v.re * v.re;
                    slot.2 += v.im * v.im;
                }
            }
            acc
        })
        .collect();

    let n = n_samples as f64;
    Ok((0..fs.len())
        .map(|i| {
            let (mut sum, mut sq_re, mut sq_im) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
            for chunk in &partial {
                sum += chunk[i].0;
                sq_re += chunk[i].1;
                sq_im += chunk[i].2;
            }
            let mean = sum / n;
            let var_re = ((sq_re - n * mean.re * mean.re) / (n - 1.0)).max(0.0);
            let var_im = ((sq_im - n * mean.im * mean.im) / (n - 1.0)).max(0.0);
            AreaEstimate {
                value: mean,
                std_error: ((var_re + var_im) / n).sqrt(),
                samples: n_samples,
            }
        })
        .collect())
}

pub fn area_integral(curve: &PolynomialCurve, f: &TestFunction, n_samples: usize, seed: u64) -> Result<AreaEstimate> {
    Ok(area_integrals(curve, std::slice::from_ref(f), n_samples, seed)?[0])
}

/// `\int f d mu_W` for the semicircle law on `[-2 sigma, 2 sigma]`, by
/// second-kind Gauss-Chebyshev quadrature (exact up to degree 31).
///
/// Complex coefficients give complex values, hence the complex result.
pub fn semicircle_integral(f: &TestFunction, sigma: f64) -> Result<Complex64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Validation(format!("sigma must be positive, got {sigma}")));
    }
    let n = SEMICIRCLE_NODES;
    let h = PI / (n + 1) as f64;
    let sum: Complex64 = (1..=n)
        .map(|i| {
            let theta = i as f64 * h;
            let weight = h * theta.sin().powi(2);
            f.eval(Complex64::new(2.0 * sigma * theta.cos(), 0.0)) * weight
        })
        .sum();
    Ok(sum * (2.0 / PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub s: f64,
    pub value: Complex64,
    pub semicircle: Complex64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// Errors never grow by more than a relative `1e-6` plus `1e-12` between steps.
    pub decreasing: bool,
}

/// Balayage integrals of `f` along the deformation against the semicircle
/// law of radius `2r`.
pub fn deformation_convergence(
    schedule: &DeformationSchedule,
    f: &TestFunction,
    s_values: &[f64],
) -> Result<ConvergenceReport> {
    if !schedule.all_delta_above_one() {
        return Err(Error::Validation("convergence needs every exponent Delta_j > 1".into()));
    }
    convergence_along(&deform(schedule, s_values)?, f)
}

/// [`deformation_convergence`] for an already computed trajectory.
pub fn convergence_along(trajectory: &Trajectory, f: &TestFunction) -> Result<ConvergenceReport> {
    let semicircle = semicircle_integral(f, trajectory.schedule.r())?;
    let points = trajectory
        .steps
        .iter()
        .map(|step| {
            let value = balayage_integral(&step.curve, f, &balayage_grid(&step.curve, f))?;
            Ok(ConvergencePoint {
                s: step.s,
                value,
                semicircle,
                error: (value - semicircle).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = points
        .windows(2)
        .all(|p| p[1].error <= p[0].error * (1.0 + 1e-6) + 1e-12);
    Ok(ConvergenceReport { points, decreasing })
}

/// Laurent coefficients of `conj(h)(1/z) h'(z)`, indexed by power `p` at
/// `offset + p` with `offset = n + 2`.
fn energy_integrand(curve: &PolynomialCurve) -> (Vec<Complex64>, usize) {
    let n = curve.degree();
    let offset = n + 2;
    let mut c = vec![Complex64::new(0.0, 0.0); 2 * n + 3];
    let r = curve.r();
    let a = curve.coefficients();
    // conj(h)(1/z) = r z^{-1} + sum conj(a_l) z^l
    let mut left = vec![(-1i64, Complex64::new(r, 0.0))];
    left.extend(a.iter().enumerate().map(|(l, al)| (l as i64, al.conj())));
    // h'(z) = r - sum j a_j z^{-j-1}
    let mut right = vec![(0i64, Complex64::new(r, 0.0))];
    right.extend(a.iter().enumerate().skip(1).map(|(j, aj)| (-(j as i64) - 1, -aj * j as f64)));
    for &(p, x) in &left {
        for &(q, y) in &right {
            c[(offset as i64 + p + q) as usize] += x * y;
        }
    }
    (c, offset)
}

/// `(1/t_0)(|h(w)|^2 - |h(1)|^2 - 2 Re \int_1^w conj(h)(1/z) h'(z) dz)`.
///
/// The `z^{-1}` coefficient of the integrand is `t_0`, contributing
/// `2 t_0 log|w|`; every other power integrates to a monomial.
pub fn equilibrium_energy(curve: &PolynomialCurve, w: Complex64) -> f64 {
    let t0 = curve.area_t0();
    let (c, offset) = energy_integrand(curve);
    let mut integral = Complex64::new(0.0, 0.0);
    for (idx, coeff) in c.iter().enumerate() {
        let p = idx as i32 - offset as i32;
        if p == -1 {
            continue;
        }
        let k = (p + 1) as f64;
        integral += coeff * (w.powi(p + 1) - 1.0) / k;
    }
    let log_part = 2.0 * c[offset - 1].re * w.norm().ln();
    let one = curve.h(Complex64::new(1.0, 0.0));
    (curve.h(w).norm_sqr() - one.norm_sqr() - 2.0 * integral.re - log_part) / t0
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCertificate {
    pub min_value: f64,
    pub min_location: Complex64,
    /// Largest `|E|` on `|w| = 1`.
    pub boundary_max: f64,
    pub sigma_radius: f64,
    pub w_max: f64,
    pub radii: usize,
    pub angles: usize,
    pub passes: bool,
}

/// Radial samples of the certificate grid.
pub const CERTIFICATE_RADII: usize = 64;

/// Lowest certified value of the energy.
pub const CERTIFICATE_FLOOR: f64 = -1e-8;

/// `3 max(2r, max|h|)`: the confining disk radius.
pub fn sigma_radius(curve: &PolynomialCurve) -> f64 {
    let reach = curve.max_modulus(&ContourGrid::for_geometry(curve.degree()));
    3.0 * (2.0 * curve.r()).max(reach)
}

/// Evaluates the energy on `CERTIFICATE_RADII` log-spaced radii from 1 to
/// the preimage bound of the confining disk (plus 0.5), at the grid's angles.
/// Points whose image leaves the disk are skipped.
pub fn equilibrium_certificate(curve: &PolynomialCurve, grid: &ContourGrid) -> Result<EquilibriumCertificate> {
    curve.require_certified()?;
    equilibrium_certificate_within(curve, grid, sigma_radius(curve))
}

/// [`equilibrium_certificate`] for a caller-chosen confining radius.
pub fn equilibrium_certificate_within(
    curve: &PolynomialCurve,
    grid: &ContourGrid,
    sigma: f64,
) -> Result<EquilibriumCertificate> {
    curve.require_certified()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Validation(format!("confining radius must be positive, got {sigma}")));
    }
    let tail: f64 = curve.coefficients().iter().map(|a| a.norm()).sum();
    let w_max = (sigma + tail) / curve.r() + 0.5;
    let mut min_value = f64::INFINITY;
    let mut min_location = Complex64::new(1.0, 0.0);
    let mut boundary_max: f64 = 0.0;
    for i in 0..CERTIFICATE_RADII {
        let rho = w_max.powf(i as f64 / (CERTIFICATE_RADII - 1) as f64);
        for &u in grid.nodes() {
            let w = u * rho;
            let e = equilibrium_energy(curve, w);
            if i == 0 {
                boundary_max = boundary_max.max(e.abs());
            } else if curve.h(w).norm() > sigma {
                continue;
            }
            if e < min_value {
                min_value = e;
                min_location = w;
            }
        }
    }
    Ok(EquilibriumCertificate {
        min_value,
        min_location,
        boundary_max,
        sigma_radius: sigma,
        w_max,
        radii: CERTIFICATE_RADII,
        angles: grid.len(),
        passes: min_value >= CERTIFICATE_FLOOR,
    })
}
