//! Inversion of the moment map `(r, a) -> (t_0, t)`, in the regular regime
//! `|t_2| < 1/2` and along deformation schedules that approach the slit
//! `|t_2| -> 1/2`.

use crate::curve::PolynomialCurve;
use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::moments::{exact_moments, exact_t0, forward_moments, HarmonicMoments};
use crate::solve::{brent, damped_newton, NewtonOptions};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `|t_2|` above which a deformation step counts as near-slit.
pub const REGIME_SWITCH: f64 = 0.45;

/// `invert_regular` refuses `|t_2|` within this distance of `1/2`.
pub const REGULAR_MARGIN: f64 = 1e-3;

/// Largest `| |k| - 1 |` treated as singular by [`solve_block_system`].
pub const NEAR_SINGULAR: f64 = 1e-10;

/// Largest `|t_1|` accepted as centered.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

const MAX_CONTINUATION_DEPTH: usize = 24;

/// `J^{-1} phi - K conj(phi) = v` with `J = diag(1..n+1)` and `K` zero
/// outside its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    k_column: Vec<Complex64>,
    v: Vec<Complex64>,
}

impl BlockSystem {
    /// `k_column[i - 1] = K_{i1}`; `k = K_{11}`.
    pub fn new(k_column: Vec<Complex64>, v: Vec<Complex64>) -> Result<Self> {
        if k_column.is_empty() || k_column.len() != v.len() {
            return Err(Error::Validation(format!(
                "block system needs matching non-empty K column and v (got {} and {})",
                k_column.len(),
                v.len()
            )));
        }
        if k_column.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::Validation("block system entries must be finite".into()));
        }
        Ok(BlockSystem { k_column, v })
    }

    /// The linearized system at `rho = 0` for moments `t_1..t_{n+1}`:
    /// `K_{i1} = conj((i+1) t_{i+1})`, `v_i = 2 (1 + 1/i)(i+2) t_2 conj(t_{i+2})`.
    pub fn from_moments(t: &[Complex64]) -> Result<Self> {
        let get = |j: usize| t.get(j - 1).copied().unwrap_or_default();
        let size = t.len();
        let t2 = get(2);
        let k_column = (1..=size).map(|i| (get(i + 1) * (i + 1) as f64).conj()).collect();
        let v = (1..=size)
            .map(|i| {
                let fi = i as f64;
                2.0 * (1.0 + 1.0 / fi) * (fi + 2.0) * t2 * get(i + 2).conj()
            })
            .collect();
        Self::new(k_column, v)
    }

    pub fn k(&self) -> Complex64 {
        self.k_column[0]
    }

    pub fn k_column(&self) -> &[Complex64] {
        &self.k_column
    }

    pub fn v(&self) -> &[Complex64] {
        &self.v
    }

    pub fn size(&self) -> usize {
        self.v.len()
    }

    /// Largest entry of `J^{-1} phi - K conj(phi) - v`.
    pub fn residual(&self, phi: &[Complex64]) -> f64 {
        let phi1 = phi[0].conj();
        (0..self.size())
            .map(|i| (phi[i] / (i + 1) as f64 - self.k_column[i] * phi1 - self.v[i]).norm())
            .fold(0.0, f64::max)
    }
}

/// `phi = T v + B conj(v)` with `B = J K / (1 - |k|^2)` and `T = J + conj(k) B`.
pub fn solve_block_system(sys: &BlockSystem) -> Result<Vec<Complex64>> {
    let k = sys.k();
    if (k.norm() - 1.0).abs() < NEAR_SINGULAR {
        return Err(Error::NearSingular { modulus: k.norm() });
    }
    let scale = 1.0 / (1.0 - k.norm_sqr());
    let v1 = sys.v[0];
    let mix = k.conj() * v1 + v1.conj();
    Ok((0..sys.size())
        .map(|i| {
            let j = (i + 1) as f64;
            j * sys.v[i] + j * sys.k_column[i] * scale * mix
        })
        .collect())
}

fn complex(re: &Dual, im: &Dual) -> Dual {
    re.clone() + im.clone() * Dual::constant(Complex64::i())
}

fn unpack(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn pack(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// `a_j = alpha_j r^j`.
fn unscale(r: &Dual, alpha: &[Dual]) -> Vec<Dual> {
    let mut pow = Dual::real(1.0);
    alpha
        .iter()
        .map(|al| {
            let a = al.clone() * pow.clone();
            pow = pow.clone() * r.clone();
            a
        })
        .collect()
}

/// Pushes `t_j(r, a) - target_j` as real and imaginary parts.
fn moment_residuals(out: &mut Vec<Dual>, r: &Dual, a: &[Dual], target: &[Complex64]) {
    for (tj, goal) in exact_moments(r, a).into_iter().zip(target) {
        let d = tj - Dual::constant(*goal);
        out.push(d.re());
        out.push(d.im());
    }
}

/// `alpha* + rho phi`, the first-order inverse in the scaled variables.
fn block_seed(t: &[Complex64], rho: f64) -> Result<Vec<Complex64>> {
    let phi = solve_block_system(&BlockSystem::from_moments(t)?)?;
    Ok((0..t.len())
        .map(|j| {
            let next = t.get(j).copied().unwrap_or_default();
            (j + 1) as f64 * next.conj() + rho * phi[j]
        })
        .collect())
}

fn check_centered(m: &HarmonicMoments) -> Result<()> {
    let t1 = m.get(1).norm();
    if t1 > CENTERING_TOLERANCE {
        return Err(Error::Validation(format!("t1 must vanish, got |t1| = {t1:.3e}")));
    }
    Ok(())
}

fn certify(curve: PolynomialCurve, s: Option<f64>) -> Result<PolynomialCurve> {
    let xi = curve.simplicity_margin();
    if xi > 0.0 && curve.area_t0() > 0.0 {
        Ok(curve)
    } else {
        Err(Error::Breakdown { s, xi })
    }
}

/// Recovers the curve from moments with `t_1 = 0` and `|t_2| < 1/2`.
///
/// Newton on `(rho, alpha_0..alpha_n)` starts from `rho* = t0 / (1 - 4|t_2|^2)`
/// and `alpha*_j + rho* phi_j`, where `alpha*_j = (j+1) conj(t_{j+1})` and `phi`
/// solves the linearized block system.
pub fn invert_regular(m: &HarmonicMoments) -> Result<PolynomialCurve> {
    check_centered(m)?;
    let t2 = m.get(2).norm();
    if t2 >= 0.5 - REGULAR_MARGIN {
        return Err(Error::OutOfRegime(format!(
            "|t2| = {t2} is not below 1/2 - {REGULAR_MARGIN}"
        )));
    }
    let rho0 = m.t0 / (1.0 - 4.0 * t2 * t2);
    let mut x0 = vec![rho0];
    x0.extend(pack(&block_seed(&m.t, rho0)?));

    let target = m.t.clone();
    let t0 = m.t0;
    let sol = damped_newton(
        &x0,
        |x| {
            if x[0].v.re <= 0.0 {
                return None;
            }
            let r = x[0].sqrt();
            let alpha: Vec<Dual> = x[1..].chunks(2).map(|p| complex(&p[0], &p[1])).collect();
            let a = unscale(&r, &alpha);
            let mut out = vec![(exact_t0(&r, &a) - Dual::real(t0)).re()];
            moment_residuals(&mut out, &r, &a, &target);
            Some(out)
        },
        NewtonOptions {
            tolerance: 1e-12 * (1.0 + t0),
            ..NewtonOptions::default()
        },
    )?;
    certify(PolynomialCurve::from_scaled(sol[0], &unpack(&sol[1..]))?, None)
}

/// Solves `t_j(r, alpha) = t_j` for the scaled coefficients at fixed `r`.
fn solve_fixed_radius(r: f64, t: &[Complex64], start: &[Complex64]) -> Result<Vec<Complex64>> {
    let target = t.to_vec();
    let sol = damped_newton(
        &pack(start),
        |x| {
            let r = Dual::real(r);
            let alpha: Vec<Dual> = x.chunks(2).map(|p| complex(&p[0], &p[1])).collect();
            let a = unscale(&r, &alpha);
            let mut out = Vec::with_capacity(x.len());
            moment_residuals(&mut out, &r, &a, &target);
            Some(out)
        },
        NewtonOptions {
            tolerance: 1e-13,
            ..NewtonOptions::default()
        },
    )?;
    Ok(unpack(&sol))
}

/// The two radii bounding admissible schedules; `r_0 = min(r_hat, r_bar)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleRadius {
    pub r_hat: f64,
    /// `f64::INFINITY` when no `tau_j` with `j >= 3` is non-zero.
    pub r_bar: f64,
}

impl AdmissibleRadius {
    pub fn r0(&self) -> f64 {
        self.r_hat.min(self.r_bar)
    }
}

/// `r_hat` solves `2 sum_{j=1..n} j (j+1)^2 |tau_{j+1}|^2 r^{2j} = 1` and
/// `r_bar` solves `r/2 = sum_{j=2..n} j (j+1) r^j |tau_{j+1}|`.
pub fn admissible_radius(tau: &[Complex64]) -> Result<AdmissibleRadius> {
    if tau.len() < 2 || ((tau[1].norm() - 1.0).abs() >= 1e-14) {
        return Err(Error::Validation("admissible radius needs |tau_2| = 1".into()));
    }
    let n = tau.len() - 1;
    let size = |j: usize| tau[j].norm();

    let hat = |r: f64| {
        2.0 * (1..=n)
            .map(|j| (j * (j + 1) * (j + 1)) as f64 * size(j).powi(2) * r.powi(2 * j as i32))
            .sum::<f64>()
            - 1.0
    };
    // the j = 1 term alone reaches 1 at r = 1/(2 sqrt 2) < 0.36
    let r_hat = brent(|r| Ok(hat(r)), 0.0, 0.36, 1e-16, 200)?;

    let bar = |r: f64| {
        (2..=n)
            .map(|j| (j * (j + 1)) as f64 * size(j) * r.powi(j as i32 - 1))
            .sum::<f64>()
            - 0.5
    };
    let r_bar = if (2..=n).all(|j| size(j) == 0.0) {
        f64::INFINITY
    } else {
        let mut hi = 1.0;
        while bar(hi) < 0.0 {
            hi *= 2.0;
        }
        brent(|r| Ok(bar(r)), 0.0, hi, 1e-16, 200)?
    };
    Ok(AdmissibleRadius { r_hat, r_bar })
}

/// `s -> t(s)` with `t_2 = (sqrt(1-s)/2) e^{i s^{Delta_2} phi}` and
/// `t_j = s^{Delta_j} tau_j` for `j >= 3`, at fixed leading radius `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationSchedule {
    r: f64,
    phi: f64,
    tau: Vec<Complex64>,
    delta: Vec<f64>,
}

impl DeformationSchedule {
    /// `tau` holds `tau_1..tau_{n+1}`, `delta` holds `Delta_2..Delta_{n+1}`.
    pub fn new(r: f64, phi: f64, tau: Vec<Complex64>, delta: Vec<f64>) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Validation(format!("schedule radius must be positive, got {r}")));
        }
        if !phi.is_finite() {
            return Err(Error::Validation("phi must be finite".into()));
        }
        if tau.len() < 2 {
            return Err(Error::Validation("tau needs at least tau_1 and tau_2".into()));
        }
        if tau[0] != Complex64::new(0.0, 0.0) {
            return Err(Error::Validation("tau_1 must be exactly 0".into()));
        }
        if (tau[1].norm() - 1.0).abs() >= 1e-14 {
            return Err(Error::Validation(format!("|tau_2| must be 1, got {}", tau[1].norm())));
        }
        if tau.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("tau must be finite".into()));
        }
        if delta.len() != tau.len() - 1 {
            return Err(Error::Validation(format!(
                "expected {} exponents Delta_2..Delta_{}, got {}",
                tau.len() - 1,
                tau.len(),
                delta.len()
            )));
        }
        if delta.iter().any(|d| !(d.is_finite() && *d >= 1.0)) {
            return Err(Error::Validation("every Delta_j must be >= 1".into()));
        }
        Ok(DeformationSchedule {
            r,
            phi: phi.rem_euclid(2.0 * PI),
            tau,
            delta,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn tau(&self) -> &[Complex64] {
        &self.tau
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn degree(&self) -> usize {
        self.tau.len() - 1
    }

    pub fn admissible_radius(&self) -> Result<AdmissibleRadius> {
        admissible_radius(&self.tau)
    }

    /// Whether `r < r_0(tau)`. Schedules outside this bound are still run;
    /// every produced curve is re-certified.
    pub fn is_admissible(&self) -> bool {
        self.admissible_radius().is_ok_and(|a| self.r < a.r0())
    }

    /// Every `Delta_j > 1` for `j >= 3`, and also `Delta_2 > 1` unless the
    /// phase `phi` is zero (then `Delta_2` has no effect).
    pub fn all_delta_above_one(&self) -> bool {
        self.delta[1..].iter().all(|&d| d > 1.0) && (self.phi == 0.0 || self.delta[0] > 1.0)
    }
}

/// `t_1..t_{n+1}` at parameter `s`; `t_0` is an output of the inversion.
pub fn schedule_moments(schedule: &DeformationSchedule, s: f64) -> Result<Vec<Complex64>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    let mut t = vec![Complex64::new(0.0, 0.0); schedule.tau.len()];
    t[1] = Complex64::from_polar((1.0 - s).sqrt() / 2.0, s.powf(schedule.delta[0]) * schedule.phi);
    for j in 3..=schedule.tau.len() {
        t[j - 1] = schedule.tau[j - 1] * s.powf(schedule.delta[j - 2]);
    }
    Ok(t)
}

/// Fixed-`r` solutions along a schedule, continued in `s`.
struct Tracker<'a> {
    schedule: &'a DeformationSchedule,
    solved: Vec<(f64, Vec<Complex64>)>,
}

impl<'a> Tracker<'a> {
    fn new(schedule: &'a DeformationSchedule) -> Self {
        Tracker {
            schedule,
            solved: Vec::new(),
        }
    }

    fn rho(&self) -> f64 {
        self.schedule.r * self.schedule.r
    }

    fn nearest(&self, s: f64) -> Option<(f64, Vec<Complex64>)> {
        self.solved
            .iter()
            .min_by(|x, y| (x.0 - s).abs().total_cmp(&(y.0 - s).abs()))
            .cloned()
    }

    fn alpha_at(&mut self, s: f64) -> Result<Vec<Complex64>> {
        if let Some((s0, alpha)) = self.nearest(s) {
            if s0 == s {
                return Ok(alpha);
            }
        }
        let alpha = match self.nearest(s) {
            Some((s0, start)) => self.continue_from(s0, start, s, 0)?,
            None => self.cold_start(s)?,
        };
        self.solved.push((s, alpha.clone()));
        Ok(alpha)
    }

    fn cold_start(&mut self, s: f64) -> Result<Vec<Complex64>> {
        let t = schedule_moments(self.schedule, s)?;
        let seeded = block_seed(&t, self.rho()).and_then(|seed| solve_fixed_radius(self.schedule.r, &t, &seed));
        match seeded {
            Ok(alpha) => Ok(alpha),
            Err(_) if s < 1.0 => {
                let start = self.cold_start(1.0)?;
                self.solved.push((1.0, start.clone()));
                self.continue_from(1.0, start, s, 0)
            }
            Err(e) => Err(e),
        }
    }

    fn continue_from(&mut self, s0: f64, start: Vec<Complex64>, s: f64, depth: usize) -> Result<Vec<Complex64>> {
        let t = schedule_moments(self.schedule, s)?;
        let first = solve_fixed_radius(self.schedule.r, &t, &start);
        match first {
            Ok(alpha) => Ok(alpha),
            Err(e) if depth >= MAX_CONTINUATION_DEPTH => Err(e),
            Err(_) => {
                let mid = 0.5 * (s0 + s);
                let halfway = self.continue_from(s0, start, mid, depth + 1)?;
                self.continue_from(mid, halfway, s, depth + 1)
            }
        }
    }

    fn curve_at(&mut self, s: f64) -> Result<PolynomialCurve> {
        let alpha = self.alpha_at(s)?;
        PolynomialCurve::from_scaled(self.rho(), &alpha)
    }
}

/// Recovers the curve of `schedule` whose area matches `m.t0`.
///
/// The parameter `s = 1 - 4 lambda` is found by a bracketed root search on
/// `t_0(s) - m.t0`, each evaluation being a fixed-`r` inversion continued from
/// previously solved parameters. Only `m.t0` and the degree of `m` are used;
/// the remaining moments follow from the schedule.
pub fn invert_near_slit(m: &HarmonicMoments, schedule: &DeformationSchedule) -> Result<PolynomialCurve> {
    if m.degree() != schedule.degree() {
        return Err(Error::Validation(format!(
            "moments of degree {} do not match a schedule of degree {}",
            m.degree(),
            schedule.degree()
        )));
    }
    let target = m.t0;
    let mut tracker = Tracker::new(schedule);
    let mut area = |s: f64| -> Result<f64> { Ok(tracker.curve_at(s)?.area_t0() - target) };

    let top = area(1.0)?;
    if top < 0.0 {
        return Err(Error::OutOfRegime(format!(
            "t0 = {target} exceeds the schedule's largest area {} (lambda < 0)",
            top + target
        )));
    }
    let (mut hi, mut lo) = (1.0, 0.5);
    let mut found = top == 0.0;
    while !found {
        let value = area(lo)?;
        if value <= 0.0 {
            found = true;
        } else {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-15 {
                return Err(Error::OutOfRegime(format!(
                    "t0 = {target} is below the schedule's reach (lambda -> 1/4)"
                )));
            }
        }
    }
    let s = if top == 0.0 { 1.0 } else { brent(&mut area, lo, hi, 1e-16, 200)? };
    let curve = tracker.curve_at(s)?;
    certify(curve, Some(s))
}

/// Which solver regime a deformation step belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Regular,
    NearSlit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformStep {
    pub s: f64,
    pub regime: Regime,
    pub curve: PolynomialCurve,
    pub moments: HarmonicMoments,
}

/// Scaled defects `|alpha_0|/s`, `|alpha_1 - (1 - s/2)|/s` and
/// `max_{j>=2} |alpha_j|/s` at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticsRow {
    pub s: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha_rest: f64,
}

/// Evidence for `alpha_0 = o(s)`, `alpha_1 = 1 - s/2 + o(s)` and
/// `alpha_j = o(s)`: each flag says whether the scaled defect did not grow
/// between the two smallest `s` values (defects below `1e-12` count as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub rows: Vec<AsymptoticsRow>,
    pub alpha0_decays: bool,
    pub alpha1_decays: bool,
    pub alpha_rest_decays: bool,
}

impl AsymptoticsReport {
    fn from_steps(steps: &[DeformStep]) -> Self {
        let rows: Vec<AsymptoticsRow> = steps
            .iter()
            .map(|step| {
                let alpha = step.curve.scaled_coefficients();
                let s = step.s;
                AsymptoticsRow {
                    s,
                    alpha0: alpha[0].norm() / s,
                    alpha1: alpha.get(1).map_or(1.0, |a1| (a1 - (1.0 - s / 2.0)).norm()) / s,
                    alpha_rest: alpha.iter().skip(2).map(|a| a.norm()).fold(0.0, f64::max) / s,
                }
            })
            .collect();
        let trend = |f: fn(&AsymptoticsRow) -> f64| match rows.len() {
            0 | 1 => false,
            k => {
                let (prev, last) = (f(&rows[k - 2]), f(&rows[k - 1]));
                last < 1e-12 || last <= prev
            }
        };
        AsymptoticsReport {
            alpha0_decays: trend(|r| r.alpha0),
            alpha1_decays: trend(|r| r.alpha1),
            alpha_rest_decays: trend(|r| r.alpha_rest),
            rows,
        }
    }

    pub fn all_decay(&self) -> bool {
        self.alpha0_decays && self.alpha1_decays && self.alpha_rest_decays
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub schedule: DeformationSchedule,
    pub steps: Vec<DeformStep>,
    /// Present when every effective `Delta_j > 1`.
    pub asymptotics: Option<AsymptoticsReport>,
}

/// Follows the schedule through strictly decreasing `s_values`, certifying
/// `xi > 0` at every step.
///
/// Every step is a fixed-`r` inversion warm-started from the previous one;
/// `t_0` is an output, so the regular solver (which takes `t_0` as input)
/// is not used here. The regime is recorded from `|t_2|`.
pub fn deform(schedule: &DeformationSchedule, s_values: &[f64]) -> Result<Trajectory> {
    if s_values.is_empty() {
        return Err(Error::Validation("no s values given".into()));
    }
    for (i, &s) in s_values.iter().enumerate() {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Validation(format!("s = {s} is outside (0, 1]")));
        }
        if i > 0 && s >= s_values[i - 1] {
            return Err(Error::Validation("s values must be strictly decreasing".into()));
        }
    }
    let mut tracker = Tracker::new(schedule);
    let mut steps = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let curve = certify(tracker.curve_at(s)?, Some(s))?;
        let moments = forward_moments(&curve)?;
        let regime = if moments.get(2).norm() < REGIME_SWITCH {
            Regime::Regular
        } else {
            Regime::NearSlit
        };
        // keep only the latest solution as warm start
        tracker.solved.retain(|(x, _)| *x == s);
        steps.push(DeformStep {
            s,
            regime,
            curve,
            moments,
        });
    }
    let asymptotics = schedule
        .all_delta_above_one()
        .then(|| AsymptoticsReport::from_steps(&steps));
    Ok(Trajectory {
        schedule: schedule.clone(),
        steps,
        asymptotics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Stacked real solve of `phi_i / i - K_i1 conj(phi_1) = v_i`.
    fn dense_solve(sys: &BlockSystem) -> Vec<Complex64> {
        let n = sys.size();
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut b = DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            let inv = 1.0 / (i + 1) as f64;
            let k = sys.k_column()[i];
            a[(2 * i, 2 * i)] += inv;
            a[(2 * i + 1, 2 * i + 1)] += inv;
            // -k conj(phi_1) = -(k.re x - ... ): conj(phi_1) = x - i y
            a[(2 * i, 0)] -= k.re;
            a[(2 * i, 1)] -= k.im;
            a[(2 * i + 1, 0)] -= k.im;
            a[(2 * i + 1, 1)] += k.re;
            b[2 * i] = sys.v()[i].re;
            b[2 * i + 1] = sys.v()[i].im;
        }
        let x = a.lu().solve(&b).unwrap();
        (0..n).map(|i| c(x[2 * i], x[2 * i + 1])).collect()
    }

    #[test]
    fn block_zero_k_gives_jv() {
        let v = vec![c(1.0, 2.0), c(-0.5, 0.1), c(0.3, 0.3)];
        let sys = BlockSystem::new(vec![c(0.0, 0.0); 3], v.clone()).unwrap();
        let phi = solve_block_system(&sys).unwrap();
        for (i, (p, vi)) in phi.iter().zip(&v).enumerate() {
            assert!((p - vi * (i + 1) as f64).norm() < 1e-15);
        }
    }

    #[test]
    fn block_scalar_example() {
        let sys = BlockSystem::new(vec![c(0.5, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let phi = solve_block_system(&sys).unwrap();
        assert!((phi[0] - 2.0).norm() < 1e-15);
        assert_eq!(dense_solve(&sys).len(), 1);
        assert!((dense_solve(&sys)[0] - 2.0).norm() < 1e-14);
    }

    #[test]
    fn block_matches_dense_solve() {
        let sys = BlockSystem::new(
            vec![c(0.3, 0.0), c(0.1, -0.2), c(-0.4, 0.05), c(0.0, 0.0)],
            vec![c(0.2, 0.7), c(-1.0, 0.3), c(0.5, 0.5), c(0.0, -0.2)],
        )
        .unwrap();
        let phi = solve_block_system(&sys).unwrap();
        let dense = dense_solve(&sys);
        for (p, d) in phi.iter().zip(&dense) {
            assert!((p - d).norm() < 1e-12);
        }
        assert!(sys.residual(&phi) < 1e-12);
    }

    #[test]
    fn block_near_singular() {
        let sys = BlockSystem::new(vec![c(0.6, 0.8)], vec![c(1.0, 0.0)]).unwrap();
        assert!(matches!(solve_block_system(&sys), Err(Error::NearSingular { .. })));
    }

    #[test]
    fn regular_inversion_examples() {
        let ellipse = invert_regular(&HarmonicMoments::new(0.75, vec![c(0.0, 0.0), c(0.25, 0.0)]).unwrap()).unwrap();
        assert!((ellipse.r() - 1.0).abs() < 1e-12);
        assert!((ellipse.coefficients()[1] - 0.5).norm() < 1e-12);
        assert!(ellipse.coefficients()[0].norm() < 1e-12);

        let circle = invert_regular(&HarmonicMoments::new(0.3, vec![c(0.0, 0.0)]).unwrap()).unwrap();
        assert!((circle.r() - 0.3f64.sqrt()).abs() < 1e-14);

        let m = HarmonicMoments::new(0.82, vec![c(0.0, 0.0), c(0.0, 0.0), c(0.1, 0.0)]).unwrap();
        let tri = invert_regular(&m).unwrap();
        assert!((tri.r() - 1.0).abs() < 1e-12);
        assert!((tri.coefficients()[2] - 0.3).norm() < 1e-12);
        assert!(forward_moments(&tri).unwrap().max_difference(&m) < 1e-12);
    }

    #[test]
    fn regular_inversion_rejects() {
        let off = HarmonicMoments::new(0.5, vec![c(0.1, 0.0), c(0.2, 0.0)]).unwrap();
        assert!(matches!(invert_regular(&off), Err(Error::Validation(_))));
        let slit = HarmonicMoments::new(0.5, vec![c(0.0, 0.0), c(0.6, 0.0)]).unwrap();
        assert!(matches!(invert_regular(&slit), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn admissible_radius_examples() {
        let n1 = admissible_radius(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((n1.r_hat - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        assert!(n1.r_bar.is_infinite());

        let n2 = admissible_radius(&[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((n2.r_bar - 1.0 / 12.0).abs() < 1e-15);
        // 8 r^2 + 36 r^4 = 1
        let r = n2.r_hat;
        assert!((8.0 * r * r + 36.0 * r.powi(4) - 1.0).abs() < 1e-14);

        let small = admissible_radius(&[c(0.0, 0.0), c(1.0, 0.0), c(1e-3, 0.0)]).unwrap();
        assert!(small.r0() > n2.r0());
        assert!(admissible_radius(&[c(0.0, 0.0), c(0.5, 0.0)]).is_err());
    }

    fn schedule(r: f64, tau3: f64, delta3: f64) -> DeformationSchedule {
        DeformationSchedule::new(r, 0.0, vec![c(0.0, 0.0), c(1.0, 0.0), c(tau3, 0.0)], vec![1.0, delta3]).unwrap()
    }

    #[test]
    fn schedule_moment_examples() {
        let sch = schedule(0.05, 1.0, 2.0);
        let top = schedule_moments(&sch, 1.0).unwrap();
        assert_eq!(top[1], c(0.0, 0.0));
        assert_eq!(top[2], c(1.0, 0.0));
        assert!((schedule_moments(&sch, 0.75).unwrap()[1] - 0.25).norm() < 1e-15);
        let tiny = schedule_moments(&sch, 1e-9).unwrap();
        assert!((tiny[1].norm() - 0.5).abs() < 1e-9 && tiny[2].norm() < 1e-17);
        assert!(schedule_moments(&sch, 0.0).is_err());
        assert!(schedule_moments(&sch, 1.5).is_err());
    }

    #[test]
    fn schedule_validation() {
        let t = vec![c(0.0, 0.0), c(1.0, 0.0)];
        assert!(DeformationSchedule::new(0.1, 0.0, t.clone(), vec![0.5]).is_err());
        assert!(DeformationSchedule::new(0.1, 0.0, vec![c(0.1, 0.0), c(1.0, 0.0)], vec![1.0]).is_err());
        assert!(DeformationSchedule::new(0.1, 0.0, vec![c(0.0, 0.0), c(0.9, 0.0)], vec![1.0]).is_err());
        assert!(DeformationSchedule::new(0.1, 0.0, t, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn near_slit_matches_regular_for_ellipse() {
        let sch = DeformationSchedule::new(1.0, 0.0, vec![c(0.0, 0.0), c(1.0, 0.0)], vec![1.0]).unwrap();
        let m = HarmonicMoments::new(0.75, vec![c(0.0, 0.0), c(0.25, 0.0)]).unwrap();
        let near = invert_near_slit(&m, &sch).unwrap();
        let reg = invert_regular(&m).unwrap();
        assert!((near.coefficients()[1] - reg.coefficients()[1]).norm() < 1e-10);
        assert!((near.coefficients()[1] - 0.5).norm() < 1e-10);
    }

    #[test]
    fn near_slit_roundtrip_small_area() {
        let sch = schedule(0.05, 1.0, 2.0);
        let m = HarmonicMoments::new(1e-4, vec![c(0.0, 0.0); 3]).unwrap();
        let curve = invert_near_slit(&m, &sch).unwrap();
        let back = forward_moments(&curve).unwrap();
        assert!((back.t0 - 1e-4).abs() < 1e-8);
        // the recovered moments lie on the schedule
        let s = 1.0 - 4.0 * back.lambda();
        let t = schedule_moments(&sch, s).unwrap();
        for j in 1..=3 {
            assert!((back.get(j) - t[j - 1]).norm() < 1e-8, "t_{j}");
        }
    }

    #[test]
    fn near_slit_out_of_regime() {
        let sch = schedule(0.05, 1.0, 2.0);
        let m = HarmonicMoments::new(1.0, vec![c(0.0, 0.0); 3]).unwrap();
        assert!(matches!(invert_near_slit(&m, &sch), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn deform_ellipse_family() {
        let r = 0.3;
        let sch = DeformationSchedule::new(r, 0.0, vec![c(0.0, 0.0), c(1.0, 0.0)], vec![1.0]).unwrap();
        let traj = deform(&sch, &[0.9, 0.5, 0.1, 0.01]).unwrap();
        for step in &traj.steps {
            let a1 = step.curve.coefficients()[1];
            assert!((a1 / r - (1.0 - step.s).sqrt()).norm() < 1e-12);
            assert!((step.moments.t0 - r * r * step.s).abs() < 1e-14);
        }
        assert_eq!(traj.steps[0].regime, Regime::Regular);
        assert_eq!(traj.steps[3].regime, Regime::NearSlit);
    }

    #[test]
    fn deform_rejects_bad_s_values() {
        let sch = schedule(0.05, 1.0, 2.0);
        assert!(deform(&sch, &[0.5, 0.6]).is_err());
        assert!(deform(&sch, &[1.5]).is_err());
        assert!(deform(&sch, &[]).is_err());
    }

    #[test]
    fn breakdown_for_unit_exponent() {
        let s_values: Vec<f64> = (0..=30).map(|k| 10f64.powf(-(k as f64) / 10.0)).collect();
        let err = deform(&schedule(0.05, 1.0, 1.0), &s_values).unwrap_err();
        match err {
            Error::Breakdown { s: Some(s), xi } => assert!(s > 1e-2 && xi <= 0.0),
            other => panic!("unexpected {other}"),
        }
        let ok = deform(&schedule(0.05, 1.0, 2.0), &s_values).unwrap();
        assert!(ok.steps.iter().all(|st| st.curve.simplicity_margin() > 0.0));
        let report = ok.asymptotics.unwrap();
        assert!(report.alpha1_decays && report.alpha_rest_decays);
        // alpha_0 ~ 12 rho s is O(s) for Delta_3 = 2
        assert!(!report.alpha0_decays);
        let steep = deform(&schedule(0.05, 1.0, 3.0), &s_values).unwrap();
        assert!(steep.asymptotics.unwrap().all_decay());
    }

    #[test]
    fn alpha0_matches_leading_order() {
        // alpha_0 ~ 12 Re(tau_3) r^2 for Delta_3 = 1 near the slit
        let r = 0.02;
        let traj = deform(&schedule(r, 1.0, 1.0), &[0.5, 0.1, 0.01]).unwrap();
        let a0 = traj.steps[2].curve.coefficients()[0];
        assert!((a0.re / (12.0 * r * r) - 1.0).abs() < 0.1, "{a0}");
    }
}
