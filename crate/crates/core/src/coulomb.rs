//! Metropolis sampling of the eigenvalue gas with weight `exp(-H)`,
//! `H = 2 sum_{i<j} log|z_i - z_j|^{-1} + N sum V(z_i)`.

use crate::balayage::{balayage_grid, balayage_integral, sigma_radius, TestFunction};
use crate::curve::{ContourGrid, PolynomialCurve};
use crate::error::{Error, Result};
use crate::moments::HarmonicMoments;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Sweeps between full energy recomputations.
pub const DRIFT_INTERVAL: usize = 100;

/// Largest tolerated relative gap between incremental and recomputed energy.
pub const DRIFT_TOLERANCE: f64 = 1e-8;

/// Burn-in acceptance window for step tuning.
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.3, 0.5);

const TUNE_INTERVAL: usize = 10;

/// `V(z) = (|z|^2 - 2 Re p(z)) / t_0` with `p(z) = sum_{k>=2} t_k z^k`,
/// confined to the disk `|z| <= sigma_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    t0: f64,
    p: Vec<Complex64>,
    sigma_radius: f64,
}

impl PotentialSpec {
    /// `p_coeffs` holds `t_2, t_3, ...`.
    pub fn new(t0: f64, p_coeffs: Vec<Complex64>, sigma_radius: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::Validation(format!("t0 must be positive, got {t0}")));
        }
        if !(sigma_radius.is_finite() && sigma_radius > 0.0) {
            return Err(Error::Validation(format!("sigma_radius must be positive, got {sigma_radius}")));
        }
        if p_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("potential coefficients must be finite".into()));
        }
        if let Some(t2) = p_coeffs.first() {
            if t2.norm() > 0.5 {
                return Err(Error::Validation(format!("|t2| = {} exceeds 1/2", t2.norm())));
            }
        }
        Ok(PotentialSpec {
            t0,
            p: p_coeffs,
            sigma_radius,
        })
    }

    /// Potential whose predicted droplet is bounded by `curve`, with the default confining disk.
    pub fn for_curve(curve: &PolynomialCurve, moments: &HarmonicMoments) -> Result<Self> {
        Self::new(moments.t0, moments.t.iter().skip(1).copied().collect(), sigma_radius(curve))
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn p_coeffs(&self) -> &[Complex64] {
        &self.p
    }

    pub fn sigma_radius(&self) -> f64 {
        self.sigma_radius
    }

    pub fn potential(&self, z: Complex64) -> f64 {
        // p(z) = z^2 (t_2 + t_3 z + ...)
        let tail = self.p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
        (z.norm_sqr() - 2.0 * (tail * z * z).re) / self.t0
    }
}

/// `H` for a configuration; `+inf` when two points coincide.
///
/// Terms are summed in a canonical point order, so any permutation of the
/// input gives the bit-identical value.
pub fn total_energy(points: &[Complex64], pot: &PotentialSpec) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let points = &sorted;
    let n = points.len() as f64;
    let mut h = 0.0;
    for (i, &zi) in points.iter().enumerate() {
        for &zj in &points[i + 1..] {
            let d = (zi - zj).norm();
            if d == 0.0 {
                return f64::INFINITY;
            }
            h -= 2.0 * d.ln();
        }
        h += n * pot.potential(zi);
    }
    h
}

/// Where chains start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Start {
    /// Uniform in the disk of radius `sqrt(t_0)`.
    #[default]
    Disk,
    /// Uniform in the confining disk.
    Sigma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub n: usize,
    pub sweeps: usize,
    pub step: f64,
    pub seed: u64,
    /// Sweeps spent tuning the step; no measurements are kept from them.
    pub burn_in: usize,
    /// Sweeps between stored snapshots after burn-in.
    pub thin: usize,
    pub start: Start,
}

impl RunSettings {
    pub fn new(n: usize, sweeps: usize, step: f64, seed: u64) -> Self {
        RunSettings {
            n,
            sweeps,
            step,
            seed,
            burn_in: sweeps / 5,
            thin: 10,
            start: Start::Disk,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation(format!("N must be at least 2, got {}", self.n)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Validation(format!("step must be positive, got {}", self.step)));
        }
        if self.sweeps == 0 || self.burn_in >= self.sweeps {
            return Err(Error::Validation(format!(
                "need more sweeps ({}) than burn-in sweeps ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Validation("thin must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    pub points: Vec<Complex64>,
    pub n: usize,
    /// Current `H`, recomputed from scratch at the end of the run.
    pub energy: f64,
    pub seed: u64,
    pub sweeps: usize,
    /// Step after burn-in tuning.
    pub step: f64,
    /// Acceptance rate over the post-burn-in sweeps.
    pub acceptance_rate: f64,
    /// Largest relative incremental-energy drift seen at a check.
    pub max_drift: f64,
    /// `H` after every sweep.
    pub energy_trace: Vec<f64>,
    /// Configurations stored every `thin` sweeps after burn-in.
    pub snapshots: Vec<Vec<Complex64>>,
}

fn initial_points(pot: &PotentialSpec, n: usize, start: Start, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let radius = match start {
        Start::Disk => pot.t0.sqrt().min(pot.sigma_radius),
        Start::Sigma => pot.sigma_radius,
    };
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let theta: f64 = rng.random::<f64>() * 2.0 * PI;
            Complex64::from_polar(radius * u.sqrt(), theta)
        })
        .collect()
}

/// Change in `H` when point `i` moves to `z`.
fn energy_change(points: &[Complex64], i: usize, z: Complex64, pot: &PotentialSpec) -> f64 {
    let old = points[i];
    // products of squared-distance ratios, one log per batch of 8
    let mut log_ratio = 0.0;
    let mut product = 1.0;
    let mut batched = 0;
    for (j, &zj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = (z - zj).norm_sqr();
        if d == 0.0 {
            return f64::INFINITY;
        }
        product *= (old - zj).norm_sqr() / d;
        batched += 1;
        if batched == 8 {
            log_ratio += product.ln();
            product = 1.0;
            batched = 0;
        }
    }
    log_ratio + product.ln() + points.len() as f64 * (pot.potential(z) - pot.potential(old))
}

pub fn metropolis_run(pot: &PotentialSpec, n: usize, sweeps: usize, step: f64, seed: u64) -> Result<EnsembleSample> {
    metropolis_run_with(pot, &RunSettings::new(n, sweeps, step, seed))
}

/// Single-site Metropolis with Gaussian proposals; moves leaving the
/// confining disk are rejected.
pub fn metropolis_run_with(pot: &PotentialSpec, settings: &RunSettings) -> Result<EnsembleSample> {
    settings.validate()?;
    let n = settings.n;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut points = initial_points(pot, n, settings.start, &mut rng);
    let mut energy = total_energy(&points, pot);
    let mut step = settings.step;
    let mut max_drift: f64 = 0.0;
    let mut energy_trace = Vec::with_capacity(settings.sweeps);
    let mut snapshots = Vec::new();
    let (mut window_accepted, mut window_proposed) = (0usize, 0usize);
    let (mut accepted, mut proposed) = (0usize, 0usize);

    for sweep in 1..=settings.sweeps {
        for i in 0..n {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let z = points[i] + Complex64::new(dx, dy) * step;
            let u: f64 = rng.random();
            let ok = if z.norm() > pot.sigma_radius {
                false
            } else {
                let delta = energy_change(&points, i, z, pot);
                if delta <= 0.0 || u < (-delta).exp() {
                    points[i] = z;
                    energy += delta;
                    true
                } else {
                    false
                }
            };
            window_proposed += 1;
            window_accepted += ok as usize;
            if sweep > settings.burn_in {
                proposed += 1;
                accepted += ok as usize;
            }
        }
        if sweep <= settings.burn_in && sweep % TUNE_INTERVAL == 0 {
            let rate = window_accepted as f64 / window_proposed as f64;
            if rate < TARGET_ACCEPTANCE.0 {
                step *= 0.8;
            } else if rate > TARGET_ACCEPTANCE.1 {
                step *= 1.25;
            }
            window_accepted = 0;
            window_proposed = 0;
        }
        if sweep % DRIFT_INTERVAL == 0 {
            let exact = total_energy(&points, pot);
            max_drift = max_drift.max((energy - exact).abs() / exact.abs().max(1.0));
            energy = exact;
        }
        energy_trace.push(energy);
        if sweep > settings.burn_in && (sweep - settings.burn_in).is_multiple_of(settings.thin) {
            snapshots.push(points.clone());
        }
    }
    Ok(EnsembleSample {
        energy: total_energy(&points, pot),
        points,
        n,
        seed: settings.seed,
        sweeps: settings.sweeps,
        step,
        acceptance_rate: accepted as f64 / proposed.max(1) as f64,
        max_drift,
        energy_trace,
        snapshots,
    })
}

/// Independent chains, one per seed, run in parallel; output order follows `seeds`.
pub fn run_chains(pot: &PotentialSpec, settings: &RunSettings, seeds: &[u64]) -> Result<Vec<EnsembleSample>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s = RunSettings {
                seed,
                ..settings.clone()
            };
            metropolis_run_with(pot, &s)
        })
        .collect()
}

/// Least-squares slope of `y` against its index.
pub fn trend_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Mean and delete-one jackknife error over block means.
fn jackknife<T: Copy + Into<Complex64>>(blocks: &[T]) -> (Complex64, f64) {
    let b = blocks.len();
    let values: Vec<Complex64> = blocks.iter().map(|&v| v.into()).collect();
    let total: Complex64 = values.iter().sum();
    let mean = total / b as f64;
    if b < 2 {
        return (mean, f64::NAN);
    }
    let var: f64 = values
        .iter()
        .map(|&v| ((total - v) / (b - 1) as f64 - mean).norm_sqr())
        .sum::<f64>()
        * (b - 1) as f64
        / b as f64;
    (mean, var.sqrt())
}

/// Blocks each chain contributes to the jackknife.
pub const BLOCKS_PER_CHAIN: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub k: usize,
    pub empirical: Complex64,
    pub error: f64,
    pub prediction: Complex64,
    /// Within three error bars of the prediction.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub moments: Vec<MomentEstimate>,
    pub inside_fraction: f64,
    pub inside_error: f64,
    pub configurations: usize,
}

/// Moments `(1/N) sum z_i^k` for `k = 1..=k_max` and the fraction of points
/// inside the curve, averaged over stored snapshots (or final points when a
/// sample has none), with block-jackknife errors; predictions are the
/// balayage integrals of `z^k`.
pub fn empirical_moments(samples: &[EnsembleSample], curve: &PolynomialCurve, k_max: usize) -> Result<MomentReport> {
    if samples.is_empty() {
        return Err(Error::Validation("no samples".into()));
    }
    let polyline = curve.polyline(&ContourGrid::for_geometry(curve.degree()));
    let predictions = (1..=k_max)
        .map(|k| {
            let f = TestFunction::monomial(k)?;
            balayage_integral(curve, &f, &balayage_grid(curve, &f))
        })
        .collect::<Result<Vec<_>>>()?;

    // per configuration: (moments, inside fraction)
    let measure = |pts: &[Complex64]| {
        let n = pts.len() as f64;
        let mut m = vec![Complex64::new(0.0, 0.0); k_max];
        let mut inside = 0usize;
        for &z in pts {
            let mut zk = z;
            for slot in m.iter_mut() {
                *slot += zk;
                zk *= z;
            }
            inside += matches!(polyline.winding_number(z), Ok(1)) as usize;
        }
        (m.into_iter().map(|v| v / n).collect::<Vec<_>>(), inside as f64 / n)
    };

    let mut blocks: Vec<(Vec<Complex64>, f64)> = Vec::new();
    let mut configurations = 0;
    for sample in samples {
        let series: Vec<_> = if sample.snapshots.is_empty() {
            vec![measure(&sample.points)]
        } else {
            sample.snapshots.iter().map(|p| measure(p)).collect()
        };
        configurations += series.len();
        let per = series.len().div_ceil(BLOCKS_PER_CHAIN);
        for chunk in series.chunks(per) {
            let len = chunk.len() as f64;
            let mut m = vec![Complex64::new(0.0, 0.0); k_max];
            let mut f = 0.0;
            for (mk, fk) in chunk {
                for (a, b) in m.iter_mut().zip(mk) {
                    *a += b;
                }
                f += fk;
            }
            blocks.push((m.into_iter().map(|v| v / len).collect(), f / len));
        }
    }

    let moments = (0..k_max)
        .map(|i| {
            let series: Vec<Complex64> = blocks.iter().map(|b| b.0[i]).collect();
            let (empirical, error) = jackknife(&series);
            let prediction = predictions[i];
            MomentEstimate {
                k: i + 1,
                empirical,
                error,
                prediction,
                agrees: (empirical - prediction).norm() <= 3.0 * error,
            }
        })
        .collect();
    let fractions: Vec<f64> = blocks.iter().map(|b| b.1).collect();
    let (inside, inside_error) = jackknife(&fractions);
    Ok(MomentReport {
        moments,
        inside_fraction: inside.re,
        inside_error,
        configurations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::forward_moments;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ellipse() -> PolynomialCurve {
        PolynomialCurve::new(1.0, vec![c(0.0, 0.0), c(0.5, 0.0)]).unwrap()
    }

    fn brute_energy(points: &[Complex64], pot: &PotentialSpec) -> f64 {
        let n = points.len();
        let mut h = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    h += -((points[i] - points[j]).norm().ln());
                }
            }
            let z = points[i];
            let mut p = c(0.0, 0.0);
            for (k, t) in pot.p_coeffs().iter().enumerate() {
                p += t * z.powu(k as u32 + 2);
            }
            h += n as f64 * (z.norm_sqr() - p.re - p.conj().re) / pot.t0();
        }
        h
    }

    #[test]
    fn energy_examples() {
        let pot = PotentialSpec::new(1.0, vec![], 6.0).unwrap();
        assert_eq!(total_energy(&[c(0.0, 0.0), c(1.0, 0.0)], &pot), 2.0);
        assert_eq!(total_energy(&[c(0.0, 0.0), c(0.0, 0.0)], &pot), f64::INFINITY);
        let pot = PotentialSpec::new(0.8, vec![c(0.2, 0.1), c(0.05, -0.02)], 6.0).unwrap();
        let pts = [c(0.3, -0.2), c(-0.5, 0.4), c(0.1, 0.7)];
        assert!((total_energy(&pts, &pot) - brute_energy(&pts, &pot)).abs() < 1e-12);
        let perm = [pts[2], pts[0], pts[1]];
        assert_eq!(total_energy(&perm, &pot), total_energy(&pts, &pot));
    }

    #[test]
    fn potential_validation() {
        assert!(PotentialSpec::new(0.0, vec![], 1.0).is_err());
        assert!(PotentialSpec::new(1.0, vec![c(0.6, 0.0)], 1.0).is_err());
        assert!(PotentialSpec::new(1.0, vec![], -1.0).is_err());
        let pot = PotentialSpec::new(1.0, vec![], 1.0).unwrap();
        assert!(metropolis_run(&pot, 1, 10, 0.1, 0).is_err());
        assert!(metropolis_run(&pot, 4, 10, 0.0, 0).is_err());
    }

    #[test]
    fn incremental_change_matches_recomputation() {
        let pot = PotentialSpec::new(0.75, vec![c(0.25, 0.0)], 6.0).unwrap();
        let mut pts = vec![c(0.1, 0.2), c(-0.4, 0.3), c(0.5, -0.6), c(0.0, -0.1)];
        let before = total_energy(&pts, &pot);
        let z = c(0.33, 0.44);
        let delta = energy_change(&pts, 2, z, &pot);
        pts[2] = z;
        assert!((total_energy(&pts, &pot) - before - delta).abs() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic() {
        let pot = PotentialSpec::new(0.75, vec![c(0.25, 0.0)], 6.0).unwrap();
        let a = metropolis_run(&pot, 16, 200, 0.1, 5).unwrap();
        let b = metropolis_run(&pot, 16, 200, 0.1, 5).unwrap();
        assert_eq!(a, b);
        let c2 = metropolis_run(&pot, 16, 200, 0.1, 6).unwrap();
        assert_ne!(a.points, c2.points);
        assert!(a.max_drift < DRIFT_TOLERANCE);
        assert!(a.points.iter().all(|z| z.norm() <= 6.0));
    }

    #[test]
    fn circle_droplet() {
        let r = 0.8;
        let circle = PolynomialCurve::circle(r).unwrap();
        let pot = PotentialSpec::new(r * r, vec![], sigma_radius(&circle)).unwrap();
        let sample = metropolis_run(&pot, 64, 5000, 0.1, 17).unwrap();
        let inside = sample.points.iter().filter(|z| z.norm() <= r).count() as f64 / 64.0;
        assert!(inside > 0.9, "inside {inside}");
        let (lo, hi) = TARGET_ACCEPTANCE;
        assert!(sample.acceptance_rate > lo - 0.1 && sample.acceptance_rate < hi + 0.1);
        assert!(sample.max_drift < DRIFT_TOLERANCE);
    }

    #[test]
    fn ellipse_second_moment() {
        let curve = ellipse();
        let pot = PotentialSpec::for_curve(&curve, &forward_moments(&curve).unwrap()).unwrap();
        assert!((pot.t0() - 0.75).abs() < 1e-15 && (pot.p_coeffs()[0] - 0.25).norm() < 1e-15);
        let settings = RunSettings::new(64, 3000, 0.1, 0);
        let chains = run_chains(&pot, &settings, &[1, 2, 3, 4]).unwrap();
        let report = empirical_moments(&chains, &curve, 2).unwrap();
        let m2 = &report.moments[1];
        assert!((m2.prediction - 0.5).norm() < 1e-12);
        assert!(m2.agrees, "{m2:?}");
    }

    #[test]
    fn burn_in_energy_trends_down() {
        let pot = PotentialSpec::new(0.75, vec![c(0.25, 0.0)], 6.0).unwrap();
        let settings = RunSettings {
            start: Start::Sigma,
            ..RunSettings::new(32, 400, 0.3, 9)
        };
        let sample = metropolis_run_with(&pot, &settings).unwrap();
        let half = &sample.energy_trace[..sample.energy_trace.len() / 2];
        assert!(trend_slope(half) <= 0.0);
    }

    #[test]
    fn uniform_disk_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pot = PotentialSpec::new(0.81, vec![], 3.0).unwrap();
        let points = initial_points(&pot, 4000, Start::Disk, &mut rng);
        let sample = EnsembleSample {
            n: points.len(),
            energy: 0.0,
            points,
            seed: 1,
            sweeps: 0,
            step: 0.0,
            acceptance_rate: 0.0,
            max_drift: 0.0,
            energy_trace: vec![],
            snapshots: vec![],
        };
        let report = empirical_moments(&[sample], &PolynomialCurve::circle(0.95).unwrap(), 3).unwrap();
        assert_eq!(report.inside_fraction, 1.0);
        assert!(report.moments.iter().all(|m| m.empirical.norm() < 0.05));
    }

    #[test]
    fn jackknife_of_constant_has_zero_error() {
        let (m, e) = jackknife(&[2.0, 2.0, 2.0]);
        assert_eq!((m, e), (c(2.0, 0.0), 0.0));
        let (m, e) = jackknife(&[1.0, 3.0]);
        assert_eq!(m, c(2.0, 0.0));
        assert!((e - 1.0).abs() < 1e-15);
    }
}
