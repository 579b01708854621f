#![allow(dead_code)]

use conformal_ensembles::moments::center_curve;
use conformal_ensembles::PolynomialCurve;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Uniform in the disk of the given radius.
pub fn disk_point(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let u: f64 = rng.random();
    Complex64::from_polar(radius * u.sqrt(), rng.random::<f64>() * std::f64::consts::TAU)
}

/// Centered, certified curve of degree `1..=n_max` with scaled coefficients
/// `|alpha_j| <= alpha_max` and `r` drawn from `r_range`; redraws until `xi > 0`.
pub fn random_curve(rng: &mut ChaCha8Rng, n_max: usize, alpha_max: f64, r_range: (f64, f64)) -> PolynomialCurve {
    loop {
        let n = rng.random_range(1..=n_max);
        let r = rng.random_range(r_range.0..=r_range.1);
        let alpha: Vec<Complex64> = (0..=n).map(|_| disk_point(rng, alpha_max)).collect();
        let Ok(curve) = PolynomialCurve::from_scaled(r * r, &alpha) else {
            continue;
        };
        if curve.simplicity_margin() <= 0.05 * r {
            continue;
        }
        if let Ok(centered) = center_curve(&curve) {
            if centered.simplicity_margin() > 0.0 {
                return centered;
            }
        }
    }
}
