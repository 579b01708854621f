//! Roots of complex polynomials by simultaneous (Aberth-Ehrlich) iteration.

use num_complex::Complex64;

/// Evaluates `p` (coefficients in descending powers) and its derivative at `z`.
pub(crate) fn horner(p: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for c in p {
        dv = dv * z + v;
        v = v * z + c;
    }
    (v, dv)
}

/// All roots of `p`, given in descending powers with `p[0] != 0`.
pub(crate) fn roots(p: &[Complex64]) -> Vec<Complex64> {
    let degree = p.len().saturating_sub(1);
    if degree == 0 {
        return Vec::new();
    }
    let lead = p[0];
    let monic: Vec<Complex64> = p.iter().map(|c| c / lead).collect();
    if degree == 1 {
        return vec![-monic[1]];
    }

    // Initial guesses on a circle bounded by the Cauchy radius, rotated off the axes.
    let radius = 1.0 + monic[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (degree as f64) + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..degree {
            let (v, dv) = horner(&monic, z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-16 {
            break;
        }
    }
    z
}

/// A few Newton steps on `p` from `z`; stops once the correction stalls.
pub(crate) fn polish(p: &[Complex64], mut z: Complex64) -> Complex64 {
    for _ in 0..8 {
        let (v, dv) = horner(p, z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-17 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_unity() {
        // z^5 - 1
        let mut p = vec![c(0.0, 0.0); 6];
        p[0] = c(1.0, 0.0);
        p[5] = c(-1.0, 0.0);
        let r = roots(&p);
        assert_eq!(r.len(), 5);
        for z in &r {
            assert!((z.norm() - 1.0).abs() < 1e-13);
            assert!((z.powu(5) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn recovers_prescribed_roots() {
        let want = [c(2.0, 1.0), c(-0.5, 0.0), c(0.1, -0.3), c(0.0, 0.0)];
        // expand prod (z - w)
        let mut p = vec![c(1.0, 0.0)];
        for w in &want {
            let mut q = vec![c(0.0, 0.0); p.len() + 1];
            for (i, a) in p.iter().enumerate() {
                q[i] += a;
                q[i + 1] -= a * w;
            }
            p = q;
        }
        let got = roots(&p);
        for w in &want {
            let best = got.iter().map(|z| (z - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "missing root {w}");
        }
    }
}
