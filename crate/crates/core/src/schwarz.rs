//! The inverse Riemann map `H = h^{-1}`, the Schwarz function
//! `S(z) = conj(h)(1/H(z))`, its square-root form near the slit and the
//! location of its branch points.

use crate::curve::{ContourGrid, PolynomialCurve};
use crate::error::{Error, Result};
use crate::poly;
use num_complex::Complex64;

/// How far inside the unit circle a preimage may lie.
pub const COLLAR_TOLERANCE: f64 = 1e-6;

/// Relative residual `|h(w) - z| / (1 + |z|)` a preimage must reach.
pub const ROOT_RESIDUAL: f64 = 1e-12;

/// `r w^{n+1} + (a_0 - z) w^n + a_1 w^{n-1} + ... + a_n`, descending.
fn preimage_polynomial(curve: &PolynomialCurve, z: Complex64) -> Vec<Complex64> {
    let mut p = Vec::with_capacity(curve.degree() + 2);
    p.push(Complex64::new(curve.r(), 0.0));
    p.extend_from_slice(curve.coefficients());
    p[1] -= z;
    p
}

/// The preimage `w` of `z` with `|w| >= 1 - COLLAR_TOLERANCE`.
pub fn riemann_inverse(curve: &PolynomialCurve, z: Complex64) -> Result<Complex64> {
    curve.require_certified()?;
    if !z.is_finite() {
        return Err(Error::Domain("z must be finite".into()));
    }
    let p = preimage_polynomial(curve, z);
    let roots: Vec<Complex64> = poly::roots(&p).into_iter().map(|w| poly::polish(&p, w)).collect();
    let outer: Vec<Complex64> = roots
        .iter()
        .copied()
        .filter(|w| w.norm() >= 1.0 - COLLAR_TOLERANCE)
        .collect();
    let w = match outer.len() {
        0 => {
            let max_modulus = roots.iter().map(|w| w.norm()).fold(0.0, f64::max);
            return Err(Error::OutsideAnalyticity { max_modulus });
        }
        1 => outer[0],
        count => return Err(Error::BranchAmbiguity { count }),
    };
    let residual = (curve.h(w) - z).norm();
    if residual > ROOT_RESIDUAL * (1.0 + z.norm()) {
        return Err(Error::Precision(format!(
            "preimage residual {residual:.3e} exceeds tolerance at z = {z}"
        )));
    }
    Ok(w)
}

/// `S(z) = conj(h)(1/H(z))`; equals `conj(z)` on the curve.
pub fn schwarz_function(curve: &PolynomialCurve, z: Complex64) -> Result<Complex64> {
    riemann_inverse(curve, z).map(|w| curve.reflected(w))
}

/// `S(z) = E z + Lambda sqrt(z^2 - 4 r a_1) + g(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzDecomposition {
    pub e: Complex64,
    pub lambda: Complex64,
    /// `+-2 sqrt(r a_1)`.
    pub branch_points: [Complex64; 2],
    /// `max |g|` over the sampled curve.
    pub remainder_bound: f64,
}

impl SchwarzDecomposition {
    /// `sqrt(z^2 - b^2)` with the cut on `[-b, b]`, behaving like `z` at infinity.
    pub fn slit_sqrt(&self, z: Complex64) -> Complex64 {
        let b = self.branch_points[0];
        z * (1.0 - b * b / (z * z)).sqrt()
    }

    pub fn leading(&self, z: Complex64) -> Complex64 {
        self.e * z + self.lambda * self.slit_sqrt(z)
    }
}

/// `E = (r^2 + |a_1|^2) / (2 r a_1)` and `Lambda = (|a_1|^2 - r^2) / (2 r a_1)`,
/// with the remainder measured on the curve images of `grid`.
pub fn near_slit_decomposition(curve: &PolynomialCurve, grid: &ContourGrid) -> Result<SchwarzDecomposition> {
    let a1 = curve.coefficients().get(1).copied().unwrap_or_default();
    if a1 == Complex64::new(0.0, 0.0) {
        return Err(Error::DecompositionUndefined);
    }
    let r = curve.r();
    let denom = 2.0 * r * a1;
    let b = 2.0 * (r * a1).sqrt();
    let mut dec = SchwarzDecomposition {
        e: (r * r + a1.norm_sqr()) / denom,
        lambda: (a1.norm_sqr() - r * r) / denom,
        branch_points: [b, -b],
        remainder_bound: 0.0,
    };
    // on the curve S(h(w)) = conj(h)(1/w)
    dec.remainder_bound = grid
        .nodes()
        .iter()
        .map(|&w| (curve.reflected(w) - dec.leading(curve.h(w))).norm())
        .fold(0.0, f64::max);
    Ok(dec)
}

/// Critical points of `h` and the candidate branch points of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPointReport {
    /// Non-zero roots of `h'`.
    pub critical_points: Vec<Complex64>,
    /// `h(w_c)` for each critical point.
    pub branch_points: Vec<Complex64>,
    /// Whether each branch point lies inside the curve.
    pub inside_flags: Vec<bool>,
    /// `R = max |w_c|`, zero when there are no critical points.
    pub critical_radius: f64,
    /// Branch points within tolerance of the curve.
    pub on_curve: usize,
}

impl BranchPointReport {
    pub fn inside_count(&self) -> usize {
        self.inside_flags.iter().filter(|&&f| f).count()
    }

    pub fn even_inside(&self) -> bool {
        self.inside_count().is_multiple_of(2)
    }
}

/// Report only; the caller decides what to assert.
pub fn branch_point_check(curve: &PolynomialCurve) -> Result<BranchPointReport> {
    curve.require_certified()?;
    let n = curve.degree();
    // w^{n+1} h'(w) = r w^{n+1} - sum_j j a_j w^{n-j}
    let mut p = vec![Complex64::new(0.0, 0.0); n + 2];
    p[0] = Complex64::new(curve.r(), 0.0);
    for (j, a) in curve.coefficients().iter().enumerate().skip(1) {
        p[j + 1] = -a * j as f64;
    }
    let scale = curve.r();
    let critical_points: Vec<Complex64> = poly::roots(&p)
        .into_iter()
        .map(|w| poly::polish(&p, w))
        .filter(|w| w.norm() > 1e-12 && curve.dh(*w).norm() <= 1e-8 * scale)
        .collect();
    let grid = ContourGrid::for_geometry(n);
    let polyline = curve.polyline(&grid);
    let branch_points: Vec<Complex64> = critical_points.iter().map(|&w| curve.h(w)).collect();
    let mut inside_flags = Vec::with_capacity(branch_points.len());
    let mut on_curve = 0;
    for &z in &branch_points {
        match polyline.winding_number(z) {
            Ok(wn) => inside_flags.push(wn == 1),
            Err(_) => {
                on_curve += 1;
                inside_flags.push(false);
            }
        }
    }
    Ok(BranchPointReport {
        critical_radius: critical_points.iter().map(|w| w.norm()).fold(0.0, f64::max),
        critical_points,
        branch_points,
        inside_flags,
        on_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ellipse() -> PolynomialCurve {
        PolynomialCurve::new(1.0, vec![c(0.0, 0.0), c(0.5, 0.0)]).unwrap()
    }

    #[test]
    fn inverse_examples() {
        let circle = PolynomialCurve::circle(2.0).unwrap();
        assert!((riemann_inverse(&circle, c(0.0, 2.0)).unwrap() - c(0.0, 1.0)).norm() < 1e-15);

        let w = riemann_inverse(&ellipse(), c(2.0, 0.0)).unwrap();
        assert!((w - (2.0 + 2f64.sqrt()) / 2.0).norm() < 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let curve = PolynomialCurve::new(1.0, vec![c(0.05, 0.0), c(0.2, 0.1), c(0.0, 0.1), c(0.05, -0.02)]).unwrap();
        for k in 0..40 {
            let w = Complex64::from_polar(1.0 + 2.0 * k as f64 / 39.0, 0.37 * k as f64);
            let back = riemann_inverse(&curve, curve.h(w)).unwrap();
            assert!((back - w).norm() < 1e-10, "{w} {back}");
        }
    }

    #[test]
    fn deep_points_are_rejected() {
        assert!(matches!(
            riemann_inverse(&ellipse(), c(0.0, 0.0)),
            Err(Error::OutsideAnalyticity { .. })
        ));
    }

    #[test]
    fn schwarz_examples() {
        let circle = PolynomialCurve::circle(1.0).unwrap();
        assert!((schwarz_function(&circle, c(2.0, 0.0)).unwrap() - 0.5).norm() < 1e-15);

        // r/H + a_1 H with H = (2 + sqrt 2)/2
        let h = (2.0 + 2f64.sqrt()) / 2.0;
        let want = 1.0 / h + 0.5 * h;
        assert!((schwarz_function(&ellipse(), c(2.0, 0.0)).unwrap() - want).norm() < 1e-14);
        assert!((want - 1.43934).abs() < 1e-5);
    }

    #[test]
    fn schwarz_reflects_on_curve() {
        let curve = PolynomialCurve::new(0.8, vec![c(0.0, 0.02), c(0.1, 0.2), c(-0.05, 0.03)]).unwrap();
        for k in 0..64 {
            let w = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 64.0);
            let z = curve.h(w);
            assert!((schwarz_function(&curve, z).unwrap() - z.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn schwarz_is_analytic_in_the_collar() {
        let curve = PolynomialCurve::new(1.0, vec![c(0.0, 0.0), c(0.3, 0.1), c(0.1, 0.0)]).unwrap();
        let step = 1e-7;
        for k in 0..16 {
            let w = Complex64::from_polar(1.0 - 0.5 * COLLAR_TOLERANCE, 2.0 * PI * k as f64 / 16.0);
            let z = curve.h(w);
            let s = |z: Complex64| schwarz_function(&curve, z).unwrap();
            let dx = (s(z + step) - s(z - step)) / (2.0 * step);
            let dy = (s(z + c(0.0, step)) - s(z - c(0.0, step))) / (2.0 * step);
            // d/dz-bar = (d/dx + i d/dy) / 2
            let cr = (dx + c(0.0, 1.0) * dy).norm() / 2.0;
            assert!(cr < 1e-6 * (1.0 + dx.norm()), "{cr}");
        }
    }

    #[test]
    fn ellipse_decomposition_is_exact() {
        let dec = near_slit_decomposition(&ellipse(), &ContourGrid::new(512).unwrap()).unwrap();
        assert!((dec.e - 1.25).norm() < 1e-15);
        assert!((dec.lambda + 0.75).norm() < 1e-15);
        assert!((dec.branch_points[0] - 2f64.sqrt()).norm() < 1e-15);
        assert!(dec.remainder_bound < 1e-10);
        // defining identities
        let (r, a1) = (1.0, c(0.5, 0.0));
        assert!((dec.e * 2.0 * r * a1 - (r * r + a1.norm_sqr())).norm() < 1e-15);
        assert!((dec.lambda * 2.0 * r * a1 - (a1.norm_sqr() - r * r)).norm() < 1e-15);
    }

    #[test]
    fn decomposition_slit_limit_and_undefined() {
        let near = PolynomialCurve::new(1.0, vec![c(0.0, 0.0), c(1.0 - 1e-9, 0.0)]).unwrap();
        let dec = near_slit_decomposition(&near, &ContourGrid::new(64).unwrap()).unwrap();
        assert!((dec.e - 1.0).norm() < 1e-8 && dec.lambda.norm() < 1e-8);

        let tri = PolynomialCurve::new(1.0, vec![c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]).unwrap();
        assert!(matches!(
            near_slit_decomposition(&tri, &ContourGrid::new(64).unwrap()),
            Err(Error::DecompositionUndefined)
        ));
    }

    #[test]
    fn slit_sqrt_branch() {
        let dec = near_slit_decomposition(&ellipse(), &ContourGrid::new(64).unwrap()).unwrap();
        // ~ z at infinity, continuous across the real axis outside the cut
        let far = c(1e6, 3.0);
        assert!((dec.slit_sqrt(far) / far - 1.0).norm() < 1e-11);
        let above = dec.slit_sqrt(c(3.0, 1e-12));
        let below = dec.slit_sqrt(c(3.0, -1e-12));
        assert!((above - below).norm() < 1e-9);
        let above = dec.slit_sqrt(c(0.5, 1e-12));
        let below = dec.slit_sqrt(c(0.5, -1e-12));
        assert!((above + below).norm() < 1e-9);
    }

    #[test]
    fn branch_points_of_ellipse() {
        let report = branch_point_check(&ellipse()).unwrap();
        assert_eq!(report.critical_points.len(), 2);
        assert!((report.critical_radius - 0.5f64.sqrt()).abs() < 1e-14);
        for z in &report.branch_points {
            assert!((z.norm() - 2f64.sqrt()).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
        assert_eq!(report.inside_count(), 2);
        assert_eq!(report.on_curve, 0);
    }

    #[test]
    fn circle_has_no_branch_points() {
        let report = branch_point_check(&PolynomialCurve::circle(1.0).unwrap()).unwrap();
        assert!(report.critical_points.is_empty());
        assert_eq!(report.critical_radius, 0.0);
        assert!(report.even_inside());
    }

    #[test]
    fn three_fold_curve_has_odd_count() {
        // h' = 1 - 0.6 / w^3: three critical points, each mapped inside
        let tri = PolynomialCurve::new(1.0, vec![c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]).unwrap();
        let report = branch_point_check(&tri).unwrap();
        assert_eq!(report.critical_points.len(), 3);
        assert!((report.critical_radius - 0.6f64.cbrt()).abs() < 1e-14);
        assert_eq!(report.inside_count(), 3);
        assert!(!report.even_inside());
    }
}
