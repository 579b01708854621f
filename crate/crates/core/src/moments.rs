//! Exterior harmonic moments `(t_0, t_1..t_{n+1})` of polynomial curves.

use crate::curve::{ContourGrid, PolynomialCurve};
use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::solve::{damped_newton, NewtonOptions};
use num_complex::Complex64;

/// Area over pi and the exterior moments `t_1..t_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMoments {
    pub t0: f64,
    /// `t[j - 1] = t_j`.
    pub t: Vec<Complex64>,
}

impl HarmonicMoments {
    pub fn new(t0: f64, t: Vec<Complex64>) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::Validation(format!("t0 must be positive, got {t0}")));
        }
        if t.is_empty() {
            return Err(Error::Validation("at least t_1 must be given".into()));
        }
        if t.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("moments must be finite".into()));
        }
        Ok(HarmonicMoments { t0, t })
    }

    /// Degree `n` of the curve these moments describe (`t` holds `n + 1` values).
    pub fn degree(&self) -> usize {
        self.t.len() - 1
    }

    /// `t_j` for `j >= 1`; zero beyond the stored range.
    pub fn get(&self, j: usize) -> Complex64 {
        assert!(j >= 1, "t_0 is real; use the t0 field");
        self.t.get(j - 1).copied().unwrap_or_default()
    }

    /// `lambda = |t_2|^2`.
    pub fn lambda(&self) -> f64 {
        self.get(2).norm_sqr()
    }

    /// Largest coordinate difference, including `t0`.
    pub fn max_difference(&self, other: &HarmonicMoments) -> f64 {
        let n = self.t.len().max(other.t.len());
        (1..=n)
            .map(|j| (self.get(j) - other.get(j)).norm())
            .fold((self.t0 - other.t0).abs(), f64::max)
    }
}

fn series_mul<S: Scalar>(p: &[S], q: &[S], len: usize) -> Vec<S> {
    (0..len)
        .map(|k| {
            (0..=k)
                .filter(|&i| i < p.len() && k - i < q.len())
                .fold(S::zero(), |acc, i| acc + p[i].clone() * q[k - i].clone())
        })
        .collect()
}

/// `t_0 = r^2 - sum j |a_j|^2`.
pub(crate) fn exact_t0<S: Scalar>(r: &S, a: &[S]) -> S {
    a.iter()
        .enumerate()
        .skip(1)
        .fold(r.clone() * r.clone(), |acc, (j, c)| acc - (c.clone() * c.conj()).scale(j as f64))
}

/// `t_1..t_{n+1}` by the residue at infinity.
///
/// With `x = 1/w`, `h = r w (1 + u)` where `u = sum (a_l / r) x^{l+1}`, so
/// `h^{-j} = r^{-j} x^j (1 + u)^{-j}`. Only the finitely many series
/// coefficients of order `<= n` reach the `w^{-1}` term, hence the result is
/// exact.
pub(crate) fn exact_moments<S: Scalar>(r: &S, a: &[S]) -> Vec<S> {
    let n = a.len() - 1;
    let len = n + 1;
    let r_inv = r.recip();

    let mut u = vec![S::zero(); len];
    for (l, c) in a.iter().enumerate() {
        if l + 1 < len {
            u[l + 1] = c.clone() * r_inv.clone();
        }
    }
    // 1 / (1 + u)
    let mut inv = vec![S::zero(); len];
    inv[0] = S::real(1.0);
    for k in 1..len {
        inv[k] = -(1..=k).fold(S::zero(), |acc, m| acc + u[m].clone() * inv[k - m].clone());
    }
    // h'(w) = r - sum l a_l x^{l+1}
    let mut b = vec![S::zero(); len];
    b[0] = r.clone();
    for (l, c) in a.iter().enumerate().skip(1) {
        if l + 1 < len {
            b[l + 1] = -c.scale(l as f64);
        }
    }

    let mut s_j = inv.clone();
    let mut r_pow = r_inv.clone();
    let mut out = Vec::with_capacity(len);
    for j in 1..=len {
        if j > 1 {
            s_j = series_mul(&s_j, &inv, len);
            r_pow = r_pow * r_inv.clone();
        }
        let p = series_mul(&b, &s_j, len);
        let sum = ((j - 1)..=n).fold(S::zero(), |acc, l| acc + a[l].conj() * p[l + 1 - j].clone());
        out.push((sum * r_pow.clone()).scale(1.0 / j as f64));
    }
    out
}

/// Exact moments of a certified curve.
pub fn forward_moments(curve: &PolynomialCurve) -> Result<HarmonicMoments> {
    curve.require_certified()?;
    let t = exact_moments(&Complex64::new(curve.r(), 0.0), curve.coefficients());
    if t.iter().any(|c| !c.is_finite()) {
        return Err(Error::Precision("non-finite moment in residue expansion".into()));
    }
    HarmonicMoments::new(curve.area_t0(), t)
}

/// The same moments by the trapezoid rule on `|w| = 1`.
///
/// Agrees with [`forward_moments`] when the origin lies inside the curve.
pub fn forward_moments_quadrature(curve: &PolynomialCurve, grid: &ContourGrid) -> Result<HarmonicMoments> {
    curve.require_certified()?;
    grid.ensure_resolves(curve.degree())?;
    let n = curve.degree();
    let m = grid.len() as f64;
    let mut t0 = Complex64::new(0.0, 0.0);
    let mut t = vec![Complex64::new(0.0, 0.0); n + 1];
    for &w in grid.nodes() {
        // dw = i w dtheta cancels the 1/(2 pi i)
        let base = curve.reflected(w) * curve.dh(w) * w;
        t0 += base;
        let h_inv = curve.h(w).inv();
        let mut pow = h_inv;
        for (j, tj) in t.iter_mut().enumerate() {
            *tj += base * pow / (j + 1) as f64;
            pow *= h_inv;
        }
    }
    let t: Vec<Complex64> = t.into_iter().map(|v| v / m).collect();
    let t0 = t0.re / m;
    if t.iter().any(|c| !c.is_finite()) || !t0.is_finite() {
        return Err(Error::Precision("non-finite quadrature value".into()));
    }
    HarmonicMoments::new(t0, t)
}

/// First-order expansion in `rho = r^2` using `alpha_j = a_j / r^j`:
/// `t_j = conj(alpha_{j-1})/j - conj(alpha_j) alpha_0 - (1 + 1/j) alpha_1 conj(alpha_{j+1}) rho`,
/// with `t_0 = rho (1 - |alpha_1|^2)`.
pub fn leading_order_moments(curve: &PolynomialCurve) -> HarmonicMoments {
    let alpha = curve.scaled_coefficients();
    let rho = curve.r() * curve.r();
    let n = curve.degree();
    let al = |k: usize| alpha.get(k).copied().unwrap_or_default();
    let t = (1..=n + 1)
        .map(|j| {
            let jf = j as f64;
            al(j - 1).conj() / jf - al(j).conj() * al(0) - (1.0 + 1.0 / jf) * al(1) * al(j + 1).conj() * rho
        })
        .collect();
    HarmonicMoments {
        t0: rho * (1.0 - al(1).norm_sqr()),
        t,
    }
}

/// Translates the curve (adjusts `a_0`) so that `t_1 = 0`.
pub fn center_curve(curve: &PolynomialCurve) -> Result<PolynomialCurve> {
    curve.require_certified()?;
    let a = curve.coefficients().to_vec();
    let r = curve.r();
    let sol = damped_newton(
        &[a[0].re, a[0].im],
        |x| {
            let mut coeffs: Vec<Dual> = a.iter().map(|&c| Dual::constant(c)).collect();
            coeffs[0] = Dual::constant(Complex64::new(0.0, 0.0)) + x[0].clone() + x[1].clone() * Dual::constant(Complex64::i());
            let t1 = exact_moments(&Dual::real(r), &coeffs).swap_remove(0);
            Some(vec![t1.re(), t1.im()])
        },
        NewtonOptions {
            tolerance: 1e-14 * (1.0 + r * r),
            ..NewtonOptions::default()
        },
    )?;
    let mut out = a;
    out[0] = Complex64::new(sol[0], sol[1]);
    PolynomialCurve::new(r, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn curve(r: f64, a: &[(f64, f64)]) -> PolynomialCurve {
        PolynomialCurve::new(r, a.iter().map(|&(x, y)| c(x, y)).collect()).unwrap()
    }

    #[test]
    fn circle_moments_vanish() {
        let m = forward_moments(&PolynomialCurve::circle(1.0).unwrap()).unwrap();
        assert_eq!(m.t0, 1.0);
        assert!(m.t.iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn ellipse_moments() {
        let e = curve(1.0, &[(0.0, 0.0), (0.5, 0.0)]);
        let m = forward_moments(&e).unwrap();
        assert!((m.t0 - 0.75).abs() < 1e-15);
        assert!(m.get(1).norm() < 1e-15);
        assert!((m.get(2) - 0.25).norm() < 1e-15);

        let q = forward_moments_quadrature(&e, &ContourGrid::for_moments_of(&e)).unwrap();
        assert!((q.get(2) - 0.25).norm() < 1e-12);
        assert!((q.t0 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn degree_two_moments() {
        let m = forward_moments(&curve(1.0, &[(0.0, 0.0), (0.0, 0.0), (0.3, 0.0)])).unwrap();
        assert!((m.t0 - 0.82).abs() < 1e-15);
        assert!(m.get(1).norm() < 1e-15 && m.get(2).norm() < 1e-15);
        assert!((m.get(3) - 0.1).norm() < 1e-15);
    }

    #[test]
    fn conjugation_convention() {
        // t_2 = conj(a_1) / (2 r) for the ellipse family
        let m = forward_moments(&curve(2.0, &[(0.0, 0.0), (0.4, 0.3)])).unwrap();
        assert!((m.get(2) - c(0.1, -0.075)).norm() < 1e-15);
    }

    #[test]
    fn uncertified_rejected() {
        let bad = curve(1.0, &[(0.0, 0.0), (0.0, 0.0), (0.6, 0.0)]);
        assert!(matches!(forward_moments(&bad), Err(Error::Uncertified { .. })));
        assert!(forward_moments_quadrature(&bad, &ContourGrid::for_moments(2)).is_err());
    }

    #[test]
    fn quadrature_grid_must_resolve_degree() {
        let e = curve(1.0, &[(0.0, 0.0), (0.1, 0.0), (0.0, 0.0), (0.0, 0.05)]);
        assert!(matches!(
            forward_moments_quadrature(&e, &ContourGrid::new(16).unwrap()),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn leading_order_examples() {
        let at_zero = curve(1e-9, &[(0.0, 0.0), (0.3e-9, 0.1e-9)]);
        assert!((leading_order_moments(&at_zero).get(2) - c(0.15, -0.05)).norm() < 1e-12);

        let small = curve(0.1, &[(0.0, 0.0), (0.005, 0.0)]);
        let lo = leading_order_moments(&small);
        assert!((lo.get(2) - 0.025).norm() < 1e-15);
        assert!(lo.max_difference(&forward_moments(&small).unwrap()) < 1e-4);

        let circle = leading_order_moments(&PolynomialCurve::circle(1.0).unwrap());
        assert!(circle.t.iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn leading_order_error_is_second_order() {
        let alpha = [c(0.0, 0.0), c(0.3, 0.1), c(0.2, -0.1), c(0.1, 0.05)];
        let err = |rho: f64| {
            let cv = PolynomialCurve::from_scaled(rho, &alpha).unwrap();
            let lo = leading_order_moments(&cv);
            let ex = forward_moments(&cv).unwrap();
            (1..=4).map(|j| (lo.get(j) - ex.get(j)).norm()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-2), err(1e-3));
        assert!(e1 < 10.0 * 1e-4, "{e1}");
        assert!(e2 < e1 / 50.0, "{e1} {e2}");
    }

    #[test]
    fn centering_zeroes_t1() {
        let cv = curve(1.0, &[(0.2, -0.1), (0.3, 0.1), (0.1, 0.05)]);
        let centered = center_curve(&cv).unwrap();
        let m = forward_moments(&centered).unwrap();
        assert!(m.get(1).norm() < 1e-13);
        assert_eq!(&centered.coefficients()[1..], &cv.coefficients()[1..]);
    }
}
