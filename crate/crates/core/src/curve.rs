//! Polynomial curves given by their exterior Riemann map
//! `h(w) = r w + a_0 + a_1/w + ... + a_n/w^n`, and the geometry derived from it.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Relative tolerance (times `r`) for boundary-ambiguity decisions.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Minimum polyline resolution for geometric tests.
pub const GEOMETRY_NODES: usize = 512;

/// A closed polynomial curve of degree `n = a.len() - 1`.
///
/// `a_n` may vanish, so the stored degree is an upper bound. Curves with a
/// non-positive simplicity margin can be represented but are not certified.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCurve {
    r: f64,
    a: Vec<Complex64>,
}

impl PolynomialCurve {
    /// `a` holds `a_0..a_n`; an empty list is the circle of radius `r`.
    pub fn new(r: f64, a: Vec<Complex64>) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Validation(format!("leading radius must be positive, got {r}")));
        }
        if a.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("coefficients must be finite".into()));
        }
        let a = if a.is_empty() { vec![Complex64::new(0.0, 0.0)] } else { a };
        Ok(PolynomialCurve { r, a })
    }

    pub fn circle(r: f64) -> Result<Self> {
        Self::new(r, Vec::new())
    }

    /// Builds `h` from `rho = r^2` and scaled coefficients `alpha_j = a_j / r^j`.
    pub fn from_scaled(rho: f64, alpha: &[Complex64]) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Validation(format!("rho must be positive, got {rho}")));
        }
        let r = rho.sqrt();
        let a = alpha
            .iter()
            .enumerate()
            .map(|(j, al)| al * r.powi(j as i32))
            .collect();
        Self::new(r, a)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.a
    }

    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// `alpha_j = a_j / r^j`.
    pub fn scaled_coefficients(&self) -> Vec<Complex64> {
        self.a
            .iter()
            .enumerate()
            .map(|(j, a)| a / self.r.powi(j as i32))
            .collect()
    }

    pub fn evaluate(&self, w: Complex64) -> Result<Complex64> {
        if w.norm() == 0.0 {
            return Err(Error::Domain("h(w) is undefined at w = 0".into()));
        }
        Ok(self.h(w))
    }

    pub fn derivative(&self, w: Complex64) -> Result<Complex64> {
        if w.norm() == 0.0 {
            return Err(Error::Domain("h'(w) is undefined at w = 0".into()));
        }
        Ok(self.dh(w))
    }

    pub(crate) fn h(&self, w: Complex64) -> Complex64 {
        let inv = w.inv();
        // a_0 + a_1 x + ... + a_n x^n with x = 1/w
        let tail = self.a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * inv + c);
        self.r * w + tail
    }

    pub(crate) fn dh(&self, w: Complex64) -> Complex64 {
        let inv = w.inv();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in self.a.iter().enumerate().skip(1).rev() {
            acc = acc * inv + c * (j as f64);
        }
        // sum_j j a_j w^{-(j+1)} = x^2 * sum_j j a_j x^{j-1}
        self.r - acc * inv * inv
    }

    /// `conj(h)(1/w) = r/w + conj(a_0) + conj(a_1) w + ... + conj(a_n) w^n`,
    /// which equals `conj(h(w))` on the unit circle.
    pub(crate) fn reflected(&self, w: Complex64) -> Complex64 {
        let poly = self
            .a
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c.conj());
        self.r / w + poly
    }

    /// `xi = r - sum_j j |a_j|`; positive values certify that `h` is a Riemann map.
    pub fn simplicity_margin(&self) -> f64 {
        self.r
            - self
                .a
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| j as f64 * c.norm())
                .sum::<f64>()
    }

    /// `t_0 = r^2 - sum_j j |a_j|^2`, the interior area divided by pi.
    pub fn area_t0(&self) -> f64 {
        self.r * self.r
            - self
                .a
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| j as f64 * c.norm_sqr())
                .sum::<f64>()
    }

    pub fn is_certified(&self) -> bool {
        self.simplicity_margin() > 0.0
    }

    pub(crate) fn require_certified(&self) -> Result<()> {
        let xi = self.simplicity_margin();
        if xi > 0.0 {
            Ok(())
        } else {
            Err(Error::Uncertified { xi })
        }
    }

    /// Images of the grid nodes.
    pub fn sample(&self, grid: &ContourGrid) -> Vec<Complex64> {
        grid.nodes().iter().map(|&w| self.h(w)).collect()
    }

    pub fn polyline(&self, grid: &ContourGrid) -> Polyline {
        Polyline::new(self.sample(grid), BOUNDARY_TOLERANCE * self.r)
    }

    /// Sampled check of `|h(w_i) - h(w_j)| >= xi |w_i - w_j|` for certified
    /// curves plus a pairwise segment-intersection scan of the boundary
    /// polyline; false means the curve was seen to self-intersect.
    pub fn injectivity_check(&self, grid: &ContourGrid) -> bool {
        let pts = self.sample(grid);
        let nodes = grid.nodes();
        let xi = self.simplicity_margin();
        let tol = BOUNDARY_TOLERANCE * self.r;
        if xi > 0.0 {
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    if (pts[i] - pts[j]).norm() < xi * (nodes[i] - nodes[j]).norm() - tol {
                        return false;
                    }
                }
            }
        }
        !polyline_self_intersects(&pts)
    }

    /// True iff the boundary polyline winds once around `z`.
    pub fn contains_point(&self, z: Complex64, grid: &ContourGrid) -> Result<bool> {
        self.require_certified()?;
        self.polyline(grid).winding_number(z).map(|w| w == 1)
    }

    /// Largest distance from a sampled boundary point to the segment `[-2r, 2r]`.
    pub fn slit_limit_distance(&self, grid: &ContourGrid) -> f64 {
        let half = 2.0 * self.r;
        self.sample(grid)
            .iter()
            .map(|p| (p.re.abs() - half).max(0.0).hypot(p.im))
            .fold(0.0, f64::max)
    }

    /// Largest `|h(w)|` on the grid.
    pub fn max_modulus(&self, grid: &ContourGrid) -> f64 {
        self.sample(grid).iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Trapezoid nodes `w_k = exp(2 pi i k / m)` on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    nodes: Vec<Complex64>,
}

impl ContourGrid {
    /// `m` must be a power of two, at least 4.
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::Validation(format!("grid size must be a power of two >= 4, got {m}")));
        }
        let nodes = (0..m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Ok(ContourGrid { nodes })
    }

    /// `max(4(n+2), 512)` nodes, for polyline-based geometry.
    pub fn for_geometry(degree: usize) -> Self {
        let m = (4 * (degree + 2)).max(GEOMETRY_NODES).next_power_of_two();
        Self::new(m).expect("power of two")
    }

    /// `16(n+2)` nodes rounded up to a power of two, for moment quadrature.
    pub fn for_moments(degree: usize) -> Self {
        Self::new((16 * (degree + 2)).next_power_of_two()).expect("power of two")
    }

    /// At least [`ContourGrid::for_moments`], enlarged until the aliasing
    /// error of `h^{-j}` (governed by the largest zero `|w_0| < 1` of `h`)
    /// falls below `1e-16`.
    pub fn for_moments_of(curve: &PolynomialCurve) -> Self {
        let base = Self::for_moments(curve.degree());
        let mut p = vec![Complex64::new(curve.r(), 0.0)];
        p.extend_from_slice(curve.coefficients());
        let zero_radius = crate::poly::roots(&p).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(zero_radius > 0.0 && zero_radius < 1.0) {
            return base;
        }
        let needed = (16.0 * std::f64::consts::LN_10 / -zero_radius.ln()).ceil();
        if needed <= base.len() as f64 {
            return base;
        }
        let m = (needed.min(1048576.0) as usize).next_power_of_two();
        Self::new(m).expect("power of two")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    /// Errors unless `m >= 4(n+2)`.
    pub fn ensure_resolves(&self, degree: usize) -> Result<()> {
        let required = 4 * (degree + 2);
        if self.len() < required {
            return Err(Error::GridTooSmall {
                nodes: self.len(),
                degree,
                required,
            });
        }
        Ok(())
    }
}

/// A closed polygon with a horizontal band index for fast winding queries.
#[derive(Debug, Clone)]
pub struct Polyline {
    points: Vec<Complex64>,
    tolerance: f64,
    y_min: f64,
    band_height: f64,
    bands: Vec<Vec<usize>>,
}

impl Polyline {
    pub fn new(points: Vec<Complex64>, tolerance: f64) -> Self {
        let m = points.len();
        let y_min = points.iter().map(|p| p.im).fold(f64::INFINITY, f64::min) - tolerance;
        let y_max = points.iter().map(|p| p.im).fold(f64::NEG_INFINITY, f64::max) + tolerance;
        let n_bands = (m / 2).max(1);
        let band_height = ((y_max - y_min) / n_bands as f64).max(f64::MIN_POSITIVE);
        let mut bands = vec![Vec::new(); n_bands];
        for i in 0..m {
            let (p, q) = (points[i], points[(i + 1) % m]);
            let lo = p.im.min(q.im) - tolerance;
            let hi = p.im.max(q.im) + tolerance;
            let b0 = (((lo - y_min) / band_height).floor().max(0.0) as usize).min(n_bands - 1);
            let b1 = (((hi - y_min) / band_height).floor().max(0.0) as usize).min(n_bands - 1);
            for band in &mut bands[b0..=b1] {
                band.push(i);
            }
        }
        Polyline {
            points,
            tolerance,
            y_min,
            band_height,
            bands,
        }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Winding number of the polygon around `z`; errors when `z` is within
    /// tolerance of an edge.
    pub fn winding_number(&self, z: Complex64) -> Result<i32> {
        let rel = (z.im - self.y_min) / self.band_height;
        if !(rel >= 0.0 && rel < self.bands.len() as f64) {
            return Ok(0);
        }
        let m = self.points.len();
        let mut wn = 0;
        for &i in &self.bands[rel as usize] {
            let (p, q) = (self.points[i], self.points[(i + 1) % m]);
            if segment_distance(z, p, q) <= self.tolerance {
                return Err(Error::BoundaryAmbiguous { re: z.re, im: z.im });
            }
            let side = cross(q - p, z - p);
            if p.im <= z.im {
                if q.im > z.im && side > 0.0 {
                    wn += 1;
                }
            } else if q.im <= z.im && side < 0.0 {
                wn -= 1;
            }
        }
        Ok(wn)
    }
}

fn cross(u: Complex64, v: Complex64) -> f64 {
    u.re * v.im - u.im * v.re
}

fn segment_distance(z: Complex64, p: Complex64, q: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - p).norm();
    }
    let t = (((z - p) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (p + d * t)).norm()
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    if p1.re.max(p2.re) < q1.re.min(q2.re)
        || q1.re.max(q2.re) < p1.re.min(p2.re)
        || p1.im.max(p2.im) < q1.im.min(q2.im)
        || q1.im.max(q2.im) < p1.im.min(p2.im)
    {
        return false;
    }
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

fn polyline_self_intersects(pts: &[Complex64]) -> bool {
    let m = pts.len();
    for i in 0..m {
        let (p1, p2) = (pts[i], pts[(i + 1) % m]);
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            if segments_cross(p1, p2, pts[j], pts[(j + 1) % m]) {
                return true;
            }
        }
    }
    false
}
