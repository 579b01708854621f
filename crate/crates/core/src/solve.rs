//! Damped Newton on real unknowns with exact Jacobians, and a bracketing
//! scalar root finder.

use crate::dual::Dual;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 50,
            tolerance: 1e-12,
            max_halvings: 40,
        }
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `residual(x) = 0`. The residual receives its arguments as duals and
/// must return real-valued duals; `None` marks an infeasible trial point.
pub(crate) fn damped_newton<F>(x0: &[f64], residual: F, opts: NewtonOptions) -> Result<Vec<f64>>
where
    F: Fn(&[Dual]) -> Option<Vec<Dual>>,
{
    let dim = x0.len();
    let values = |x: &[f64]| -> Option<Vec<f64>> {
        let args: Vec<Dual> = x.iter().map(|&xi| Dual::real_value(xi)).collect();
        residual(&args).map(|r| r.iter().map(|d| d.v.re).collect())
    };

    let mut x = x0.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..=opts.max_iterations {
        let args: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| Dual::variable(xi, i, dim))
            .collect();
        let res = residual(&args).ok_or_else(|| Error::Domain("newton start point infeasible".into()))?;
        if res.len() != dim {
            return Err(Error::Validation(format!(
                "newton system is not square ({} equations, {} unknowns)",
                res.len(),
                dim
            )));
        }
        let f: Vec<f64> = res.iter().map(|d| d.v.re).collect();
        last = norm_inf(&f);
        if !last.is_finite() {
            break;
        }
        let jac = DMatrix::from_fn(dim, dim, |i, j| res[i].d.get(j).map_or(0.0, |t| t.re));
        let rhs = DVector::from_iterator(dim, f.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs);
        if last <= opts.tolerance {
            // one more full step usually lands at round-off level
            if let Some(step) = step {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if values(&trial).is_some_and(|ft| norm_inf(&ft) <= last) {
                    return Ok(trial);
                }
            }
            return Ok(x);
        }
        let Some(step) = step else { break };

        let f_norm = norm2(&f);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            if let Some(ft) = values(&trial) {
                let n = norm2(&ft);
                if n.is_finite() && (n < f_norm || norm_inf(&ft) <= opts.tolerance) {
                    x = trial;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: last,
    })
}

/// Brent's method on `[a, b]`; `f(a)` and `f(b)` must differ in sign.
pub(crate) fn brent<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::OutOfRegime("root is not bracketed".into()));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: fb.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Scalar;

    #[test]
    fn newton_solves_nonlinear_pair() {
        // x^2 + y^2 = 4, x = y  ->  x = y = sqrt(2)
        let sol = damped_newton(
            &[1.0, 0.5],
            |x| {
                let (a, b) = (x[0].clone(), x[1].clone());
                Some(vec![a.clone() * a.clone() + b.clone() * b.clone() - Dual::real(4.0), a - b])
            },
            NewtonOptions::default(),
        )
        .unwrap();
        assert!((sol[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((sol[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_non_convergence() {
        // x^2 + 1 = 0 has no real root
        let r = damped_newton(
            &[0.3],
            |x| Some(vec![x[0].clone() * x[0].clone() + Dual::real(1.0)]),
            NewtonOptions::default(),
        );
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn brent_finds_cubic_root() {
        let root = brent(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((root - 2f64.cbrt()).abs() < 1e-14);
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 100).is_err());
    }
}
