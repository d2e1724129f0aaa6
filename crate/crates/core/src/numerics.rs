//! Small numerical kernels shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Denominator guard used throughout.
pub const EPS_DEN: f64 = 1e-8;

/// Condition-number ceiling for dense solves.
pub const KAPPA_MAX: f64 = 1e12;

/// `sin(sqrt(lambda)) / sqrt(lambda)`, continued through `lambda <= 0`.
pub fn sinc_sqrt(lambda: f64) -> f64 {
    if lambda.abs() < 1e-8 {
        1.0 - lambda / 6.0
    } else if lambda > 0.0 {
        let s = lambda.sqrt();
        s.sin() / s
    } else {
        let s = (-lambda).sqrt();
        s.sinh() / s
    }
}

/// `cos(sqrt(lambda))`, continued through `lambda <= 0`.
pub fn cos_sqrt(lambda: f64) -> f64 {
    if lambda >= 0.0 {
        lambda.sqrt().cos()
    } else {
        (-lambda).sqrt().cosh()
    }
}

/// `sqrt(lambda) * sin(sqrt(lambda))`, i.e. minus the derivative of `cos(sqrt(lambda) z)` at 1.
pub fn sqrt_sin_sqrt(lambda: f64) -> f64 {
    if lambda >= 0.0 {
        let s = lambda.sqrt();
        s * s.sin()
    } else {
        let s = (-lambda).sqrt();
        -s * s.sinh()
    }
}

/// Root of `f` in a sign-changing bracket `[a, b]` (Brent-Dekker).
///
/// One evaluation per iteration; stops once the bracket is narrower than `tol`.
pub fn bracketed_root<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Uninformative(format!("no sign change on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
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
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when only two points
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Uninformative(format!("non-finite value at {b}")));
        }
    }
    Ok(b)
}

/// Value at `x` of the Lagrange polynomial through `(xs, ys)` (barycentric form).
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let weights = barycentric_weights(xs);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xi, &yi), &wi) in xs.iter().zip(ys).zip(&weights) {
        let d = x - xi;
        if d == 0.0 {
            return yi;
        }
        let t = wi / d;
        num += t * yi;
        den += t;
    }
    num / den
}

/// Barycentric weights for arbitrary distinct nodes.
pub fn barycentric_weights(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let p: f64 = xs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| xi - xj)
                .product();
            1.0 / p
        })
        .collect()
}

/// Indices of the `count` entries of the ascending slice `xs` nearest to `x`.
pub fn nearest_window(xs: &[f64], x: f64, count: usize) -> std::ops::Range<usize> {
    let count = count.min(xs.len());
    let pos = xs.partition_point(|&v| v < x);
    let mut lo = pos.saturating_sub(count / 2);
    if lo + count > xs.len() {
        lo = xs.len() - count;
    }
    lo..lo + count
}

/// LU factorization of a square matrix together with its 1-norm condition number.
#[derive(Debug, Clone)]
pub struct Factored {
    inverse: DMatrix<f64>,
    cond: f64,
}

impl Factored {
    /// Factors `a`; fails when the matrix is singular or `cond > kappa_max`.
    pub fn new(a: &DMatrix<f64>, kappa_max: f64) -> Result<Self> {
        let norm = one_norm(a);
        let inverse = a
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
        let cond = norm * one_norm(&inverse);
        if !cond.is_finite() || cond > kappa_max {
            return Err(Error::IllConditioned { cond });
        }
        Ok(Self { inverse, cond })
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.inverse * b
    }

    pub fn solve_many(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        &self.inverse * b
    }
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cosine_root() {
        let r = bracketed_root(|x: f64| x.cos(), 1.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_non_bracket() {
        assert!(bracketed_root(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let xs = [0.0, 0.5, 1.3, 2.0];
        let f = |x: f64| 2.0 * x * x * x - x + 3.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for x in [0.1, 0.77, 1.9, 2.5] {
            assert!((lagrange_eval(&xs, &ys, x) - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn sinc_sqrt_branches() {
        assert!((sinc_sqrt(1.0) - 1f64.sin()).abs() < 1e-15);
        assert!((sinc_sqrt(-4.0) - 2f64.sinh() / 2.0).abs() < 1e-15);
        assert!((sinc_sqrt(1e-12) - 1.0).abs() < 1e-12);
        assert!((cos_sqrt(-1.0) - 1f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn window_clamps_at_ends() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(nearest_window(&xs, -3.0, 4), 0..4);
        assert_eq!(nearest_window(&xs, 4.2, 4), 3..7);
        assert_eq!(nearest_window(&xs, 40.0, 4), 6..10);
    }

    #[test]
    fn factored_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(Factored::new(&a, KAPPA_MAX).is_err());
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let f = Factored::new(&b, KAPPA_MAX).unwrap();
        let x = f.solve(&DVector::from_vec(vec![3.0, 4.0]));
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
