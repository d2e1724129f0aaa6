//! One-dimensional Schrödinger problems on a single edge.
//!
//! For a potential `q` on `[0, 1]` and a real spectral parameter `lambda`, the
//! solutions `S` and `C` of `-y'' + q y = lambda y` with `S(0) = 0, S'(0) = 1`
//! and `C(0) = 1, C'(0) = 0` are integrated to `z = 1`. `S(1, lambda)` is the
//! characteristic function whose zeros form the Dirichlet spectrum, and
//! `S'(1) / S(1)` is the Weyl function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bracketed_root, cos_sqrt, sinc_sqrt, sqrt_sin_sqrt, EPS_DEN};

/// Minimum number of integration steps on `[0, 1]`.
pub const MIN_STEPS: usize = 2048;

/// Steps per unit of local frequency `sqrt(|lambda| + |q|)`.
const STEPS_PER_RADIAN: f64 = 400.0;

/// Absolute tolerance for refined eigenvalues.
pub const TAU_ROOT: f64 = 1e-11;

/// A real potential on `[0, 1]` with `q(z) = q(1 - z)`.
///
/// Represented as `c0 + sum_m c[m-1] cos(2 pi m z)`, or by dense samples on a
/// uniform grid (linearly interpolated) when constructed with
/// [`SymmetricPotential::from_samples`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPotential {
    pub c0: f64,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<f64>>,
}

impl Default for SymmetricPotential {
    fn default() -> Self {
        Self::zero()
    }
}

impl SymmetricPotential {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c0: f64) -> Self {
        Self::new(c0, Vec::new())
    }

    pub fn new(c0: f64, c: Vec<f64>) -> Self {
        Self {
            c0,
            c,
            samples: None,
        }
    }

    /// `[c0, c1, ..., c_M]` as a single vector.
    pub fn from_coefficients(coeffs: &[f64]) -> Self {
        match coeffs.split_first() {
            Some((&c0, rest)) => Self::new(c0, rest.to_vec()),
            None => Self::zero(),
        }
    }

    /// Potential given by samples `q(j / (n - 1))`, `j = 0..n`. The samples
    /// must be symmetric about the midpoint.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Schema("need at least two potential samples".into()));
        }
        let scale = samples.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let asym = samples
            .iter()
            .zip(samples.iter().rev())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if asym > 1e-12 * scale || samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Schema("potential samples are not symmetric".into()));
        }
        let n = samples.len() as f64 - 1.0;
        let mean = samples
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) / n)
            .sum::<f64>();
        Ok(Self {
            c0: mean,
            c: Vec::new(),
            samples: Some(samples),
        })
    }

    pub fn samples(&self) -> Option<&[f64]> {
        self.samples.as_deref()
    }

    /// Number of cosine modes beyond the constant.
    pub fn basis_dim(&self) -> usize {
        self.c.len()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        std::iter::once(self.c0).chain(self.c.iter().copied()).collect()
    }

    pub fn is_zero(&self) -> bool {
        match &self.samples {
            Some(s) => s.iter().all(|&x| x == 0.0),
            None => self.c0 == 0.0 && self.c.iter().all(|&x| x == 0.0),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match &self.samples {
            Some(s) => {
                let n = s.len() - 1;
                let t = (z.clamp(0.0, 1.0) * n as f64).min(n as f64);
                let j = (t.floor() as usize).min(n - 1);
                let f = t - j as f64;
                s[j] * (1.0 - f) + s[j + 1] * f
            }
            None => {
                // cos(m t) by the Chebyshev recurrence
                let c1 = (2.0 * PI * z).cos();
                let (mut prev, mut cur) = (1.0, c1);
                let mut acc = self.c0;
                for &cm in &self.c {
                    acc += cm * cur;
                    (prev, cur) = (cur, 2.0 * c1 * cur - prev);
                }
                acc
            }
        }
    }

    /// `||q||_{L^2(0,1)}`.
    pub fn l2_norm(&self) -> f64 {
        match &self.samples {
            Some(_) => quadrature(|z| self.eval(z).powi(2)).sqrt(),
            None => (self.c0 * self.c0 + 0.5 * self.c.iter().map(|x| x * x).sum::<f64>()).sqrt(),
        }
    }

    /// An upper bound on `sup |q|`.
    pub fn sup_bound(&self) -> f64 {
        match &self.samples {
            Some(s) => s.iter().fold(0.0, |m, x| m.max(x.abs())),
            None => self.c0.abs() + self.c.iter().map(|x| x.abs()).sum::<f64>(),
        }
    }

    /// `||self - other||_{L^2(0,1)}`.
    pub fn l2_distance(&self, other: &SymmetricPotential) -> f64 {
        if self.samples.is_none() && other.samples.is_none() {
            let len = self.c.len().max(other.c.len());
            let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
            let modes: f64 = (0..len)
                .map(|i| (get(&self.c, i) - get(&other.c, i)).powi(2))
                .sum();
            ((self.c0 - other.c0).powi(2) + 0.5 * modes).sqrt()
        } else {
            quadrature(|z| (self.eval(z) - other.eval(z)).powi(2)).sqrt()
        }
    }
}

/// Composite Simpson rule on `[0, 1]` with 2000 panels.
fn quadrature<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for j in 1..n {
        s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
    }
    s * h / 3.0
}

/// Endpoint values of `S` and `C` at `z = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCharData {
    pub lambda: f64,
    /// `S(1, lambda)`
    pub s1: f64,
    /// `S'(1, lambda)`
    pub ds1: f64,
    /// `C(1, lambda)`
    pub c1: f64,
    /// `C'(1, lambda)`
    pub dc1: f64,
}

impl EdgeCharData {
    /// Closed form for the zero potential.
    pub fn free(lambda: f64) -> Self {
        Self {
            lambda,
            s1: sinc_sqrt(lambda),
            ds1: cos_sqrt(lambda),
            c1: cos_sqrt(lambda),
            dc1: -sqrt_sin_sqrt(lambda),
        }
    }

    /// `|S C' - C S' + 1|`; the Wronskian of `S` and `C` is `-1`.
    pub fn wronskian_residual(&self) -> f64 {
        (self.s1 * self.dc1 - self.c1 * self.ds1 + 1.0).abs()
    }

    /// `|C(1) - S'(1)|`, zero for symmetric potentials.
    pub fn symmetry_residual(&self) -> f64 {
        (self.c1 - self.ds1).abs()
    }

    pub fn weyl(&self) -> Result<f64> {
        if self.s1.abs() <= EPS_DEN {
            return Err(Error::NearEigenvalue {
                lambda: self.lambda,
                psi: self.s1,
            });
        }
        Ok(self.ds1 / self.s1)
    }
}

fn step_count(q: &SymmetricPotential, lambda: f64) -> usize {
    let omega = (lambda.abs() + q.sup_bound()).max(1.0).sqrt();
    MIN_STEPS.max((STEPS_PER_RADIAN * omega).ceil() as usize)
}

/// Integrates `S` and `C` from 0 to 1 with classical RK4.
pub fn shoot(q: &SymmetricPotential, lambda: f64) -> Result<EdgeCharData> {
    let n = step_count(q, lambda);
    let h = 1.0 / n as f64;
    // potential minus lambda at every half step
    let w: Vec<f64> = (0..=2 * n)
        .map(|j| q.eval(j as f64 * 0.5 * h) - lambda)
        .collect();

    // columns (S, S') and (C, C')
    let mut s = [0.0, 1.0];
    let mut c = [1.0, 0.0];
    for j in 0..n {
        let (w0, wm, w1) = (w[2 * j], w[2 * j + 1], w[2 * j + 2]);
        s = rk4_step(s, h, w0, wm, w1);
        c = rk4_step(c, h, w0, wm, w1);
    }
    if !(s.iter().chain(&c).all(|x| x.is_finite())) {
        return Err(Error::IntegrationFailure { lambda });
    }
    Ok(EdgeCharData {
        lambda,
        s1: s[0],
        ds1: s[1],
        c1: c[0],
        dc1: c[1],
    })
}

#[inline]
fn rk4_step(y: [f64; 2], h: f64, w0: f64, wm: f64, w1: f64) -> [f64; 2] {
    let k1 = [y[1], w0 * y[0]];
    let y2 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]];
    let k2 = [y2[1], wm * y2[0]];
    let y3 = [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]];
    let k3 = [y3[1], wm * y3[0]];
    let y4 = [y[0] + h * k3[0], y[1] + h * k3[1]];
    let k4 = [y4[1], w1 * y4[0]];
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// `psi(1, lambda) = S(1, lambda)`; the same from either end of a symmetric edge.
pub fn char_psi(q: &SymmetricPotential, lambda: f64) -> Result<f64> {
    Ok(shoot(q, lambda)?.s1)
}

/// Weyl function `psi'(1, lambda) / psi(1, lambda)`.
pub fn weyl(q: &SymmetricPotential, lambda: f64) -> Result<f64> {
    shoot(q, lambda)?.weyl()
}

/// Upper end of the eigenvalue scan window for `count` eigenvalues.
pub fn scan_upper(q: &SymmetricPotential, count: usize) -> f64 {
    ((count + 2) as f64 * PI).powi(2) + q.c0 + q.l2_norm()
}

/// The first `count` Dirichlet eigenvalues of `-d^2/dz^2 + q` on `(0, 1)`.
pub fn dirichlet_eigenvalues(q: &SymmetricPotential, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Schema("eigenvalue count must be positive".into()));
    }
    let lo = (-q.sup_bound()).min(0.0) - 1.0;
    let hi = scan_upper(q, count);
    let step = PI * PI / 4.0;

    let mut out = Vec::with_capacity(count);
    let mut a = lo;
    let mut fa = char_psi(q, a)?;
    while out.len() < count && a < hi {
        let b = (a + step).min(hi);
        let fb = char_psi(q, b)?;
        if fb == 0.0 {
            out.push(b);
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            let mut failure = None;
            let root = bracketed_root(
                |x| match char_psi(q, x) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                },
                a,
                b,
                TAU_ROOT,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            out.push(root?);
        }
        a = b;
        fa = fb;
    }
    if out.len() < count {
        return Err(Error::WindowExhausted {
            found: out.len(),
            wanted: count,
            upper: hi,
        });
    }
    Ok(out)
}
