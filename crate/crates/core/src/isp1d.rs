//! Inverse Sturm–Liouville problems for symmetric potentials.
//!
//! A symmetric potential is determined by its Dirichlet spectrum, and any
//! potential by its Weyl function. Both recoveries are posed as nonlinear
//! least squares over the cosine basis and solved by Gauss–Newton with a
//! finite-difference Jacobian against the forward solver.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::edge_ode::{char_psi, dirichlet_eigenvalues, weyl, SymmetricPotential};
use crate::error::{Error, Result};
use crate::numerics::{bracketed_root, cos_sqrt, lagrange_eval, nearest_window, sinc_sqrt};

/// Squared-residual target of the fits.
pub const TAU_FIT: f64 = 1e-10;

pub const MAX_ITERATIONS: usize = 50;

/// Weyl samples with larger magnitude are treated as near a pole and dropped.
pub const M_CAP: f64 = 200.0;

const FD_STEP: f64 = 1e-6;

/// The first Dirichlet eigenvalues of an unknown potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTarget {
    pub eigs: Vec<f64>,
}

impl SpectrumTarget {
    pub fn new(eigs: Vec<f64>) -> Result<Self> {
        if eigs.is_empty() || eigs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema("eigenvalues must be strictly ascending".into()));
        }
        Ok(Self { eigs })
    }
}

/// Samples `(lambda, m(lambda))` of a Weyl function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylTarget {
    pub samples: Vec<(f64, f64)>,
}

impl WeylTarget {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        let mut lams: Vec<f64> = samples.iter().map(|s| s.0).collect();
        lams.sort_by(f64::total_cmp);
        if lams.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("Weyl sample points must be distinct".into()));
        }
        Ok(Self { samples })
    }
}

/// Outcome of a fit that converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub potential: SymmetricPotential,
    /// Sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
}

/// Gauss–Newton with step halving on the coefficient vector.
fn gauss_newton<F>(mut residuals: F, start: Vec<f64>) -> Result<Fit>
where
    F: FnMut(&[f64], Option<&[f64]>) -> Result<Vec<f64>>,
{
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut p = start;
    let mut r = residuals(&p, None)?;
    let mut cost = sq(&r);
    for it in 0..MAX_ITERATIONS {
        if cost <= TAU_FIT {
            return Ok(done(p, cost, it));
        }
        let mut jac = DMatrix::zeros(r.len(), p.len());
        for k in 0..p.len() {
            let mut pk = p.clone();
            let h = FD_STEP * (1.0 + p[k].abs());
            pk[k] += h;
            let rk = residuals(&pk, Some(&r))?;
            for (i, (a, b)) in rk.iter().zip(&r).enumerate() {
                jac[(i, k)] = (a - b) / h;
            }
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = jac
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Uninformative(e.to_string()))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            if let Ok(rt) = residuals(&trial, None) {
                let ct = sq(&rt);
                if ct < cost {
                    let moved = scale * step.norm();
                    p = trial;
                    r = rt;
                    let gain = cost - ct;
                    cost = ct;
                    accepted = true;
                    // stationary: the data cannot be matched any better
                    if moved <= 1e-10 * (1.0 + norm(&p)) || gain <= 1e-14 * cost {
                        return Ok(done(p, cost, it + 1));
                    }
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            if step.norm() <= 1e-8 * (1.0 + norm(&p)) {
                return Ok(done(p, cost, it + 1));
            }
            return Err(Error::NonConvergence {
                residual: cost,
                iterations: it + 1,
                best: Box::new(SymmetricPotential::from_coefficients(&p)),
            });
        }
    }
    if cost <= TAU_FIT {
        return Ok(done(p, cost, MAX_ITERATIONS));
    }
    Err(Error::NonConvergence {
        residual: cost,
        iterations: MAX_ITERATIONS,
        best: Box::new(SymmetricPotential::from_coefficients(&p)),
    })
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn done(p: Vec<f64>, residual: f64, iterations: usize) -> Fit {
    Fit {
        potential: SymmetricPotential::from_coefficients(&p),
        residual,
        iterations,
    }
}

/// Eigenvalues of `q` near previous estimates (small perturbations only).
fn eigenvalues_near(q: &SymmetricPotential, guesses: &[f64]) -> Result<Vec<f64>> {
    guesses
        .iter()
        .map(|&g| {
            let mut w = 1e-4 * (1.0 + g.abs());
            loop {
                let (a, b) = (g - w, g + w);
                let (fa, fb) = (char_psi(q, a)?, char_psi(q, b)?);
                if fa.signum() != fb.signum() {
                    return bracketed_root(|x| char_psi(q, x).unwrap_or(f64::NAN), a, b, 1e-13 * (1.0 + g.abs()));
                }
                w *= 4.0;
                if w > 1.0 {
                    return Err(Error::Uninformative(format!("lost eigenvalue near {g}")));
                }
            }
        })
        .collect()
}

/// Fits the first `eigs.len()` Dirichlet eigenvalues over `1 + basis_dim`
/// coefficients, starting from `c0 = eigs[0] - pi^2`.
pub fn recover_from_spectrum(target: &SpectrumTarget, basis_dim: usize) -> Result<Fit> {
    let n = target.eigs.len();
    if n < basis_dim + 1 {
        return Err(Error::Schema(format!(
            "{n} eigenvalues cannot determine {} coefficients",
            basis_dim + 1
        )));
    }
    let mut start = vec![0.0; basis_dim + 1];
    start[0] = target.eigs[0] - PI * PI;
    gauss_newton(
        |p, base| {
            let q = SymmetricPotential::from_coefficients(p);
            let eigs = match base {
                // the perturbed spectrum sits right next to the base one
                Some(r) => {
                    let guesses: Vec<f64> = r.iter().zip(&target.eigs).map(|(d, e)| d + e).collect();
                    eigenvalues_near(&q, &guesses)?
                }
                None => dirichlet_eigenvalues(&q, n)?,
            };
            Ok(eigs.iter().zip(&target.eigs).map(|(a, b)| a - b).collect())
        },
        start,
    )
}

/// Weyl function of the constant potential `c`.
fn constant_weyl(c: f64, lambda: f64) -> f64 {
    cos_sqrt(lambda - c) / sinc_sqrt(lambda - c)
}

/// Fits Weyl-function samples over `1 + basis_dim` coefficients. Samples with
/// `|m| > M_CAP` are dropped first.
pub fn recover_from_weyl(target: &WeylTarget, basis_dim: usize) -> Result<Fit> {
    let samples: Vec<(f64, f64)> = target
        .samples
        .iter()
        .copied()
        .filter(|&(l, m)| m.is_finite() && l.is_finite() && m.abs() <= M_CAP)
        .collect();
    let need = 3 * basis_dim.max(1);
    if samples.len() < need {
        return Err(Error::Uninformative(format!(
            "{} usable Weyl samples, need {need}",
            samples.len()
        )));
    }

    // constant term by a scan with the closed-form constant-potential model
    let c_best = (-160..=160)
        .map(|i| i as f64 * 0.125)
        .map(|c| {
            let cost: f64 = samples
                .iter()
                .map(|&(l, m)| (constant_weyl(c, l) - m).powi(2).min(1e4))
                .sum();
            (c, cost)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c)
        .unwrap_or(0.0);

    let mut start = vec![0.0; basis_dim + 1];
    start[0] = c_best;
    gauss_newton(
        |p, _| {
            let q = SymmetricPotential::from_coefficients(p);
            samples
                .iter()
                .map(|&(l, m)| Ok(weyl(&q, l)? - m))
                .collect()
        },
        start,
    )
}

/// Zeros of a sampled characteristic function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroScan {
    pub zeros: Vec<f64>,
    /// Refinements that fell back to interpolating the samples.
    pub interpolated: usize,
    pub warnings: Vec<String>,
}

/// Brackets the sign changes of `samples` (ascending in `lambda`) and refines
/// each root with `refine`. Where `refine` fails, the samples themselves are
/// interpolated locally instead.
pub fn eigenvalues_from_psi_samples<F>(samples: &[(f64, f64)], mut refine: F, tol: f64) -> Result<ZeroScan>
where
    F: FnMut(f64) -> Result<f64>,
{
    if samples.len() < 2 {
        return Err(Error::Uninformative("fewer than two psi samples".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut interpolated = 0;
    let mut zeros = Vec::new();
    for i in 0..samples.len() - 1 {
        let (a, fa) = samples[i];
        let (b, fb) = samples[i + 1];
        if fa == 0.0 {
            zeros.push(a);
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let root = bracketed_root(
            |x| match refine(x) {
                Ok(v) => v,
                Err(_) => {
                    interpolated += 1;
                    let w = nearest_window(&xs, x, 8);
                    lagrange_eval(&xs[w.clone()], &ys[w], x)
                }
            },
            a,
            b,
            tol,
        )?;
        zeros.push(root);
    }
    if let Some(&(l, y)) = samples.last() {
        if y == 0.0 {
            zeros.push(l);
        }
    }

    let mut warnings = Vec::new();
    if let Some(&first) = zeros.first() {
        let shift = first - PI * PI;
        let top = xs[xs.len() - 1];
        let expected = ((top - shift).max(0.0).sqrt() / PI).floor() as usize;
        if zeros.len() < expected {
            warnings.push(format!(
                "found {} zeros below {top}, expected about {expected}",
                zeros.len()
            ));
        }
    } else {
        warnings.push("no sign change in psi samples".into());
    }
    Ok(ZeroScan {
        zeros,
        interpolated,
        warnings,
    })
}
