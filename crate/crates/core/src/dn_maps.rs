//! Edge and vertex Dirichlet-to-Neumann maps.
//!
//! The vertex map sends boundary data `f` to `-u(w_v)` at the interior
//! neighbour `w_v` of each boundary vertex, where `u` solves the vertex
//! equation. The edge map sends `f` to the boundary derivatives of the
//! solution of the continuous problem on the metric graph. With zero potential
//! on the boundary edges the two are related by
//!
//! ```text
//! lambda_v = -cos(sqrt(lambda)) I + sin(sqrt(lambda)) / sqrt(lambda) * lambda_e.
//! ```

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::edge_ode::{dirichlet_eigenvalues, EdgeCharData};
use crate::error::{Error, Reason, Result};
use crate::lattice::{EdgeId, Region, VertexId};
use crate::numerics::{cos_sqrt, lagrange_eval, nearest_window, sinc_sqrt, Factored, EPS_DEN, KAPPA_MAX};
use crate::potentials::EdgePotentials;
use crate::vertex_system::{edge_char_table, InteriorSystem, VertexCoeffs};

/// Exclusion radius around the points where `cos(sqrt(lambda))` is 0 or +-1.
pub const DELTA_T: f64 = 0.05;

/// A boundary-to-boundary map at one `lambda`, in boundary matrix order.
#[derive(Debug, Clone, PartialEq)]
pub struct DNMatrix {
    pub lambda: f64,
    pub entries: DMatrix<f64>,
}

impl DNMatrix {
    pub fn new(lambda: f64, entries: DMatrix<f64>) -> Self {
        Self { lambda, entries }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// `max |A - A^T|`.
    pub fn symmetry_residual(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }

    /// The map seen after relabelling boundary vertex `i` as `perm[i]`:
    /// `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.size();
        Self::new(
            self.lambda,
            DMatrix::from_fn(m, m, |i, j| self.entries[(perm[i], perm[j])]),
        )
    }

    pub fn max_abs_diff(&self, other: &DNMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

/// Vertex map from already assembled coefficients.
pub fn lambda_v_from_coeffs(region: &Region, coeffs: &VertexCoeffs) -> Result<DNMatrix> {
    let system = InteriorSystem::new(region, coeffs)?;
    let m = region.boundary_len();
    let inner = system.solve_interior(&DMatrix::identity(m, m));
    let mut out = DMatrix::zeros(m, m);
    for (i, &b) in region.boundary().iter().enumerate() {
        let w = region.interior_neighbor(b).expect("boundary vertex");
        let r = region.interior_position(w).expect("interior");
        for j in 0..m {
            out[(i, j)] = -inner[(r, j)];
        }
    }
    Ok(DNMatrix::new(coeffs.lambda, out))
}

/// Vertex map by solving the vertex equation for each unit boundary vector.
pub fn assemble_lambda_v(region: &Region, potentials: &EdgePotentials, lambda: f64) -> Result<DNMatrix> {
    lambda_v_from_coeffs(region, &VertexCoeffs::assemble(region, potentials, lambda)?)
}

fn check_sinc(lambda: f64) -> Result<f64> {
    let s = sinc_sqrt(lambda);
    if s.abs() < EPS_DEN {
        return Err(Error::Inadmissible {
            lambda,
            reason: Reason::NearT0 {
                point: nearest_t0(lambda),
            },
        });
    }
    Ok(s)
}

pub fn lambda_e_from_v(lambda_v: &DNMatrix) -> Result<DNMatrix> {
    let lam = lambda_v.lambda;
    let s = check_sinc(lam)?;
    let c = cos_sqrt(lam);
    let m = lambda_v.size();
    let entries = (&lambda_v.entries + DMatrix::identity(m, m) * c) / s;
    Ok(DNMatrix::new(lam, entries))
}

pub fn lambda_v_from_e(lambda_e: &DNMatrix) -> Result<DNMatrix> {
    let lam = lambda_e.lambda;
    let s = check_sinc(lam)?;
    let c = cos_sqrt(lam);
    let m = lambda_e.size();
    let entries = &lambda_e.entries * s - DMatrix::identity(m, m) * c;
    Ok(DNMatrix::new(lam, entries))
}

/// Solution of the continuous boundary value problem on the metric graph,
/// written on each edge as `u_e = a_e S_e + b_e C_e`.
#[derive(Debug, Clone)]
pub struct ContinuousSolution {
    edges: Vec<EdgeId>,
    index: HashMap<EdgeId, usize>,
    table: HashMap<EdgeId, EdgeCharData>,
    /// Column `j` holds `(a_e, b_e)` pairs for data vector `j`.
    coeffs: DMatrix<f64>,
}

impl ContinuousSolution {
    fn ab(&self, e: EdgeId, col: usize) -> (f64, f64) {
        let i = self.index[&e];
        (self.coeffs[(2 * i, col)], self.coeffs[(2 * i + 1, col)])
    }

    /// `u` at the endpoint `v` of edge `e`.
    pub fn value(&self, e: EdgeId, v: VertexId, col: usize) -> f64 {
        let (a, b) = self.ab(e, col);
        if e.start() == v {
            b
        } else {
            let d = &self.table[&e];
            a * d.s1 + b * d.c1
        }
    }

    /// Derivative of `u_e` at the endpoint `v` in the direction pointing into `v`.
    pub fn derivative_toward(&self, e: EdgeId, v: VertexId, col: usize) -> f64 {
        let (a, b) = self.ab(e, col);
        if e.start() == v {
            -a
        } else {
            let d = &self.table[&e];
            a * d.ds1 + b * d.dc1
        }
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    /// Largest `|sum_e derivative_toward(e, v)|` over interior vertices and columns.
    pub fn kirchhoff_residual(&self, region: &Region) -> f64 {
        let mut worst = 0.0f64;
        for col in 0..self.coeffs.ncols() {
            for &v in region.interior() {
                let s: f64 = v
                    .neighbors()
                    .iter()
                    .map(|&w| self.derivative_toward(EdgeId::between(v, w).unwrap(), v, col))
                    .sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }
}

/// Solves the continuous problem with continuity and Kirchhoff conditions at
/// interior vertices, one solution per column of boundary data `f`.
pub fn continuous_solve(
    region: &Region,
    potentials: &EdgePotentials,
    lambda: f64,
    f: &DMatrix<f64>,
) -> Result<ContinuousSolution> {
    let table = edge_char_table(region, potentials, lambda)?;
    let edges = region.edges().to_vec();
    let index: HashMap<EdgeId, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let n = 2 * edges.len();
    let mut a = DMatrix::zeros(n, n);

    // (row coefficients of a_e, b_e) for the value and inward derivative at v
    let value = |e: EdgeId, v: VertexId| -> (f64, f64) {
        if e.start() == v {
            (0.0, 1.0)
        } else {
            (table[&e].s1, table[&e].c1)
        }
    };
    let deriv = |e: EdgeId, v: VertexId| -> (f64, f64) {
        if e.start() == v {
            (-1.0, 0.0)
        } else {
            (table[&e].ds1, table[&e].dc1)
        }
    };

    let mut row = 0;
    let m = region.boundary_len();
    for &b in region.boundary() {
        let w = region.interior_neighbor(b).expect("boundary vertex");
        let e = EdgeId::between(b, w).expect("adjacent");
        let (ca, cb) = value(e, b);
        a[(row, 2 * index[&e])] = ca;
        a[(row, 2 * index[&e] + 1)] = cb;
        row += 1;
    }
    let mut rhs = DMatrix::zeros(n, f.ncols());
    rhs.rows_mut(0, m).copy_from(f);
    for &v in region.interior() {
        let inc: Vec<EdgeId> = v
            .neighbors()
            .iter()
            .map(|&w| EdgeId::between(v, w).unwrap())
            .collect();
        let (a0, b0) = value(inc[0], v);
        for &e in &inc[1..] {
            let (ca, cb) = value(e, v);
            a[(row, 2 * index[&inc[0]])] += a0;
            a[(row, 2 * index[&inc[0]] + 1)] += b0;
            a[(row, 2 * index[&e])] -= ca;
            a[(row, 2 * index[&e] + 1)] -= cb;
            row += 1;
        }
        for &e in &inc {
            let (ca, cb) = deriv(e, v);
            a[(row, 2 * index[&e])] += ca;
            a[(row, 2 * index[&e] + 1)] += cb;
        }
        row += 1;
    }
    debug_assert_eq!(row, n);
    let factored = Factored::new(&a, KAPPA_MAX).map_err(|e| match e {
        Error::IllConditioned { cond } => Error::Inadmissible {
            lambda,
            reason: Reason::Singular { cond },
        },
        other => other,
    })?;
    Ok(ContinuousSolution {
        edges,
        index,
        table,
        coeffs: factored.solve_many(&rhs),
    })
}

/// Edge map from the continuous problem, independent of the vertex reduction.
pub fn continuous_oracle_lambda_e(
    region: &Region,
    potentials: &EdgePotentials,
    lambda: f64,
) -> Result<DNMatrix> {
    let m = region.boundary_len();
    let sol = continuous_solve(region, potentials, lambda, &DMatrix::identity(m, m))?;
    let mut out = DMatrix::zeros(m, m);
    for (i, &b) in region.boundary().iter().enumerate() {
        let w = region.interior_neighbor(b).expect("boundary vertex");
        let e = EdgeId::between(b, w).expect("adjacent");
        for j in 0..m {
            out[(i, j)] = sol.derivative_toward(e, b, j);
        }
    }
    Ok(DNMatrix::new(lambda, out))
}

/// The point `(j pi / 2)^2` nearest to `lambda`.
pub fn nearest_t0(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let j = (2.0 * lambda.sqrt() / PI).round();
    let below = ((j - 1.0).max(0.0) * PI / 2.0).powi(2);
    let at = (j * PI / 2.0).powi(2);
    let above = ((j + 1.0) * PI / 2.0).powi(2);
    [below, at, above]
        .into_iter()
        .min_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()))
        .unwrap()
}

/// Rejects `lambda` within `DELTA_T` of a point where `cos(sqrt(lambda))` is 0 or +-1.
pub fn check_t0(lambda: f64) -> Result<(), Reason> {
    let point = nearest_t0(lambda);
    if (lambda - point).abs() <= DELTA_T {
        Err(Reason::NearT0 { point })
    } else {
        Ok(())
    }
}

/// All admissibility guards: distance from the exceptional points, no edge
/// eigenvalue, and a well-conditioned interior system.
pub fn check_admissible(region: &Region, potentials: &EdgePotentials, lambda: f64) -> Result<(), Reason> {
    check_t0(lambda)?;
    let coeffs = match VertexCoeffs::assemble(region, potentials, lambda) {
        Ok(c) => c,
        Err(Error::Inadmissible { reason, .. }) => return Err(reason),
        Err(e) => {
            return Err(Reason::Degenerate {
                detail: e.to_string(),
            })
        }
    };
    match InteriorSystem::new(region, &coeffs) {
        Ok(_) => Ok(()),
        Err(Error::IllConditioned { cond }) => Err(Reason::Singular { cond }),
        Err(e) => Err(Reason::Degenerate {
            detail: e.to_string(),
        }),
    }
}

pub fn admissible(region: &Region, potentials: &EdgePotentials, lambda: f64) -> bool {
    check_admissible(region, potentials, lambda).is_ok()
}

/// Points of `T0` and the edge Dirichlet eigenvalues up to a working bound.
#[derive(Debug, Clone)]
pub struct ExceptionalSet {
    pub upper: f64,
    pub edge_eigenvalues: HashMap<EdgeId, Vec<f64>>,
}

impl ExceptionalSet {
    pub fn new(region: &Region, potentials: &EdgePotentials, upper: f64) -> Result<Self> {
        let mut edge_eigenvalues = HashMap::new();
        for &e in region.edges() {
            let q = potentials.get(e);
            let mut count = 4;
            let eigs = loop {
                let eigs = dirichlet_eigenvalues(q, count)?;
                if *eigs.last().unwrap() > upper {
                    break eigs.into_iter().filter(|&l| l <= upper).collect();
                }
                count *= 2;
            };
            edge_eigenvalues.insert(e, eigs);
        }
        Ok(Self {
            upper,
            edge_eigenvalues,
        })
    }

    /// `T0` points `(j pi / 2)^2` up to the bound, ascending.
    pub fn t0_points(&self) -> Vec<f64> {
        (0..)
            .map(|j| (j as f64 * PI / 2.0).powi(2))
            .take_while(|&x| x <= self.upper)
            .collect()
    }

    /// Distance from `lambda` to the nearest exceptional point.
    pub fn distance(&self, lambda: f64) -> f64 {
        let t0 = (lambda - nearest_t0(lambda)).abs();
        self.edge_eigenvalues
            .values()
            .flatten()
            .fold(t0, |m, &x| m.min((x - lambda).abs()))
    }
}

/// A family `lambda -> lambda_e` that the reconstruction can query.
pub trait DnOracle: Sync {
    /// `N` of the region the data belongs to.
    fn region_n(&self) -> usize;

    fn lambda_e(&self, lambda: f64) -> Result<DNMatrix>;

    fn lambda_v(&self, lambda: f64) -> Result<DNMatrix> {
        lambda_v_from_e(&self.lambda_e(lambda)?)
    }

    /// Sample nodes when the family is only known on a grid.
    fn nodes(&self) -> Option<&[f64]> {
        None
    }
}

/// Edge map computed on demand from known potentials.
#[derive(Debug, Clone)]
pub struct ForwardOracle {
    region: Region,
    potentials: EdgePotentials,
}

impl ForwardOracle {
    pub fn new(region: Region, potentials: EdgePotentials) -> Result<Self> {
        potentials.validate(&region)?;
        Ok(Self { region, potentials })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn potentials(&self) -> &EdgePotentials {
        &self.potentials
    }
}

impl DnOracle for ForwardOracle {
    fn region_n(&self) -> usize {
        self.region.n()
    }

    fn lambda_e(&self, lambda: f64) -> Result<DNMatrix> {
        check_t0(lambda).map_err(|reason| Error::Inadmissible { lambda, reason })?;
        continuous_oracle_lambda_e(&self.region, &self.potentials, lambda)
    }
}

/// Edge map known on a grid of `lambda` values, interpolated in between with
/// local Lagrange polynomials.
#[derive(Debug, Clone)]
pub struct SampledOracle {
    n: usize,
    lambdas: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
    stencil: usize,
}

/// Number of nodes in the local interpolation stencil.
pub const DEFAULT_STENCIL: usize = 8;

impl SampledOracle {
    pub fn new(n: usize, samples: Vec<DNMatrix>) -> Result<Self> {
        let m = 4 * (n + 1);
        let mut samples = samples;
        samples.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        if samples.is_empty() {
            return Err(Error::Schema("no samples".into()));
        }
        if samples.windows(2).any(|w| w[0].lambda == w[1].lambda) {
            return Err(Error::Schema("repeated lambda in samples".into()));
        }
        if samples.iter().any(|s| s.entries.shape() != (m, m)) {
            return Err(Error::Schema(format!("matrices must be {m} x {m}")));
        }
        Ok(Self {
            n,
            lambdas: samples.iter().map(|s| s.lambda).collect(),
            matrices: samples.into_iter().map(|s| s.entries).collect(),
            stencil: DEFAULT_STENCIL,
        })
    }

    pub fn samples(&self) -> impl Iterator<Item = DNMatrix> + '_ {
        self.lambdas
            .iter()
            .zip(&self.matrices)
            .map(|(&l, m)| DNMatrix::new(l, m.clone()))
    }
}

impl DnOracle for SampledOracle {
    fn region_n(&self) -> usize {
        self.n
    }

    fn lambda_e(&self, lambda: f64) -> Result<DNMatrix> {
        let (lo, hi) = (self.lambdas[0], *self.lambdas.last().unwrap());
        if !(lo..=hi).contains(&lambda) {
            return Err(Error::Schema(format!(
                "lambda = {lambda} outside sampled range [{lo}, {hi}]"
            )));
        }
        if let Ok(i) = self.lambdas.binary_search_by(|x| x.total_cmp(&lambda)) {
            return Ok(DNMatrix::new(lambda, self.matrices[i].clone()));
        }
        let win = nearest_window(&self.lambdas, lambda, self.stencil);
        let xs = &self.lambdas[win.clone()];
        let m = self.matrices[0].nrows();
        let mut ys = vec![0.0; xs.len()];
        let entries = DMatrix::from_fn(m, m, |i, j| {
            for (y, mat) in ys.iter_mut().zip(&self.matrices[win.clone()]) {
                *y = mat[(i, j)];
            }
            lagrange_eval(xs, &ys, lambda)
        });
        Ok(DNMatrix::new(lambda, entries))
    }

    fn nodes(&self) -> Option<&[f64]> {
        Some(&self.lambdas)
    }
}

/// The oracle of the half-turned region: boundary vertex `i` of the rotated
/// frame is boundary vertex `perm[i]` of the original.
pub struct RotatedOracle<'a> {
    inner: &'a dyn DnOracle,
    perm: Vec<usize>,
}

impl<'a> RotatedOracle<'a> {
    pub fn new(inner: &'a dyn DnOracle) -> Self {
        let perm = Region::new(inner.region_n()).rotation_permutation();
        Self { inner, perm }
    }
}

impl DnOracle for RotatedOracle<'_> {
    fn region_n(&self) -> usize {
        self.inner.region_n()
    }

    fn lambda_e(&self, lambda: f64) -> Result<DNMatrix> {
        Ok(self.inner.lambda_e(lambda)?.permuted(&self.perm))
    }

    fn nodes(&self) -> Option<&[f64]> {
        self.inner.nodes()
    }
}
