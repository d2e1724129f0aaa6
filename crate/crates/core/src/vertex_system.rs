//! The reduced vertex equation
//!
//! ```text
//! -(1/4) sum_{w ~ v} u(w) / psi_{vw}(1, lambda) + q_v(lambda) u(v) = 0,
//! q_v(lambda) = (1/4) sum_{w ~ v} psi'_{vw}(1, lambda) / psi_{vw}(1, lambda),
//! ```
//!
//! imposed at every interior vertex, and the ways of solving it: full Dirichlet
//! solves, column-by-column propagation from Cauchy data on the left side,
//! row-by-row propagation downward from the top, and the special solutions
//! that vanish below a diagonal line.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::dn_maps::DNMatrix;
use crate::edge_ode::{shoot, EdgeCharData, SymmetricPotential};
use crate::error::{Error, Reason, Result};
use crate::lattice::{BoundaryIndex, EdgeId, Region, Side, VertexId};
use crate::numerics::{Factored, EPS_DEN, KAPPA_MAX};
use crate::potentials::EdgePotentials;

/// Endpoint data of one edge; closed form when the potential vanishes.
pub fn char_data(q: &SymmetricPotential, lambda: f64) -> Result<EdgeCharData> {
    if q.is_zero() {
        Ok(EdgeCharData::free(lambda))
    } else {
        shoot(q, lambda)
    }
}

/// Endpoint data for every edge of the region.
pub fn edge_char_table(
    region: &Region,
    potentials: &EdgePotentials,
    lambda: f64,
) -> Result<HashMap<EdgeId, EdgeCharData>> {
    region
        .edges()
        .iter()
        .map(|&e| Ok((e, char_data(potentials.get(e), lambda)?)))
        .collect()
}

/// Coefficients of the vertex equation at one `lambda`.
///
/// Entries may be missing; the propagation routines only touch a coefficient
/// when it multiplies a nonzero value.
#[derive(Debug, Clone, Default)]
pub struct VertexCoeffs {
    pub lambda: f64,
    psi: HashMap<EdgeId, f64>,
    qv: HashMap<VertexId, f64>,
}

impl VertexCoeffs {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Default::default()
        }
    }

    /// Full coefficients from edge potentials.
    pub fn assemble(region: &Region, potentials: &EdgePotentials, lambda: f64) -> Result<Self> {
        let table = edge_char_table(region, potentials, lambda)?;
        Self::from_char_table(region, &table, lambda)
    }

    pub fn from_char_table(
        region: &Region,
        table: &HashMap<EdgeId, EdgeCharData>,
        lambda: f64,
    ) -> Result<Self> {
        let mut out = Self::new(lambda);
        for &e in region.edges() {
            let d = &table[&e];
            if d.s1.abs() <= EPS_DEN {
                return Err(Error::Inadmissible {
                    lambda,
                    reason: Reason::EdgeEigenvalue { edge: e, psi: d.s1 },
                });
            }
            out.psi.insert(e, d.s1);
        }
        for &v in region.interior() {
            let sum: f64 = v
                .neighbors()
                .iter()
                .map(|&w| {
                    let d = &table[&EdgeId::between(v, w).expect("adjacent")];
                    d.ds1 / d.s1
                })
                .sum();
            out.qv.insert(v, 0.25 * sum);
        }
        Ok(out)
    }

    pub fn set_psi(&mut self, e: EdgeId, psi: f64) {
        self.psi.insert(e, psi);
    }

    pub fn set_qv(&mut self, v: VertexId, q: f64) {
        self.qv.insert(v, q);
    }

    pub fn psi(&self, e: EdgeId) -> Option<f64> {
        self.psi.get(&e).copied()
    }

    pub fn psi_between(&self, a: VertexId, b: VertexId) -> Option<f64> {
        EdgeId::between(a, b).and_then(|e| self.psi(e))
    }

    pub fn qv(&self, v: VertexId) -> Option<f64> {
        self.qv.get(&v).copied()
    }
}

/// Values of a vertex function on the box `[-1, N+1]^2` (corners unused).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    n: usize,
    values: Vec<f64>,
}

impl VertexField {
    pub fn zeros(region: &Region) -> Self {
        let side = region.n() + 3;
        Self {
            n: region.n(),
            values: vec![0.0; side * side],
        }
    }

    fn slot(&self, v: VertexId) -> Option<usize> {
        let side = self.n as i64 + 3;
        let (x, y) = (v.n1 + 1, v.n2 + 1);
        ((0..side).contains(&x) && (0..side).contains(&y)).then(|| (y * side + x) as usize)
    }

    /// Value at `v`; zero outside the box.
    pub fn get(&self, v: VertexId) -> f64 {
        self.slot(v).map_or(0.0, |i| self.values[i])
    }

    pub fn set(&mut self, v: VertexId, x: f64) {
        let i = self.slot(v).expect("vertex inside the bounding box");
        self.values[i] = x;
    }

    /// Boundary values in matrix order.
    pub fn boundary_values(&self, region: &Region) -> Vec<f64> {
        region.boundary().iter().map(|&v| self.get(v)).collect()
    }

    pub fn set_boundary(&mut self, region: &Region, f: &[f64]) {
        for (&v, &x) in region.boundary().iter().zip(f) {
            self.set(v, x);
        }
    }

    /// Largest magnitude over the region.
    pub fn max_abs(&self, region: &Region) -> f64 {
        region
            .interior()
            .iter()
            .chain(region.boundary())
            .fold(0.0, |m, &v| m.max(self.get(v).abs()))
    }
}

fn over(u: f64, psi: Option<f64>, at: VertexId) -> Result<f64> {
    if u == 0.0 {
        Ok(0.0)
    } else {
        psi.map(|p| u / p).ok_or(Error::IncompleteFrontier(at))
    }
}

/// Solves the vertex equation at `v` for the neighbour `target`, given `u` at
/// `v` and its three other neighbours.
fn solve_for_neighbor(
    coeffs: &VertexCoeffs,
    u: &VertexField,
    v: VertexId,
    target: VertexId,
) -> Result<f64> {
    let uv = u.get(v);
    let mut bracket = if uv == 0.0 {
        0.0
    } else {
        4.0 * coeffs.qv(v).ok_or(Error::IncompleteFrontier(v))? * uv
    };
    for w in v.neighbors() {
        if w != target {
            bracket -= over(u.get(w), coeffs.psi_between(v, w), v)?;
        }
    }
    if bracket == 0.0 {
        return Ok(0.0);
    }
    let psi = coeffs
        .psi_between(v, target)
        .ok_or(Error::IncompleteFrontier(v))?;
    Ok(psi * bracket)
}

/// Residual of the vertex equation at an interior vertex; `None` when a needed
/// coefficient is missing.
pub fn vertex_residual(coeffs: &VertexCoeffs, u: &VertexField, v: VertexId) -> Option<f64> {
    let mut r = coeffs.qv(v)? * u.get(v);
    for w in v.neighbors() {
        r -= 0.25 * u.get(w) / coeffs.psi_between(v, w)?;
    }
    Some(r)
}

/// Largest vertex-equation residual over the interior.
pub fn max_residual(region: &Region, coeffs: &VertexCoeffs, u: &VertexField) -> f64 {
    region.interior().iter().fold(0.0, |m, &v| {
        m.max(vertex_residual(coeffs, u, v).map_or(f64::INFINITY, f64::abs))
    })
}

/// The interior linear system `A u = B f` for the Dirichlet problem.
#[derive(Debug, Clone)]
pub struct InteriorSystem {
    factored: Factored,
    coupling: DMatrix<f64>,
}

impl InteriorSystem {
    pub fn new(region: &Region, coeffs: &VertexCoeffs) -> Result<Self> {
        let ni = region.interior().len();
        let m = region.boundary_len();
        let mut a = DMatrix::zeros(ni, ni);
        let mut b = DMatrix::zeros(ni, m);
        let missing = |v| Error::IncompleteFrontier(v);
        for &v in region.interior() {
            let i = region.interior_position(v).expect("interior");
            a[(i, i)] = coeffs.qv(v).ok_or_else(|| missing(v))?;
            for w in v.neighbors() {
                let c = 0.25 / coeffs.psi_between(v, w).ok_or_else(|| missing(v))?;
                if let Some(j) = region.interior_position(w) {
                    a[(i, j)] -= c;
                } else {
                    let j = region.boundary_position(w).expect("neighbour in region");
                    b[(i, j)] += c;
                }
            }
        }
        Ok(Self {
            factored: Factored::new(&a, KAPPA_MAX)?,
            coupling: b,
        })
    }

    pub fn cond(&self) -> f64 {
        self.factored.cond()
    }

    /// Interior values for boundary data `f`, one column per data vector.
    pub fn solve_interior(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        self.factored.solve_many(&(&self.coupling * f))
    }

    pub fn solve(&self, region: &Region, f: &[f64]) -> VertexField {
        let rhs = &self.coupling * DVector::from_column_slice(f);
        let inner = self.factored.solve(&rhs);
        let mut u = VertexField::zeros(region);
        u.set_boundary(region, f);
        for &v in region.interior() {
            u.set(v, inner[region.interior_position(v).expect("interior")]);
        }
        u
    }
}

/// Solution of the vertex equation with `u = f` on the boundary.
pub fn solve_dirichlet(region: &Region, coeffs: &VertexCoeffs, f: &[f64]) -> Result<VertexField> {
    check_len(f.len(), region.boundary_len(), "boundary data")?;
    Ok(InteriorSystem::new(region, coeffs)?.solve(region, f))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Schema(format!("{what} has length {got}, expected {want}")))
    }
}

/// Solves column by column from Dirichlet data on the top, bottom and left
/// sides (`f`, right-side entries ignored) and Neumann data `g` on the left
/// side, stored as `g(l_m) = -u(0, m)`.
///
/// The right-side values of the result are whatever the equation forces.
pub fn propagate(region: &Region, coeffs: &VertexCoeffs, f: &[f64], g: &[f64]) -> Result<VertexField> {
    let n = region.n() as i64;
    check_len(f.len(), region.boundary_len(), "boundary data")?;
    check_len(g.len(), region.n() + 1, "left Neumann data")?;
    let mut u = VertexField::zeros(region);
    for (pos, &v) in region.boundary().iter().enumerate() {
        if region.boundary_index(v).map(|b| b.side) != Some(Side::Right) {
            u.set(v, f[pos]);
        }
    }
    for (m, &gm) in g.iter().enumerate() {
        u.set(VertexId::new(0, m as i64), -gm);
    }
    for x in 0..=n {
        for y in 0..=n {
            let v = VertexId::new(x, y);
            let next = solve_for_neighbor(coeffs, &u, v, v.right())?;
            u.set(v.right(), next);
        }
    }
    Ok(u)
}

/// Fills rows `N-1, ..., 0` downward from the values already stored on the
/// top boundary, row `N` and the left and right sides.
///
/// Only vertices `v` with `level(v) >= min_level` are used as equation
/// centres, so the rows are filled at levels `>= min_level - 1` and only
/// coefficients of edges with both endpoint levels `>= min_level - 1` are read.
pub fn propagate_down(
    region: &Region,
    coeffs: &VertexCoeffs,
    u: &mut VertexField,
    min_level: i64,
) -> Result<()> {
    let n = region.n() as i64;
    for y in (1..=n).rev() {
        for x in 0..=n {
            let v = VertexId::new(x, y);
            if v.level() >= min_level {
                let below = solve_for_neighbor(coeffs, u, v, v.down())?;
                u.set(v.down(), below);
            }
        }
    }
    Ok(())
}

/// Completes three-sided Dirichlet data `f1` (right-side entries ignored) and
/// left Neumann data `g` to full boundary data `f` with `(lambda_v f)|_L = g`.
pub fn complete_boundary(
    region: &Region,
    lambda_v: &DNMatrix,
    f1: &[f64],
    g: &[f64],
) -> Result<Vec<f64>> {
    check_len(f1.len(), region.boundary_len(), "boundary data")?;
    check_len(g.len(), region.n() + 1, "left Neumann data")?;
    let rows = region.side_positions(Side::Left);
    let cols = region.side_positions(Side::Right);
    let lam = &lambda_v.entries;
    let k = cols.len();
    let sub = DMatrix::from_fn(k, k, |i, j| lam[(rows.start + i, cols.start + j)]);
    let rhs = DVector::from_fn(k, |i, _| {
        let r = rows.start + i;
        g[i] - (0..f1.len())
            .filter(|j| !cols.contains(j))
            .map(|j| lam[(r, j)] * f1[j])
            .sum::<f64>()
    });
    let right = Factored::new(&sub, KAPPA_MAX)?.solve(&rhs);
    let mut f = f1.to_vec();
    for (i, j) in cols.enumerate() {
        f[j] = right[i];
    }
    Ok(f)
}

/// A solution vanishing below the diagonal line `x1 + x2 = k`.
#[derive(Debug, Clone)]
pub struct SpecialSolution {
    pub k: usize,
    pub field: VertexField,
    /// Completed boundary data.
    pub boundary: Vec<f64>,
    /// Largest disagreement between the field and the boundary map where both
    /// determine a value.
    pub consistency: f64,
}

/// Boundary data equal to 1 at `alpha_{k,0}` and 0 elsewhere off the right side.
fn unit_top(region: &Region, k: usize) -> Result<Vec<f64>> {
    let start = region.diagonal_vertices(k)?[0];
    let mut f1 = vec![0.0; region.boundary_len()];
    f1[region.position_of(BoundaryIndex {
        side: Side::Top,
        m: start.n1 as usize,
    })] = 1.0;
    Ok(f1)
}

/// Special solution of level `k` built by left-to-right propagation.
///
/// Needs coefficients on every edge with both endpoint levels `>= k - 1` and
/// on the boundary edges.
pub fn special_solution(
    region: &Region,
    coeffs: &VertexCoeffs,
    lambda_v: &DNMatrix,
    k: usize,
) -> Result<SpecialSolution> {
    let f1 = unit_top(region, k)?;
    let g = vec![0.0; region.n() + 1];
    let boundary = complete_boundary(region, lambda_v, &f1, &g)?;
    let field = propagate(region, coeffs, &boundary, &g)?;
    let consistency = region
        .side_positions(Side::Right)
        .map(|j| (field.get(region.boundary()[j]) - boundary[j]).abs())
        .fold(0.0, f64::max);
    Ok(SpecialSolution {
        k,
        field,
        boundary,
        consistency,
    })
}

/// Special solution of level `k` built from the boundary map and downward
/// propagation.
///
/// Only coefficients of edges with both endpoint levels `>= k` are read, so
/// this works before the edges between the lines of level `k - 1` and `k`
/// are known. Values are produced at levels `>= k`.
pub fn special_solution_above(
    region: &Region,
    coeffs: &VertexCoeffs,
    lambda_v: &DNMatrix,
    k: usize,
) -> Result<SpecialSolution> {
    let n = region.n() as i64;
    let f1 = unit_top(region, k)?;
    let g = vec![0.0; region.n() + 1];
    let boundary = complete_boundary(region, lambda_v, &f1, &g)?;
    let neumann = &lambda_v.entries * DVector::from_column_slice(&boundary);

    let mut field = VertexField::zeros(region);
    field.set_boundary(region, &boundary);
    for j in region.side_positions(Side::Top) {
        let b = region.boundary()[j];
        field.set(b.down(), -neumann[j]);
    }
    propagate_down(region, coeffs, &mut field, k as i64 + 1)?;

    // the right column is also determined by the map
    let consistency = region
        .side_positions(Side::Right)
        .map(|j| (j, VertexId::new(n, region.boundary()[j].n2)))
        .filter(|&(_, w)| w.level() >= k as i64)
        .map(|(j, w)| (field.get(w) + neumann[j]).abs())
        .fold(0.0, f64::max);
    Ok(SpecialSolution {
        k,
        field,
        boundary,
        consistency,
    })
}

/// The two-term relation at a corner vertex `a` where `u(a) = u(a-1) = u(a-i) = 0`:
/// `u(a+i) / psi(a, a+i) + u(a+1) / psi(a, a+1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerRelation {
    pub up: f64,
    pub right: f64,
    pub residual: f64,
}

pub fn corner_relation(coeffs: &VertexCoeffs, u: &VertexField, a: VertexId) -> Result<CornerRelation> {
    let (up, right) = (u.get(a.up()), u.get(a.right()));
    if up.abs() < EPS_DEN && right.abs() < EPS_DEN {
        return Err(Error::Uninformative(format!("u vanishes above and right of {a}")));
    }
    let psi_up = coeffs.psi(EdgeId::up_of(a)).ok_or(Error::IncompleteFrontier(a))?;
    let psi_right = coeffs.psi(EdgeId::right_of(a)).ok_or(Error::IncompleteFrontier(a))?;
    Ok(CornerRelation {
        up,
        right,
        residual: up / psi_up + right / psi_right,
    })
}

/// Solves `u_known / psi_known + u_unknown / psi = 0` for `psi`.
pub fn corner_unknown_psi(u_known: f64, psi_known: f64, u_unknown: f64) -> Result<f64> {
    if u_known.abs() < EPS_DEN {
        return Err(Error::Uninformative(format!(
            "corner denominator {u_known:e} too small"
        )));
    }
    Ok(-u_unknown * psi_known / u_known)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dn_maps::assemble_lambda_v;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_setup(n: usize, seed: u64) -> (Region, EdgePotentials) {
        let region = Region::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pots = EdgePotentials::random(&region, 2, 1.5, &mut rng);
        (region, pots)
    }

    #[test]
    fn free_coefficients_at_one() {
        let region = Region::new(2);
        let c = VertexCoeffs::assemble(&region, &EdgePotentials::new(), 1.0).unwrap();
        for &e in region.edges() {
            assert!((c.psi(e).unwrap() - 1f64.sin()).abs() < 1e-15);
        }
        for &v in region.interior() {
            assert!((c.qv(v).unwrap() - 1f64.cos() / 1f64.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn vertex_potential_is_mean_weyl() {
        let (region, pots) = random_setup(1, 3);
        let c = VertexCoeffs::assemble(&region, &pots, 2.0).unwrap();
        for &v in region.interior() {
            let mean: f64 = v
                .neighbors()
                .iter()
                .map(|&w| {
                    let q = pots.get(EdgeId::between(v, w).unwrap());
                    crate::edge_ode::weyl(q, 2.0).unwrap()
                })
                .sum::<f64>()
                / 4.0;
            assert!((c.qv(v).unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn single_vertex_closed_form() {
        let region = Region::new(0);
        let c = VertexCoeffs::assemble(&region, &EdgePotentials::new(), 2.0).unwrap();
        let f = [0.3, -1.2, 2.0, 0.25];
        let u = solve_dirichlet(&region, &c, &f).unwrap();
        let want = f.iter().sum::<f64>() / (4.0 * 2f64.sqrt().cos());
        assert!((u.get(VertexId::new(0, 0)) - want).abs() < 1e-12);
        let z = solve_dirichlet(&region, &c, &[0.0; 4]).unwrap();
        assert_eq!(z.max_abs(&region), 0.0);
    }

    #[test]
    fn dirichlet_residual_is_small() {
        let (region, pots) = random_setup(2, 11);
        let c = VertexCoeffs::assemble(&region, &pots, 7.3).unwrap();
        let f: Vec<f64> = (0..region.boundary_len()).map(|i| (i as f64).sin()).collect();
        let u = solve_dirichlet(&region, &c, &f).unwrap();
        assert!(max_residual(&region, &c, &u) < 1e-10);
    }

    #[test]
    fn propagate_agrees_with_dense_solve() {
        for seed in 0..5 {
            let (region, pots) = random_setup(3, seed);
            let c = VertexCoeffs::assemble(&region, &pots, 5.1).unwrap();
            let f: Vec<f64> = (0..region.boundary_len())
                .map(|i| ((i * 7 + 3) as f64).cos())
                .collect();
            let g: Vec<f64> = (0..=3).map(|m| 0.5 - m as f64 * 0.2).collect();
            let u = propagate(&region, &c, &f, &g).unwrap();
            let w = solve_dirichlet(&region, &c, &u.boundary_values(&region)).unwrap();
            let scale = u.max_abs(&region);
            for &v in region.interior() {
                assert!((u.get(v) - w.get(v)).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn completion_recovers_planted_right_side() {
        let (region, pots) = random_setup(2, 5);
        let lam = 3.7;
        let lv = assemble_lambda_v(&region, &pots, lam).unwrap();
        let planted: Vec<f64> = (0..region.boundary_len())
            .map(|i| 1.0 + (i as f64 * 0.37).sin())
            .collect();
        let g_all = &lv.entries * DVector::from_column_slice(&planted);
        let g: Vec<f64> = region.side_positions(Side::Left).map(|j| g_all[j]).collect();
        let mut f1 = planted.clone();
        for j in region.side_positions(Side::Right) {
            f1[j] = 0.0;
        }
        let f = complete_boundary(&region, &lv, &f1, &g).unwrap();
        for j in 0..f.len() {
            assert!((f[j] - planted[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn special_solutions_vanish_below_their_line() {
        let (region, pots) = random_setup(3, 8);
        for lam in [2.0, 6.5, 13.0] {
            let c = VertexCoeffs::assemble(&region, &pots, lam).unwrap();
            let lv = assemble_lambda_v(&region, &pots, lam).unwrap();
            for k in 4..=6 {
                let s = special_solution(&region, &c, &lv, k).unwrap();
                let dense = solve_dirichlet(&region, &c, &s.boundary).unwrap();
                let scale = dense.max_abs(&region);
                for &v in region.interior() {
                    if v.level() < k as i64 {
                        assert!(dense.get(v).abs() <= 1e-10 * scale, "k={k} v={v}");
                    }
                    assert!((dense.get(v) - s.field.get(v)).abs() <= 1e-9 * scale);
                }
                let above = special_solution_above(&region, &c, &lv, k).unwrap();
                for &v in region.interior() {
                    if v.level() >= k as i64 {
                        assert!((above.field.get(v) - dense.get(v)).abs() <= 1e-9 * scale);
                    }
                }
                assert!(above.consistency <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn corner_relation_holds_and_inverts() {
        let (region, pots) = random_setup(3, 21);
        let lam = 4.4;
        let c = VertexCoeffs::assemble(&region, &pots, lam).unwrap();
        let lv = assemble_lambda_v(&region, &pots, lam).unwrap();
        for k in 4..=6 {
            let s = special_solution(&region, &c, &lv, k).unwrap();
            let diag = region.diagonal_vertices(k).unwrap();
            for &alpha in &diag[1..diag.len() - 1] {
                let a = alpha.down();
                let r = corner_relation(&c, &s.field, a).unwrap();
                assert!(r.residual.abs() < 1e-9, "{r:?}");
                let psi = corner_unknown_psi(r.up, c.psi(EdgeId::up_of(a)).unwrap(), r.right)
                    .unwrap();
                let want = c.psi(EdgeId::right_of(a)).unwrap();
                assert!((psi - want).abs() < 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn corner_relation_flags_vanishing_values() {
        let region = Region::new(1);
        let c = VertexCoeffs::assemble(&region, &EdgePotentials::new(), 2.0).unwrap();
        let u = VertexField::zeros(&region);
        assert!(matches!(
            corner_relation(&c, &u, VertexId::new(0, 0)),
            Err(Error::Uninformative(_))
        ));
    }

    #[test]
    fn missing_coefficient_is_reported_only_where_used() {
        let region = Region::new(1);
        let c = VertexCoeffs::new(2.0);
        let f = vec![0.0; region.boundary_len()];
        let g = vec![0.0; 2];
        // zero data touches no coefficient
        assert!(propagate(&region, &c, &f, &g).is_ok());
        let g = vec![1.0, 0.0];
        assert!(matches!(
            propagate(&region, &c, &f, &g),
            Err(Error::IncompleteFrontier(_))
        ));
    }
}
