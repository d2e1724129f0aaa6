//! Recovery of all interior-edge potentials from the edge D-N map.
//!
//! The vertex map is obtained from the edge map pointwise in `lambda`. The
//! diagonal lines `x1 + x2 = k` are then swept from `k = 2N` down to `N + 1`.
//! At level `k` the special solution vanishing below the line is built from
//! the vertex map and the potentials already recovered above the line. Its
//! values at the line give the characteristic functions of the two end edges
//! as ratios (their zeros are Dirichlet eigenvalues), and the vertex equation
//! at each line vertex gives the sum of the Weyl functions of its two unknown
//! edges. Two chains, one from each end of the line, alternate between the
//! two routes. The region is then turned by a half turn and swept again to
//! recover the lower triangle.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dn_maps::{check_t0, nearest_t0, lambda_v_from_e, DNMatrix, DnOracle, RotatedOracle};
use crate::edge_ode::{weyl, EdgeCharData, SymmetricPotential};
use crate::error::{Error, Result};
use crate::isp1d::{eigenvalues_from_psi_samples, recover_from_spectrum, recover_from_weyl, SpectrumTarget, WeylTarget};
use crate::lattice::{EdgeId, Region, VertexId};
use crate::numerics::EPS_DEN;
use crate::potentials::EdgePotentials;
use crate::vertex_system::{char_data, special_solution_above, VertexCoeffs};

/// Weyl samples closer than this to a free-edge eigenvalue are skipped; the
/// boundary coefficients blow up there and the isolated value loses digits.
pub const WEYL_T0_GUARD: f64 = 0.5;

const WEYL_REFIT_TRIGGER: f64 = 1e-6;
const OUTLIER_FACTOR: f64 = 20.0;

/// Which of the two diagonal sweeps is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    Original,
    Rotated,
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sweep::Original => "original",
            Sweep::Rotated => "rotated",
        })
    }
}

/// How the data can be queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    /// Any admissible `lambda` can be evaluated.
    Callable,
    /// Only stored nodes are exact; refinement interpolates.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconOptions {
    /// Cosine modes fitted beyond the constant term.
    pub basis_dim: usize,
    /// A priori bound on `|q|`, used for the spectral window.
    pub q_bound: f64,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Minimum number of admissible grid points in callable mode.
    pub grid_points: usize,
    /// Weyl samples used per fit.
    pub weyl_samples: usize,
    /// Fewer surviving samples than this fails the step.
    pub min_samples: usize,
    /// Root tolerance for eigenvalues in callable mode.
    pub root_tol: f64,
    /// Root tolerance for eigenvalues in file mode.
    pub file_root_tol: f64,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            basis_dim: 2,
            q_bound: 10.0,
            lambda_min: None,
            lambda_max: None,
            grid_points: 400,
            weyl_samples: 64,
            min_samples: 24,
            root_tol: 1e-10,
            file_root_tol: 1e-8,
        }
    }
}

impl ReconOptions {
    /// Spectral window `[lambda_min, lambda_max]`. The lower end sits below
    /// the smallest possible first eigenvalue `pi^2 - q_bound`.
    pub fn window(&self) -> (f64, f64) {
        let pi2 = std::f64::consts::PI.powi(2);
        let lo = self
            .lambda_min
            .unwrap_or_else(|| 0.3f64.min(pi2 - self.q_bound - 1.0));
        let hi = self
            .lambda_max
            .unwrap_or_else(|| ((self.basis_dim + 4) as f64 * std::f64::consts::PI).powi(2) + self.q_bound);
        (lo, hi)
    }

    /// Number of eigenvalues fitted per edge.
    pub fn eigen_count(&self) -> usize {
        self.basis_dim + 3
    }
}

/// How one edge was recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// From the zeros of a ratio-recovered characteristic function.
    Spectrum,
    /// From isolated Weyl-function samples.
    Weyl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub edge: EdgeId,
    pub sweep: Sweep,
    pub k: usize,
    pub method: Method,
    pub coefficients: Vec<f64>,
    pub fit_residual: f64,
    pub iterations: usize,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// Refinement evaluations answered by interpolating samples.
    pub interpolated: usize,
    /// Ratio-recovered characteristic function at the smallest positive
    /// sample; near 1 for small potentials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_near_zero: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub sweep: Sweep,
    pub k: usize,
    pub retained: usize,
    pub dropped: BTreeMap<String, usize>,
    /// Largest disagreement between the special solution and the boundary map.
    pub consistency: f64,
    /// Median relative residual of the vertex equation on the line after the
    /// step, i.e. how well the two chains fit together.
    pub vertex_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub edge: EdgeId,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub n: usize,
    pub mode: OracleMode,
    pub options: ReconOptions,
    pub window: (f64, f64),
    pub grid_size: usize,
    pub dropped_lambda: BTreeMap<String, usize>,
    pub edges: Vec<EdgeReport>,
    pub steps: Vec<StepReport>,
    pub overlaps: Vec<OverlapReport>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub potentials: EdgePotentials,
    pub report: ReconReport,
}

/// The sweep frontier: what is known in the frame of one sweep.
#[derive(Debug, Clone)]
pub struct ReconState {
    pub region: Region,
    pub sweep: Sweep,
    /// Next level to process.
    pub k: usize,
    pub grid: Vec<f64>,
    /// Boundary edges (zero) and recovered edges, in frame coordinates.
    pub known: BTreeMap<EdgeId, SymmetricPotential>,
    /// Forward endpoint data of every known edge on the grid.
    pub psi_table: HashMap<EdgeId, Vec<EdgeCharData>>,
    pub edges: Vec<EdgeReport>,
    pub steps: Vec<StepReport>,
}

impl ReconState {
    pub fn new(region: Region, sweep: Sweep, grid: Vec<f64>) -> Self {
        let mut known = BTreeMap::new();
        let mut psi_table = HashMap::new();
        for &e in region.boundary_edges() {
            known.insert(e, SymmetricPotential::zero());
            psi_table.insert(e, grid.iter().map(|&l| EdgeCharData::free(l)).collect());
        }
        let k = 2 * region.n();
        Self {
            region,
            sweep,
            k,
            grid,
            known,
            psi_table,
            edges: Vec::new(),
            steps: Vec::new(),
        }
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::json!({
            "sweep": self.sweep,
            "frontier_k": self.k,
            "grid_size": self.grid.len(),
            "recovered": self.edges,
            "steps": self.steps,
        })
    }
}

/// Samples `(lambda_i, value_i)` retained after masking.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFamily {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

/// `-(u_num / u_den) * psi_known` pointwise, dropping samples with
/// `|u_den| < EPS_DEN`. Returns the samples and the retained mask.
pub fn recovered_psi_ratio(
    lambdas: &[f64],
    u_num: &[f64],
    u_den: &[f64],
    psi_known: &[f64],
) -> Result<(SampleFamily, Vec<bool>)> {
    if u_num.len() != lambdas.len() || u_den.len() != lambdas.len() || psi_known.len() != lambdas.len() {
        return Err(Error::MaskMismatch);
    }
    let mask: Vec<bool> = u_den.iter().map(|d| d.abs() >= EPS_DEN).collect();
    let mut out = SampleFamily {
        lambdas: Vec::new(),
        values: Vec::new(),
    };
    for i in 0..lambdas.len() {
        if mask[i] {
            out.lambdas.push(lambdas[i]);
            out.values.push(-u_num[i] / u_den[i] * psi_known[i]);
        }
    }
    if out.lambdas.is_empty() {
        return Err(Error::Uninformative("every ratio denominator vanishes".into()));
    }
    Ok((out, mask))
}

/// `4 q_v - m_1 - m_2 - m_3` pointwise on a common mask.
pub fn isolate_weyl(qv: &SampleFamily, known: [&SampleFamily; 3]) -> Result<SampleFamily> {
    if known.iter().any(|f| f.lambdas != qv.lambdas) {
        return Err(Error::MaskMismatch);
    }
    let values = (0..qv.lambdas.len())
        .map(|i| 4.0 * qv.values[i] - known.iter().map(|f| f.values[i]).sum::<f64>())
        .collect();
    Ok(SampleFamily {
        lambdas: qv.lambdas.clone(),
        values,
    })
}

/// The special solution of one level at one `lambda`, read along the line.
#[derive(Debug, Clone)]
struct LevelSample {
    /// `u(alpha_0), ..., u(alpha_{n+1})`
    diag: Vec<f64>,
    /// `u(alpha_l + i)` for `l = 1..=n` (index `l - 1`)
    up: Vec<f64>,
    /// `u(alpha_l + 1)` for `l = 1..=n`
    right: Vec<f64>,
    consistency: f64,
}

fn coeffs_from(region: &Region, lambda: f64, chars: &HashMap<EdgeId, EdgeCharData>) -> Result<VertexCoeffs> {
    let mut c = VertexCoeffs::new(lambda);
    for (&e, d) in chars {
        if d.s1.abs() <= EPS_DEN {
            return Err(Error::NearEigenvalue { lambda, psi: d.s1 });
        }
        c.set_psi(e, d.s1);
    }
    for &v in region.interior() {
        let ws: Option<f64> = v
            .neighbors()
            .iter()
            .map(|&w| chars.get(&EdgeId::between(v, w).unwrap()).map(|d| d.ds1 / d.s1))
            .sum();
        if let Some(s) = ws {
            c.set_qv(v, 0.25 * s);
        }
    }
    Ok(c)
}

fn level_sample(
    region: &Region,
    lambda_v: &DNMatrix,
    chars: &HashMap<EdgeId, EdgeCharData>,
    diag: &[VertexId],
    k: usize,
) -> Result<LevelSample> {
    let coeffs = coeffs_from(region, lambda_v.lambda, chars)?;
    let s = special_solution_above(region, &coeffs, lambda_v, k)?;
    let inner = &diag[1..diag.len() - 1];
    Ok(LevelSample {
        diag: diag.iter().map(|&v| s.field.get(v)).collect(),
        up: inner.iter().map(|&v| s.field.get(v.up())).collect(),
        right: inner.iter().map(|&v| s.field.get(v.right())).collect(),
        consistency: s.consistency / s.field.max_abs(region).max(1.0),
    })
}

fn reason_key(e: &Error) -> String {
    match e {
        Error::Inadmissible { reason, .. } => match reason {
            crate::error::Reason::NearT0 { .. } => "near_t0",
            crate::error::Reason::EdgeEigenvalue { .. } => "edge_eigenvalue",
            crate::error::Reason::Singular { .. } => "singular",
            crate::error::Reason::Degenerate { .. } => "degenerate",
        }
        .into(),
        Error::NearEigenvalue { .. } => "known_edge_eigenvalue".into(),
        Error::IllConditioned { .. } => "ill_conditioned".into(),
        Error::IncompleteFrontier(_) => "incomplete_frontier".into(),
        Error::Uninformative(_) => "uninformative".into(),
        _ => "other".into(),
    }
}

/// One sweep's view of the data.
struct Frame<'a> {
    sweep: Sweep,
    oracle: &'a dyn DnOracle,
    mode: OracleMode,
    lambda_v: Vec<DNMatrix>,
}

impl Frame<'_> {
    fn lambda_v_at(&self, lambda: f64) -> Result<DNMatrix> {
        check_t0(lambda).map_err(|reason| Error::Inadmissible { lambda, reason })?;
        self.oracle.lambda_v(lambda)
    }
}

/// Unknown edges at a level: `L_l` joins `alpha_l - 1` and `alpha_l`,
/// `D_l` joins `alpha_l - i` and `alpha_l`.
#[derive(Debug, Clone, Copy)]
enum Item {
    /// Recover `edge` from the zeros of `-(u(alpha_num) / u(alpha_den)) psi(known)`.
    Zeros {
        edge: EdgeId,
        num: usize,
        den: usize,
        known: EdgeId,
    },
    /// Recover `edge` from the Weyl sum at `alpha_l` minus the other three edges.
    Weyl { edge: EdgeId, l: usize, partner: EdgeId },
}

/// The two chains at level `k`, each `n` items long.
fn chains(diag: &[VertexId]) -> (Vec<Item>, Vec<Item>) {
    let n = diag.len() - 2;
    let left_edge = |l: usize| EdgeId::left_of(diag[l]);
    let down_edge = |l: usize| EdgeId::down_of(diag[l]);
    let mut left = Vec::new();
    left.push(Item::Zeros {
        edge: left_edge(1),
        num: 1,
        den: 0,
        known: down_edge(0),
    });
    let mut l = 1;
    while left.len() < n {
        left.push(Item::Weyl {
            edge: down_edge(l),
            l,
            partner: left_edge(l),
        });
        if left.len() == n {
            break;
        }
        left.push(Item::Zeros {
            edge: left_edge(l + 1),
            num: l + 1,
            den: l,
            known: down_edge(l),
        });
        l += 1;
    }
    let mut right = Vec::new();
    right.push(Item::Zeros {
        edge: down_edge(n),
        num: n,
        den: n + 1,
        known: left_edge(n + 1),
    });
    let mut l = n;
    while right.len() < n {
        right.push(Item::Weyl {
            edge: left_edge(l),
            l,
            partner: down_edge(l),
        });
        if right.len() == n {
            break;
        }
        right.push(Item::Zeros {
            edge: down_edge(l - 1),
            num: l - 1,
            den: l,
            known: left_edge(l),
        });
        l -= 1;
    }
    (left, right)
}

struct StepContext<'a> {
    region: &'a Region,
    frame: &'a Frame<'a>,
    state: &'a ReconState,
    opts: &'a ReconOptions,
    k: usize,
    diag: Vec<VertexId>,
    samples: Vec<Option<LevelSample>>,
}

struct Recovered {
    edge: EdgeId,
    potential: SymmetricPotential,
    chars: Vec<EdgeCharData>,
    report: EdgeReport,
}

impl StepContext<'_> {
    fn char_on_grid(&self, local: &[Recovered], e: EdgeId, i: usize) -> EdgeCharData {
        match local.iter().find(|r| r.edge == e) {
            Some(r) => r.chars[i],
            None => self.state.psi_table[&e][i],
        }
    }

    /// Endpoint data of every known edge at an arbitrary `lambda`.
    fn chars_at(&self, local: &[Recovered], lambda: f64) -> Result<HashMap<EdgeId, EdgeCharData>> {
        self.state
            .known
            .iter()
            .map(|(&e, q)| (e, q))
            .chain(local.iter().map(|r| (r.edge, &r.potential)))
            .map(|(e, q)| Ok((e, char_data(q, lambda)?)))
            .collect()
    }

    fn run_chain(&self, items: &[Item]) -> Result<Vec<Recovered>> {
        let mut local: Vec<Recovered> = Vec::new();
        for &item in items {
            let rec = match item {
                Item::Zeros { edge, num, den, known } => self.by_zeros(&local, edge, num, den, known)?,
                Item::Weyl { edge, l, partner } => self.by_weyl(&local, edge, l, partner)?,
            };
            local.push(rec);
        }
        Ok(local)
    }

    fn finish(&self, edge: EdgeId, potential: SymmetricPotential, report: EdgeReport) -> Result<Recovered> {
        let chars = self
            .state
            .grid
            .par_iter()
            .map(|&l| char_data(&potential, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Recovered {
            edge,
            potential,
            chars,
            report,
        })
    }

    fn by_zeros(&self, local: &[Recovered], edge: EdgeId, num: usize, den: usize, known: EdgeId) -> Result<Recovered> {
        let mut lambdas = Vec::new();
        let (mut un, mut ud, mut pk) = (Vec::new(), Vec::new(), Vec::new());
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(s) = s {
                lambdas.push(self.state.grid[i]);
                un.push(s.diag[num]);
                ud.push(s.diag[den]);
                pk.push(self.char_on_grid(local, known, i).s1);
            }
        }
        let (family, _) = recovered_psi_ratio(&lambdas, &un, &ud, &pk)?;
        if family.lambdas.len() < self.opts.min_samples {
            return Err(Error::Uninformative(format!(
                "{} ratio samples for edge {edge}",
                family.lambdas.len()
            )));
        }
        let samples: Vec<(f64, f64)> = family.lambdas.iter().copied().zip(family.values.iter().copied()).collect();
        let psi_near_zero = samples.iter().find(|s| s.0 > 0.0).map(|s| s.1);

        let (tol, callable) = match self.frame.mode {
            OracleMode::Callable => (self.opts.root_tol, true),
            OracleMode::File => (self.opts.file_root_tol, false),
        };
        let evaluate = |lambda: f64| -> Result<f64> {
            if !callable {
                return Err(Error::Uninformative("sampled data".into()));
            }
            let lv = self.frame.lambda_v_at(lambda)?;
            let chars = self.chars_at(local, lambda)?;
            let s = level_sample(self.region, &lv, &chars, &self.diag, self.k)?;
            if s.diag[den].abs() < EPS_DEN {
                return Err(Error::Uninformative("vanishing denominator".into()));
            }
            Ok(-s.diag[num] / s.diag[den] * chars[&known].s1)
        };
        let scan = eigenvalues_from_psi_samples(&samples, evaluate, tol)?;
        let want = self.opts.eigen_count();
        if scan.zeros.len() < want {
            return Err(Error::Uninformative(format!(
                "edge {edge}: {} eigenvalues in the window, {want} needed (is q_bound exceeded?)",
                scan.zeros.len()
            )));
        }
        let eigs = scan.zeros[..want].to_vec();
        let fit = recover_from_spectrum(&SpectrumTarget::new(eigs.clone())?, self.opts.basis_dim)?;
        let report = EdgeReport {
            edge,
            sweep: self.frame.sweep,
            k: self.k,
            method: Method::Spectrum,
            coefficients: fit.potential.coefficients(),
            fit_residual: fit.residual,
            iterations: fit.iterations,
            samples: samples.len(),
            eigenvalues: Some(eigs),
            interpolated: scan.interpolated,
            psi_near_zero,
            warnings: scan.warnings,
        };
        self.finish(edge, fit.potential, report)
    }

    fn by_weyl(&self, local: &[Recovered], edge: EdgeId, l: usize, partner: EdgeId) -> Result<Recovered> {
        let alpha = self.diag[l];
        let (up, right) = (EdgeId::up_of(alpha), EdgeId::right_of(alpha));
        let mut qv = SampleFamily {
            lambdas: Vec::new(),
            values: Vec::new(),
        };
        let mut fams: [SampleFamily; 3] = std::array::from_fn(|_| qv.clone());
        for (i, s) in self.samples.iter().enumerate() {
            let Some(s) = s else { continue };
            let u = s.diag[l];
            let cs = [partner, up, right].map(|e| self.char_on_grid(local, e, i));
            if u.abs() < EPS_DEN || cs.iter().any(|d| d.s1.abs() <= EPS_DEN) {
                continue;
            }
            let lam = self.state.grid[i];
            if (lam - nearest_t0(lam)).abs() < WEYL_T0_GUARD {
                continue;
            }
            qv.lambdas.push(lam);
            qv.values.push((s.up[l - 1] / cs[1].s1 + s.right[l - 1] / cs[2].s1) / (4.0 * u));
            for (f, d) in fams.iter_mut().zip(&cs) {
                f.lambdas.push(lam);
                f.values.push(d.ds1 / d.s1);
            }
        }
        let w = isolate_weyl(&qv, [&fams[0], &fams[1], &fams[2]])?;
        let usable: Vec<(f64, f64)> = w
            .lambdas
            .iter()
            .copied()
            .zip(w.values.iter().copied())
            .filter(|s| s.1.abs() <= crate::isp1d::M_CAP)
            .collect();
        if usable.len() < self.opts.min_samples {
            return Err(Error::Uninformative(format!(
                "{} Weyl samples for edge {edge}",
                usable.len()
            )));
        }
        let take = self.opts.weyl_samples.min(usable.len());
        let picked: Vec<(f64, f64)> = (0..take)
            .map(|j| usable[j * (usable.len() - 1) / (take - 1).max(1)])
            .collect();
        let mut fit = recover_from_weyl(&WeylTarget::new(picked.clone())?, self.opts.basis_dim)?;
        let mut warnings = Vec::new();
        if fit.residual > WEYL_REFIT_TRIGGER {
            // one pass of outlier rejection against the first fit
            let misfit: Vec<f64> = picked
                .iter()
                .map(|&(l, m)| weyl(&fit.potential, l).map_or(f64::INFINITY, |w| (w - m).abs()))
                .collect();
            let mut sorted = misfit.clone();
            sorted.sort_by(f64::total_cmp);
            let cut = OUTLIER_FACTOR * sorted[sorted.len() / 2].max(1e-12);
            let kept: Vec<(f64, f64)> = picked.iter().zip(&misfit).filter(|p| *p.1 <= cut).map(|p| *p.0).collect();
            if kept.len() < picked.len() && kept.len() >= self.opts.min_samples {
                let refit = recover_from_weyl(&WeylTarget::new(kept.clone())?, self.opts.basis_dim)?;
                warnings.push(format!(
                    "dropped {} outlying Weyl samples, residual {:.2e} -> {:.2e}",
                    picked.len() - kept.len(),
                    fit.residual,
                    refit.residual
                ));
                fit = refit;
            }
        }
        let report = EdgeReport {
            edge,
            sweep: self.frame.sweep,
            k: self.k,
            method: Method::Weyl,
            coefficients: fit.potential.coefficients(),
            fit_residual: fit.residual,
            iterations: fit.iterations,
            samples: take,
            eigenvalues: None,
            interpolated: 0,
            psi_near_zero: None,
            warnings,
        };
        self.finish(edge, fit.potential, report)
    }

    /// Median over `lambda` of the worst relative vertex-equation residual on the line.
    fn vertex_residual(&self, local: &[Recovered]) -> f64 {
        let n = self.diag.len() - 2;
        let mut per_lambda: Vec<f64> = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            let Some(s) = s else { continue };
            let mut worst = 0.0f64;
            for l in 1..=n {
                let a = self.diag[l];
                let es = [EdgeId::left_of(a), EdgeId::down_of(a), EdgeId::up_of(a), EdgeId::right_of(a)];
                let cs = es.map(|e| self.char_on_grid(local, e, i));
                let u = s.diag[l];
                if u.abs() < EPS_DEN || cs.iter().any(|d| d.s1.abs() <= EPS_DEN) {
                    continue;
                }
                let four_qv = (s.up[l - 1] / cs[2].s1 + s.right[l - 1] / cs[3].s1) / u;
                let sum: f64 = cs.iter().map(|d| d.ds1 / d.s1).sum();
                worst = worst.max((four_qv - sum).abs() / (1.0 + four_qv.abs()));
            }
            per_lambda.push(worst);
        }
        if per_lambda.is_empty() {
            return f64::NAN;
        }
        per_lambda.sort_by(f64::total_cmp);
        per_lambda[per_lambda.len() / 2]
    }
}

/// Processes level `k` of the current sweep.
fn step_k(state: &mut ReconState, frame: &Frame<'_>, opts: &ReconOptions, k: usize) -> Result<()> {
    let region = state.region.clone();
    let diag = region.diagonal_vertices(k)?;

    let results: Vec<Result<LevelSample>> = (0..state.grid.len())
        .into_par_iter()
        .map(|i| {
            let chars: HashMap<EdgeId, EdgeCharData> =
                state.known.keys().map(|&e| (e, state.psi_table[&e][i])).collect();
            level_sample(&region, &frame.lambda_v[i], &chars, &diag, k)
        })
        .collect();
    let mut dropped = BTreeMap::new();
    let mut consistency = 0.0f64;
    let samples: Vec<Option<LevelSample>> = results
        .into_iter()
        .map(|r| match r {
            Ok(s) => {
                consistency = consistency.max(s.consistency);
                Some(s)
            }
            Err(e) => {
                *dropped.entry(reason_key(&e)).or_insert(0) += 1;
                None
            }
        })
        .collect();
    let retained = samples.iter().filter(|s| s.is_some()).count();
    if retained < opts.min_samples {
        return Err(Error::Uninformative(format!(
            "only {retained} usable lambda samples at k = {k}; resample"
        )));
    }

    let ctx = StepContext {
        region: &region,
        frame,
        state,
        opts,
        k,
        diag: diag.clone(),
        samples,
    };
    let (left, right) = chains(&diag);
    let (a, b) = rayon::join(|| ctx.run_chain(&left), || ctx.run_chain(&right));
    let mut local = a?;
    local.extend(b?);
    let vertex_residual = ctx.vertex_residual(&local);

    for r in local {
        state.known.insert(r.edge, r.potential);
        state.psi_table.insert(r.edge, r.chars);
        state.edges.push(r.report);
    }
    state.steps.push(StepReport {
        sweep: frame.sweep,
        k,
        retained,
        dropped,
        consistency,
        vertex_residual,
    });
    state.k = k - 1;
    Ok(())
}

fn run_sweep(region: &Region, frame: &Frame<'_>, grid: &[f64], opts: &ReconOptions) -> Result<ReconState> {
    let mut state = ReconState::new(region.clone(), frame.sweep, grid.to_vec());
    let n = region.n();
    for k in (n + 1..=2 * n).rev() {
        if let Err(e) = step_k(&mut state, frame, opts, k) {
            return Err(Error::Reconstruction {
                sweep: frame.sweep,
                k,
                message: e.to_string(),
                snapshot: Box::new(state.snapshot()),
            });
        }
    }
    Ok(state)
}

/// The working grid and the vertex map on it.
fn build_grid(oracle: &dyn DnOracle, opts: &ReconOptions) -> (Vec<f64>, Vec<DNMatrix>, BTreeMap<String, usize>, OracleMode) {
    let (lo, hi) = opts.window();
    let (candidates, mode): (Vec<f64>, OracleMode) = match oracle.nodes() {
        Some(nodes) => (
            nodes.iter().copied().filter(|&l| l >= lo && l <= hi).collect(),
            OracleMode::File,
        ),
        None => {
            // extra points so that the admissible ones still number grid_points
            let count = (opts.grid_points as f64 * 1.2).ceil() as usize;
            let step = (hi - lo) / (count - 1) as f64;
            ((0..count).map(|i| lo + i as f64 * step).collect(), OracleMode::Callable)
        }
    };
    let evaluated: Vec<Result<DNMatrix>> = candidates
        .par_iter()
        .map(|&l| {
            check_t0(l).map_err(|reason| Error::Inadmissible { lambda: l, reason })?;
            lambda_v_from_e(&oracle.lambda_e(l)?)
        })
        .collect();
    let mut grid = Vec::new();
    let mut maps = Vec::new();
    let mut dropped = BTreeMap::new();
    for (l, r) in candidates.into_iter().zip(evaluated) {
        match r {
            Ok(m) => {
                grid.push(l);
                maps.push(m);
            }
            Err(e) => *dropped.entry(reason_key(&e)).or_insert(0) += 1,
        }
    }
    (grid, maps, dropped, mode)
}

/// Recovers the potentials of all interior edges from the edge D-N map.
pub fn reconstruct_all(region: &Region, oracle: &dyn DnOracle, opts: &ReconOptions) -> Result<Reconstruction> {
    if oracle.region_n() != region.n() {
        return Err(Error::Schema(format!(
            "data is for N = {}, region has N = {}",
            oracle.region_n(),
            region.n()
        )));
    }
    let (grid, maps, dropped_lambda, mode) = build_grid(oracle, opts);
    if grid.len() < opts.min_samples {
        return Err(Error::Uninformative(format!(
            "{} admissible lambda in the window",
            grid.len()
        )));
    }

    let original = Frame {
        sweep: Sweep::Original,
        oracle,
        mode,
        lambda_v: maps.clone(),
    };
    let rotated_oracle = RotatedOracle::new(oracle);
    let perm = region.rotation_permutation();
    let rotated = Frame {
        sweep: Sweep::Rotated,
        oracle: &rotated_oracle,
        mode,
        lambda_v: maps.iter().map(|m| m.permuted(&perm)).collect(),
    };

    let first = run_sweep(region, &original, &grid, opts)?;
    let second = run_sweep(region, &rotated, &grid, opts)?;

    let mut found: BTreeMap<EdgeId, Vec<(SymmetricPotential, usize)>> = BTreeMap::new();
    let mut edges = Vec::new();
    for (state, to_original) in [(&first, false), (&second, true)] {
        for (idx, rep) in state.edges.iter().enumerate() {
            let e = if to_original { region.rotate_edge(rep.edge)? } else { rep.edge };
            let mut rep = rep.clone();
            rep.edge = e;
            found
                .entry(e)
                .or_default()
                .push((state.known[&state.edges[idx].edge].clone(), edges.len()));
            edges.push(rep);
        }
    }

    let mut potentials = EdgePotentials::new();
    let mut overlaps = Vec::new();
    for (e, list) in found {
        if list.len() == 1 {
            potentials.insert(e, list[0].0.clone());
            continue;
        }
        let a = &list[0].0;
        let b = &list[1].0;
        let discrepancy = a.l2_distance(b);
        let ca = a.coefficients();
        let cb = b.coefficients();
        let mean: Vec<f64> = (0..ca.len().max(cb.len()))
            .map(|i| 0.5 * (ca.get(i).unwrap_or(&0.0) + cb.get(i).unwrap_or(&0.0)))
            .collect();
        potentials.insert(e, SymmetricPotential::from_coefficients(&mean));
        overlaps.push(OverlapReport { edge: e, discrepancy });
    }

    let mut steps = first.steps;
    steps.extend(second.steps);
    Ok(Reconstruction {
        potentials,
        report: ReconReport {
            n: region.n(),
            mode,
            options: opts.clone(),
            window: opts.window(),
            grid_size: grid.len(),
            dropped_lambda,
            edges,
            steps,
            overlaps,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dn_maps::ForwardOracle;

    #[test]
    fn chains_match_the_worked_example() {
        let region = Region::new(3);
        // k = 6: one interior vertex, both edges from eigenvalues
        let (l, r) = chains(&region.diagonal_vertices(6).unwrap());
        assert!(matches!(l[..], [Item::Zeros { .. }]));
        assert!(matches!(r[..], [Item::Zeros { .. }]));
        // k = 5: end edges from eigenvalues, inner two from Weyl functions
        let (l, r) = chains(&region.diagonal_vertices(5).unwrap());
        assert!(matches!(l[..], [Item::Zeros { .. }, Item::Weyl { .. }]));
        assert!(matches!(r[..], [Item::Zeros { .. }, Item::Weyl { .. }]));
        // k = 4: three per chain, every unknown covered exactly once
        let diag = region.diagonal_vertices(4).unwrap();
        let (l, r) = chains(&diag);
        let mut edges: Vec<EdgeId> = l
            .iter()
            .chain(&r)
            .map(|i| match *i {
                Item::Zeros { edge, .. } | Item::Weyl { edge, .. } => edge,
            })
            .collect();
        edges.sort();
        let mut want: Vec<EdgeId> = diag[1..4]
            .iter()
            .flat_map(|&a| [EdgeId::left_of(a), EdgeId::down_of(a)])
            .collect();
        want.sort();
        assert_eq!(edges, want);
    }

    #[test]
    fn ratio_and_isolation_helpers() {
        let lams = [1.0, 2.0, 3.0];
        let (f, mask) = recovered_psi_ratio(&lams, &[1.0, 2.0, 3.0], &[2.0, 0.0, -1.0], &[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(mask, vec![true, false, true]);
        assert_eq!(f.values, vec![-0.5, 6.0]);
        assert!(recovered_psi_ratio(&lams, &[1.0; 3], &[0.0; 3], &[1.0; 3]).is_err());

        let fam = |v: f64| SampleFamily {
            lambdas: vec![1.0, 2.0],
            values: vec![v, v],
        };
        let w = isolate_weyl(&fam(1.0), [&fam(0.5), &fam(0.5), &fam(0.5)]).unwrap();
        assert_eq!(w.values, vec![2.5, 2.5]);
        let w2 = isolate_weyl(&fam(1.25), [&fam(0.5), &fam(0.5), &fam(0.5)]).unwrap();
        assert!((w2.values[0] - w.values[0] - 1.0).abs() < 1e-15);
        let other = SampleFamily {
            lambdas: vec![1.0],
            values: vec![0.0],
        };
        assert!(matches!(
            isolate_weyl(&fam(1.0), [&fam(0.5), &other, &fam(0.5)]),
            Err(Error::MaskMismatch)
        ));
    }

    #[test]
    fn zero_potential_single_cell() {
        let region = Region::new(1);
        let oracle = ForwardOracle::new(region.clone(), EdgePotentials::new()).unwrap();
        let opts = ReconOptions {
            basis_dim: 1,
            ..Default::default()
        };
        let out = reconstruct_all(&region, &oracle, &opts).unwrap();
        assert_eq!(out.potentials.len(), 4);
        for (_, q) in out.potentials.iter() {
            assert!(q.coefficients().iter().all(|c| c.abs() <= 1e-5), "{q:?}");
        }
    }

    #[test]
    fn every_edge_recovered_once_with_reports() {
        let region = Region::new(1);
        let mut pots = EdgePotentials::new();
        for (i, &e) in region.interior_edges().iter().enumerate() {
            pots.insert(e, SymmetricPotential::constant(0.4 * i as f64 - 0.5));
        }
        let oracle = ForwardOracle::new(region.clone(), pots.clone()).unwrap();
        let opts = ReconOptions {
            basis_dim: 1,
            ..Default::default()
        };
        let out = reconstruct_all(&region, &oracle, &opts).unwrap();
        let mut seen: Vec<EdgeId> = out.report.edges.iter().map(|r| r.edge).collect();
        seen.sort();
        let mut want = region.interior_edges().to_vec();
        want.sort();
        assert_eq!(seen, want);
        assert!(out.report.overlaps.is_empty());
        assert_eq!(out.report.steps.len(), 2);
        for (e, q) in pots.iter() {
            assert!(out.potentials.get(e).l2_distance(q) <= 1e-3 * q.l2_norm());
        }
        let json = serde_json::to_string(&out.report).unwrap();
        let back: ReconReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out.report);
    }

    #[test]
    fn short_window_fails_naming_the_step() {
        let region = Region::new(1);
        let oracle = ForwardOracle::new(region.clone(), EdgePotentials::new()).unwrap();
        let opts = ReconOptions {
            lambda_max: Some(60.0),
            ..Default::default()
        };
        match reconstruct_all(&region, &oracle, &opts) {
            Err(Error::Reconstruction { sweep, k, message, snapshot }) => {
                assert_eq!(sweep, Sweep::Original);
                assert_eq!(k, 2);
                assert!(message.contains("eigenvalues"), "{message}");
                assert_eq!(snapshot["frontier_k"], 2);
            }
            other => panic!("expected a reconstruction failure, got {other:?}"),
        }
    }
}
