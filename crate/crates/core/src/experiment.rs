//! Batch experiments driven by a JSON config: forward sampling, reconstruction
//! from a sample file, planted round trips and single-edge spectra.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dn_file::{uniform_grid, DnFile, DroppedLambda, Payload};
use crate::dn_maps::ForwardOracle;
use crate::edge_ode::{dirichlet_eigenvalues, weyl, SymmetricPotential};
use crate::error::{Error, Result};
use crate::lattice::{EdgeId, Region};
use crate::potentials::EdgePotentials;
use crate::reconstruct::{reconstruct_all, OracleMode, ReconOptions, ReconReport, Reconstruction};

/// Potentials generated rather than listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Planted {
    /// Constants taken cyclically from `values`, in edge order.
    Cycle { values: Vec<f64> },
    /// Random cosine coefficients in `[-amplitude, amplitude]`, seeded by `--seed`.
    Random { basis_dim: usize, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Sample points per unit of `lambda` for written files.
    pub density: f64,
    /// Explicit grid; overrides the window when present.
    pub lambdas: Option<Vec<f64>>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            lambda_min: None,
            lambda_max: None,
            density: 4.0,
            lambdas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Per-edge bound on `|q_rec - q|_2 / |q|_2`.
    pub relative_l2: f64,
    /// Absolute floor used for edges whose planted potential is (near) zero.
    pub absolute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            relative_l2: 1e-3,
            absolute: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dn_file: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub edge: Option<EdgeId>,
    pub eigenvalues: usize,
    /// Weyl samples per unit of `lambda` over the window.
    pub weyl_density: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            edge: None,
            eigenvalues: 5,
            weyl_density: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(default)]
    pub potentials: EdgePotentials,
    #[serde(default)]
    pub planted: Option<Planted>,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub recon: ReconOptions,
    /// Oracle modes exercised by `roundtrip`; with both, their discrepancy is reported.
    #[serde(default = "default_modes")]
    pub modes: Vec<OracleMode>,
    #[serde(default)]
    pub payload: Payload,
    #[serde(default)]
    pub tolerance: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

fn default_modes() -> Vec<OracleMode> {
    vec![OracleMode::Callable]
}

impl ExperimentConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            potentials: EdgePotentials::new(),
            planted: None,
            window: WindowConfig::default(),
            recon: ReconOptions::default(),
            modes: default_modes(),
            payload: Payload::Csv,
            tolerance: Tolerances::default(),
            outputs: Outputs::default(),
            spectrum: SpectrumConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn region(&self) -> Region {
        Region::new(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.potentials.validate(&self.region())?;
        if self.window.density.is_nan() || self.window.density <= 0.0 {
            return Err(Error::Schema("window density must be positive".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Schema("at least one oracle mode is required".into()));
        }
        if let Some(Planted::Cycle { values }) = &self.planted {
            if values.is_empty() {
                return Err(Error::Schema("planted cycle needs at least one value".into()));
            }
        }
        Ok(())
    }

    /// Listed potentials, with any generated ones filling the remaining edges.
    pub fn planted_potentials(&self, seed: u64) -> Result<EdgePotentials> {
        self.validate()?;
        let region = self.region();
        let mut out = self.potentials.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, &e) in region.interior_edges().iter().enumerate() {
            if out.contains(e) {
                continue;
            }
            match &self.planted {
                Some(Planted::Cycle { values }) => out.insert(e, SymmetricPotential::constant(values[i % values.len()])),
                Some(Planted::Random { basis_dim, amplitude }) => {
                    out.insert(e, crate::potentials::random_potential(*basis_dim, *amplitude, &mut rng))
                }
                None => {}
            }
        }
        Ok(out)
    }

    /// Grid written by `forward`: the explicit list, or the window at the configured density.
    pub fn grid(&self) -> Vec<f64> {
        if let Some(l) = &self.window.lambdas {
            return l.clone();
        }
        let (lo, hi) = self.recon_options().window();
        uniform_grid(lo, hi, self.window.density)
    }

    /// Reconstruction options with the config window applied.
    pub fn recon_options(&self) -> ReconOptions {
        let mut o = self.recon.clone();
        o.lambda_min = self.window.lambda_min.or(o.lambda_min);
        o.lambda_max = self.window.lambda_max.or(o.lambda_max);
        o
    }
}

/// Process exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::NotInRegion(_)
        | Error::OutOfRange { .. }
        | Error::MaskMismatch => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub path: PathBuf,
    pub samples: usize,
    pub dropped: Vec<DroppedLambda>,
}

/// Samples the edge map of the configured potentials and writes the file.
pub fn cmd_forward(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<ForwardSummary> {
    let pots = cfg.planted_potentials(seed)?;
    let file = DnFile::from_forward(&cfg.region(), &pots, &cfg.grid())?;
    file.write(out, cfg.payload)?;
    Ok(ForwardSummary {
        path: out.to_path_buf(),
        samples: file.samples.len(),
        dropped: file.dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntryReport {
    pub edge: EdgeId,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOutput {
    pub potentials: Vec<EdgeEntryReport>,
    pub report: ReconReport,
}

fn recon_output(region: &Region, r: &Reconstruction) -> ReconstructOutput {
    ReconstructOutput {
        potentials: region
            .interior_edges()
            .iter()
            .map(|&e| EdgeEntryReport {
                edge: e,
                coefficients: r.potentials.get(e).coefficients(),
            })
            .collect(),
        report: r.report.clone(),
    }
}

/// Reconstructs from a sample file.
pub fn cmd_reconstruct(dn_file: &Path, opts: &ReconOptions) -> Result<ReconstructOutput> {
    let file = DnFile::read(dn_file)?;
    let region = Region::new(file.n);
    let oracle = file.into_oracle()?;
    let r = reconstruct_all(&region, &oracle, opts)?;
    Ok(recon_output(&region, &r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeComparison {
    pub edge: EdgeId,
    pub planted: Vec<f64>,
    pub recovered: Vec<f64>,
    pub l2_error: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRun {
    pub mode: OracleMode,
    pub comparison: Vec<EdgeComparison>,
    pub worst_relative: f64,
    pub passed: bool,
    pub reconstruction: ReconReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub n: usize,
    pub tolerance: Tolerances,
    pub runs: Vec<ModeRun>,
    /// Largest per-edge `L2` distance between the callable and file results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_discrepancy: Option<f64>,
    pub passed: bool,
}

/// Planted potentials are sent through the forward map and recovered again.
pub fn cmd_roundtrip(cfg: &ExperimentConfig, seed: u64) -> Result<RoundtripReport> {
    let region = cfg.region();
    let planted = cfg.planted_potentials(seed)?;
    let opts = cfg.recon_options();
    let mut runs = Vec::new();
    let mut results: Vec<Reconstruction> = Vec::new();
    for &mode in &cfg.modes {
        let r = match mode {
            OracleMode::Callable => {
                let oracle = ForwardOracle::new(region.clone(), planted.clone())?;
                reconstruct_all(&region, &oracle, &opts)?
            }
            OracleMode::File => {
                let file = DnFile::from_forward(&region, &planted, &cfg.grid())?;
                // go through the serialized form so the round trip covers the file format
                let mut buf = Vec::new();
                file.write_to(&mut buf, cfg.payload)?;
                if let Some(p) = &cfg.outputs.dn_file {
                    std::fs::write(p, &buf)?;
                }
                let oracle = DnFile::read_from(&buf[..])?.into_oracle()?;
                reconstruct_all(&region, &oracle, &opts)?
            }
        };
        let comparison: Vec<EdgeComparison> = region
            .interior_edges()
            .iter()
            .map(|&e| {
                let q = planted.get(e);
                let got = r.potentials.get(e);
                let l2_error = got.l2_distance(q);
                let norm = q.l2_norm();
                let relative_error = if norm > 0.0 { l2_error / norm } else { f64::INFINITY };
                EdgeComparison {
                    edge: e,
                    planted: q.coefficients(),
                    recovered: got.coefficients(),
                    l2_error,
                    relative_error,
                    passed: l2_error <= (cfg.tolerance.relative_l2 * norm).max(cfg.tolerance.absolute),
                }
            })
            .collect();
        let worst_relative = comparison
            .iter()
            .filter(|c| c.relative_error.is_finite())
            .map(|c| c.relative_error)
            .fold(0.0, f64::max);
        runs.push(ModeRun {
            mode,
            passed: comparison.iter().all(|c| c.passed),
            comparison,
            worst_relative,
            reconstruction: r.report.clone(),
        });
        results.push(r);
    }
    let mode_discrepancy = (results.len() == 2).then(|| {
        region
            .interior_edges()
            .iter()
            .map(|&e| results[0].potentials.get(e).l2_distance(results[1].potentials.get(e)))
            .fold(0.0, f64::max)
    });
    Ok(RoundtripReport {
        n: cfg.n,
        tolerance: cfg.tolerance.clone(),
        passed: runs.iter().all(|r| r.passed),
        runs,
        mode_discrepancy,
    })
}

/// Dirichlet eigenvalues and Weyl samples of one edge as CSV with columns
/// `kind,index,lambda,weyl` (`weyl` is empty on eigenvalue rows).
pub fn cmd_spectrum(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let edge = cfg
        .spectrum
        .edge
        .ok_or_else(|| Error::Schema("spectrum.edge is required".into()))?;
    if !cfg.region().is_interior_edge(edge) {
        return Err(Error::Schema(format!("{edge} is not an interior edge")));
    }
    let q = cfg.planted_potentials(seed)?.get(edge).clone();
    let mut out = String::from("kind,index,lambda,weyl\n");
    for (i, l) in dirichlet_eigenvalues(&q, cfg.spectrum.eigenvalues)?.iter().enumerate() {
        writeln!(out, "eigenvalue,{},{l:.16e},", i + 1).unwrap();
    }
    let (lo, hi) = cfg.recon_options().window();
    let mut idx = 0;
    for l in uniform_grid(lo, hi, cfg.spectrum.weyl_density) {
        // points on an eigenvalue have no finite Weyl value
        if let Ok(m) = weyl(&q, l) {
            idx += 1;
            writeln!(out, "weyl,{idx},{l:.16e},{m:.16e}").unwrap();
        }
    }
    Ok(out)
}
