//! Reproducible experiments driven by a TOML manifest.
//!
//! Every experiment writes its data as CSV files into the output directory, followed by
//! `run_metadata.toml` with the manifest, seed, crate version, wall time, SHA-256 digests of
//! the data files, and any grid points skipped by a capacity guard. Data files depend only
//! on the manifest.
//!
//! Manifest schema (all keys required):
//! ```toml
//! kind = "dp-entropy"     # scaling | exact-entropy | dp-entropy | hamiltonian-check | seqgen-check | phase-sweep
//! sizes = [5, 7, 9]
//! ps = [0.25, 0.5]
//! modes = ["reflecting"]  # reflecting | absorbing
//! colored = true
//! seed = 2024
//! samples = 200           # trajectories per scaling grid point
//! t_max = 40000           # slices per scaling trajectory
//! out = "runs/dp"
//!
//! [limits]
//! enumeration = 10000000  # bridge trajectories for exact states
//! profiles = 10000000     # surfaces per layer of the dynamic program
//! sector = 2000000        # basis states of the Hamiltonian sector
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entanglement::{
    entropy_exact, entropy_formula, fit_power_law, midcut_distribution_with_limit, Bipartition, EntropyReport,
    EntropyRow, PROFILE_LIMIT,
};
use crate::error::{Error, Result};
use crate::exact::{build_state_with_limit, ENUMERATION_LIMIT};
use crate::hamiltonian::{assemble_hamiltonian, sector_eigenpairs, term_residuals, SECTOR_LIMIT};
use crate::model::{BoundaryMode, ModelParams};
use crate::scaling::{default_fit_window, ensemble, exponent_report, saturated_roughness};
use crate::seqgen::{fidelity, run_generation};

/// File name of the run metadata.
pub const METADATA_FILE: &str = "run_metadata.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Scaling,
    ExactEntropy,
    DpEntropy,
    HamiltonianCheck,
    SeqgenCheck,
    PhaseSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Scaling,
        ExperimentKind::ExactEntropy,
        ExperimentKind::DpEntropy,
        ExperimentKind::HamiltonianCheck,
        ExperimentKind::SeqgenCheck,
        ExperimentKind::PhaseSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::ExactEntropy => "exact-entropy",
            ExperimentKind::DpEntropy => "dp-entropy",
            ExperimentKind::HamiltonianCheck => "hamiltonian-check",
            ExperimentKind::SeqgenCheck => "seqgen-check",
            ExperimentKind::PhaseSweep => "phase-sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Manifest(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityLimits {
    pub enumeration: usize,
    pub profiles: usize,
    pub sector: usize,
}

impl Default for CapacityLimits {
    fn default() -> Self {
        CapacityLimits {
            enumeration: ENUMERATION_LIMIT,
            profiles: PROFILE_LIMIT,
            sector: SECTOR_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub kind: ExperimentKind,
    pub sizes: Vec<usize>,
    pub ps: Vec<f64>,
    pub modes: Vec<BoundaryMode>,
    pub colored: bool,
    pub seed: u64,
    pub samples: usize,
    pub t_max: usize,
    pub out: PathBuf,
    pub limits: CapacityLimits,
}

impl ExperimentManifest {
    /// Defaults of each experiment kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (sizes, ps, modes): (Vec<usize>, Vec<f64>, Vec<BoundaryMode>) = match kind {
            ExperimentKind::Scaling => (vec![513], vec![0.5], vec![BoundaryMode::Reflecting]),
            ExperimentKind::ExactEntropy => (
                vec![3, 5],
                vec![0.25, 0.5, 0.8],
                vec![BoundaryMode::Reflecting, BoundaryMode::Absorbing],
            ),
            ExperimentKind::DpEntropy => (vec![5, 7, 9, 11, 13], vec![0.5], vec![BoundaryMode::Reflecting]),
            ExperimentKind::HamiltonianCheck => (vec![3], vec![0.25, 0.5, 0.8], vec![BoundaryMode::Absorbing]),
            ExperimentKind::SeqgenCheck => (vec![3, 5], vec![0.3, 0.5, 0.8], vec![BoundaryMode::Reflecting]),
            ExperimentKind::PhaseSweep => (
                vec![5, 7, 9, 11, 13],
                vec![0.25, 0.5, 0.8],
                vec![BoundaryMode::Reflecting],
            ),
        };
        ExperimentManifest {
            kind,
            sizes,
            ps,
            modes,
            colored: true,
            seed: 2024,
            samples: 200,
            t_max: 40_000,
            out: PathBuf::from("runs").join(kind.name()),
            limits: CapacityLimits::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let manifest: ExperimentManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.ps.is_empty() || self.modes.is_empty() {
            return Err(Error::Manifest("the parameter grid is empty".into()));
        }
        for params in self.grid_unchecked() {
            params.validate()?;
        }
        let only = |mode: BoundaryMode| -> Result<()> {
            if self.modes.iter().any(|&m| m != mode) {
                return Err(Error::Manifest(format!("{} runs in the {mode} mode only", self.kind)));
            }
            Ok(())
        };
        match self.kind {
            ExperimentKind::Scaling => {
                only(BoundaryMode::Reflecting)?;
                if self.samples == 0 || self.t_max == 0 {
                    return Err(Error::Manifest("scaling needs samples > 0 and t_max > 0".into()));
                }
            }
            ExperimentKind::SeqgenCheck => only(BoundaryMode::Reflecting)?,
            ExperimentKind::HamiltonianCheck => only(BoundaryMode::Absorbing)?,
            _ => {}
        }
        Ok(())
    }

    fn grid_unchecked(&self) -> Vec<ModelParams> {
        let mut grid = Vec::new();
        for &boundary in &self.modes {
            for &p in &self.ps {
                for &size in &self.sizes {
                    grid.push(ModelParams {
                        size,
                        p,
                        boundary,
                        colored: self.colored,
                        seed: self.seed,
                    });
                }
            }
        }
        grid
    }

    /// Grid points ordered by mode, then `p`, then `L`.
    pub fn grid(&self) -> Result<Vec<ModelParams>> {
        self.validate()?;
        Ok(self.grid_unchecked())
    }
}

/// Digest of one written data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// A grid point skipped by a capacity guard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub mode: BoundaryMode,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub files: Vec<FileDigest>,
    pub skipped: Vec<SkippedPoint>,
    pub manifest: ExperimentManifest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub data_files: Vec<PathBuf>,
    pub metadata_file: PathBuf,
    pub skipped: Vec<SkippedPoint>,
}

impl ExperimentOutcome {
    pub fn is_partial(&self) -> bool {
        !self.skipped.is_empty()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_bytes<T: Serialize>(rows: &[T], headers: &[&str]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        writer.write_record(headers).map_err(|e| Error::Io(e.to_string()))?;
    }
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| Error::Io(e.to_string()))
}

type PointResults<T> = (Vec<(ModelParams, T)>, Vec<SkippedPoint>);

/// Runs per-point work in parallel, keeping grid order. Capacity errors become skipped
/// points; any other error aborts.
fn per_point<T, F>(grid: &[ModelParams], f: F) -> Result<PointResults<T>>
where
    T: Send,
    F: Fn(&ModelParams) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = grid.par_iter().map(&f).collect();
    let mut done = Vec::new();
    let mut skipped = Vec::new();
    for (params, result) in grid.iter().zip(results) {
        match result {
            Ok(value) => done.push((*params, value)),
            Err(e @ Error::Capacity { .. }) => skipped.push(SkippedPoint {
                size: params.size,
                p: params.p,
                mode: params.boundary,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((done, skipped))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ScalingSummaryRow {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    samples: usize,
    t_max: usize,
    t_saturation: Option<usize>,
    fit_from: usize,
    fit_to: usize,
    w_exponent: Option<f64>,
    mid_exponent: Option<f64>,
    bulk_w_exponent: Option<f64>,
    w_saturated: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ResidualRow {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    colored: bool,
    term: usize,
    kind: &'static str,
    residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct SpectrumRow {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    colored: bool,
    terms: usize,
    sector_dim: usize,
    max_residual: f64,
    e0: f64,
    e1: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct SeqgenRow {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    colored: bool,
    cooling: bool,
    fidelity: f64,
    success_probability: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ExponentRow {
    p: f64,
    mode: String,
    sizes: String,
    exponent: f64,
    amplitude: f64,
    r_squared: f64,
}

fn kind_label(kind: &crate::hamiltonian::TermKind) -> &'static str {
    use crate::hamiltonian::TermKind;
    match kind {
        TermKind::Initial => "initial",
        TermKind::Final => "final",
        TermKind::Left => "left",
        TermKind::Right => "right",
        TermKind::Gauss => "gauss",
        TermKind::Color => "color",
        TermKind::Update { .. } => "update",
    }
}

type DataFiles = Vec<(String, Vec<u8>)>;

const ENTROPY_HEADERS: [&str; 8] = [
    "L",
    "p",
    "mode",
    "cut",
    "method",
    "S_uncolored",
    "color_term",
    "S_total",
];

fn dp_report(params: &ModelParams, limit: usize) -> Result<EntropyReport> {
    let dist = midcut_distribution_with_limit(params, params.mid_cut(), limit)?;
    let mut report = entropy_formula(&dist);
    if !params.colored {
        report.color_term = 0.0;
        report.s_total = report.s_uncolored;
    }
    report.method = crate::entanglement::EntropyMethod::Dp;
    Ok(report)
}

fn run_kind(manifest: &ExperimentManifest) -> Result<(DataFiles, Vec<SkippedPoint>)> {
    let grid = manifest.grid()?;
    let limits = manifest.limits;
    let mut files: DataFiles = Vec::new();
    let skipped;
    match manifest.kind {
        ExperimentKind::Scaling => {
            let (done, s) = per_point(&grid, |params| ensemble(params, manifest.samples, manifest.t_max))?;
            skipped = s;
            let mut summary = Vec::new();
            for (params, series) in &done {
                let name = format!("scaling_L{}_p{}.csv", params.size, params.p);
                files.push((
                    name,
                    csv_bytes(
                        &series.rows(),
                        &["t", "W_mean", "W_stderr", "mid_mean", "mid_stderr", "n"],
                    )?,
                ));
                let (window, saturation) = default_fit_window(series)?;
                let report = if window.0 < window.1 {
                    exponent_report(series, window).ok()
                } else {
                    None
                };
                summary.push(ScalingSummaryRow {
                    size: params.size,
                    p: params.p,
                    samples: manifest.samples,
                    t_max: manifest.t_max,
                    t_saturation: saturation,
                    fit_from: window.0,
                    fit_to: window.1,
                    w_exponent: report.map(|r| r.w.exponent),
                    mid_exponent: report.map(|r| r.mid.exponent),
                    bulk_w_exponent: report.map(|r| r.bulk_w.exponent),
                    w_saturated: saturated_roughness(series)?,
                });
            }
            files.push(("scaling_summary.csv".into(), csv_bytes(&summary, &["L"])?));
        }
        ExperimentKind::ExactEntropy => {
            let (done, s) = per_point(&grid, |params| {
                let state = build_state_with_limit(params, limits.enumeration)?;
                let cut = params.mid_cut();
                let svd = entropy_exact(&state, Bipartition::SpaceLike { cut_row: cut })?;
                let formula = entropy_formula(&midcut_distribution_with_limit(params, cut, limits.profiles)?);
                Ok(vec![
                    EntropyRow::new(params, cut, &svd),
                    EntropyRow::new(params, cut, &formula),
                ])
            })?;
            skipped = s;
            let rows: Vec<EntropyRow> = done.into_iter().flat_map(|(_, r)| r).collect();
            files.push(("entropy.csv".into(), csv_bytes(&rows, &ENTROPY_HEADERS)?));
        }
        ExperimentKind::DpEntropy | ExperimentKind::PhaseSweep => {
            let (done, s) = per_point(&grid, |params| dp_report(params, limits.profiles))?;
            skipped = s;
            let rows: Vec<EntropyRow> = done
                .iter()
                .map(|(params, report)| EntropyRow::new(params, params.mid_cut(), report))
                .collect();
            let name = if manifest.kind == ExperimentKind::PhaseSweep {
                "phase_sweep.csv"
            } else {
                "entropy.csv"
            };
            files.push((name.into(), csv_bytes(&rows, &ENTROPY_HEADERS)?));
            if manifest.kind == ExperimentKind::PhaseSweep {
                let mut exponents = Vec::new();
                for &mode in &manifest.modes {
                    for &p in &manifest.ps {
                        let (xs, ys): (Vec<f64>, Vec<f64>) = done
                            .iter()
                            .filter(|(q, _)| q.boundary == mode && q.p == p)
                            .map(|(q, r)| (q.size as f64, r.s_total))
                            .unzip();
                        if let Ok(fit) = fit_power_law(&xs, &ys) {
                            let sizes: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                            exponents.push(ExponentRow {
                                p,
                                mode: mode.to_string(),
                                sizes: sizes.join(" "),
                                exponent: fit.exponent,
                                amplitude: fit.amplitude,
                                r_squared: fit.r_squared,
                            });
                        }
                    }
                }
                files.push(("phase_exponents.csv".into(), csv_bytes(&exponents, &["p"])?));
            }
        }
        ExperimentKind::HamiltonianCheck => {
            let (done, s) = per_point(&grid, |params| {
                let h = assemble_hamiltonian(params)?;
                let state = build_state_with_limit(params, limits.enumeration)?;
                let residuals = term_residuals(&h, &state)?;
                let spectrum = sector_eigenpairs(&h, 2, limits.sector)?;
                let labels: Vec<&'static str> = h.terms.iter().map(|t| kind_label(&t.kind)).collect();
                Ok((residuals, labels, spectrum.sector.len(), spectrum.pairs.values))
            })?;
            skipped = s;
            let mut residual_rows = Vec::new();
            let mut spectrum_rows = Vec::new();
            for (params, (residuals, labels, dim, values)) in &done {
                for (term, (&residual, &kind)) in residuals.iter().zip(labels).enumerate() {
                    residual_rows.push(ResidualRow {
                        size: params.size,
                        p: params.p,
                        colored: params.colored,
                        term,
                        kind,
                        residual,
                    });
                }
                spectrum_rows.push(SpectrumRow {
                    size: params.size,
                    p: params.p,
                    colored: params.colored,
                    terms: residuals.len(),
                    sector_dim: *dim,
                    max_residual: residuals.iter().copied().fold(0.0, f64::max),
                    e0: values[0],
                    e1: values.get(1).copied(),
                });
            }
            files.push(("hamiltonian_residuals.csv".into(), csv_bytes(&residual_rows, &["L"])?));
            files.push(("hamiltonian_spectrum.csv".into(), csv_bytes(&spectrum_rows, &["L"])?));
        }
        ExperimentKind::SeqgenCheck => {
            let (done, s) = per_point(&grid, |params| {
                let exact = build_state_with_limit(params, limits.enumeration)?;
                [false, true]
                    .into_iter()
                    .map(|cooling| {
                        let g = run_generation(params, cooling)?;
                        Ok(SeqgenRow {
                            size: params.size,
                            p: params.p,
                            colored: params.colored,
                            cooling,
                            fidelity: fidelity(&g.state, &exact)?,
                            success_probability: g.success_probability,
                        })
                    })
                    .collect::<Result<Vec<SeqgenRow>>>()
            })?;
            skipped = s;
            let rows: Vec<SeqgenRow> = done.into_iter().flat_map(|(_, r)| r).collect();
            files.push(("seqgen.csv".into(), csv_bytes(&rows, &["L"])?));
        }
    }
    Ok((files, skipped))
}

/// Runs the experiment and writes its data files and metadata into `manifest.out`.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    manifest.validate()?;
    let started = Instant::now();
    let (files, skipped) = run_kind(manifest)?;
    fs::create_dir_all(&manifest.out)?;
    let mut data_files = Vec::new();
    let mut digests = Vec::new();
    for (name, bytes) in files {
        let path = manifest.out.join(&name);
        fs::write(&path, &bytes)?;
        digests.push(FileDigest {
            name,
            sha256: sha256_hex(&bytes),
        });
        data_files.push(path);
    }
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: manifest.seed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        files: digests,
        skipped: skipped.clone(),
        manifest: manifest.clone(),
    };
    let metadata_file = manifest.out.join(METADATA_FILE);
    let text = toml::to_string(&metadata).map_err(|e| Error::Manifest(e.to_string()))?;
    fs::write(&metadata_file, text)?;
    Ok(ExperimentOutcome {
        data_files,
        metadata_file,
        skipped,
    })
}

/// SHA-256 digests of the data files of a finished run, in write order.
pub fn data_digests(outcome: &ExperimentOutcome) -> Result<Vec<String>> {
    outcome
        .data_files
        .iter()
        .map(|path| Ok(sha256_hex(&fs::read(path)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        for kind in ExperimentKind::ALL {
            let m = ExperimentManifest::defaults(kind);
            let text = m.to_toml_string().unwrap();
            assert_eq!(ExperimentManifest::from_toml_str(&text).unwrap(), m);
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn manifest_validation() {
        let mut m = ExperimentManifest::defaults(ExperimentKind::DpEntropy);
        m.sizes.clear();
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
        let mut m = ExperimentManifest::defaults(ExperimentKind::HamiltonianCheck);
        m.modes = vec![BoundaryMode::Reflecting];
        assert!(m.validate().is_err());
        let mut m = ExperimentManifest::defaults(ExperimentKind::DpEntropy);
        m.sizes = vec![4];
        assert!(m.validate().is_err());
        assert!(ExperimentManifest::from_toml_str("kind = \"scaling\"").is_err());
        let text = ExperimentManifest::defaults(ExperimentKind::Scaling)
            .to_toml_string()
            .unwrap();
        assert!(ExperimentManifest::from_toml_str(&format!("{text}\nextra = 1\n")).is_err());
    }

    #[test]
    fn capacity_breach_is_reported_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = ExperimentManifest::defaults(ExperimentKind::ExactEntropy);
        m.sizes = vec![3, 5];
        m.ps = vec![0.5];
        m.modes = vec![BoundaryMode::Reflecting];
        m.limits.enumeration = 10;
        m.out = dir.path().to_path_buf();
        let outcome = run_experiment(&m).unwrap();
        assert_eq!(outcome.skipped.len(), 1);
        assert_eq!(outcome.skipped[0].size, 5);
        let text = fs::read_to_string(&outcome.data_files[0]).unwrap();
        assert_eq!(text.lines().count(), 3);
        let meta: RunMetadata = toml::from_str(&fs::read_to_string(outcome.metadata_file).unwrap()).unwrap();
        assert_eq!(meta.manifest, m);
        assert_eq!(meta.skipped.len(), 1);
    }
}
