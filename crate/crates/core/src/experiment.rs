//! Declarative experiment runner.
//!
//! A JSON config names one experiment, the carrier and the geometry. Every
//! grid point is independent and evaluated on a rayon pool; results are
//! collected in grid order and written serially, so the files do not depend
//! on the thread count.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channel::{
    farfield_planar_channel, iid_rayleigh_channel, los_nusw_channel, los_usw_channel, ChannelMatrix, ChannelModel,
};
use crate::error::{Error, Result};
use crate::geometry::{
    canonical_segment_pair, canonical_ula_pair, classify_region, mimo_rayleigh_distance, ApertureRule, CarrierConfig,
    Point3, Region,
};
use crate::io::{emit_plot_data, write_file, PlotFormat, Provenance, ResultTable};
use crate::kernel::{build_kernel, cap_edof1, cap_edof2, cap_spectrum, converge_spectrum, EigenSpectrum};
use crate::link::{run_link, trace_symbols, TransmissionConfig};
use crate::modes::{
    capacity, decompose_matrix, dof, edof1, edof1_knee, edof1_limit_linear, edof2, edof3_adaptive, singular_values_of,
    waterfill, CapacityPolicy, SingularSpectrum, DEFAULT_DELTA, DEFAULT_DOMINANCE,
};

/// Environment variable that overrides the config's output directory.
pub const OUT_ENV: &str = "NFDOF_OUT";
const DEFAULT_OUT: &str = "nfdof-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    EdofVsN,
    Edof2VsN,
    Edof3VsSnr,
    CapEdofVsDistance,
    LinkSim,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::EdofVsN => "edof-vs-n",
            ExperimentKind::Edof2VsN => "edof2-vs-n",
            ExperimentKind::Edof3VsSnr => "edof3-vs-snr",
            ExperimentKind::CapEdofVsDistance => "cap-edof-vs-distance",
            ExperimentKind::LinkSim => "link-sim",
        }
    }
}

/// Exactly one of the two must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
}

impl CarrierSpec {
    pub fn resolve(&self) -> Result<CarrierConfig> {
        match (self.frequency_hz, self.wavelength_m) {
            (Some(f), None) => CarrierConfig::from_frequency(f),
            (None, Some(l)) => CarrierConfig::from_wavelength(l),
            _ => Err(Error::Config("carrier needs exactly one of frequency_hz or wavelength_m".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistanceGrid {
    List { values: Vec<f64> },
    /// `points` log-spaced values from `start` to `stop` inclusive.
    Log { start: f64, stop: f64, points: usize },
}

impl DistanceGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            DistanceGrid::List { values } => values.clone(),
            DistanceGrid::Log { start, stop, points } => log_grid(*start, *stop, *points),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DistanceGrid::List { values } => {
                if values.is_empty() {
                    return Err(Error::Config("distance list is empty".into()));
                }
                if values.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return Err(Error::Config("distances must be positive".into()));
                }
            }
            DistanceGrid::Log { start, stop, points } => {
                if !(start.is_finite() && stop.is_finite() && *start > 0.0 && stop > start) {
                    return Err(Error::Config("log grid needs 0 < start < stop".into()));
                }
                if *points < 2 {
                    return Err(Error::Config("log grid needs at least two points".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BareRange {
    start: f64,
    stop: f64,
    points: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridRepr {
    Tagged(DistanceGrid),
    Bare(BareRange),
}

fn grid_log_by_default<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<DistanceGrid, D::Error> {
    Ok(match GridRepr::deserialize(de)? {
        GridRepr::Tagged(grid) => grid,
        GridRepr::Bare(BareRange { start, stop, points }) => DistanceGrid::Log { start, stop, points },
    })
}

/// `points` log-spaced values from `start` to `stop`, endpoints exact.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    (0..points)
        .map(|i| match i {
            0 => start,
            _ if i == points - 1 => stop,
            _ => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
        })
        .collect()
}

/// How the element count sweep fills the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NSweep {
    /// Aperture fixed by `apertures_m`; spacing shrinks as N grows.
    #[default]
    FixedAperture,
    /// Spacing fixed at λ/2; aperture grows as `(N − 1)·λ/2`.
    HalfWavelength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apertures_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_elements: Option<Vec<usize>>,
    /// A bare `{start, stop, points}` object is read as a log grid.
    #[serde(deserialize_with = "grid_log_by_default")]
    pub distances_m: DistanceGrid,
    /// Unit vector both apertures lie along.
    pub axis: [f64; 3],
    #[serde(default = "default_model")]
    pub model: ChannelModel,
    #[serde(default)]
    pub n_sweep: NSweep,
    #[serde(default)]
    pub rayleigh_rule: ApertureRule,
}

fn default_model() -> ChannelModel {
    ChannelModel::Nusw
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Relative DoF threshold; defaults to `1e-10·max(N_r, N_t)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_snr_db")]
    pub snr_db: Vec<f64>,
    /// Rescale channels to `‖H‖_F² = N_t·N_r` before capacity and EDoF₃.
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default = "default_kernel_tol")]
    pub kernel_tol: f64,
    /// Fixed quadrature size; when absent the kernel spectrum is converged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_nodes: Option<usize>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            rank_tol: None,
            delta: default_delta(),
            snr_db: default_snr_db(),
            normalize: true,
            kernel_tol: default_kernel_tol(),
            kernel_nodes: None,
        }
    }
}

fn default_eta() -> f64 {
    DEFAULT_DOMINANCE
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_snr_db() -> Vec<f64> {
    vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0]
}
fn default_true() -> bool {
    true
}
fn default_kernel_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub n_symbols: usize,
    /// Defaults to EDoF₁ of the channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_modes: Option<usize>,
    #[serde(default)]
    pub dump_symbols: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub carrier: CarrierSpec,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks every parameter the chosen experiment will touch.
    pub fn validate(&self) -> Result<()> {
        self.carrier.resolve().map_err(as_config)?;
        let g = &self.geometry;
        g.distances_m.validate()?;
        let axis = Point3::from(g.axis);
        if ((axis.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::Config(format!("geometry.axis must have unit norm, got {}", axis.norm())));
        }
        let m = &self.metrics;
        if !(m.eta > 0.0 && m.eta < 1.0) {
            return Err(Error::Config(format!("metrics.eta must lie in (0, 1), got {}", m.eta)));
        }
        if let Some(t) = m.rank_tol {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config("metrics.rank_tol must be non-negative".into()));
            }
        }
        if !(m.delta > 0.0 && m.delta <= 0.05) {
            return Err(Error::Config(format!("metrics.delta must lie in (0, 0.05], got {}", m.delta)));
        }
        if m.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("metrics.snr_db must be finite".into()));
        }
        if !(m.kernel_tol > 0.0) {
            return Err(Error::Config("metrics.kernel_tol must be positive".into()));
        }
        if let Some(k) = m.kernel_nodes {
            if k < crate::kernel::MIN_NODES {
                return Err(Error::Config(format!("metrics.kernel_nodes must be at least {}", crate::kernel::MIN_NODES)));
            }
        }

        let needs_elements = !matches!(self.experiment, ExperimentKind::CapEdofVsDistance);
        let half_wave = self.experiment == ExperimentKind::Edof2VsN && g.n_sweep == NSweep::HalfWavelength;
        if needs_elements && g.n_elements.as_ref().is_none_or(Vec::is_empty) {
            return Err(Error::Config(format!("{} needs geometry.n_elements", self.experiment.as_str())));
        }
        if let Some(ns) = &g.n_elements {
            if ns.contains(&0) {
                return Err(Error::Config("geometry.n_elements entries must be at least 1".into()));
            }
            if half_wave && ns.iter().any(|&n| n < 2) {
                return Err(Error::Config("a half-wavelength sweep needs at least 2 elements".into()));
            }
        }
        match (&g.apertures_m, half_wave) {
            (Some(_), true) => {
                return Err(Error::Config("geometry.apertures_m conflicts with n_sweep = half_wavelength".into()));
            }
            (None, false) => return Err(Error::Config("geometry.apertures_m is required".into())),
            (Some(a), false) => {
                if a.is_empty() || a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Config("geometry.apertures_m must be non-empty and positive".into()));
                }
                let single = g.n_elements.as_ref().is_some_and(|ns| ns.contains(&1));
                if single && needs_elements {
                    return Err(Error::Config("a single-element array cannot span a positive aperture".into()));
                }
            }
            (None, true) => {}
        }
        if matches!(self.experiment, ExperimentKind::Edof2VsN | ExperimentKind::CapEdofVsDistance)
            && g.model != ChannelModel::Nusw
        {
            return Err(Error::Config(format!("{} compares against the Green's-function kernel and needs model nusw", self.experiment.as_str())));
        }
        if matches!(self.experiment, ExperimentKind::Edof3VsSnr | ExperimentKind::LinkSim) && m.snr_db.is_empty() {
            return Err(Error::Config("metrics.snr_db must not be empty".into()));
        }
        match (self.experiment, &self.link) {
            (ExperimentKind::LinkSim, None) => return Err(Error::Config("link-sim needs a link section".into())),
            (ExperimentKind::LinkSim, Some(l)) => {
                if l.n_symbols == 0 {
                    return Err(Error::Config("link.n_symbols must be at least 1".into()));
                }
                if l.active_modes == Some(0) {
                    return Err(Error::Config("link.active_modes must be at least 1".into()));
                }
            }
            (_, Some(_)) => return Err(Error::Config("the link section only applies to link-sim".into())),
            (_, None) => {}
        }
        Ok(())
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    }
}

/// Runtime knobs that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Highest-priority output directory (the CLI's `--out`).
    pub out_dir: Option<PathBuf>,
    /// Replaces the config's seed before anything is hashed.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// `--out`, then `NFDOF_OUT`, then the config's `output_dir`, then `nfdof-out`.
pub fn resolve_output_dir(config: &ExperimentConfig, options: &RunOptions) -> PathBuf {
    if let Some(dir) = &options.out_dir {
        return dir.clone();
    }
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    config
        .output_dir
        .as_ref()
        .map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from)
}

/// Computed tables and summary, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: Vec<ResultTable>,
    pub summary: Value,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: ExperimentOutput,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Metric report for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub aperture: f64,
    pub n_elements: usize,
    pub distance: f64,
    pub dof: usize,
    pub edof1: usize,
    pub edof1_knee: usize,
    pub edof2: f64,
    pub edof1_limit: f64,
    pub rayleigh_distance: f64,
    pub region: Region,
    pub edof3_by_snr: Vec<[f64; 2]>,
    pub capacity_by_snr: Vec<[f64; 2]>,
    pub config_echo: Value,
}

/// Validates, computes and writes one experiment.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    let output = compute_experiment(config, options)?;
    let out_dir = resolve_output_dir(config, options);
    let files = write_output(&output, &out_dir)?;
    Ok(RunOutcome { output, out_dir, files })
}

pub fn compute_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    config.validate()?;
    let provenance = Provenance::for_config(&config)?;
    let ctx = Context::new(&config, provenance.clone())?;

    let run = || -> Result<(Vec<ResultTable>, Vec<Value>)> {
        match config.experiment {
            ExperimentKind::Spectrum => ctx.spectrum(),
            ExperimentKind::EdofVsN => ctx.edof_vs_n(),
            ExperimentKind::Edof2VsN => ctx.edof2_vs_n(),
            ExperimentKind::Edof3VsSnr => ctx.edof3_vs_snr(),
            ExperimentKind::CapEdofVsDistance => ctx.cap_edof_vs_distance(),
            ExperimentKind::LinkSim => ctx.link_sim(),
        }
    };
    let (tables, results) = match options.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(run)?
        }
        None => run()?,
    };
    let summary = json!({
        "experiment": config.experiment.as_str(),
        "provenance": provenance,
        "config": config,
        "tables": tables.iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
        "results": results,
    });
    Ok(ExperimentOutput {
        tables,
        summary,
        provenance,
    })
}

/// One CSV per table plus `summary.json`, written in table order.
pub fn write_output(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::with_capacity(output.tables.len() + 1);
    for table in &output.tables {
        files.push(emit_plot_data(table, PlotFormat::Csv, dir)?);
    }
    let summary = serde_json::to_string_pretty(&output.summary).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    let path = dir.join("summary.json");
    write_file(&path, summary.as_bytes())?;
    files.push(path);
    Ok(files)
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    carrier: CarrierConfig,
    axis: Point3,
    provenance: Provenance,
    echo: Value,
}

struct Spd {
    channel: ChannelMatrix,
    spectrum: SingularSpectrum,
}

fn tag(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.replace('-', "m")
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig, provenance: Provenance) -> Result<Self> {
        Ok(Self {
            config,
            carrier: config.carrier.resolve()?,
            axis: Point3::from(config.geometry.axis),
            echo: serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
            provenance,
        })
    }

    fn table(&self, name: String, columns: &[&str]) -> ResultTable {
        ResultTable::new(name, columns, self.provenance.clone())
    }

    fn apertures(&self) -> Vec<f64> {
        self.config.geometry.apertures_m.clone().unwrap_or_default()
    }

    fn n_elements(&self) -> Vec<usize> {
        self.config.geometry.n_elements.clone().unwrap_or_default()
    }

    fn distances(&self) -> Vec<f64> {
        self.config.geometry.distances_m.values()
    }

    fn rank_tol(&self, spectrum: &SingularSpectrum) -> f64 {
        self.config.metrics.rank_tol.unwrap_or_else(|| spectrum.default_rank_tol())
    }

    fn rayleigh(&self, aperture: f64) -> Result<f64> {
        mimo_rayleigh_distance(aperture, aperture, self.carrier.wavelength(), self.config.geometry.rayleigh_rule)
    }

    fn region(&self, distance: f64, aperture: f64) -> Result<Region> {
        let boundary_aperture = match self.config.geometry.rayleigh_rule {
            ApertureRule::Larger => aperture,
            ApertureRule::Sum => 2.0 * aperture,
        };
        classify_region(distance, boundary_aperture, self.carrier.wavelength())
    }

    fn spd(&self, n: usize, aperture: f64, distance: f64) -> Result<Spd> {
        let channel = match self.config.geometry.model {
            ChannelModel::IidRayleigh => iid_rayleigh_channel(n, n, self.config.seed)?,
            model => {
                let (tx, rx) = canonical_ula_pair(n, aperture, distance, self.axis)?;
                match model {
                    ChannelModel::Nusw => los_nusw_channel(&tx, &rx, &self.carrier)?,
                    ChannelModel::Usw => los_usw_channel(&tx, &rx, &self.carrier)?,
                    _ => farfield_planar_channel(&tx, &rx, &self.carrier)?,
                }
            }
        };
        let channel = if self.config.metrics.normalize {
            channel.normalized()?
        } else {
            channel
        };
        let spectrum = singular_values_of(channel.entries())?;
        Ok(Spd { channel, spectrum })
    }

    fn cap(&self, aperture: f64, distance: f64) -> Result<EigenSpectrum> {
        let (tx, rx) = canonical_segment_pair(aperture, distance, self.axis)?;
        match self.config.metrics.kernel_nodes {
            Some(m) => cap_spectrum(&build_kernel(&tx, &rx, &self.carrier, m)?),
            None => Ok(converge_spectrum(&tx, &rx, &self.carrier, self.config.metrics.kernel_tol)?.spectrum),
        }
    }

    fn metric_report(&self, label: String, n: usize, aperture: f64, distance: f64, spd: &Spd) -> Result<MetricReport> {
        let s = &spd.spectrum;
        let m = &self.config.metrics;
        let mut edof3_by_snr = Vec::new();
        let mut capacity_by_snr = Vec::new();
        for &db in &m.snr_db {
            let snr = db_to_linear(db);
            edof3_by_snr.push([db, edof3_adaptive(s, snr, m.delta)?.value]);
            capacity_by_snr.push([db, capacity(s, snr, CapacityPolicy::Waterfilling)?]);
        }
        let wavelength = self.carrier.wavelength();
        Ok(MetricReport {
            label,
            aperture,
            n_elements: n,
            distance,
            dof: dof(s, self.rank_tol(s))?,
            edof1: edof1(s, m.eta)?,
            edof1_knee: edof1_knee(s)?,
            edof2: edof2(s)?,
            edof1_limit: edof1_limit_linear(aperture, aperture, wavelength, distance)?,
            rayleigh_distance: self.rayleigh(aperture)?,
            region: self.region(distance, aperture)?,
            edof3_by_snr,
            capacity_by_snr,
            config_echo: self.echo.clone(),
        })
    }

    fn spd_points(&self) -> Vec<(f64, usize, f64)> {
        let mut points = Vec::new();
        for a in self.apertures() {
            for n in self.n_elements() {
                for d in self.distances() {
                    points.push((a, n, d));
                }
            }
        }
        points
    }

    fn spectrum(&self) -> Result<(Vec<ResultTable>, Vec<Value>)> {
        let results = self
            .spd_points()
            .into_par_iter()
            .map(|(a, n, d)| {
                let label = format!("spectrum_A{}_N{n}_d{}", tag(a), tag(d));
                let spd = self.spd(n, a, d)?;
                let mut t = self.table(label.clone(), &["n", "sigma", "sigma_rel"]);
                let s1 = spd.spectrum.largest();
                for (i, s) in spd.spectrum.values().iter().enumerate() {
                    t.push(vec![(i + 1) as f64, *s, s / s1]);
                }
                let report = self.metric_report(label, n, a, d, &spd)?;
                Ok((t, to_value(&report)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(results.into_iter().unzip())
    }

    fn edof_vs_n(&self) -> Result<(Vec<ResultTable>, Vec<Value>)> {
        let mut curves = Vec::new();
        for a in self.apertures() {
            for d in self.distances() {
                curves.push((a, d));
            }
        }
        let results = curves
            .into_par_iter()
            .map(|(a, d)| {
                let label = format!("edof_vs_n_A{}_d{}", tag(a), tag(d));
                let mut t = self.table(label.clone(), &["n_elements", "dof", "edof1", "edof2", "edof1_limit"]);
                let limit = edof1_limit_linear(a, a, self.carrier.wavelength(), d)?;
                for n in self.n_elements() {
                    let spd = self.spd(n, a, d)?;
                    let s = &spd.spectrum;
                    t.push(vec![
                        n as f64,
                        dof(s, self.rank_tol(s))? as f64,
                        edof1(s, self.config.metrics.eta)? as f64,
                        edof2(s)?,
                        limit,
                    ]);
                }
                Ok((t, json!({"label": label, "aperture": a, "distance": d, "edof1_limit": limit})))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(results.into_iter().unzip())
    }

    fn edof2_vs_n(&self) -> Result<(Vec<ResultTable>, Vec<Value>)> {
        let half = self.config.geometry.n_sweep == NSweep::HalfWavelength;
        let wavelength = self.carrier.wavelength();
        let mut curves: Vec<(Option<f64>, f64)> = Vec::new();
        let apertures: Vec<Option<f64>> = if half {
            vec![None]
        } else {
            self.apertures().into_iter().map(Some).collect()
        };
        for a in apertures {
            for d in self.distances() {
                curves.push((a, d));
            }
        }
        let results = curves
            .into_par_iter()
            .map(|(a, d)| {
                let label = match a {
                    Some(a) => format!("edof2_vs_n_A{}_d{}", tag(a), tag(d)),
                    None => format!("edof2_vs_n_halfwave_d{}", tag(d)),
                };
                let mut t = self.table(label.clone(), &["n_elements", "aperture", "spacing", "edof2_spd", "edof2_cap"]);
                let fixed_cap = match a {
                    Some(a) => Some(cap_edof2(&self.cap(a, d)?)?),
                    None => None,
                };
                for n in self.n_elements() {
                    let aperture = a.unwrap_or((n - 1) as f64 * 0.5 * wavelength);
                    let spacing = if n > 1 { aperture / (n - 1) as f64 } else { 0.0 };
                    let spd = self.spd(n, aperture, d)?;
                    let cap = match fixed_cap {
                        Some(v) => v,
                        None => cap_edof2(&self.cap(aperture, d)?)?,
                    };
                    t.push(vec![n as f64, aperture, spacing, edof2(&spd.spectrum)?, cap]);
                }
                Ok((t, json!({"label": label, "distance": d, "cap_edof2": fixed_cap})))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(results.into_iter().unzip())
    }

    fn edof3_vs_snr(&self) -> Result<(Vec<ResultTable>, Vec<Value>)> {
        let m = &self.config.metrics;
        let results = self
            .spd_points()
            .into_par_iter()
            .map(|(a, n, d)| {
                let label = format!("edof3_vs_snr_A{}_N{n}_d{}", tag(a), tag(d));
                let spd = self.spd(n, a, d)?;
                let s = &spd.spectrum;
                let (k_dof, k1, e2) = (dof(s, self.rank_tol(s))?, edof1(s, m.eta)?, edof2(s)?);
                let mut t = self.table(
                    label.clone(),
                    &[
                        "snr_db",
                        "snr",
                        "edof3",
                        "edof3_envelope",
                        "active_modes",
                        "edof1",
                        "edof2",
                        "dof",
                        "capacity_wf",
                        "capacity_equal",
                    ],
                );
                for &db in &m.snr_db {
                    let snr = db_to_linear(db);
                    let e3 = edof3_adaptive(s, snr, m.delta)?;
                    t.push(vec![
                        db,
                        snr,
                        e3.value,
                        e3.envelope,
                        e3.active_modes as f64,
                        k1 as f64,
                        e2,
                        k_dof as f64,
                        capacity(s, snr, CapacityPolicy::Waterfilling)?,
                        capacity(s, snr, CapacityPolicy::Equal)?,
                    ]);
                }
                let report = self.metric_report(label, n, a, d, &spd)?;
                Ok((t, to_value(&report)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(results.into_iter().unzip())
    }

    fn cap_edof_vs_distance(&self) -> Result<(Vec<ResultTable>, Vec<Value>)> {
        let eta = self.config.metrics.eta;
        let distances = self.distances();
        let mut tables = Vec::new();
        let mut results = Vec::new();
        for a in self.apertures() {
            let rd = self.rayleigh(a)?;
            let rows = distances
                .par_iter()
                .map(|&d| {
                    let s = self.cap(a, d)?;
                    Ok(vec![
                        d,
                        cap_edof1(&s, eta)? as f64,
                        cap_edof2(&s)?,
                        rd,
                        f64::from(u8::from(self.region(d, a)? == Region::NearField)),
                        s.node_count as f64,
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            let label = format!("cap_edof_vs_distance_A{}", tag(a));
            let mut t = self.table(
                label.clone(),
                &["distance", "cap_edof1", "cap_edof2", "rayleigh_distance", "near_field", "m_nodes"],
            );
            rows.into_iter().for_each(|r| t.push(r));
            tables.push(t);
            results.push(json!({"label": label, "aperture": a, "rayleigh_distance": rd}));

            for n in self.n_elements() {
                let rows = distances
                    .par_iter()
                    .map(|&d| {
                        let spd = self.spd(n, a, d)?;
                        let s = &spd.spectrum;
                        Ok(vec![
                            d,
                            dof(s, self.rank_tol(s))? as f64,
                            edof1(s, eta)? as f64,
                            edof2(s)?,
                            rd,
                            f64::from(u8::from(self.region(d, a)? == Region::NearField)),
                        ])
                    })
                    .collect::<Result<Vec<_>>>()?;
                let label = format!("spd_edof_vs_distance_A{}_N{n}", tag(a));
                let mut t = self.table(label, &["distance", "dof", "edof1", "edof2", "rayleigh_distance", "near_field"]);
                rows.into_iter().for_each(|r| t.push(r));
                tables.push(t);
            }
        }
        Ok((tables, results))
    }

    fn link_sim(&self) -> Result<(Vec<ResultTable>, Vec<Value>)> {
        let link = self.config.link.as_ref().expect("validated");
        let m = &self.config.metrics;
        let mut jobs = Vec::new();
        for (a, n, d) in self.spd_points() {
            for (i, &db) in m.snr_db.iter().enumerate() {
                jobs.push((a, n, d, i, db));
            }
        }
        let results = jobs
            .into_par_iter()
            .map(|(a, n, d, i, db)| {
                let spd = self.spd(n, a, d)?;
                let h = spd.channel.entries();
                let modes = decompose_matrix(h)?;
                let k_max = link
                    .active_modes
                    .unwrap_or(edof1(&modes.spectrum, m.eta)?)
                    .min(modes.n_modes());
                let truncated = SingularSpectrum::new(modes.spectrum.values()[..k_max].to_vec())?;
                let snr = db_to_linear(db);
                let alloc = waterfill(&truncated, snr, 1.0)?;
                let k = alloc.active;
                let cfg = TransmissionConfig {
                    active_modes: k,
                    mode_powers: alloc.powers[..k].to_vec(),
                    noise_power: 1.0,
                    n_symbols: link.n_symbols,
                    // distinct, reproducible stream per SNR point
                    seed: self.config.seed.wrapping_add(i as u64),
                };
                let report = run_link(h, &modes, &cfg)?;
                let label = format!("link_A{}_N{n}_d{}_snr{}", tag(a), tag(d), tag(db));
                let mut t = self.table(
                    label.clone(),
                    &["mode", "power", "gain", "predicted_snr", "measured_snr", "mse"],
                );
                for j in 0..k {
                    let sigma = modes.spectrum.values()[j];
                    t.push(vec![
                        (j + 1) as f64,
                        cfg.mode_powers[j],
                        sigma * sigma,
                        report.predicted_mode_snr[j],
                        report.measured_mode_snr[j],
                        report.mse[j],
                    ]);
                }
                let mut tables = vec![t];
                if link.dump_symbols {
                    let (sent, est) = trace_symbols(h, &modes, &cfg)?;
                    let mut dump = self.table(
                        format!("symbols_A{}_N{n}_d{}_snr{}", tag(a), tag(d), tag(db)),
                        &["symbol", "mode", "s_re", "s_im", "est_re", "est_im"],
                    );
                    for col in 0..sent.ncols() {
                        for row in 0..k {
                            let (s, e) = (sent[(row, col)], est[(row, col)]);
                            dump.push(vec![col as f64, (row + 1) as f64, s.re, s.im, e.re, e.im]);
                        }
                    }
                    tables.push(dump);
                }
                let wf_capacity = alloc.capacity(&truncated.power_gains());
                Ok((
                    tables,
                    json!({
                        "label": label,
                        "snr_db": db,
                        "active_modes": k,
                        "capacity_waterfilling": wf_capacity,
                        "report": report,
                    }),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (tables, values): (Vec<Vec<ResultTable>>, Vec<Value>) = results.into_iter().unzip();
        Ok((tables.into_iter().flatten().collect(), values))
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(experiment: &str, extra_geometry: &str) -> String {
        format!(
            r#"{{
                "experiment": "{experiment}",
                "carrier": {{"wavelength_m": 0.01}},
                "geometry": {{
                    "apertures_m": [1.37],
                    "n_elements": [16],
                    "distances_m": {{"kind": "list", "values": [15.0]}},
                    "axis": [0.0, 0.0, 1.0]{extra_geometry}
                }},
                "metrics": {{"snr_db": [0.0, 10.0]}}
            }}"#
        )
    }

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(&base("spectrum", "")).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Spectrum);
        assert_eq!(c.geometry.model, ChannelModel::Nusw);
        assert_eq!(c.metrics.eta, 0.01);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = base("spectrum", r#", "colour": "red""#);
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
        let text = base("spectrum", "").replace(r#""kind": "list""#, r#""kind": "list", "step": 2"#);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn carrier_needs_exactly_one_field() {
        let text = base("spectrum", "").replace(r#"{"wavelength_m": 0.01}"#, r#"{"wavelength_m": 0.01, "frequency_hz": 3e10}"#);
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = base("spectrum", "").replace(r#"{"wavelength_m": 0.01}"#, "{}");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn link_section_rules() {
        assert!(ExperimentConfig::from_json(&base("link-sim", "")).is_err());
        let with_link = base("link-sim", "").replacen("\"metrics\"", "\"link\": {\"n_symbols\": 10}, \"metrics\"", 1);
        assert!(ExperimentConfig::from_json(&with_link).is_ok());
        let misplaced = base("spectrum", "").replacen("\"metrics\"", "\"link\": {\"n_symbols\": 10}, \"metrics\"", 1);
        assert!(ExperimentConfig::from_json(&misplaced).is_err());
    }

    #[test]
    fn bad_axis_and_distances() {
        let text = base("spectrum", "").replace("[0.0, 0.0, 1.0]", "[0.0, 0.0, 2.0]");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = base("spectrum", "").replace("[15.0]", "[-1.0]");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn half_wavelength_sweep_rejects_apertures() {
        let text = base("edof2-vs-n", r#", "n_sweep": "half_wavelength""#);
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = text.replace(r#""apertures_m": [1.37],"#, "");
        assert!(ExperimentConfig::from_json(&text).is_ok());
    }

    #[test]
    fn bare_range_is_a_log_grid() {
        let text = base("spectrum", "").replace(
            r#"{"kind": "list", "values": [15.0]}"#,
            r#"{"start": 10.0, "stop": 1000.0, "points": 3}"#,
        );
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.geometry.distances_m, DistanceGrid::Log { start: 10.0, stop: 1000.0, points: 3 });
        assert!((c.geometry.distances_m.values()[1] - 100.0).abs() < 1e-9);
        let typo = text.replace("\"points\"", "\"count\"");
        assert!(ExperimentConfig::from_json(&typo).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(10.0, 500.0, 7);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[6], 500.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let ratio = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-12));
    }

    #[test]
    fn tags_are_compact() {
        assert_eq!(tag(15.0), "15");
        assert_eq!(tag(1.37), "1.37");
        assert_eq!(tag(-10.0), "m10");
        assert_eq!(tag(13.219_411), "13.219");
    }

    #[test]
    fn seed_override_changes_hash() {
        let c = ExperimentConfig::from_json(&base("spectrum", "")).unwrap();
        let a = compute_experiment(&c, &RunOptions::default()).unwrap();
        let b = compute_experiment(&c, &RunOptions { seed: Some(99), ..Default::default() }).unwrap();
        assert_ne!(a.provenance.config_hash, b.provenance.config_hash);
        assert_eq!(b.summary["config"]["seed"], 99);
    }

    #[test]
    fn output_dir_precedence() {
        let mut c = ExperimentConfig::from_json(&base("spectrum", "")).unwrap();
        c.output_dir = Some("from-config".into());
        let opts = RunOptions {
            out_dir: Some(PathBuf::from("from-cli")),
            ..Default::default()
        };
        assert_eq!(resolve_output_dir(&c, &opts), PathBuf::from("from-cli"));
    }

    mod runs {
        use std::fs;

        use super::super::*;
        use crate::io::{sha256_hex, ResultTable};
        use crate::ErrorKind;

        fn config(text: &str) -> ExperimentConfig {
            ExperimentConfig::from_json(text).unwrap()
        }

        fn in_dir(dir: &std::path::Path) -> RunOptions {
            RunOptions {
                out_dir: Some(dir.to_path_buf()),
                ..Default::default()
            }
        }

        const SPECTRUM: &str = r#"{
            "experiment": "spectrum",
            "carrier": {"wavelength_m": 0.01},
            "geometry": {
                "apertures_m": [0.5],
                "n_elements": [32],
                "distances_m": {"kind": "list", "values": [2.0, 80.0]},
                "axis": [0.0, 0.0, 1.0]
            },
            "metrics": {"snr_db": [0.0, 30.0]}
        }"#;

        #[test]
        fn spectrum_files_carry_provenance() {
            let dir = tempfile::tempdir().unwrap();
            let outcome = run_experiment(&config(SPECTRUM), &in_dir(dir.path())).unwrap();
            let names: Vec<String> = outcome
                .files
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect();
            assert_eq!(names, ["spectrum_A0.5_N32_d2.csv", "spectrum_A0.5_N32_d80.csv", "summary.json"]);

            let text = fs::read_to_string(&outcome.files[0]).unwrap();
            let table = ResultTable::from_csv("spectrum_A0.5_N32_d2", &text).unwrap();
            assert_eq!(table.to_csv(), text);
            assert_eq!(table.provenance.config_hash, sha256_hex(table.provenance.config.as_bytes()));
            assert_eq!(table.rows.len(), 32);
            let rel = table.column("sigma_rel").unwrap();
            assert_eq!(rel[0], 1.0);
            assert!(rel.windows(2).all(|w| w[1] <= w[0]));

            let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&outcome.files[2]).unwrap()).unwrap();
            assert_eq!(summary["experiment"], "spectrum");
            assert_eq!(summary["provenance"]["config_hash"], table.provenance.config_hash.as_str());
            let results = summary["results"].as_array().unwrap();
            assert_eq!(results.len(), 2);
            // closer link, richer spectrum
            let near = results[0]["edof2"].as_f64().unwrap();
            let far = results[1]["edof2"].as_f64().unwrap();
            assert!(near > far, "{near} vs {far}");
            assert_eq!(results[0]["region"], "near_field");
            assert_eq!(results[1]["region"], "far_field");
            assert_eq!(results[0]["config_echo"]["seed"], 0);
            assert_eq!(results[0]["capacity_by_snr"].as_array().unwrap().len(), 2);
        }

        #[test]
        fn cap_distance_sweep_annotates_rayleigh_distance() {
            let text = r#"{
                "experiment": "cap-edof-vs-distance",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [0.4],
                    "n_elements": [16],
                    "distances_m": {"kind": "log", "start": 1.0, "stop": 100.0, "points": 5},
                    "axis": [0.0, 0.0, 1.0]
                }
            }"#;
            let out = compute_experiment(&config(text), &RunOptions::default()).unwrap();
            assert_eq!(out.tables.len(), 2);
            let cap = &out.tables[0];
            assert_eq!(cap.name, "cap_edof_vs_distance_A0.4");
            let rayleigh = 2.0 * 0.4 * 0.4 / 0.01;
            let d = cap.column("distance").unwrap();
            assert_eq!(d.first(), Some(&1.0));
            assert_eq!(d.last(), Some(&100.0));
            for (dist, (rd, nf)) in d.iter().zip(cap.column("rayleigh_distance").unwrap().iter().zip(cap.column("near_field").unwrap())) {
                assert!((rd - rayleigh).abs() < 1e-12);
                assert_eq!(nf, if *dist < rayleigh { 1.0 } else { 0.0 });
            }
            let e2 = cap.column("cap_edof2").unwrap();
            assert!(e2.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(out.tables[1].name, "spd_edof_vs_distance_A0.4_N16");
        }

        #[test]
        fn larger_aperture_gives_more_modes() {
            let text = r#"{
                "experiment": "cap-edof-vs-distance",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [0.5, 1.37],
                    "distances_m": {"start": 10.0, "stop": 500.0, "points": 6},
                    "axis": [0.0, 0.0, 1.0]
                }
            }"#;
            let out = compute_experiment(&config(text), &RunOptions::default()).unwrap();
            assert_eq!(out.tables.len(), 2);
            for col in ["cap_edof1", "cap_edof2"] {
                let small = out.tables[0].column(col).unwrap();
                let large = out.tables[1].column(col).unwrap();
                assert!(small.windows(2).all(|w| w[1] <= w[0]), "{col} {small:?}");
                assert!(large.windows(2).all(|w| w[1] <= w[0]), "{col} {large:?}");
                assert!(small.iter().zip(&large).all(|(s, l)| l >= s), "{col}: {small:?} vs {large:?}");
            }
            let e2_small = out.tables[0].column("cap_edof2").unwrap();
            let e2_large = out.tables[1].column("cap_edof2").unwrap();
            assert!(e2_large[0] > e2_small[0]);
        }

        #[test]
        fn fixed_aperture_edof2_sweep() {
            let text = r#"{
                "experiment": "edof2-vs-n",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [0.3],
                    "n_elements": [4, 16, 61],
                    "distances_m": {"kind": "list", "values": [2.0]},
                    "axis": [0.0, 0.0, 1.0]
                }
            }"#;
            let out = compute_experiment(&config(text), &RunOptions::default()).unwrap();
            let t = &out.tables[0];
            let cap = t.column("edof2_cap").unwrap();
            assert!(cap.iter().all(|c| *c == cap[0]));
            assert!(t.column("aperture").unwrap().iter().all(|a| *a == 0.3));
            // 61 elements puts the spacing at λ/2
            let spd = t.column("edof2_spd").unwrap();
            assert!((spd[2] - cap[0]).abs() / cap[0] < 0.05, "{spd:?} vs {}", cap[0]);
        }

        #[test]
        fn edof3_table_orders_policies() {
            let text = r#"{
                "experiment": "edof3-vs-snr",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [0.5],
                    "n_elements": [32],
                    "distances_m": {"kind": "list", "values": [3.0]},
                    "axis": [0.0, 0.0, 1.0]
                },
                "metrics": {"snr_db": [-10.0, 0.0, 10.0, 20.0, 30.0]}
            }"#;
            let out = compute_experiment(&config(text), &RunOptions::default()).unwrap();
            let t = &out.tables[0];
            let wf = t.column("capacity_wf").unwrap();
            let eq = t.column("capacity_equal").unwrap();
            assert!(wf.iter().zip(&eq).all(|(w, e)| w + 1e-12 >= *e));
            let e3 = t.column("edof3").unwrap();
            assert!(e3.windows(2).all(|w| w[1] >= w[0]));
            let dof = t.column("dof").unwrap()[0];
            assert!(e3.iter().all(|v| *v <= dof));
        }

        #[test]
        fn link_sim_dumps_symbols() {
            let text = r#"{
                "experiment": "link-sim",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [0.3],
                    "n_elements": [16],
                    "distances_m": {"kind": "list", "values": [1.0]},
                    "axis": [0.0, 0.0, 1.0]
                },
                "metrics": {"snr_db": [20.0]},
                "link": {"n_symbols": 5000, "active_modes": 3, "dump_symbols": true},
                "seed": 4
            }"#;
            let out = compute_experiment(&config(text), &RunOptions::default()).unwrap();
            assert_eq!(out.tables.len(), 2);
            let modes = &out.tables[0];
            assert_eq!(modes.rows.len(), 3);
            for (m, p) in modes.column("measured_snr").unwrap().iter().zip(modes.column("predicted_snr").unwrap()) {
                assert!((m - p).abs() / p < 0.1, "{m} vs {p}");
            }
            let dump = &out.tables[1];
            assert_eq!(dump.rows.len(), 5000 * 3);
            let s_re = dump.column("s_re").unwrap();
            assert!(s_re.iter().all(|v| (v.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15));
        }

        #[test]
        fn seed_changes_link_results_only_through_the_seed() {
            let text = r#"{
                "experiment": "link-sim",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [0.3],
                    "n_elements": [8],
                    "distances_m": {"kind": "list", "values": [1.0]},
                    "axis": [0.0, 0.0, 1.0]
                },
                "metrics": {"snr_db": [10.0]},
                "link": {"n_symbols": 2000}
            }"#;
            let c = config(text);
            let a = compute_experiment(&c, &RunOptions::default()).unwrap();
            let b = compute_experiment(&c, &RunOptions::default()).unwrap();
            let other = compute_experiment(&c, &RunOptions { seed: Some(1), ..Default::default() }).unwrap();
            assert_eq!(a.tables[0].rows, b.tables[0].rows);
            assert_ne!(a.tables[0].column("measured_snr"), other.tables[0].column("measured_snr"));
            assert_eq!(a.tables[0].column("predicted_snr"), other.tables[0].column("predicted_snr"));
        }

        #[test]
        fn invalid_config_writes_nothing() {
            let dir = tempfile::tempdir().unwrap();
            let mut c = config(SPECTRUM);
            c.metrics.eta = 1.5;
            let err = run_experiment(&c, &in_dir(&dir.path().join("out"))).unwrap_err();
            assert_eq!(err.kind(), ErrorKind::Config);
            assert!(!dir.path().join("out").exists());
        }

        #[test]
        fn coincident_elements_are_a_numerical_error() {
            // collinear arrays along the link axis overlap
            let text = r#"{
                "experiment": "spectrum",
                "carrier": {"wavelength_m": 0.01},
                "geometry": {
                    "apertures_m": [1.0],
                    "n_elements": [3],
                    "distances_m": {"kind": "list", "values": [0.5]},
                    "axis": [0.0, 1.0, 0.0]
                }
            }"#;
            let err = compute_experiment(&config(text), &RunOptions::default()).unwrap_err();
            assert!(matches!(err, Error::SingularGeometry(_)), "{err:?}");
            assert_eq!(err.kind(), ErrorKind::Numerical);
        }

        #[test]
        fn frequency_and_wavelength_carriers_agree() {
            let by_wavelength = config(SPECTRUM);
            let freq = SPECTRUM.replace(r#"{"wavelength_m": 0.01}"#, r#"{"frequency_hz": 29979245800.0}"#);
            let by_frequency = config(&freq);
            let a = compute_experiment(&by_wavelength, &RunOptions::default()).unwrap();
            let b = compute_experiment(&by_frequency, &RunOptions::default()).unwrap();
            for (x, y) in a.tables[0].column("sigma").unwrap().iter().zip(b.tables[0].column("sigma").unwrap()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
            }
        }
    }
}
