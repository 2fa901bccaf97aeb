//! Experiment files and the optimize, analyze, certify pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cluster_sing::fixtures;
use cluster_sing::monotonicity::{log_radii, minimal_lambda, profile};
use cluster_sing::optimizer::{minimize, perturb, OptimizerConfig, OptimizerResult};
use cluster_sing::stratify::{classify_with_profiles, density_radii, extract_graph, AnalysisConfig, SingularityReport};
use cluster_sing::{Cluster, Point2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Kind, Result};

fn default_spacing() -> f64 {
    0.05
}

fn default_drop() -> f64 {
    1e-3
}

fn default_ratio() -> f64 {
    0.125
}

fn default_per_decade() -> usize {
    20
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    /// Scale ratio of the annulus scales.
    #[serde(default = "default_ratio")]
    pub lambda: f64,
    #[serde(default = "default_drop")]
    pub delta: f64,
    /// Analysis radius; defaults to half the cluster diameter.
    #[serde(default, rename = "R")]
    pub radius: Option<f64>,
    #[serde(default = "default_per_decade")]
    pub radii_per_decade: usize,
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            lambda: default_ratio(),
            delta: default_drop(),
            radius: None,
            radii_per_decade: default_per_decade(),
        }
    }
}

impl Analysis {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            scale_ratio: self.lambda,
            drop_threshold: self.delta,
            analysis_radius: self.radius,
            radii_per_decade: self.radii_per_decade,
            max_depth: None,
        }
    }
}

/// Almost-minimality constants attached to each optimized cluster before
/// analysis. With `calibrate`, `lambda` is replaced by the smallest value
/// that makes the sampled profiles monotone.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AlmostMinimality {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub calibrate: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub volumes: Vec<f64>,
    /// `[m0, M0]`.
    pub volume_box: [f64; 2],
    /// Optimizer settings other than the volumes; missing keys take their
    /// defaults.
    #[serde(default)]
    pub optimizer: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub analysis: Analysis,
    pub seeds: Vec<u64>,
    /// Standard deviation of the seeded vertex noise applied to the initial
    /// rectangles.
    #[serde(default)]
    pub noise: f64,
    /// Vertex spacing of the initial rectangles.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub almost_minimality: AlmostMinimality,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_input(path)?;
        let exp: Experiment =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        exp.validate()?;
        Ok(exp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(CliError::validation(format!("bad experiment name {:?}", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(CliError::validation("experiment needs at least one seed"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::validation("seeds must be distinct"));
        }
        if !(self.analysis.lambda > 0.0 && self.analysis.lambda <= 0.125) {
            return Err(CliError::validation(format!(
                "analysis.lambda = {} outside (0, 1/8]",
                self.analysis.lambda
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::validation(format!(
                "noise {} must be nonnegative",
                self.noise
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(CliError::validation(format!(
                "spacing {} must be positive",
                self.spacing
            )));
        }
        self.analysis.config().validate()?;
        self.optimizer_config()?.validate()?;
        Ok(())
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        let mut doc = self.optimizer.clone();
        for key in ["target_volumes", "volume_box"] {
            if doc.contains_key(key) {
                return Err(CliError::validation(format!(
                    "optimizer.{key} is taken from the top-level experiment fields"
                )));
            }
        }
        doc.insert("target_volumes".into(), serde_json::to_value(&self.volumes)?);
        doc.insert("volume_box".into(), serde_json::to_value(self.volume_box)?);
        serde_json::from_value(serde_json::Value::Object(doc))
            .map_err(|e| CliError::validation(format!("optimizer: {e}")))
    }
}

pub fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

pub fn load_cluster(path: &Path) -> Result<Cluster> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub perimeter: f64,
    pub count: Option<usize>,
    pub certificate_bound: Option<String>,
    pub canonical_class: Option<String>,
    pub lambda: f64,
}

/// Outcome of one seed. `error` is set when a later stage failed; the
/// artifacts written before it stay on disk.
#[derive(Debug)]
pub struct SeedOutcome {
    pub row: Option<SummaryRow>,
    pub error: Option<CliError>,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn boundary_samples(cluster: &Cluster) -> Vec<Point2> {
    let mut out: Vec<Point2> = cluster.junctions().iter().map(|j| j.location).collect();
    for iface in cluster.interfaces() {
        let v = iface.chain.vertices();
        out.push(v[v.len() / 2]);
    }
    out
}

/// Optimizes, attaches almost-minimality constants, and classifies one
/// seed, writing its artifacts into `dir`. A non-converged seed keeps its
/// cluster and log and still gets a summary row.
pub fn run_seed(exp: &Experiment, seed: u64, dir: &Path) -> SeedOutcome {
    let mut row = None;
    let error = analyze_seed(exp, seed, dir, &mut row).err();
    SeedOutcome { row, error }
}

fn analyze_seed(exp: &Experiment, seed: u64, dir: &Path, row: &mut Option<SummaryRow>) -> Result<()> {
    fs::create_dir_all(dir.join("profiles")).with_context(|| format!("creating {}", dir.display()))?;
    let config = exp.optimizer_config()?;
    let initial = fixtures::rectangle_row(&exp.volumes, exp.spacing)?;
    let initial = perturb(&initial, config.junction_projection, exp.noise, seed)?;
    let result: OptimizerResult = minimize(&initial, &config)?;
    write(&dir.join("convergence.csv"), result.log_csv())?;

    let mut lambda = exp.almost_minimality.lambda;
    let r0 = exp.almost_minimality.r0.unwrap_or(f64::INFINITY);
    if exp.almost_minimality.calibrate {
        let c = &result.cluster;
        let radii = log_radii(1e-3 * c.min_edge_length(), c.diameter(), exp.analysis.radii_per_decade);
        lambda = minimal_lambda(c, &boundary_samples(c), &radii)?;
    }
    let cluster = result.cluster.with_almost_minimality(lambda, r0)?;
    write(&dir.join("cluster.json"), serde_json::to_string_pretty(&cluster)?)?;
    let summary = row.insert(SummaryRow {
        seed,
        converged: result.converged,
        iterations: result.iterations,
        perimeter: result.final_perimeter,
        count: None,
        certificate_bound: None,
        canonical_class: None,
        lambda,
    });
    if !result.converged {
        return Err(CliError::non_convergence(format!(
            "seed {seed}: no convergence after {} iterations (residual {:.3e})",
            result.iterations, result.residual
        )));
    }

    let analysis = exp.analysis.config();
    let graph = extract_graph(&cluster)?;
    let (report, profiles) = classify_with_profiles(&cluster, &graph, &analysis)?;
    write_profiles(&dir.join("profiles"), &report, &profiles)?;
    let radii = density_radii(&cluster, &analysis);
    for (i, iface) in cluster.interfaces().iter().enumerate() {
        let v = iface.chain.vertices();
        let p = profile(&cluster, v[v.len() / 2], &radii)?;
        write(&dir.join("profiles").join(format!("interface_{i}.csv")), p.to_csv())?;
    }
    write(&dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    summary.count = Some(report.count);
    summary.certificate_bound = Some(report.certificate_bound.to_string());
    summary.canonical_class = Some(report.canonical_class);
    Ok(())
}

pub fn write_profiles(
    dir: &Path,
    report: &SingularityReport,
    profiles: &[cluster_sing::monotonicity::MonotonicityProfile],
) -> Result<()> {
    for (k, (point, p)) in report.points.iter().zip(profiles).enumerate() {
        debug_assert_eq!(point.location(), p.base_point);
        write(&dir.join(format!("junction_{k}.csv")), p.to_csv())?;
    }
    Ok(())
}

/// Worker count: `CLUSTER_SING_THREADS` when set, capped by the available
/// parallelism.
pub fn worker_count() -> Result<usize> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("CLUSTER_SING_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n.min(available)),
            _ => Err(CliError::validation(format!(
                "CLUSTER_SING_THREADS={v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(available),
    }
}

/// Runs every seed and writes `summary.csv`. Returns the experiment
/// directory, or the most severe seed error after all seeds finished.
pub fn run(exp: &Experiment, out: &Path) -> Result<PathBuf> {
    let root = out.join(&exp.name);
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    fs::write(root.join("experiment.json"), serde_json::to_string_pretty(exp)?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<SeedOutcome> = pool.install(|| {
        exp.seeds
            .par_iter()
            .map(|&seed| run_seed(exp, seed, &root.join(seed.to_string())))
            .collect()
    });

    let mut csv = csv::Writer::from_path(root.join("summary.csv"))?;
    for row in outcomes.iter().filter_map(|o| o.row.as_ref()) {
        csv.serialize(row)?;
    }
    csv.flush()?;

    let worst = outcomes
        .into_iter()
        .filter_map(|o| o.error)
        .max_by_key(|e| match e.kind {
            Kind::NonConvergence => 1,
            Kind::Validation => 2,
            Kind::Io => 3,
        });
    match worst {
        Some(e) => Err(e),
        None => Ok(root),
    }
}
