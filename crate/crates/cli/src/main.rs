//! `cluster-sing`: optimize planar clusters, classify their singular points
//! and check the covering bounds.
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 on invalid input or
//! usage, 3 when an optimization did not converge. Errors are printed to
//! stderr as one JSON object.

mod commands;
mod error;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cluster_sing::stratify::AnalysisConfig;
use cluster_sing::Point2;

use crate::error::Result;
use crate::experiment::Experiment;

#[derive(Parser)]
#[command(
    name = "cluster-sing",
    version,
    about = "Planar bubble clusters: optimization, singular points, covering bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file: optimize every seed, classify, and write
    /// `<out>/<name>/<seed>/{cluster.json, convergence.csv, profiles/, report.json}`
    /// plus `<out>/<name>/summary.csv`.
    Optimize {
        /// Experiment JSON.
        experiment: PathBuf,
        /// Output root.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Density, kind and annulus budget at every junction of a cluster and
    /// at optional probe points.
    Analyze {
        /// Cluster JSON.
        cluster: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Boundary point to probe, as X,Y. Repeatable.
        #[arg(long = "point", value_parser = commands::parse_point, allow_hyphen_values = true)]
        points: Vec<Point2>,
        /// Directory for the junction profile CSVs.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Full singularity report: count, certificate bound, canonical class.
    Classify {
        /// Cluster JSON.
        cluster: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Covering-lemma tools.
    #[command(subcommand)]
    Covering(CoveringCommand),
    /// Print the reference cone densities.
    Constants {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum CoveringCommand {
    /// Check `|X| <= (10/lambda^2)^{nN}` for a point set in the ball of
    /// radius 1/2 (CSV, one point per row).
    Verify {
        points: PathBuf,
        /// Annulus ratio, in (0, 1/4].
        #[arg(long)]
        lambda: f64,
        /// Occupancy budget N; defaults to the largest measured occupancy.
        #[arg(long)]
        budget: Option<usize>,
        /// Replay the constructive proof when the set exceeds the bound.
        #[arg(long)]
        replay: bool,
    },
    /// Emit the 2^N-point family that makes the bound sharp and verify it
    /// exactly.
    Sharpness {
        #[arg(long)]
        n: usize,
        /// Write the points here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and check a Vitali cover of the unit ball by mu-balls.
    Vitali {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        mu: f64,
        /// Random points used to test the cover.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the centers as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the covering property suite.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct AnalysisArgs {
    /// Annulus scale ratio, in (0, 1/8].
    #[arg(long, default_value_t = 0.125)]
    lambda: f64,
    /// Drop threshold delta.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Analysis radius R; defaults to half the cluster diameter.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 20)]
    radii_per_decade: usize,
}

impl AnalysisArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            scale_ratio: self.lambda,
            drop_threshold: self.delta,
            analysis_radius: self.radius,
            radii_per_decade: self.radii_per_decade,
            max_depth: None,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize { experiment, out } => {
            let exp = Experiment::load(&experiment)?;
            let dir = experiment::run(&exp, &out)?;
            println!("{}", dir.join("summary.csv").display());
            Ok(())
        }
        Command::Analyze {
            cluster,
            analysis,
            points,
            profiles,
        } => commands::analyze(&cluster, &analysis.config(), &points, profiles.as_deref()),
        Command::Classify { cluster, analysis, out } => {
            commands::classify(&cluster, &analysis.config(), out.as_deref())
        }
        Command::Covering(cmd) => match cmd {
            CoveringCommand::Verify {
                points,
                lambda,
                budget,
                replay,
            } => commands::covering_verify(&points, lambda, budget, replay),
            CoveringCommand::Sharpness { n, out } => commands::covering_sharpness(n, out.as_deref()),
            CoveringCommand::Vitali {
                dim,
                mu,
                samples,
                seed,
                out,
            } => commands::covering_vitali(dim, mu, samples, seed, out.as_deref()),
            CoveringCommand::Selftest { seed } => commands::covering_selftest(seed),
        },
        Command::Constants { json } => commands::constants(json),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
