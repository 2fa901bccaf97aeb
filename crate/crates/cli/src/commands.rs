use std::fs;
use std::path::Path;

use anyhow::Context;
use cluster_sing::covering::{
    check_sharpness, check_vitali, covering_bound, decide, occupancy_sizes, replay_proof, selftest, sharpness_points,
    vitali_cover, Bound, PointSet, ProofReplay, SelftestReport, Verdict,
};
use cluster_sing::stratify::{
    classify_with_profiles, extract_graph, probe_point, reference_density, t_cone_density_numeric, AnalysisConfig,
    Cone, SingularPoint,
};
use cluster_sing::Point2;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::experiment::{load_cluster, read_input, write_profiles};

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn parse_point(text: &str) -> std::result::Result<Point2, String> {
    let (x, y) = text
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y, got {text:?}"))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    Ok(Point2::new(parse(x)?, parse(y)?))
}

#[derive(Serialize)]
struct Analysis {
    junctions: Vec<SingularPoint>,
    probes: Vec<SingularPoint>,
    lambda: f64,
    analysis_radius: f64,
}

/// Densities, kinds and budgets at every junction and at the probe points.
pub fn analyze(cluster: &Path, config: &AnalysisConfig, probes: &[Point2], profiles: Option<&Path>) -> Result<()> {
    let cluster = load_cluster(cluster)?;
    let graph = extract_graph(&cluster)?;
    let (report, junction_profiles) = classify_with_profiles(&cluster, &graph, config)?;
    if let Some(dir) = profiles {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_profiles(dir, &report, &junction_profiles)?;
    }
    let probes = probes
        .iter()
        .map(|&x| probe_point(&cluster, x, config))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    print_json(&Analysis {
        junctions: report.points,
        probes,
        lambda: cluster.lambda(),
        analysis_radius: report.analysis_radius,
    })
}

pub fn classify(cluster: &Path, config: &AnalysisConfig, out: Option<&Path>) -> Result<()> {
    let cluster = load_cluster(cluster)?;
    let graph = extract_graph(&cluster)?;
    let (report, _) = classify_with_profiles(&cluster, &graph, config)?;
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&report)
}

#[derive(Serialize)]
struct VerifyDoc {
    size: usize,
    dimension: usize,
    scale_ratio: f64,
    budget: usize,
    max_occupancy: usize,
    bound: Bound,
    #[serde(flatten)]
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    replay: Option<ProofReplay>,
}

/// Checks the covering bound on a point set. With `replay`, a set larger
/// than the bound is also run through the constructive proof to produce a
/// witness.
pub fn covering_verify(points: &Path, scale_ratio: f64, budget: Option<usize>, replay: bool) -> Result<()> {
    let set = PointSet::from_csv(&read_input(points)?)?;
    let sizes = occupancy_sizes(&set, scale_ratio)?;
    let max_occupancy = sizes.iter().copied().max().unwrap_or(0);
    let budget = budget.unwrap_or(max_occupancy);
    let bound = covering_bound(set.dimension(), scale_ratio, budget)?;
    let verdict = decide(&sizes, budget, bound);
    let replay = if replay && !bound.admits(set.len() as u128) {
        Some(replay_proof(&set, scale_ratio, budget)?)
    } else {
        None
    };
    print_json(&VerifyDoc {
        size: set.len(),
        dimension: set.dimension(),
        scale_ratio,
        budget,
        max_occupancy,
        bound,
        verdict,
        replay,
    })
}

/// Writes the sharpness points (exact numerators over `2^{12N}` and the
/// nearest doubles) and prints the exact check.
pub fn covering_sharpness(n: usize, out: Option<&Path>) -> Result<()> {
    let set = sharpness_points(n)?;
    let floats = set.to_floats();
    let mut writer: csv::Writer<Box<dyn std::io::Write>> = match out {
        Some(path) => csv::Writer::from_writer(Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => csv::Writer::from_writer(Box::new(std::io::stdout())),
    };
    writer.write_record(["index", "numerator", "denominator_log2", "x0"])?;
    for (i, (num, x)) in set.numerators.iter().zip(&floats).enumerate() {
        writer.write_record([
            i.to_string(),
            num.to_string(),
            set.denominator_exponent().to_string(),
            x.to_string(),
        ])?;
    }
    writer.flush()?;
    drop(writer);
    let check = check_sharpness(&set);
    if out.is_some() {
        print_json(&check)?;
    } else {
        eprintln!("{}", serde_json::to_string(&check)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct VitaliDoc {
    dimension: usize,
    mu: f64,
    centers: usize,
    limit: f64,
    samples: usize,
    problems: Vec<String>,
}

pub fn covering_vitali(dimension: usize, mu: f64, samples: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let centers = vitali_cover(dimension, mu)?;
    if let Some(path) = out {
        let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        writer.write_record((0..dimension).map(|i| format!("x{i}")))?;
        for c in &centers {
            writer.write_record(c.iter().map(|v| v.to_string()))?;
        }
        writer.flush()?;
    }
    let problems = check_vitali(dimension, mu, samples, seed)?;
    let doc = VitaliDoc {
        dimension,
        mu,
        centers: centers.len(),
        limit: (5.0 / mu).powi(dimension as i32),
        samples,
        problems,
    };
    print_json(&doc)?;
    if doc.problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "Vitali check failed: {}",
            doc.problems.join("; ")
        )))
    }
}

pub fn covering_selftest(seed: u64) -> Result<()> {
    let report: SelftestReport = selftest(seed);
    print_json(&report)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::validation("covering self-test failed"))
    }
}

#[derive(Serialize)]
struct ConstantRow {
    cone: &'static str,
    density: f64,
}

pub fn constants(json: bool) -> Result<()> {
    let names = ["half_space", "y_2d", "y_cone_3d", "t_cone_3d"];
    let rows: Vec<ConstantRow> = Cone::ALL
        .iter()
        .zip(names)
        .map(|(&cone, name)| ConstantRow {
            cone: name,
            density: reference_density(cone),
        })
        .collect();
    if json {
        #[derive(Serialize)]
        struct Doc {
            densities: Vec<ConstantRow>,
            t_cone_numeric: f64,
        }
        return print_json(&Doc {
            densities: rows,
            t_cone_numeric: t_cone_density_numeric(4096),
        });
    }
    for row in &rows {
        println!("{:<10} {}", row.cone, row.density);
    }
    println!(
        "{:<10} {:.10} (numerical area ratio)",
        "t_cone_3d",
        t_cone_density_numeric(4096)
    );
    Ok(())
}
