//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails that is not listed in `EXPECTED_FAILURES`,
//! or when a listed one unexpectedly passes.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cluster_sing::covering::{
    check_sharpness, check_vitali, covering_bound, decide, occupancy_sizes, random_clustered_set, sharpness_points,
    vitali_cover, Verdict,
};
use cluster_sing::fixtures;
use cluster_sing::monotonicity::{detect_drop, log_radii, monotonicity_value, profile};
use cluster_sing::optimizer::{junction_angles, minimize, OptimizerConfig, OptimizerResult};
use cluster_sing::stratify::{
    canonical_class, classify, extract_graph, reference_density, t_cone_density_numeric, AnalysisConfig, Cone,
    SingularKind,
};
use cluster_sing::{Cluster, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The tetrahedral-cone target `12 arccos(sqrt(2/3)) / π` is not the area
/// ratio of that cone (which is `3 arccos(-1/3) / π ≈ 1.8245`), so the
/// numerical integration cannot match it.
const EXPECTED_FAILURES: &[usize] = &[4];

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Perimeter of the standard double bubble with two chambers of area `a`:
/// three arcs of radius `r` subtending 240°, 240° and the flat middle
/// segment `r√3`.
fn double_bubble_oracle(a: f64) -> f64 {
    // Each chamber is a 240° circular sector-plus-triangle region:
    // area = r²(2π/3 + √3/4) per chamber.
    let r = (a / (2.0 * PI / 3.0 + 3f64.sqrt() / 4.0)).sqrt();
    r * (8.0 * PI / 3.0 + 3f64.sqrt())
}

fn solve(initial: Cluster, volumes: Vec<f64>) -> OptimizerResult {
    minimize(&initial, &OptimizerConfig::new(volumes)).expect("optimizer input is valid")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn covering_soundness() -> Outcome {
    let (result, elapsed) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut violations = 0;
        let mut nontrivial = 0;
        for _ in 0..1000 {
            let n = rng.random_range(1..=3);
            let ratio = if rng.random::<bool>() { 1.0 / 6.0 } else { 1.0 / 8.0 };
            let size = rng.random_range(1..=200);
            let set = random_clustered_set(n, size, ratio, rng.random());
            let sizes = occupancy_sizes(&set, ratio).unwrap();
            let budget = sizes.iter().copied().max().unwrap_or(0);
            let bound = covering_bound(n, ratio, budget).unwrap();
            if budget >= 2 {
                nontrivial += 1;
            }
            if !bound.admits(set.len() as u128)
                || !matches!(decide(&sizes, budget, bound), Verdict::WithinBudget { .. })
            {
                violations += 1;
            }
        }
        (violations, nontrivial)
    });
    let (violations, nontrivial) = result;
    outcome(
        violations == 0 && elapsed < Duration::from_secs(30),
        format!("1000 sets, {nontrivial} with budget >= 2, {violations} violations, {elapsed:.1?}"),
    )
}

fn sharpness() -> Outcome {
    let (failures, elapsed) = timed(|| {
        (1..=12)
            .filter(|&n| {
                let check = check_sharpness(&sharpness_points(n).unwrap());
                !(check.size == 1 << n && check.distinct && check.interval_violations == 0 && check.max_occupancy <= n)
            })
            .collect::<Vec<_>>()
    });
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(10),
        format!("N = 1..=12, failing N: {failures:?}, {elapsed:.1?}"),
    )
}

fn vitali() -> Outcome {
    let mut problems = Vec::new();
    let mut counts = Vec::new();
    for n in 1..=3 {
        for mu in [0.5, 0.2, 0.1] {
            counts.push(vitali_cover(n, mu).unwrap().len());
            for p in check_vitali(n, mu, 1_000_000, 40 + n as u64).unwrap() {
                problems.push(format!("n={n} mu={mu}: {p}"));
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("center counts {counts:?}, all disjoint, 10^6 samples covered")
        } else {
            problems.join("; ")
        },
    )
}

fn density_constants() -> Outcome {
    let y_exact = reference_density(Cone::Y2D) == 1.5 && reference_density(Cone::YCone3D) == 1.5;
    let target = 12.0 * (2.0f64 / 3.0).sqrt().acos() / PI;
    let numeric = t_cone_density_numeric(4096);
    let t_match = (numeric - target).abs() <= 1e-4;
    outcome(
        y_exact && t_match,
        format!(
            "Y exact: {y_exact}; T-cone integral {numeric:.6} vs target {target:.6} (diff {:.4})",
            (numeric - target).abs()
        ),
    )
}

fn optimizer_fidelity(db: &OptimizerResult, elapsed: Duration) -> Outcome {
    let oracle = double_bubble_oracle(PI);
    let rel = (db.final_perimeter - oracle).abs() / oracle;
    let angle_dev = junction_angles(&db.cluster)
        .iter()
        .flatten()
        .map(|a| (a - 120.0).abs())
        .fold(0.0, f64::max);
    let vol = db.volume_errors.iter().map(|e| e.abs() / PI).fold(0.0, f64::max);
    outcome(
        db.converged && angle_dev <= 1.0 && rel <= 5e-3 && vol < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "P = {:.6} vs {oracle:.6} (rel {rel:.1e}), angle dev {angle_dev:.3} deg, volume err {vol:.1e}, {elapsed:.1?}",
            db.final_perimeter
        ),
    )
}

/// Sample boundary points: interior vertices of each interface plus every
/// junction.
fn boundary_samples(cluster: &Cluster) -> Vec<Point2> {
    let mut out: Vec<Point2> = cluster.junctions().iter().map(|j| j.location).collect();
    for iface in cluster.interfaces() {
        let v = iface.chain.vertices();
        for k in 1..=4 {
            out.push(v[k * (v.len() - 1) / 5]);
        }
    }
    out
}

fn monotonicity(clusters: &[&Cluster]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for c in clusters {
        // The quantity is monotone only below the almost-minimality scale of
        // a volume-constrained minimizer; beyond the cluster size it decays
        // like 1/r.
        let radii = log_radii(1e-4 * c.diameter(), 0.25 * c.diameter(), 20);
        for x in boundary_samples(c) {
            worst = worst.max(profile(c, x, &radii).unwrap().max_decrease());
            points += 1;
        }
    }
    let mut cone_dev: f64 = 0.0;
    let radii = log_radii(1e-5, 0.99, 20);
    for (c, expected) in [
        (fixtures::split_disk(1.0, 64).unwrap(), 2.0),
        (fixtures::y_junction_disk(1.0, 64).unwrap(), 3.0),
    ] {
        for v in profile(&c, Point2::ORIGIN, &radii).unwrap().values {
            cone_dev = cone_dev.max((v - expected).abs());
        }
    }
    outcome(
        worst <= 1e-3 && cone_dev <= 1e-12 && points >= 10,
        format!("{points} points, max decrease {worst:.1e}; cone profiles within {cone_dev:.1e}"),
    )
}

fn counting(cases: &[(&str, &Cluster, usize)]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, cluster, chambers) in cases {
        let graph = extract_graph(cluster).unwrap();
        let report = classify(cluster, &graph, &AnalysisConfig::default()).unwrap();
        let windowed = report
            .points
            .iter()
            .filter(|p| p.degree == 3 && (p.density - 1.5).abs() <= 0.25)
            .count();
        let worst = report
            .points
            .iter()
            .map(|p| (p.density - 1.5).abs())
            .fold(0.0, f64::max);
        let ok = report.count == 2 * (chambers - 1)
            && windowed == report.count
            && worst <= 0.02
            && !report.truncated
            && report.certified();
        pass &= ok;
        detail.push(format!(
            "{name}: count {} (expect {}), density dev {worst:.1e}, bound {}",
            report.count,
            2 * (chambers - 1),
            report.certificate_bound
        ));
    }
    outcome(pass, detail.join("; "))
}

fn discreteness(db: &Cluster) -> Outcome {
    let junctions = db.junctions();
    let (x, other) = (junctions[0].location, junctions[1].location);
    let sep = x.distance(other);
    let ratio = 0.125;
    let large = 1.2 * sep;
    let spans = detect_drop(db, x, large, ratio, 1e-3).unwrap();
    // Halve until B_{r/2} excludes the other junction and the quantity is
    // within 1e-4 of the cone value 3 on [4λ²r, r].
    let cone_like = |r: f64| {
        log_radii(4.0 * ratio * ratio * r, r, 20)
            .iter()
            .all(|&s| (monotonicity_value(db, x, s) - 3.0).abs() <= 1e-4)
    };
    let mut small = sep;
    while !(small / 2.0 < sep && cone_like(small)) {
        small /= 2.0;
    }
    let quiet = !detect_drop(db, x, small, ratio, 1e-3).unwrap();
    outcome(
        spans && quiet,
        format!("drop at r = {large:.3}: {spans}; at r = {small:.2e}: {}", !quiet),
    )
}

fn equivalence_classes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut classes = std::collections::BTreeSet::new();
    let mut unconverged = 0;
    let mut bad_count = 0;
    for _ in 0..20 {
        let volumes = vec![rng.random_range(1.0..=2.0), rng.random_range(1.0..=2.0)];
        let r = solve(fixtures::rectangle_row(&volumes, 0.05).unwrap(), volumes);
        unconverged += usize::from(!r.converged);
        let graph = extract_graph(&r.cluster).unwrap();
        let report = classify(&r.cluster, &graph, &AnalysisConfig::default()).unwrap();
        bad_count +=
            usize::from(report.count != 2 || report.points.iter().any(|p| p.kind != SingularKind::TripleJunction));
        classes.insert(canonical_class(&graph));
    }
    let disk = canonical_class(&extract_graph(&fixtures::disk(1.0, 64).unwrap()).unwrap());
    outcome(
        classes.len() == 1 && !classes.contains(&disk) && unconverged == 0 && bad_count == 0,
        format!(
            "20 runs: {} class(es), {unconverged} unconverged, {bad_count} miscounted; disk distinct: {}",
            classes.len(),
            !classes.contains(&disk)
        ),
    )
}

fn main() -> ExitCode {
    panic::set_hook(Box::new(|_| {}));
    let (db, db_time) = timed(|| solve(fixtures::rectangle_row(&[PI, PI], 0.05).unwrap(), vec![PI, PI]));
    let stack = solve(
        fixtures::triple_stack([1.0, 1.0, 1.0], 0.05).unwrap(),
        vec![1.0, 1.0, 1.0],
    );

    let criteria: Vec<Criterion> = vec![
        ("covering lemma soundness", Box::new(covering_soundness)),
        ("sharpness family", Box::new(sharpness)),
        ("Vitali covers", Box::new(vitali)),
        ("density constants", Box::new(density_constants)),
        ("optimizer fidelity", Box::new(|| optimizer_fidelity(&db, db_time))),
        (
            "monotonicity",
            Box::new(|| {
                if db.converged && stack.converged {
                    monotonicity(&[&db.cluster, &stack.cluster])
                } else {
                    outcome(false, "a reference minimizer did not converge")
                }
            }),
        ),
        (
            "singular point counting",
            Box::new(|| counting(&[("N=2", &db.cluster, 2), ("N=3", &stack.cluster, 3)])),
        ),
        ("quantitative discreteness", Box::new(|| discreteness(&db.cluster))),
        ("equivalence classes", Box::new(equivalence_classes)),
    ];

    let mut unexpected = Vec::new();
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let id = i + 1;
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let expected_fail = EXPECTED_FAILURES.contains(&id);
        let tag = match (result.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if result.pass == expected_fail {
            unexpected.push(id);
        }
        println!("criterion {id} {name:<28} {tag}: {}", result.detail);
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
