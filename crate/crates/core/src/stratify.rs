//! Singular points of planar clusters: boundary graphs, density-based
//! classification with annulus budgets and a covering certificate, reference
//! cone densities, and canonical forms of labeled boundary graphs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{covering_bound, Bound, CoveringError};
use crate::geometry::{Ball, Cluster, Point2, EXTERIOR};
use crate::monotonicity::{
    annulus_budget, density, log_radii, profile, AnnulusBudget, MonotonicityError, MonotonicityProfile,
    DEFAULT_DROP_THRESHOLD, DEFAULT_SCALE_RATIO,
};

/// Density of the planar triple junction, the only singular value in 2D.
pub const THETA_0: f64 = 1.5;
/// Half-width of the density window around [`THETA_0`].
pub const TRIPLE_WINDOW: f64 = 0.25;
/// Half-width of the density window around 1 for regular points.
pub const REGULAR_WINDOW: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StratifyError {
    #[error("junction {vertex} at ({x}, {y}) has degree {degree}, expected 3")]
    Degree {
        vertex: usize,
        x: f64,
        y: f64,
        degree: usize,
    },
    #[error("junction {vertex} has two incident interfaces separating chambers {pair:?}")]
    RepeatedPair { vertex: usize, pair: (usize, usize) },
    #[error("invalid analysis parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Monotonicity(#[from] MonotonicityError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}

/// Chamber pair with the smaller label first.
fn ordered(pair: (usize, usize)) -> (usize, usize) {
    (pair.0.min(pair.1), pair.0.max(pair.1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub chambers: (usize, usize),
    pub interface: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphLoop {
    pub chambers: (usize, usize),
    pub interface: usize,
}

/// Junctions as vertices, open interfaces as edges, closed interfaces as
/// loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGraph {
    pub chamber_count: usize,
    pub vertices: Vec<Point2>,
    pub edges: Vec<GraphEdge>,
    pub loops: Vec<GraphLoop>,
}

impl BoundaryGraph {
    pub fn degree(&self, vertex: usize) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.from == vertex) + usize::from(e.to == vertex))
            .sum()
    }
}

/// Builds the boundary graph and checks that every junction joins exactly
/// three interfaces with pairwise different chamber pairs.
pub fn extract_graph(cluster: &Cluster) -> Result<BoundaryGraph, StratifyError> {
    let junctions = cluster.junctions();
    let mut ends: BTreeMap<(usize, bool), usize> = BTreeMap::new();
    for (v, j) in junctions.iter().enumerate() {
        if j.degree() != 3 {
            return Err(StratifyError::Degree {
                vertex: v,
                x: j.location.x,
                y: j.location.y,
                degree: j.degree(),
            });
        }
        let mut pairs: Vec<(usize, usize)> = j
            .incidences
            .iter()
            .map(|&(i, _)| ordered(cluster.interfaces()[i].chamber_pair()))
            .collect();
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(StratifyError::RepeatedPair { vertex: v, pair: w[0] });
        }
        for &inc in &j.incidences {
            ends.insert(inc, v);
        }
    }
    let mut edges = Vec::new();
    let mut loops = Vec::new();
    for (i, iface) in cluster.interfaces().iter().enumerate() {
        let chambers = ordered(iface.chamber_pair());
        if iface.chain.is_closed() {
            loops.push(GraphLoop { chambers, interface: i });
        } else {
            edges.push(GraphEdge {
                from: ends[&(i, false)],
                to: ends[&(i, true)],
                chambers,
                interface: i,
            });
        }
    }
    Ok(BoundaryGraph {
        chamber_count: cluster.chamber_count(),
        vertices: junctions.iter().map(|j| j.location).collect(),
        edges,
        loops,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    RegularSuspect,
    TripleJunction,
    Unknown,
}

/// Kind from a density estimate and the number of boundary branches at the
/// point.
pub fn kind_for(theta: f64, reliable: bool, degree: usize) -> SingularKind {
    if !reliable {
        SingularKind::Unknown
    } else if (theta - THETA_0).abs() <= TRIPLE_WINDOW && degree == 3 {
        SingularKind::TripleJunction
    } else if (theta - 1.0).abs() <= REGULAR_WINDOW && degree != 3 {
        SingularKind::RegularSuspect
    } else {
        SingularKind::Unknown
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub x: f64,
    pub y: f64,
    pub density: f64,
    pub density_error: f64,
    pub reliable: bool,
    pub degree: usize,
    pub kind: SingularKind,
    pub budget: AnnulusBudget,
}

impl SingularPoint {
    pub fn location(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Parameters of the singular-point analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// `λ` in the scales `2R(2λ)^n`.
    pub scale_ratio: f64,
    /// `δ`, the drop that marks an occupied scale.
    pub drop_threshold: f64,
    /// `R`; `None` covers the whole cluster from its bounding-box center.
    pub analysis_radius: Option<f64>,
    pub radii_per_decade: usize,
    /// Deepest scale index scanned for budgets; `None` stops at the density
    /// radii.
    pub max_depth: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            scale_ratio: DEFAULT_SCALE_RATIO,
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            analysis_radius: None,
            radii_per_decade: 20,
            max_depth: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), StratifyError> {
        if !(self.scale_ratio > 0.0 && self.scale_ratio <= 0.125) {
            return Err(StratifyError::Parameter(format!(
                "scale ratio {} outside (0, 1/8]",
                self.scale_ratio
            )));
        }
        if !(self.drop_threshold > 0.0 && self.drop_threshold.is_finite()) {
            return Err(StratifyError::Parameter("drop threshold must be positive".into()));
        }
        if let Some(r) = self.analysis_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(StratifyError::Parameter(format!("analysis radius {r}")));
            }
        }
        if self.radii_per_decade < 2 {
            return Err(StratifyError::Parameter("need at least 2 radii per decade".into()));
        }
        Ok(())
    }

    /// `(x0, R)` for a cluster.
    pub fn analysis_ball(&self, cluster: &Cluster) -> (Point2, f64) {
        let center = cluster.bounding_center();
        (center, self.analysis_radius.unwrap_or(0.5 * cluster.diameter()))
    }
}

/// Radii for density extrapolation at a point: two decades below the local
/// edge scale, above the resolution floor.
pub fn density_radii(cluster: &Cluster, config: &AnalysisConfig) -> Vec<f64> {
    let h = cluster.min_edge_length();
    let hi = 0.5 * h;
    let lo = (1e-3 * h).max(100.0 * cluster.resolution_floor()).min(0.01 * hi);
    log_radii(lo, hi, config.radii_per_decade)
}

/// Density estimate and budget at one boundary point with the given number
/// of boundary branches.
fn analyze_point(
    cluster: &Cluster,
    x: Point2,
    degree: usize,
    config: &AnalysisConfig,
) -> Result<(SingularPoint, MonotonicityProfile), StratifyError> {
    let radii = density_radii(cluster, config);
    let prof = profile(cluster, x, &radii)?;
    let est = density(&prof)?;
    let (_, base_radius) = config.analysis_ball(cluster);
    let depth = match config.max_depth {
        Some(d) => d,
        None => {
            // Stop once the inner scale 2R(2λ)^{n+2} reaches the density radii.
            let ratio = 2.0 * config.scale_ratio;
            let n = ((radii[0] / (2.0 * base_radius)).ln() / ratio.ln()).floor() as i64 - 2;
            n.max(0) as usize
        }
    };
    let budget = annulus_budget(
        cluster,
        prof.base_point,
        base_radius,
        config.scale_ratio,
        config.drop_threshold,
        depth,
    )?;
    let point = SingularPoint {
        x: prof.base_point.x,
        y: prof.base_point.y,
        density: est.theta,
        density_error: est.error_estimate,
        reliable: est.reliable,
        degree,
        kind: kind_for(est.theta, est.reliable, degree),
        budget,
    };
    Ok((point, prof))
}

/// Classifies an arbitrary boundary point, counted as having two branches
/// unless it is a graph vertex.
pub fn probe_point(cluster: &Cluster, x: Point2, config: &AnalysisConfig) -> Result<SingularPoint, StratifyError> {
    config.validate()?;
    let degree = cluster
        .junctions()
        .iter()
        .find(|j| j.location.distance(x) <= cluster.junction_tolerance())
        .map_or(2, |j| j.degree());
    Ok(analyze_point(cluster, x, degree, config)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub points: Vec<SingularPoint>,
    /// Number of points classified as triple junctions.
    pub count: usize,
    /// `(10/λ²)^{2 N_max}` with `N_max` the largest budget.
    pub certificate_bound: Bound,
    /// `P(B_{2R}(x0)) / R`.
    pub perimeter_ratio: f64,
    pub canonical_class: String,
    pub max_budget: usize,
    /// Some budget was cut short by the resolution floor.
    pub truncated: bool,
    pub lambda: f64,
    pub scale_ratio: f64,
    pub drop_threshold: f64,
    pub analysis_radius: f64,
}

impl SingularityReport {
    /// Whether the count respects the certificate. Meaningful only when no
    /// budget is truncated.
    pub fn certified(&self) -> bool {
        self.certificate_bound.admits(self.count as u128)
    }
}

/// Density, kind and budget for every graph vertex inside the analysis ball.
/// Profiles used for the densities are returned alongside, in point order.
pub fn classify_with_profiles(
    cluster: &Cluster,
    graph: &BoundaryGraph,
    config: &AnalysisConfig,
) -> Result<(SingularityReport, Vec<MonotonicityProfile>), StratifyError> {
    config.validate()?;
    let (center, radius) = config.analysis_ball(cluster);
    let mut points = Vec::new();
    let mut profiles = Vec::new();
    for (v, &x) in graph.vertices.iter().enumerate() {
        if x.distance(center) > radius {
            continue;
        }
        let (point, prof) = analyze_point(cluster, x, graph.degree(v), config)?;
        points.push(point);
        profiles.push(prof);
    }
    let count = points.iter().filter(|p| p.kind == SingularKind::TripleJunction).count();
    let max_budget = points.iter().map(|p| p.budget.budget).max().unwrap_or(0);
    let truncated = points.iter().any(|p| p.budget.truncated);
    let certificate_bound = covering_bound(2, config.scale_ratio, max_budget)?;
    let perimeter_ratio = cluster.localized_perimeter(&Ball {
        center,
        radius: 2.0 * radius,
    }) / radius;
    let report = SingularityReport {
        points,
        count,
        certificate_bound,
        perimeter_ratio,
        canonical_class: canonical_class(graph),
        max_budget,
        truncated,
        lambda: cluster.lambda(),
        scale_ratio: config.scale_ratio,
        drop_threshold: config.drop_threshold,
        analysis_radius: radius,
    };
    Ok((report, profiles))
}

pub fn classify(
    cluster: &Cluster,
    graph: &BoundaryGraph,
    config: &AnalysisConfig,
) -> Result<SingularityReport, StratifyError> {
    Ok(classify_with_profiles(cluster, graph, config)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    HalfSpace,
    Y2D,
    YCone3D,
    TCone3D,
}

impl Cone {
    pub const ALL: [Cone; 4] = [Cone::HalfSpace, Cone::Y2D, Cone::YCone3D, Cone::TCone3D];
}

/// Density of a minimizing cone: its measure inside the unit ball divided by
/// the measure of the flat unit disk of the same dimension.
///
/// The tetrahedral cone is the union of six planar sectors, one per edge of
/// a regular tetrahedron centered at the origin, each with opening angle
/// `arccos(-1/3)`. Its density is `3 arccos(-1/3) / π`.
pub fn reference_density(cone: Cone) -> f64 {
    match cone {
        Cone::HalfSpace => 1.0,
        Cone::Y2D | Cone::YCone3D => 1.5,
        Cone::TCone3D => 3.0 * (-1.0_f64 / 3.0).acos() / PI,
    }
}

type V3 = [f64; 3];

fn normalize(v: V3) -> V3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross_norm(a: V3, b: V3) -> f64 {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Spherical interpolation between unit vectors.
fn slerp(a: V3, b: V3, t: f64) -> V3 {
    let cos = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    let omega = cos.acos();
    let s = omega.sin();
    let (wa, wb) = (((1.0 - t) * omega).sin() / s, (t * omega).sin() / s);
    [wa * a[0] + wb * b[0], wa * a[1] + wb * b[1], wa * a[2] + wb * b[2]]
}

/// Area of the tetrahedral cone inside the unit ball over `π`, by summing
/// triangle fans over each of its six sectors with `pieces` triangles per
/// sector, then one Richardson step against `pieces / 2`.
pub fn t_cone_density_numeric(pieces: usize) -> f64 {
    let vertices = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]].map(normalize);
    let fan = |k: usize| -> f64 {
        let mut area = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                let mut prev = vertices[i];
                for s in 1..=k {
                    let next = slerp(vertices[i], vertices[j], s as f64 / k as f64);
                    area += 0.5 * cross_norm(prev, next);
                    prev = next;
                }
            }
        }
        area
    };
    let fine = fan(pieces);
    let coarse = fan((pieces / 2).max(1));
    // Fan error is O(k^-2).
    (fine + (fine - coarse) / 3.0) / PI
}

/// Canonical string of a boundary graph, equal for two graphs exactly when
/// some bijection of junctions and of chamber labels (the exterior fixed)
/// maps one graph's edges, loops and chamber pairs onto the other's.
///
/// The graph is turned into a colored multigraph with one node per
/// exterior, chamber, junction, interface and loop, and canonized by color
/// refinement with individualization, keeping the smallest adjacency
/// encoding over all leaves.
pub fn canonical_class(graph: &BoundaryGraph) -> String {
    let n_ch = graph.chamber_count;
    let n_v = graph.vertices.len();
    // Node layout: [exterior, chambers 1..=N, junctions, interfaces, loops].
    let junction = |v: usize| 1 + n_ch + v;
    let interface = |e: usize| 1 + n_ch + n_v + e;
    let looped = |l: usize| 1 + n_ch + n_v + graph.edges.len() + l;
    let total = 1 + n_ch + n_v + graph.edges.len() + graph.loops.len();
    let mut colors = vec![0u32; total];
    for c in colors.iter_mut().take(1 + n_ch).skip(1) {
        *c = 1;
    }
    for v in 0..n_v {
        colors[junction(v)] = 2;
    }
    for e in 0..graph.edges.len() {
        colors[interface(e)] = 3;
    }
    for l in 0..graph.loops.len() {
        colors[looped(l)] = 4;
    }
    let mut adj = vec![BTreeMap::<usize, u32>::new(); total];
    let mut link = |a: usize, b: usize| {
        *adj[a].entry(b).or_default() += 1;
        *adj[b].entry(a).or_default() += 1;
    };
    let chamber_node = |c: usize| if c == EXTERIOR { 0 } else { c };
    for (e, edge) in graph.edges.iter().enumerate() {
        link(interface(e), junction(edge.from));
        link(interface(e), junction(edge.to));
        link(interface(e), chamber_node(edge.chambers.0));
        link(interface(e), chamber_node(edge.chambers.1));
    }
    for (l, lp) in graph.loops.iter().enumerate() {
        link(looped(l), chamber_node(lp.chambers.0));
        link(looped(l), chamber_node(lp.chambers.1));
    }
    let adj: Vec<Vec<(usize, u32)>> = adj.into_iter().map(|m| m.into_iter().collect()).collect();
    let best = search(&adj, refine(&adj, colors)).expect("non-empty search");
    format!("N{}V{}E{}L{}:{}", n_ch, n_v, graph.edges.len(), graph.loops.len(), best)
}

/// Color refinement to a stable partition. New colors are ranks of
/// (old color, sorted neighbor color multiset), so they depend only on the
/// isomorphism type.
fn refine(adj: &[Vec<(usize, u32)>], mut colors: Vec<u32>) -> Vec<u32> {
    loop {
        let signatures: Vec<(u32, Vec<(u32, u32)>)> = (0..adj.len())
            .map(|v| {
                let mut s: Vec<(u32, u32)> = adj[v].iter().map(|&(w, m)| (colors[w], m)).collect();
                s.sort_unstable();
                (colors[v], s)
            })
            .collect();
        let mut distinct = signatures.clone();
        distinct.sort();
        distinct.dedup();
        let next: Vec<u32> = signatures
            .iter()
            .map(|s| distinct.binary_search(s).expect("present") as u32)
            .collect();
        let before = colors.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct.len() == before {
            return next;
        }
        colors = next;
    }
}

fn search(adj: &[Vec<(usize, u32)>], colors: Vec<u32>) -> Option<String> {
    let n = colors.len();
    let mut counts = BTreeMap::<u32, usize>::new();
    for &c in &colors {
        *counts.entry(c).or_default() += 1;
    }
    let Some((&target, _)) = counts.iter().find(|(_, &k)| k > 1) else {
        return Some(encode(adj, &colors));
    };
    let mut best: Option<String> = None;
    for v in (0..n).filter(|&v| colors[v] == target) {
        // Split v off in front of the rest of its cell.
        let split: Vec<u32> = colors
            .iter()
            .enumerate()
            .map(|(w, &c)| 2 * c + u32::from(c == target && w != v))
            .collect();
        if let Some(s) = search(adj, refine(adj, split)) {
            if best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
        }
    }
    best
}

/// Adjacency list under the discrete coloring, as a string.
fn encode(adj: &[Vec<(usize, u32)>], colors: &[u32]) -> String {
    let mut order: Vec<usize> = (0..colors.len()).collect();
    order.sort_by_key(|&v| colors[v]);
    let mut position = vec![0usize; colors.len()];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }
    let mut out = String::new();
    for &v in &order {
        let mut nbrs: Vec<(usize, u32)> = adj[v].iter().map(|&(w, m)| (position[w], m)).collect();
        nbrs.sort_unstable();
        out.push('[');
        for (k, (w, m)) in nbrs.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            if *m == 1 {
                out.push_str(&w.to_string());
            } else {
                out.push_str(&format!("{w}x{m}"));
            }
        }
        out.push(']');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::{Chain, Interface};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn disk_graph() {
        let g = extract_graph(&fixtures::disk(1.0, 64).unwrap()).unwrap();
        assert_eq!((g.vertices.len(), g.edges.len(), g.loops.len()), (0, 0, 1));
    }

    #[test]
    fn double_bubble_graph() {
        let g = extract_graph(&fixtures::double_bubble(PI, 64).unwrap()).unwrap();
        assert_eq!((g.vertices.len(), g.edges.len(), g.loops.len()), (2, 3, 0));
        assert!((0..2).all(|v| g.degree(v) == 3));
    }

    #[test]
    fn triple_stack_graph_follows_euler() {
        let g = extract_graph(&fixtures::triple_stack([1.0, 1.0, 1.0], 0.2).unwrap()).unwrap();
        assert_eq!(g.vertices.len(), 2 * (3 - 1));
        assert_eq!(g.edges.len(), 3 * g.vertices.len() / 2);
    }

    #[test]
    fn degree_four_is_rejected() {
        // Four unit squares around the origin meet in a degree-4 junction.
        let p = Point2::new;
        let o = p(0.0, 0.0);
        let mut interfaces = Vec::new();
        let rays = [p(1.0, 0.0), p(0.0, 1.0), p(-1.0, 0.0), p(0.0, -1.0)];
        for k in 0..4 {
            let (here, next) = (k + 1, (k + 1) % 4 + 1);
            interfaces.push(Interface::new(
                next,
                here,
                Chain::open(vec![o, rays[(k + 1) % 4]]).unwrap(),
            ));
            let corner = rays[k] + rays[(k + 1) % 4];
            interfaces.push(Interface::new(
                here,
                EXTERIOR,
                Chain::open(vec![rays[k], corner, rays[(k + 1) % 4]]).unwrap(),
            ));
        }
        let c = Cluster::from_interfaces(4, interfaces).unwrap();
        assert!(matches!(
            extract_graph(&c),
            Err(StratifyError::Degree { degree: 4, .. })
        ));
    }

    #[test]
    fn kinds() {
        assert_eq!(kind_for(1.5, true, 3), SingularKind::TripleJunction);
        assert_eq!(kind_for(1.26, true, 3), SingularKind::TripleJunction);
        assert_eq!(kind_for(1.5, false, 3), SingularKind::Unknown);
        assert_eq!(kind_for(1.5, true, 2), SingularKind::Unknown);
        assert_eq!(kind_for(1.02, true, 2), SingularKind::RegularSuspect);
        assert_eq!(kind_for(1.2, true, 2), SingularKind::Unknown);
    }

    #[test]
    fn classify_disk_and_exact_double_bubble() {
        let disk = fixtures::disk(1.0, 256).unwrap();
        let r = classify(&disk, &extract_graph(&disk).unwrap(), &AnalysisConfig::default()).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.certificate_bound, Bound::Finite(1));

        let db = fixtures::double_bubble(PI, 256).unwrap();
        let r = classify(&db, &extract_graph(&db).unwrap(), &AnalysisConfig::default()).unwrap();
        assert_eq!(r.count, 2);
        for p in &r.points {
            assert!((p.density - 1.5).abs() < 0.02, "{}", p.density);
        }
        assert!(!r.truncated);
        assert!(r.certified());
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "points",
            "count",
            "certificate_bound",
            "perimeter_ratio",
            "canonical_class",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json["points"][0].get("x").is_some());
    }

    #[test]
    fn regular_probe() {
        let db = fixtures::double_bubble(PI, 256).unwrap();
        let iface = &db.interfaces()[1];
        let x = iface.chain.vertices()[40];
        let p = probe_point(&db, x, &AnalysisConfig::default()).unwrap();
        assert_eq!(p.kind, SingularKind::RegularSuspect);
        assert!((p.density - 1.0).abs() < 0.02);
    }

    #[test]
    fn reference_constants() {
        assert_eq!(reference_density(Cone::HalfSpace), 1.0);
        assert_eq!(reference_density(Cone::Y2D), 1.5);
        assert_eq!(reference_density(Cone::YCone3D), 1.5);
        let numeric = t_cone_density_numeric(4096);
        assert!((numeric - reference_density(Cone::TCone3D)).abs() < 1e-8, "{numeric}");
    }

    fn relabel(graph: &BoundaryGraph, perm: &[usize], vperm: &[usize]) -> BoundaryGraph {
        let map = |c: usize| if c == EXTERIOR { 0 } else { perm[c - 1] };
        let pair = |(a, b): (usize, usize)| ordered((map(a), map(b)));
        let mut vertices = vec![Point2::ORIGIN; graph.vertices.len()];
        for (v, &p) in graph.vertices.iter().enumerate() {
            vertices[vperm[v]] = p;
        }
        let mut edges: Vec<GraphEdge> = graph
            .edges
            .iter()
            .map(|e| GraphEdge {
                from: vperm[e.to],
                to: vperm[e.from],
                chambers: pair(e.chambers),
                interface: e.interface,
            })
            .collect();
        edges.reverse();
        BoundaryGraph {
            chamber_count: graph.chamber_count,
            vertices,
            edges,
            loops: graph
                .loops
                .iter()
                .map(|l| GraphLoop {
                    chambers: pair(l.chambers),
                    interface: l.interface,
                })
                .collect(),
        }
    }

    #[test]
    fn canonical_class_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for cluster in [
            fixtures::double_bubble(PI, 32).unwrap(),
            fixtures::triple_stack([1.0, 1.5, 2.0], 0.3).unwrap(),
            fixtures::rectangle_row(&[1.0, 1.0, 1.0, 1.0], 0.5).unwrap(),
        ] {
            let g = extract_graph(&cluster).unwrap();
            let base = canonical_class(&g);
            for _ in 0..200 {
                let mut perm: Vec<usize> = (1..=g.chamber_count).collect();
                perm.shuffle(&mut rng);
                let mut vperm: Vec<usize> = (0..g.vertices.len()).collect();
                vperm.shuffle(&mut rng);
                assert_eq!(canonical_class(&relabel(&g, &perm, &vperm)), base);
            }
        }
    }

    #[test]
    fn canonical_class_separates() {
        let db = canonical_class(&extract_graph(&fixtures::double_bubble(PI, 32).unwrap()).unwrap());
        let disk = canonical_class(&extract_graph(&fixtures::disk(1.0, 32).unwrap()).unwrap());
        let row3 = canonical_class(&extract_graph(&fixtures::rectangle_row(&[1.0; 3], 0.5).unwrap()).unwrap());
        let stack = canonical_class(&extract_graph(&fixtures::triple_stack([1.0; 3], 0.5).unwrap()).unwrap());
        assert_ne!(db, disk);
        assert_ne!(row3, stack);
        let rotated = fixtures::double_bubble(PI, 32)
            .unwrap()
            .map_points(|p| p.rotated(0.7) + Point2::new(3.0, -1.0))
            .unwrap();
        assert_eq!(canonical_class(&extract_graph(&rotated).unwrap()), db);
    }
}
