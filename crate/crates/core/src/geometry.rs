//! Planar clusters: chambers separated by polygonal interface chains.
//!
//! A [`Cluster`] stores its boundary as a list of [`Interface`]s. Each
//! interface is a polygonal [`Chain`] tagged with the chamber on its left and
//! the chamber on its right (label `0` is the exterior). Open chains end at
//! junction vertices, where the endpoints of several chains coincide; closed
//! chains are isolated loops.
//!
//! Orientation carries the area: the signed shoelace sum of a chain is added
//! to its left chamber and subtracted from its right chamber, so chamber
//! areas come out positive without ever assembling explicit cycles.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label of the unbounded exterior region.
pub const EXTERIOR: usize = 0;

/// Relative tolerance (against the cluster diameter) used to identify chain
/// endpoints that represent the same junction.
pub const JUNCTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("chain has {count} vertices, needs at least {min}")]
    TooFewVertices { count: usize, min: usize },
    #[error("zero-length edge after vertex {vertex}")]
    ZeroLengthEdge { vertex: usize },
    #[error("non-finite coordinate at vertex {vertex}")]
    NonFinite { vertex: usize },
    #[error("interface {index}: {source}")]
    Interface {
        index: usize,
        #[source]
        source: Box<GeometryError>,
    },
    #[error("chamber labels must be exactly 1..={expected}, found {found:?}")]
    ChamberLabels { expected: usize, found: Vec<usize> },
    #[error("interface {index} separates unknown chamber {label}")]
    UnknownChamber { index: usize, label: usize },
    #[error("interface {index} has chamber {label} on both sides")]
    SameChamberBothSides { index: usize, label: usize },
    #[error("chamber {label} has an open boundary near ({x}, {y})")]
    OpenBoundary { label: usize, x: f64, y: f64 },
    #[error("chain endpoint ({x}, {y}) is not shared with any other chain")]
    DanglingEndpoint { x: f64, y: f64 },
    #[error("interfaces {first} and {second} intersect")]
    SelfIntersection { first: usize, second: usize },
    #[error("chamber {label} has non-positive area {area}")]
    DegenerateChamber { label: usize, area: f64 },
    #[error("cluster has no chambers")]
    Empty,
    #[error("invalid almost-minimality metadata: lambda={lambda}, r0={r0}")]
    AlmostMinimality { lambda: f64, r0: f64 },
    #[error("ball radius must be positive and finite, got {0}")]
    BallRadius(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Point2 {
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A closed disk `B_r(center)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point2,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point2, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::BallRadius(radius));
        }
        Ok(Self { center, radius })
    }
}

/// Length of the part of segment `[a, b]` lying inside the disk of the given
/// center and radius.
///
/// The chord is centred at the projection of the center onto the line, with
/// half-width `sqrt(r^2 |d|^2 - (f x d)^2) / |d|^2` in the segment parameter;
/// the factored form avoids cancellation for chords much shorter than the
/// segment, and measuring the clipped chord from both ends avoids it when
/// the center lies on a long segment.
pub fn segment_length_in_disk(a: Point2, b: Point2, center: Point2, radius: f64) -> f64 {
    let d = b - a;
    let f = a - center;
    let qa = d.norm_squared();
    if qa == 0.0 {
        return 0.0;
    }
    let len = qa.sqrt();
    let offset = f.cross(d).abs();
    let reach = radius * len;
    if offset >= reach {
        return 0.0;
    }
    let half = ((reach - offset) * (reach + offset)).sqrt() / qa;
    // Parameter distances from the foot of the perpendicular back to `a`
    // and on to `b`, each from its own dot product.
    let to_a = -f.dot(d) / qa;
    let to_b = (b - center).dot(d) / qa;
    (half.min(to_a) + half.min(to_b)).max(0.0) * len
}

/// Closest point to `p` on segment `[a, b]`.
pub fn project_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    a + d * t
}

/// An ordered polygonal curve. A closed chain has an implicit edge from the
/// last vertex back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    vertices: Vec<Point2>,
    closed: bool,
}

impl Chain {
    pub fn new(vertices: Vec<Point2>, closed: bool) -> Result<Self, GeometryError> {
        let min = if closed { 3 } else { 2 };
        if vertices.len() < min {
            return Err(GeometryError::TooFewVertices {
                count: vertices.len(),
                min,
            });
        }
        if let Some(vertex) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite { vertex });
        }
        let chain = Self { vertices, closed };
        for (i, (a, b)) in chain.segments().enumerate() {
            if a == b {
                return Err(GeometryError::ZeroLengthEdge { vertex: i });
            }
        }
        Ok(chain)
    }

    pub fn open(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        Self::new(vertices, false)
    }

    pub fn closed(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        Self::new(vertices, true)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..self.segment_count()).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    /// First and last vertex of an open chain.
    pub fn endpoints(&self) -> Option<(Point2, Point2)> {
        if self.closed {
            None
        } else {
            Some((self.vertices[0], *self.vertices.last().unwrap()))
        }
    }

    /// `1/2 sum a x b` over the chain's segments.
    pub fn shoelace(&self) -> f64 {
        0.5 * self.segments().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn length_in_ball(&self, ball: &Ball) -> f64 {
        self.segments()
            .map(|(a, b)| segment_length_in_disk(a, b, ball.center, ball.radius))
            .sum()
    }

    fn map_points(&self, f: &impl Fn(Point2) -> Point2) -> Self {
        Self {
            vertices: self.vertices.iter().copied().map(f).collect(),
            closed: self.closed,
        }
    }
}

/// A boundary chain together with the chambers it separates. The chamber
/// `left` lies to the left of the chain's direction of travel.
#[derive(Clone, Debug, PartialEq)]
pub struct Interface {
    pub left: usize,
    pub right: usize,
    pub chain: Chain,
}

impl Interface {
    pub fn new(left: usize, right: usize, chain: Chain) -> Self {
        Self { left, right, chain }
    }

    /// Unordered chamber pair, smaller label first.
    pub fn chamber_pair(&self) -> (usize, usize) {
        (self.left.min(self.right), self.left.max(self.right))
    }

    pub fn separates(&self, label: usize) -> bool {
        self.left == label || self.right == label
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chamber {
    pub label: usize,
}

/// A junction: a point where several open chains end.
#[derive(Clone, Debug, PartialEq)]
pub struct Junction {
    pub location: Point2,
    /// `(interface index, is_end)` for every chain end meeting here.
    pub incidences: Vec<(usize, bool)>,
}

impl Junction {
    pub fn degree(&self) -> usize {
        self.incidences.len()
    }
}

/// Groups the endpoints of open chains into junctions, identifying endpoints
/// closer than `tolerance`.
pub fn group_endpoints(interfaces: &[Interface], tolerance: f64) -> Vec<Junction> {
    let mut junctions: Vec<Junction> = Vec::new();
    for (index, iface) in interfaces.iter().enumerate() {
        let Some((start, end)) = iface.chain.endpoints() else {
            continue;
        };
        for (p, is_end) in [(start, false), (end, true)] {
            match junctions.iter_mut().find(|j| j.location.distance(p) <= tolerance) {
                Some(j) => j.incidences.push((index, is_end)),
                None => junctions.push(Junction {
                    location: p,
                    incidences: vec![(index, is_end)],
                }),
            }
        }
    }
    junctions
}

/// Signed area of every chamber `1..=chambers`, from the oriented interfaces.
pub fn signed_chamber_areas(chambers: usize, interfaces: &[Interface]) -> Vec<f64> {
    let mut areas = vec![0.0; chambers + 1];
    for iface in interfaces {
        let s = iface.chain.shoelace();
        areas[iface.left] += s;
        areas[iface.right] -= s;
    }
    areas.remove(0);
    areas
}

/// A planar N-cluster with polygonal boundary.
///
/// Immutable once built; every constructor runs the full validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterDoc", into = "ClusterDoc")]
pub struct Cluster {
    chambers: Vec<Chamber>,
    interfaces: Vec<Interface>,
    lambda: f64,
    r0: f64,
}

impl Cluster {
    /// Builds and validates a cluster. `r0` may be `f64::INFINITY`.
    ///
    /// Validation rejects: chains with fewer than two vertices or zero-length
    /// edges, unknown or repeated chamber labels, chains with the same
    /// chamber on both sides, dangling endpoints, chamber boundaries that do
    /// not close up, crossing or overlapping chains, and chambers with
    /// non-positive area.
    pub fn new(
        chambers: Vec<Chamber>,
        interfaces: Vec<Interface>,
        lambda: f64,
        r0: f64,
    ) -> Result<Self, GeometryError> {
        if !(lambda >= 0.0 && lambda.is_finite()) || !(r0 > 0.0) {
            return Err(GeometryError::AlmostMinimality { lambda, r0 });
        }
        if chambers.is_empty() {
            return Err(GeometryError::Empty);
        }
        let n = chambers.len();
        let mut labels: Vec<usize> = chambers.iter().map(|c| c.label).collect();
        labels.sort_unstable();
        if labels.iter().enumerate().any(|(i, &l)| l != i + 1) {
            return Err(GeometryError::ChamberLabels {
                expected: n,
                found: labels,
            });
        }
        for (index, iface) in interfaces.iter().enumerate() {
            for label in [iface.left, iface.right] {
                if label > n {
                    return Err(GeometryError::UnknownChamber { index, label });
                }
            }
            if iface.left == iface.right {
                return Err(GeometryError::SameChamberBothSides {
                    index,
                    label: iface.left,
                });
            }
        }

        let cluster = Self {
            chambers,
            interfaces,
            lambda,
            r0,
        };
        let tolerance = cluster.junction_tolerance();
        let junctions = group_endpoints(&cluster.interfaces, tolerance);
        for j in &junctions {
            if j.degree() < 2 {
                return Err(GeometryError::DanglingEndpoint {
                    x: j.location.x,
                    y: j.location.y,
                });
            }
            // Every chamber's directed boundary must pass through the
            // junction as often as it leaves it.
            let mut balance: HashMap<usize, i64> = HashMap::new();
            for &(index, is_end) in &j.incidences {
                let iface = &cluster.interfaces[index];
                let sign = if is_end { 1 } else { -1 };
                *balance.entry(iface.left).or_default() += sign;
                *balance.entry(iface.right).or_default() -= sign;
            }
            if let Some((&label, _)) = balance.iter().filter(|(_, &b)| b != 0).min() {
                return Err(GeometryError::OpenBoundary {
                    label,
                    x: j.location.x,
                    y: j.location.y,
                });
            }
        }
        cluster.check_crossings(&junctions, tolerance)?;
        for (i, area) in signed_chamber_areas(n, &cluster.interfaces).into_iter().enumerate() {
            if !(area > 0.0) {
                return Err(GeometryError::DegenerateChamber { label: i + 1, area });
            }
        }
        Ok(cluster)
    }

    /// Convenience constructor with chambers labelled `1..=chambers`,
    /// `lambda = 0` and `r0 = infinity`.
    pub fn from_interfaces(chambers: usize, interfaces: Vec<Interface>) -> Result<Self, GeometryError> {
        let chambers = (1..=chambers).map(|label| Chamber { label }).collect();
        Self::new(chambers, interfaces, 0.0, f64::INFINITY)
    }

    pub fn chambers(&self) -> &[Chamber] {
        &self.chambers
    }

    pub fn chamber_count(&self) -> usize {
        self.chambers.len()
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    /// Almost-minimality constant.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Almost-minimality scale (possibly infinite).
    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn with_almost_minimality(&self, lambda: f64, r0: f64) -> Result<Self, GeometryError> {
        if !(lambda >= 0.0 && lambda.is_finite()) || !(r0 > 0.0) {
            return Err(GeometryError::AlmostMinimality { lambda, r0 });
        }
        Ok(Self {
            lambda,
            r0,
            ..self.clone()
        })
    }

    /// Total interface length; each interface is counted once.
    pub fn perimeter(&self) -> f64 {
        self.interfaces.iter().map(|i| i.chain.length()).sum()
    }

    /// Interface length inside `ball`, with exact segment clipping.
    pub fn localized_perimeter(&self, ball: &Ball) -> f64 {
        self.interfaces.iter().map(|i| i.chain.length_in_ball(ball)).sum()
    }

    /// Area of chambers `1..=N`, in label order. All positive by construction.
    pub fn chamber_areas(&self) -> Vec<f64> {
        signed_chamber_areas(self.chambers.len(), &self.interfaces)
    }

    pub fn vertex_count(&self) -> usize {
        self.interfaces.iter().map(|i| i.chain.vertices().len()).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.interfaces.iter().flat_map(|i| i.chain.vertices().iter().copied())
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.points() {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn bounding_center(&self) -> Point2 {
        let (lo, hi) = self.bounding_box();
        (lo + hi) * 0.5
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.distance(hi)
    }

    /// Smallest radius at which localized perimeters are still meaningful in
    /// floating point.
    pub fn resolution_floor(&self) -> f64 {
        1e-9 * self.diameter()
    }

    pub fn junction_tolerance(&self) -> f64 {
        JUNCTION_TOLERANCE * self.diameter().max(f64::MIN_POSITIVE)
    }

    pub fn junctions(&self) -> Vec<Junction> {
        group_endpoints(&self.interfaces, self.junction_tolerance())
    }

    pub fn min_edge_length(&self) -> f64 {
        self.interfaces
            .iter()
            .flat_map(|i| i.chain.segments().map(|(a, b)| a.distance(b)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_edge_length(&self) -> f64 {
        let count: usize = self.interfaces.iter().map(|i| i.chain.segment_count()).sum();
        self.perimeter() / count as f64
    }

    /// Closest boundary point to `p` and its distance.
    pub fn nearest_boundary_point(&self, p: Point2) -> (Point2, f64) {
        let mut best = (p, f64::INFINITY);
        for iface in &self.interfaces {
            for (a, b) in iface.chain.segments() {
                let q = project_on_segment(p, a, b);
                let d = q.distance(p);
                if d < best.1 {
                    best = (q, d);
                }
            }
        }
        best
    }

    /// Applies `f` to every vertex and revalidates.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, GeometryError> {
        let interfaces = self
            .interfaces
            .iter()
            .map(|i| Interface::new(i.left, i.right, i.chain.map_points(&f)))
            .collect();
        Self::new(self.chambers.clone(), interfaces, self.lambda, self.r0)
    }

    /// Rejects any pair of segments that touch, except consecutive segments of
    /// one chain and segments meeting at a common junction.
    fn check_crossings(&self, junctions: &[Junction], tolerance: f64) -> Result<(), GeometryError> {
        struct Seg {
            iface: usize,
            index: usize,
            a: Point2,
            b: Point2,
        }
        let segs: Vec<Seg> = self
            .interfaces
            .iter()
            .enumerate()
            .flat_map(|(iface, i)| {
                i.chain
                    .segments()
                    .enumerate()
                    .map(move |(index, (a, b))| Seg { iface, index, a, b })
            })
            .collect();
        if segs.len() < 2 {
            return Ok(());
        }
        let near_junction = |p: Point2| junctions.iter().any(|j| j.location.distance(p) <= tolerance);

        let (lo, hi) = self.bounding_box();
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
        let cells_per_side = ((segs.len() as f64).sqrt().ceil() as usize).clamp(1, 2048);
        let cell = extent / cells_per_side as f64;
        let key = |v: f64, o: f64| (((v - o) / cell).floor() as i64).clamp(0, cells_per_side as i64);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, s) in segs.iter().enumerate() {
            let (x0, x1) = (key(s.a.x.min(s.b.x), lo.x), key(s.a.x.max(s.b.x), lo.x));
            let (y0, y1) = (key(s.a.y.min(s.b.y), lo.y), key(s.a.y.max(s.b.y), lo.y));
            for gx in x0..=x1 {
                for gy in y0..=y1 {
                    grid.entry((gx, gy)).or_default().push(k);
                }
            }
        }
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        for bucket in grid.values() {
            for (u, &p) in bucket.iter().enumerate() {
                for &q in &bucket[u + 1..] {
                    let pair = (p.min(q), p.max(q));
                    if !seen.insert(pair) {
                        continue;
                    }
                    let (s, t) = (&segs[pair.0], &segs[pair.1]);
                    let shared = shared_endpoint(s.a, s.b, t.a, t.b, tolerance);
                    let adjacent = s.iface == t.iface && {
                        let chain = &self.interfaces[s.iface].chain;
                        let m = chain.segment_count();
                        s.index.abs_diff(t.index) == 1 || (chain.is_closed() && s.index.abs_diff(t.index) == m - 1)
                    };
                    match shared {
                        Some((p, da, db)) if adjacent || near_junction(p) => {
                            // Only a collinear overlap is a problem here.
                            let cos = da.dot(db) / (da.norm() * db.norm());
                            if cos > 1.0 - 1e-12 {
                                return Err(GeometryError::SelfIntersection {
                                    first: s.iface,
                                    second: t.iface,
                                });
                            }
                        }
                        _ => {
                            if segments_touch(s.a, s.b, t.a, t.b) {
                                return Err(GeometryError::SelfIntersection {
                                    first: s.iface,
                                    second: t.iface,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// If the segments share an endpoint, returns it together with the direction
/// of each segment leaving it.
fn shared_endpoint(a0: Point2, a1: Point2, b0: Point2, b1: Point2, tolerance: f64) -> Option<(Point2, Point2, Point2)> {
    for (p, pa) in [(a0, a1), (a1, a0)] {
        for (q, qb) in [(b0, b1), (b1, b0)] {
            if p.distance(q) <= tolerance {
                return Some((p, pa - p, qb - q));
            }
        }
    }
    None
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub fn segments_touch(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(b0, b1, a0))
        || (d2 == 0.0 && on_segment(b0, b1, a1))
        || (d3 == 0.0 && on_segment(a0, a1, b0))
        || (d4 == 0.0 && on_segment(a0, a1, b1))
}

#[derive(Serialize, Deserialize)]
struct InterfaceDoc {
    /// `[left, right]`
    chambers: [usize; 2],
    vertices: Vec<Point2>,
    #[serde(default)]
    closed: bool,
}

/// On-disk form of a [`Cluster`]. `r0: null` encodes an infinite scale.
#[derive(Serialize, Deserialize)]
struct ClusterDoc {
    chambers: Vec<Chamber>,
    interfaces: Vec<InterfaceDoc>,
    #[serde(default)]
    lambda: f64,
    #[serde(default)]
    r0: Option<f64>,
}

impl TryFrom<ClusterDoc> for Cluster {
    type Error = GeometryError;

    fn try_from(doc: ClusterDoc) -> Result<Self, Self::Error> {
        let interfaces = doc
            .interfaces
            .into_iter()
            .enumerate()
            .map(|(index, i)| {
                Chain::new(i.vertices, i.closed)
                    .map(|chain| Interface::new(i.chambers[0], i.chambers[1], chain))
                    .map_err(|source| GeometryError::Interface {
                        index,
                        source: Box::new(source),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Cluster::new(doc.chambers, interfaces, doc.lambda, doc.r0.unwrap_or(f64::INFINITY))
    }
}

impl From<Cluster> for ClusterDoc {
    fn from(c: Cluster) -> Self {
        ClusterDoc {
            chambers: c.chambers,
            interfaces: c
                .interfaces
                .into_iter()
                .map(|i| InterfaceDoc {
                    chambers: [i.left, i.right],
                    closed: i.chain.closed,
                    vertices: i.chain.vertices,
                })
                .collect(),
            lambda: c.lambda,
            r0: c.r0.is_finite().then_some(c.r0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::PI;

    fn unit_square() -> Cluster {
        let chain = Chain::closed(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        Cluster::from_interfaces(1, vec![Interface::new(1, 0, chain)]).unwrap()
    }

    #[test]
    fn unit_disk_perimeter_and_area() {
        let disk = fixtures::disk(1.0, 10_000).unwrap();
        assert!((disk.perimeter() - 2.0 * PI).abs() / (2.0 * PI) < 1e-6);
        let area = disk.chamber_areas()[0];
        assert!((area - PI).abs() / PI < 1e-6);
    }

    #[test]
    fn unit_square_area_is_exact() {
        assert_eq!(unit_square().chamber_areas(), vec![1.0]);
        assert_eq!(unit_square().perimeter(), 4.0);
    }

    fn left_len(c: &Cluster) -> f64 {
        c.interfaces()[1].chain.length()
    }

    fn right_len(c: &Cluster) -> f64 {
        c.interfaces()[2].chain.length()
    }

    #[test]
    fn shared_segment_counted_once() {
        // Two unit squares sharing the segment x = 0, 0 <= y <= 1.
        let p = Point2::new;
        let mid = Chain::open(vec![p(0.0, 0.0), p(0.0, 1.0)]).unwrap();
        let left = Chain::open(vec![p(0.0, 1.0), p(-1.0, 1.0), p(-1.0, 0.0), p(0.0, 0.0)]).unwrap();
        let right = Chain::open(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]).unwrap();
        let arcs = left.length() + right.length();
        let cluster = Cluster::from_interfaces(
            2,
            vec![
                Interface::new(1, 2, mid),
                Interface::new(1, 0, left),
                Interface::new(2, 0, right),
            ],
        )
        .unwrap();
        assert_eq!(cluster.perimeter(), 1.0 + arcs);
        // Half the sum of chamber perimeters, exterior included.
        let chamber_sum = (1.0 + left_len(&cluster)) + (1.0 + right_len(&cluster)) + arcs;
        assert_eq!(0.5 * chamber_sum, cluster.perimeter());
        assert_eq!(cluster.chamber_areas(), vec![1.0, 1.0]);
    }

    #[test]
    fn clipping_examples() {
        let line = fixtures::split_disk(10.0, 64).unwrap();
        for r in [0.1, 1.0, 3.7, 9.0] {
            let ball = Ball::new(Point2::ORIGIN, r).unwrap();
            assert!((line.localized_perimeter(&ball) - 2.0 * r).abs() < 1e-12 * r.max(1.0));
        }
        let y = fixtures::y_junction_disk(10.0, 64).unwrap();
        for r in [0.1, 1.0, 3.7, 9.0] {
            let ball = Ball::new(Point2::ORIGIN, r).unwrap();
            assert!((y.localized_perimeter(&ball) - 3.0 * r).abs() < 1e-12 * r.max(1.0));
        }
        let far = Ball::new(Point2::new(100.0, 100.0), 5.0).unwrap();
        assert_eq!(y.localized_perimeter(&far), 0.0);
    }

    #[test]
    fn enclosing_ball_sees_everything() {
        let c = fixtures::double_bubble(1.0, 40).unwrap();
        let ball = Ball::new(c.bounding_center(), c.diameter()).unwrap();
        assert!((c.localized_perimeter(&ball) - c.perimeter()).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_and_degenerate_chains() {
        assert!(matches!(
            Chain::open(vec![Point2::ORIGIN]),
            Err(GeometryError::TooFewVertices { .. })
        ));
        assert!(matches!(
            Chain::open(vec![Point2::ORIGIN, Point2::ORIGIN]),
            Err(GeometryError::ZeroLengthEdge { vertex: 0 })
        ));
        assert!(matches!(
            Chain::closed(vec![Point2::ORIGIN, Point2::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices { .. })
        ));
    }

    #[test]
    fn rejects_bowtie() {
        let p = Point2::new;
        let chain = Chain::closed(vec![p(0.0, 0.0), p(1.0, 1.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        let err = Cluster::from_interfaces(1, vec![Interface::new(1, 0, chain)]).unwrap_err();
        assert!(matches!(err, GeometryError::SelfIntersection { .. }));
    }

    #[test]
    fn rejects_clockwise_chamber() {
        let p = Point2::new;
        let chain = Chain::closed(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(1.0, 0.0)]).unwrap();
        let err = Cluster::from_interfaces(1, vec![Interface::new(1, 0, chain)]).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateChamber { label: 1, .. }));
    }

    #[test]
    fn rejects_dangling_and_open_boundaries() {
        let p = Point2::new;
        let square = Chain::closed(vec![p(0.0, 0.0), p(2.0, 0.0), p(2.0, 2.0), p(0.0, 2.0)]).unwrap();
        let whisker = Chain::open(vec![p(5.0, 5.0), p(6.0, 5.0)]).unwrap();
        let err =
            Cluster::from_interfaces(1, vec![Interface::new(1, 0, square), Interface::new(1, 0, whisker)]).unwrap_err();
        assert!(matches!(err, GeometryError::DanglingEndpoint { .. }));

        // Three chains meet at both ends, but the middle one is mislabelled.
        let mid = Chain::open(vec![p(0.0, 0.0), p(0.0, 1.0)]).unwrap();
        let left = Chain::open(vec![p(0.0, 1.0), p(-1.0, 1.0), p(-1.0, 0.0), p(0.0, 0.0)]).unwrap();
        let right = Chain::open(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]).unwrap();
        let err = Cluster::from_interfaces(
            2,
            vec![
                Interface::new(2, 1, mid),
                Interface::new(1, 0, left),
                Interface::new(2, 0, right),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::OpenBoundary { .. }));
    }

    #[test]
    fn rejects_bad_labels() {
        let p = Point2::new;
        let chain = Chain::closed(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        let err = Cluster::from_interfaces(1, vec![Interface::new(2, 0, chain.clone())]).unwrap_err();
        assert!(matches!(err, GeometryError::UnknownChamber { label: 2, .. }));
        let err = Cluster::from_interfaces(1, vec![Interface::new(1, 1, chain.clone())]).unwrap_err();
        assert!(matches!(err, GeometryError::SameChamberBothSides { .. }));
        let err = Cluster::new(
            vec![Chamber { label: 2 }],
            vec![Interface::new(1, 0, chain)],
            0.0,
            f64::INFINITY,
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::ChamberLabels { .. }));
    }

    #[test]
    fn json_round_trip_keeps_infinite_scale() {
        let c = fixtures::double_bubble(1.0, 12).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"r0\":null"));
        assert!(text.contains("\"interfaces\""));
        let back: Cluster = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn json_validation_runs_on_load() {
        let text = r#"{"chambers":[{"label":1}],"interfaces":[{"chambers":[1,0],"vertices":[[0,0],[0,1],[1,1],[1,0]],"closed":true}],"lambda":0,"r0":null}"#;
        let err = serde_json::from_str::<Cluster>(text).unwrap_err();
        assert!(err.to_string().contains("non-positive area"));
    }

    #[test]
    fn ball_rejects_bad_radius() {
        assert!(Ball::new(Point2::ORIGIN, 0.0).is_err());
        assert!(Ball::new(Point2::ORIGIN, f64::NAN).is_err());
    }
}
