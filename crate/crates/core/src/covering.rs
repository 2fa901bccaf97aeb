//! Occupied annuli, the covering bound `(10/λ²)^{nN}` and the machinery
//! around it, in any dimension.
//!
//! Annuli are half-open: annulus `j` around `x` is
//! `{y : λ^{j+1} ≤ |y - x| < λ^j}`, and distances `≥ 1` fall in annulus 0.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest scale ratio accepted. The sharpness family lives at `1/4`.
pub const MAX_SCALE_RATIO: f64 = 0.25;
pub const MAX_SHARPNESS_BUDGET: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("scale ratio {0} outside (0, 1/4]")]
    ScaleRatio(f64),
    #[error("dimension must be positive")]
    Dimension,
    #[error("point {index} has {found} coordinates, expected {expected}")]
    Arity {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("point {index} has norm {norm} > 1/2")]
    OutsideBall { index: usize, norm: f64 },
    #[error("point {index} is not finite")]
    NonFinite { index: usize },
    #[error("points {first} and {second} coincide")]
    Duplicate { first: usize, second: usize },
    #[error("index {index} out of range for {len} points")]
    Index { index: usize, len: usize },
    #[error("mu {0} outside (0, 1]")]
    Mu(f64),
    #[error("sharpness budget {0} outside 1..=20")]
    SharpnessBudget(usize),
    #[error("{size} points do not exceed the bound {bound}; nothing to replay")]
    NotApplicable { size: usize, bound: Bound },
    #[error("csv: {0}")]
    Csv(String),
}

/// A finite subset of the closed ball `B_{1/2}` in `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSet {
    dimension: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(dimension: usize, points: Vec<Vec<f64>>) -> Result<Self, CoveringError> {
        if dimension == 0 {
            return Err(CoveringError::Dimension);
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (index, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return Err(CoveringError::Arity {
                    index,
                    found: p.len(),
                    expected: dimension,
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(CoveringError::NonFinite { index });
            }
            let norm = norm(p);
            if norm > 0.5 {
                return Err(CoveringError::OutsideBall { index, norm });
            }
            // +0.0 and -0.0 are the same point.
            let key = p.iter().map(|c| (c + 0.0).to_bits()).collect();
            if let Some(first) = seen.insert(key, index) {
                return Err(CoveringError::Duplicate { first, second: index });
            }
        }
        Ok(Self { dimension, points })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest pairwise distance, 0 for fewer than two points.
    pub fn diameter(&self) -> f64 {
        let idx: Vec<usize> = (0..self.len()).collect();
        diameter_of(&self.points, &idx)
    }

    /// Reads one point per row. A first row that does not parse as numbers
    /// is taken as a header.
    pub fn from_csv(text: &str) -> Result<Self, CoveringError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CoveringError::Csv(e.to_string()))?;
            let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(p) => points.push(p),
                Err(_) if row == 0 => continue,
                Err(e) => return Err(CoveringError::Csv(format!("row {}: {e}", row + 1))),
            }
        }
        let dimension = points.first().map_or(1, Vec::len);
        Self::new(dimension, points)
    }

    /// Header `x0,x1,...` then one point per row.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = (0..self.dimension).map(|k| format!("x{k}")).collect();
        writer.write_record(&header).expect("in-memory write");
        for p in &self.points {
            writer
                .write_record(p.iter().map(|c| c.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn diameter_of(points: &[Vec<f64>], idx: &[usize]) -> f64 {
    if idx.len() < 2 {
        return 0.0;
    }
    if points[idx[0]].len() == 1 {
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(points[i][0]), hi.max(points[i][0]))
        });
        return hi - lo;
    }
    let mut d = 0.0_f64;
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            d = d.max(distance(&points[i], &points[j]));
        }
    }
    d
}

pub fn check_scale_ratio(scale_ratio: f64) -> Result<(), CoveringError> {
    if scale_ratio > 0.0 && scale_ratio <= MAX_SCALE_RATIO {
        Ok(())
    } else {
        Err(CoveringError::ScaleRatio(scale_ratio))
    }
}

/// The `j` with `λ^{j+1} ≤ d < λ^j`, or 0 when `d ≥ 1`. `d` must be
/// positive.
pub fn annulus_index(d: f64, scale_ratio: f64) -> u32 {
    if d >= 1.0 {
        return 0;
    }
    let mut j = (d.ln() / scale_ratio.ln()).floor().max(0.0) as i32;
    // The logarithm can be off by one near the boundaries; settle it with
    // the same powers used by the definition.
    while j > 0 && scale_ratio.powi(j) <= d {
        j -= 1;
    }
    while scale_ratio.powi(j + 1) > d {
        j += 1;
    }
    j as u32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusOccupancy {
    pub base_index: usize,
    pub scale_ratio: f64,
    pub occupied: BTreeSet<u32>,
}

impl AnnulusOccupancy {
    pub fn size(&self) -> usize {
        self.occupied.len()
    }
}

pub fn occupied_annuli(set: &PointSet, index: usize, scale_ratio: f64) -> Result<AnnulusOccupancy, CoveringError> {
    check_scale_ratio(scale_ratio)?;
    let x = set
        .points
        .get(index)
        .ok_or(CoveringError::Index { index, len: set.len() })?;
    let occupied = set
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, y)| annulus_index(distance(x, y), scale_ratio))
        .collect();
    Ok(AnnulusOccupancy {
        base_index: index,
        scale_ratio,
        occupied,
    })
}

/// A count that may exceed every machine integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Finite(u128),
    Unbounded,
}

impl Bound {
    pub fn admits(&self, count: u128) -> bool {
        match self {
            Bound::Finite(b) => count <= *b,
            Bound::Unbounded => true,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(b) => write!(f, "{b}"),
            Bound::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(b) => s.serialize_u128(*b),
            Bound::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct BoundVisitor;
        impl serde::de::Visitor<'_> for BoundVisitor {
            type Value = Bound;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"unbounded\"")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Bound, E> {
                Ok(Bound::Finite(v.into()))
            }

            fn visit_u128<E: serde::de::Error>(self, v: u128) -> Result<Bound, E> {
                Ok(Bound::Finite(v))
            }

            // Integers above u64 arrive as doubles from self-describing
            // formats; they are kept when integral.
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Bound, E> {
                if v >= 0.0 && v.fract() == 0.0 && v < u128::MAX as f64 {
                    Ok(Bound::Finite(v as u128))
                } else {
                    Err(E::custom(format!("bad bound {v}")))
                }
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Bound, E> {
                match v {
                    "unbounded" => Ok(Bound::Unbounded),
                    _ => Err(E::custom(format!("bad bound {v:?}"))),
                }
            }
        }
        d.deserialize_any(BoundVisitor)
    }
}

/// `floor((10/λ²)^{nN})`, saturating to [`Bound::Unbounded`].
pub fn covering_bound(dimension: usize, scale_ratio: f64, budget: usize) -> Result<Bound, CoveringError> {
    check_scale_ratio(scale_ratio)?;
    if dimension == 0 {
        return Err(CoveringError::Dimension);
    }
    let exponent = dimension.checked_mul(budget);
    let Some(exponent) = exponent.and_then(|e| u32::try_from(e).ok()) else {
        return Ok(Bound::Unbounded);
    };
    let base = 10.0 / (scale_ratio * scale_ratio);
    let rounded = base.round();
    if (base - rounded).abs() <= 1e-9 * base {
        return Ok(match (rounded as u128).checked_pow(exponent) {
            Some(b) => Bound::Finite(b),
            None => Bound::Unbounded,
        });
    }
    let value = base.powi(exponent as i32);
    Ok(if value.is_finite() && value < u128::MAX as f64 {
        Bound::Finite(value.floor() as u128)
    } else {
        Bound::Unbounded
    })
}

/// Outcome of checking a point set against a budget `N`.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Every point occupies at most `N` annuli, and the set is no larger
    /// than the covering bound.
    WithinBudget { size: usize, bound: Bound },
    /// The first point occupying more than `N` annuli.
    Witness {
        index: usize,
        occupancy: usize,
        bound: Bound,
    },
    /// Every occupancy is within budget but the set is larger than the
    /// bound. Never produced by a correct bound.
    Counterexample { size: usize, bound: Bound },
}

impl Verdict {
    pub fn bound(&self) -> Bound {
        match self {
            Verdict::WithinBudget { bound, .. }
            | Verdict::Witness { bound, .. }
            | Verdict::Counterexample { bound, .. } => *bound,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VerdictDoc {
    verdict: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    witness_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    occupancy: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    size: Option<usize>,
    bound: Bound,
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let doc = match *self {
            Verdict::WithinBudget { size, bound } => VerdictDoc {
                verdict: "within_budget".into(),
                witness_index: None,
                occupancy: None,
                size: Some(size),
                bound,
            },
            Verdict::Witness {
                index,
                occupancy,
                bound,
            } => VerdictDoc {
                verdict: "witness".into(),
                witness_index: Some(index),
                occupancy: Some(occupancy),
                size: None,
                bound,
            },
            Verdict::Counterexample { size, bound } => VerdictDoc {
                verdict: "counterexample".into(),
                witness_index: None,
                occupancy: None,
                size: Some(size),
                bound,
            },
        };
        doc.serialize(s)
    }
}

/// Decision on precomputed occupancy sizes.
pub fn decide(occupancies: &[usize], budget: usize, bound: Bound) -> Verdict {
    if let Some((index, &occupancy)) = occupancies.iter().enumerate().find(|(_, &o)| o > budget) {
        return Verdict::Witness {
            index,
            occupancy,
            bound,
        };
    }
    let size = occupancies.len();
    if bound.admits(size as u128) {
        Verdict::WithinBudget { size, bound }
    } else {
        Verdict::Counterexample { size, bound }
    }
}

pub fn occupancy_sizes(set: &PointSet, scale_ratio: f64) -> Result<Vec<usize>, CoveringError> {
    (0..set.len())
        .map(|i| occupied_annuli(set, i, scale_ratio).map(|o| o.size()))
        .collect()
}

/// Exhaustive occupancy check of every point against `budget`.
pub fn verify_covering_lemma(set: &PointSet, scale_ratio: f64, budget: usize) -> Result<Verdict, CoveringError> {
    let bound = covering_bound(set.dimension(), scale_ratio, budget)?;
    Ok(decide(&occupancy_sizes(set, scale_ratio)?, budget, bound))
}

/// One level of the inductive argument.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayStep {
    /// Remaining budget `N` at this level.
    pub budget: usize,
    /// Annuli below this index are not counted at this level.
    pub offset: u32,
    pub size: usize,
    pub diameter: f64,
    /// Annulus index `k` of the diameter (at least `offset`).
    pub scale: u32,
    /// Balls of radius `λ^{k+2}/2` used to split the level.
    pub cover_size: usize,
    pub cover_limit: Bound,
    /// Points in the most populated ball, carried to the next level.
    pub kept: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofReplay {
    pub witness_index: usize,
    /// Full occupancy of the witness in the original set.
    pub occupancy: usize,
    pub steps: Vec<ReplayStep>,
}

/// Runs the inductive proof of the covering bound on a set larger than
/// `(10/λ²)^{nN}`: split at the diameter scale, cover by small balls, keep
/// the fullest one and recurse with `N - 1`. The returned point is checked
/// to occupy more than `N` annuli.
pub fn replay_proof(set: &PointSet, scale_ratio: f64, budget: usize) -> Result<ProofReplay, CoveringError> {
    let bound = covering_bound(set.dimension(), scale_ratio, budget)?;
    if bound.admits(set.len() as u128) {
        return Err(CoveringError::NotApplicable { size: set.len(), bound });
    }
    let per_level = covering_bound(set.dimension(), scale_ratio, 1)?;
    let mut current: Vec<usize> = (0..set.len()).collect();
    let mut offset = 0u32;
    let mut steps = Vec::new();
    for level in (0..=budget).rev() {
        let diameter = diameter_of(&set.points, &current);
        let scale = annulus_index(diameter, scale_ratio).max(offset);
        let mut step = ReplayStep {
            budget: level,
            offset,
            size: current.len(),
            diameter,
            scale,
            cover_size: 1,
            cover_limit: Bound::Finite(1),
            kept: current.len(),
        };
        if level > 0 {
            let groups = packing_groups(&set.points, &current, scale_ratio.powi(scale as i32 + 2) / 2.0);
            step.cover_size = groups.len();
            step.cover_limit = per_level;
            current = groups.into_iter().max_by_key(Vec::len).unwrap_or_default();
            step.kept = current.len();
            offset = scale + 2;
        }
        steps.push(step);
    }
    let witness_index = current[0];
    let occupancy = occupied_annuli(set, witness_index, scale_ratio)?.size();
    Ok(ProofReplay {
        witness_index,
        occupancy,
        steps,
    })
}

/// Greedy maximal packing of the given points at separation `radius`: each
/// point joins the first center closer than `radius`, otherwise becomes a
/// center. Groups have diameter `< 2 radius`. With `radius = λ^{k+2}/2` and
/// all points within `λ^k` of each other, the disjoint balls of radius
/// `radius/2` around centers limit their number to `(4/λ² + 1)^n`, inside
/// the `(10/λ²)^n` allowed by the Vitali count.
fn packing_groups(points: &[Vec<f64>], members: &[usize], radius: f64) -> Vec<Vec<usize>> {
    let Some(&first) = members.first() else {
        return Vec::new();
    };
    let mut centers: Vec<usize> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut grid = CellGrid::new(points[first].len(), radius);
    for &i in members {
        let p = &points[i];
        match grid.find_near(p, |g| distance(&points[centers[g]], p) < radius) {
            Some(g) => groups[g].push(i),
            None => {
                grid.insert(p, centers.len());
                centers.push(i);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Uniform bucket grid for fixed-radius neighbor queries: a query point
/// sees every item stored within one cell width.
struct CellGrid {
    cell: f64,
    offsets: Vec<Vec<i64>>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl CellGrid {
    fn new(dimension: usize, cell: f64) -> Self {
        let mut offsets = vec![vec![]];
        for _ in 0..dimension {
            offsets = offsets
                .into_iter()
                .flat_map(|v: Vec<i64>| {
                    (-1..=1).map(move |d| {
                        let mut w = v.clone();
                        w.push(d);
                        w
                    })
                })
                .collect();
        }
        Self {
            cell,
            offsets,
            cells: HashMap::new(),
        }
    }

    fn home(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|c| (c / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, p: &[f64], id: usize) {
        let key = self.home(p);
        self.cells.entry(key).or_default().push(id);
    }

    /// First stored id near `p` accepted by `pred`.
    fn find_near(&self, p: &[f64], mut pred: impl FnMut(usize) -> bool) -> Option<usize> {
        let home = self.home(p);
        let mut key = home.clone();
        for off in &self.offsets {
            for (k, (h, o)) in key.iter_mut().zip(home.iter().zip(off)) {
                *k = h + o;
            }
            if let Some(list) = self.cells.get(key.as_slice()) {
                if let Some(&id) = list.iter().find(|&&id| pred(id)) {
                    return Some(id);
                }
            }
        }
        None
    }
}

/// Centers of a cover of `B_1 ⊆ R^n` by balls of radius `mu`: a maximal
/// family of centers in `B_{1-μ/5}` at mutual distance at least `2μ/5`.
///
/// Candidates are a lattice of spacing `2μ/5` followed by a finer lattice of
/// spacing `μ/(5√n)`, scanned in order. Any point of `B_1` is within `μ/5`
/// of `B_{1-μ/5}`, within `μ/5` of a fine candidate inside it and within
/// `2μ/5` of a center, so the cover radius is `4μ/5`.
pub fn vitali_cover(dimension: usize, mu: f64) -> Result<Vec<Vec<f64>>, CoveringError> {
    if dimension == 0 {
        return Err(CoveringError::Dimension);
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(CoveringError::Mu(mu));
    }
    let inner = 1.0 - mu / 5.0;
    let separation = 2.0 * mu / 5.0;
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut grid = CellGrid::new(dimension, separation);
    let mut try_add = |p: Vec<f64>, centers: &mut Vec<Vec<f64>>| {
        if grid.find_near(&p, |k| distance(&centers[k], &p) < separation).is_none() {
            grid.insert(&p, centers.len());
            centers.push(p);
        }
    };
    // Coarse lattice, nudged so rounding never brings two centers closer
    // than the separation.
    let coarse = separation * (1.0 + 1e-12);
    for p in lattice_in_ball(dimension, coarse, inner) {
        try_add(p, &mut centers);
    }
    let fine = mu / (5.0 * (dimension as f64).sqrt());
    for p in lattice_in_ball(dimension, fine, inner) {
        try_add(p, &mut centers);
    }
    Ok(centers)
}

/// Points `spacing * k` (k integer vector) with norm at most `radius`, in
/// lexicographic order.
fn lattice_in_ball(dimension: usize, spacing: f64, radius: f64) -> Vec<Vec<f64>> {
    let m = (radius / spacing).floor() as i64;
    let mut out = Vec::new();
    let mut k = vec![-m; dimension];
    loop {
        let p: Vec<f64> = k.iter().map(|&c| c as f64 * spacing).collect();
        if norm(&p) <= radius {
            out.push(p);
        }
        let mut axis = dimension;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if k[axis] < m {
                k[axis] += 1;
                break;
            }
            k[axis] = -m;
        }
    }
}

/// Sign sequences `e ∈ {0,1}^N` mapped to `Σ (-1)^{e_i} 2^{-12i}`, kept as
/// exact numerators over `2^{12N}`. Bit `i-1` of a point's index is `e_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessSet {
    pub budget: usize,
    pub numerators: Vec<BigInt>,
}

impl SharpnessSet {
    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    /// Binary exponent of the common denominator.
    pub fn denominator_exponent(&self) -> usize {
        12 * self.budget
    }

    /// Nearest doubles. Distinct only for small budgets: the terms shrink by
    /// `2^{-12}` per step and a double carries 53 bits.
    pub fn to_floats(&self) -> Vec<f64> {
        let shift = self.denominator_exponent() as i32;
        self.numerators
            .iter()
            .map(|n| {
                let bits = n.bits() as i32;
                let keep = (bits - 60).max(0);
                let top: i64 = i64::try_from(n >> keep as usize).expect("fits after shift");
                top as f64 * 2f64.powi(keep - shift)
            })
            .collect()
    }

    pub fn to_point_set(&self) -> Result<PointSet, CoveringError> {
        PointSet::new(1, self.to_floats().into_iter().map(|x| vec![x]).collect())
    }
}

pub fn sharpness_points(budget: usize) -> Result<SharpnessSet, CoveringError> {
    if !(1..=MAX_SHARPNESS_BUDGET).contains(&budget) {
        return Err(CoveringError::SharpnessBudget(budget));
    }
    let terms: Vec<BigInt> = (1..=budget).map(|i| BigInt::from(1) << (12 * (budget - i))).collect();
    let numerators = (0..1usize << budget)
        .map(|e| {
            terms.iter().enumerate().fold(
                BigInt::from(0),
                |acc, (i, t)| {
                    if e >> i & 1 == 1 {
                        acc - t
                    } else {
                        acc + t
                    }
                },
            )
        })
        .collect();
    Ok(SharpnessSet { budget, numerators })
}

/// Exact annulus index at `λ = 1/4` of the distance `d / 2^{shift}`, with
/// `d > 0`: `4^{-(j+1)} ≤ d 2^{-shift} < 4^{-j}`.
fn quarter_annulus_index(d: &BigInt, shift: usize) -> u32 {
    let e = d.bits() as i64 - 1; // floor(log2 d)
    let j = (shift as i64 - 1 - e).div_euclid(2);
    j.max(0) as u32
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharpnessCheck {
    pub budget: usize,
    pub size: usize,
    pub distinct: bool,
    /// Pairs whose distance falls outside `[2^{-12j}, 2^{-12j+2}]`, `j` the
    /// first differing sign.
    pub interval_violations: usize,
    pub max_occupancy: usize,
    pub verdict: Verdict,
}

/// Exact check of the sharpness family: distinctness, the distance
/// intervals and the occupancy at `λ = 1/4`.
pub fn check_sharpness(set: &SharpnessSet) -> SharpnessCheck {
    let n = set.budget;
    let shift = set.denominator_exponent();
    let size = set.len();
    let distinct = set.numerators.iter().collect::<HashSet<_>>().len() == size;
    let mut violations = 0;
    let mut occupied: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); size];
    for a in 0..size {
        for b in a + 1..size {
            let d = (&set.numerators[a] - &set.numerators[b]).magnitude().clone();
            let d = BigInt::from(d);
            // First differing sign, counted from 1.
            let j = ((a ^ b).trailing_zeros() + 1) as usize;
            let low = 12 * (n - j);
            let lower_ok = d.bits() as usize > low;
            let upper = BigInt::from(1) << (low + 2);
            if !(lower_ok && d <= upper) {
                violations += 1;
            }
            if d.bits() == 0 {
                continue;
            }
            let k = quarter_annulus_index(&d, shift);
            occupied[a].insert(k);
            occupied[b].insert(k);
        }
    }
    let sizes: Vec<usize> = occupied.iter().map(BTreeSet::len).collect();
    let bound = covering_bound(1, 0.25, n).expect("valid ratio");
    SharpnessCheck {
        budget: n,
        size,
        distinct,
        interval_violations: violations,
        max_occupancy: sizes.iter().copied().max().unwrap_or(0),
        verdict: decide(&sizes, n, bound),
    }
}

/// Random subsets of `B_{1/2}` with nested structure: points are placed in
/// clumps around clumps at geometrically shrinking radii, so that small
/// occupancies are common.
pub fn random_clustered_set(dimension: usize, size: usize, scale_ratio: f64, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(size);
    let mut seen = HashSet::new();
    let depth_limit = rng.random_range(1..=6);
    while points.len() < size {
        let mut p = vec![0.0; dimension];
        let mut radius = 0.5;
        let depth = rng.random_range(0..=depth_limit);
        for _ in 0..=depth {
            let dir = random_direction(dimension, &mut rng);
            let r = radius * rng.random::<f64>() * 0.9;
            for (c, u) in p.iter_mut().zip(&dir) {
                *c += r * u;
            }
            radius *= scale_ratio * rng.random_range(0.2..1.0);
        }
        let n = norm(&p);
        if n > 0.5 {
            p.iter_mut().for_each(|c| *c *= 0.5 / n);
        }
        let key: Vec<u64> = p.iter().map(|c| (c + 0.0).to_bits()).collect();
        if seen.insert(key) {
            points.push(p);
        }
    }
    PointSet::new(dimension, points).expect("generated points are valid")
}

fn random_direction(dimension: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dimension).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestReport {
    pub soundness_sets: usize,
    pub soundness_violations: usize,
    pub replay_runs: usize,
    pub replay_failures: usize,
    pub sharpness_failures: Vec<usize>,
    pub vitali_failures: Vec<String>,
    pub partition_failures: usize,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.soundness_violations == 0
            && self.replay_failures == 0
            && self.sharpness_failures.is_empty()
            && self.vitali_failures.is_empty()
            && self.partition_failures == 0
    }
}

/// Checks a Vitali cover: count, disjointness of the `μ/5` balls, centers
/// in `B_{1-μ/5}`, and cover of `samples` random points of `B_1`.
pub fn check_vitali(dimension: usize, mu: f64, samples: usize, seed: u64) -> Result<Vec<String>, CoveringError> {
    let centers = vitali_cover(dimension, mu)?;
    let mut problems = Vec::new();
    let limit = (5.0 / mu).powi(dimension as i32);
    if centers.len() as f64 > limit * (1.0 + 1e-12) {
        problems.push(format!("{} centers exceed {limit}", centers.len()));
    }
    if centers.iter().any(|c| norm(c) > 1.0 - mu / 5.0) {
        problems.push("center outside B_{1-mu/5}".into());
    }
    let mut grid = CellGrid::new(dimension, mu);
    for (i, c) in centers.iter().enumerate() {
        grid.insert(c, i);
    }
    let overlapping = centers
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            grid.find_near(c, |j| j != *i && distance(&centers[j], c) < 2.0 * mu / 5.0)
                .is_some()
        })
        .count();
    if overlapping > 0 {
        problems.push(format!("{overlapping} centers with overlapping mu/5 balls"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uncovered = (0..samples)
        .filter(|_| {
            let dir = random_direction(dimension, &mut rng);
            let r = rng.random::<f64>().powf(1.0 / dimension as f64);
            let p: Vec<f64> = dir.iter().map(|u| u * r).collect();
            grid.find_near(&p, |j| distance(&centers[j], &p) < mu).is_none()
        })
        .count();
    if uncovered > 0 {
        problems.push(format!("{uncovered} of {samples} sample points uncovered"));
    }
    Ok(problems)
}

/// The covering property suite: bound soundness on random clustered sets,
/// proof replays, exact sharpness for `N ≤ 12`, Vitali covers and the
/// annulus partition.
pub fn selftest(seed: u64) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut soundness_violations = 0;
    let mut soundness_sets = 0;
    for _ in 0..1000 {
        let dimension = rng.random_range(1..=3);
        let ratio: f64 = if rng.random::<bool>() { 1.0 / 6.0 } else { 1.0 / 8.0 };
        let size = rng.random_range(1..=200);
        let set = random_clustered_set(dimension, size, ratio, rng.random());
        let sizes = occupancy_sizes(&set, ratio).expect("valid ratio");
        let budget = sizes.iter().copied().max().unwrap_or(0);
        let bound = covering_bound(dimension, ratio, budget).expect("valid ratio");
        if !matches!(decide(&sizes, budget, bound), Verdict::WithinBudget { .. }) {
            soundness_violations += 1;
        }
        soundness_sets += 1;
    }

    let mut replay_runs = 0;
    let mut replay_failures = 0;
    for k in 0..50 {
        let (dimension, ratio, budget, size) = match k % 3 {
            0 => (rng.random_range(1..=3), 1.0 / 8.0, 0, rng.random_range(2..=200)),
            1 => (1, 0.25, 1, rng.random_range(161..=400)),
            _ => (2, 0.25, 0, rng.random_range(2..=50)),
        };
        let set = random_clustered_set(dimension, size, ratio, rng.random());
        replay_runs += 1;
        match replay_proof(&set, ratio, budget) {
            Ok(r) if r.occupancy > budget => {}
            _ => replay_failures += 1,
        }
    }

    let sharpness_failures = (1..=12)
        .filter(|&n| {
            let set = sharpness_points(n).expect("budget in range");
            let check = check_sharpness(&set);
            !(check.size == 1 << n
                && check.distinct
                && check.interval_violations == 0
                && check.max_occupancy <= n
                && matches!(check.verdict, Verdict::WithinBudget { .. }))
        })
        .collect();

    let mut vitali_failures = Vec::new();
    for dimension in 1..=3 {
        for mu in [0.5, 0.2, 0.1] {
            match check_vitali(dimension, mu, 20_000, rng.random()) {
                Ok(p) if p.is_empty() => {}
                Ok(p) => vitali_failures.push(format!("n={dimension} mu={mu}: {}", p.join("; "))),
                Err(e) => vitali_failures.push(format!("n={dimension} mu={mu}: {e}")),
            }
        }
    }

    let mut partition_failures = 0;
    for _ in 0..10_000 {
        let ratio: f64 = [1.0 / 6.0, 1.0 / 8.0, 0.25][rng.random_range(0..3)];
        let d: f64 = 10f64.powf(-rng.random_range(0.0..12.0));
        let hits = (0..200)
            .filter(|&j| ratio.powi(j + 1) <= d && d < ratio.powi(j))
            .count();
        let j = annulus_index(d, ratio) as i32;
        if hits != 1 || !(ratio.powi(j + 1) <= d && d < ratio.powi(j)) {
            partition_failures += 1;
        }
    }

    SelftestReport {
        soundness_sets,
        soundness_violations,
        replay_runs,
        replay_failures,
        sharpness_failures,
        vitali_failures,
        partition_failures,
    }
}
