//! The monotonicity quantity `M_Λ(x, r) = e^{Λr} P(B_r(x)) / r` on planar
//! clusters: sampled profiles, density extrapolation, drop detection and
//! annulus budgets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ball, Cluster, Point2};

/// Length of the unit 1-ball, the normalizing constant for planar densities.
pub const OMEGA_1: f64 = 2.0;

/// Base points this close to the boundary are projected onto it.
pub const SNAP_TOLERANCE: f64 = 1e-6;

/// Allowed decrease between consecutive profile values before a profile is
/// considered non-monotone.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-3;

pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_SCALE_RATIO: f64 = 0.125;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonotonicityError {
    #[error("point ({x}, {y}) is {distance} away from the boundary")]
    OffBoundary { x: f64, y: f64, distance: f64 },
    #[error("radii must be positive, finite and strictly increasing")]
    Radii,
    #[error("radius {radius} exceeds the almost-minimality scale {r0}")]
    AboveScale { radius: f64, r0: f64 },
    #[error("radius {radius} is below the resolution floor {floor}")]
    Resolution { radius: f64, floor: f64 },
    #[error("density needs at least 3 radii, got {0}")]
    TooFewRadii(usize),
    #[error("radii span a factor {0}, need at least 10")]
    NoDecade(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Sampled values of `M_Λ` at one base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityProfile {
    pub base_point: Point2,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub lambda: f64,
}

impl MonotonicityProfile {
    /// Largest decrease between consecutive samples, zero for a
    /// nondecreasing profile.
    pub fn max_decrease(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, tolerance: f64) -> bool {
        self.max_decrease() <= tolerance
    }

    /// `r,M` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,M\n");
        for (r, m) in self.radii.iter().zip(&self.values) {
            out.push_str(&format!("{r},{m}\n"));
        }
        out
    }
}

/// `count` radii per decade, geometrically spaced from `r_min` to `r_max`
/// inclusive.
pub fn log_radii(r_min: f64, r_max: f64, per_decade: usize) -> Vec<f64> {
    if !(r_min > 0.0 && r_max > r_min) || per_decade == 0 {
        return vec![r_min];
    }
    let decades = (r_max / r_min).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=steps)
        .map(|k| {
            if k == steps {
                r_max
            } else {
                r_min * 10f64.powf(decades * k as f64 / steps as f64)
            }
        })
        .collect()
}

/// Projects `x` onto the boundary if it lies within [`SNAP_TOLERANCE`].
pub fn snap(cluster: &Cluster, x: Point2) -> Result<Point2, MonotonicityError> {
    let (q, d) = cluster.nearest_boundary_point(x);
    if d > SNAP_TOLERANCE {
        return Err(MonotonicityError::OffBoundary {
            x: x.x,
            y: x.y,
            distance: d,
        });
    }
    Ok(if d == 0.0 { x } else { q })
}

/// `e^{Λr} P(B_r(x)) / r` with the cluster's own Λ. No snapping.
pub fn monotonicity_value(cluster: &Cluster, x: Point2, r: f64) -> f64 {
    let ball = Ball { center: x, radius: r };
    (cluster.lambda() * r).exp() * cluster.localized_perimeter(&ball) / r
}

fn check_radii(cluster: &Cluster, radii: &[f64]) -> Result<(), MonotonicityError> {
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(MonotonicityError::Radii);
    }
    let last = *radii.last().unwrap();
    if last > cluster.r0() {
        return Err(MonotonicityError::AboveScale {
            radius: last,
            r0: cluster.r0(),
        });
    }
    Ok(())
}

pub fn profile(cluster: &Cluster, x: Point2, radii: &[f64]) -> Result<MonotonicityProfile, MonotonicityError> {
    let x = snap(cluster, x)?;
    check_radii(cluster, radii)?;
    Ok(MonotonicityProfile {
        base_point: x,
        radii: radii.to_vec(),
        values: radii.iter().map(|&r| monotonicity_value(cluster, x, r)).collect(),
        lambda: cluster.lambda(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub theta: f64,
    pub error_estimate: f64,
    /// False when the profile decreases by more than
    /// [`MONOTONICITY_TOLERANCE`] somewhere.
    pub reliable: bool,
}

/// Intercept of the least-squares line through three samples.
fn intercept(r: &[f64], m: &[f64]) -> f64 {
    let n = r.len() as f64;
    let rm = r.iter().sum::<f64>() / n;
    let mm = m.iter().sum::<f64>() / n;
    let sxx: f64 = r.iter().map(|x| (x - rm) * (x - rm)).sum();
    let sxy: f64 = r.iter().zip(m).map(|(x, y)| (x - rm) * (y - mm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    mm - slope * rm
}

/// Extrapolates the profile to `r = 0` with a line through the three
/// smallest radii and divides by [`OMEGA_1`]. The error estimate compares
/// with the fit on the next three radii (or the raw smallest value when the
/// profile is too short).
pub fn density(profile: &MonotonicityProfile) -> Result<DensityEstimate, MonotonicityError> {
    let n = profile.radii.len();
    if n < 3 {
        return Err(MonotonicityError::TooFewRadii(n));
    }
    let span = profile.radii[n - 1] / profile.radii[0];
    if span < 10.0 * (1.0 - 1e-12) {
        return Err(MonotonicityError::NoDecade(span));
    }
    let a = intercept(&profile.radii[..3], &profile.values[..3]);
    let other = if n >= 4 {
        intercept(&profile.radii[1..4], &profile.values[1..4])
    } else {
        profile.values[0]
    };
    Ok(DensityEstimate {
        theta: a / OMEGA_1,
        error_estimate: (a - other).abs() / OMEGA_1,
        reliable: profile.is_monotone(MONOTONICITY_TOLERANCE),
    })
}

fn check_drop_parameters(scale_ratio: f64, drop_threshold: f64) -> Result<(), MonotonicityError> {
    if !(scale_ratio > 0.0 && scale_ratio <= 0.125) {
        return Err(MonotonicityError::Parameter(format!(
            "scale ratio {scale_ratio} outside (0, 1/8]"
        )));
    }
    if !(drop_threshold > 0.0 && drop_threshold.is_finite()) {
        return Err(MonotonicityError::Parameter(format!(
            "drop threshold {drop_threshold} must be positive"
        )));
    }
    Ok(())
}

/// `M_Λ(x, r) − M_Λ(x, 4λ²r)`.
pub fn measured_drop(cluster: &Cluster, x: Point2, r: f64, scale_ratio: f64) -> Result<f64, MonotonicityError> {
    let x = snap(cluster, x)?;
    let inner = 4.0 * scale_ratio * scale_ratio * r;
    let floor = cluster.resolution_floor();
    if !(inner >= floor) {
        return Err(MonotonicityError::Resolution { radius: inner, floor });
    }
    check_radii(cluster, &[inner, r])?;
    Ok(monotonicity_value(cluster, x, r) - monotonicity_value(cluster, x, inner))
}

/// True when the quantity drops by more than `drop_threshold` between `r`
/// and `4λ²r`.
pub fn detect_drop(
    cluster: &Cluster,
    x: Point2,
    r: f64,
    scale_ratio: f64,
    drop_threshold: f64,
) -> Result<bool, MonotonicityError> {
    check_drop_parameters(scale_ratio, drop_threshold)?;
    Ok(measured_drop(cluster, x, r, scale_ratio)? > drop_threshold)
}

/// Drop count over the geometric scales `2R(2λ)^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusBudget {
    pub base_point: Point2,
    pub scale_ratio: f64,
    pub base_radius: f64,
    pub drop_threshold: f64,
    pub lambda: f64,
    pub occupied_drops: Vec<usize>,
    pub budget: usize,
    /// Set when the resolution floor cut the scan short of `max_depth`.
    pub truncated: bool,
    /// `drops[n] = M(2R(2λ)^n) − M(2R(2λ)^{n+2})` for each scanned `n`.
    pub drops: Vec<f64>,
    /// Sums of `drops` over even and odd `n`.
    pub telescoping: [f64; 2],
    /// `ceil(2 e^Λ P(B_{2R}(x)) / (δ R))`.
    pub bound: u64,
}

impl AnnulusBudget {
    /// The scale `2R(2λ)^n`.
    pub fn scale(&self, n: usize) -> f64 {
        2.0 * self.base_radius * (2.0 * self.scale_ratio).powi(n as i32)
    }
}

pub fn annulus_budget(
    cluster: &Cluster,
    x: Point2,
    base_radius: f64,
    scale_ratio: f64,
    drop_threshold: f64,
    max_depth: usize,
) -> Result<AnnulusBudget, MonotonicityError> {
    check_drop_parameters(scale_ratio, drop_threshold)?;
    if !(base_radius > 0.0 && base_radius.is_finite()) {
        return Err(MonotonicityError::Parameter(format!("base radius {base_radius}")));
    }
    let x = snap(cluster, x)?;
    check_radii(cluster, &[2.0 * base_radius])?;
    let floor = cluster.resolution_floor();
    let scale = |n: usize| 2.0 * base_radius * (2.0 * scale_ratio).powi(n as i32);

    let mut values: Vec<f64> = Vec::new();
    let value = |n: usize, values: &mut Vec<f64>| {
        while values.len() <= n {
            let k = values.len();
            values.push(monotonicity_value(cluster, x, scale(k)));
        }
        values[n]
    };
    let mut drops = Vec::new();
    let mut truncated = false;
    for n in 0..=max_depth {
        if scale(n + 2) < floor {
            truncated = true;
            break;
        }
        drops.push(value(n, &mut values) - value(n + 2, &mut values));
    }
    let occupied_drops: Vec<usize> = drops
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > drop_threshold)
        .map(|(n, _)| n)
        .collect();
    let mut telescoping = [0.0; 2];
    for (n, d) in drops.iter().enumerate() {
        telescoping[n % 2] += d;
    }
    let p2r = cluster.localized_perimeter(&Ball {
        center: x,
        radius: 2.0 * base_radius,
    });
    let bound = (2.0 * cluster.lambda().exp() * p2r / (drop_threshold * base_radius)).ceil();
    Ok(AnnulusBudget {
        base_point: x,
        scale_ratio,
        base_radius,
        drop_threshold,
        lambda: cluster.lambda(),
        budget: occupied_drops.len(),
        occupied_drops,
        truncated,
        drops,
        telescoping,
        bound: if bound >= u64::MAX as f64 {
            u64::MAX
        } else {
            bound as u64
        },
    })
}

/// Smallest `Λ ≥ 0` making `e^{Λr} P(B_r(x)) / r` nondecreasing over the
/// given radii at every given point. Radii must be increasing.
pub fn minimal_lambda(cluster: &Cluster, points: &[Point2], radii: &[f64]) -> Result<f64, MonotonicityError> {
    let plain = cluster
        .with_almost_minimality(0.0, f64::INFINITY)
        .map_err(|e| MonotonicityError::Parameter(e.to_string()))?;
    let mut lambda = 0.0_f64;
    for &x in points {
        let p = profile(&plain, x, radii)?;
        for i in 1..p.values.len() {
            let (m0, m1) = (p.values[i - 1], p.values[i]);
            if m0 > 0.0 && m1 > 0.0 {
                let rate = -(m1.ln() - m0.ln()) / (p.radii[i] - p.radii[i - 1]);
                lambda = lambda.max(rate);
            }
        }
    }
    Ok(lambda)
}

/// Smallest measured drop `M(r) − M(4λ²r)` over a set of samples
/// `(cluster, x, r)`, the empirical stand-in for the drop threshold.
pub fn calibrate_drop_threshold(
    samples: &[(&Cluster, Point2, f64)],
    scale_ratio: f64,
) -> Result<f64, MonotonicityError> {
    if samples.is_empty() {
        return Err(MonotonicityError::Parameter("no calibration samples".into()));
    }
    let mut smallest = f64::INFINITY;
    for (cluster, x, r) in samples {
        smallest = smallest.min(measured_drop(cluster, *x, *r, scale_ratio)?);
    }
    Ok(smallest)
}
