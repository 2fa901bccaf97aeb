//! Perimeter-minimizing planar clusters and the analysis of their singular
//! points.
//!
//! - [`geometry`]: clusters with polygonal interfaces, perimeter, localized
//!   perimeter, chamber areas.
//! - [`optimizer`]: area-constrained perimeter descent producing numerical
//!   minimizers.
//! - [`monotonicity`]: the monotonicity quantity `e^{Λr} P(B_r) / r`, point
//!   densities, drop detection and annulus budgets.
//! - [`covering`]: dimension-generic annulus occupancy, the covering bound
//!   and its constructive proof, Vitali covers and the sharpness family.
//! - [`stratify`]: boundary graphs, junction classification, reference cone
//!   densities and canonical graph classes.

pub mod covering;
pub mod fixtures;
pub mod geometry;
pub mod monotonicity;
pub mod optimizer;
pub mod stratify;

pub use geometry::{Ball, Chain, Chamber, Cluster, GeometryError, Interface, Point2, EXTERIOR};
