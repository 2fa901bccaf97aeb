//! Reference clusters: exact cones, disks, the three-arc double bubble and
//! rectangular starting guesses for the optimizer.

use std::f64::consts::PI;

use crate::geometry::{Chain, Cluster, GeometryError, Interface, Point2, EXTERIOR};

/// Points on a circular arc from angle `from` to `to` (counterclockwise when
/// `to > from`), `segments` pieces, both ends included.
fn arc(center: Point2, radius: f64, from: f64, to: f64, segments: usize) -> Vec<Point2> {
    (0..=segments)
        .map(|k| {
            let t = from + (to - from) * k as f64 / segments as f64;
            center + Point2::polar(radius, t)
        })
        .collect()
}

/// Polyline through `corners`, each straight piece split into pieces no
/// longer than `spacing`.
pub fn subdivide(corners: &[Point2], spacing: f64) -> Vec<Point2> {
    let mut out = vec![corners[0]];
    for w in corners.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((a.distance(b) / spacing).ceil() as usize).max(1);
        for k in 1..=pieces {
            out.push(a + (b - a) * (k as f64 / pieces as f64));
        }
    }
    out
}

/// Single chamber bounded by a regular polygon inscribed in a circle.
pub fn disk(radius: f64, segments: usize) -> Result<Cluster, GeometryError> {
    let mut pts = arc(Point2::ORIGIN, radius, 0.0, 2.0 * PI, segments);
    pts.pop();
    Cluster::from_interfaces(1, vec![Interface::new(1, EXTERIOR, Chain::closed(pts)?)])
}

/// Disk of the given radius cut along the x-axis into two half-disks. Near
/// the origin the boundary is a straight line through the center.
pub fn split_disk(radius: f64, segments_per_arc: usize) -> Result<Cluster, GeometryError> {
    let p = Point2::new;
    let diameter = Chain::open(vec![p(-radius, 0.0), p(radius, 0.0)])?;
    let upper = Chain::open(arc(Point2::ORIGIN, radius, 0.0, PI, segments_per_arc))?;
    let lower = Chain::open(arc(Point2::ORIGIN, radius, PI, 2.0 * PI, segments_per_arc))?;
    Cluster::from_interfaces(
        2,
        vec![
            Interface::new(1, 2, diameter),
            Interface::new(1, EXTERIOR, upper),
            Interface::new(2, EXTERIOR, lower),
        ],
    )
}

/// Disk split into three 120-degree sectors meeting at the origin: an exact
/// triple-junction cone inside the inscribed radius.
pub fn y_junction_disk(radius: f64, segments_per_arc: usize) -> Result<Cluster, GeometryError> {
    let angles: Vec<f64> = (0..3).map(|k| PI / 2.0 + 2.0 * PI * k as f64 / 3.0).collect();
    let mut interfaces = Vec::new();
    for k in 0..3 {
        let chamber = k + 1;
        let previous = (k + 2) % 3 + 1;
        let tip = Point2::polar(radius, angles[k]);
        let ray = Chain::open(vec![Point2::ORIGIN, tip])?;
        interfaces.push(Interface::new(chamber, previous, ray));
        let mut rim = arc(
            Point2::ORIGIN,
            radius,
            angles[k],
            angles[k] + 2.0 * PI / 3.0,
            segments_per_arc,
        );
        rim[0] = tip;
        *rim.last_mut().unwrap() = Point2::polar(radius, angles[(k + 1) % 3]);
        interfaces.push(Interface::new(chamber, EXTERIOR, Chain::open(rim)?));
    }
    Cluster::from_interfaces(3, interfaces)
}

/// Radius of the outer arcs of the symmetric double bubble enclosing `area`
/// in each chamber. Each outer arc spans 240 degrees over a straight middle
/// wall of length `radius * sqrt(3)`.
pub fn double_bubble_arc_radius(area: f64) -> f64 {
    let sweep = 4.0 * PI / 3.0;
    (2.0 * area / (sweep - sweep.sin())).sqrt()
}

/// The exact equal-area double bubble, discretized with `segments_per_arc`
/// pieces on each outer arc. Junctions sit at `(0, -c/2)` and `(0, c/2)`;
/// chamber 1 is on the left.
pub fn double_bubble(area: f64, segments_per_arc: usize) -> Result<Cluster, GeometryError> {
    let r = double_bubble_arc_radius(area);
    let half_chord = r * 3f64.sqrt() / 2.0;
    let bottom = Point2::new(0.0, -half_chord);
    let top = Point2::new(0.0, half_chord);
    let middle_pieces = (segments_per_arc / 4).max(1);
    let middle = subdivide(&[bottom, top], 2.0 * half_chord / middle_pieces as f64);
    let mut left = arc(
        Point2::new(-r / 2.0, 0.0),
        r,
        PI / 3.0,
        5.0 * PI / 3.0,
        segments_per_arc,
    );
    let mut right = arc(
        Point2::new(r / 2.0, 0.0),
        r,
        4.0 * PI / 3.0,
        8.0 * PI / 3.0,
        segments_per_arc,
    );
    // Make junction coordinates bitwise shared.
    *left.first_mut().unwrap() = top;
    *left.last_mut().unwrap() = bottom;
    *right.first_mut().unwrap() = bottom;
    *right.last_mut().unwrap() = top;
    Cluster::from_interfaces(
        2,
        vec![
            Interface::new(1, 2, Chain::open(middle)?),
            Interface::new(1, EXTERIOR, Chain::open(left)?),
            Interface::new(2, EXTERIOR, Chain::open(right)?),
        ],
    )
}

/// `areas.len()` rectangles of common height placed side by side, boundaries
/// subdivided at roughly `spacing`. With two equal areas this is two adjacent
/// squares.
pub fn rectangle_row(areas: &[f64], spacing: f64) -> Result<Cluster, GeometryError> {
    let n = areas.len();
    if n == 0 {
        return Err(GeometryError::Empty);
    }
    let height = (areas.iter().sum::<f64>() / n as f64).sqrt();
    let mut xs = vec![0.0];
    for a in areas {
        xs.push(xs.last().unwrap() + a / height);
    }
    let p = Point2::new;
    if n == 1 {
        let mut pts = subdivide(
            &[
                p(0.0, 0.0),
                p(xs[1], 0.0),
                p(xs[1], height),
                p(0.0, height),
                p(0.0, 0.0),
            ],
            spacing,
        );
        pts.pop();
        return Cluster::from_interfaces(1, vec![Interface::new(1, EXTERIOR, Chain::closed(pts)?)]);
    }
    let mut interfaces = Vec::new();
    for k in 1..n {
        let wall = subdivide(&[p(xs[k], 0.0), p(xs[k], height)], spacing);
        interfaces.push(Interface::new(k, k + 1, Chain::open(wall)?));
    }
    for k in 1..=n {
        let (x0, x1) = (xs[k - 1], xs[k]);
        let pieces: Vec<Vec<Point2>> = if k == 1 {
            vec![vec![p(x1, height), p(x0, height), p(x0, 0.0), p(x1, 0.0)]]
        } else if k == n {
            vec![vec![p(x0, 0.0), p(x1, 0.0), p(x1, height), p(x0, height)]]
        } else {
            vec![vec![p(x0, 0.0), p(x1, 0.0)], vec![p(x1, height), p(x0, height)]]
        };
        for corners in pieces {
            interfaces.push(Interface::new(k, EXTERIOR, Chain::open(subdivide(&corners, spacing))?));
        }
    }
    Cluster::from_interfaces(n, interfaces)
}

/// Three chambers in the standard triple-bubble arrangement: two rectangles
/// side by side under a third one spanning both, sized to `areas`.
pub fn triple_stack(areas: [f64; 3], spacing: f64) -> Result<Cluster, GeometryError> {
    let p = Point2::new;
    // Bottom row: chambers 1 and 2 with common height h; top: chamber 3.
    let h = ((areas[0] + areas[1]) / 2.0).sqrt();
    let (w1, w2) = (areas[0] / h, areas[1] / h);
    let width = w1 + w2;
    let top = h + areas[2] / width;
    let (a, b, c, d) = (p(w1, 0.0), p(w1, h), p(0.0, h), p(width, h));
    let interfaces = vec![
        Interface::new(1, 2, Chain::open(subdivide(&[a, b], spacing))?),
        Interface::new(1, 3, Chain::open(subdivide(&[b, c], spacing))?),
        Interface::new(2, 3, Chain::open(subdivide(&[d, b], spacing))?),
        Interface::new(1, EXTERIOR, Chain::open(subdivide(&[c, p(0.0, 0.0), a], spacing))?),
        Interface::new(2, EXTERIOR, Chain::open(subdivide(&[a, p(width, 0.0), d], spacing))?),
        Interface::new(
            3,
            EXTERIOR,
            Chain::open(subdivide(&[d, p(width, top), p(0.0, top), c], spacing))?,
        ),
    ];
    Cluster::from_interfaces(3, interfaces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_bubble_has_requested_areas() {
        let c = double_bubble(PI, 2000).unwrap();
        for a in c.chamber_areas() {
            assert!((a - PI).abs() / PI < 1e-5, "area {a}");
        }
    }

    #[test]
    fn rectangle_row_areas_are_exact() {
        let c = rectangle_row(&[1.0, 2.0, 1.5], 0.1).unwrap();
        for (a, want) in c.chamber_areas().iter().zip([1.0, 2.0, 1.5]) {
            assert!((a - want).abs() < 1e-12);
        }
        assert_eq!(c.junctions().len(), 4);
        assert!(c.junctions().iter().all(|j| j.degree() == 3));
    }

    #[test]
    fn triple_stack_areas_and_junctions() {
        let c = triple_stack([1.0, 1.0, 1.0], 0.1).unwrap();
        for a in c.chamber_areas() {
            assert!((a - 1.0).abs() < 1e-12);
        }
        let j = c.junctions();
        assert_eq!(j.len(), 4);
        assert!(j.iter().all(|j| j.degree() == 3));
    }

    #[test]
    fn single_square_guess() {
        let c = rectangle_row(&[PI], 0.05).unwrap();
        assert!((c.chamber_areas()[0] - PI).abs() < 1e-12);
        assert!(c.junctions().is_empty());
    }
}
