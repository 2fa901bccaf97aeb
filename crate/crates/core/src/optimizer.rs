//! Area-constrained perimeter minimization on polygonal clusters.
//!
//! Vertices are the unknowns. Chain endpoints that meet at a junction share a
//! single degree of freedom, so the junction combinatorics of the starting
//! cluster are kept exactly; the 120-degree condition is an outcome of the
//! descent, not a constraint.
//!
//! The method is an augmented Lagrangian on the chamber areas,
//!
//! ```text
//! E(x) = P(x) - sum_h mu_h g_h(x) + rho/2 sum_h g_h(x)^2,   g_h = A_h - m_h,
//! ```
//!
//! minimized by gradient descent with Barzilai-Borwein trial steps and
//! Armijo backtracking (so `E` never increases on an accepted step), followed
//! by the first-order multiplier update `mu <- mu - rho g`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{group_endpoints, Chain, Cluster, GeometryError, Interface, Point2, EXTERIOR};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("chamber {label}: initial area {area} is not within a factor 10 of target {target}")]
    InitialGuess { label: usize, area: f64, target: f64 },
    #[error("topology collapse: {0}")]
    Topology(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn default_volume_box() -> [f64; 2] {
    [0.0, f64::MAX]
}
fn default_step_size() -> f64 {
    1e-3
}
fn default_penalty_weight() -> f64 {
    10.0
}
fn default_max_iterations() -> usize {
    200_000
}
fn default_gradient_tolerance() -> f64 {
    1e-4
}
fn default_volume_tolerance() -> f64 {
    1e-7
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Prescribed chamber areas, in label order.
    pub target_volumes: Vec<f64>,
    /// `[m0, M0]`: every target must lie in this interval.
    #[serde(default = "default_volume_box")]
    pub volume_box: [f64; 2],
    /// First trial step of the line search.
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    /// Quadratic penalty weight `rho`.
    #[serde(default = "default_penalty_weight")]
    pub penalty_weight: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Bound on the first-order residual, in curvature units (see
    /// [`stationarity_residual`]).
    #[serde(default = "default_gradient_tolerance")]
    pub gradient_tolerance: f64,
    /// Bound on `max_h |A_h - m_h| / m_h`.
    #[serde(default = "default_volume_tolerance")]
    pub volume_tolerance: f64,
    /// Junction vertices move as one shared degree of freedom receiving the
    /// summed gradient of all incident chains. When false they are pinned.
    #[serde(default = "default_true")]
    pub junction_projection: bool,
}

impl OptimizerConfig {
    pub fn new(target_volumes: Vec<f64>) -> Self {
        Self {
            target_volumes,
            volume_box: default_volume_box(),
            step_size: default_step_size(),
            penalty_weight: default_penalty_weight(),
            max_iterations: default_max_iterations(),
            gradient_tolerance: default_gradient_tolerance(),
            volume_tolerance: default_volume_tolerance(),
            junction_projection: true,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let [m0, m1] = self.volume_box;
        if !(m0 >= 0.0 && m0 <= m1) {
            return Err(OptimizerError::Config(format!("bad volume box [{m0}, {m1}]")));
        }
        if self.target_volumes.is_empty() {
            return Err(OptimizerError::Config("no target volumes".into()));
        }
        for (i, &m) in self.target_volumes.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) || m < m0 || m > m1 {
                return Err(OptimizerError::Config(format!(
                    "target volume {} = {m} outside ({m0}, {m1}]",
                    i + 1
                )));
            }
        }
        let positive = [
            ("step_size", self.step_size),
            ("penalty_weight", self.penalty_weight),
            ("gradient_tolerance", self.gradient_tolerance),
            ("volume_tolerance", self.volume_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OptimizerError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(OptimizerError::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the convergence log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    /// Augmented energy after the step.
    pub energy: f64,
    pub perimeter: f64,
    pub max_volume_error: f64,
    pub grad_norm: f64,
    /// Index of the multiplier phase the step belongs to. The augmented
    /// energy is only comparable within one phase.
    pub phase: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub cluster: Cluster,
    pub final_perimeter: f64,
    /// `A_h - m_h` per chamber.
    pub volume_errors: Vec<f64>,
    /// Least-squares Lagrange multipliers (chamber pressures) at the result.
    pub pressures: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// First-order residual at the result.
    pub residual: f64,
    #[serde(skip)]
    pub log: Vec<ConvergenceRecord>,
}

impl OptimizerResult {
    /// Convergence log as CSV with header
    /// `iteration,energy,max_volume_error,grad_norm`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iteration,energy,max_volume_error,grad_norm\n");
        for r in &self.log {
            out.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                r.iteration, r.energy, r.max_volume_error, r.grad_norm
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
struct MeshChain {
    verts: Vec<usize>,
    closed: bool,
    left: usize,
    right: usize,
}

impl MeshChain {
    fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.verts.len();
        let m = if self.closed { n } else { n - 1 };
        (0..m).map(move |i| (self.verts[i], self.verts[(i + 1) % n]))
    }
}

/// Vertex pool with shared junction vertices.
#[derive(Clone, Debug)]
struct Mesh {
    pos: Vec<Point2>,
    movable: Vec<bool>,
    chains: Vec<MeshChain>,
    chambers: usize,
}

impl Mesh {
    fn from_cluster(cluster: &Cluster, move_junctions: bool) -> Self {
        let interfaces = cluster.interfaces();
        let junctions = group_endpoints(interfaces, cluster.junction_tolerance());
        let mut pos: Vec<Point2> = junctions.iter().map(|j| j.location).collect();
        let mut movable = vec![move_junctions; pos.len()];
        let mut ends = vec![[usize::MAX; 2]; interfaces.len()];
        for (k, j) in junctions.iter().enumerate() {
            for &(iface, is_end) in &j.incidences {
                ends[iface][is_end as usize] = k;
            }
        }
        let chains = interfaces
            .iter()
            .enumerate()
            .map(|(i, iface)| {
                let vs = iface.chain.vertices();
                let mut verts = Vec::with_capacity(vs.len());
                for (k, &p) in vs.iter().enumerate() {
                    let is_first = k == 0;
                    let is_last = k + 1 == vs.len();
                    if !iface.chain.is_closed() && (is_first || is_last) {
                        verts.push(ends[i][is_last as usize]);
                    } else {
                        verts.push(pos.len());
                        pos.push(p);
                        movable.push(true);
                    }
                }
                MeshChain {
                    verts,
                    closed: iface.chain.is_closed(),
                    left: iface.left,
                    right: iface.right,
                }
            })
            .collect();
        Self {
            pos,
            movable,
            chains,
            chambers: cluster.chamber_count(),
        }
    }

    fn to_cluster(&self, template: &Cluster) -> Result<Cluster, GeometryError> {
        let interfaces = self
            .chains
            .iter()
            .map(|c| {
                let pts = c.verts.iter().map(|&v| self.pos[v]).collect();
                Ok(Interface::new(c.left, c.right, Chain::new(pts, c.closed)?))
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Cluster::new(
            template.chambers().to_vec(),
            interfaces,
            template.lambda(),
            template.r0(),
        )
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        self.chains
            .iter()
            .flat_map(|c| c.edges().map(move |(a, b)| (a, b, c.left, c.right)))
    }

    fn perimeter_at(&self, pos: &[Point2]) -> f64 {
        self.edges().map(|(a, b, _, _)| pos[a].distance(pos[b])).sum()
    }

    /// Areas of chambers `1..=N` (index 0 of the returned vector is chamber 1).
    fn areas_at(&self, pos: &[Point2]) -> Vec<f64> {
        let mut areas = vec![0.0; self.chambers + 1];
        for (a, b, l, r) in self.edges() {
            let s = 0.5 * pos[a].cross(pos[b]);
            areas[l] += s;
            areas[r] -= s;
        }
        areas.remove(0);
        areas
    }

    fn perimeter_gradient(&self, pos: &[Point2]) -> Vec<Point2> {
        let mut g = vec![Point2::ORIGIN; pos.len()];
        for (a, b, _, _) in self.edges() {
            let d = pos[b] - pos[a];
            let u = d * (1.0 / d.norm());
            g[a] -= u;
            g[b] += u;
        }
        self.pin(&mut g);
        g
    }

    /// Gradient of `sum_h w_h A_h` for per-chamber weights `w` (`w[0]` is
    /// chamber 1).
    fn weighted_area_gradient(&self, pos: &[Point2], w: &[f64]) -> Vec<Point2> {
        let weight = |label: usize| if label == EXTERIOR { 0.0 } else { w[label - 1] };
        let mut g = vec![Point2::ORIGIN; pos.len()];
        for (a, b, l, r) in self.edges() {
            let k = 0.5 * (weight(l) - weight(r));
            if k == 0.0 {
                continue;
            }
            let (pa, pb) = (pos[a], pos[b]);
            g[a] += Point2::new(pb.y, -pb.x) * k;
            g[b] += Point2::new(-pa.y, pa.x) * k;
        }
        self.pin(&mut g);
        g
    }

    fn pin(&self, g: &mut [Point2]) {
        for (gi, &m) in g.iter_mut().zip(&self.movable) {
            if !m {
                *gi = Point2::ORIGIN;
            }
        }
    }

    /// Half the total length of edges incident to each vertex.
    fn dual_lengths(&self, pos: &[Point2]) -> Vec<f64> {
        let mut d = vec![0.0; pos.len()];
        for (a, b, _, _) in self.edges() {
            let l = 0.5 * pos[a].distance(pos[b]);
            d[a] += l;
            d[b] += l;
        }
        d
    }

    fn min_edge(&self, pos: &[Point2]) -> f64 {
        self.edges()
            .map(|(a, b, _, _)| pos[a].distance(pos[b]))
            .fold(f64::INFINITY, f64::min)
    }

    fn mean_edge(&self, pos: &[Point2]) -> f64 {
        let n = self.edges().count();
        self.perimeter_at(pos) / n as f64
    }

    /// Moves the interior vertices of every chain with an edge shorter than
    /// `floor` to uniform arc-length positions. Fails if a whole chain has
    /// shrunk below `floor`.
    fn remesh(&mut self, floor: f64) -> Result<bool, OptimizerError> {
        let mut changed = false;
        for c in 0..self.chains.len() {
            let chain = &self.chains[c];
            let lengths: Vec<f64> = chain.edges().map(|(a, b)| self.pos[a].distance(self.pos[b])).collect();
            let total: f64 = lengths.iter().sum();
            if total < floor {
                return Err(OptimizerError::Topology(format!(
                    "interface {c} shrank to length {total:e}"
                )));
            }
            if lengths.iter().all(|&l| l >= floor) {
                continue;
            }
            let pts: Vec<Point2> = chain
                .edges()
                .map(|(a, _)| self.pos[a])
                .chain(chain.edges().last().map(|(_, b)| self.pos[b]))
                .collect();
            let m = lengths.len();
            let verts = chain.verts.clone();
            let mut seg = 0;
            let mut acc = 0.0;
            // Vertex 0 stays put: an endpoint, or the anchor of a closed chain.
            for k in 1..m {
                let target = total * k as f64 / m as f64;
                while seg + 1 < m && acc + lengths[seg] < target {
                    acc += lengths[seg];
                    seg += 1;
                }
                let t = ((target - acc) / lengths[seg]).clamp(0.0, 1.0);
                let v = verts[k];
                if self.movable[v] {
                    self.pos[v] = pts[seg] + (pts[seg + 1] - pts[seg]) * t;
                }
            }
            changed = true;
        }
        Ok(changed)
    }
}

/// Solves the small dense system `a x = b` by Gaussian elimination with
/// partial pivoting. Singular pivots give zero components.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row][col] / p;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = if a[row][row].abs() < 1e-300 {
            0.0
        } else {
            (b[row] - s) / a[row][row]
        };
    }
    x
}

fn dot(u: &[Point2], v: &[Point2]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.dot(*b)).sum()
}

struct Stationarity {
    multipliers: Vec<f64>,
    residual: f64,
}

/// Least-squares multipliers `mu = argmin |grad P - sum mu_h grad A_h|` and
/// the remaining residual, measured per vertex relative to the vertex's dual
/// length (so it reads as a curvature mismatch).
fn stationarity(mesh: &Mesh, pos: &[Point2]) -> Stationarity {
    let n = mesh.chambers;
    let gp = mesh.perimeter_gradient(pos);
    let ga: Vec<Vec<Point2>> = (0..n)
        .map(|h| {
            let mut w = vec![0.0; n];
            w[h] = 1.0;
            mesh.weighted_area_gradient(pos, &w)
        })
        .collect();
    let gram: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(&ga[i], &ga[j])).collect()).collect();
    let rhs: Vec<f64> = (0..n).map(|i| dot(&ga[i], &gp)).collect();
    let mu = solve_dense(gram, rhs);
    let dual = mesh.dual_lengths(pos);
    let mut residual: f64 = 0.0;
    for v in 0..pos.len() {
        if !mesh.movable[v] {
            continue;
        }
        let mut r = gp[v];
        for h in 0..n {
            r -= ga[h][v] * mu[h];
        }
        residual = residual.max(r.norm() / dual[v]);
    }
    Stationarity {
        multipliers: mu,
        residual,
    }
}

/// First-order residual of `cluster` as a constrained critical point: the
/// largest per-vertex norm of `grad P - sum_h mu_h grad A_h` divided by the
/// vertex's dual length, with least-squares multipliers `mu`.
pub fn stationarity_residual(cluster: &Cluster) -> f64 {
    let mesh = Mesh::from_cluster(cluster, true);
    stationarity(&mesh, &mesh.pos).residual
}

struct Problem<'a> {
    mesh: &'a Mesh,
    targets: &'a [f64],
    mu: Vec<f64>,
    rho: f64,
}

impl Problem<'_> {
    fn energy(&self, pos: &[Point2]) -> (f64, f64, Vec<f64>) {
        let p = self.mesh.perimeter_at(pos);
        let areas = self.mesh.areas_at(pos);
        let mut e = p;
        for h in 0..areas.len() {
            let g = areas[h] - self.targets[h];
            e += -self.mu[h] * g + 0.5 * self.rho * g * g;
        }
        (e, p, areas)
    }

    fn gradient(&self, pos: &[Point2], areas: &[f64]) -> Vec<Point2> {
        let w: Vec<f64> = (0..areas.len())
            .map(|h| -self.mu[h] + self.rho * (areas[h] - self.targets[h]))
            .collect();
        let mut g = self.mesh.perimeter_gradient(pos);
        for (gi, ai) in g.iter_mut().zip(self.mesh.weighted_area_gradient(pos, &w)) {
            *gi += ai;
        }
        g
    }
}

fn max_relative_error(areas: &[f64], targets: &[f64]) -> f64 {
    areas
        .iter()
        .zip(targets)
        .map(|(a, m)| (a - m).abs() / m)
        .fold(0.0, f64::max)
}

/// Runs the descent from `initial` until the first-order residual and the
/// relative area errors are below the configured tolerances, or until
/// `max_iterations` steps. Hitting the iteration cap is not an error: the
/// result comes back with `converged == false`.
pub fn minimize(initial: &Cluster, config: &OptimizerConfig) -> Result<OptimizerResult, OptimizerError> {
    config.validate()?;
    let n = initial.chamber_count();
    if config.target_volumes.len() != n {
        return Err(OptimizerError::Config(format!(
            "{} target volumes for {n} chambers",
            config.target_volumes.len()
        )));
    }
    for (h, (&area, &target)) in initial.chamber_areas().iter().zip(&config.target_volumes).enumerate() {
        if area > 10.0 * target || area < target / 10.0 {
            return Err(OptimizerError::InitialGuess {
                label: h + 1,
                area,
                target,
            });
        }
    }

    let mut mesh = Mesh::from_cluster(initial, config.junction_projection);
    let targets = &config.target_volumes;
    let floor = 1e-3 * mesh.mean_edge(&mesh.pos);

    let stat = stationarity(&mesh, &mesh.pos);
    let mut problem = Problem {
        mesh: &mesh,
        targets,
        mu: stat.multipliers,
        rho: config.penalty_weight,
    };
    let mut pos = mesh.pos.clone();
    let mut log = Vec::new();
    let mut phase = 0;
    let mut inner_tol = 1.0_f64;
    let mut inner_steps = 0;
    let mut prev: Option<(Vec<Point2>, Vec<Point2>)> = None;
    let mut iteration = 0;
    let mut converged = false;

    let (mut energy, _, mut areas) = problem.energy(&pos);
    loop {
        let stat = stationarity(problem.mesh, &pos);
        let vol_err = max_relative_error(&areas, targets);
        if stat.residual <= config.gradient_tolerance && vol_err <= config.volume_tolerance {
            converged = true;
            break;
        }
        if iteration >= config.max_iterations {
            break;
        }

        let grad = problem.gradient(&pos, &areas);
        let dual = problem.mesh.dual_lengths(&pos);
        let inner_res = grad.iter().zip(&dual).map(|(g, d)| g.norm() / d).fold(0.0, f64::max);

        // Multiplier update once the inner problem is solved well enough.
        if inner_res <= inner_tol.max(0.1 * config.gradient_tolerance) || inner_steps >= 2000 {
            for h in 0..n {
                problem.mu[h] -= problem.rho * (areas[h] - targets[h]);
            }
            inner_tol = (inner_tol * 0.25).max(0.1 * config.gradient_tolerance);
            inner_steps = 0;
            phase += 1;
            prev = None;
            let (e, _, a) = problem.energy(&pos);
            energy = e;
            areas = a;
            continue;
        }

        let gnorm2 = dot(&grad, &grad);
        let gmax = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
        let min_edge = problem.mesh.min_edge(&pos);
        let mut t = match &prev {
            Some((s, y)) => {
                let sy = dot(s, y);
                if sy > 0.0 {
                    dot(s, s) / sy
                } else {
                    config.step_size
                }
            }
            None => config.step_size,
        };
        // Never move a vertex by more than a fraction of the shortest edge.
        t = t.min(0.25 * min_edge / gmax.max(f64::MIN_POSITIVE));

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<Point2> = pos.iter().zip(&grad).map(|(p, g)| *p - *g * t).collect();
            let (e, p, a) = problem.energy(&trial);
            if e <= energy - 1e-4 * t * gnorm2 {
                accepted = Some((trial, e, p, a));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, e, perimeter, a)) = accepted else {
            // No descent possible at floating-point resolution.
            break;
        };
        let step: Vec<Point2> = trial.iter().zip(&pos).map(|(x, y)| *x - *y).collect();
        pos = trial;
        energy = e;
        areas = a;
        iteration += 1;
        inner_steps += 1;

        if mesh_remesh(&mut pos, problem.mesh, floor)? {
            // Vertices moved: cached energy and the step history are stale.
            let (e, _, a) = problem.energy(&pos);
            energy = e;
            areas = a;
            prev = None;
        } else {
            let new_grad = problem.gradient(&pos, &areas);
            let y: Vec<Point2> = new_grad.iter().zip(&grad).map(|(a, b)| *a - *b).collect();
            prev = Some((step, y));
        }

        log.push(ConvergenceRecord {
            iteration,
            energy,
            perimeter,
            max_volume_error: max_relative_error(&areas, targets),
            grad_norm: inner_res,
            phase,
        });
    }

    let stat = stationarity(problem.mesh, &pos);
    mesh.pos = pos;
    let cluster = mesh
        .to_cluster(initial)
        .map_err(|e| OptimizerError::Topology(e.to_string()))?;
    let areas = cluster.chamber_areas();
    Ok(OptimizerResult {
        final_perimeter: cluster.perimeter(),
        volume_errors: areas.iter().zip(targets).map(|(a, m)| a - m).collect(),
        pressures: stat.multipliers,
        converged,
        iterations: iteration,
        residual: stat.residual,
        cluster,
        log,
    })
}

/// Redistributes the chains when an edge drops below `floor`. Returns whether
/// any vertex moved.
fn mesh_remesh(pos: &mut Vec<Point2>, mesh: &Mesh, floor: f64) -> Result<bool, OptimizerError> {
    if mesh.min_edge(pos) >= floor {
        return Ok(false);
    }
    let mut scratch = mesh.clone();
    scratch.pos = std::mem::take(pos);
    scratch.remesh(floor)?;
    *pos = scratch.pos;
    Ok(true)
}

/// Adds Gaussian noise of standard deviation `noise_scale` to every movable
/// vertex of a converged result and descends again. Junctions are perturbed
/// once, as shared vertices. Perturbations that tangle the boundary are
/// reported as topology errors.
pub fn perturb_and_resolve(
    result: &OptimizerResult,
    config: &OptimizerConfig,
    noise_scale: f64,
    seed: u64,
) -> Result<OptimizerResult, OptimizerError> {
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(OptimizerError::Config(format!("bad noise scale {noise_scale}")));
    }
    let start = perturb(&result.cluster, config.junction_projection, noise_scale, seed)?;
    minimize(&start, config)
}

/// Gaussian vertex perturbation with junctions kept shared.
pub fn perturb(
    cluster: &Cluster,
    move_junctions: bool,
    noise_scale: f64,
    seed: u64,
) -> Result<Cluster, OptimizerError> {
    if noise_scale == 0.0 {
        return Ok(cluster.clone());
    }
    let mut mesh = Mesh::from_cluster(cluster, move_junctions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_scale).map_err(|e| OptimizerError::Config(e.to_string()))?;
    for (p, &m) in mesh.pos.iter_mut().zip(&mesh.movable) {
        if m {
            *p += Point2::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    mesh.to_cluster(cluster)
        .map_err(|e| OptimizerError::Topology(format!("perturbation broke the cluster: {e}")))
}

/// Discrete curvature statistics of one interface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureStats {
    pub interface: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Signed discrete curvature at each interior vertex of each interface:
/// `|u_in - u_out| / (|v_next - v_prev| / 2)` where `u` are unit edge
/// vectors, positive when the chain turns left. At a discrete constrained
/// critical point it equals the pressure jump across the interface exactly.
pub fn interface_curvatures(cluster: &Cluster) -> Vec<CurvatureStats> {
    cluster
        .interfaces()
        .iter()
        .enumerate()
        .map(|(k, iface)| {
            let v = iface.chain.vertices();
            let n = v.len();
            let triples: Vec<(Point2, Point2, Point2)> = if iface.chain.is_closed() {
                (0..n).map(|i| (v[(i + n - 1) % n], v[i], v[(i + 1) % n])).collect()
            } else {
                (1..n - 1).map(|i| (v[i - 1], v[i], v[i + 1])).collect()
            };
            let ks: Vec<f64> = triples
                .iter()
                .map(|&(a, b, c)| {
                    let u0 = (b - a) * (1.0 / (b - a).norm());
                    let u1 = (c - b) * (1.0 / (c - b).norm());
                    let turn = u1 - u0;
                    turn.norm() * u0.cross(u1).signum() / (0.5 * (c - a).norm())
                })
                .collect();
            if ks.is_empty() {
                return CurvatureStats {
                    interface: k,
                    mean: 0.0,
                    min: 0.0,
                    max: 0.0,
                };
            }
            CurvatureStats {
                interface: k,
                mean: ks.iter().sum::<f64>() / ks.len() as f64,
                min: ks.iter().copied().fold(f64::INFINITY, f64::min),
                max: ks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

/// Largest relative curvature spread over all interfaces:
/// `(max - min) / max(|mean|, kappa_scale)` with `kappa_scale` the largest
/// `|mean|` in the cluster, so straight interfaces are judged against the
/// cluster's curvature scale.
pub fn curvature_spread(cluster: &Cluster) -> f64 {
    let stats = interface_curvatures(cluster);
    let scale = stats.iter().map(|s| s.mean.abs()).fold(0.0, f64::max);
    stats
        .iter()
        .map(|s| (s.max - s.min) / s.mean.abs().max(scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Unit tangent at `p0` of the circle through `p0, p1, p2`, pointing toward
/// `p1`. Falls back to the chord direction for collinear points.
fn circle_tangent(p0: Point2, p1: Point2, p2: Point2) -> Point2 {
    let (a, b) = (p1 - p0, p2 - p0);
    let det = 2.0 * a.cross(b);
    let chord = a * (1.0 / a.norm());
    if det.abs() < 1e-14 * a.norm() * b.norm() {
        return chord;
    }
    // Circumcenter relative to p0.
    let c = Point2::new(
        b.y * a.norm_squared() - a.y * b.norm_squared(),
        a.x * b.norm_squared() - b.x * a.norm_squared(),
    ) * (1.0 / det);
    let t = c.perp();
    let t = t * (1.0 / t.norm());
    if t.dot(chord) < 0.0 {
        -t
    } else {
        t
    }
}

/// Angles (degrees, ascending around the junction) between the tangents of
/// the chains meeting at each junction. Tangents are taken from the circle
/// through the junction and the next two vertices of each chain.
pub fn junction_angles(cluster: &Cluster) -> Vec<Vec<f64>> {
    cluster
        .junctions()
        .iter()
        .map(|j| {
            let mut dirs: Vec<f64> = j
                .incidences
                .iter()
                .map(|&(iface, is_end)| {
                    let v = cluster.interfaces()[iface].chain.vertices();
                    let (p0, p1, p2) = if is_end {
                        let n = v.len();
                        (v[n - 1], v[n - 2], if n > 2 { v[n - 3] } else { v[n - 2] })
                    } else {
                        (v[0], v[1], if v.len() > 2 { v[2] } else { v[1] })
                    };
                    let t = if p2 == p1 {
                        (p1 - p0) * (1.0 / (p1 - p0).norm())
                    } else {
                        circle_tangent(p0, p1, p2)
                    };
                    t.y.atan2(t.x)
                })
                .collect();
            dirs.sort_by(f64::total_cmp);
            let k = dirs.len();
            (0..k)
                .map(|i| {
                    let next = if i + 1 < k {
                        dirs[i + 1]
                    } else {
                        dirs[0] + 2.0 * std::f64::consts::PI
                    };
                    (next - dirs[i]).to_degrees()
                })
                .collect()
        })
        .collect()
}
