//! Path refinement and deduplication.
//!
//! A coarse candidate is turned into an exact path by gradient descent on the
//! total path length. Reflection points move in the tangent plane of their
//! surface and are projected back onto the point-set surface by a ray from
//! the preceding node; diffraction points slide along their edge.

use std::collections::BTreeMap;

use glam::{DVec2, DVec3};
use rayon::prelude::*;

use crate::geometry::{angle_between, cmp_vec, orthonormal_basis, reflect, SPEED_OF_LIGHT};
use crate::scene::{Label, Scene};
use crate::surface::{intersect_newton, march_segment, MarchSettings};
use crate::tracer::{segment_visible, Exclusion, InteractionKind, PathCandidate};
use crate::voxelgrid::{IeKind, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// Convergence threshold on the gradient norm.
    pub delta: f64,
    /// Maximum iterations.
    pub rho: u32,
    /// Gradient-descent step per unit gradient.
    pub step_size: f64,
    pub fresnel_enabled: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { delta: 1e-4, rho: 2000, step_size: 0.5, fresnel_enabled: true }
    }
}

/// Step halvings tried before an iteration counts as stalled.
pub const MAX_HALVINGS: u32 = 8;

impl RefineParams {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |name, reason: &str| Err(crate::Error::InvalidParameter { name, reason: reason.to_string() });
        if self.delta.is_nan() || self.delta <= 0.0 {
            return bad("delta", "must be positive");
        }
        if self.rho == 0 {
            return bad("rho", "must be at least 1");
        }
        if self.step_size.is_nan() || self.step_size <= 0.0 {
            return bad("step_size", "must be positive");
        }
        Ok(())
    }
}

/// Reflection unknowns: the point is `c + r u + s v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionNode {
    pub c: DVec3,
    pub u: DVec3,
    pub v: DVec3,
    pub normal: DVec3,
    pub r: f64,
    pub s: f64,
    pub label: Label,
}

impl ReflectionNode {
    pub fn at(c: DVec3, normal: DVec3, label: Label) -> Self {
        let (u, v) = orthonormal_basis(normal);
        Self { c, u, v, normal, r: 0.0, s: 0.0, label }
    }
}

/// Diffraction unknown: the point is `c + t w` with `t` in `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionNode {
    pub c: DVec3,
    pub w: DVec3,
    pub t: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub label: Label,
    pub edge: u32,
}

impl DiffractionNode {
    /// Node at `c` on the segment `start..end`.
    pub fn on_segment(c: DVec3, start: DVec3, end: DVec3, label: Label, edge: u32) -> Self {
        let w = (end - start).normalize();
        Self { c, w, t: 0.0, t_min: (start - c).dot(w), t_max: (end - c).dot(w), label, edge }
    }

    fn recentred(&self) -> Self {
        let c = self.position();
        Self { c, t: 0.0, t_min: self.t_min - self.t, t_max: self.t_max - self.t, ..*self }
    }

    pub fn position(&self) -> DVec3 {
        self.c + self.t * self.w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefineNode {
    Reflection(ReflectionNode),
    Diffraction(DiffractionNode),
}

impl RefineNode {
    pub fn position(&self) -> DVec3 {
        match self {
            RefineNode::Reflection(n) => n.c + n.r * n.u + n.s * n.v,
            RefineNode::Diffraction(n) => n.position(),
        }
    }
}

/// One interaction of an exact path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathNode {
    pub kind: InteractionKind,
    pub position: DVec3,
    pub label: Label,
    /// Surface normal for reflections, edge direction for diffractions.
    pub frame: DVec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPath {
    pub tx_id: u32,
    pub rx_id: u32,
    pub tx: DVec3,
    pub rx: DVec3,
    pub interactions: Vec<PathNode>,
    /// Meters.
    pub total_length: f64,
    /// Seconds.
    pub delay: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: u32,
}

impl ExactPath {
    /// Path through `interactions` with length and delay computed from the
    /// stored points.
    pub fn new(tx_id: u32, rx_id: u32, tx: DVec3, rx: DVec3, interactions: Vec<PathNode>) -> Self {
        let mut path = Self {
            tx_id,
            rx_id,
            tx,
            rx,
            interactions,
            total_length: 0.0,
            delay: 0.0,
            converged: true,
            gradient_norm: 0.0,
            iterations: 0,
        };
        path.total_length = crate::geometry::polyline_length(&path.points());
        path.delay = path.total_length / SPEED_OF_LIGHT;
        path
    }

    /// TX, interaction points, RX.
    pub fn points(&self) -> Vec<DVec3> {
        let mut pts = Vec::with_capacity(self.interactions.len() + 2);
        pts.push(self.tx);
        pts.extend(self.interactions.iter().map(|n| n.position));
        pts.push(self.rx);
        pts
    }

    pub fn label_chain(&self) -> Vec<Label> {
        self.interactions.iter().map(|n| n.label).collect()
    }

    pub fn kinds(&self) -> Vec<InteractionKind> {
        self.interactions.iter().map(|n| n.kind).collect()
    }

    /// Unit direction of every segment.
    pub fn directions(&self) -> Vec<DVec3> {
        self.points().windows(2).map(|w| (w[1] - w[0]).normalize()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rejection {
    RayMissed,
    NotConverged,
    Occluded,
    Degenerate,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rejection::RayMissed => "ray missed",
            Rejection::NotConverged => "not converged",
            Rejection::Occluded => "occluded",
            Rejection::Degenerate => "degenerate segment",
        })
    }
}

const COINCIDENT: f64 = 1e-9;

/// Partials of the path length with respect to every node's unknowns:
/// `(df/dr, df/ds)` for reflections and `(df/dt, 0)` for diffractions.
pub fn local_gradients(tx: DVec3, nodes: &[RefineNode], rx: DVec3) -> Result<Vec<DVec2>, Rejection> {
    let mut pts = Vec::with_capacity(nodes.len() + 2);
    pts.push(tx);
    pts.extend(nodes.iter().map(RefineNode::position));
    pts.push(rx);
    let mut grads = Vec::with_capacity(nodes.len());
    for (k, node) in nodes.iter().enumerate() {
        let (prev, here, next) = (pts[k], pts[k + 1], pts[k + 2]);
        let (a, b) = (here - prev, here - next);
        let (la, lb) = (a.length(), b.length());
        if la < COINCIDENT || lb < COINCIDENT {
            return Err(Rejection::Degenerate);
        }
        let e = a / la + b / lb;
        grads.push(match node {
            RefineNode::Reflection(n) => DVec2::new(n.u.dot(e), n.v.dot(e)),
            RefineNode::Diffraction(n) => DVec2::new(n.w.dot(e), 0.0),
        });
    }
    Ok(grads)
}

fn path_length(tx: DVec3, nodes: &[RefineNode], rx: DVec3) -> f64 {
    let mut prev = tx;
    let mut total = 0.0;
    for n in nodes {
        let p = n.position();
        total += prev.distance(p);
        prev = p;
    }
    total + prev.distance(rx)
}

/// Read-only state shared by all refinements of one run.
#[derive(Debug, Clone, Copy)]
pub struct Refiner<'a> {
    pub grid: &'a VoxelGrid,
    pub scene: &'a Scene,
    pub params: &'a RefineParams,
    march: MarchSettings,
}

impl<'a> Refiner<'a> {
    pub fn new(grid: &'a VoxelGrid, scene: &'a Scene, params: &'a RefineParams) -> Self {
        Self { grid, scene, params, march: MarchSettings::for_voxel_size(grid.voxel_size) }
    }

    fn initial_nodes(&self, candidate: &PathCandidate) -> Vec<RefineNode> {
        candidate
            .interactions
            .iter()
            .map(|i| match i.kind {
                InteractionKind::Reflection => RefineNode::Reflection(ReflectionNode::at(i.position, i.frame, i.label)),
                InteractionKind::Diffraction => {
                    let index = i.edge.expect("diffraction interaction carries its edge");
                    let e = &self.scene.edges[index as usize];
                    RefineNode::Diffraction(DiffractionNode::on_segment(i.position, e.start, e.end, i.label, index))
                }
            })
            .collect()
    }

    /// Project `target` onto the point-set surface along the ray from `from`.
    /// Same-label IEs near the target are tried first, nearest first.
    fn reproject(&self, from: DVec3, target: DVec3, label: Label) -> Option<ReflectionNode> {
        let grid = self.grid;
        let delta = target - from;
        let t_pred = delta.length();
        if t_pred < COINCIDENT {
            return None;
        }
        let dir = delta / t_pred;
        let reach = 2.0 * grid.subvoxel_size();
        let centre = grid.voxel_of(target);
        let mut nearby: Vec<(bool, f64, u32)> = Vec::new();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(cell) = grid.cell(centre + glam::IVec3::new(dx, dy, dz)) else { continue };
                    for index in cell.ie_range() {
                        let ie = &grid.ies[index];
                        if ie.kind != IeKind::SurfacePoints {
                            continue;
                        }
                        let d = ie.bounding_sphere.center.distance(target);
                        if d <= reach {
                            nearby.push((ie.label != label, d, index as u32));
                        }
                    }
                }
            }
        }
        nearby.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

        let h = grid.subvoxel_size();
        for &(_, _, index) in &nearby {
            let ie = &grid.ies[index as usize];
            let points = grid.payload_points(ie);
            let found = intersect_newton(from, dir, t_pred, points, h, self.march.epsilon_hit)
                .map(|(t, est)| (from + dir * t, est.n_bar))
                .filter(|(p, _)| p.distance(ie.bounding_sphere.center) <= ie.bounding_sphere.radius)
                .or_else(|| march_segment(from, dir, ie, grid, &self.march).map(|hit| (hit.position, hit.normal)));
            if let Some((p, n)) = found {
                if (p - from).dot(dir) > 0.0 {
                    return Some(ReflectionNode::at(p, n, ie.label));
                }
            }
        }
        None
    }

    /// Nodes after a descent step of length `step` along the negative gradient.
    fn trial(&self, tx: DVec3, nodes: &[RefineNode], grads: &[DVec2], step: f64) -> Option<Vec<RefineNode>> {
        let mut prev = tx;
        let mut out = Vec::with_capacity(nodes.len());
        for (node, g) in nodes.iter().zip(grads) {
            let next = match node {
                RefineNode::Reflection(n) => {
                    let target = n.c - step * (g.x * n.u + g.y * n.v);
                    RefineNode::Reflection(self.reproject(prev, target, n.label)?)
                }
                RefineNode::Diffraction(n) => {
                    let t = (n.t - step * g.x).clamp(n.t_min, n.t_max);
                    RefineNode::Diffraction(DiffractionNode { t, ..*n }.recentred())
                }
            };
            prev = next.position();
            out.push(next);
        }
        Some(out)
    }

    /// Refine one candidate into an exact path.
    pub fn refine(&self, candidate: &PathCandidate) -> Result<ExactPath, Rejection> {
        let tx = radio_position(&self.scene.transmitters, candidate.tx_id).ok_or(Rejection::Degenerate)?;
        let rx = radio_position(&self.scene.receivers, candidate.rx_id).ok_or(Rejection::Degenerate)?;
        if candidate.interactions.is_empty() {
            return Ok(ExactPath::new(candidate.tx_id, candidate.rx_id, tx, rx, vec![]));
        }
        let mut nodes = self.initial_nodes(candidate);
        let mut length = path_length(tx, &nodes, rx);
        let mut norm = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.params.rho {
            let grads = local_gradients(tx, &nodes, rx)?;
            norm = grads.iter().map(|g| g.length_squared()).sum::<f64>().sqrt();
            if norm < self.params.delta {
                converged = true;
                break;
            }
            iterations += 1;
            let mut step = self.params.step_size;
            let mut accepted = None;
            let mut any_hit = false;
            for _ in 0..=MAX_HALVINGS {
                if let Some(next) = self.trial(tx, &nodes, &grads, step) {
                    any_hit = true;
                    let l = path_length(tx, &next, rx);
                    if l <= length {
                        accepted = Some((next, l));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((next, l)) => {
                    nodes = next;
                    length = l;
                }
                None if !any_hit => return Err(Rejection::RayMissed),
                None => break,
            }
        }
        if !converged {
            let grads = local_gradients(tx, &nodes, rx)?;
            norm = grads.iter().map(|g| g.length_squared()).sum::<f64>().sqrt();
            converged = norm < self.params.delta;
        }
        if !converged {
            return Err(Rejection::NotConverged);
        }

        let interactions: Vec<PathNode> = nodes
            .iter()
            .map(|n| match n {
                RefineNode::Reflection(r) => PathNode {
                    kind: InteractionKind::Reflection,
                    position: n.position(),
                    label: r.label,
                    frame: r.normal,
                },
                RefineNode::Diffraction(d) => {
                    PathNode { kind: InteractionKind::Diffraction, position: n.position(), label: d.label, frame: d.w }
                }
            })
            .collect();
        let mut path = ExactPath::new(candidate.tx_id, candidate.rx_id, tx, rx, interactions);
        path.gradient_norm = norm;
        path.iterations = iterations;
        self.check_path(&path)?;
        Ok(path)
    }

    /// Front-side test at reflections and visibility of every segment.
    fn check_path(&self, path: &ExactPath) -> Result<(), Rejection> {
        let pts = path.points();
        for (k, node) in path.interactions.iter().enumerate() {
            if node.kind == InteractionKind::Reflection {
                let n = node.frame;
                if (pts[k] - node.position).dot(n) <= 0.0 || (pts[k + 2] - node.position).dot(n) <= 0.0 {
                    return Err(Rejection::Occluded);
                }
            }
        }
        let radius = self.grid.subvoxel_diameter();
        let last = pts.len() - 1;
        for (k, w) in pts.windows(2).enumerate() {
            let mut exclusions = Vec::with_capacity(2);
            if k > 0 {
                exclusions.push(Exclusion::sphere(w[0], radius));
            }
            if k + 1 < last {
                exclusions.push(Exclusion::sphere(w[1], radius));
            }
            if !segment_visible(self.grid, &self.march, w[0], w[1], &exclusions) {
                return Err(Rejection::Occluded);
            }
        }
        Ok(())
    }
}

fn radio_position(radios: &[crate::scene::Radio], id: u32) -> Option<DVec3> {
    radios.iter().find(|r| r.id == id).map(|r| r.position)
}

pub fn refine_path(
    candidate: &PathCandidate,
    grid: &VoxelGrid,
    scene: &Scene,
    params: &RefineParams,
) -> Result<ExactPath, Rejection> {
    Refiner::new(grid, scene, params).refine(candidate)
}

/// Counts of rejected candidates by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectionStats {
    pub counts: BTreeMap<Rejection, usize>,
}

impl RejectionStats {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Refine every candidate in parallel; output order follows input order.
pub fn refine_all(
    candidates: &[PathCandidate],
    grid: &VoxelGrid,
    scene: &Scene,
    params: &RefineParams,
) -> (Vec<ExactPath>, RejectionStats) {
    let refiner = Refiner::new(grid, scene, params);
    let results: Vec<Result<ExactPath, Rejection>> = candidates.par_iter().map(|c| refiner.refine(c)).collect();
    let mut stats = RejectionStats::default();
    let mut paths = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(reason) => *stats.counts.entry(reason).or_insert(0) += 1,
        }
    }
    (paths, stats)
}

fn cmp_positions(a: &ExactPath, b: &ExactPath) -> std::cmp::Ordering {
    for (x, y) in a.interactions.iter().zip(&b.interactions) {
        let o = cmp_vec(x.position, y.position);
        if o.is_ne() {
            return o;
        }
    }
    a.interactions.len().cmp(&b.interactions.len())
}

/// Output order: transmitter, receiver, delay, then interaction positions.
pub fn output_cmp(a: &ExactPath, b: &ExactPath) -> std::cmp::Ordering {
    a.tx_id
        .cmp(&b.tx_id)
        .then(a.rx_id.cmp(&b.rx_id))
        .then(a.delay.total_cmp(&b.delay))
        .then_with(|| a.kinds().cmp(&b.kinds()))
        .then_with(|| a.label_chain().cmp(&b.label_chain()))
        .then_with(|| cmp_positions(a, b))
}

/// Keep the shortest path of every (tx, rx, kind sequence, label sequence).
pub fn dedup_by_label(paths: Vec<ExactPath>) -> Vec<ExactPath> {
    type Key = (u32, u32, Vec<InteractionKind>, Vec<Label>);
    let mut best: BTreeMap<Key, ExactPath> = BTreeMap::new();
    for p in paths {
        let key = (p.tx_id, p.rx_id, p.kinds(), p.label_chain());
        match best.get(&key) {
            Some(kept)
                if kept.total_length < p.total_length
                    || (kept.total_length == p.total_length && cmp_positions(kept, &p).is_le()) => {}
            _ => {
                best.insert(key, p);
            }
        }
    }
    let mut out: Vec<ExactPath> = best.into_values().collect();
    out.sort_by(output_cmp);
    out
}

/// True when `q` lies in the first Fresnel ellipsoid of the leg `a..b`.
pub fn in_fresnel_ellipsoid(q: DVec3, a: DVec3, b: DVec3, wavelength: f64) -> bool {
    q.distance(a) + q.distance(b) <= a.distance(b) + 0.5 * wavelength
}

/// True when every interaction of `b` lies in the first Fresnel ellipsoid of
/// a leg adjacent to the matching interaction of `a`.
pub fn within_fresnel_zone(a: &ExactPath, b: &ExactPath, wavelength: f64) -> bool {
    if a.interactions.len() != b.interactions.len() {
        return false;
    }
    let pa = a.points();
    let pb = b.points();
    (1..pa.len() - 1).all(|k| {
        let q = pb[k];
        in_fresnel_ellipsoid(q, pa[k - 1], pa[k], wavelength) || in_fresnel_ellipsoid(q, pa[k], pa[k + 1], wavelength)
    })
}

/// Sort by delay and drop every path lying in the Fresnel zones of an
/// earlier kept path with the same endpoints and kind sequence.
pub fn dedup_by_fresnel(mut paths: Vec<ExactPath>, carrier_frequency: f64) -> Vec<ExactPath> {
    let wavelength = SPEED_OF_LIGHT / carrier_frequency;
    paths.sort_by(|a, b| a.delay.total_cmp(&b.delay).then_with(|| output_cmp(a, b)));
    let mut kept: Vec<ExactPath> = Vec::with_capacity(paths.len());
    for p in paths {
        let duplicate = kept.iter().any(|a| {
            a.tx_id == p.tx_id && a.rx_id == p.rx_id && a.kinds() == p.kinds() && within_fresnel_zone(a, &p, wavelength)
        });
        if !duplicate {
            kept.push(p);
        }
    }
    kept
}

/// Mirror law at reflections and Keller's condition at diffractions.
pub fn verify_reflection_law(path: &ExactPath, tolerance: f64) -> bool {
    let dirs = path.directions();
    path.interactions.iter().enumerate().all(|(k, node)| {
        let (din, dout) = (dirs[k], dirs[k + 1]);
        match node.kind {
            InteractionKind::Reflection => angle_between(reflect(din, node.frame), dout) <= tolerance,
            InteractionKind::Diffraction => (din.dot(node.frame) - dout.dot(node.frame)).abs() <= tolerance,
        }
    })
}
