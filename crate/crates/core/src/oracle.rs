//! Analytic reference paths for scenes built from planar rectangles.
//!
//! Reflection paths come from the image method, diffraction points from a
//! direct minimisation of the path length along the edge. The module also
//! samples rectangles into labeled point clouds and provides the scene
//! presets used by tests and the command line.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::angle_between;
use crate::refine::{ExactPath, PathNode};
use crate::scene::{DiffractionEdge, Label, LabeledPoint, Radio, Scene};
use crate::tracer::InteractionKind;

const PLANE_TOL: f64 = 1e-9;

/// A one-sided rectangle `corner + a e1 + b e2`, `a, b` in `[0, 1]`, facing
/// along `e1 x e2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub corner: DVec3,
    pub e1: DVec3,
    pub e2: DVec3,
    pub label: Label,
}

impl Rectangle {
    /// Rectangle spanned by `e1`, `e2` whose normal points towards `facing`.
    pub fn facing(corner: DVec3, e1: DVec3, e2: DVec3, facing: DVec3, label: Label) -> Self {
        if e1.cross(e2).dot(facing) >= 0.0 {
            Self { corner, e1, e2, label }
        } else {
            Self { corner, e1: e2, e2: e1, label }
        }
    }

    pub fn normal(&self) -> DVec3 {
        self.e1.cross(self.e2).normalize()
    }

    pub fn area(&self) -> f64 {
        self.e1.cross(self.e2).length()
    }

    fn local(&self, p: DVec3) -> (f64, f64) {
        let d = p - self.corner;
        (d.dot(self.e1) / self.e1.length_squared(), d.dot(self.e2) / self.e2.length_squared())
    }

    /// True for points of the plane inside the rectangle.
    pub fn contains(&self, p: DVec3) -> bool {
        let (a, b) = self.local(p);
        let inside = |x: f64| (-PLANE_TOL..=1.0 + PLANE_TOL).contains(&x);
        inside(a) && inside(b) && (p - self.corner).dot(self.normal()).abs() <= 1e-7
    }

    pub fn mirror(&self, p: DVec3) -> DVec3 {
        let n = self.normal();
        p - 2.0 * (p - self.corner).dot(n) * n
    }

    /// Parameter in `(0, 1)` where segment `a..b` crosses the rectangle.
    pub fn segment_crossing(&self, a: DVec3, b: DVec3) -> Option<f64> {
        let n = self.normal();
        let da = (a - self.corner).dot(n);
        let db = (b - self.corner).dot(n);
        if da == db {
            return None;
        }
        let t = da / (da - db);
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        self.contains(a + (b - a) * t).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarScene {
    pub rectangles: Vec<Rectangle>,
    pub edges: Vec<DiffractionEdge>,
    pub tx: DVec3,
    pub rx: DVec3,
}

/// Segments shorter than this fraction of their length at either end are not
/// tested for occlusion.
const END_FRACTION: f64 = 1e-7;

impl PlanarScene {
    /// True when no rectangle crosses the open segment `a..b`.
    pub fn segment_clear(&self, a: DVec3, b: DVec3) -> bool {
        self.rectangles.iter().all(|r| match r.segment_crossing(a, b) {
            Some(t) => t <= END_FRACTION || t >= 1.0 - END_FRACTION,
            None => true,
        })
    }

    /// Axis-aligned box room with inward-facing walls, labels 1 to 6.
    pub fn box_room(min: DVec3, size: DVec3, tx: DVec3, rx: DVec3) -> Self {
        let centre = min + 0.5 * size;
        let (x, y, z) = (DVec3::X * size.x, DVec3::Y * size.y, DVec3::Z * size.z);
        let faces = [(min, x, y), (min + z, x, y), (min, y, z), (min + x, y, z), (min, x, z), (min + y, x, z)];
        let rectangles = faces
            .iter()
            .enumerate()
            .map(|(i, &(corner, e1, e2))| {
                let mid = corner + 0.5 * (e1 + e2);
                Rectangle::facing(corner, e1, e2, centre - mid, i as Label + 1)
            })
            .collect();
        Self { rectangles, edges: vec![], tx, rx }
    }

    /// Long corridor of floor, ceiling and two side walls, open at both ends.
    /// The corridor runs along x from the origin. Labels 1 to 4.
    pub fn corridor(length: f64, width: f64, height: f64, tx: DVec3, rx: DVec3) -> Self {
        let mut room = Self::box_room(DVec3::ZERO, DVec3::new(length, width, height), tx, rx);
        room.rectangles.retain(|r| r.normal().x.abs() < 0.5);
        for (i, r) in room.rectangles.iter_mut().enumerate() {
            r.label = i as Label + 1;
        }
        room
    }

    /// Two half-planes meeting at a right-angled exterior edge along x.
    ///
    /// Face A lies in z = 0 for y in `[-depth, 0]` facing +z, face B lies in
    /// y = 0 for z in `[-depth, 0]` facing +y. The solid fills y < 0, z < 0.
    pub fn wedge(half_length: f64, depth: f64, tx: DVec3, rx: DVec3) -> Self {
        let start = DVec3::new(-half_length, 0.0, 0.0);
        let along = DVec3::X * (2.0 * half_length);
        let a = Rectangle::facing(start - DVec3::Y * depth, along, DVec3::Y * depth, DVec3::Z, 1);
        let b = Rectangle::facing(start - DVec3::Z * depth, along, DVec3::Z * depth, DVec3::Y, 2);
        let edge = DiffractionEdge { start, end: start + along, normal_a: DVec3::Z, normal_b: DVec3::Y, label: 100 };
        Self { rectangles: vec![a, b], edges: vec![edge], tx, rx }
    }

    /// Point-cloud scene with the same geometry and one TX/RX pair.
    pub fn to_scene(&self, points: Vec<LabeledPoint>, carrier_frequency: f64) -> Scene {
        Scene {
            points,
            edges: self.edges.clone(),
            transmitters: vec![Radio::tx(0, self.tx)],
            receivers: vec![Radio::rx(0, self.rx)],
            carrier_frequency,
        }
    }
}

/// All reflection paths up to `max_order` bounces (order 0 is line of sight).
pub fn image_method_paths(scene: &PlanarScene, max_order: usize) -> Vec<ExactPath> {
    let mut out = Vec::new();
    if scene.segment_clear(scene.tx, scene.rx) {
        out.push(ExactPath::new(0, 0, scene.tx, scene.rx, vec![]));
    }
    let mut sequence = Vec::new();
    extend_sequences(scene, max_order, &mut sequence, &mut out);
    out.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    out
}

fn extend_sequences(scene: &PlanarScene, max_order: usize, seq: &mut Vec<usize>, out: &mut Vec<ExactPath>) {
    if seq.len() == max_order {
        return;
    }
    for i in 0..scene.rectangles.len() {
        if seq.last() == Some(&i) {
            continue;
        }
        seq.push(i);
        if let Some(path) = reflection_path(scene, seq) {
            out.push(path);
        }
        extend_sequences(scene, max_order, seq, out);
        seq.pop();
    }
}

fn reflection_path(scene: &PlanarScene, seq: &[usize]) -> Option<ExactPath> {
    let rects: Vec<&Rectangle> = seq.iter().map(|&i| &scene.rectangles[i]).collect();
    let mut images = vec![scene.tx];
    for r in &rects {
        images.push(r.mirror(*images.last().unwrap()));
    }
    let mut points = vec![DVec3::ZERO; rects.len()];
    let mut target = scene.rx;
    for j in (0..rects.len()).rev() {
        let r = rects[j];
        let source = images[j + 1];
        let n = r.normal();
        let ds = (source - r.corner).dot(n);
        let dt = (target - r.corner).dot(n);
        if ds == dt {
            return None;
        }
        let t = ds / (ds - dt);
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let p = source + (target - source) * t;
        if !r.contains(p) {
            return None;
        }
        points[j] = p;
        target = p;
    }
    let mut all = vec![scene.tx];
    all.extend(&points);
    all.push(scene.rx);
    for (k, r) in rects.iter().enumerate() {
        let n = r.normal();
        if (all[k] - points[k]).dot(n) <= 0.0 || (all[k + 2] - points[k]).dot(n) <= 0.0 {
            return None;
        }
    }
    if !all.windows(2).all(|w| scene.segment_clear(w[0], w[1])) {
        return None;
    }
    let nodes = rects
        .iter()
        .zip(&points)
        .map(|(r, &p)| PathNode { kind: InteractionKind::Reflection, position: p, label: r.label, frame: r.normal() })
        .collect();
    Some(ExactPath::new(0, 0, scene.tx, scene.rx, nodes))
}

/// Point on the closed edge segment minimising `|q - a| + |q - b|`.
pub fn fermat_diffraction_point(edge: &DiffractionEdge, a: DVec3, b: DVec3) -> DVec3 {
    let w = edge.direction();
    // The objective is strictly convex along the edge, so its slope is
    // monotone; bisecting on the slope sign avoids comparing nearly equal
    // lengths near the minimum.
    let slope = |t: f64| {
        let q = edge.start + w * t;
        w.dot((q - a).normalize_or_zero() + (q - b).normalize_or_zero())
    };
    let (mut lo, mut hi) = (0.0, edge.length());
    if slope(lo) >= 0.0 {
        return edge.start;
    }
    if slope(hi) <= 0.0 {
        return edge.end;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    edge.start + w * (0.5 * (lo + hi))
}

/// Single-diffraction paths over every edge whose Fermat point sees both
/// radios and lies strictly inside the edge.
pub fn diffraction_paths(scene: &PlanarScene) -> Vec<ExactPath> {
    let mut out = Vec::new();
    for e in &scene.edges {
        let q = fermat_diffraction_point(e, scene.tx, scene.rx);
        let t = (q - e.start).dot(e.direction());
        if t <= 1e-9 || t >= e.length() - 1e-9 {
            continue;
        }
        let (din, dout) = ((q - scene.tx).normalize(), (scene.rx - q).normalize());
        if e.points_into_solid(dout) || e.points_into_solid(-din) {
            continue;
        }
        if scene.segment_clear(scene.tx, q) && scene.segment_clear(q, scene.rx) {
            let node =
                PathNode { kind: InteractionKind::Diffraction, position: q, label: e.label, frame: e.direction() };
            out.push(ExactPath::new(0, 0, scene.tx, scene.rx, vec![node]));
        }
    }
    out
}

/// Result of matching found paths against reference paths.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// Index into the found list for each reference path.
    pub matched: Vec<Option<usize>>,
    /// Largest segment direction deviation of each match (radians).
    pub angle_error: Vec<Option<f64>>,
    /// Largest interaction-point distance of each match (meters).
    pub position_error: Vec<Option<f64>>,
}

impl MatchReport {
    pub fn matched_count(&self) -> usize {
        self.matched.iter().flatten().count()
    }

    /// Share of reference paths matched, in percent.
    pub fn percent_matched(&self) -> f64 {
        if self.matched.is_empty() {
            100.0
        } else {
            100.0 * self.matched_count() as f64 / self.matched.len() as f64
        }
    }

    pub fn max_position_error(&self) -> f64 {
        self.position_error.iter().flatten().fold(0.0, |m, &e| m.max(e))
    }
}

fn max_direction_deviation(a: &ExactPath, b: &ExactPath) -> f64 {
    a.directions().iter().zip(b.directions()).map(|(x, y)| angle_between(*x, y)).fold(0.0, f64::max)
}

/// Greedy one-to-one matching in reference delay order. A found path matches
/// when it has the same kind sequence and every segment direction deviates by
/// less than `angle_tol`; the closest such path is taken.
pub fn match_paths(found: &[ExactPath], reference: &[ExactPath], angle_tol: f64) -> MatchReport {
    let mut order: Vec<usize> = (0..reference.len()).collect();
    order.sort_by(|&a, &b| reference[a].delay.total_cmp(&reference[b].delay).then(a.cmp(&b)));
    let mut used = vec![false; found.len()];
    let mut report = MatchReport {
        matched: vec![None; reference.len()],
        angle_error: vec![None; reference.len()],
        position_error: vec![None; reference.len()],
    };
    for r in order {
        let reference_path = &reference[r];
        let kinds = reference_path.kinds();
        let best = found
            .iter()
            .enumerate()
            .filter(|(i, f)| !used[*i] && f.kinds() == kinds)
            .map(|(i, f)| (i, max_direction_deviation(f, reference_path)))
            .filter(|&(_, dev)| dev < angle_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((i, dev)) = best {
            used[i] = true;
            report.matched[r] = Some(i);
            report.angle_error[r] = Some(dev);
            let err = found[i]
                .interactions
                .iter()
                .zip(&reference_path.interactions)
                .map(|(x, y)| x.position.distance(y.position))
                .fold(0.0, f64::max);
            report.position_error[r] = Some(err);
        }
    }
    report
}

/// Stratified jittered samples on every rectangle, `density` points per m².
pub fn sample_planar_scene(scene: &PlanarScene, density: f64, seed: u64) -> Vec<LabeledPoint> {
    assert!(density > 0.0, "density must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_meter = density.sqrt();
    let mut points = Vec::new();
    for r in &scene.rectangles {
        let nu = ((r.e1.length() * per_meter).round() as usize).max(1);
        let nv = ((r.e2.length() * per_meter).round() as usize).max(1);
        let normal = r.normal();
        points.reserve(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let a = (i as f64 + rng.random::<f64>()) / nu as f64;
                let b = (j as f64 + rng.random::<f64>()) / nv as f64;
                points.push(LabeledPoint { position: r.corner + a * r.e1 + b * r.e2, normal, label: r.label });
            }
        }
    }
    points
}
