//! Immutable scene description: labeled points, manually supplied diffraction
//! edges, radios and the carrier frequency.

use std::collections::{BTreeSet, HashSet};

use glam::DVec3;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, SPEED_OF_LIGHT};

/// Surface identifier produced by the upstream segmentation.
pub type Label = u32;

const UNIT_TOL: f64 = 1e-6;
const EDGE_PERP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: DVec3,
    pub normal: DVec3,
    pub label: Label,
}

/// A straight wedge edge. The two normals belong to the faces meeting at the
/// edge; the solid is taken to be the intersection of the half-spaces behind
/// both faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionEdge {
    pub start: DVec3,
    pub end: DVec3,
    pub normal_a: DVec3,
    pub normal_b: DVec3,
    pub label: Label,
}

impl DiffractionEdge {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Unit edge direction `w`.
    pub fn direction(&self) -> DVec3 {
        (self.end - self.start).normalize()
    }

    /// Free-space opening angle of the wedge, `pi + angle(n_a, n_b)`.
    pub fn opening_angle(&self) -> f64 {
        std::f64::consts::PI + crate::geometry::angle_between(self.normal_a, self.normal_b)
    }

    /// True when `dir` points into the solid behind both faces.
    pub fn points_into_solid(&self, dir: DVec3) -> bool {
        const GRAZE: f64 = 1e-9;
        dir.dot(self.normal_a) < -GRAZE && dir.dot(self.normal_b) < -GRAZE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RadioKind {
    Tx,
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radio {
    pub kind: RadioKind,
    pub position: DVec3,
    pub id: u32,
}

impl Radio {
    pub fn tx(id: u32, position: DVec3) -> Self {
        Self { kind: RadioKind::Tx, position, id }
    }

    pub fn rx(id: u32, position: DVec3) -> Self {
        Self { kind: RadioKind::Rx, position, id }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub points: Vec<LabeledPoint>,
    pub edges: Vec<DiffractionEdge>,
    pub transmitters: Vec<Radio>,
    pub receivers: Vec<Radio>,
    /// Hz.
    pub carrier_frequency: f64,
}

impl Scene {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }
}

/// Which element of the scene a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Point(usize),
    Edge(usize),
    Transmitter(usize),
    Receiver(usize),
    Scene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NonUnitNormal,
    NonFinitePosition,
    DegenerateEdge,
    EdgeNormalNotPerpendicular,
    EdgeLabelCollision,
    DuplicateRadioId,
    WrongRadioKind,
    NoTransmitter,
    NoReceiver,
    NonPositiveFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub element: Element,
    pub rule: Rule,
}

/// Check every scene invariant; never aborts.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut push = |element, rule| report.push(Violation { element, rule });

    for (i, p) in scene.points.iter().enumerate() {
        if !p.position.is_finite() {
            push(Element::Point(i), Rule::NonFinitePosition);
        }
        if !p.normal.is_finite() || (p.normal.length() - 1.0).abs() > UNIT_TOL {
            push(Element::Point(i), Rule::NonUnitNormal);
        }
    }

    let surface_labels: BTreeSet<Label> = scene.points.iter().map(|p| p.label).collect();
    for (i, e) in scene.edges.iter().enumerate() {
        if !e.start.is_finite() || !e.end.is_finite() {
            push(Element::Edge(i), Rule::NonFinitePosition);
            continue;
        }
        if e.length() <= 0.0 {
            push(Element::Edge(i), Rule::DegenerateEdge);
            continue;
        }
        let unit = |n: DVec3| n.is_finite() && (n.length() - 1.0).abs() <= UNIT_TOL;
        if !unit(e.normal_a) || !unit(e.normal_b) {
            push(Element::Edge(i), Rule::NonUnitNormal);
        } else {
            let w = e.direction();
            if w.dot(e.normal_a).abs() > EDGE_PERP_TOL || w.dot(e.normal_b).abs() > EDGE_PERP_TOL {
                push(Element::Edge(i), Rule::EdgeNormalNotPerpendicular);
            }
        }
        if surface_labels.contains(&e.label) {
            push(Element::Edge(i), Rule::EdgeLabelCollision);
        }
    }

    for (list, kind, wrap) in [
        (&scene.transmitters, RadioKind::Tx, Element::Transmitter as fn(usize) -> Element),
        (&scene.receivers, RadioKind::Rx, Element::Receiver as fn(usize) -> Element),
    ] {
        let mut seen = HashSet::new();
        for (i, r) in list.iter().enumerate() {
            if !r.position.is_finite() {
                push(wrap(i), Rule::NonFinitePosition);
            }
            if r.kind != kind {
                push(wrap(i), Rule::WrongRadioKind);
            }
            if !seen.insert(r.id) {
                push(wrap(i), Rule::DuplicateRadioId);
            }
        }
    }
    if scene.transmitters.is_empty() {
        push(Element::Scene, Rule::NoTransmitter);
    }
    if scene.receivers.is_empty() {
        push(Element::Scene, Rule::NoReceiver);
    }
    if !scene.carrier_frequency.is_finite() || scene.carrier_frequency <= 0.0 {
        push(Element::Scene, Rule::NonPositiveFrequency);
    }
    report
}

/// Box around all points, edge endpoints and radios, padded by `padding`
/// (one voxel) on every side.
pub fn scene_bounds(scene: &Scene, padding: f64) -> Result<Aabb> {
    let mut b = Aabb::EMPTY;
    for p in &scene.points {
        b.grow(p.position);
    }
    for e in &scene.edges {
        b.grow(e.start);
        b.grow(e.end);
    }
    for r in scene.transmitters.iter().chain(&scene.receivers) {
        b.grow(r.position);
    }
    if b.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok(b.expanded(padding))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_point_scene(normal: DVec3) -> Scene {
        Scene {
            points: vec![LabeledPoint { position: DVec3::ZERO, normal, label: 1 }],
            edges: vec![],
            transmitters: vec![Radio::tx(0, DVec3::new(0.0, 0.0, 1.0))],
            receivers: vec![Radio::rx(0, DVec3::new(1.0, 0.0, 1.0))],
            carrier_frequency: 60e9,
        }
    }

    #[test]
    fn valid_scene_has_empty_report() {
        assert!(validate_scene(&one_point_scene(DVec3::Z)).is_empty());
    }

    #[test]
    fn non_unit_normal_reported() {
        let report = validate_scene(&one_point_scene(DVec3::new(0.0, 0.0, 2.0)));
        assert_eq!(report, vec![Violation { element: Element::Point(0), rule: Rule::NonUnitNormal }]);
    }

    #[test]
    fn degenerate_edge_reported() {
        let mut scene = one_point_scene(DVec3::Z);
        scene.edges.push(DiffractionEdge {
            start: DVec3::ONE,
            end: DVec3::ONE,
            normal_a: DVec3::Z,
            normal_b: DVec3::Y,
            label: 100,
        });
        assert_eq!(validate_scene(&scene), vec![Violation { element: Element::Edge(0), rule: Rule::DegenerateEdge }]);
    }

    #[test]
    fn edge_label_must_differ_from_surfaces() {
        let mut scene = one_point_scene(DVec3::Z);
        scene.edges.push(DiffractionEdge {
            start: DVec3::ZERO,
            end: DVec3::X,
            normal_a: DVec3::Z,
            normal_b: DVec3::Y,
            label: 1,
        });
        assert_eq!(validate_scene(&scene)[0].rule, Rule::EdgeLabelCollision);
    }

    #[test]
    fn missing_radios_reported() {
        let mut scene = one_point_scene(DVec3::Z);
        scene.transmitters.clear();
        scene.receivers.clear();
        let rules: Vec<_> = validate_scene(&scene).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::NoTransmitter, Rule::NoReceiver]);
    }

    #[test]
    fn bounds_are_padded() {
        let mut scene = one_point_scene(DVec3::Z);
        scene.transmitters.clear();
        scene.receivers.clear();
        scene.points.push(LabeledPoint { position: DVec3::new(1.0, 2.0, 3.0), normal: DVec3::Z, label: 1 });
        let b = scene_bounds(&scene, 0.5).unwrap();
        assert_eq!(b.min, DVec3::splat(-0.5));
        assert_eq!(b.max, DVec3::new(1.5, 2.5, 3.5));

        scene.points = vec![LabeledPoint { position: DVec3::ONE, normal: DVec3::Z, label: 1 }];
        let b = scene_bounds(&scene, 0.5).unwrap();
        assert_eq!((b.min, b.max), (DVec3::splat(0.5), DVec3::splat(1.5)));

        scene.receivers.push(Radio::rx(0, DVec3::new(5.0, 0.0, 0.0)));
        assert!(scene_bounds(&scene, 0.5).unwrap().max.x >= 5.5);
    }

    #[test]
    fn empty_scene_has_no_bounds() {
        let scene =
            Scene { points: vec![], edges: vec![], transmitters: vec![], receivers: vec![], carrier_frequency: 60e9 };
        assert!(matches!(scene_bounds(&scene, 0.5), Err(Error::EmptyScene)));
    }
}
