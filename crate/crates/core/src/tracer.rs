//! Coarse path tracing.
//!
//! The transmission phase casts one straight ray from a transmitter to the
//! reception point of every IE. Visible receivers become line-of-sight paths;
//! visible surfaces and edges become the first interactions. The propagation
//! phase then launches reflected and diffracted conical rays from those
//! interactions and walks them through the voxel grid, level by level, until
//! the interaction limit is reached.

use std::collections::{BTreeMap, HashSet};

use glam::{DVec3, IVec3};
use rayon::prelude::*;

use crate::geometry::{angle_between, cmp_vec, cone_intersects_sphere, orthonormal_basis, reflect, Plane};
use crate::scene::{DiffractionEdge, Label, Radio, Scene};
use crate::surface::{march_segment, MarchSettings, SurfaceHit};
use crate::voxelgrid::{IeKind, IePayload, IntersectableEntity, VoxelGrid, NO_IES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    pub max_interactions: u32,
    /// Maximum coarse paths sharing one ordered label sequence.
    pub kappa: u32,
    /// Full apex angle of every conical ray (radians).
    pub cone_apex_angle: f64,
    /// Rays per Keller cone.
    pub diffraction_ray_count: u32,
    pub max_diffractions: u32,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            max_interactions: 5,
            kappa: 100,
            cone_apex_angle: DEFAULT_CONE_APEX_DEG.to_radians(),
            diffraction_ray_count: 360,
            max_diffractions: 1,
        }
    }
}

/// Default full apex angle in degrees.
pub const DEFAULT_CONE_APEX_DEG: f64 = 1.0;

impl TraceParams {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |name, reason: &str| Err(crate::Error::InvalidParameter { name, reason: reason.to_string() });
        if self.kappa == 0 {
            return bad("kappa", "must be positive");
        }
        if !(self.cone_apex_angle > 0.0 && self.cone_apex_angle < std::f64::consts::FRAC_PI_4) {
            return bad("cone_apex_angle", "must lie in (0, 45) degrees");
        }
        if self.diffraction_ray_count == 0 {
            return bad("diffraction_ray_count", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InteractionKind {
    Reflection,
    Diffraction,
}

/// One interaction of a coarse path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub position: DVec3,
    pub label: Label,
    /// IE that produced the interaction.
    pub ie: u32,
    /// Surface normal for reflections, unit edge direction for diffractions.
    pub frame: DVec3,
    /// Scene edge index for diffractions.
    pub edge: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicalRay {
    pub origin: DVec3,
    pub direction: DVec3,
    pub apex_angle: f64,
    /// Reception points must have non-negative signed distance to the first
    /// plane and positive signed distance to the second (if any).
    pub separation_planes: Vec<Plane>,
    pub provenance: Vec<Interaction>,
}

impl ConicalRay {
    pub fn accepts(&self, q: DVec3) -> bool {
        match self.separation_planes.as_slice() {
            [] => true,
            [p] => p.signed_distance(q) > 0.0,
            [lo, hi, ..] => lo.signed_distance(q) >= 0.0 && hi.signed_distance(q) > 0.0,
        }
    }

    fn diffractions(&self) -> u32 {
        self.provenance.iter().filter(|i| i.kind == InteractionKind::Diffraction).count() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCandidate {
    pub tx_id: u32,
    pub rx_id: u32,
    pub interactions: Vec<Interaction>,
    pub coarse_length: f64,
}

impl PathCandidate {
    pub fn labels(&self) -> Vec<Label> {
        self.interactions.iter().map(|i| i.label).collect()
    }

    pub fn diffraction_count(&self) -> usize {
        self.interactions.iter().filter(|i| i.kind == InteractionKind::Diffraction).count()
    }
}

/// First interaction found from a transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialHit {
    Surface { ie: u32, hit: SurfaceHit },
    Edge { ie: u32, point: DVec3 },
}

/// An IE accepted by [`voxel_cone_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub ie: u32,
    /// Surface hit for SurfacePoints IEs, reception point otherwise.
    pub point: DVec3,
    pub hit: Option<SurfaceHit>,
}

/// IEs a visibility or cone query must ignore.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exclusion {
    pub ie: Option<u32>,
    /// Same-(kind, label) IEs whose reception point lies within `radius` of
    /// `center` are ignored as well.
    pub label: Option<(IeKind, Label)>,
    pub center: DVec3,
    pub radius: f64,
}

impl Exclusion {
    /// Ignore every IE whose reception point lies within `radius` of `center`.
    pub fn sphere(center: DVec3, radius: f64) -> Self {
        Self { ie: None, label: None, center, radius }
    }

    fn matches(&self, index: u32, ie: &IntersectableEntity) -> bool {
        if self.ie == Some(index) {
            return true;
        }
        let near = ie.reception_point.distance_squared(self.center) <= self.radius * self.radius;
        match self.label {
            Some(key) => key == (ie.kind, ie.label) && near,
            None => self.ie.is_none() && near,
        }
    }
}

/// Shared read-only state of a trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceContext<'a> {
    pub scene: &'a Scene,
    pub grid: &'a VoxelGrid,
    pub params: &'a TraceParams,
    pub march: MarchSettings,
}

/// Which IE kinds a cone query may return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KindFilter {
    pub surfaces: bool,
    pub edges: bool,
    pub receivers: bool,
}

impl KindFilter {
    pub const ALL: KindFilter = KindFilter { surfaces: true, edges: true, receivers: true };

    fn allows(&self, kind: IeKind) -> bool {
        match kind {
            IeKind::SurfacePoints => self.surfaces,
            IeKind::EdgeSegment => self.edges,
            IeKind::Receiver => self.receivers,
        }
    }
}

impl<'a> TraceContext<'a> {
    pub fn new(scene: &'a Scene, grid: &'a VoxelGrid, params: &'a TraceParams) -> Self {
        Self { scene, grid, params, march: MarchSettings::for_voxel_size(grid.voxel_size) }
    }

    fn exclusion_around(&self, ie_index: u32, center: DVec3) -> Exclusion {
        let ie = &self.grid.ies[ie_index as usize];
        Exclusion {
            ie: Some(ie_index),
            label: Some((ie.kind, ie.label)),
            center,
            radius: self.grid.subvoxel_diameter(),
        }
    }

    /// See [`segment_visible`].
    pub fn segment_visible(&self, from: DVec3, to: DVec3, exclusions: &[Exclusion]) -> bool {
        segment_visible(self.grid, &self.march, from, to, exclusions)
    }

    /// Transmission phase for one transmitter.
    pub fn transmission_phase(&self, tx: &Radio) -> (Vec<PathCandidate>, Vec<InitialHit>) {
        let results: Vec<(Option<PathCandidate>, Option<InitialHit>)> =
            self.grid.ies.par_iter().enumerate().map(|(index, ie)| self.transmit_to(tx, index as u32, ie)).collect();
        let mut los = Vec::new();
        let mut hits = Vec::new();
        for (path, hit) in results {
            los.extend(path);
            hits.extend(hit);
        }
        (los, hits)
    }

    fn transmit_to(
        &self,
        tx: &Radio,
        index: u32,
        ie: &IntersectableEntity,
    ) -> (Option<PathCandidate>, Option<InitialHit>) {
        let target = ie.reception_point;
        let delta = target - tx.position;
        let dist = delta.length();
        if dist <= 0.0 {
            return (None, None);
        }
        let dir = delta / dist;
        let exclusions = [self.exclusion_around(index, target)];
        if !self.segment_visible(tx.position, target, &exclusions) {
            return (None, None);
        }
        match &ie.payload {
            IePayload::Receiver { rx } => (
                Some(PathCandidate {
                    tx_id: tx.id,
                    rx_id: self.scene.receivers[*rx as usize].id,
                    interactions: vec![],
                    coarse_length: dist,
                }),
                None,
            ),
            IePayload::SurfacePoints { .. } => {
                let hit = march_segment(tx.position, dir, ie, self.grid, &self.march)
                    .filter(|h| dir.dot(h.normal) < 0.0)
                    .map(|hit| InitialHit::Surface { ie: index, hit });
                (None, hit)
            }
            IePayload::EdgeSegment { .. } => (None, Some(InitialHit::Edge { ie: index, point: target })),
        }
    }

    /// Walk a conical ray through the grid and return every accepted, visible
    /// IE reception in discovery order.
    pub fn voxel_cone_trace(&self, ray: &ConicalRay, filter: KindFilter, exclusions: &[Exclusion]) -> Vec<Reception> {
        let grid = self.grid;
        let half = 0.5 * ray.apex_angle;
        let o = ray.origin;
        let d = ray.direction;
        let Some((t_start, t_stop)) = grid.bounds().clip_ray(o, d, 0.0, f64::INFINITY) else {
            return vec![];
        };
        let dims = IVec3::new(grid.dims[0] as i32, grid.dims[1] as i32, grid.dims[2] as i32);
        let inv_max = 1.0 / d.abs().max_element();
        let nudge = 1e-9 * grid.voxel_size;

        let mut visited: HashSet<usize> = HashSet::new();
        let mut candidates: Vec<u32> = Vec::new();
        let mut t = t_start;
        while t <= t_stop {
            let c = grid.voxel_of(o + d * t).clamp(IVec3::ZERO, dims - IVec3::ONE);
            let m = grid.cells[grid.linear(c)].march_distance;
            if m == NO_IES {
                break;
            }
            if m >= 3 {
                t += (m - 2) as f64 * grid.voxel_size * inv_max;
                continue;
            }
            if m <= 1 {
                self.evaluate_neighborhood(c, ray, half, filter, exclusions, &mut visited, &mut candidates);
            }
            t = voxel_exit(grid, c, o, d).max(t) + nudge;
        }

        candidates.into_iter().filter_map(|index| self.accept(ray, index, exclusions)).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate_neighborhood(
        &self,
        c: IVec3,
        ray: &ConicalRay,
        half: f64,
        filter: KindFilter,
        exclusions: &[Exclusion],
        visited: &mut HashSet<usize>,
        out: &mut Vec<u32>,
    ) {
        let grid = self.grid;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = c + IVec3::new(dx, dy, dz);
                    if !grid.in_bounds(q) {
                        continue;
                    }
                    let lin = grid.linear(q);
                    let cell = &grid.cells[lin];
                    if !cell.has_ies() || !visited.insert(lin) {
                        continue;
                    }
                    if !cone_intersects_sphere(ray.origin, ray.direction, half, &grid.voxel_sphere(q)) {
                        continue;
                    }
                    for index in cell.ie_range() {
                        let ie = &grid.ies[index];
                        if !filter.allows(ie.kind) || exclusions.iter().any(|e| e.matches(index as u32, ie)) {
                            continue;
                        }
                        if !cone_intersects_sphere(ray.origin, ray.direction, half, &ie.bounding_sphere) {
                            continue;
                        }
                        if !ray.accepts(ie.reception_point) {
                            continue;
                        }
                        out.push(index as u32);
                    }
                }
            }
        }
    }

    fn accept(&self, ray: &ConicalRay, index: u32, exclusions: &[Exclusion]) -> Option<Reception> {
        let ie = &self.grid.ies[index as usize];
        let target = ie.reception_point;
        let mut excl: Vec<Exclusion> = exclusions.to_vec();
        excl.push(self.exclusion_around(index, target));
        if !self.segment_visible(ray.origin, target, &excl) {
            return None;
        }
        match ie.kind {
            IeKind::SurfacePoints => {
                let dir = (target - ray.origin).normalize();
                let hit = march_segment(ray.origin, dir, ie, self.grid, &self.march)?;
                (dir.dot(hit.normal) < 0.0).then_some(Reception { ie: index, point: hit.position, hit: Some(hit) })
            }
            _ => Some(Reception { ie: index, point: target, hit: None }),
        }
    }

    fn self_exclusions(&self, ray: &ConicalRay) -> Vec<Exclusion> {
        ray.provenance.last().map(|last| vec![self.exclusion_around(last.ie, ray.origin)]).unwrap_or_default()
    }

    fn reflected(&self, hit: &SurfaceHit, ie: u32, incoming: DVec3, provenance: &[Interaction]) -> Option<ConicalRay> {
        let mut ray = reflect_ray(hit, incoming, self.params, self.march.epsilon_hit)?;
        ray.provenance = provenance.to_vec();
        ray.provenance.push(Interaction {
            kind: InteractionKind::Reflection,
            position: hit.position,
            label: hit.label,
            ie,
            frame: hit.normal,
            edge: None,
        });
        Some(ray)
    }

    fn diffracted(&self, ie: u32, point: DVec3, incoming: DVec3, provenance: &[Interaction]) -> Vec<ConicalRay> {
        let entity = &self.grid.ies[ie as usize];
        let IePayload::EdgeSegment { edge, .. } = entity.payload else {
            return vec![];
        };
        let e = &self.scene.edges[edge as usize];
        let mut rays = diffract_rays(e, point, incoming, self.params);
        let interaction = Interaction {
            kind: InteractionKind::Diffraction,
            position: point,
            label: entity.label,
            ie,
            frame: e.direction(),
            edge: Some(edge),
        };
        for ray in &mut rays {
            ray.provenance = provenance.to_vec();
            ray.provenance.push(interaction);
        }
        rays
    }

    fn rays_from_initial(&self, tx: &Radio, hit: &InitialHit) -> Vec<ConicalRay> {
        match *hit {
            InitialHit::Surface { ie, hit } => {
                let incoming = (hit.position - tx.position).normalize();
                self.reflected(&hit, ie, incoming, &[]).into_iter().collect()
            }
            InitialHit::Edge { ie, point } => {
                if self.params.max_diffractions == 0 {
                    return vec![];
                }
                let incoming = (point - tx.position).normalize();
                self.diffracted(ie, point, incoming, &[])
            }
        }
    }

    /// Propagation phase: breadth-first expansion of conical rays.
    pub fn propagate(&self, tx: &Radio, initial_hits: &[InitialHit]) -> Vec<PathCandidate> {
        if self.params.max_interactions == 0 {
            return vec![];
        }
        let mut level: Vec<ConicalRay> =
            initial_hits.par_iter().flat_map_iter(|h| self.rays_from_initial(tx, h)).collect();
        let mut candidates = Vec::new();
        while !level.is_empty() {
            let results: Vec<(Vec<PathCandidate>, Vec<ConicalRay>)> =
                level.par_iter().map(|ray| self.expand(tx, ray)).collect();
            let mut next = Vec::new();
            for (found, children) in results {
                candidates.extend(found);
                next.extend(children);
            }
            level = next;
        }
        cap_candidates(candidates, self.params.kappa as usize)
    }

    fn expand(&self, tx: &Radio, ray: &ConicalRay) -> (Vec<PathCandidate>, Vec<ConicalRay>) {
        let depth = ray.provenance.len() as u32;
        let can_bounce = depth < self.params.max_interactions;
        let filter = KindFilter {
            surfaces: can_bounce,
            edges: can_bounce && ray.diffractions() < self.params.max_diffractions,
            receivers: true,
        };
        let exclusions = self.self_exclusions(ray);
        let mut found = Vec::new();
        let mut children = Vec::new();
        for rec in self.voxel_cone_trace(ray, filter, &exclusions) {
            let ie = &self.grid.ies[rec.ie as usize];
            let incoming = (rec.point - ray.origin).normalize();
            match ie.payload {
                IePayload::Receiver { rx } => {
                    let rx = &self.scene.receivers[rx as usize];
                    let mut length = tx.position.distance(ray.provenance[0].position);
                    for w in ray.provenance.windows(2) {
                        length += w[0].position.distance(w[1].position);
                    }
                    length += ray.provenance.last().map_or(0.0, |l| l.position.distance(rx.position));
                    found.push(PathCandidate {
                        tx_id: tx.id,
                        rx_id: rx.id,
                        interactions: ray.provenance.clone(),
                        coarse_length: length,
                    });
                }
                IePayload::SurfacePoints { .. } => {
                    if let Some(hit) = rec.hit {
                        children.extend(self.reflected(&hit, rec.ie, incoming, &ray.provenance));
                    }
                }
                IePayload::EdgeSegment { .. } => {
                    children.extend(self.diffracted(rec.ie, rec.point, incoming, &ray.provenance));
                }
            }
        }
        (found, children)
    }

    /// Transmission plus propagation for one transmitter; LOS paths first.
    pub fn trace_transmitter(&self, tx: &Radio) -> Vec<PathCandidate> {
        let (mut los, hits) = self.transmission_phase(tx);
        los.sort_by_key(|c| c.rx_id);
        let mut all = los;
        all.extend(self.propagate(tx, &hits));
        all
    }
}

/// True when no surface between `from` and `to` blocks the segment.
///
/// Only SurfacePoints IEs occlude. Crossings within a twentieth of a subvoxel
/// of either end are ignored.
pub fn segment_visible(
    grid: &VoxelGrid,
    march: &MarchSettings,
    from: DVec3,
    to: DVec3,
    exclusions: &[Exclusion],
) -> bool {
    let delta = to - from;
    let len = delta.length();
    let tol = 0.05 * grid.subvoxel_size();
    if len <= 2.0 * tol {
        return true;
    }
    let dir = delta / len;
    let margin = 0.1 * grid.subvoxel_size();
    let (t_lo, t_hi) = (tol, len - tol);
    for step in grid.walk(from, dir, 0.0, len) {
        let cell = &grid.cells[grid.linear(step.voxel)];
        if !cell.has_ies() {
            continue;
        }
        for index in cell.ie_range() {
            let ie = &grid.ies[index];
            if ie.kind != IeKind::SurfacePoints || exclusions.iter().any(|e| e.matches(index as u32, ie)) {
                continue;
            }
            if ie.extent.expanded(margin).clip_ray(from, dir, t_lo, t_hi).is_none() {
                continue;
            }
            if let Some(hit) = march_segment(from, dir, ie, grid, march) {
                if hit.distance_along_ray > t_lo && hit.distance_along_ray < t_hi {
                    return false;
                }
            }
        }
    }
    true
}

/// Parameter at which the ray leaves voxel `c`.
fn voxel_exit(grid: &VoxelGrid, c: IVec3, o: DVec3, d: DVec3) -> f64 {
    let mut t_exit = f64::INFINITY;
    for a in 0..3 {
        if d[a] > 0.0 {
            let b = grid.origin[a] + (c[a] + 1) as f64 * grid.voxel_size;
            t_exit = t_exit.min((b - o[a]) / d[a]);
        } else if d[a] < 0.0 {
            let b = grid.origin[a] + c[a] as f64 * grid.voxel_size;
            t_exit = t_exit.min((b - o[a]) / d[a]);
        }
    }
    t_exit
}

/// Canonical candidate order: receiver, label sequence, kinds, then positions.
pub fn canonical_cmp(a: &PathCandidate, b: &PathCandidate) -> std::cmp::Ordering {
    a.tx_id
        .cmp(&b.tx_id)
        .then(a.rx_id.cmp(&b.rx_id))
        .then_with(|| a.labels().cmp(&b.labels()))
        .then_with(|| {
            let ka = a.interactions.iter().map(|i| i.kind);
            let kb = b.interactions.iter().map(|i| i.kind);
            ka.cmp(kb)
        })
        .then_with(|| {
            for (x, y) in a.interactions.iter().zip(&b.interactions) {
                let o = cmp_vec(x.position, y.position);
                if o.is_ne() {
                    return o;
                }
            }
            std::cmp::Ordering::Equal
        })
        .then(a.coarse_length.total_cmp(&b.coarse_length))
}

/// Sort canonically and keep the first `kappa` candidates of every
/// (tx, rx, label sequence) group.
pub fn cap_candidates(mut candidates: Vec<PathCandidate>, kappa: usize) -> Vec<PathCandidate> {
    candidates.par_sort_by(canonical_cmp);
    let mut counts: BTreeMap<(u32, u32, Vec<Label>), usize> = BTreeMap::new();
    candidates.retain(|c| {
        let n = counts.entry((c.tx_id, c.rx_id, c.labels())).or_insert(0);
        *n += 1;
        *n <= kappa
    });
    candidates
}

/// Mirror the incoming direction about the hit normal. The new ray starts
/// `offset` above the surface and culls everything behind the surface.
/// Returns `None` for back-facing hits.
pub fn reflect_ray(hit: &SurfaceHit, incoming: DVec3, params: &TraceParams, offset: f64) -> Option<ConicalRay> {
    let n = hit.normal;
    if incoming.dot(n) >= 0.0 {
        return None;
    }
    let direction = reflect(incoming, n).normalize();
    let origin = hit.position + offset * n;
    Some(ConicalRay {
        origin,
        direction,
        apex_angle: params.cone_apex_angle,
        separation_planes: vec![Plane { point: origin, normal: n }],
        provenance: vec![],
    })
}

/// Rays on the Keller cone of `edge` at `point` for the incoming direction.
///
/// Directions keep `d_j . w = d . w` and are spaced uniformly in azimuth
/// around `w`. Rays entering the solid wedge are dropped. Each ray carries
/// two planes through the edge halfway (in azimuth) to its neighbours.
pub fn diffract_rays(edge: &DiffractionEdge, point: DVec3, incoming: DVec3, params: &TraceParams) -> Vec<ConicalRay> {
    let w = edge.direction();
    let cos_beta = incoming.dot(w);
    if cos_beta.abs() > 0.999 {
        return vec![];
    }
    let reaches_from_open_side = incoming.dot(edge.normal_a) < 0.0 || incoming.dot(edge.normal_b) < 0.0;
    if !reaches_from_open_side || edge.opening_angle() <= std::f64::consts::PI + 1e-6 {
        return vec![];
    }
    let sin_beta = (1.0 - cos_beta * cos_beta).sqrt();
    let (e1, e2) = orthonormal_basis(w);
    let count = params.diffraction_ray_count;
    let step = std::f64::consts::TAU / count as f64;
    let azimuth = |phi: f64| phi.cos() * e1 + phi.sin() * e2;
    (0..count)
        .filter_map(|j| {
            let phi = j as f64 * step;
            let direction = (cos_beta * w + sin_beta * azimuth(phi)).normalize();
            if edge.points_into_solid(direction) {
                return None;
            }
            let separation_planes = if count >= 3 {
                vec![
                    Plane { point, normal: w.cross(azimuth(phi - 0.5 * step)) },
                    Plane { point, normal: -w.cross(azimuth(phi + 0.5 * step)) },
                ]
            } else {
                vec![]
            };
            Some(ConicalRay {
                origin: point,
                direction,
                apex_angle: params.cone_apex_angle,
                separation_planes,
                provenance: vec![],
            })
        })
        .collect()
}

/// Transmission phase for `tx`; see [`TraceContext::transmission_phase`].
pub fn transmission_phase(
    tx: &Radio,
    grid: &VoxelGrid,
    scene: &Scene,
    params: &TraceParams,
) -> (Vec<PathCandidate>, Vec<InitialHit>) {
    TraceContext::new(scene, grid, params).transmission_phase(tx)
}

/// Cone trace accepting every IE kind, with the ray's self-exclusion applied.
pub fn voxel_cone_trace(ray: &ConicalRay, grid: &VoxelGrid, scene: &Scene, params: &TraceParams) -> Vec<Reception> {
    let ctx = TraceContext::new(scene, grid, params);
    let excl = ctx.self_exclusions(ray);
    ctx.voxel_cone_trace(ray, KindFilter::ALL, &excl)
}

pub fn propagate(
    tx: &Radio,
    initial_hits: &[InitialHit],
    grid: &VoxelGrid,
    scene: &Scene,
    params: &TraceParams,
) -> Vec<PathCandidate> {
    TraceContext::new(scene, grid, params).propagate(tx, initial_hits)
}

/// Angle between the reflected direction and the mirror image of the
/// incoming one; zero for an exact specular bounce.
pub fn mirror_error(incoming: DVec3, outgoing: DVec3, normal: DVec3) -> f64 {
    angle_between(reflect(incoming, normal), outgoing)
}
