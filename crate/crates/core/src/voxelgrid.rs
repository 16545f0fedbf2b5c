//! Two-level voxelization.
//!
//! The low-resolution grid stores, per voxel, only an occupancy range into a
//! flat array of intersectable entities (IEs) and the Chebyshev march
//! distance to the nearest occupied voxel. IEs are bounded by subvoxels, the
//! `D_v^3` subdivisions of a voxel, and come in three kinds: groups of
//! same-label surface points, clipped pieces of diffraction edges, and
//! receivers.

use std::ops::Range;

use glam::{DVec3, IVec3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Sphere};
use crate::scene::{scene_bounds, Label, LabeledPoint, Scene};

/// March distance stored when the grid holds no IEs at all.
pub const NO_IES: u32 = u32::MAX;

/// Default voxel budget (2^27 cells).
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelizationParams {
    /// Edge length of a low-resolution voxel (m).
    pub voxel_size: f64,
    /// Subdivision factor `D_v` per axis.
    pub division_factor: u32,
    pub cell_budget: u64,
}

impl Default for VoxelizationParams {
    fn default() -> Self {
        Self { voxel_size: 0.5, division_factor: 2, cell_budget: DEFAULT_CELL_BUDGET }
    }
}

impl VoxelizationParams {
    pub fn subvoxel_size(&self) -> f64 {
        self.voxel_size / self.division_factor as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.voxel_size.is_finite() || self.voxel_size <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "voxel_size",
                reason: format!("must be positive, got {}", self.voxel_size),
            });
        }
        if self.division_factor == 0 {
            return Err(Error::InvalidParameter { name: "division_factor", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IeKind {
    SurfacePoints,
    EdgeSegment,
    Receiver,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IePayload {
    /// Range into [`VoxelGrid::surfels`] / [`VoxelGrid::point_ids`].
    SurfacePoints { members: Range<u32> },
    /// Piece of scene edge `edge` clipped to the subvoxel.
    EdgeSegment { edge: u32, start: DVec3, end: DVec3 },
    /// Index into `scene.receivers`.
    Receiver { rx: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectableEntity {
    pub kind: IeKind,
    /// Surface label, edge label, or receiver index.
    pub label: Label,
    pub reception_point: DVec3,
    /// Encloses the IE's subvoxel.
    pub bounding_sphere: Sphere,
    /// Tight box around the IE's own geometry.
    pub extent: Aabb,
    pub payload: IePayload,
    /// Linear index of the owning voxel.
    pub voxel: u32,
    /// Subvoxel coordinates within the owning voxel.
    pub subvoxel: [u32; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cell {
    pub ie_start: u32,
    pub ie_count: u32,
    /// 0 for voxels holding IEs, otherwise Chebyshev distance in voxels to
    /// the nearest one ([`NO_IES`] if there is none).
    pub march_distance: u32,
}

impl Cell {
    pub fn has_ies(&self) -> bool {
        self.ie_count > 0
    }

    pub fn ie_range(&self) -> Range<usize> {
        self.ie_start as usize..(self.ie_start + self.ie_count) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: DVec3,
    pub dims: [u32; 3],
    pub voxel_size: f64,
    pub division_factor: u32,
    pub cells: Vec<Cell>,
    pub ies: Vec<IntersectableEntity>,
    /// Scene points reordered so every SurfacePoints IE is a contiguous run.
    pub surfels: Vec<LabeledPoint>,
    /// Original scene index of each entry in `surfels`.
    pub point_ids: Vec<u32>,
}

impl VoxelGrid {
    pub fn subvoxel_size(&self) -> f64 {
        self.voxel_size / self.division_factor as f64
    }

    pub fn subvoxel_diameter(&self) -> f64 {
        self.subvoxel_size() * 3f64.sqrt()
    }

    pub fn bounds(&self) -> Aabb {
        let size = DVec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.voxel_size;
        Aabb::new(self.origin, self.origin + size)
    }

    pub fn in_bounds(&self, c: IVec3) -> bool {
        c.x >= 0
            && c.y >= 0
            && c.z >= 0
            && (c.x as u32) < self.dims[0]
            && (c.y as u32) < self.dims[1]
            && (c.z as u32) < self.dims[2]
    }

    pub fn linear(&self, c: IVec3) -> usize {
        (c.x as usize) + self.dims[0] as usize * ((c.y as usize) + self.dims[1] as usize * c.z as usize)
    }

    pub fn coords(&self, linear: usize) -> IVec3 {
        let nx = self.dims[0] as usize;
        let ny = self.dims[1] as usize;
        IVec3::new((linear % nx) as i32, ((linear / nx) % ny) as i32, (linear / (nx * ny)) as i32)
    }

    /// Voxel coordinates of `p`, unclamped.
    pub fn voxel_of(&self, p: DVec3) -> IVec3 {
        ((p - self.origin) / self.voxel_size).floor().as_ivec3()
    }

    pub fn cell(&self, c: IVec3) -> Option<&Cell> {
        self.in_bounds(c).then(|| &self.cells[self.linear(c)])
    }

    pub fn voxel_center(&self, c: IVec3) -> DVec3 {
        self.origin + (c.as_dvec3() + DVec3::splat(0.5)) * self.voxel_size
    }

    pub fn voxel_sphere(&self, c: IVec3) -> Sphere {
        Sphere { center: self.voxel_center(c), radius: 0.5 * self.voxel_size * 3f64.sqrt() }
    }

    pub fn ies_of(&self, cell: &Cell) -> &[IntersectableEntity] {
        &self.ies[cell.ie_range()]
    }

    pub fn payload_points(&self, ie: &IntersectableEntity) -> &[LabeledPoint] {
        match &ie.payload {
            IePayload::SurfacePoints { members } => &self.surfels[members.start as usize..members.end as usize],
            _ => &[],
        }
    }

    pub fn occupied_voxels(&self) -> usize {
        self.cells.iter().filter(|c| c.has_ies()).count()
    }

    /// Voxels crossed by the segment `origin + t * dir`, `t` in `[t0, t1]`,
    /// in order along the ray (3D DDA).
    pub fn walk(&self, origin: DVec3, dir: DVec3, t0: f64, t1: f64) -> VoxelWalk {
        VoxelWalk::new(self, origin, dir, t0, t1)
    }
}

/// Amanatides–Woo traversal restricted to the grid box.
#[derive(Debug, Clone)]
pub struct VoxelWalk {
    current: IVec3,
    step: IVec3,
    t_max: DVec3,
    t_delta: DVec3,
    t_end: f64,
    t: f64,
    dims: IVec3,
    done: bool,
}

impl VoxelWalk {
    fn new(grid: &VoxelGrid, origin: DVec3, dir: DVec3, t0: f64, t1: f64) -> Self {
        let dims = IVec3::new(grid.dims[0] as i32, grid.dims[1] as i32, grid.dims[2] as i32);
        let Some((ta, tb)) = grid.bounds().clip_ray(origin, dir, t0, t1) else {
            return Self {
                current: IVec3::ZERO,
                step: IVec3::ZERO,
                t_max: DVec3::ZERO,
                t_delta: DVec3::ZERO,
                t_end: 0.0,
                t: 0.0,
                dims,
                done: true,
            };
        };
        let start = origin + dir * ta;
        let current = grid.voxel_of(start).clamp(IVec3::ZERO, dims - IVec3::ONE);
        let mut step = IVec3::ZERO;
        let mut t_max = DVec3::splat(f64::INFINITY);
        let mut t_delta = DVec3::splat(f64::INFINITY);
        for a in 0..3 {
            let d = dir[a];
            if d > 0.0 {
                step[a] = 1;
                let boundary = grid.origin[a] + (current[a] + 1) as f64 * grid.voxel_size;
                t_max[a] = ta + (boundary - start[a]) / d;
                t_delta[a] = grid.voxel_size / d;
            } else if d < 0.0 {
                step[a] = -1;
                let boundary = grid.origin[a] + current[a] as f64 * grid.voxel_size;
                t_max[a] = ta + (boundary - start[a]) / d;
                t_delta[a] = -grid.voxel_size / d;
            }
        }
        Self { current, step, t_max, t_delta, t_end: tb, t: ta, dims, done: false }
    }
}

/// One voxel visited by a [`VoxelWalk`]: coordinates and the parametric
/// interval of the segment inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStep {
    pub voxel: IVec3,
    pub t_enter: f64,
    pub t_exit: f64,
}

impl Iterator for VoxelWalk {
    type Item = WalkStep;

    fn next(&mut self) -> Option<WalkStep> {
        if self.done {
            return None;
        }
        let axis = if self.t_max.x <= self.t_max.y && self.t_max.x <= self.t_max.z {
            0
        } else if self.t_max.y <= self.t_max.z {
            1
        } else {
            2
        };
        let exit = self.t_max[axis].min(self.t_end);
        let item = WalkStep { voxel: self.current, t_enter: self.t, t_exit: exit };
        if self.t_max[axis] >= self.t_end {
            self.done = true;
        } else {
            self.t = self.t_max[axis];
            self.current[axis] += self.step[axis];
            self.t_max[axis] += self.t_delta[axis];
            if self.current[axis] < 0 || self.current[axis] >= self.dims[axis] {
                self.done = true;
            }
        }
        Some(item)
    }
}

struct PendingIe {
    voxel: u32,
    sub: u32,
    kind: IeKind,
    label: Label,
    /// Tie-breaker within (voxel, sub, kind, label): edge piece start or rx.
    order: u32,
    build: PendingPayload,
}

enum PendingPayload {
    Points(Range<u32>),
    Edge { edge: u32, start: DVec3, end: DVec3 },
    Receiver(u32),
}

/// Voxelize `scene`: assign every point, edge piece and receiver to exactly
/// one IE and compute the march-distance field.
pub fn build_grid(scene: &Scene, params: &VoxelizationParams) -> Result<VoxelGrid> {
    params.validate()?;
    let bounds = scene_bounds(scene, params.voxel_size)?;
    let extent = (bounds.max - bounds.min) / params.voxel_size;
    let dims = [(extent.x.ceil() as u64).max(1), (extent.y.ceil() as u64).max(1), (extent.z.ceil() as u64).max(1)];
    let cells = dims[0] as u128 * dims[1] as u128 * dims[2] as u128;
    if cells > params.cell_budget as u128 {
        return Err(Error::GridTooLarge { cells, budget: params.cell_budget });
    }
    let dims = [dims[0] as u32, dims[1] as u32, dims[2] as u32];
    let dv = params.division_factor;
    let sub = params.subvoxel_size();
    let origin = bounds.min;
    let sub_dims = IVec3::new((dims[0] * dv) as i32, (dims[1] * dv) as i32, (dims[2] * dv) as i32);

    let subvoxel_of = |p: DVec3| -> IVec3 {
        // The bias keeps points lying exactly on a lattice plane in the upper
        // cell despite rounding in `p - origin`.
        ((p - origin) / sub + DVec3::splat(1e-9)).floor().as_ivec3().clamp(IVec3::ZERO, sub_dims - IVec3::ONE)
    };
    let split = |g: IVec3| -> (u32, u32) {
        let v = g / dv as i32;
        let s = g % dv as i32;
        let voxel = v.x as u32 + dims[0] * (v.y as u32 + dims[1] * v.z as u32);
        let sub_lin = s.x as u32 + dv * (s.y as u32 + dv * s.z as u32);
        (voxel, sub_lin)
    };

    // Surface points: sort by (voxel, subvoxel, label, index) and group.
    let mut keyed: Vec<(u32, u32, Label, u32)> = scene
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (voxel, sub_lin) = split(subvoxel_of(p.position));
            (voxel, sub_lin, p.label, i as u32)
        })
        .collect();
    keyed.par_sort_unstable();

    let mut surfels = Vec::with_capacity(keyed.len());
    let mut point_ids = Vec::with_capacity(keyed.len());
    let mut pending = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let (voxel, sub_lin, label, _) = keyed[i];
        let start = surfels.len() as u32;
        while i < keyed.len() && keyed[i].0 == voxel && keyed[i].1 == sub_lin && keyed[i].2 == label {
            surfels.push(scene.points[keyed[i].3 as usize]);
            point_ids.push(keyed[i].3);
            i += 1;
        }
        pending.push(PendingIe {
            voxel,
            sub: sub_lin,
            kind: IeKind::SurfacePoints,
            label,
            order: 0,
            build: PendingPayload::Points(start..surfels.len() as u32),
        });
    }

    for (ei, edge) in scene.edges.iter().enumerate() {
        for (a, b) in clip_segment_to_cells(edge.start, edge.end, origin, sub) {
            let mid = 0.5 * (a + b);
            let (voxel, sub_lin) = split(subvoxel_of(mid));
            pending.push(PendingIe {
                voxel,
                sub: sub_lin,
                kind: IeKind::EdgeSegment,
                label: edge.label,
                order: 0,
                build: PendingPayload::Edge { edge: ei as u32, start: a, end: b },
            });
        }
    }

    for (ri, rx) in scene.receivers.iter().enumerate() {
        let (voxel, sub_lin) = split(subvoxel_of(rx.position));
        pending.push(PendingIe {
            voxel,
            sub: sub_lin,
            kind: IeKind::Receiver,
            label: ri as Label,
            order: ri as u32,
            build: PendingPayload::Receiver(ri as u32),
        });
    }

    // Edge pieces of one edge in one subvoxel keep generation order.
    pending.sort_by_key(|p| (p.voxel, p.sub, p.kind, p.label, p.order));

    let half_diag = 0.5 * sub * 3f64.sqrt();
    let mut ies = Vec::with_capacity(pending.len());
    for p in pending {
        let vc = IVec3::new(
            (p.voxel % dims[0]) as i32,
            ((p.voxel / dims[0]) % dims[1]) as i32,
            (p.voxel / (dims[0] * dims[1])) as i32,
        );
        let sc = [p.sub % dv, (p.sub / dv) % dv, p.sub / (dv * dv)];
        let g = vc * dv as i32 + IVec3::new(sc[0] as i32, sc[1] as i32, sc[2] as i32);
        let center = origin + (g.as_dvec3() + DVec3::splat(0.5)) * sub;
        let (payload, extent, reception_point) = match p.build {
            PendingPayload::Points(members) => {
                let pts = &surfels[members.start as usize..members.end as usize];
                let mut ext = Aabb::EMPTY;
                for q in pts {
                    ext.grow(q.position);
                }
                let rp = centroid(pts.iter().map(|q| q.position));
                (IePayload::SurfacePoints { members }, ext, rp)
            }
            PendingPayload::Edge { edge, start, end } => {
                let mut ext = Aabb::EMPTY;
                ext.grow(start);
                ext.grow(end);
                (IePayload::EdgeSegment { edge, start, end }, ext, 0.5 * (start + end))
            }
            PendingPayload::Receiver(rx) => {
                let pos = scene.receivers[rx as usize].position;
                (IePayload::Receiver { rx }, Aabb::new(pos, pos), pos)
            }
        };
        ies.push(IntersectableEntity {
            kind: p.kind,
            label: p.label,
            reception_point,
            bounding_sphere: Sphere { center, radius: half_diag },
            extent,
            payload,
            voxel: p.voxel,
            subvoxel: sc,
        });
    }

    let mut cells = vec![Cell::default(); dims[0] as usize * dims[1] as usize * dims[2] as usize];
    let mut k = 0;
    while k < ies.len() {
        let v = ies[k].voxel as usize;
        let start = k;
        while k < ies.len() && ies[k].voxel as usize == v {
            k += 1;
        }
        cells[v].ie_start = start as u32;
        cells[v].ie_count = (k - start) as u32;
    }

    let mut grid =
        VoxelGrid { origin, dims, voxel_size: params.voxel_size, division_factor: dv, cells, ies, surfels, point_ids };
    compute_march_distances(&mut grid);
    Ok(grid)
}

/// Ray reception point of an IE: centroid of member points, segment midpoint,
/// or receiver position.
pub fn reception_point_of(ie: &IntersectableEntity, grid: &VoxelGrid, scene: &Scene) -> DVec3 {
    match &ie.payload {
        IePayload::SurfacePoints { .. } => centroid(grid.payload_points(ie).iter().map(|p| p.position)),
        IePayload::EdgeSegment { start, end, .. } => 0.5 * (*start + *end),
        IePayload::Receiver { rx } => scene.receivers[*rx as usize].position,
    }
}

fn centroid(points: impl Iterator<Item = DVec3>) -> DVec3 {
    let (sum, n) = points.fold((DVec3::ZERO, 0usize), |(s, n), p| (s + p, n + 1));
    if n == 0 {
        DVec3::ZERO
    } else {
        sum / n as f64
    }
}

/// Split the segment `a`–`b` at every plane of the cubic lattice with spacing
/// `cell` anchored at `origin`. Pieces shorter than a nanometre are dropped.
pub fn clip_segment_to_cells(a: DVec3, b: DVec3, origin: DVec3, cell: f64) -> Vec<(DVec3, DVec3)> {
    let d = b - a;
    let mut ts = vec![0.0, 1.0];
    for axis in 0..3 {
        if d[axis] == 0.0 {
            continue;
        }
        let ga = (a[axis] - origin[axis]) / cell;
        let gb = (b[axis] - origin[axis]) / cell;
        let (lo, hi) = if ga < gb { (ga, gb) } else { (gb, ga) };
        let mut k = lo.ceil();
        while k <= hi {
            let plane = origin[axis] + k * cell;
            let t = (plane - a[axis]) / d[axis];
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
            k += 1.0;
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let len = d.length();
    ts.windows(2).filter(|w| (w[1] - w[0]) * len > 1e-9).map(|w| (a + d * w[0], a + d * w[1])).collect()
}

/// Fill `march_distance` with the exact chessboard distance transform of the
/// occupancy field.
pub fn compute_march_distances(grid: &mut VoxelGrid) {
    let occupied: Vec<bool> = grid.cells.iter().map(Cell::has_ies).collect();
    let dist = chebyshev_transform(grid.dims, &occupied);
    for (cell, d) in grid.cells.iter_mut().zip(dist) {
        cell.march_distance = d;
    }
}

/// Two-pass raster chessboard distance transform over a 26-connected grid.
/// Returns [`NO_IES`] everywhere when nothing is occupied.
pub fn chebyshev_transform(dims: [u32; 3], occupied: &[bool]) -> Vec<u32> {
    let (nx, ny, nz) = (dims[0] as i64, dims[1] as i64, dims[2] as i64);
    if !occupied.iter().any(|&o| o) {
        return vec![NO_IES; occupied.len()];
    }
    const INF: u32 = u32::MAX / 2;
    let mut d: Vec<u32> = occupied.iter().map(|&o| if o { 0 } else { INF }).collect();
    let idx = |x: i64, y: i64, z: i64| (x + nx * (y + ny * z)) as usize;

    // Neighbours preceding a voxel in raster order.
    let mut before = Vec::with_capacity(13);
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dz, dy, dx) < (0, 0, 0) {
                    before.push((dx, dy, dz));
                }
            }
        }
    }

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut best = d[idx(x, y, z)];
                for &(dx, dy, dz) in &before {
                    let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                    if qx >= 0 && qy >= 0 && qz >= 0 && qx < nx && qy < ny && qz < nz {
                        best = best.min(d[idx(qx, qy, qz)] + 1);
                    }
                }
                d[idx(x, y, z)] = best;
            }
        }
    }
    for z in (0..nz).rev() {
        for y in (0..ny).rev() {
            for x in (0..nx).rev() {
                let mut best = d[idx(x, y, z)];
                for &(dx, dy, dz) in &before {
                    let (qx, qy, qz) = (x - dx, y - dy, z - dz);
                    if qx >= 0 && qy >= 0 && qz >= 0 && qx < nx && qy < ny && qz < nz {
                        best = best.min(d[idx(qx, qy, qz)] + 1);
                    }
                }
                d[idx(x, y, z)] = best;
            }
        }
    }
    d
}
