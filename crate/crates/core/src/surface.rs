//! Point-set intersection kernel.
//!
//! The surface near a group of points is the zero set of
//! `f(x) = (x - p(x)) . n(x)`, where `p(x)` and `n(x)` are Gaussian-weighted
//! averages of member positions and normals with bandwidth equal to the
//! subvoxel edge. Rays are intersected with it by an unsigned-distance march
//! over a short segment around the IE, stopping at a sign change or when
//! `|f|` falls below the hit tolerance.

use glam::DVec3;

use crate::geometry::orthonormal_basis;
use crate::scene::{Label, LabeledPoint};
use crate::voxelgrid::{IntersectableEntity, VoxelGrid};

/// Marching steps allowed per segment.
pub const MAX_MARCH_STEPS: u32 = 32;
/// Hit tolerance as a fraction of the voxel size.
pub const HIT_EPSILON_FACTOR: f64 = 1e-4;

const BISECTION_ITERS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceEstimate {
    pub query_x: DVec3,
    pub p_bar: DVec3,
    pub n_bar: DVec3,
    pub sdf_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMarchState {
    pub s_current: DVec3,
    pub segment_start: DVec3,
    pub segment_end: DVec3,
    pub steps_taken: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub position: DVec3,
    pub normal: DVec3,
    pub label: Label,
    pub distance_along_ray: f64,
}

/// Tolerances of the segment march.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchSettings {
    pub epsilon_hit: f64,
    pub max_steps: u32,
}

impl MarchSettings {
    pub fn for_voxel_size(voxel_size: f64) -> Self {
        Self { epsilon_hit: HIT_EPSILON_FACTOR * voxel_size, max_steps: MAX_MARCH_STEPS }
    }
}

/// Evaluate the implicit surface of `points` at `x`.
///
/// Falls back to the nearest member when every Gaussian weight underflows or
/// the averaged normals cancel.
pub fn estimate_surface(x: DVec3, points: &[LabeledPoint], bandwidth: f64) -> SurfaceEstimate {
    debug_assert!(!points.is_empty());
    let inv_h2 = 1.0 / (bandwidth * bandwidth);
    let mut wsum = 0.0;
    let mut psum = DVec3::ZERO;
    let mut nsum = DVec3::ZERO;
    for p in points {
        let w = (-(x - p.position).length_squared() * inv_h2).exp();
        wsum += w;
        psum += w * p.position;
        nsum += w * p.normal;
    }
    let nlen = nsum.length();
    let (p_bar, n_bar) = if wsum > 0.0 && wsum.is_normal() && nlen > 1e-12 * wsum {
        (psum / wsum, nsum / nlen)
    } else {
        let nearest = points
            .iter()
            .min_by(|a, b| (x - a.position).length_squared().total_cmp(&(x - b.position).length_squared()))
            .expect("non-empty payload");
        (nearest.position, nearest.normal.normalize())
    };
    SurfaceEstimate { query_x: x, p_bar, n_bar, sdf_value: (x - p_bar).dot(n_bar) }
}

/// [`estimate_surface`] over an IE's payload with the grid's bandwidth.
pub fn estimate_surface_in(x: DVec3, ie: &IntersectableEntity, grid: &VoxelGrid) -> SurfaceEstimate {
    estimate_surface(x, grid.payload_points(ie), grid.subvoxel_size())
}

/// Intersect the ray `origin + t * dir` (unit `dir`, `t >= 0`) with the
/// surface of a SurfacePoints IE.
///
/// The march covers a segment one subvoxel diameter long, centred on the
/// projection of the subvoxel centre onto the ray, starting from its end
/// nearest the origin.
pub fn march_segment(
    origin: DVec3,
    dir: DVec3,
    ie: &IntersectableEntity,
    grid: &VoxelGrid,
    settings: &MarchSettings,
) -> Option<SurfaceHit> {
    let points = grid.payload_points(ie);
    if points.is_empty() {
        return None;
    }
    let h = grid.subvoxel_size();
    let half = 0.5 * grid.subvoxel_diameter();
    let t_center = (ie.bounding_sphere.center - origin).dot(dir);
    let t_end = t_center + half;
    if t_end <= 0.0 {
        return None;
    }
    let t_start = (t_center - half).max(0.0);
    let eval = |t: f64| estimate_surface(origin + dir * t, points, h);

    let mut state = RayMarchState {
        s_current: origin + dir * t_start,
        segment_start: origin + dir * t_start,
        segment_end: origin + dir * t_end,
        steps_taken: 0,
    };
    let mut t = t_start;
    let mut est = eval(t);
    let hit = |t: f64, est: SurfaceEstimate| SurfaceHit {
        position: origin + dir * t,
        normal: est.n_bar,
        label: ie.label,
        distance_along_ray: t,
    };
    while state.steps_taken < settings.max_steps {
        if est.sdf_value.abs() < settings.epsilon_hit {
            return Some(hit(t, est));
        }
        let t_next = (t + est.sdf_value.abs()).min(t_end);
        let next = eval(t_next);
        state.steps_taken += 1;
        state.s_current = origin + dir * t_next;
        if next.sdf_value.signum() != est.sdf_value.signum() {
            let (tb, eb) = bisect(t, est, t_next, next, &eval, settings.epsilon_hit);
            return Some(hit(tb, eb));
        }
        if t_next >= t_end {
            return if next.sdf_value.abs() < settings.epsilon_hit { Some(hit(t_next, next)) } else { None };
        }
        t = t_next;
        est = next;
    }
    None
}

fn bisect(
    mut lo: f64,
    mut e_lo: SurfaceEstimate,
    mut hi: f64,
    mut e_hi: SurfaceEstimate,
    eval: &impl Fn(f64) -> SurfaceEstimate,
    eps: f64,
) -> (f64, SurfaceEstimate) {
    for _ in 0..BISECTION_ITERS {
        if e_lo.sdf_value.abs() <= eps {
            return (lo, e_lo);
        }
        if e_hi.sdf_value.abs() <= eps {
            return (hi, e_hi);
        }
        let mid = 0.5 * (lo + hi);
        let e_mid = eval(mid);
        if e_mid.sdf_value.signum() == e_lo.sdf_value.signum() {
            lo = mid;
            e_lo = e_mid;
        } else {
            hi = mid;
            e_hi = e_mid;
        }
    }
    if e_lo.sdf_value.abs() <= e_hi.sdf_value.abs() {
        (lo, e_lo)
    } else {
        (hi, e_hi)
    }
}

/// Newton iteration on `f(origin + t * dir) = 0` starting at `t_guess`, using
/// `dir . n(x)` as the directional derivative. Exact in one step on planar
/// payloads.
pub fn intersect_newton(
    origin: DVec3,
    dir: DVec3,
    t_guess: f64,
    points: &[LabeledPoint],
    bandwidth: f64,
    tolerance: f64,
) -> Option<(f64, SurfaceEstimate)> {
    if points.is_empty() {
        return None;
    }
    let mut t = t_guess;
    for _ in 0..8 {
        let est = estimate_surface(origin + dir * t, points, bandwidth);
        if est.sdf_value.abs() <= tolerance {
            return Some((t, est));
        }
        let slope = dir.dot(est.n_bar);
        if slope.abs() < 1e-3 {
            return None;
        }
        t -= est.sdf_value / slope;
        if !t.is_finite() {
            return None;
        }
    }
    let est = estimate_surface(origin + dir * t, points, bandwidth);
    (est.sdf_value.abs() <= tolerance).then_some((t, est))
}

/// Tangent basis `(u, v)` completing the hit normal to a right-handed frame.
pub fn local_frame(hit: &SurfaceHit) -> (DVec3, DVec3) {
    orthonormal_basis(hit.normal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scene;
    use crate::voxelgrid::{build_grid, IeKind, VoxelizationParams};

    fn plane_points(n: usize, normal: DVec3, spacing: f64) -> Vec<LabeledPoint> {
        let (u, v) = orthonormal_basis(normal);
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = (i as f64 - n as f64 / 2.0) * spacing;
                let b = (j as f64 - n as f64 / 2.0) * spacing;
                pts.push(LabeledPoint { position: a * u + b * v, normal, label: 1 });
            }
        }
        pts
    }

    #[test]
    fn planar_sdf_is_height() {
        let pts = plane_points(10, DVec3::Z, 0.02);
        let est = estimate_surface(DVec3::new(0.1, 0.2, 0.5), &pts, 0.25);
        assert!((est.sdf_value - 0.5).abs() < 1e-12);
        assert!((est.n_bar.length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sdf_zero_at_weighted_mean() {
        let pts = plane_points(6, DVec3::Z, 0.03);
        let x = DVec3::new(0.01, -0.02, 0.3);
        let est = estimate_surface(x, &pts, 0.25);
        let at_mean = estimate_surface(est.p_bar, &pts, 0.25);
        // p_bar moves with x, but on a plane it stays on the plane.
        assert!(at_mean.sdf_value.abs() < 1e-12);
    }

    #[test]
    fn tilted_plane_distance() {
        let n = DVec3::new(1.0, 0.0, 1.0).normalize();
        let pts = plane_points(12, n, 0.02);
        let est = estimate_surface(DVec3::new(1.0, 0.0, 1.0), &pts, 0.25);
        assert!((est.sdf_value - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn underflow_falls_back_to_nearest() {
        let pts = plane_points(3, DVec3::Z, 0.1);
        let est = estimate_surface(DVec3::new(0.0, 0.0, 1000.0), &pts, 0.01);
        assert!((est.sdf_value - 1000.0).abs() < 1e-9);
        assert_eq!(est.n_bar, DVec3::Z);
    }

    fn planar_grid() -> (Scene, crate::voxelgrid::VoxelGrid) {
        let mut points = Vec::new();
        for i in 0..50 {
            for j in 0..50 {
                points.push(LabeledPoint {
                    position: DVec3::new(-0.5 + i as f64 * 0.02, -0.5 + j as f64 * 0.02, 0.0),
                    normal: DVec3::Z,
                    label: 3,
                });
            }
        }
        let scene = Scene { points, edges: vec![], transmitters: vec![], receivers: vec![], carrier_frequency: 60e9 };
        let grid = build_grid(&scene, &VoxelizationParams::default()).unwrap();
        (scene, grid)
    }

    fn ie_containing(grid: &crate::voxelgrid::VoxelGrid, p: DVec3) -> &IntersectableEntity {
        grid.ies
            .iter()
            .filter(|ie| ie.kind == IeKind::SurfacePoints)
            .min_by(|a, b| a.reception_point.distance(p).total_cmp(&b.reception_point.distance(p)))
            .unwrap()
    }

    #[test]
    fn march_hits_axis_aligned_plane() {
        let (_, grid) = planar_grid();
        let ie = ie_containing(&grid, DVec3::ZERO);
        let settings = MarchSettings::for_voxel_size(grid.voxel_size);
        let target = ie.reception_point;
        let origin = target + DVec3::Z;
        let hit = march_segment(origin, -DVec3::Z, ie, &grid, &settings).unwrap();
        assert!((hit.position - target).length() < settings.epsilon_hit * 1.01);
        assert!((hit.normal - DVec3::Z).length() < 1e-12);
        assert_eq!(hit.label, 3);
    }

    #[test]
    fn march_misses_parallel_ray() {
        let (_, grid) = planar_grid();
        let ie = ie_containing(&grid, DVec3::ZERO);
        let settings = MarchSettings::for_voxel_size(grid.voxel_size);
        let origin = DVec3::new(-1.0, ie.reception_point.y, 0.3);
        assert!(march_segment(origin, DVec3::X, ie, &grid, &settings).is_none());
    }

    #[test]
    fn newton_is_exact_on_plane() {
        let pts = plane_points(8, DVec3::Z, 0.03);
        let dir = DVec3::new(0.3, 0.1, -1.0).normalize();
        let origin = DVec3::new(0.0, 0.0, 1.0);
        let (t, _) = intersect_newton(origin, dir, 0.5, &pts, 0.25, 1e-12).unwrap();
        assert!((origin + dir * t).z.abs() < 1e-12);
    }

    #[test]
    fn frame_for_up_normal() {
        let hit = SurfaceHit { position: DVec3::ZERO, normal: DVec3::Z, label: 0, distance_along_ray: 0.0 };
        assert_eq!(local_frame(&hit), (DVec3::X, DVec3::Y));
    }
}
