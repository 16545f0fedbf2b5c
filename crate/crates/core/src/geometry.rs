//! Small geometric primitives shared by the voxel grid, the tracer and the
//! refiner.

use glam::DVec3;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb { min: DVec3::splat(f64::INFINITY), max: DVec3::splat(f64::NEG_INFINITY) };

    pub fn new(min: DVec3, max: DVec3) -> Self {
        Self { min, max }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn grow(&mut self, p: DVec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self { min: self.min - DVec3::splat(margin), max: self.max + DVec3::splat(margin) }
    }

    pub fn center(&self) -> DVec3 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    /// Parametric overlap of the ray `origin + t * dir` with the box, clipped
    /// to `[t_min, t_max]`. Slab test; zero direction components are handled
    /// through IEEE infinities.
    pub fn clip_ray(&self, origin: DVec3, dir: DVec3, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
        let mut lo = t_min;
        let mut hi = t_max;
        for axis in 0..3 {
            let o = origin[axis];
            let d = dir[axis];
            if d == 0.0 {
                if o < self.min[axis] || o > self.max[axis] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let mut t0 = (self.min[axis] - o) * inv;
            let mut t1 = (self.max[axis] - o) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            lo = lo.max(t0);
            hi = hi.min(t1);
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }
}

/// Bounding sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: DVec3,
    pub radius: f64,
}

/// Oriented plane through `point`; the accepted side is where the signed
/// distance is non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: DVec3,
    pub normal: DVec3,
}

impl Plane {
    pub fn signed_distance(&self, q: DVec3) -> f64 {
        (q - self.point).dot(self.normal)
    }
}

/// Conservative cone–sphere overlap: the sphere intersects the cone with apex
/// `apex`, axis `axis` (unit) and half-angle `half_angle` iff the angle between
/// `center - apex` and the axis is at most `half_angle + asin(r / |center - apex|)`.
/// An apex inside the sphere always counts as overlapping.
pub fn cone_intersects_sphere(apex: DVec3, axis: DVec3, half_angle: f64, sphere: &Sphere) -> bool {
    let to_center = sphere.center - apex;
    let dist = to_center.length();
    if dist <= sphere.radius {
        return true;
    }
    let widen = (sphere.radius / dist).min(1.0).asin();
    let limit = half_angle + widen;
    if limit >= std::f64::consts::PI {
        return true;
    }
    let cos_angle = (to_center.dot(axis) / dist).clamp(-1.0, 1.0);
    cos_angle >= limit.cos()
}

/// Angle between two (not necessarily unit) vectors, in radians.
pub fn angle_between(a: DVec3, b: DVec3) -> f64 {
    // atan2 form keeps precision for nearly parallel vectors.
    a.cross(b).length().atan2(a.dot(b))
}

/// Mirror `dir` about the plane with unit normal `normal`.
pub fn reflect(dir: DVec3, normal: DVec3) -> DVec3 {
    dir - 2.0 * dir.dot(normal) * normal
}

/// Deterministic orthonormal completion of a unit vector: returns `(u, v)`
/// with `u x v = n`. The pivot axis is the coordinate axis least aligned with
/// `n`; ties go to the later axis, so `+z` maps to `u = x, v = y`.
pub fn orthonormal_basis(n: DVec3) -> (DVec3, DVec3) {
    let a = n.abs();
    let pivot = if a.z <= a.x && a.z <= a.y {
        DVec3::Z
    } else if a.y <= a.x {
        DVec3::Y
    } else {
        DVec3::X
    };
    let u = pivot.cross(n).normalize();
    let v = n.cross(u);
    (u, v)
}

/// Total order on vectors used wherever output must be canonical.
pub fn cmp_vec(a: DVec3, b: DVec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

/// Length of the polyline through `points`.
pub fn polyline_length(points: &[DVec3]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}
