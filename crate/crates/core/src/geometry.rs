//! Shared geometric primitives: poses, axis-aligned boxes and ray queries.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::scalar::{cast, Scalar};

/// Position plus heading. Pitch/roll are not modeled; the sensor frustum is
/// yawed about the vertical axis only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<F: Scalar> {
    pub position: Vector3<F>,
    pub yaw: F,
}

impl<F: Scalar> Pose<F> {
    pub fn new(position: Vector3<F>, yaw: F) -> Self {
        Self { position, yaw }
    }
}

/// Wrap an angle to `[-pi, pi)`.
pub fn wrap_angle<F: Scalar>(a: F) -> F {
    let two_pi = F::two_pi();
    let x = (a + F::pi()) / two_pi;
    let frac = x - x.floor();
    frac * two_pi - F::pi()
}

/// Smallest signed difference `b - a`, wrapped to `[-pi, pi)`.
pub fn angle_diff<F: Scalar>(a: F, b: F) -> F {
    wrap_angle(b - a)
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<F: Scalar> {
    pub min: Vector3<F>,
    pub max: Vector3<F>,
}

impl<F: Scalar> Aabb<F> {
    pub fn new(min: Vector3<F>, max: Vector3<F>) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> Vector3<F> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<F> {
        (self.min + self.max) * cast::<F>(0.5)
    }

    pub fn contains(&self, p: &Vector3<F>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Strict interior test with a margin pushed inward on every face.
    pub fn contains_inflated(&self, p: &Vector3<F>, margin: F) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - margin && p[i] <= self.max[i] + margin)
    }

    pub fn intersects(&self, other: &Aabb<F>) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && self.max[i] >= other.min[i])
    }

    /// Horizontal (x/y) distance from `p` to the nearest vertical face.
    /// Negative values never occur; points outside report 0.
    pub fn horizontal_face_distance(&self, p: &Vector3<F>) -> F {
        let mut d = F::max_value().unwrap();
        for i in 0..2 {
            d = d.min(p[i] - self.min[i]).min(self.max[i] - p[i]);
        }
        d.max(F::zero())
    }

    /// Slab-method ray/box intersection. Returns the entry and exit
    /// parameters along `dir` (unnormalized allowed) when the ray hits.
    pub fn ray_intersection(&self, origin: &Vector3<F>, dir: &Vector3<F>) -> Option<(F, F)> {
        let mut t0 = F::zero();
        let mut t1 = F::max_value().unwrap();
        for i in 0..3 {
            if dir[i] == F::zero() {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
            } else {
                let inv = F::one() / dir[i];
                let mut near = (self.min[i] - origin[i]) * inv;
                let mut far = (self.max[i] - origin[i]) * inv;
                if near > far {
                    std::mem::swap(&mut near, &mut far);
                }
                t0 = t0.max(near);
                t1 = t1.min(far);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }
}

/// First positive intersection parameter of a ray with a sphere, if any.
pub fn ray_sphere<F: Scalar>(
    origin: &Vector3<F>,
    dir: &Vector3<F>,
    center: &Vector3<F>,
    radius: F,
) -> Option<F> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(&oc) - radius * radius;
    if c <= F::zero() {
        // Origin inside the sphere: blocked immediately.
        return Some(F::zero());
    }
    let disc = b * b - c;
    if disc < F::zero() {
        return None;
    }
    let t = -b - disc.sqrt();
    if t >= F::zero() {
        Some(t)
    } else {
        None
    }
}

/// First positive intersection of a ray with a finite vertical cylinder
/// (axis along z, base at `base_z`, top at `base_z + height`).
pub fn ray_vertical_cylinder<F: Scalar>(
    origin: &Vector3<F>,
    dir: &Vector3<F>,
    center_xy: (F, F),
    radius: F,
    base_z: F,
    height: F,
) -> Option<F> {
    let ox = origin.x - center_xy.0;
    let oy = origin.y - center_xy.1;
    let a = dir.x * dir.x + dir.y * dir.y;
    let top_z = base_z + height;
    let in_z = |t: F| {
        let z = origin.z + dir.z * t;
        z >= base_z && z <= top_z
    };

    let mut best: Option<F> = None;
    let mut consider = |t: F| {
        if t >= F::zero() && in_z(t) {
            best = Some(best.map_or(t, |b: F| b.min(t)));
        }
    };

    if a > F::zero() {
        let b = ox * dir.x + oy * dir.y;
        let c = ox * ox + oy * oy - radius * radius;
        if c <= F::zero() && origin.z >= base_z && origin.z <= top_z {
            return Some(F::zero());
        }
        let disc = b * b - a * c;
        if disc >= F::zero() {
            let sq = disc.sqrt();
            consider((-b - sq) / a);
            consider((-b + sq) / a);
        }
    } else if ox * ox + oy * oy <= radius * radius {
        // Vertical ray within the radial footprint: caps only.
        if origin.z >= base_z && origin.z <= top_z {
            return Some(F::zero());
        }
    }

    // End caps.
    if dir.z != F::zero() {
        for cap_z in [base_z, top_z] {
            let t = (cap_z - origin.z) / dir.z;
            if t >= F::zero() {
                let x = origin.x + dir.x * t - center_xy.0;
                let y = origin.y + dir.y * t - center_xy.1;
                if x * x + y * y <= radius * radius {
                    best = Some(best.map_or(t, |b: F| b.min(t)));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = 0.37 * k as f64;
            let w = wrap_angle(a);
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
            let turns = (w - a) / (2.0 * std::f64::consts::PI);
            assert!((turns - turns.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn ray_box_hit_and_miss() {
        let b = Aabb::new(Vector3::new(1.0, -1.0, -1.0), Vector3::new(2.0, 1.0, 1.0));
        let (t0, t1) = b
            .ray_intersection(&Vector3::zeros(), &Vector3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert_relative_eq!(t0, 1.0);
        assert_relative_eq!(t1, 2.0);
        assert!(b
            .ray_intersection(&Vector3::zeros(), &Vector3::new(0.0, 1.0, 0.0))
            .is_none());
    }

    #[test]
    fn ray_sphere_front_hit() {
        let t = ray_sphere(
            &Vector3::zeros(),
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(3.0, 0.0, 0.0),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(t, 2.0);
    }

    #[test]
    fn ray_cylinder_side_and_cap() {
        // Side hit.
        let t = ray_vertical_cylinder(
            &Vector3::new(-2.0, 0.0, 0.9),
            &Vector3::new(1.0, 0.0, 0.0),
            (0.0, 0.0),
            0.3,
            0.0,
            1.8,
        )
        .unwrap();
        assert_relative_eq!(t, 1.7);
        // Over the top: no hit.
        assert!(ray_vertical_cylinder(
            &Vector3::new(-2.0, 0.0, 2.5),
            &Vector3::new(1.0, 0.0, 0.0),
            (0.0, 0.0),
            0.3,
            0.0,
            1.8,
        )
        .is_none());
        // Cap hit from above.
        let t = ray_vertical_cylinder(
            &Vector3::new(0.0, 0.0, 3.0),
            &Vector3::new(0.0, 0.0, -1.0),
            (0.0, 0.0),
            0.3,
            0.0,
            1.8,
        )
        .unwrap();
        assert_relative_eq!(t, 1.2);
    }
}
