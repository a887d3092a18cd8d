//! Small vector helpers shared by every module.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};

/// Points and vectors in ambient space.
pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Rotates `v` by the minimal rotation that carries unit vector `from` onto unit vector `to`.
///
/// For (numerically) antiparallel normals any axis orthogonal to `from` is used.
pub fn transport_between(from: &Vec3, to: &Vec3, v: &Vec3) -> Vec3 {
    let axis = from.cross(to);
    let s = axis.norm();
    let c = from.dot(to);
    if s < 1e-15 {
        if c > 0.0 {
            return *v;
        }
        let helper = if from.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let axis = Unit::new_normalize(from.cross(&helper));
        return Rotation3::from_axis_angle(&axis, PI) * v;
    }
    let axis = Unit::new_unchecked(axis / s);
    Rotation3::from_axis_angle(&axis, s.atan2(c)) * v
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

pub fn triangle_diameter(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (b - a).norm().max((c - b).norm()).max((a - c).norm())
}

/// Interior angles at the three corners.
pub fn triangle_angles(p: [&Vec3; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let u = p[(k + 1) % 3] - p[k];
        let w = p[(k + 2) % 3] - p[k];
        out[k] = u.cross(&w).norm().atan2(u.dot(&w));
    }
    out
}

/// Cotangents of the interior angles; entry `k` belongs to the corner at vertex `k`,
/// i.e. the angle opposite the edge `(k+1, k+2)`.
pub fn triangle_cotangents(p: [&Vec3; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let u = p[(k + 1) % 3] - p[k];
        let w = p[(k + 2) % 3] - p[k];
        out[k] = u.dot(&w) / u.cross(&w).norm();
    }
    out
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn from_array(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.25), 0.25);
        assert_relative_eq!(wrap_angle(-0.25 - 4.0 * PI), -0.25, epsilon = 1e-12);
    }

    #[test]
    fn transport_maps_normal_to_normal() {
        let a = Vec3::new(1.0, 2.0, 2.0).normalize();
        let b = Vec3::new(-0.3, 0.1, 1.0).normalize();
        let t = transport_between(&a, &b, &a);
        assert_relative_eq!(t, b, epsilon = 1e-14);
        let back = transport_between(&b, &a, &transport_between(&a, &b, &Vec3::x()));
        assert_relative_eq!(back, Vec3::x(), epsilon = 1e-14);
        let flip = transport_between(&Vec3::z(), &-Vec3::z(), &Vec3::z());
        assert_relative_eq!(flip, -Vec3::z(), epsilon = 1e-14);
    }

    #[test]
    fn right_triangle_cotangents() {
        let a = Vec3::zeros();
        let b = Vec3::x();
        let c = Vec3::y();
        let cot = triangle_cotangents([&a, &b, &c]);
        assert_eq!(cot[0], 0.0);
        assert_relative_eq!(cot[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(cot[2], 1.0, epsilon = 1e-15);
        let ang = triangle_angles([&a, &b, &c]);
        assert_relative_eq!(ang.iter().sum::<f64>(), PI, epsilon = 1e-14);
    }
}
