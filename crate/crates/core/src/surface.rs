//! Closed analytic surfaces embedded in 3-space.
//!
//! Every surface in the catalogue has closed-form charts, unit normals, Gauss
//! curvature and shape operator, so the quantities the discrete model is
//! compared against never depend on a mesh.
//!
//! * `Sphere` of radius `R`, chart `(polar, azimuth)`.
//! * `Torus` with major radius `R` and minor radius `r < R`, chart
//!   `(major angle, minor angle)`.
//! * `GraphBump`: the periodic graph `z = a sin(2 pi x / w) sin(2 pi y / w)`.
//!   It is treated as a flat torus of period `w` (genus one); with `a = 0` it is
//!   the plane, which hosts every planar test fixture.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;

/// Relative on-surface tolerance (scaled by the surface diameter).
pub const ON_SURFACE_TOL: f64 = 1e-9;

/// Default refinement of the reference grid used by [`Surface::geodesic_distance`].
pub const DEFAULT_GEODESIC_REFINEMENT: usize = 96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("point is off the surface (residual {residual:e})")]
    PointOffSurface { residual: f64 },
    #[error("vector is not tangent (normal component {normal_component:e})")]
    NotTangent { normal_component: f64 },
    #[error("point at distance {distance} lies outside the tubular neighbourhood of thickness {thickness}")]
    OutsideTubularNeighbourhood { distance: f64, thickness: f64 },
    #[error("invalid surface parameters: {0}")]
    InvalidParameters(String),
    #[error("torus with minor radius {minor} >= major radius {major} self-intersects")]
    SelfIntersection { major: f64, minor: f64 },
}

/// Surface catalogue; this is also the JSON schema of the `surface` config entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceKind {
    Sphere {
        radius: f64,
    },
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    GraphBump {
        amplitude: f64,
        width: f64,
    },
}

/// A validated surface together with its tubular-neighbourhood thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    kind: SurfaceKind,
    thickness: f64,
}

impl Surface {
    pub fn new(kind: SurfaceKind) -> Result<Self, SurfaceError> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(SurfaceError::InvalidParameters(format!(
                    "{name} must be positive and finite, got {x}"
                )))
            }
        };
        match kind {
            SurfaceKind::Sphere { radius } => positive("radius", radius)?,
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                positive("major_radius", major_radius)?;
                positive("minor_radius", minor_radius)?;
                if minor_radius >= major_radius {
                    return Err(SurfaceError::SelfIntersection {
                        major: major_radius,
                        minor: minor_radius,
                    });
                }
            }
            SurfaceKind::GraphBump { amplitude, width } => {
                positive("width", width)?;
                if !amplitude.is_finite() {
                    return Err(SurfaceError::InvalidParameters(
                        "amplitude must be finite".into(),
                    ));
                }
            }
        }
        let mut s = Surface {
            kind,
            thickness: f64::INFINITY,
        };
        s.thickness = 0.9 / s.max_principal_curvature();
        Ok(s)
    }

    pub fn sphere(radius: f64) -> Result<Self, SurfaceError> {
        Self::new(SurfaceKind::Sphere { radius })
    }

    pub fn torus(major_radius: f64, minor_radius: f64) -> Result<Self, SurfaceError> {
        Self::new(SurfaceKind::Torus {
            major_radius,
            minor_radius,
        })
    }

    pub fn graph_bump(amplitude: f64, width: f64) -> Result<Self, SurfaceError> {
        Self::new(SurfaceKind::GraphBump { amplitude, width })
    }

    /// The flat plane `z = 0`, seen as a graph bump of zero amplitude.
    pub fn plane() -> Self {
        Self::graph_bump(0.0, 1.0).expect("valid plane")
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn is_plane(&self) -> bool {
        matches!(self.kind, SurfaceKind::GraphBump { amplitude, .. } if amplitude == 0.0)
    }

    pub fn genus(&self) -> u32 {
        match self.kind {
            SurfaceKind::Sphere { .. } => 0,
            SurfaceKind::Torus { .. } | SurfaceKind::GraphBump { .. } => 1,
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * self.genus() as i64
    }

    /// Extrinsic diameter; for the periodic graph this is the diameter of one period cell.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => 2.0 * radius,
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => 2.0 * (major_radius + minor_radius),
            SurfaceKind::GraphBump { amplitude, width } => {
                (2.0 * width * width + 4.0 * amplitude * amplitude).sqrt()
            }
        }
    }

    /// Thickness `h` of the tubular neighbourhood on which the nearest-point projection is defined.
    pub fn tubular_thickness(&self) -> f64 {
        self.thickness
    }

    /// Injectivity radius: exact for the sphere, a conservative lower estimate otherwise.
    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => PI * radius,
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => (PI * minor_radius).min(PI * (major_radius - minor_radius)),
            SurfaceKind::GraphBump { width, .. } => {
                let k = self.max_principal_curvature();
                if k > 0.0 {
                    (0.5 * width).min(PI / k)
                } else {
                    0.5 * width
                }
            }
        }
    }

    /// Total area (closed form for sphere and torus, one period cell for the graph).
    pub fn area(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => 4.0 * PI * radius * radius,
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => 4.0 * PI * PI * major_radius * minor_radius,
            SurfaceKind::GraphBump { .. } => self.integrate(512, |_| 1.0),
        }
    }

    /// Parameter rectangle `[u0, u1] x [v0, v1]` covering the surface once.
    pub fn parameter_domain(&self) -> ([f64; 2], [f64; 2]) {
        match self.kind {
            SurfaceKind::Sphere { .. } => ([0.0, PI], [0.0, 2.0 * PI]),
            SurfaceKind::Torus { .. } => ([0.0, 2.0 * PI], [0.0, 2.0 * PI]),
            SurfaceKind::GraphBump { width, .. } => ([0.0, width], [0.0, width]),
        }
    }

    pub fn chart(&self, u: f64, v: f64) -> Vec3 {
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                radius * Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos())
            }
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let rho = major_radius + minor_radius * v.cos();
                Vec3::new(rho * u.cos(), rho * u.sin(), minor_radius * v.sin())
            }
            SurfaceKind::GraphBump { .. } => Vec3::new(u, v, self.bump(u, v)[0]),
        }
    }

    /// Partial derivatives of the chart.
    pub fn chart_partials(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        match self.kind {
            SurfaceKind::Sphere { radius } => (
                radius * Vec3::new(u.cos() * v.cos(), u.cos() * v.sin(), -u.sin()),
                radius * Vec3::new(-u.sin() * v.sin(), u.sin() * v.cos(), 0.0),
            ),
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let rho = major_radius + minor_radius * v.cos();
                (
                    Vec3::new(-rho * u.sin(), rho * u.cos(), 0.0),
                    minor_radius * Vec3::new(-v.sin() * u.cos(), -v.sin() * u.sin(), v.cos()),
                )
            }
            SurfaceKind::GraphBump { .. } => {
                let f = self.bump(u, v);
                (Vec3::new(1.0, 0.0, f[1]), Vec3::new(0.0, 1.0, f[2]))
            }
        }
    }

    /// Chart parameters of a point on the surface.
    pub fn parameters_of(&self, p: &Vec3) -> (f64, f64) {
        match self.kind {
            SurfaceKind::Sphere { radius } => (
                (p.z / p.norm().max(radius * 1e-300))
                    .clamp(-1.0, 1.0)
                    .acos(),
                p.y.atan2(p.x).rem_euclid(2.0 * PI),
            ),
            SurfaceKind::Torus { major_radius, .. } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                (
                    p.y.atan2(p.x).rem_euclid(2.0 * PI),
                    p.z.atan2(rho - major_radius).rem_euclid(2.0 * PI),
                )
            }
            SurfaceKind::GraphBump { .. } => (p.x, p.y),
        }
    }

    /// Unit normal at a point known to lie on the surface (no residual check).
    pub fn normal_at(&self, p: &Vec3) -> Vec3 {
        match self.kind {
            SurfaceKind::Sphere { .. } => p.normalize(),
            SurfaceKind::Torus { major_radius, .. } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                let c = Vec3::new(major_radius * p.x / rho, major_radius * p.y / rho, 0.0);
                (p - c).normalize()
            }
            SurfaceKind::GraphBump { .. } => {
                let f = self.bump(p.x, p.y);
                Vec3::new(-f[1], -f[2], 1.0).normalize()
            }
        }
    }

    /// Unit normal, outward for sphere and torus, upward for the graph.
    pub fn normal(&self, p: &Vec3) -> Result<Vec3, SurfaceError> {
        self.check_on_surface(p)?;
        Ok(self.normal_at(p))
    }

    /// Gauss curvature at a point on the surface.
    pub fn gauss_curvature(&self, p: &Vec3) -> Result<f64, SurfaceError> {
        self.check_on_surface(p)?;
        Ok(self.gauss_curvature_at(p))
    }

    pub fn gauss_curvature_at(&self, p: &Vec3) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => 1.0 / (radius * radius),
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let (_, v) = self.parameters_of(p);
                v.cos() / (minor_radius * (major_radius + minor_radius * v.cos()))
            }
            SurfaceKind::GraphBump { .. } => {
                let f = self.bump(p.x, p.y);
                let w2 = 1.0 + f[1] * f[1] + f[2] * f[2];
                (f[3] * f[5] - f[4] * f[4]) / (w2 * w2)
            }
        }
    }

    /// Principal curvatures (unordered) at a point on the surface.
    pub fn principal_curvatures_at(&self, p: &Vec3) -> (f64, f64) {
        match self.kind {
            SurfaceKind::Sphere { radius } => (1.0 / radius, 1.0 / radius),
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let (_, v) = self.parameters_of(p);
                (
                    1.0 / minor_radius,
                    v.cos() / (major_radius + minor_radius * v.cos()),
                )
            }
            SurfaceKind::GraphBump { .. } => {
                let f = self.bump(p.x, p.y);
                let w2 = 1.0 + f[1] * f[1] + f[2] * f[2];
                let k = (f[3] * f[5] - f[4] * f[4]) / (w2 * w2);
                let h = ((1.0 + f[2] * f[2]) * f[3] - 2.0 * f[1] * f[2] * f[4]
                    + (1.0 + f[1] * f[1]) * f[5])
                    / (2.0 * w2.powf(1.5));
                let disc = (h * h - k).max(0.0).sqrt();
                (h + disc, h - disc)
            }
        }
    }

    /// Shape operator `d gamma[X]` for a tangent vector `X`.
    pub fn shape_operator(&self, p: &Vec3, x: &Vec3) -> Result<Vec3, SurfaceError> {
        self.check_on_surface(p)?;
        let n = self.normal_at(p);
        let normal_component = x.dot(&n);
        if normal_component.abs() > 1e-9 * x.norm().max(f64::MIN_POSITIVE) {
            return Err(SurfaceError::NotTangent { normal_component });
        }
        Ok(self.shape_operator_at(p, x))
    }

    /// Shape operator applied to the tangential part of `x`, without checks.
    pub fn shape_operator_at(&self, p: &Vec3, x: &Vec3) -> Vec3 {
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                let n = p.normalize();
                (x - n * n.dot(x)) / radius
            }
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let (u, v) = self.parameters_of(p);
                let rho = major_radius + minor_radius * v.cos();
                let e_u = Vec3::new(-u.sin(), u.cos(), 0.0);
                let e_v = Vec3::new(-v.sin() * u.cos(), -v.sin() * u.sin(), v.cos());
                e_u * (x.dot(&e_u) * v.cos() / rho) + e_v * (x.dot(&e_v) / minor_radius)
            }
            SurfaceKind::GraphBump { .. } => {
                let f = self.bump(p.x, p.y);
                let raw = Vec3::new(-f[1], -f[2], 1.0);
                let w = raw.norm();
                let n = raw / w;
                let (cu, cv) = self.chart_partials(p.x, p.y);
                // Derivatives of the unnormalized normal, then of the unit normal.
                let nu = Vec3::new(-f[3], -f[4], 0.0);
                let nv = Vec3::new(-f[4], -f[5], 0.0);
                let gu = (nu - n * n.dot(&nu)) / w;
                let gv = (nv - n * n.dot(&nv)) / w;
                let (a, b) = solve_tangent_coords(&cu, &cv, x);
                gu * a + gv * b
            }
        }
    }

    /// Orthogonal projection of `x` onto the tangent plane at surface point `p`.
    pub fn tangent_part(&self, p: &Vec3, x: &Vec3) -> Vec3 {
        let n = self.normal_at(p);
        x - n * n.dot(x)
    }

    /// Nearest-point projection onto the surface.
    pub fn project(&self, x: &Vec3) -> Result<Vec3, SurfaceError> {
        let h = self.thickness;
        let outside = |distance: f64| SurfaceError::OutsideTubularNeighbourhood {
            distance,
            thickness: h,
        };
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                let r = x.norm();
                if (r - radius).abs() >= h {
                    return Err(outside((r - radius).abs()));
                }
                Ok(x * (radius / r))
            }
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                if rho == 0.0 {
                    return Err(outside(major_radius.hypot(x.z) - minor_radius));
                }
                let c = Vec3::new(major_radius * x.x / rho, major_radius * x.y / rho, 0.0);
                let d = x - c;
                let dn = d.norm();
                if (dn - minor_radius).abs() >= h || dn == 0.0 {
                    return Err(outside((dn - minor_radius).abs()));
                }
                Ok(c + d * (minor_radius / dn))
            }
            SurfaceKind::GraphBump { .. } => {
                let q = self.project_graph(x);
                let dist = (x - q).norm();
                if dist >= h {
                    return Err(outside(dist));
                }
                Ok(q)
            }
        }
    }

    /// Newton iteration for the nearest point on the graph.
    fn project_graph(&self, x: &Vec3) -> Vec3 {
        if self.is_plane() {
            return Vec3::new(x.x, x.y, 0.0);
        }
        let (mut u, mut v) = (x.x, x.y);
        for _ in 0..60 {
            let f = self.bump(u, v);
            let c = Vec3::new(u, v, f[0]);
            let cu = Vec3::new(1.0, 0.0, f[1]);
            let cv = Vec3::new(0.0, 1.0, f[2]);
            let cuu = Vec3::new(0.0, 0.0, f[3]);
            let cuv = Vec3::new(0.0, 0.0, f[4]);
            let cvv = Vec3::new(0.0, 0.0, f[5]);
            let r = c - x;
            let gu = r.dot(&cu);
            let gv = r.dot(&cv);
            let huu = cu.dot(&cu) + r.dot(&cuu);
            let huv = cu.dot(&cv) + r.dot(&cuv);
            let hvv = cv.dot(&cv) + r.dot(&cvv);
            let det = huu * hvv - huv * huv;
            let (du, dv) = if det > 1e-300 {
                ((hvv * gu - huv * gv) / det, (huu * gv - huv * gu) / det)
            } else {
                (gu, gv)
            };
            u -= du;
            v -= dv;
            if du.abs().max(dv.abs()) < 1e-15 * (1.0 + u.abs().max(v.abs())) {
                break;
            }
        }
        self.chart(u, v)
    }

    /// Distance from `p` to its projection, relative to the surface diameter.
    pub fn on_surface_residual(&self, p: &Vec3) -> f64 {
        match self.project(p) {
            Ok(q) => (p - q).norm() / self.diameter(),
            Err(_) => f64::INFINITY,
        }
    }

    fn check_on_surface(&self, p: &Vec3) -> Result<(), SurfaceError> {
        let residual = self.on_surface_residual(p);
        if residual > ON_SURFACE_TOL {
            return Err(SurfaceError::PointOffSurface { residual });
        }
        Ok(())
    }

    /// Geodesic distance: exact on the sphere and the plane, otherwise a shortest path on a
    /// reference grid with [`DEFAULT_GEODESIC_REFINEMENT`] cells along the short direction.
    pub fn geodesic_distance(&self, p: &Vec3, q: &Vec3) -> Result<f64, SurfaceError> {
        self.geodesic_distance_with_refinement(p, q, DEFAULT_GEODESIC_REFINEMENT)
    }

    pub fn geodesic_distance_with_refinement(
        &self,
        p: &Vec3,
        q: &Vec3,
        refinement: usize,
    ) -> Result<f64, SurfaceError> {
        self.check_on_surface(p)?;
        self.check_on_surface(q)?;
        if p == q {
            return Ok(0.0);
        }
        Ok(match self.kind {
            SurfaceKind::Sphere { radius } => radius * p.cross(q).norm().atan2(p.dot(q)),
            _ if self.is_plane() => (p - q).norm(),
            _ => self.reference_graph_distance(p, q, refinement.max(8)),
        })
    }

    /// Cheap distance used for proximity tests between nearby points: exact geodesic distance on
    /// the sphere and the plane, chord length elsewhere.
    pub fn proximity_distance(&self, p: &Vec3, q: &Vec3) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                let a = p.normalize();
                let b = q.normalize();
                radius * a.cross(&b).norm().atan2(a.dot(&b))
            }
            _ => (p - q).norm(),
        }
    }

    fn reference_graph_distance(&self, p: &Vec3, q: &Vec3, refinement: usize) -> f64 {
        let (pu, pv) = self.parameters_of(p);
        let (qu, qv) = self.parameters_of(q);
        // Grid description: origin, spacing, counts and periodicity in both directions.
        let (origin, step, counts, periodic) = match self.kind {
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let nv = refinement;
                let nu = ((refinement as f64) * (major_radius + minor_radius) / minor_radius).ceil()
                    as usize;
                (
                    (0.0, 0.0),
                    (2.0 * PI / nu as f64, 2.0 * PI / nv as f64),
                    (nu, nv),
                    true,
                )
            }
            SurfaceKind::GraphBump { width, .. } => {
                let h = width / refinement as f64;
                let span = (pu - qu).hypot(pv - qv);
                let margin = 0.25 * span + 2.0 * h;
                let u0 = pu.min(qu) - margin;
                let v0 = pv.min(qv) - margin;
                let nu = (((pu.max(qu) + margin) - u0) / h).ceil() as usize + 1;
                let nv = (((pv.max(qv) + margin) - v0) / h).ceil() as usize + 1;
                ((u0, v0), (h, h), (nu, nv), false)
            }
            SurfaceKind::Sphere { .. } => unreachable!("sphere distances are exact"),
        };
        let (nu, nv) = counts;
        let grid_count = nu * nv;
        let node_point = |k: usize| {
            let (i, j) = (k / nv, k % nv);
            self.chart(origin.0 + i as f64 * step.0, origin.1 + j as f64 * step.1)
        };
        let index = |i: i64, j: i64| -> Option<usize> {
            if periodic {
                Some((i.rem_euclid(nu as i64) as usize) * nv + j.rem_euclid(nv as i64) as usize)
            } else if i >= 0 && j >= 0 && (i as usize) < nu && (j as usize) < nv {
                Some(i as usize * nv + j as usize)
            } else {
                None
            }
        };
        let stencil: [(i64, i64); 8] = [
            (1, 0),
            (0, 1),
            (1, 1),
            (1, -1),
            (1, 2),
            (2, 1),
            (1, -2),
            (2, -1),
        ];
        let source = grid_count;
        let target = grid_count + 1;
        let cell = |u: f64, v: f64| {
            (
                ((u - origin.0) / step.0).round() as i64,
                ((v - origin.1) / step.1).round() as i64,
            )
        };
        let anchors = |u: f64, v: f64| {
            let (ci, cj) = cell(u, v);
            let mut out = Vec::new();
            for di in -2..=2 {
                for dj in -2..=2 {
                    if let Some(k) = index(ci + di, cj + dj) {
                        out.push(k);
                    }
                }
            }
            out
        };
        let p_anchor = anchors(pu, pv);
        let q_anchor = anchors(qu, qv);

        let mut dist = vec![f64::INFINITY; grid_count + 2];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem(0.0, source));
        let direct = (p - q).norm();
        let near_target = {
            let (pi, pj) = cell(pu, pv);
            let (qi, qj) = cell(qu, qv);
            (pi - qi).abs() <= 2 && (pj - qj).abs() <= 2
        };
        while let Some(HeapItem(d, k)) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            if k == target {
                return d;
            }
            let mut relax = |m: usize, w: f64, heap: &mut BinaryHeap<HeapItem>| {
                if d + w < dist[m] {
                    dist[m] = d + w;
                    heap.push(HeapItem(d + w, m));
                }
            };
            if k == source {
                for &m in &p_anchor {
                    relax(m, (p - node_point(m)).norm(), &mut heap);
                }
                if near_target {
                    relax(target, direct, &mut heap);
                }
                continue;
            }
            let x = node_point(k);
            let (i, j) = ((k / nv) as i64, (k % nv) as i64);
            for &(di, dj) in &stencil {
                for s in [1, -1] {
                    if let Some(m) = index(i + s * di, j + s * dj) {
                        relax(m, (x - node_point(m)).norm(), &mut heap);
                    }
                }
            }
            if q_anchor.contains(&k) {
                relax(target, (x - q).norm(), &mut heap);
            }
        }
        dist[target]
    }

    /// Midpoint-rule quadrature of `f` over the surface on an `n x n` parameter grid.
    pub fn integrate(&self, n: usize, f: impl Fn(&Vec3) -> f64) -> f64 {
        let ([u0, u1], [v0, v1]) = self.parameter_domain();
        let du = (u1 - u0) / n as f64;
        let dv = (v1 - v0) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let u = u0 + (i as f64 + 0.5) * du;
            let mut row = 0.0;
            for j in 0..n {
                let v = v0 + (j as f64 + 0.5) * dv;
                let (cu, cv) = self.chart_partials(u, v);
                row += f(&self.chart(u, v)) * cu.cross(&cv).norm();
            }
            total += row;
        }
        total * du * dv
    }

    /// `int_M G dS` by midpoint quadrature; Gauss-Bonnet says this is `2 pi chi`.
    pub fn total_gauss_curvature(&self, n: usize) -> f64 {
        self.integrate(n, |p| self.gauss_curvature_at(p))
    }

    /// Largest absolute principal curvature; exact for sphere and torus, grid-sampled for the graph.
    pub fn max_principal_curvature(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => 1.0 / radius,
            SurfaceKind::Torus { minor_radius, .. } => 1.0 / minor_radius,
            SurfaceKind::GraphBump { width, .. } => {
                let n = 128;
                let mut k: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let p =
                            self.chart(width * i as f64 / n as f64, width * j as f64 / n as f64);
                        let (a, b) = self.principal_curvatures_at(&p);
                        k = k.max(a.abs()).max(b.abs());
                    }
                }
                k
            }
        }
    }

    /// Sup of `|d gamma|^2` over unit tangent vectors, i.e. the squared operator norm.
    pub fn max_shape_operator_norm_sq(&self) -> f64 {
        let k = self.max_principal_curvature();
        k * k
    }

    /// `[f, f_u, f_v, f_uu, f_uv, f_vv]` for the graph height function.
    fn bump(&self, u: f64, v: f64) -> [f64; 6] {
        let SurfaceKind::GraphBump { amplitude, width } = self.kind else {
            unreachable!("bump() is only used for graph surfaces")
        };
        let k = 2.0 * PI / width;
        let (su, cu) = (k * u).sin_cos();
        let (sv, cv) = (k * v).sin_cos();
        let a = amplitude;
        [
            a * su * sv,
            a * k * cu * sv,
            a * k * su * cv,
            -a * k * k * su * sv,
            a * k * k * cu * cv,
            -a * k * k * su * sv,
        ]
    }
}

/// Coordinates `(a, b)` of the tangential vector `x = a cu + b cv` (least squares).
fn solve_tangent_coords(cu: &Vec3, cv: &Vec3, x: &Vec3) -> (f64, f64) {
    let g11 = cu.dot(cu);
    let g12 = cu.dot(cv);
    let g22 = cv.dot(cv);
    let r1 = cu.dot(x);
    let r2 = cv.dot(x);
    let det = g11 * g22 - g12 * g12;
    ((g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
