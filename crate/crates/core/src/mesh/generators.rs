//! Mesh generators for the surface catalogue.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{reference_normal, MeshError, MeshOrigin, Triangulation};
use crate::geom::Vec3;
use crate::surface::{Surface, SurfaceKind};

fn sphere_radius(surface: &Surface) -> Result<f64, MeshError> {
    match surface.kind() {
        SurfaceKind::Sphere { radius } => Ok(radius),
        _ => Err(MeshError::WrongSurfaceKind { expected: "sphere" }),
    }
}

/// Flips triangles whose corner order disagrees with the surface normal.
fn orient(surface: &Surface, vertices: &[Vec3], triangles: &mut [[usize; 3]]) {
    for t in triangles.iter_mut() {
        let [a, b, c] = t.map(|i| vertices[i]);
        if (b - a)
            .cross(&(c - a))
            .dot(&reference_normal(surface, &a, &b, &c))
            < 0.0
        {
            t.swap(1, 2);
        }
    }
}

/// Icosahedron subdivided `level` times, vertices pushed radially onto the sphere.
pub fn icosphere(surface: &Surface, level: u32) -> Result<Triangulation, MeshError> {
    let radius = sphere_radius(surface)?;
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut unit: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, unit: &mut Vec<Vec3>| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            *cache.entry(key).or_insert_with(|| {
                unit.push(((unit[a] + unit[b]) * 0.5).normalize());
                unit.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut unit);
            let bc = midpoint(b, c, &mut unit);
            let ca = midpoint(c, a, &mut unit);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices: Vec<Vec3> = unit.into_iter().map(|p| p * radius).collect();
    orient(surface, &vertices, &mut faces);
    Triangulation::new(*surface, vertices, faces, MeshOrigin::Icosphere { level })
}

/// Faces of the cube `[-1, 1]^3`, identified by outward axis and sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeFace {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] = [
        CubeFace::PosX,
        CubeFace::NegX,
        CubeFace::PosY,
        CubeFace::NegY,
        CubeFace::PosZ,
        CubeFace::NegZ,
    ];

    fn axis_sign(self) -> (usize, bool) {
        match self {
            CubeFace::PosX => (0, true),
            CubeFace::NegX => (0, false),
            CubeFace::PosY => (1, true),
            CubeFace::NegY => (1, false),
            CubeFace::PosZ => (2, true),
            CubeFace::NegZ => (2, false),
        }
    }

    /// Integer lattice coordinates on `{0..n}^3` of grid node `(i, j)` of this face.
    fn lattice(self, n: usize, i: usize, j: usize) -> [usize; 3] {
        let (k, positive) = self.axis_sign();
        let mut out = [0; 3];
        out[k] = if positive { n } else { 0 };
        out[(k + 1) % 3] = i;
        out[(k + 2) % 3] = j;
        out
    }
}

fn lattice_point(radius: f64, n: usize, l: [usize; 3]) -> Vec3 {
    let q = Vec3::new(
        2.0 * l[0] as f64 / n as f64 - 1.0,
        2.0 * l[1] as f64 / n as f64 - 1.0,
        2.0 * l[2] as f64 / n as f64 - 1.0,
    );
    q * (radius / q.norm())
}

/// Position of grid node `(i, j)`, `0 <= i, j <= n`, of `face` in the cubed sphere of resolution `n`.
pub fn cubed_sphere_vertex(radius: f64, n: usize, face: CubeFace, i: usize, j: usize) -> Vec3 {
    lattice_point(radius, n, face.lattice(n, i, j))
}

/// Inscribed cube with every face split into an `n x n` grid of squares, each square cut into
/// two isosceles right triangles, then mapped to the sphere by `x -> R x / |x|`.
///
/// Diagonals follow a "union jack" pattern: inside each quadrant of a face they point towards
/// the face centre, so the pattern is symmetric under the face's symmetry group.
pub fn cubed_sphere(surface: &Surface, n: usize) -> Result<Triangulation, MeshError> {
    let radius = sphere_radius(surface)?;
    if n < 1 {
        return Err(MeshError::ResolutionTooLow(
            "cubed sphere needs n >= 1".into(),
        ));
    }
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::with_capacity(12 * n * n);
    for face in CubeFace::ALL {
        let mut id = |i: usize, j: usize| -> usize {
            let l = face.lattice(n, i, j);
            *index.entry(l).or_insert_with(|| {
                vertices.push(lattice_point(radius, n, l));
                vertices.len() - 1
            })
        };
        for i in 0..n {
            for j in 0..n {
                let a = id(i, j);
                let b = id(i + 1, j);
                let c = id(i + 1, j + 1);
                let d = id(i, j + 1);
                let left = 2 * i + 1 < n;
                let below = 2 * j + 1 < n;
                if left == below {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                } else {
                    faces.push([a, b, d]);
                    faces.push([b, c, d]);
                }
            }
        }
    }
    orient(surface, &vertices, &mut faces);
    Triangulation::new(*surface, vertices, faces, MeshOrigin::CubedSphere { n })
}

/// Structured `n_major x n_minor` parametric grid on the torus with alternating diagonals.
pub fn torus_mesh(
    surface: &Surface,
    n_major: usize,
    n_minor: usize,
) -> Result<Triangulation, MeshError> {
    if !matches!(surface.kind(), SurfaceKind::Torus { .. }) {
        return Err(MeshError::WrongSurfaceKind { expected: "torus" });
    }
    if n_major < 3 || n_minor < 3 {
        return Err(MeshError::ResolutionTooLow(format!(
            "torus mesh needs n_major, n_minor >= 3, got {n_major} x {n_minor}"
        )));
    }
    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            vertices.push(surface.chart(
                2.0 * PI * i as f64 / n_major as f64,
                2.0 * PI * j as f64 / n_minor as f64,
            ));
        }
    }
    let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut faces = Vec::with_capacity(2 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    orient(surface, &vertices, &mut faces);
    Triangulation::new(
        *surface,
        vertices,
        faces,
        MeshOrigin::Torus { n_major, n_minor },
    )
}

/// Latitude-longitude sphere: a uniform grid in spherical coordinates with triangle fans at the
/// poles. Kept as a fixture that violates quasi-uniformity.
pub fn uv_sphere(
    surface: &Surface,
    n_lat: usize,
    n_lon: usize,
) -> Result<Triangulation, MeshError> {
    let radius = sphere_radius(surface)?;
    if n_lat < 2 || n_lon < 3 {
        return Err(MeshError::ResolutionTooLow(
            "uv sphere needs n_lat >= 2, n_lon >= 3".into(),
        ));
    }
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for k in 1..n_lat {
        let polar = PI * k as f64 / n_lat as f64;
        for l in 0..n_lon {
            let az = 2.0 * PI * l as f64 / n_lon as f64;
            vertices.push(
                radius * Vec3::new(polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()),
            );
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let south = vertices.len() - 1;
    let ring = |k: usize, l: usize| 1 + (k - 1) * n_lon + (l % n_lon);
    let mut faces = Vec::new();
    for l in 0..n_lon {
        faces.push([0, ring(1, l), ring(1, l + 1)]);
        faces.push([south, ring(n_lat - 1, l + 1), ring(n_lat - 1, l)]);
    }
    for k in 1..n_lat - 1 {
        for l in 0..n_lon {
            faces.push([ring(k, l), ring(k + 1, l), ring(k + 1, l + 1)]);
            faces.push([ring(k, l), ring(k + 1, l + 1), ring(k, l + 1)]);
        }
    }
    orient(surface, &vertices, &mut faces);
    Triangulation::new(
        *surface,
        vertices,
        faces,
        MeshOrigin::UvSphere { n_lat, n_lon },
    )
}

/// Structured patch of the graph surface over `[x0, x0 + nx h] x [y0, y0 + ny h]`, each square
/// split by its `(i, j)-(i+1, j+1)` diagonal into two isosceles right triangles.
pub fn planar_grid(
    surface: &Surface,
    origin: [f64; 2],
    spacing: f64,
    nx: usize,
    ny: usize,
) -> Result<Triangulation, MeshError> {
    if !matches!(surface.kind(), SurfaceKind::GraphBump { .. }) {
        return Err(MeshError::WrongSurfaceKind { expected: "graph" });
    }
    if nx < 1 || ny < 1 || !(spacing > 0.0) {
        return Err(MeshError::ResolutionTooLow(
            "planar grid needs nx, ny >= 1 and spacing > 0".into(),
        ));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            vertices.push(surface.chart(
                origin[0] + i as f64 * spacing,
                origin[1] + j as f64 * spacing,
            ));
        }
    }
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    orient(surface, &vertices, &mut faces);
    Triangulation::new(
        *surface,
        vertices,
        faces,
        MeshOrigin::PlanarGrid {
            origin,
            spacing,
            nx,
            ny,
        },
    )
}

/// Planar annulus `r_in <= |x| <= r_out` with geometrically graded rings, so that every cell is
/// (nearly) a conformal square; `n_angular` cells per ring.
pub fn annulus_mesh(
    surface: &Surface,
    inner_radius: f64,
    outer_radius: f64,
    n_angular: usize,
) -> Result<Triangulation, MeshError> {
    if !surface.is_plane() {
        return Err(MeshError::WrongSurfaceKind { expected: "plane" });
    }
    if n_angular < 3 || !(inner_radius > 0.0) || !(outer_radius > inner_radius) {
        return Err(MeshError::ResolutionTooLow(
            "annulus needs n_angular >= 3 and 0 < r_in < r_out".into(),
        ));
    }
    let log_ratio = (outer_radius / inner_radius).ln();
    let rings = (log_ratio / (2.0 * PI / n_angular as f64)).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity((rings + 1) * n_angular);
    for k in 0..=rings {
        let r = inner_radius * (log_ratio * k as f64 / rings as f64).exp();
        for l in 0..n_angular {
            let a = 2.0 * PI * l as f64 / n_angular as f64;
            vertices.push(Vec3::new(r * a.cos(), r * a.sin(), 0.0));
        }
    }
    let id = |k: usize, l: usize| k * n_angular + (l % n_angular);
    let mut faces = Vec::with_capacity(2 * rings * n_angular);
    for k in 0..rings {
        for l in 0..n_angular {
            let (a, b, c, d) = (id(k, l), id(k + 1, l), id(k + 1, l + 1), id(k, l + 1));
            if (k + l) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    orient(surface, &vertices, &mut faces);
    Triangulation::new(
        *surface,
        vertices,
        faces,
        MeshOrigin::Annulus {
            inner_radius,
            outer_radius,
            n_angular,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> Surface {
        Surface::sphere(1.0).unwrap()
    }

    #[test]
    fn icosphere_counts() {
        let s = unit_sphere();
        let t0 = icosphere(&s, 0).unwrap();
        assert_eq!(
            (t0.num_vertices(), t0.num_triangles(), t0.edges().len()),
            (12, 20, 30)
        );
        for level in 1..=4u32 {
            let t = icosphere(&s, level).unwrap();
            let f = 20 * 4usize.pow(level);
            assert_eq!(t.num_triangles(), f);
            assert_eq!(t.num_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(t.euler_characteristic(), 2);
            assert!(t.is_closed());
        }
    }

    #[test]
    fn icosphere_level3_is_weakly_acute() {
        let t = icosphere(&unit_sphere(), 3).unwrap();
        let min = t.stiffness().min_kappa();
        assert!(min >= 0.0);
        // Pinned from the generated mesh.
        assert!(
            (min - 0.335_675_277_061_221).abs() < 1e-9,
            "min kappa {min}"
        );
    }

    #[test]
    fn cubed_sphere_counts() {
        let s = unit_sphere();
        let t1 = cubed_sphere(&s, 1).unwrap();
        assert_eq!((t1.num_vertices(), t1.num_triangles()), (8, 12));
        for n in [2, 3, 5, 8] {
            let t = cubed_sphere(&s, n).unwrap();
            assert_eq!(t.euler_characteristic(), 2);
            assert_eq!(t.num_vertices(), 6 * n * n + 2);
        }
    }

    #[test]
    fn torus_counts_and_guards() {
        let s = Surface::torus(2.0, 0.5).unwrap();
        let t = torus_mesh(&s, 3, 3).unwrap();
        assert_eq!(
            (t.num_vertices(), t.num_triangles(), t.edges().len()),
            (9, 18, 27)
        );
        assert_eq!(t.euler_characteristic(), 0);
        assert!(matches!(
            torus_mesh(&s, 2, 5),
            Err(MeshError::ResolutionTooLow(_))
        ));
        assert!(matches!(
            torus_mesh(&unit_sphere(), 8, 8),
            Err(MeshError::WrongSurfaceKind { .. })
        ));
        assert!(matches!(
            icosphere(&s, 1),
            Err(MeshError::WrongSurfaceKind { .. })
        ));
    }

    #[test]
    fn generators_are_deterministic() {
        let s = unit_sphere();
        let a = icosphere(&s, 3).unwrap();
        let b = icosphere(&s, 3).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.triangles(), b.triangles());
        assert_eq!(a.content_hash(), b.content_hash());
        let c = cubed_sphere(&s, 6).unwrap();
        let d = cubed_sphere(&s, 6).unwrap();
        assert_eq!(c.content_hash(), d.content_hash());
    }

    #[test]
    fn cubed_sphere_vertex_matches_mesh() {
        let s = unit_sphere();
        let n = 4;
        let t = cubed_sphere(&s, n).unwrap();
        let p = cubed_sphere_vertex(1.0, n, CubeFace::PosZ, 2, 2);
        assert!((p - Vec3::z()).norm() < 1e-15);
        let q = cubed_sphere_vertex(1.0, n, CubeFace::NegY, 1, 3);
        assert!(t.vertices().iter().any(|v| (v - q).norm() < 1e-15));
    }

    #[test]
    fn annulus_and_grid() {
        let plane = Surface::plane();
        let a = annulus_mesh(&plane, 0.1, 1.0, 64).unwrap();
        assert!(!a.is_closed());
        assert_eq!(a.euler_characteristic(), 0);
        let g = planar_grid(&plane, [0.0, 0.0], 0.5, 4, 3).unwrap();
        assert_eq!(g.num_vertices(), 20);
        assert_eq!(g.num_triangles(), 24);
        assert_eq!(g.euler_characteristic(), 1);
    }
}
