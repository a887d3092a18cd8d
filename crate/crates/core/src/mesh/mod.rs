//! Triangulations of analytic surfaces and their stiffness coefficients.

mod ball;
mod generators;
mod hypotheses;
mod off;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::{triangle_area, triangle_cotangents, triangle_diameter, Vec3};
use crate::surface::{Surface, SurfaceError, ON_SURFACE_TOL};

pub use ball::{discrete_ball, geodesic_distances_from, DiscreteBall};
pub use generators::{
    annulus_mesh, cubed_sphere, cubed_sphere_vertex, icosphere, planar_grid, torus_mesh, uv_sphere,
    CubeFace,
};
pub use hypotheses::{
    h4_displacement, validate_hypotheses, H1Report, H2Report, H3Report, H4Report, HypothesisReport,
    HypothesisThresholds,
};
pub use off::{read_off, write_off};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("generator requires a {expected} surface")]
    WrongSurfaceKind { expected: &'static str },
    #[error("resolution too low: {0}")]
    ResolutionTooLow(String),
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("triangle {triangle} references vertex {vertex} out of range")]
    IndexOutOfRange { triangle: usize, vertex: usize },
    #[error("edge ({a}, {b}) borders {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("triangle {triangle} is not counter-clockwise with respect to the surface normal")]
    OrientationViolation { triangle: usize },
    #[error("closed mesh has Euler characteristic {found}, surface has {expected}")]
    TopologyMismatch { found: i64, expected: i64 },
    #[error("vertex {vertex} is off the surface (relative residual {residual:e})")]
    VertexOffSurface { vertex: usize, residual: f64 },
    #[error("discrete ball has only {interior} interior triangles")]
    BallTooSmall { interior: usize },
    #[error("H4 cannot be evaluated: {0}")]
    H4Unavailable(String),
    #[error("malformed OFF input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// How a triangulation was produced; generated families carry the data needed
/// for canonical vertex correspondences between refinement levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum MeshOrigin {
    Icosphere {
        level: u32,
    },
    CubedSphere {
        n: usize,
    },
    Torus {
        n_major: usize,
        n_minor: usize,
    },
    UvSphere {
        n_lat: usize,
        n_lon: usize,
    },
    PlanarGrid {
        origin: [f64; 2],
        spacing: f64,
        nx: usize,
        ny: usize,
    },
    Annulus {
        inner_radius: f64,
        outer_radius: f64,
        n_angular: usize,
    },
    Imported,
}

/// Stiffness coefficients `kappa^{ij}` stored per edge, plus the per-triangle
/// cotangent weights they are assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Stiffness {
    /// `kappa` for edge `e`, aligned with [`Triangulation::edges`].
    pub kappa: Vec<f64>,
    /// Cotangent of the interior angle at each corner of each triangle.
    pub cotangents: Vec<[f64; 3]>,
}

impl Stiffness {
    pub fn min_kappa(&self) -> f64 {
        self.kappa.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_kappa(&self) -> f64 {
        self.kappa.iter().sum::<f64>() / self.kappa.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    surface: Surface,
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Edge opposite corner `k` of each triangle.
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
    areas: Vec<f64>,
    mesh_size: f64,
    stiffness: Stiffness,
    adjacency_offsets: Vec<usize>,
    adjacency: Vec<(usize, usize)>,
    origin: MeshOrigin,
    closed: bool,
}

impl Triangulation {
    /// Builds and validates a triangulation: indices, non-degeneracy, manifoldness,
    /// orientation against the surface normal and, for closed meshes, the Euler formula.
    pub fn new(
        surface: Surface,
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        origin: MeshOrigin,
    ) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        vertex: v,
                    });
                }
            }
        }
        if let Some((vertex, residual)) = vertices
            .par_iter()
            .enumerate()
            .map(|(i, p)| (i, surface.on_surface_residual(p)))
            .find_first(|&(_, r)| r > ON_SURFACE_TOL)
        {
            return Err(MeshError::VertexOffSurface { vertex, residual });
        }

        let mesh_size = triangles
            .iter()
            .map(|t| triangle_diameter(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]))
            .fold(0.0, f64::max);
        let areas: Vec<f64> = triangles
            .iter()
            .map(|t| triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]))
            .collect();
        for (t, &a) in areas.iter().enumerate() {
            if !(a > 1e-14 * mesh_size * mesh_size) {
                return Err(MeshError::DegenerateTriangle {
                    triangle: t,
                    area: a,
                });
            }
        }

        let mut edges: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| ordered(t[(k + 1) % 3], t[(k + 2) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let edge_of =
            |a: usize, b: usize| edges.binary_search(&ordered(a, b)).expect("edge present");
        let triangle_edges: Vec<[usize; 3]> = triangles
            .iter()
            .map(|t| {
                [
                    edge_of(t[1], t[2]),
                    edge_of(t[2], t[0]),
                    edge_of(t[0], t[1]),
                ]
            })
            .collect();

        let mut edge_triangles = vec![[None, None]; edges.len()];
        let mut counts = vec![0usize; edges.len()];
        for (t, te) in triangle_edges.iter().enumerate() {
            for &e in te {
                if counts[e] < 2 {
                    edge_triangles[e][counts[e]] = Some(t);
                }
                counts[e] += 1;
            }
        }
        if let Some(e) = counts.iter().position(|&c| c > 2) {
            return Err(MeshError::NonManifoldEdge {
                a: edges[e][0],
                b: edges[e][1],
                count: counts[e],
            });
        }
        let closed = counts.iter().all(|&c| c == 2);

        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| vertices[i]);
            let n = reference_normal(&surface, &a, &b, &c);
            if (b - a).cross(&(c - a)).dot(&n) <= 0.0 {
                return Err(MeshError::OrientationViolation { triangle: t });
            }
        }

        if closed {
            let found = vertices.len() as i64 - edges.len() as i64 + triangles.len() as i64;
            let expected = surface.euler_characteristic();
            if found != expected {
                return Err(MeshError::TopologyMismatch { found, expected });
            }
        }

        let stiffness = assemble(&vertices, &triangles, &triangle_edges, edges.len());

        let mut degree = vec![0usize; vertices.len()];
        for e in &edges {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let mut adjacency_offsets = Vec::with_capacity(vertices.len() + 1);
        adjacency_offsets.push(0);
        for d in &degree {
            adjacency_offsets.push(adjacency_offsets.last().unwrap() + d);
        }
        let mut fill = adjacency_offsets.clone();
        let mut adjacency = vec![(0, 0); 2 * edges.len()];
        for (k, e) in edges.iter().enumerate() {
            adjacency[fill[e[0]]] = (e[1], k);
            fill[e[0]] += 1;
            adjacency[fill[e[1]]] = (e[0], k);
            fill[e[1]] += 1;
        }
        for v in 0..vertices.len() {
            adjacency[adjacency_offsets[v]..adjacency_offsets[v + 1]].sort_unstable();
        }

        Ok(Triangulation {
            surface,
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            areas,
            mesh_size,
            stiffness,
            adjacency_offsets,
            adjacency,
            origin,
            closed,
        })
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Edges as sorted vertex pairs `[i, j]` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edge indices opposite each corner of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// The (at most two) triangles bordering edge `e`.
    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_triangles[e]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn barycentre(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Mesh size: the largest triangle diameter.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn stiffness(&self) -> &Stiffness {
        &self.stiffness
    }

    pub fn kappa(&self, e: usize) -> f64 {
        self.stiffness.kappa[e]
    }

    /// `kappa^{ij}`, zero for non-adjacent pairs.
    pub fn kappa_between(&self, i: usize, j: usize) -> f64 {
        self.edge_index(i, j)
            .map_or(0.0, |e| self.stiffness.kappa[e])
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&ordered(i, j)).ok()
    }

    /// Neighbours of `v` as `(vertex, edge)` pairs sorted by vertex.
    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[self.adjacency_offsets[v]..self.adjacency_offsets[v + 1]]
    }

    pub fn origin(&self) -> &MeshOrigin {
        &self.origin
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Content hash of the mesh in git object style: SHA-256 of `"blob <len>\0"` followed by
    /// the OFF serialization.
    pub fn content_hash(&self) -> String {
        let mut body = Vec::new();
        write_off(self, &mut body).expect("writing to memory cannot fail");
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(&body);
        hex::encode(h.finalize())
    }
}

fn ordered(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Normal used for orientation checks: the surface normal at the projected barycentre,
/// falling back to the averaged vertex normals when the barycentre is outside the
/// tubular neighbourhood (very coarse meshes).
pub(crate) fn reference_normal(surface: &Surface, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    match surface.project(&((a + b + c) / 3.0)) {
        Ok(p) => surface.normal_at(&p),
        Err(_) => surface.normal_at(a) + surface.normal_at(b) + surface.normal_at(c),
    }
}

fn assemble(
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    triangle_edges: &[[usize; 3]],
    n_edges: usize,
) -> Stiffness {
    let cotangents: Vec<[f64; 3]> = triangles
        .par_iter()
        .map(|t| triangle_cotangents([&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]]))
        .collect();
    let mut kappa = vec![0.0; n_edges];
    for (te, cot) in triangle_edges.iter().zip(&cotangents) {
        for k in 0..3 {
            kappa[te[k]] += 0.5 * cot[k];
        }
    }
    Stiffness { kappa, cotangents }
}

/// Recomputes the stiffness coefficients of `tri` from its geometry:
/// `kappa^{ij} = -int grad(phi_i) . grad(phi_j) dS`, i.e. half the sum of the
/// cotangents of the angles opposite edge `ij`.
pub fn assemble_stiffness(tri: &Triangulation) -> Result<Stiffness, MeshError> {
    for (t, &a) in tri.areas.iter().enumerate() {
        if !(a > 1e-14 * tri.mesh_size * tri.mesh_size) {
            return Err(MeshError::DegenerateTriangle {
                triangle: t,
                area: a,
            });
        }
    }
    Ok(assemble(
        &tri.vertices,
        &tri.triangles,
        &tri.triangle_edges,
        tri.edges.len(),
    ))
}
