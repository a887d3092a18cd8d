//! Discrete geodesic balls: the union of triangles whose vertices all lie within a given
//! geodesic distance of a centre point.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{MeshError, Triangulation};
use crate::geom::Vec3;
use crate::surface::SurfaceKind;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBall {
    pub center: Vec3,
    pub radius: f64,
    /// Triangles of the ball, ascending.
    pub triangles: Vec<usize>,
    /// Every vertex of a ball triangle, ascending.
    pub vertices: Vec<usize>,
    /// Vertices on the boundary of the ball, ascending.
    pub boundary_vertices: Vec<usize>,
    /// Vertices of the ball not on its boundary, ascending.
    pub free_vertices: Vec<usize>,
    /// Edges bordering exactly one ball triangle.
    pub boundary_edges: Vec<usize>,
    /// Boundary cycles, each traversed with the ball on the left.
    pub boundary_loops: Vec<Vec<usize>>,
}

impl DiscreteBall {
    pub fn contains_triangle(&self, t: usize) -> bool {
        self.triangles.binary_search(&t).is_ok()
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }
}

/// Geodesic distance from `center` to each vertex.
///
/// Exact on spheres and the plane. On other surfaces a shortest-path metric on mesh edges is
/// used, seeded by chord distances to the vertices near the centre; this overestimates the true
/// distance by a relative `O(1)` factor along directions misaligned with edges.
pub fn geodesic_distances_from(tri: &Triangulation, center: &Vec3) -> Vec<f64> {
    let surface = tri.surface();
    if surface.is_plane() || matches!(surface.kind(), SurfaceKind::Sphere { .. }) {
        tri.vertices()
            .iter()
            .map(|p| {
                surface
                    .geodesic_distance(center, p)
                    .unwrap_or(f64::INFINITY)
            })
            .collect()
    } else {
        edge_dijkstra(tri, center)
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn edge_dijkstra(tri: &Triangulation, center: &Vec3) -> Vec<f64> {
    let eps = tri.mesh_size();
    let mut dist = vec![f64::INFINITY; tri.num_vertices()];
    let mut heap = BinaryHeap::new();
    let mut nearest = (f64::INFINITY, 0);
    for (i, p) in tri.vertices().iter().enumerate() {
        let d = (p - center).norm();
        if d < nearest.0 {
            nearest = (d, i);
        }
        if d <= eps {
            dist[i] = d;
            heap.push(Item(d, i));
        }
    }
    if heap.is_empty() {
        dist[nearest.1] = nearest.0;
        heap.push(Item(nearest.0, nearest.1));
    }
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, _) in tri.neighbours(v) {
            let nd = d + (tri.vertices()[w] - tri.vertices()[v]).norm();
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Item(nd, w));
            }
        }
    }
    dist
}

/// The discrete ball of geodesic radius `radius` about `center`.
pub fn discrete_ball(
    tri: &Triangulation,
    center: &Vec3,
    radius: f64,
) -> Result<DiscreteBall, MeshError> {
    let dist = geodesic_distances_from(tri, center);
    let triangles: Vec<usize> = (0..tri.num_triangles())
        .filter(|&t| tri.triangles()[t].iter().all(|&v| dist[v] < radius))
        .collect();
    if triangles.len() < 3 {
        return Err(MeshError::BallTooSmall {
            interior: triangles.len(),
        });
    }
    let mut in_ball = vec![false; tri.num_triangles()];
    for &t in &triangles {
        in_ball[t] = true;
    }
    let mut vertices: Vec<usize> = triangles.iter().flat_map(|&t| tri.triangles()[t]).collect();
    vertices.sort_unstable();
    vertices.dedup();

    // Directed boundary edges (a -> b) in the orientation of their ball triangle.
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut boundary_edges = Vec::new();
    for &t in &triangles {
        let corners = tri.triangles()[t];
        let te = tri.triangle_edges(t);
        for k in 0..3 {
            let e = te[k];
            let inside = tri
                .edge_triangles(e)
                .iter()
                .flatten()
                .filter(|&&s| in_ball[s])
                .count();
            if inside == 1 {
                boundary_edges.push(e);
                next.insert(corners[(k + 1) % 3], corners[(k + 2) % 3]);
            }
        }
    }
    boundary_edges.sort_unstable();
    let mut boundary_vertices: Vec<usize> = boundary_edges
        .iter()
        .flat_map(|&e| tri.edges()[e])
        .collect();
    boundary_vertices.sort_unstable();
    boundary_vertices.dedup();
    let free_vertices = vertices
        .iter()
        .copied()
        .filter(|v| boundary_vertices.binary_search(v).is_err())
        .collect();

    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut visited = HashMap::new();
    let mut boundary_loops = Vec::new();
    for s in starts {
        if visited.contains_key(&s) {
            continue;
        }
        let mut cycle = vec![s];
        visited.insert(s, ());
        let mut v = next[&s];
        while v != s {
            if visited.insert(v, ()).is_some() {
                break;
            }
            cycle.push(v);
            match next.get(&v) {
                Some(&w) => v = w,
                None => break,
            }
        }
        boundary_loops.push(cycle);
    }

    Ok(DiscreteBall {
        center: *center,
        radius,
        triangles,
        vertices,
        boundary_vertices,
        free_vertices,
        boundary_edges,
        boundary_loops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, planar_grid, torus_mesh};
    use crate::surface::Surface;

    #[test]
    fn planar_ball_is_a_disc() {
        let g = planar_grid(&Surface::plane(), [-1.0, -1.0], 0.05, 40, 40).unwrap();
        let b = discrete_ball(&g, &Vec3::zeros(), 0.5).unwrap();
        assert_eq!(b.boundary_loops.len(), 1);
        assert_eq!(b.boundary_loops[0].len(), b.boundary_vertices.len());
        let area: f64 = b.triangles.iter().map(|&t| g.triangle_area(t)).sum();
        assert!((area - std::f64::consts::PI * 0.25).abs() < 0.1, "{area}");
        // Counter-clockwise: the signed area enclosed by the loop is positive.
        let lp = &b.boundary_loops[0];
        let signed: f64 = (0..lp.len())
            .map(|k| {
                let (p, q) = (g.vertices()[lp[k]], g.vertices()[lp[(k + 1) % lp.len()]]);
                p.x * q.y - p.y * q.x
            })
            .sum();
        assert!(signed > 0.0);
        assert!(b
            .free_vertices
            .iter()
            .all(|v| !b.boundary_vertices.contains(v)));
    }

    #[test]
    fn tiny_ball_rejected() {
        let s = icosphere(&Surface::sphere(1.0).unwrap(), 2).unwrap();
        assert!(matches!(
            discrete_ball(&s, &Vec3::z(), 1e-3),
            Err(MeshError::BallTooSmall { .. })
        ));
    }

    #[test]
    fn torus_distances_dominate_chords() {
        let s = Surface::torus(2.0, 0.5).unwrap();
        let t = torus_mesh(&s, 48, 16).unwrap();
        let c = t.vertices()[0];
        let d = geodesic_distances_from(&t, &c);
        for (i, p) in t.vertices().iter().enumerate() {
            assert!(d[i] >= (p - c).norm() - 1e-12);
        }
        assert_eq!(d[0], 0.0);
    }
}
