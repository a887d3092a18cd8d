//! Discrete vorticity, per-triangle winding numbers and defect detection.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{check_len, realize, DiscreteField, FieldError, FrameField};
use crate::geom::{wrap_angle, Vec3};
use crate::mesh::Triangulation;

/// Windings whose rounding residual reaches this value are reported as ambiguous.
pub const WINDING_RESIDUAL_LIMIT: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VorticityError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("winding of triangle {triangle} is ambiguous (rounding residual {residual:.3})")]
    AmbiguousWinding { triangle: usize, residual: f64 },
    #[error("a cluster of {triangles} triangles consists only of ambiguous windings")]
    UnresolvedRegion { triangles: usize },
    #[error("defect at {position:?} lies within {margin} of the region boundary")]
    CoreOverlap { position: [f64; 3], margin: f64 },
    #[error("triangle index {0} out of range")]
    NoSuchTriangle(usize),
}

/// `sum_k ((gamma(i_k) + gamma(i_{k+1})) / 2) . (v(i_k) x v(i_{k+1}))` per triangle.
pub fn mu_hat(tri: &Triangulation, vectors: &[Vec3]) -> Result<Vec<f64>, VorticityError> {
    check_len(tri.num_vertices(), vectors.len())?;
    let surface = tri.surface();
    let normals: Vec<Vec3> = tri
        .vertices()
        .par_iter()
        .map(|p| surface.normal_at(p))
        .collect();
    Ok(tri
        .triangles()
        .par_iter()
        .map(|c| {
            let mut s = 0.0;
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                s += (0.5 * (normals[a] + normals[b])).dot(&vectors[a].cross(&vectors[b]));
            }
            s
        })
        .collect())
}

/// Angle turned by the field from `i` to `j` relative to parallel transport, in `(-pi, pi]`.
fn edge_turn(tri: &Triangulation, frames: &FrameField, theta: &[f64], i: usize, j: usize) -> f64 {
    let e = tri.edge_index(i, j).expect("adjacent vertices");
    wrap_angle(theta[j] - theta[i] - frames.transport_angle(tri, e, i))
}

/// Winding number of the field around triangle `t`, with its rounding residual.
pub fn winding_with_residual(
    tri: &Triangulation,
    frames: &FrameField,
    theta: &[f64],
    t: usize,
) -> (i32, f64) {
    let c = tri.triangles()[t];
    let total = edge_turn(tri, frames, theta, c[0], c[1])
        + edge_turn(tri, frames, theta, c[1], c[2])
        + edge_turn(tri, frames, theta, c[2], c[0]);
    let turns = total / (2.0 * PI);
    let w = turns.round();
    (w as i32, (turns - w).abs())
}

pub fn triangle_winding(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    t: usize,
) -> Result<i32, VorticityError> {
    check_len(tri.num_vertices(), field.len())?;
    if t >= tri.num_triangles() {
        return Err(VorticityError::NoSuchTriangle(t));
    }
    let (w, residual) = winding_with_residual(tri, frames, &field.theta, t);
    if residual >= WINDING_RESIDUAL_LIMIT {
        return Err(VorticityError::AmbiguousWinding {
            triangle: t,
            residual,
        });
    }
    Ok(w)
}

/// Windings of all triangles; ambiguous ones are `None`.
pub fn windings(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
) -> Vec<Option<i32>> {
    (0..tri.num_triangles())
        .into_par_iter()
        .map(|t| {
            let (w, r) = winding_with_residual(tri, frames, &field.theta, t);
            (r < WINDING_RESIDUAL_LIMIT).then_some(w)
        })
        .collect()
}

/// Sum of the unambiguous windings and the number of ambiguous triangles.
pub fn total_winding(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
) -> (i64, usize) {
    let w = windings(tri, frames, field);
    (
        w.iter().flatten().map(|&x| x as i64).sum(),
        w.iter().filter(|x| x.is_none()).count(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub position: [f64; 3],
    pub charge: i32,
    pub core_radius: f64,
    #[serde(skip)]
    pub cluster_triangles: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefectSet {
    pub defects: Vec<Defect>,
}

impl DefectSet {
    pub fn total_charge(&self) -> i64 {
        self.defects.iter().map(|d| d.charge as i64).sum()
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn all_unit(&self) -> bool {
        self.defects.iter().all(|d| d.charge.abs() == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VorticityReport {
    pub mu_hat: Vec<f64>,
    /// Winding per triangle; ambiguous triangles hold 0 and are listed in `ambiguous`.
    pub winding: Vec<i32>,
    pub ambiguous: Vec<usize>,
    pub defects: DefectSet,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Clusters triangles with nonzero (or ambiguous) winding whose barycentres lie within
/// `merge_radius`; each cluster becomes a defect carrying the sum of its windings.
pub fn detect_defects(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    merge_radius: f64,
) -> Result<DefectSet, VorticityError> {
    check_len(tri.num_vertices(), field.len())?;
    let w = windings(tri, frames, field);
    cluster(tri, &w, merge_radius)
}

pub(crate) fn cluster(
    tri: &Triangulation,
    w: &[Option<i32>],
    merge_radius: f64,
) -> Result<DefectSet, VorticityError> {
    let surface = tri.surface();
    let marked: Vec<usize> = (0..tri.num_triangles())
        .filter(|&t| w[t] != Some(0))
        .collect();
    let centres: Vec<Vec3> = marked
        .iter()
        .map(|&t| {
            let b = tri.barycentre(t);
            surface.project(&b).unwrap_or(b)
        })
        .collect();
    let mut uf = UnionFind((0..marked.len()).collect());
    for a in 0..marked.len() {
        for b in a + 1..marked.len() {
            if (centres[a] - centres[b]).norm() <= merge_radius
                && surface.proximity_distance(&centres[a], &centres[b]) <= merge_radius
            {
                uf.union(a, b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); marked.len()];
    for a in 0..marked.len() {
        let r = uf.find(a);
        groups[r].push(a);
    }
    let mut defects = Vec::new();
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        let charge: i32 = g.iter().filter_map(|&a| w[marked[a]]).sum();
        if g.iter().all(|&a| w[marked[a]].is_none()) {
            return Err(VorticityError::UnresolvedRegion { triangles: g.len() });
        }
        let mut area = 0.0;
        let mut acc = Vec3::zeros();
        for &a in &g {
            let t = marked[a];
            area += tri.triangle_area(t);
            acc += tri.triangle_area(t) * tri.barycentre(t);
        }
        let mean = acc / area;
        let position = surface.project(&mean).unwrap_or(centres[g[0]]);
        let core_radius = g
            .iter()
            .flat_map(|&a| tri.triangles()[marked[a]])
            .map(|v| surface.proximity_distance(&position, &tri.vertices()[v]))
            .fold(0.0, f64::max);
        defects.push(Defect {
            position: [position.x, position.y, position.z],
            charge,
            core_radius,
            cluster_triangles: g.iter().map(|&a| marked[a]).collect(),
        });
    }
    Ok(DefectSet { defects })
}

/// Full vorticity report: `mu_hat`, windings and clustered defects.
pub fn vorticity_report(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    merge_radius: f64,
) -> Result<VorticityReport, VorticityError> {
    let v = realize(field, frames)?;
    let mu = mu_hat(tri, &v)?;
    let w = windings(tri, frames, field);
    let defects = cluster(tri, &w, merge_radius)?;
    Ok(VorticityReport {
        mu_hat: mu,
        winding: w.iter().map(|x| x.unwrap_or(0)).collect(),
        ambiguous: (0..w.len()).filter(|&t| w[t].is_none()).collect(),
        defects,
    })
}

/// Core-size threshold `t_eps = eps |log eps|^2`.
pub fn core_threshold(eps: f64) -> f64 {
    eps * eps.ln().powi(2)
}

/// Triangles whose interpolant is shorter than `t_eps` at the barycentre.
pub fn core_triangles(tri: &Triangulation, vectors: &[Vec3]) -> Vec<usize> {
    let t_eps = core_threshold(tri.mesh_size());
    (0..tri.num_triangles())
        .filter(|&t| {
            let c = tri.triangles()[t];
            ((vectors[c[0]] + vectors[c[1]] + vectors[c[2]]) / 3.0).norm() < t_eps
        })
        .collect()
}

/// `|sum_region mu_hat - (2 pi sum d_i - int_region G)|` for the defects inside the region.
///
/// Defects must be well inside or well outside: every defect closer than `3 eps` to the
/// region boundary is an error.
pub fn region_vorticity_check(
    tri: &Triangulation,
    vectors: &[Vec3],
    region: &[usize],
    defects: &DefectSet,
) -> Result<f64, VorticityError> {
    check_len(tri.num_vertices(), vectors.len())?;
    if let Some(&t) = region.iter().find(|&&t| t >= tri.num_triangles()) {
        return Err(VorticityError::NoSuchTriangle(t));
    }
    let surface = tri.surface();
    let mut inside = vec![false; tri.num_triangles()];
    for &t in region {
        inside[t] = true;
    }
    let mut boundary = Vec::new();
    for e in 0..tri.edges().len() {
        let n = tri
            .edge_triangles(e)
            .iter()
            .flatten()
            .filter(|&&t| inside[t])
            .count();
        if n == 1 {
            boundary.extend(tri.edges()[e]);
        }
    }
    let margin = 3.0 * tri.mesh_size();
    let mut charge = 0i64;
    for d in &defects.defects {
        let p = Vec3::from(d.position);
        if boundary
            .iter()
            .any(|&v| surface.proximity_distance(&p, &tri.vertices()[v]) < margin)
        {
            return Err(VorticityError::CoreOverlap {
                position: d.position,
                margin,
            });
        }
        let count = d.cluster_triangles.iter().filter(|&&t| inside[t]).count();
        if count == d.cluster_triangles.len() && count > 0 {
            charge += d.charge as i64;
        } else if count > 0 {
            return Err(VorticityError::CoreOverlap {
                position: d.position,
                margin,
            });
        }
    }
    let mu = mu_hat(tri, vectors)?;
    let mu_sum: f64 = region.iter().map(|&t| mu[t]).sum();
    let curvature: f64 = region
        .iter()
        .map(|&t| {
            let b = tri.barycentre(t);
            let p = surface.project(&b).unwrap_or(b);
            surface.gauss_curvature_at(&p) * tri.triangle_area(t)
        })
        .sum();
    Ok((mu_sum - (2.0 * PI * charge as f64 - curvature)).abs())
}
