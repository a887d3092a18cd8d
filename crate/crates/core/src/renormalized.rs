//! Renormalized-energy diagnostics of a converged field: the energy outside small balls around
//! the defects minus the logarithmic divergence, split into intrinsic and extrinsic parts, and
//! the dyadic shell decomposition around each defect.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::triangle_energy;
use crate::field::{check_len, realize, DiscreteField, FieldError, FrameField};
use crate::geom::{from_array, Vec3};
use crate::mesh::{geodesic_distances_from, Triangulation};
use crate::surface::{Surface, SurfaceError, SurfaceKind};
use crate::vorticity::DefectSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenormalizedError {
    #[error("defects {a} and {b} are {distance} apart; at least {required} is needed")]
    DefectsTooClose {
        a: usize,
        b: usize,
        distance: f64,
        required: f64,
    },
    #[error("delta {delta} is not above four times the mesh size ({min})")]
    DeltaTooSmall { delta: f64, min: f64 },
    #[error("defect {index} has charge {charge}; only unit charges are supported")]
    NonUnitCharge { index: usize, charge: i32 },
    #[error("empty delta list")]
    EmptyDeltaList,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// Energy of the shell `2^-(j+1) rho <= d < 2^-j rho` around one defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicShell {
    pub defect: usize,
    pub j: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub energy: f64,
    /// `energy - π log 2`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedEstimate {
    /// Radii in decreasing order.
    pub delta_values: Vec<f64>,
    /// `XY(M_δ) - (1/2)∫_{M_δ} |dγ[v̂]|² - K π |log δ|` for each radius.
    pub intrinsic_partial: Vec<f64>,
    /// `|intrinsic_partial[k+1] - intrinsic_partial[k]|`.
    pub cauchy_differences: Vec<f64>,
    /// `(1/2)∫_M |dγ[v̂]|²`.
    pub extrinsic_term: f64,
    /// `sup |dγ|² / 2 · area(M)`.
    pub extrinsic_bound: f64,
    /// Discrete energy of `M_δ` for each radius.
    pub region_energy: Vec<f64>,
    /// `(1/2)∫_{M_δ} |dγ[v̂]|²` for each radius.
    pub region_extrinsic: Vec<f64>,
    /// `(1/2)∫_{M_δ} |Dv̂|²` with `D` the tangential part of the derivative.
    pub region_covariant: Vec<f64>,
    /// `|region_energy - region_covariant - region_extrinsic| / region_energy`.
    pub decomposition_residual: Vec<f64>,
    /// `(area(M_δ) + Σ area(B_δ) - area(M)) / area(M)` with the mesh area of `M_δ`, the exact
    /// ball areas (small-ball expansion off the sphere and plane) and the mesh area of `M`.
    pub area_residual: Vec<f64>,
    /// Area of the triangles whose vertices lie on both sides of some `∂B_δ`.
    pub straddling_area: Vec<f64>,
    pub dyadic_shells: Vec<DyadicShell>,
    /// Energy outside the balls of radius `max δ`.
    pub outer_energy: f64,
    /// Energy inside the innermost shells.
    pub finest_ball_energy: f64,
    pub total_energy: f64,
    pub defect_count: usize,
}

impl RenormalizedEstimate {
    /// Whether the Cauchy differences of the intrinsic partial sums decrease strictly.
    pub fn is_cauchy_decreasing(&self) -> bool {
        self.cauchy_differences.len() >= 2
            && self.cauchy_differences.windows(2).all(|w| w[1] < w[0])
    }

    pub fn shells_csv(&self) -> String {
        let mut s = String::from("defect,j,inner_radius,outer_radius,energy,excess\n");
        for sh in &self.dyadic_shells {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                sh.defect, sh.j, sh.inner_radius, sh.outer_radius, sh.energy, sh.excess
            ));
        }
        s
    }
}

/// Per-triangle quadrature data.
struct TriangleTerms {
    energy: f64,
    covariant: f64,
    extrinsic: f64,
}

/// Edge-midpoint rule, exact for quadratics on the flat triangle.
const MIDPOINTS: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

fn triangle_terms(tri: &Triangulation, v: &[Vec3], t: usize) -> TriangleTerms {
    let surface = tri.surface();
    let c = tri.triangles()[t];
    let p = [
        tri.vertices()[c[0]],
        tri.vertices()[c[1]],
        tri.vertices()[c[2]],
    ];
    let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let area = 0.5 * cross.norm();
    let nt = cross / (2.0 * area);
    // Hat-function gradients and an orthonormal basis of the triangle plane.
    let grad: Vec<Vec3> = (0..3)
        .map(|k| nt.cross(&(p[(k + 2) % 3] - p[(k + 1) % 3])) / (2.0 * area))
        .collect();
    let a1 = (p[1] - p[0]).normalize();
    let a2 = nt.cross(&a1);
    let deriv = |a: &Vec3| (0..3).fold(Vec3::zeros(), |acc, k| acc + v[c[k]] * grad[k].dot(a));
    let (d1, d2) = (deriv(&a1), deriv(&a2));
    let mut covariant = 0.0;
    let mut extrinsic = 0.0;
    for l in MIDPOINTS {
        let x = l[0] * p[0] + l[1] * p[1] + l[2] * p[2];
        let y = surface.project(&x).unwrap_or(x);
        let n = surface.normal_at(&y);
        let tangential = |d: &Vec3| d - d.dot(&n) * n;
        covariant += (tangential(&d1).norm_squared() + tangential(&d2).norm_squared()) / 3.0;
        let vh = l[0] * v[c[0]] + l[1] * v[c[1]] + l[2] * v[c[2]];
        let vt = surface.tangent_part(&y, &vh);
        extrinsic += surface.shape_operator_at(&y, &vt).norm_squared() / 3.0;
    }
    TriangleTerms {
        energy: triangle_energy(tri, v, t),
        covariant: 0.5 * area * covariant,
        extrinsic: 0.5 * area * extrinsic,
    }
}

/// Geodesic distance from each defect to each triangle: measured at the projected barycentre
/// on spheres and planes, and as the mean of the vertex distances elsewhere.
fn triangle_distances(tri: &Triangulation, centers: &[Vec3]) -> Vec<Vec<f64>> {
    let surface = tri.surface();
    let exact = surface.is_plane() || matches!(surface.kind(), SurfaceKind::Sphere { .. });
    centers
        .iter()
        .map(|c| {
            if exact {
                (0..tri.num_triangles())
                    .into_par_iter()
                    .map(|t| {
                        let b = tri.barycentre(t);
                        let y = surface.project(&b).unwrap_or(b);
                        surface.geodesic_distance(c, &y).unwrap_or(f64::INFINITY)
                    })
                    .collect()
            } else {
                let d = geodesic_distances_from(tri, c);
                tri.triangles()
                    .iter()
                    .map(|t| (d[t[0]] + d[t[1]] + d[t[2]]) / 3.0)
                    .collect()
            }
        })
        .collect()
}

fn vertex_distances(tri: &Triangulation, centers: &[Vec3]) -> Vec<Vec<f64>> {
    centers
        .iter()
        .map(|c| geodesic_distances_from(tri, c))
        .collect()
}

/// Area of a geodesic ball: exact on spheres and planes, two-term expansion elsewhere.
fn ball_area(surface: &Surface, center: &Vec3, delta: f64) -> f64 {
    match surface.kind() {
        SurfaceKind::Sphere { radius } => {
            2.0 * PI * radius * radius * (1.0 - (delta / radius).cos())
        }
        _ => {
            let k = surface.gauss_curvature_at(center);
            PI * delta * delta * (1.0 - k * delta * delta / 12.0)
        }
    }
}

fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut comp = 0.0;
    for x in values {
        let y = x - comp;
        let t = s + y;
        comp = (t - s) - y;
        s = t;
    }
    s
}

pub fn estimate_renormalized(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    defects: &DefectSet,
    delta_list: &[f64],
) -> Result<RenormalizedEstimate, RenormalizedError> {
    check_len(tri.num_vertices(), field.len())?;
    check_len(tri.num_vertices(), frames.len())?;
    if delta_list.is_empty() {
        return Err(RenormalizedError::EmptyDeltaList);
    }
    let surface = tri.surface();
    let k = defects.len();
    let eps = tri.mesh_size();
    let mut deltas = delta_list.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let centers: Vec<Vec3> = defects
        .defects
        .iter()
        .map(|d| {
            let p = from_array(d.position);
            surface.project(&p).unwrap_or(p)
        })
        .collect();
    if k > 0 {
        for (i, d) in defects.defects.iter().enumerate() {
            if d.charge.abs() != 1 {
                return Err(RenormalizedError::NonUnitCharge {
                    index: i,
                    charge: d.charge,
                });
            }
        }
        for &delta in &deltas {
            if !(delta > 4.0 * eps) {
                return Err(RenormalizedError::DeltaTooSmall {
                    delta,
                    min: 4.0 * eps,
                });
            }
        }
        let required = 2.0 * deltas[0];
        for a in 0..k {
            for b in a + 1..k {
                let distance = surface.geodesic_distance(&centers[a], &centers[b])?;
                if !(distance > required) {
                    return Err(RenormalizedError::DefectsTooClose {
                        a,
                        b,
                        distance,
                        required,
                    });
                }
            }
        }
    }

    let v = realize(field, frames)?;
    let terms: Vec<TriangleTerms> = (0..tri.num_triangles())
        .into_par_iter()
        .map(|t| triangle_terms(tri, &v, t))
        .collect();
    let dist = triangle_distances(tri, &centers);
    let vdist = vertex_distances(tri, &centers);
    // Distance to the nearest defect and its index.
    let nearest: Vec<(f64, usize)> = (0..tri.num_triangles())
        .map(|t| {
            (0..k)
                .map(|i| (dist[i][t], i))
                .fold(
                    (f64::INFINITY, usize::MAX),
                    |a, b| if b.0 < a.0 { b } else { a },
                )
        })
        .collect();
    let areas = tri.areas();
    let mesh_area = kahan_sum(areas.iter().copied());
    let total_energy = kahan_sum(terms.iter().map(|t| t.energy));
    let extrinsic_term = kahan_sum(terms.iter().map(|t| t.extrinsic));

    let mut out = RenormalizedEstimate {
        delta_values: deltas.clone(),
        intrinsic_partial: Vec::new(),
        cauchy_differences: Vec::new(),
        extrinsic_term,
        extrinsic_bound: 0.5 * surface.max_shape_operator_norm_sq() * mesh_area,
        region_energy: Vec::new(),
        region_extrinsic: Vec::new(),
        region_covariant: Vec::new(),
        decomposition_residual: Vec::new(),
        area_residual: Vec::new(),
        straddling_area: Vec::new(),
        dyadic_shells: Vec::new(),
        outer_energy: total_energy,
        finest_ball_energy: 0.0,
        total_energy,
        defect_count: k,
    };
    for &delta in &deltas {
        let outside: Vec<usize> = (0..tri.num_triangles())
            .filter(|&t| nearest[t].0 >= delta)
            .collect();
        let energy = kahan_sum(outside.iter().map(|&t| terms[t].energy));
        let extrinsic = kahan_sum(outside.iter().map(|&t| terms[t].extrinsic));
        let covariant = kahan_sum(outside.iter().map(|&t| terms[t].covariant));
        out.region_energy.push(energy);
        out.region_extrinsic.push(extrinsic);
        out.region_covariant.push(covariant);
        out.decomposition_residual.push(if energy > 0.0 {
            (energy - covariant - extrinsic).abs() / energy
        } else {
            0.0
        });
        out.intrinsic_partial
            .push(energy - extrinsic - k as f64 * PI * delta.ln().abs());
        let outside_area = kahan_sum(outside.iter().map(|&t| areas[t]));
        let balls: f64 = centers.iter().map(|c| ball_area(surface, c, delta)).sum();
        out.area_residual
            .push((outside_area + balls - mesh_area) / mesh_area);
        let straddling = (0..tri.num_triangles())
            .filter(|&t| {
                let c = tri.triangles()[t];
                (0..k).any(|i| {
                    let inside = c.iter().filter(|&&vtx| vdist[i][vtx] < delta).count();
                    inside > 0 && inside < 3
                })
            })
            .map(|t| areas[t]);
        out.straddling_area.push(kahan_sum(straddling));
    }
    out.cauchy_differences = out
        .intrinsic_partial
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .collect();

    if k > 0 {
        let rho = deltas[0];
        let shells = ((rho / (4.0 * eps)).log2().floor().max(0.0)) as usize;
        let mut shell_energy = vec![vec![Vec::new(); shells]; k];
        let mut outer = Vec::new();
        let mut finest = Vec::new();
        for t in 0..tri.num_triangles() {
            let (d, i) = nearest[t];
            if d >= rho {
                outer.push(terms[t].energy);
                continue;
            }
            // Shell j holds 2^-(j+1) rho <= d < 2^-j rho.
            let j = if d > 0.0 {
                (rho / d).log2().floor() as usize
            } else {
                usize::MAX
            };
            if j < shells {
                shell_energy[i][j].push(terms[t].energy);
            } else {
                finest.push(terms[t].energy);
            }
        }
        out.outer_energy = kahan_sum(outer);
        out.finest_ball_energy = kahan_sum(finest);
        for (i, per) in shell_energy.into_iter().enumerate() {
            for (j, es) in per.into_iter().enumerate() {
                let energy = kahan_sum(es);
                out.dyadic_shells.push(DyadicShell {
                    defect: i,
                    j,
                    inner_radius: rho / 2f64.powi(j as i32 + 1),
                    outer_radius: rho / 2f64.powi(j as i32),
                    energy,
                    excess: energy - PI * LN_2,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{
        global_unit_field, hedgehog_ansatz, restrict_smooth, DefectSpec, HedgehogOptions,
    };
    use crate::mesh::{icosphere, torus_mesh};
    use crate::vorticity::{detect_defects, Defect};

    fn defect(p: Vec3, charge: i32) -> Defect {
        Defect {
            position: crate::geom::to_array(&p),
            charge,
            core_radius: 0.0,
            cluster_triangles: Vec::new(),
        }
    }

    #[test]
    fn torus_without_defects_ignores_delta() {
        let s = Surface::torus(2.0, 0.5).unwrap();
        let tri = torus_mesh(&s, 64, 16).unwrap();
        let frames = FrameField::build(&tri);
        let f = restrict_smooth(&tri, &frames, |p| global_unit_field(&s, p).unwrap()).unwrap();
        let est = estimate_renormalized(&tri, &frames, &f, &DefectSet::default(), &[0.4, 0.2, 0.1])
            .unwrap();
        assert!(est.cauchy_differences.iter().all(|&d| d == 0.0));
        assert_eq!(est.region_energy[0], est.total_energy);
        assert!(est.extrinsic_term <= est.extrinsic_bound);
        assert!(
            est.decomposition_residual[0] < 0.01,
            "{:?}",
            est.decomposition_residual
        );
        assert!(est.area_residual[0].abs() < 1e-12);
        assert!(est.dyadic_shells.is_empty());
    }

    #[test]
    fn sphere_ansatz_shells_are_additive() {
        let s = Surface::sphere(1.0).unwrap();
        let tri = icosphere(&s, 4).unwrap();
        let frames = FrameField::build(&tri);
        let spec = [
            DefectSpec {
                center: Vec3::z(),
                charge: 1,
            },
            DefectSpec {
                center: -Vec3::z(),
                charge: 1,
            },
        ];
        let f = hedgehog_ansatz(&tri, &frames, &spec, &HedgehogOptions::default()).unwrap();
        let d = detect_defects(&tri, &frames, &f, 3.0 * tri.mesh_size()).unwrap();
        let est = estimate_renormalized(&tri, &frames, &f, &d, &[0.8, 0.5, 0.4]).unwrap();
        assert_eq!(est.defect_count, 2);
        let shells: f64 = est.dyadic_shells.iter().map(|s| s.energy).sum();
        let lhs = shells + est.outer_energy;
        let rhs = est.total_energy - est.finest_ball_energy;
        assert!((lhs - rhs).abs() <= 1e-12 * est.total_energy, "{lhs} {rhs}");
        assert!(est.extrinsic_term <= est.extrinsic_bound);
        for r in &est.area_residual {
            assert!(r.abs() < 0.01, "{r}");
        }
        for r in &est.decomposition_residual {
            assert!(*r < 0.01, "{r}");
        }
        // On the unit sphere |dγ[v]|² = |v|², so the extrinsic term is about half the area.
        assert!(
            (est.extrinsic_term - 2.0 * PI).abs() < 0.05 * 2.0 * PI,
            "{}",
            est.extrinsic_term
        );
    }

    #[test]
    fn preconditions() {
        let s = Surface::sphere(1.0).unwrap();
        let tri = icosphere(&s, 3).unwrap();
        let frames = FrameField::build(&tri);
        let f = DiscreteField::constant(tri.num_vertices(), 0.0);
        let two = DefectSet {
            defects: vec![defect(Vec3::z(), 1), defect(-Vec3::z(), 1)],
        };
        assert!(matches!(
            estimate_renormalized(&tri, &frames, &f, &two, &[0.1]),
            Err(RenormalizedError::DeltaTooSmall { .. })
        ));
        assert!(matches!(
            estimate_renormalized(&tri, &frames, &f, &two, &[1.8]),
            Err(RenormalizedError::DefectsTooClose { .. })
        ));
        let double = DefectSet {
            defects: vec![defect(Vec3::z(), 2)],
        };
        assert!(matches!(
            estimate_renormalized(&tri, &frames, &f, &double, &[0.8]),
            Err(RenormalizedError::NonUnitCharge { .. })
        ));
        assert!(matches!(
            estimate_renormalized(&tri, &frames, &f, &two, &[]),
            Err(RenormalizedError::EmptyDeltaList)
        ));
    }
}
