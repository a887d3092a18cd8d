//! Discrete unit tangent fields: per-vertex frames, angle fields, their piecewise-affine
//! interpolants and the hedgehog ansatz used to seed minimizations.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{transport_between, Vec3};
use crate::mesh::{geodesic_distances_from, Triangulation};
use crate::surface::{Surface, SurfaceError, SurfaceKind};

/// Below this value of `|a x normal|` the frame construction switches to the fallback axis.
pub const FRAME_FALLBACK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("field vanishes at vertex {vertex}")]
    VanishingField { vertex: usize },
    #[error("barycentric coordinates {0:?} are not a convex combination")]
    BadBarycentric([f64; 3]),
    #[error("defect charges sum to {total} but the surface has Euler characteristic {expected}")]
    ChargeMismatch { total: i64, expected: i64 },
    #[error("triangle index {0} out of range")]
    NoSuchTriangle(usize),
    #[error("malformed field file: {0}")]
    Parse(String),
    #[error("field file belongs to mesh {found}, expected {expected}")]
    MeshHashMismatch { expected: String, found: String },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// Right-handed orthonormal frame `(e1, e2, normal)` of a tangent plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentBasis {
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
}

impl TangentBasis {
    /// `e1` is the normalized tangential part of `axis`, or of the fallback axis when `axis`
    /// is (nearly) normal.
    pub fn from_normal(normal: Vec3, axis: Vec3, fallback: Vec3) -> Self {
        let a = if axis.cross(&normal).norm() < FRAME_FALLBACK_THRESHOLD {
            fallback
        } else {
            axis
        };
        let e1 = (a - a.dot(&normal) * normal).normalize();
        let e2 = normal.cross(&e1);
        TangentBasis { e1, e2, normal }
    }

    pub fn vector(&self, theta: f64) -> Vec3 {
        let (s, c) = theta.sin_cos();
        c * self.e1 + s * self.e2
    }

    /// Angle of the tangential part of `v` in this frame.
    pub fn angle_of(&self, v: &Vec3) -> f64 {
        v.dot(&self.e2).atan2(v.dot(&self.e1))
    }
}

/// One tangent frame per vertex, plus the connection angles along edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    bases: Vec<TangentBasis>,
    /// For edge `[i, j]` (i < j): angle, in frame `j`, of `e1(i)` transported by the minimal
    /// rotation taking `normal(i)` to `normal(j)`.
    connection: Vec<f64>,
}

impl FrameField {
    pub fn build(tri: &Triangulation) -> Self {
        Self::with_axes(tri, Vec3::x(), Vec3::y())
    }

    /// Frames built from a different reference axis; used to check frame independence.
    pub fn with_axes(tri: &Triangulation, axis: Vec3, fallback: Vec3) -> Self {
        let surface = tri.surface();
        let bases: Vec<TangentBasis> = tri
            .vertices()
            .par_iter()
            .map(|p| TangentBasis::from_normal(surface.normal_at(p), axis, fallback))
            .collect();
        let connection = tri
            .edges()
            .par_iter()
            .map(|&[i, j]| {
                let t = transport_between(&bases[i].normal, &bases[j].normal, &bases[i].e1);
                bases[j].angle_of(&t)
            })
            .collect();
        FrameField { bases, connection }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn basis(&self, i: usize) -> &TangentBasis {
        &self.bases[i]
    }

    pub fn bases(&self) -> &[TangentBasis] {
        &self.bases
    }

    /// Connection angle of edge `e` in its stored direction.
    pub fn edge_connection(&self, e: usize) -> f64 {
        self.connection[e]
    }

    /// Connection angle from vertex `i` to the adjacent vertex `j` through edge `e`.
    pub fn transport_angle(&self, tri: &Triangulation, e: usize, i: usize) -> f64 {
        if tri.edges()[e][0] == i {
            self.connection[e]
        } else {
            -self.connection[e]
        }
    }
}

/// Angle field `theta`, encoding `v(i) = cos(theta_i) e1(i) + sin(theta_i) e2(i)`.
/// Angles are stored unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub theta: Vec<f64>,
}

impl DiscreteField {
    pub fn new(theta: Vec<f64>) -> Self {
        DiscreteField { theta }
    }

    pub fn constant(n: usize, angle: f64) -> Self {
        DiscreteField {
            theta: vec![angle; n],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), FieldError> {
    if expected == found {
        Ok(())
    } else {
        Err(FieldError::LengthMismatch { expected, found })
    }
}

/// The 3D unit tangent vectors `v(i)`.
pub fn realize(field: &DiscreteField, frames: &FrameField) -> Result<Vec<Vec3>, FieldError> {
    check_len(frames.len(), field.len())?;
    Ok(field
        .theta
        .iter()
        .zip(frames.bases())
        .map(|(&t, b)| b.vector(t))
        .collect())
}

/// Samples an analytic tangent field at the vertices.
pub fn restrict_smooth(
    tri: &Triangulation,
    frames: &FrameField,
    field: impl Fn(&Vec3) -> Vec3 + Sync,
) -> Result<DiscreteField, FieldError> {
    check_len(tri.num_vertices(), frames.len())?;
    let theta = tri
        .vertices()
        .par_iter()
        .zip(frames.bases())
        .enumerate()
        .map(|(i, (p, b))| {
            let v = field(p);
            if v.norm() < 1e-9 {
                Err(FieldError::VanishingField { vertex: i })
            } else {
                Ok(b.angle_of(&v))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiscreteField { theta })
}

/// Value of the piecewise-affine interpolant on triangle `t` at barycentric coordinates `lambda`.
pub fn interpolant_eval(
    tri: &Triangulation,
    vectors: &[Vec3],
    t: usize,
    lambda: [f64; 3],
) -> Result<Vec3, FieldError> {
    check_len(tri.num_vertices(), vectors.len())?;
    let corners = *tri
        .triangles()
        .get(t)
        .ok_or(FieldError::NoSuchTriangle(t))?;
    if lambda.iter().any(|&l| !(l >= -1e-14)) || (lambda.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(FieldError::BadBarycentric(lambda));
    }
    Ok(lambda[0] * vectors[corners[0]]
        + lambda[1] * vectors[corners[1]]
        + lambda[2] * vectors[corners[2]])
}

/// Squared gradient `|grad v|^2` of the interpolant on triangle `t` (constant per triangle).
pub fn interpolant_gradient_sq(tri: &Triangulation, vectors: &[Vec3], t: usize) -> f64 {
    let c = tri.triangles()[t];
    let cot = tri.stiffness().cotangents[t];
    let mut s = 0.0;
    for k in 0..3 {
        s += 0.5 * cot[k] * (vectors[c[(k + 1) % 3]] - vectors[c[(k + 2) % 3]]).norm_squared();
    }
    s / tri.triangle_area(t)
}

/// Barycentric sample points used by the interpolant diagnostics.
pub const SAMPLE_POINTS: [[f64; 3]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Pointwise bounds satisfied by interpolants of unit tangent fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpolantDiagnostics {
    pub max_norm: f64,
    pub min_norm: f64,
    /// `eps * max |grad v|`.
    pub lipschitz_times_eps: f64,
    /// `max |v . gamma(P x)| / eps`.
    pub normal_component_over_eps: f64,
    /// Smallest `C` with `eps^-2 (1 - |v|^2)^2 <= C |grad v|^2` at every sample point.
    pub gl_constant: f64,
}

pub fn interpolant_diagnostics(
    tri: &Triangulation,
    vectors: &[Vec3],
) -> Result<InterpolantDiagnostics, FieldError> {
    check_len(tri.num_vertices(), vectors.len())?;
    let eps = tri.mesh_size();
    let surface = tri.surface();
    let per_triangle: Vec<[f64; 5]> = (0..tri.num_triangles())
        .into_par_iter()
        .map(|t| {
            let c = tri.triangles()[t];
            let g2 = interpolant_gradient_sq(tri, vectors, t);
            let mut out = [0.0, f64::INFINITY, eps * g2.max(0.0).sqrt(), 0.0, 0.0];
            for l in SAMPLE_POINTS {
                let v = l[0] * vectors[c[0]] + l[1] * vectors[c[1]] + l[2] * vectors[c[2]];
                let x = l[0] * tri.vertices()[c[0]]
                    + l[1] * tri.vertices()[c[1]]
                    + l[2] * tri.vertices()[c[2]];
                let n = v.norm();
                out[0] = out[0].max(n);
                out[1] = out[1].min(n);
                let gamma = surface
                    .project(&x)
                    .map(|p| surface.normal_at(&p))
                    .unwrap_or_else(|_| surface.normal_at(&x));
                out[3] = out[3].max(v.dot(&gamma).abs() / eps);
                let defect = (1.0 - n * n).powi(2) / (eps * eps);
                if defect > 0.0 && g2 > 0.0 {
                    out[4] = out[4].max(defect / g2);
                }
            }
            out
        })
        .collect();
    let mut d = InterpolantDiagnostics {
        max_norm: 0.0,
        min_norm: f64::INFINITY,
        lipschitz_times_eps: 0.0,
        normal_component_over_eps: 0.0,
        gl_constant: 0.0,
    };
    for o in per_triangle {
        d.max_norm = d.max_norm.max(o[0]);
        d.min_norm = d.min_norm.min(o[1]);
        d.lipschitz_times_eps = d.lipschitz_times_eps.max(o[2]);
        d.normal_component_over_eps = d.normal_component_over_eps.max(o[3]);
        d.gl_constant = d.gl_constant.max(o[4]);
    }
    Ok(d)
}

/// A smooth nonvanishing unit tangent field on surfaces with zero Euler characteristic:
/// the direction of the major circles on the torus, the tangential part of the x-axis on graphs.
pub fn global_unit_field(surface: &Surface, p: &Vec3) -> Option<Vec3> {
    match surface.kind() {
        SurfaceKind::Sphere { .. } => None,
        SurfaceKind::Torus { .. } => Some(Vec3::new(-p.y, p.x, 0.0).normalize()),
        SurfaceKind::GraphBump { .. } => Some(surface.tangent_part(p, &Vec3::x()).normalize()),
    }
}

/// A prescribed point defect for the hedgehog ansatz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectSpec {
    pub center: Vec3,
    pub charge: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgehogOptions {
    /// Radius of the discs carrying the exact profile; defaults to a fifth of the smallest
    /// defect separation (or of the injectivity radius for a single defect).
    pub disc_radius: Option<f64>,
    pub cg_tolerance: f64,
}

impl Default for HedgehogOptions {
    fn default() -> Self {
        HedgehogOptions {
            disc_radius: None,
            cg_tolerance: 1e-10,
        }
    }
}

/// Unit vector at `p` pointing away from `center` along the geodesic (exact on spheres and
/// planes, chord-based elsewhere).
fn radial_direction(surface: &Surface, center: &Vec3, p: &Vec3) -> Option<Vec3> {
    let r = surface.tangent_part(p, &(p - center));
    let n = r.norm();
    (n > 1e-14 * surface.diameter()).then(|| r / n)
}

/// `prod_j ((z - z_j) / |z - z_j|)^{d_j}`, with negative charges acting by conjugation.
fn product_phase(z: Complex64, zs: &[(Complex64, i32)]) -> Option<Complex64> {
    let mut f = Complex64::new(1.0, 0.0);
    for &(zj, d) in zs {
        let w = z - zj;
        let n = w.norm();
        if n == 0.0 {
            return None;
        }
        let u = w / n;
        for _ in 0..d.unsigned_abs() {
            f *= if d > 0 { u } else { u.conj() };
        }
    }
    Some(f)
}

/// A unit tangent field whose only zeros are the prescribed defects, each with its charge.
///
/// On the sphere it is the product formula in stereographic coordinates from a pole away from
/// every defect; this is smooth at the pole because the charges sum to 2. On graphs the product
/// formula is applied in the `(x, y)` coordinates. On the torus it rotates the major-circle
/// field by the product phase in minimum-image chart coordinates, which is discontinuous across
/// the seams opposite each defect unless the configuration is symmetric.
pub fn reference_field(
    surface: &Surface,
    defects: &[DefectSpec],
) -> impl Fn(&Vec3) -> Option<Vec3> + Sync {
    let surface = *surface;
    let kind = surface.kind();
    let mut pole = Vec3::z();
    let mut frame = (Vec3::x(), Vec3::y());
    let mut zs = Vec::new();
    match kind {
        SurfaceKind::Sphere { .. } => {
            // Generic directions, so the pole never coincides with a mesh vertex.
            let jitter = Vec3::new(0.0131, 0.0297, 0.0071);
            let candidates: Vec<Vec3> = [
                Vec3::z(),
                -Vec3::z(),
                Vec3::x(),
                -Vec3::x(),
                Vec3::y(),
                -Vec3::y(),
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(-1.0, -1.0, 1.0),
                Vec3::new(1.0, -1.0, -1.0),
                Vec3::new(-1.0, 1.0, -1.0),
            ]
            .iter()
            .map(|c| (c.normalize() + jitter).normalize())
            .collect();
            let score = |c: &Vec3| {
                defects
                    .iter()
                    .map(|d| c.dot(&d.center.normalize()))
                    .fold(-1.0, f64::max)
            };
            pole = candidates.iter().copied().fold(candidates[0], |best, c| {
                if score(&c) < score(&best) {
                    c
                } else {
                    best
                }
            });
            let a = TangentBasis::from_normal(pole, Vec3::x(), Vec3::y()).e1;
            frame = (a, a.cross(&pole));
            for d in defects {
                zs.push((
                    stereographic(&d.center.normalize(), &pole, &frame),
                    d.charge,
                ));
            }
        }
        SurfaceKind::GraphBump { .. } => {
            for d in defects {
                zs.push((Complex64::new(d.center.x, d.center.y), d.charge));
            }
        }
        SurfaceKind::Torus { .. } => {
            for d in defects {
                let (u, v) = surface.parameters_of(&d.center);
                zs.push((Complex64::new(u, v), d.charge));
            }
        }
    }
    move |p: &Vec3| -> Option<Vec3> {
        match kind {
            SurfaceKind::Sphere { .. } => {
                let u = p.normalize();
                let z = stereographic(&u, &pole, &frame);
                let f = product_phase(z, &zs)?;
                let (a, b) = frame;
                let s = z.norm_sqr() + 1.0;
                let x_dir = (2.0 * a + 2.0 * z.re * pole) / s - u * (2.0 * z.re / s);
                let y_dir = (2.0 * b + 2.0 * z.im * pole) / s - u * (2.0 * z.im / s);
                let v = f.re * x_dir + f.im * y_dir;
                let n = v.norm();
                (n > 0.0).then(|| v / n)
            }
            SurfaceKind::GraphBump { .. } => {
                let f = product_phase(Complex64::new(p.x, p.y), &zs)?;
                Some(
                    surface
                        .tangent_part(p, &Vec3::new(f.re, f.im, 0.0))
                        .normalize(),
                )
            }
            SurfaceKind::Torus {
                major_radius,
                minor_radius,
            } => {
                let (u, v) = surface.parameters_of(p);
                let mut f = Complex64::new(1.0, 0.0);
                for &(zj, d) in &zs {
                    let w = Complex64::new(
                        major_radius * crate::geom::wrap_angle(u - zj.re),
                        minor_radius * crate::geom::wrap_angle(v - zj.im),
                    );
                    let n = w.norm();
                    if n == 0.0 {
                        return None;
                    }
                    f *= if d > 0 { w / n } else { (w / n).conj() };
                }
                let e_u = Vec3::new(-p.y, p.x, 0.0).normalize();
                let e_v = surface.normal_at(p).cross(&e_u);
                Some(f.re * e_u + f.im * e_v)
            }
        }
    }
}

/// Stereographic coordinate of the unit vector `u` seen from `pole`, with orientation matching
/// the outward normal.
fn stereographic(u: &Vec3, pole: &Vec3, frame: &(Vec3, Vec3)) -> Complex64 {
    let denom = 1.0 - u.dot(pole);
    Complex64::new(u.dot(&frame.0) / denom, u.dot(&frame.1) / denom)
}

/// Field with prescribed point defects: inside geodesic discs around the centres the angle
/// relative to the radial direction is `(d - 1) phi`, `phi` the polar angle in normal coordinates.
/// Outside the discs the angle relative to [`reference_field`] is the kappa-harmonic
/// interpolation of its values on the discs.
pub fn hedgehog_ansatz(
    tri: &Triangulation,
    frames: &FrameField,
    defects: &[DefectSpec],
    opts: &HedgehogOptions,
) -> Result<DiscreteField, FieldError> {
    check_len(tri.num_vertices(), frames.len())?;
    let surface = tri.surface();
    if tri.is_closed() {
        let total: i64 = defects.iter().map(|d| d.charge as i64).sum();
        if total != surface.euler_characteristic() {
            return Err(FieldError::ChargeMismatch {
                total,
                expected: surface.euler_characteristic(),
            });
        }
    }
    if defects.is_empty() {
        return restrict_smooth(tri, frames, |p| {
            global_unit_field(surface, p).unwrap_or_else(Vec3::zeros)
        });
    }
    let centers: Vec<Vec3> = defects
        .iter()
        .map(|d| surface.project(&d.center))
        .collect::<Result<_, _>>()?;
    let projected: Vec<DefectSpec> = defects
        .iter()
        .zip(&centers)
        .map(|(d, c)| DefectSpec {
            center: *c,
            charge: d.charge,
        })
        .collect();
    let sigma = opts.disc_radius.unwrap_or_else(|| {
        let mut sep = surface.injectivity_radius();
        for a in 0..centers.len() {
            for b in a + 1..centers.len() {
                sep = sep.min(surface.proximity_distance(&centers[a], &centers[b]));
            }
        }
        0.2 * sep
    });

    let reference = reference_field(surface, &projected);
    let n = tri.num_vertices();
    let base_angle: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| reference(&tri.vertices()[i]).map_or(0.0, |r| frames.basis(i).angle_of(&r)))
        .collect();

    // Relative angle on disc vertices, unwrapped around the value nearest the centre.
    let mut relative: Vec<Option<f64>> = vec![None; n];
    let mut best = vec![f64::INFINITY; n];
    for (d, c) in defects.iter().zip(&centers) {
        let dist = geodesic_distances_from(tri, c);
        let base = TangentBasis::from_normal(surface.normal_at(c), Vec3::x(), Vec3::y());
        let mut members: Vec<usize> = (0..n)
            .filter(|&i| dist[i] < sigma && dist[i] < best[i])
            .collect();
        members.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        let mut anchor: Option<f64> = None;
        for i in members {
            best[i] = dist[i];
            let p = tri.vertices()[i];
            let b = frames.basis(i);
            let Some(e_r) = radial_direction(surface, c, &p) else {
                continue;
            };
            let phi = base.angle_of(&(p - c));
            let e_phi = b.normal.cross(&e_r);
            let a = (d.charge as f64 - 1.0) * phi;
            let angle = b.angle_of(&(a.cos() * e_r + a.sin() * e_phi));
            let raw = angle - base_angle[i];
            let rel = match anchor {
                None => {
                    let r = crate::geom::wrap_angle(raw);
                    anchor = Some(r);
                    r
                }
                Some(a0) => a0 + crate::geom::wrap_angle(raw - a0),
            };
            relative[i] = Some(rel);
        }
    }

    let psi = harmonic_interpolation(tri, &relative, opts.cg_tolerance);
    Ok(DiscreteField {
        theta: (0..n).map(|i| base_angle[i] + psi[i]).collect(),
    })
}

/// Minimizes `sum_edges kappa (psi_i - psi_j)^2` over the entries of `psi` not fixed.
/// Components without fixed vertices get zero.
fn harmonic_interpolation(tri: &Triangulation, fixed: &[Option<f64>], tol: f64) -> Vec<f64> {
    let n = tri.num_vertices();
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        slot[i] = k;
    }
    let mut psi: Vec<f64> = fixed.iter().map(|x| x.unwrap_or(0.0)).collect();
    if free.is_empty() || free.len() == n {
        return psi;
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        free.iter()
            .map(|&i| {
                let mut acc = 0.0;
                for &(j, e) in tri.neighbours(i) {
                    let xj = if slot[j] != usize::MAX {
                        x[slot[j]]
                    } else {
                        0.0
                    };
                    acc += tri.kappa(e) * (x[slot[i]] - xj);
                }
                acc
            })
            .collect()
    };
    let b: Vec<f64> = free
        .iter()
        .map(|&i| {
            tri.neighbours(i)
                .iter()
                .filter(|&&(j, _)| slot[j] == usize::MAX)
                .map(|&(j, e)| tri.kappa(e) * psi[j])
                .sum()
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; free.len()];
    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..(20 * free.len()).max(100) {
            let ap = apply(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= tol * b_norm {
                break;
            }
            let beta = rr_new / rr;
            for k in 0..p.len() {
                p[k] = r[k] + beta * p[k];
            }
            rr = rr_new;
        }
    }
    for (k, &i) in free.iter().enumerate() {
        psi[i] = x[k];
    }
    psi
}

/// Writes `vertex_index,theta` rows after a `# mesh_hash=` header line.
pub fn write_field_csv(
    field: &DiscreteField,
    mesh_hash: &str,
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "# mesh_hash={mesh_hash}")?;
    writeln!(w, "vertex_index,theta")?;
    for (i, t) in field.theta.iter().enumerate() {
        writeln!(w, "{i},{t:.16e}")?;
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`], checking the mesh hash when one is given.
pub fn read_field_csv(
    r: impl BufRead,
    expected_hash: Option<&str>,
) -> Result<DiscreteField, FieldError> {
    let mut theta = Vec::new();
    let mut seen_header = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| FieldError::Parse(e.to_string()))?;
        if let Some(h) = line.strip_prefix("# mesh_hash=") {
            if let Some(exp) = expected_hash {
                if h != exp {
                    return Err(FieldError::MeshHashMismatch {
                        expected: exp.into(),
                        found: h.into(),
                    });
                }
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != "vertex_index,theta" {
                return Err(FieldError::Parse(format!("unexpected header {line:?}")));
            }
            seen_header = true;
            continue;
        }
        let (i, t) = line.split_once(',').ok_or_else(|| {
            FieldError::Parse(format!("line {}: expected two columns", lineno + 1))
        })?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|e| FieldError::Parse(format!("line {}: {e}", lineno + 1)))?;
        if i != theta.len() {
            return Err(FieldError::Parse(format!(
                "line {}: vertex {i} out of order",
                lineno + 1
            )));
        }
        theta.push(
            t.trim()
                .parse()
                .map_err(|e| FieldError::Parse(format!("line {}: {e}", lineno + 1)))?,
        );
    }
    Ok(DiscreteField { theta })
}

/// Uniform random angles in `(-pi, pi]`.
pub fn random_field(n: usize, rng: &mut impl rand::Rng) -> DiscreteField {
    DiscreteField {
        theta: (0..n)
            .map(|_| PI - rng.random::<f64>() * 2.0 * PI)
            .collect(),
    }
}

/// Transfers a field to another triangulation of the same surface: each target vertex takes
/// the spin of the nearest source vertex, transported to its own tangent plane.
pub fn prolongate(
    coarse: &Triangulation,
    coarse_frames: &FrameField,
    field: &DiscreteField,
    fine: &Triangulation,
    fine_frames: &FrameField,
) -> Result<DiscreteField, FieldError> {
    check_len(coarse.num_vertices(), field.len())?;
    check_len(coarse.num_vertices(), coarse_frames.len())?;
    check_len(fine.num_vertices(), fine_frames.len())?;
    let h = coarse.mesh_size();
    let key = |p: &Vec3| {
        (
            (p.x / h).floor() as i64,
            (p.y / h).floor() as i64,
            (p.z / h).floor() as i64,
        )
    };
    let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in coarse.vertices().iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let theta = fine
        .vertices()
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let (cx, cy, cz) = key(p);
            let mut best = (f64::INFINITY, usize::MAX);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        for &i in cells
                            .get(&(cx + dx, cy + dy, cz + dz))
                            .into_iter()
                            .flatten()
                        {
                            let d = (coarse.vertices()[i] - p).norm_squared();
                            if d < best.0 || (d == best.0 && i < best.1) {
                                best = (d, i);
                            }
                        }
                    }
                }
            }
            if best.1 == usize::MAX {
                // Farther than one cell from every source vertex: fall back to a full scan.
                best = coarse
                    .vertices()
                    .iter()
                    .enumerate()
                    .map(|(i, q)| ((q - p).norm_squared(), i))
                    .fold(
                        (f64::INFINITY, usize::MAX),
                        |a, b| if b.0 < a.0 { b } else { a },
                    );
            }
            let from = coarse_frames.basis(best.1);
            let to = fine_frames.basis(k);
            let v = transport_between(&from.normal, &to.normal, &from.vector(field.theta[best.1]));
            to.angle_of(&v)
        })
        .collect();
    Ok(DiscreteField { theta })
}

/// Vertices of the triangles listed, deduplicated and sorted.
pub fn triangle_vertices(tri: &Triangulation, triangles: &[usize]) -> Vec<usize> {
    let set: HashSet<usize> = triangles.iter().flat_map(|&t| tri.triangles()[t]).collect();
    let mut v: Vec<usize> = set.into_iter().collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, planar_grid, torus_mesh, MeshOrigin};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prolongation_keeps_smooth_fields() {
        let s = Surface::sphere(1.0).unwrap();
        let c = icosphere(&s, 2).unwrap();
        let f = icosphere(&s, 3).unwrap();
        let (cf, ff) = (FrameField::build(&c), FrameField::build(&f));
        let u = |p: &Vec3| s.tangent_part(p, &Vec3::new(0.3, 0.5, 0.81)).normalize();
        let field = restrict_smooth(&c, &cf, u).unwrap();
        let up = prolongate(&c, &cf, &field, &f, &ff).unwrap();
        let v = realize(&up, &ff).unwrap();
        // Nested refinement: old vertices keep their spins exactly.
        for (i, (vi, p)) in v
            .iter()
            .zip(f.vertices())
            .take(c.num_vertices())
            .enumerate()
        {
            assert!((vi - u(p)).norm() < 1e-12, "vertex {i}");
        }
        assert!(crate::vorticity::total_winding(&f, &ff, &up).0 == 2);
    }

    #[test]
    fn frames_examples() {
        let b = TangentBasis::from_normal(Vec3::z(), Vec3::x(), Vec3::y());
        assert_eq!(b.e1, Vec3::x());
        assert_eq!(b.e2, Vec3::y());
        let f = TangentBasis::from_normal(Vec3::x(), Vec3::x(), Vec3::y());
        assert_eq!(f.e1, Vec3::y());
        assert_relative_eq!(f.e1.cross(&f.e2), f.normal, epsilon = 1e-15);
        let tri = icosphere(&Surface::sphere(1.0).unwrap(), 3).unwrap();
        let frames = FrameField::build(&tri);
        for (b, p) in frames.bases().iter().zip(tri.vertices()) {
            assert!(b.e1.dot(&b.e2).abs() < 1e-12);
            assert!((b.e1.norm() - 1.0).abs() < 1e-12 && (b.e2.norm() - 1.0).abs() < 1e-12);
            assert!((b.e1.cross(&b.e2) - b.normal).norm() < 1e-12);
            assert!((b.normal - p.normalize()).norm() < 1e-12);
        }
    }

    #[test]
    fn realize_examples() {
        let tri = icosphere(&Surface::sphere(1.0).unwrap(), 2).unwrap();
        let frames = FrameField::build(&tri);
        let n = tri.num_vertices();
        let v = realize(&DiscreteField::constant(n, 0.0), &frames).unwrap();
        assert!(v.iter().zip(frames.bases()).all(|(v, b)| *v == b.e1));
        let v = realize(&DiscreteField::constant(n, PI / 2.0), &frames).unwrap();
        assert!(v
            .iter()
            .zip(frames.bases())
            .all(|(v, b)| (v - b.e2).norm() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(n, &mut rng);
        let v = realize(&f, &frames).unwrap();
        assert!(v
            .iter()
            .zip(frames.bases())
            .all(|(v, b)| v.dot(&b.normal).abs() < 1e-12));
        assert!(matches!(
            realize(&DiscreteField::constant(3, 0.0), &frames),
            Err(FieldError::LengthMismatch { .. })
        ));
        // restrict_smooth inverts realize on vectors.
        let back = restrict_smooth(&tri, &frames, |p| {
            let i = tri.vertices().iter().position(|q| q == p).unwrap();
            v[i]
        })
        .unwrap();
        let again = realize(&back, &frames).unwrap();
        assert!(again.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn restrict_smooth_examples() {
        let s = Surface::torus(2.0, 0.5).unwrap();
        let tri = torus_mesh(&s, 24, 8).unwrap();
        let frames = FrameField::build(&tri);
        let f = restrict_smooth(&tri, &frames, |p| global_unit_field(&s, p).unwrap()).unwrap();
        assert_eq!(f.len(), tri.num_vertices());
        let e1 = restrict_smooth(&tri, &frames, |p| {
            TangentBasis::from_normal(s.normal_at(p), Vec3::x(), Vec3::y()).e1 * 2.0
        })
        .unwrap();
        assert!(e1.theta.iter().all(|&t| t.abs() < 1e-12));
        let sphere = icosphere(&Surface::sphere(1.0).unwrap(), 1).unwrap();
        let fs = FrameField::build(&sphere);
        let longitude = restrict_smooth(&sphere, &fs, |p| Vec3::new(-p.y, p.x, 0.0));
        assert!(matches!(longitude, Err(FieldError::VanishingField { .. })));
    }

    #[test]
    fn interpolant_examples() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let tri =
            Triangulation::new(Surface::plane(), v, vec![[0, 1, 2]], MeshOrigin::Imported).unwrap();
        let vec = vec![Vec3::x(), -Vec3::x(), Vec3::y()];
        assert_eq!(
            interpolant_eval(&tri, &vec, 0, [1.0, 0.0, 0.0]).unwrap(),
            Vec3::x()
        );
        assert_eq!(
            interpolant_eval(&tri, &vec, 0, [0.5, 0.5, 0.0]).unwrap(),
            Vec3::zeros()
        );
        assert!(matches!(
            interpolant_eval(&tri, &vec, 0, [0.7, 0.7, -0.4]),
            Err(FieldError::BadBarycentric(_))
        ));
        assert!(matches!(
            interpolant_eval(&tri, &vec, 1, [1.0, 0.0, 0.0]),
            Err(FieldError::NoSuchTriangle(1))
        ));
    }

    #[test]
    fn interpolant_norm_at_most_one() {
        let tri = icosphere(&Surface::sphere(1.0).unwrap(), 3).unwrap();
        let frames = FrameField::build(&tri);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = realize(&random_field(tri.num_vertices(), &mut rng), &frames).unwrap();
        let d = interpolant_diagnostics(&tri, &v).unwrap();
        assert!(d.max_norm <= 1.0 + 1e-12);
        assert!(d.min_norm >= 0.0);
    }

    #[test]
    fn ansatz_charge_guard_and_torus_branch() {
        let sphere = icosphere(&Surface::sphere(1.0).unwrap(), 2).unwrap();
        let fs = FrameField::build(&sphere);
        let one = [DefectSpec {
            center: Vec3::z(),
            charge: 1,
        }];
        assert!(matches!(
            hedgehog_ansatz(&sphere, &fs, &one, &HedgehogOptions::default()),
            Err(FieldError::ChargeMismatch {
                total: 1,
                expected: 2
            })
        ));
        let s = Surface::torus(2.0, 0.5).unwrap();
        let tri = torus_mesh(&s, 24, 8).unwrap();
        let frames = FrameField::build(&tri);
        let a = hedgehog_ansatz(&tri, &frames, &[], &HedgehogOptions::default()).unwrap();
        let b = restrict_smooth(&tri, &frames, |p| global_unit_field(&s, p).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planar_ansatz_is_hedgehog() {
        let g = planar_grid(&Surface::plane(), [-1.0, -1.0], 0.1, 20, 20).unwrap();
        let frames = FrameField::build(&g);
        let f = hedgehog_ansatz(
            &g,
            &frames,
            &[DefectSpec {
                center: Vec3::new(0.05, 0.02, 0.0),
                charge: 1,
            }],
            &HedgehogOptions {
                disc_radius: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        let v = realize(&f, &frames).unwrap();
        for (p, v) in g.vertices().iter().zip(&v) {
            let r = p - Vec3::new(0.05, 0.02, 0.0);
            if r.norm() < 0.5 {
                assert!((v - r.normalize()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let f = DiscreteField::new(vec![0.1, -3.0, 1e-300, 7.5]);
        let mut buf = Vec::new();
        write_field_csv(&f, "abc", &mut buf).unwrap();
        assert_eq!(read_field_csv(buf.as_slice(), Some("abc")).unwrap(), f);
        assert!(matches!(
            read_field_csv(buf.as_slice(), Some("def")),
            Err(FieldError::MeshHashMismatch { .. })
        ));
    }
}
