//! Discrete XY energy, its gradient in angle coordinates, and continuum reference energies.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{check_len, DiscreteField, FieldError, FrameField};
use crate::geom::Vec3;
use crate::mesh::Triangulation;
use crate::surface::{Surface, SurfaceKind};

/// Minimal quadrature resolution accepted by [`extrinsic_energy`].
pub const MIN_QUADRATURE_RESOLUTION: usize = 32;

const CHUNK: usize = 4096;
const MIN_LEN: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("quadrature resolution {0} is below the minimum {MIN_QUADRATURE_RESOLUTION}")]
    QuadratureTooCoarse(usize),
    #[error("the sphere carries no smooth unit tangent field")]
    HairyBallUnsupported,
    #[error("triangle index {0} out of range")]
    NoSuchTriangle(usize),
}

/// Energy of a field split over named regions, with the logarithmic divergence removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub per_region: BTreeMap<String, f64>,
    pub renormalized_remainder: f64,
    pub log_eps: f64,
    pub defect_count: usize,
}

impl EnergyBreakdown {
    pub fn new(
        total: f64,
        per_region: BTreeMap<String, f64>,
        eps: f64,
        defect_count: usize,
    ) -> Self {
        EnergyBreakdown {
            total,
            per_region,
            renormalized_remainder: renormalized_remainder(total, eps, defect_count),
            log_eps: eps.ln(),
            defect_count,
        }
    }
}

/// `energy - K pi log(1/eps)`.
pub fn renormalized_remainder(energy: f64, eps: f64, defect_count: usize) -> f64 {
    energy - defect_count as f64 * PI * (1.0 / eps).ln()
}

/// Deterministic parallel sum: fixed chunks, partial sums added in order.
pub(crate) fn ordered_sum<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = items
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(&f).sum())
        .collect();
    partial.iter().sum()
}

/// `1/2 sum_edges kappa |v(i) - v(j)|^2` for realized vectors.
pub fn xy_energy_vectors(tri: &Triangulation, v: &[Vec3]) -> f64 {
    let kappa = &tri.stiffness().kappa;
    let idx: Vec<usize> = (0..tri.edges().len()).collect();
    0.5 * ordered_sum(&idx, |&e| {
        let [i, j] = tri.edges()[e];
        kappa[e] * (v[i] - v[j]).norm_squared()
    })
}

/// Energy carried by the listed triangles: each triangle contributes
/// `1/2 sum_k (cot_k / 2) |v(k+1) - v(k+2)|^2`, so regions are additive.
pub fn region_energy_vectors(tri: &Triangulation, v: &[Vec3], triangles: &[usize]) -> f64 {
    ordered_sum(triangles, |&t| triangle_energy(tri, v, t))
}

pub fn triangle_energy(tri: &Triangulation, v: &[Vec3], t: usize) -> f64 {
    let c = tri.triangles()[t];
    let cot = tri.stiffness().cotangents[t];
    let mut s = 0.0;
    for k in 0..3 {
        s += cot[k] * (v[c[(k + 1) % 3]] - v[c[(k + 2) % 3]]).norm_squared();
    }
    0.25 * s
}

/// Discrete XY energy of `field`, over the whole mesh or over a triangle subset.
pub fn xy_energy(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    region: Option<&[usize]>,
) -> Result<f64, EnergyError> {
    check_len(tri.num_vertices(), field.len())?;
    check_len(tri.num_vertices(), frames.len())?;
    let v = crate::field::realize(field, frames)?;
    match region {
        None => Ok(xy_energy_vectors(tri, &v)),
        Some(ts) => {
            if let Some(&t) = ts.iter().find(|&&t| t >= tri.num_triangles()) {
                return Err(EnergyError::NoSuchTriangle(t));
            }
            Ok(region_energy_vectors(tri, &v, ts))
        }
    }
}

/// `dE/dtheta_i = sum_j kappa_ij (v(i) - v(j)) . dv(i)/dtheta_i`.
pub fn xy_gradient(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
) -> Result<Vec<f64>, EnergyError> {
    check_len(tri.num_vertices(), field.len())?;
    check_len(tri.num_vertices(), frames.len())?;
    let v = crate::field::realize(field, frames)?;
    Ok(gradient_from_vectors(
        tri,
        frames,
        field,
        &v,
        &tri.stiffness().kappa,
    ))
}

pub(crate) fn gradient_from_vectors(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    v: &[Vec3],
    kappa: &[f64],
) -> Vec<f64> {
    (0..tri.num_vertices())
        .into_par_iter()
        .with_min_len(MIN_LEN)
        .map(|i| {
            let mut acc = Vec3::zeros();
            for &(j, e) in tri.neighbours(i) {
                acc += kappa[e] * (v[i] - v[j]);
            }
            let b = frames.basis(i);
            let (s, c) = field.theta[i].sin_cos();
            acc.dot(&(c * b.e2 - s * b.e1))
        })
        .collect()
}

/// Deterministic sum of `f(e, edge)` over all edges.
fn edge_sum(tri: &Triangulation, f: impl Fn(usize, [usize; 2]) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = tri
        .edges()
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(|(k, &e)| f(c * CHUNK + k, e))
                .sum()
        })
        .collect();
    partial.iter().sum()
}

/// Energy and gradient for a given per-edge stiffness (whole-mesh or region-restricted).
pub(crate) fn energy_and_gradient_with(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    kappa: &[f64],
) -> (f64, Vec<f64>) {
    let v: Vec<Vec3> = field
        .theta
        .par_iter()
        .with_min_len(MIN_LEN)
        .zip(frames.bases())
        .map(|(&t, b)| b.vector(t))
        .collect();
    let energy = 0.5 * edge_sum(tri, |e, [i, j]| kappa[e] * (v[i] - v[j]).norm_squared());
    (energy, gradient_from_vectors(tri, frames, field, &v, kappa))
}

/// `E(old) - E(new)` evaluated edge by edge from accurate differences of the spin vectors, so
/// that decreases far below the roundoff of `E` itself are resolved.
pub(crate) fn energy_decrease_with(
    tri: &Triangulation,
    frames: &FrameField,
    old: &[f64],
    new: &[f64],
    kappa: &[f64],
) -> f64 {
    let (v, dv): (Vec<Vec3>, Vec<Vec3>) = old
        .par_iter()
        .with_min_len(MIN_LEN)
        .zip(new)
        .zip(frames.bases())
        .map(|((&a, &b), basis)| {
            let (sh, ch) = (0.5 * (a + b)).sin_cos();
            let sd = (0.5 * (b - a)).sin();
            (basis.vector(a), 2.0 * sd * (ch * basis.e2 - sh * basis.e1))
        })
        .unzip();
    edge_sum(tri, |e, [i, j]| {
        // v'(i).v'(j) - v(i).v(j) = v'(i).dv(j) + dv(i).v(j)
        kappa[e] * ((v[i] + dv[i]).dot(&dv[j]) + dv[i].dot(&v[j]))
    })
}

/// Per-edge stiffness assembled only from the listed triangles.
pub fn region_stiffness(tri: &Triangulation, triangles: &[usize]) -> Vec<f64> {
    let mut kappa = vec![0.0; tri.edges().len()];
    for &t in triangles {
        let te = tri.triangle_edges(t);
        let cot = tri.stiffness().cotangents[t];
        for k in 0..3 {
            kappa[te[k]] += 0.5 * cot[k];
        }
    }
    kappa
}

/// Weightings of the continuum energy of a smooth unit tangent field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrinsicWeighting {
    /// `1/2 |Du|^2 + 1/2 |dgamma[u]|^2 = 1/2 |grad_s u|^2`, the limit of the discrete energy.
    HalfDirichlet,
    /// `|Du|^2 + 1/2 |dgamma[u]|^2`.
    ExtrinsicEnergy,
    /// `|Du|^2 + |dgamma[u]|^2`.
    GammaLimit,
}

/// Pointwise pieces of the surface gradient of a tangent field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSplit {
    /// `|grad_s u|^2`, from finite differences of the ambient field.
    pub full: f64,
    /// `|Du|^2`, the covariant (tangential) part.
    pub covariant: f64,
    /// `|dgamma[u]|^2` from the analytic shape operator.
    pub shape: f64,
}

/// Splits `grad_s u` at chart parameters `(a, b)`; `u` is differentiated by central differences
/// along an orthonormal tangent basis built from the chart.
pub fn gradient_split(
    surface: &Surface,
    u: &impl Fn(&Vec3) -> Vec3,
    a: f64,
    b: f64,
) -> GradientSplit {
    const H: f64 = 1e-5;
    let p = surface.chart(a, b);
    let (cu, cv) = surface.chart_partials(a, b);
    let du = (u(&surface.chart(a + H, b)) - u(&surface.chart(a - H, b))) / (2.0 * H);
    let dv = (u(&surface.chart(a, b + H)) - u(&surface.chart(a, b - H))) / (2.0 * H);
    // Orthonormal t1 = cu / |cu|, t2 = (cv - (cv.t1) t1) / n2, written in chart coordinates.
    let l1 = cu.norm();
    let t1 = cu / l1;
    let w = cv - cv.dot(&t1) * t1;
    let n2 = w.norm();
    let d1 = du / l1;
    let d2 = (dv - cv.dot(&t1) * d1) / n2;
    let gamma = surface.normal_at(&p);
    let tang = |x: Vec3| x - gamma * gamma.dot(&x);
    let value = u(&p);
    GradientSplit {
        full: d1.norm_squared() + d2.norm_squared(),
        covariant: tang(d1).norm_squared() + tang(d2).norm_squared(),
        shape: surface.shape_operator_at(&p, &value).norm_squared(),
    }
}

/// Continuum energy of a smooth unit tangent field by midpoint quadrature on the parameter grid.
pub fn extrinsic_energy(
    surface: &Surface,
    u: impl Fn(&Vec3) -> Vec3 + Sync,
    resolution: usize,
    weighting: ExtrinsicWeighting,
) -> Result<f64, EnergyError> {
    if matches!(surface.kind(), SurfaceKind::Sphere { .. }) {
        return Err(EnergyError::HairyBallUnsupported);
    }
    if resolution < MIN_QUADRATURE_RESOLUTION {
        return Err(EnergyError::QuadratureTooCoarse(resolution));
    }
    let ([u0, u1], [v0, v1]) = surface.parameter_domain();
    let ha = (u1 - u0) / resolution as f64;
    let hb = (v1 - v0) / resolution as f64;
    let rows: Vec<f64> = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let a = u0 + (i as f64 + 0.5) * ha;
            let mut row = 0.0;
            for j in 0..resolution {
                let b = v0 + (j as f64 + 0.5) * hb;
                let (cu, cv) = surface.chart_partials(a, b);
                let g = gradient_split(surface, &u, a, b);
                let density = match weighting {
                    ExtrinsicWeighting::HalfDirichlet => 0.5 * (g.covariant + g.shape),
                    ExtrinsicWeighting::ExtrinsicEnergy => g.covariant + 0.5 * g.shape,
                    ExtrinsicWeighting::GammaLimit => g.covariant + g.shape,
                };
                row += density * cu.cross(&cv).norm();
            }
            row
        })
        .collect();
    Ok(rows.iter().sum::<f64>() * ha * hb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{global_unit_field, random_field, realize, restrict_smooth};
    use crate::mesh::{icosphere, planar_grid, MeshOrigin};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_edge_example() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let tri = Triangulation::new(
            Surface::plane(),
            v,
            vec![[0, 1, 2], [0, 2, 3]],
            MeshOrigin::Imported,
        )
        .unwrap();
        let mut kappa = vec![0.0; tri.edges().len()];
        kappa[tri.edge_index(0, 1).unwrap()] = 1.0;
        let frames = FrameField::build(&tri);
        let f = DiscreteField::new(vec![0.0, PI / 2.0, 0.0, 0.0]);
        let (energy, _) = energy_and_gradient_with(&tri, &frames, &f, &kappa);
        assert_relative_eq!(energy, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_field_on_flat_patch() {
        let g = planar_grid(&Surface::plane(), [0.0, 0.0], 0.1, 10, 10).unwrap();
        let frames = FrameField::build(&g);
        let f = DiscreteField::constant(g.num_vertices(), 0.7);
        assert_eq!(xy_energy(&g, &frames, &f, None).unwrap(), 0.0);
        assert!(xy_gradient(&g, &frames, &f)
            .unwrap()
            .iter()
            .all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn energy_matches_interpolant_dirichlet_integral() {
        let tri = icosphere(&Surface::sphere(1.0).unwrap(), 2).unwrap();
        let frames = FrameField::build(&tri);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(tri.num_vertices(), &mut rng);
        let v = realize(&f, &frames).unwrap();
        let e = xy_energy(&tri, &frames, &f, None).unwrap();
        let integral: f64 = (0..tri.num_triangles())
            .map(|t| {
                0.5 * crate::field::interpolant_gradient_sq(&tri, &v, t) * tri.triangle_area(t)
            })
            .sum();
        assert_relative_eq!(e, integral, max_relative = 1e-12);
        let all: Vec<usize> = (0..tri.num_triangles()).collect();
        assert_relative_eq!(
            xy_energy(&tri, &frames, &f, Some(&all)).unwrap(),
            e,
            max_relative = 1e-12
        );
        assert!(matches!(
            xy_energy(&tri, &frames, &f, Some(&[100000])),
            Err(EnergyError::NoSuchTriangle(_))
        ));
    }

    #[test]
    fn remainder_examples() {
        assert_relative_eq!(
            renormalized_remainder(PI * 2.0 * (1.0f64 / 0.1).ln(), 0.1, 2),
            0.0,
            epsilon = 1e-14
        );
        assert_eq!(renormalized_remainder(3.5, 0.01, 0), 3.5);
    }

    #[test]
    fn gauss_decomposition_is_orthogonal() {
        let s = Surface::graph_bump(0.3, 2.0).unwrap();
        let field = |p: &Vec3| {
            let t = s.tangent_part(
                p,
                &Vec3::new((3.0 * p.y).cos(), (2.0 * p.x).sin() + 0.1, 0.4),
            );
            t.normalize()
        };
        for (a, b) in [(0.3, 0.7), (1.1, 0.2), (1.7, 1.9)] {
            let g = gradient_split(&s, &field, a, b);
            assert_relative_eq!(g.full, g.covariant + g.shape, max_relative = 1e-4);
        }
        let t = Surface::torus(2.0, 0.5).unwrap();
        let e_phi = |p: &Vec3| global_unit_field(&t, p).unwrap();
        let g = gradient_split(&t, &e_phi, 0.4, 1.0);
        assert_relative_eq!(g.full, g.covariant + g.shape, max_relative = 1e-6);
        let rho: f64 = 2.0 + 0.5 * 1.0f64.cos();
        assert_relative_eq!(
            g.shape,
            1.0f64.cos().powi(2) / (rho * rho),
            max_relative = 1e-10
        );
        assert_relative_eq!(g.full, 1.0 / (rho * rho), max_relative = 1e-8);
    }

    #[test]
    fn torus_major_field_energy() {
        let t = Surface::torus(2.0, 0.5).unwrap();
        let f = |p: &Vec3| global_unit_field(&t, p).unwrap();
        let half = extrinsic_energy(&t, f, 64, ExtrinsicWeighting::HalfDirichlet).unwrap();
        // 1/2 int |grad_s e_phi|^2 = 2 pi^2 r / sqrt(R^2 - r^2).
        let exact = 2.0 * PI * PI * 0.5 / (4.0f64 - 0.25).sqrt();
        assert_relative_eq!(half, exact, max_relative = 1e-8);
        let e64 = extrinsic_energy(&t, f, 64, ExtrinsicWeighting::ExtrinsicEnergy).unwrap();
        let e128 = extrinsic_energy(&t, f, 128, ExtrinsicWeighting::ExtrinsicEnergy).unwrap();
        assert!((e64 - e128).abs() < 1e-3);
        // 2 pi r int (sin^2 + cos^2 / 2) / (R + r cos) dpsi, by adaptive quadrature.
        assert_relative_eq!(e128, 7.603_850_047_775_78, max_relative = 1e-8);
        assert!(matches!(
            extrinsic_energy(
                &Surface::sphere(1.0).unwrap(),
                |p| *p,
                64,
                ExtrinsicWeighting::HalfDirichlet
            ),
            Err(EnergyError::HairyBallUnsupported)
        ));
        assert!(matches!(
            extrinsic_energy(&t, f, 16, ExtrinsicWeighting::HalfDirichlet),
            Err(EnergyError::QuadratureTooCoarse(16))
        ));
        let flat = extrinsic_energy(
            &Surface::plane(),
            |_| Vec3::x(),
            32,
            ExtrinsicWeighting::GammaLimit,
        )
        .unwrap();
        assert_eq!(flat, 0.0);
    }

    #[test]
    fn frame_independence() {
        let tri = icosphere(&Surface::sphere(1.0).unwrap(), 3).unwrap();
        let a = FrameField::build(&tri);
        let b = FrameField::with_axes(&tri, Vec3::new(0.3, -0.5, 0.8).normalize(), Vec3::z());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_field(tri.num_vertices(), &mut rng);
        let v = realize(&f, &a).unwrap();
        let g = restrict_smooth(&tri, &b, |p| {
            v[tri.vertices().iter().position(|q| q == p).unwrap()]
        })
        .unwrap();
        assert_relative_eq!(
            xy_energy(&tri, &a, &f, None).unwrap(),
            xy_energy(&tri, &b, &g, None).unwrap(),
            max_relative = 1e-12
        );
    }
}
