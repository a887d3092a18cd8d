//! The annulus problem: minimal energy of an index-one unit tangent field on the geodesic
//! annulus `A(δ/2, δ)` around a point, discretized on a polar grid in normal coordinates.
//!
//! The unknown is the angle `psi` of the field relative to the radial direction `e_r`, which
//! makes the index constraint automatic. In geodesic polar coordinates with metric
//! `dr² + G(r)² dφ²` the energy density is `psi_r² + (psi_φ + G')² / G²`.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{optimize, MinimizeError, Objective, SolveTrace, StepRule};
use crate::field::TangentBasis;
use crate::geom::Vec3;
use crate::surface::{Surface, SurfaceKind};

/// Limit of the annulus energy as `δ → 0`, and its exact value on the plane.
pub const FLAT_ANNULUS_ETA: f64 = PI * LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnulusOptions {
    /// Number of angular grid nodes; the radial grid has `resolution / 4 + 1` nodes.
    pub resolution: usize,
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
}

impl Default for AnnulusOptions {
    fn default() -> Self {
        AnnulusOptions {
            resolution: 256,
            max_iters: 50_000,
            grad_tol: None,
        }
    }
}

/// Minimizer of the annulus problem sampled on the polar grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusResult {
    pub center: [f64; 3],
    pub delta: f64,
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    /// `psi[i * angles.len() + j]` at radius `radii[i]` and polar angle `angles[j]`.
    pub psi: Vec<f64>,
    pub eta: f64,
    #[serde(skip)]
    pub trace: SolveTrace,
    #[serde(skip)]
    basis: Option<TangentBasis>,
    #[serde(skip)]
    surface: Option<Surface>,
}

/// `(G, G')` of the geodesic polar metric.
#[derive(Clone, Copy)]
enum Polar {
    Flat,
    Sphere(f64),
}

impl Polar {
    fn g(self, r: f64) -> (f64, f64) {
        match self {
            Polar::Flat => (r, 1.0),
            Polar::Sphere(radius) => (radius * (r / radius).sin(), (r / radius).cos()),
        }
    }
}

struct AnnulusObjective {
    nr: usize,
    nphi: usize,
    /// Angular weight and transport angle per ring.
    ring: Vec<(f64, f64)>,
    /// Radial weight between rings `i` and `i + 1`.
    spoke: Vec<f64>,
}

impl Objective for AnnulusObjective {
    fn dim(&self) -> usize {
        self.nr * self.nphi
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = self.nphi;
        let mut e = 0.0;
        let mut g = vec![0.0; x.len()];
        for (i, &(w, turn)) in self.ring.iter().enumerate() {
            for j in 0..n {
                let a = i * n + j;
                let b = i * n + (j + 1) % n;
                let d = x[b] - x[a] + turn;
                e += w * (1.0 - d.cos());
                let s = w * d.sin();
                g[b] += s;
                g[a] -= s;
            }
        }
        for (i, &w) in self.spoke.iter().enumerate() {
            for j in 0..n {
                let a = i * n + j;
                let b = a + n;
                let d = x[b] - x[a];
                e += w * (1.0 - d.cos());
                let s = w * d.sin();
                g[b] += s;
                g[a] -= s;
            }
        }
        (e, g)
    }

    fn decrease(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.nphi;
        // cos(b) - cos(a) = 2 sin((a + b)/2) sin((a - b)/2)
        let term = |w: f64, a: f64, b: f64| w * 2.0 * (0.5 * (a + b)).sin() * (0.5 * (a - b)).sin();
        let mut s = 0.0;
        for (i, &(w, turn)) in self.ring.iter().enumerate() {
            for j in 0..n {
                let (a, b) = (i * n + j, i * n + (j + 1) % n);
                s += term(w, x[b] - x[a] + turn, y[b] - y[a] + turn);
            }
        }
        for (i, &w) in self.spoke.iter().enumerate() {
            for j in 0..n {
                let a = i * n + j;
                s += term(w, x[a + n] - x[a], y[a + n] - y[a]);
            }
        }
        s
    }
}

/// Solves the annulus problem around `center` on spheres and the plane.
pub fn annulus_minimizer(
    surface: &Surface,
    center: &Vec3,
    delta: f64,
    opts: &AnnulusOptions,
) -> Result<AnnulusResult, MinimizeError> {
    let (polar, shape_sq) = match surface.kind() {
        SurfaceKind::Sphere { radius } => (Polar::Sphere(radius), 1.0 / (radius * radius)),
        SurfaceKind::GraphBump { .. } if surface.is_plane() => (Polar::Flat, 0.0),
        _ => return Err(MinimizeError::UnsupportedSurface(
            "the annulus problem needs geodesic polar coordinates in closed form (sphere or plane)"
                .into(),
        )),
    };
    if opts.resolution < 64 {
        return Err(MinimizeError::Precondition(format!(
            "annulus resolution {} is below 64",
            opts.resolution
        )));
    }
    if !(delta > 0.0 && delta < surface.injectivity_radius()) {
        return Err(MinimizeError::Precondition(format!(
            "delta {delta} must lie in (0, injectivity radius {})",
            surface.injectivity_radius()
        )));
    }
    if opts.max_iters == 0 {
        return Err(MinimizeError::InvalidOptions(
            "max_iters must be at least 1".into(),
        ));
    }
    let residual = surface.on_surface_residual(center);
    if residual > crate::surface::ON_SURFACE_TOL * surface.diameter().max(1.0) {
        return Err(MinimizeError::Surface(
            crate::surface::SurfaceError::PointOffSurface { residual },
        ));
    }

    let nphi = opts.resolution;
    let nr = opts.resolution / 4 + 1;
    let dphi = 2.0 * PI / nphi as f64;
    let dr = 0.5 * delta / (nr - 1) as f64;
    let radii: Vec<f64> = (0..nr).map(|i| 0.5 * delta + i as f64 * dr).collect();
    let angles: Vec<f64> = (0..nphi).map(|j| j as f64 * dphi).collect();
    // Trapezoid weights in r, with the factor 1/2 of the energy and 2(1 - cos) ≈ d².
    let ring = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let wr = if i == 0 || i == nr - 1 { 0.5 * dr } else { dr };
            let (g, gp) = polar.g(r);
            (wr / (g * dphi), gp * dphi)
        })
        .collect();
    let spoke = (0..nr - 1)
        .map(|i| polar.g(radii[i] + 0.5 * dr).0 * dphi / dr)
        .collect();
    let obj = AnnulusObjective {
        nr,
        nphi,
        ring,
        spoke,
    };

    // A deterministic non-minimizing start, so that the solver has actual work to do.
    let x0: Vec<f64> = (0..nr * nphi)
        .map(|k| {
            let (i, j) = (k / nphi, k % nphi);
            0.4 * angles[j].sin() * (radii[i] - 0.5 * delta) / delta + 0.2
        })
        .collect();
    let mean_w = (obj.ring.iter().map(|r| r.0).sum::<f64>() + obj.spoke.iter().sum::<f64>())
        / (obj.ring.len() + obj.spoke.len()) as f64;
    let tol = opts.grad_tol.unwrap_or(1e-9 * mean_w);
    let start = Instant::now();
    let out = optimize(
        &obj,
        x0,
        StepRule::NonlinearCg,
        tol,
        opts.max_iters,
        |_, _| {},
    );
    let trace = SolveTrace {
        iterates: out.rows,
        converged: out.converged,
        wall_time: start.elapsed().as_secs_f64(),
        charge_events: Vec::new(),
    };
    let area = match polar {
        Polar::Flat => 0.75 * PI * delta * delta,
        Polar::Sphere(radius) => {
            2.0 * PI * radius * radius * ((0.5 * delta / radius).cos() - (delta / radius).cos())
        }
    };
    let eta = out.energy + 0.5 * shape_sq * area;
    let normal = surface.normal_at(center);
    let result = AnnulusResult {
        center: crate::geom::to_array(center),
        delta,
        radii,
        angles,
        psi: out.x,
        eta,
        trace,
        basis: Some(TangentBasis::from_normal(normal, Vec3::x(), Vec3::y())),
        surface: Some(*surface),
    };
    if result.trace.converged {
        Ok(result)
    } else {
        Err(MinimizeError::NotConverged {
            field: crate::field::DiscreteField::new(result.psi),
            trace: result.trace,
        })
    }
}

impl AnnulusResult {
    /// Relative angle `psi` at polar coordinates `(r, φ)`, bilinear on the grid with `r`
    /// clamped to the annulus.
    pub fn psi_at(&self, r: f64, phi: f64) -> f64 {
        let nr = self.radii.len();
        let nphi = self.angles.len();
        let dr = self.radii[1] - self.radii[0];
        let dphi = 2.0 * PI / nphi as f64;
        let s = ((r - self.radii[0]) / dr).clamp(0.0, (nr - 1) as f64);
        let i = (s.floor() as usize).min(nr - 2);
        let a = s - i as f64;
        let t = phi.rem_euclid(2.0 * PI) / dphi;
        let j = (t.floor() as usize).min(nphi - 1);
        let b = t - j as f64;
        let j1 = (j + 1) % nphi;
        let p = |ii: usize, jj: usize| self.psi[ii * nphi + jj];
        // The grid values live on a circle; unwrap the neighbours against the first corner.
        let base = p(i, j);
        let near = |v: f64| base + crate::geom::wrap_angle(v - base);
        (1.0 - a) * ((1.0 - b) * base + b * near(p(i, j1)))
            + a * ((1.0 - b) * near(p(i + 1, j)) + b * near(p(i + 1, j1)))
    }

    /// The minimizing field at a surface point `p` near the centre, as a unit tangent vector.
    pub fn vector_at(&self, p: &Vec3) -> Option<Vec3> {
        let surface = self.surface?;
        let basis = self.basis?;
        let c = crate::geom::from_array(self.center);
        let r = surface.geodesic_distance(&c, p).ok()?;
        let out = surface.tangent_part(&c, &(p - c));
        if out.norm() < 1e-14 * surface.diameter() {
            return None;
        }
        let phi = basis.angle_of(&out);
        let er = surface.tangent_part(p, &(p - c));
        if er.norm() < 1e-14 * surface.diameter() {
            return None;
        }
        let er = er.normalize();
        let ephi = surface.normal_at(p).cross(&er);
        let psi = self.psi_at(r, phi);
        Some(psi.cos() * er + psi.sin() * ephi)
    }
}
