//! Core energy: minimal discrete energy in a geodesic ball around a defect, with index-one
//! boundary data, compared against `π log(δ/ε)` across refinement levels.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::annulus::{annulus_minimizer, AnnulusOptions, AnnulusResult};
use super::{minimize_dirichlet_region, MinimizeError, SolveOptions};
use crate::energy::xy_energy;
use crate::field::{DiscreteField, FrameField};
use crate::geom::{to_array, Vec3};
use crate::mesh::{discrete_ball, Triangulation};
use crate::surface::Surface;
use crate::vorticity::windings;

/// Boundary data on the ball boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// The sampled minimizer of the annulus problem.
    Annulus(Box<AnnulusResult>),
    /// The radial field `e_r`.
    Hedgehog { center: Vec3 },
}

impl BoundaryData {
    pub fn vector_at(&self, surface: &Surface, p: &Vec3) -> Option<Vec3> {
        match self {
            BoundaryData::Annulus(a) => a.vector_at(p),
            BoundaryData::Hedgehog { center } => {
                let r = surface.tangent_part(p, &(p - center));
                (r.norm() > 1e-14 * surface.diameter()).then(|| r.normalize())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryData::Annulus(_) => "annulus",
            BoundaryData::Hedgehog { .. } => "hedgehog",
        }
    }
}

pub fn annulus_boundary_data(
    surface: &Surface,
    center: &Vec3,
    delta: f64,
    opts: &AnnulusOptions,
) -> Result<BoundaryData, MinimizeError> {
    Ok(BoundaryData::Annulus(Box::new(annulus_minimizer(
        surface, center, delta, opts,
    )?)))
}

pub fn hedgehog_boundary_data(center: &Vec3) -> BoundaryData {
    BoundaryData::Hedgehog { center: *center }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreEnergyOptions {
    pub delta: f64,
    /// Take boundary data from the annulus problem; otherwise use the radial field.
    pub use_annulus: bool,
    pub annulus: AnnulusOptions,
    pub solve: SolveOptions,
}

impl Default for CoreEnergyOptions {
    fn default() -> Self {
        CoreEnergyOptions {
            delta: 0.4,
            use_annulus: true,
            annulus: AnnulusOptions::default(),
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreEnergyRow {
    pub level: usize,
    pub num_vertices: usize,
    pub eps: f64,
    pub gamma: f64,
    /// `gamma - π log(δ/ε)`.
    pub remainder: f64,
    /// Sum of the triangle windings inside the ball.
    pub interior_charge: i64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreEnergyTable {
    pub center: [f64; 3],
    pub delta: f64,
    pub boundary: String,
    /// Annulus energy, when the annulus boundary data is used.
    pub eta: Option<f64>,
    pub rows: Vec<CoreEnergyRow>,
    /// `|r(k+1) - r(k)|` for successive levels.
    pub differences: Vec<f64>,
}

impl CoreEnergyTable {
    /// Whether the successive remainder differences decrease strictly.
    pub fn is_cauchy_decreasing(&self) -> bool {
        self.differences.len() >= 2 && self.differences.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,num_vertices,eps,gamma,remainder,interior_charge,iterations,converged\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{},{},{}\n",
                r.level,
                r.num_vertices,
                r.eps,
                r.gamma,
                r.remainder,
                r.interior_charge,
                r.iterations,
                r.converged
            ));
        }
        s
    }
}

/// Solves the ball problem on one mesh; returns the minimizing field along with its row.
pub fn core_energy_level(
    tri: &Triangulation,
    center: &Vec3,
    delta: f64,
    data: &BoundaryData,
    solve: &SolveOptions,
) -> Result<(DiscreteField, CoreEnergyRow), MinimizeError> {
    let surface = tri.surface();
    let ball = discrete_ball(tri, center, delta)?;
    let frames = FrameField::build(tri);
    let mut theta = vec![0.0; tri.num_vertices()];
    for &v in &ball.vertices {
        if let Some(w) = data.vector_at(surface, &tri.vertices()[v]) {
            theta[v] = frames.basis(v).angle_of(&w);
        }
    }
    let init = DiscreteField::new(theta);
    let (field, trace) = match minimize_dirichlet_region(
        tri,
        &frames,
        &init,
        &ball.boundary_vertices,
        &ball.triangles,
        solve,
    ) {
        Ok(r) => r,
        Err(e @ MinimizeError::NotConverged { .. }) => e.into_partial().expect("partial result"),
        Err(e) => return Err(e),
    };
    let gamma = xy_energy(tri, &frames, &field, Some(&ball.triangles)).map_err(|e| match e {
        crate::energy::EnergyError::Field(f) => MinimizeError::Field(f),
        other => MinimizeError::Precondition(other.to_string()),
    })?;
    let w = windings(tri, &frames, &field);
    let interior_charge = ball
        .triangles
        .iter()
        .map(|&t| w[t].unwrap_or(0) as i64)
        .sum();
    let eps = tri.mesh_size();
    let row = CoreEnergyRow {
        level: 0,
        num_vertices: tri.num_vertices(),
        eps,
        gamma,
        remainder: gamma - PI * (delta / eps).ln(),
        interior_charge,
        iterations: trace.iterations(),
        converged: trace.converged,
    };
    Ok((field, row))
}

/// Core-energy table over a refinement family ordered from coarse to fine. Levels are solved
/// concurrently.
pub fn core_energy(
    family: &[Triangulation],
    center: &Vec3,
    opts: &CoreEnergyOptions,
) -> Result<CoreEnergyTable, MinimizeError> {
    let first = family
        .first()
        .ok_or_else(|| MinimizeError::Precondition("empty mesh family".into()))?;
    let max_eps = family
        .iter()
        .map(Triangulation::mesh_size)
        .fold(0.0, f64::max);
    if !(opts.delta > 4.0 * max_eps) {
        return Err(MinimizeError::Precondition(format!(
            "delta {} must exceed four times the coarsest mesh size {max_eps}",
            opts.delta
        )));
    }
    let surface = first.surface();
    let data = if opts.use_annulus {
        annulus_boundary_data(surface, center, opts.delta, &opts.annulus)?
    } else {
        hedgehog_boundary_data(center)
    };
    let eta = match &data {
        BoundaryData::Annulus(a) => Some(a.eta),
        BoundaryData::Hedgehog { .. } => None,
    };
    let rows = family
        .par_iter()
        .enumerate()
        .map(|(k, tri)| {
            let (_, mut row) = core_energy_level(tri, center, opts.delta, &data, &opts.solve)?;
            row.level = k;
            Ok(row)
        })
        .collect::<Result<Vec<_>, MinimizeError>>()?;
    let differences = rows
        .windows(2)
        .map(|w| (w[1].remainder - w[0].remainder).abs())
        .collect();
    Ok(CoreEnergyTable {
        center: to_array(center),
        delta: opts.delta,
        boundary: data.name().to_owned(),
        eta,
        rows,
        differences,
    })
}
