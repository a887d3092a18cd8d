//! Certification of a triangulation against the four mesh hypotheses:
//! quasi-uniformity (H1), weak acuteness (H2), bi-Lipschitz projection (H3)
//! and local convergence to a fixed planar pattern under rescaling (H4).

use serde::{Deserialize, Serialize};

use super::{cubed_sphere_vertex, CubeFace, MeshError, MeshOrigin, Triangulation};
use crate::geom::{triangle_angles, triangle_diameter, Vec3};
use crate::surface::SurfaceKind;

/// Thresholds turning the numeric estimates into pass flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisThresholds {
    /// Largest admissible `max(eps / min diam, 1 / min angle)`.
    pub lambda_max: f64,
    /// Largest admissible number of neighbours of a vertex.
    pub valence_max: usize,
    /// `kappa >= -kappa_tol` counts as weakly acute.
    pub kappa_tol: f64,
    /// Largest admissible `Lip(P) + Lip(P^-1)`.
    pub bilipschitz_max: f64,
    /// Radius, in rescaled units, of the window compared for H4.
    pub h4_window: f64,
    /// Largest admissible H4 displacement times `|log eps|`.
    pub h4_max: f64,
}

impl Default for HypothesisThresholds {
    fn default() -> Self {
        HypothesisThresholds {
            lambda_max: 4.0,
            valence_max: 12,
            kappa_tol: 1e-12,
            bilipschitz_max: 2.5,
            h4_window: 6.0,
            h4_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub lambda_estimate: f64,
    pub min_angle: f64,
    pub max_valence: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub min_kappa: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H3Report {
    pub lip_p: f64,
    pub lip_p_inv: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H4Report {
    pub displacement_times_logeps: f64,
    pub pass: bool,
    pub evaluated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub mesh_size: f64,
    pub h1: H1Report,
    pub h2: H2Report,
    pub h3: H3Report,
    pub h4: H4Report,
}

impl HypothesisReport {
    pub fn h1_to_h3_pass(&self) -> bool {
        self.h1.pass && self.h2.pass && self.h3.pass
    }
}

/// Evaluates H1-H3 on `tri`; H4 additionally needs `finer`, the next level of the same generator.
pub fn validate_hypotheses(
    tri: &Triangulation,
    finer: Option<&Triangulation>,
    thresholds: &HypothesisThresholds,
) -> HypothesisReport {
    let eps = tri.mesh_size();
    let mut min_diam = f64::INFINITY;
    let mut min_angle = f64::INFINITY;
    for t in tri.triangles() {
        let [a, b, c] = t.map(|i| &tri.vertices()[i]);
        min_diam = min_diam.min(triangle_diameter(a, b, c));
        min_angle = triangle_angles([a, b, c])
            .into_iter()
            .fold(min_angle, f64::min);
    }
    let max_valence = (0..tri.num_vertices())
        .map(|v| tri.neighbours(v).len())
        .max()
        .unwrap_or(0);
    let lambda_estimate = (eps / min_diam).max(1.0 / min_angle);
    let h1 = H1Report {
        lambda_estimate,
        min_angle,
        max_valence,
        pass: lambda_estimate <= thresholds.lambda_max && max_valence <= thresholds.valence_max,
    };

    let min_kappa = tri.stiffness().min_kappa();
    let h2 = H2Report {
        min_kappa,
        pass: min_kappa >= -thresholds.kappa_tol,
    };

    let (lip_p, lip_p_inv) = projection_lipschitz(tri);
    let h3 = H3Report {
        lip_p,
        lip_p_inv,
        pass: lip_p + lip_p_inv <= thresholds.bilipschitz_max,
    };

    let h4 = match finer {
        None => H4Report {
            displacement_times_logeps: f64::NAN,
            pass: false,
            evaluated: false,
            reason: Some("no finer level of the same family supplied".into()),
        },
        Some(fine) => match h4_displacement(tri, fine, thresholds.h4_window) {
            Ok(d) => H4Report {
                displacement_times_logeps: d,
                pass: d <= thresholds.h4_max,
                evaluated: true,
                reason: None,
            },
            Err(e) => H4Report {
                displacement_times_logeps: f64::NAN,
                pass: false,
                evaluated: false,
                reason: Some(e.to_string()),
            },
        },
    };

    HypothesisReport {
        mesh_size: eps,
        h1,
        h2,
        h3,
        h4,
    }
}

/// Lipschitz constants of the projection from the polyhedral surface to the smooth one and of
/// its inverse, estimated from 9 sample points per triangle. This is an estimate, not a bound.
fn projection_lipschitz(tri: &Triangulation) -> (f64, f64) {
    const SAMPLES: [[f64; 3]; 9] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    ];
    let surface = tri.surface();
    let mut lip: f64 = 0.0;
    let mut lip_inv: f64 = 0.0;
    for t in tri.triangles() {
        let [a, b, c] = t.map(|i| tri.vertices()[i]);
        let mut x = [Vec3::zeros(); 9];
        let mut px = [Vec3::zeros(); 9];
        for (k, w) in SAMPLES.iter().enumerate() {
            x[k] = a * w[0] + b * w[1] + c * w[2];
            px[k] = surface.project(&x[k]).unwrap_or(x[k]);
        }
        for i in 0..9 {
            for j in i + 1..9 {
                let d = (x[i] - x[j]).norm();
                let pd = (px[i] - px[j]).norm();
                lip = lip.max(pd / d);
                lip_inv = lip_inv.max(d / pd);
            }
        }
    }
    (lip, lip_inv)
}

/// Maximal displacement between the rescaled neighbourhoods of a base point in two levels of the
/// same generated family, times `|log eps|` of the coarser level.
///
/// The simplicial isomorphism is the canonical one of structured families: the vertex at lattice
/// offset `(a, b)` from the base vertex at one level corresponds to the vertex at the same offset
/// at the other. Both neighbourhoods are pulled back by normal coordinates at the base point and
/// scaled by `1 / eps`; offsets whose coarse image lies within `window` are compared.
pub fn h4_displacement(
    coarse: &Triangulation,
    fine: &Triangulation,
    window: f64,
) -> Result<f64, MeshError> {
    let eps_c = coarse.mesh_size();
    let eps_f = fine.mesh_size();
    let (positions_c, positions_f): (Vec<Vec3>, Vec<Vec3>) = match (coarse.origin(), fine.origin()) {
        (&MeshOrigin::CubedSphere { n: nc }, &MeshOrigin::CubedSphere { n: nf }) => {
            let SurfaceKind::Sphere { radius } = coarse.surface().kind() else {
                return Err(MeshError::H4Unavailable("cubed sphere on a non-sphere surface".into()));
            };
            if coarse.surface() != fine.surface() {
                return Err(MeshError::H4Unavailable("levels live on different surfaces".into()));
            }
            if nc % 2 != 0 || nf % 2 != 0 || nf <= nc {
                return Err(MeshError::H4Unavailable("cubed sphere levels need even, increasing n".into()));
            }
            let (hc, hf) = (nc / 2, nf / 2);
            let base = Vec3::new(0.0, 0.0, radius);
            let log = |p: Vec3| {
                let angle = p.cross(&base).norm().atan2(p.dot(&base));
                let dir = Vec3::new(p.x, p.y, 0.0);
                let dn = dir.norm();
                if dn == 0.0 {
                    Vec3::zeros()
                } else {
                    dir * (radius * angle / dn)
                }
            };
            let reach = (window * 2.0).ceil() as i64 + 2;
            let mut pc = Vec::new();
            let mut pf = Vec::new();
            for a in -reach..=reach {
                for b in -reach..=reach {
                    if a.abs() > hc as i64 || b.abs() > hc as i64 {
                        continue;
                    }
                    let (ic, jc) = ((hc as i64 + a) as usize, (hc as i64 + b) as usize);
                    let (i_f, j_f) = ((hf as i64 + a) as usize, (hf as i64 + b) as usize);
                    pc.push(log(cubed_sphere_vertex(radius, nc, CubeFace::PosZ, ic, jc)));
                    pf.push(log(cubed_sphere_vertex(radius, nf, CubeFace::PosZ, i_f, j_f)));
                }
            }
            (pc, pf)
        }
        (MeshOrigin::PlanarGrid { .. }, MeshOrigin::PlanarGrid { .. }) => {
            let base_c = nearest_vertex(coarse, &Vec3::zeros());
            let base_f = nearest_vertex(fine, &Vec3::zeros());
            let mut pc = Vec::new();
            let mut pf = Vec::new();
            let (MeshOrigin::PlanarGrid { spacing: sc, .. }, MeshOrigin::PlanarGrid { spacing: sf, .. }) =
                (coarse.origin(), fine.origin())
            else {
                unreachable!()
            };
            let reach = (window * 2.0).ceil() as i64 + 2;
            for a in -reach..=reach {
                for b in -reach..=reach {
                    let qc = coarse.vertices()[base_c] + Vec3::new(a as f64 * sc, b as f64 * sc, 0.0);
                    let qf = fine.vertices()[base_f] + Vec3::new(a as f64 * sf, b as f64 * sf, 0.0);
                    let (vc, vf) = (nearest_vertex(coarse, &qc), nearest_vertex(fine, &qf));
                    if (coarse.vertices()[vc] - qc).norm() > 1e-9 * sc || (fine.vertices()[vf] - qf).norm() > 1e-9 * sf {
                        continue;
                    }
                    pc.push(coarse.vertices()[vc] - coarse.vertices()[base_c]);
                    pf.push(fine.vertices()[vf] - fine.vertices()[base_f]);
                }
            }
            (pc, pf)
        }
        (MeshOrigin::Icosphere { .. }, MeshOrigin::Icosphere { .. }) => {
            return Err(MeshError::H4Unavailable(
                "icosphere subdivision has no self-similar correspondence across icosahedron face boundaries".into(),
            ))
        }
        _ => return Err(MeshError::H4Unavailable("no canonical correspondence between these meshes".into())),
    };
    let mut displacement: f64 = 0.0;
    let mut compared = 0;
    for (c, f) in positions_c.iter().zip(&positions_f) {
        let xc = c / eps_c;
        if xc.norm() > window {
            continue;
        }
        compared += 1;
        displacement = displacement.max((xc - f / eps_f).norm());
    }
    if compared == 0 {
        return Err(MeshError::H4Unavailable("empty comparison window".into()));
    }
    Ok(displacement * eps_c.ln().abs())
}

fn nearest_vertex(tri: &Triangulation, p: &Vec3) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in tri.vertices().iter().enumerate() {
        let d = (v - p).norm_squared();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cubed_sphere, icosphere, planar_grid, uv_sphere};
    use crate::surface::Surface;

    #[test]
    fn uv_sphere_fails_quasi_uniformity() {
        let s = Surface::sphere(1.0).unwrap();
        let uv = uv_sphere(&s, 16, 32).unwrap();
        let r = validate_hypotheses(&uv, None, &HypothesisThresholds::default());
        assert!(!r.h1.pass);
        assert_eq!(r.h1.max_valence, 32);
        assert!(!r.h4.evaluated);
    }

    #[test]
    fn flat_grid_is_exactly_weakly_acute() {
        let plane = Surface::plane();
        let g = planar_grid(&plane, [-1.0, -1.0], 0.125, 16, 16).unwrap();
        let r = validate_hypotheses(&g, None, &HypothesisThresholds::default());
        assert_eq!(r.h2.min_kappa, 0.0);
        assert!(r.h2.pass);
        assert_eq!(r.h3.lip_p, 1.0);
        let fine = planar_grid(&plane, [-1.0, -1.0], 0.0625, 32, 32).unwrap();
        assert!(h4_displacement(&g, &fine, 4.0).unwrap() < 1e-12);
    }

    #[test]
    fn icosphere_h4_unavailable() {
        let s = Surface::sphere(1.0).unwrap();
        let a = icosphere(&s, 2).unwrap();
        let b = icosphere(&s, 3).unwrap();
        let r = validate_hypotheses(&a, Some(&b), &HypothesisThresholds::default());
        assert!(r.h1_to_h3_pass());
        assert!(!r.h4.evaluated);
        assert!(r.h4.reason.unwrap().contains("icosphere"));
    }

    #[test]
    fn cubed_sphere_h4_decreases() {
        let s = Surface::sphere(1.0).unwrap();
        let meshes: Vec<_> = [16, 32, 64, 128]
            .iter()
            .map(|&n| cubed_sphere(&s, n).unwrap())
            .collect();
        let values: Vec<f64> = meshes
            .windows(2)
            .map(|w| h4_displacement(&w[0], &w[1], 6.0).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
        // Pinned from the generator.
        for (v, pinned) in
            values
                .iter()
                .zip([2.645986184866131, 1.021120821031167, 0.3151094318827838])
        {
            assert!((v - pinned).abs() < 1e-9 * pinned, "{values:?}");
        }
    }
}
