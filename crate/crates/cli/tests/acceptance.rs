//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellxy_cli::pipelines::{run_core_energy, run_minimize, run_scaling};
use shellxy_cli::{ExperimentConfig, RunOptions};
use shellxy_core::energy::{extrinsic_energy, xy_energy, xy_gradient, ExtrinsicWeighting};
use shellxy_core::field::{
    global_unit_field, hedgehog_ansatz, interpolant_diagnostics, random_field, realize,
    restrict_smooth, DefectSpec, HedgehogOptions,
};
use shellxy_core::mesh::{cubed_sphere, icosphere, torus_mesh, uv_sphere};
use shellxy_core::minimize::{annulus_minimizer, AnnulusOptions};
use shellxy_core::vorticity::mu_hat;
use shellxy_core::{DiscreteField, FrameField, Surface, Triangulation, Vec3};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sci(x: &[f64]) -> String {
    x.iter()
        .map(|v| format!("{v:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn unit_sphere() -> Surface {
    Surface::sphere(1.0).unwrap()
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

/// `∫ ∇Iu : ∇Iw` over one flat triangle, from the gradients of the barycentric coordinates.
fn affine_pairing(tri: &Triangulation, t: usize, u: &[Vec3], w: &[Vec3]) -> f64 {
    let c = tri.triangles()[t];
    let p = c.map(|i| tri.vertices()[i]);
    let n2 = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let area = 0.5 * n2.norm();
    let n = n2.normalize();
    let grad: Vec<Vec3> = (0..3)
        .map(|k| n.cross(&(p[(k + 2) % 3] - p[(k + 1) % 3])) / (2.0 * area))
        .collect();
    let mut s = 0.0;
    for k in 0..3 {
        for l in 0..3 {
            s += u[c[k]].dot(&w[c[l]]) * grad[k].dot(&grad[l]);
        }
    }
    s * area
}

fn random_vectors(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
        })
        .collect()
}

fn stiffness_exactness() -> Outcome {
    let tri = icosphere(&unit_sphere(), 4).unwrap();
    let kappa = &tri.stiffness().kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_vectors(tri.num_vertices(), &mut rng);
        let w = random_vectors(tri.num_vertices(), &mut rng);
        let discrete: f64 = tri
            .edges()
            .iter()
            .zip(kappa)
            .map(|(&[i, j], k)| k * (u[i] - u[j]).dot(&(w[i] - w[j])))
            .sum();
        let exact: f64 = (0..tri.num_triangles())
            .map(|t| affine_pairing(&tri, t, &u, &w))
            .sum();
        worst = worst.max((discrete - exact).abs() / exact.abs());
    }
    outcome(worst < 1e-10, format!("max relative error {worst:.3e}"))
}

fn gradient_correctness() -> Outcome {
    let tri = icosphere(&unit_sphere(), 4).unwrap();
    let frames = FrameField::build(&tri);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let field = random_field(tri.num_vertices(), &mut rng);
    let g = xy_gradient(&tri, &frames, &field).unwrap();
    let scale = g.iter().map(|x| x.abs()).sum::<f64>() / g.len() as f64;
    // Five-point central stencil: truncation O(h⁴), roundoff O(ulp(E) / h).
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = rng.random_range(0..tri.num_vertices());
        let at = |dt: f64| {
            let mut f = field.clone();
            f.theta[v] += dt;
            xy_energy(&tri, &frames, &f, None).unwrap()
        };
        let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
        worst = worst.max((g[v] - fd).abs() / g[v].abs().max(1e-3 * scale));
    }
    outcome(
        worst < 1e-6,
        format!("max relative error {worst:.3e} over 100 vertices"),
    )
}

fn gauss_bonnet() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, s) in [
        ("sphere", unit_sphere()),
        ("torus", Surface::torus(1.0, 0.4).unwrap()),
    ] {
        let total = s.total_gauss_curvature(400);
        let expected = 2.0 * PI * s.euler_characteristic() as f64;
        let err = (total - expected).abs();
        let ok = if expected == 0.0 {
            err < 0.005 * 2.0 * PI
        } else {
            err < 0.005 * expected.abs()
        };
        pass &= ok;
        detail.push(format!("{name} {total:.6} vs {expected:.6}"));
    }
    outcome(pass, detail.join(", "))
}

fn vorticity_sum() -> Outcome {
    let meshes = [
        icosphere(&unit_sphere(), 3).unwrap(),
        cubed_sphere(&unit_sphere(), 12).unwrap(),
        uv_sphere(&unit_sphere(), 16, 32).unwrap(),
        torus_mesh(&Surface::torus(1.0, 0.4).unwrap(), 40, 16).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for tri in &meshes {
        let frames = FrameField::build(tri);
        for seed in 0..10 {
            let f = random_field(tri.num_vertices(), &mut ChaCha8Rng::seed_from_u64(seed));
            let mu = mu_hat(tri, &realize(&f, &frames).unwrap()).unwrap();
            worst = worst.max(mu.iter().sum::<f64>().abs());
        }
    }
    outcome(
        worst < 1e-9,
        format!("max |sum mu_hat| {worst:.3e} over 4 meshes x 10 seeds"),
    )
}

fn sphere_minimizers(dir: &Path) -> Outcome {
    let cfg = config(
        r#"{"schema": 1, "experiment": "minimize", "surface": {"kind": "sphere", "radius": 1.0},
            "mesh": {"generator": "icosphere", "levels": [5]},
            "solve": {"restarts": 8, "grad_tol": 5e-6, "max_iters": 100000}, "seed": 11}"#,
    );
    let report = run_minimize(&cfg, dir, &RunOptions::default()).unwrap();
    let level = &report.result.levels[0];
    let converged: Vec<_> = level.restarts.iter().filter(|r| r.converged).collect();
    let pass = !converged.is_empty()
        && converged
            .iter()
            .all(|r| r.total_charge == 2 && r.charges.iter().all(|d| d.abs() == 1));
    let charges: Vec<_> = level
        .restarts
        .iter()
        .map(|r| (r.converged, r.charges.clone()))
        .collect();
    outcome(
        pass,
        format!(
            "{} of 8 converged; (converged, charges) {charges:?}",
            converged.len()
        ),
    )
}

fn scaling(dir: &Path) -> Outcome {
    let sphere = config(
        r#"{"schema": 1, "experiment": "scaling", "surface": {"kind": "sphere", "radius": 1.0},
            "mesh": {"generator": "icosphere", "levels": [3, 4, 5, 6]},
            "init": {"strategy": "hedgehog", "defects": [{"center": [0, 0, 1], "charge": 1}, {"center": [0, 0, -1], "charge": 1}]},
            "solve": {"grad_tol": 5e-6, "max_iters": 100000}}"#,
    );
    let torus = config(
        r#"{"schema": 1, "experiment": "scaling", "surface": {"kind": "torus", "major_radius": 1.0, "minor_radius": 0.5},
            "mesh": {"generator": "torus", "resolutions": [[32, 16], [64, 32], [128, 64]]},
            "init": {"strategy": "smooth"},
            "solve": {"grad_tol": 5e-6, "max_iters": 100000}}"#,
    );
    let s = run_scaling(&sphere, &dir.join("sphere"), &RunOptions::default())
        .unwrap()
        .result;
    let t = run_scaling(&torus, &dir.join("torus"), &RunOptions::default())
        .unwrap()
        .result;
    let (Some(sf), Some(tf)) = (s.fit, t.fit) else {
        return outcome(false, "a fit is missing".into());
    };
    let sphere_ok = ((sf.slope - 2.0 * PI) / (2.0 * PI)).abs() < 0.15 && sf.levels_used.len() == 4;
    let torus_ok = tf.slope.abs() < 0.5 && tf.levels_used.len() == 3;
    outcome(
        sphere_ok && torus_ok,
        format!(
            "sphere slope {:.4} (2π = {:.4}), torus slope {:.4}",
            sf.slope,
            2.0 * PI,
            tf.slope
        ),
    )
}

fn core_energy_cauchy(dir: &Path) -> Outcome {
    let planar = config(
        r#"{"schema": 1, "experiment": "core_energy", "surface": {"kind": "graph_bump", "amplitude": 0.0, "width": 1.0},
            "mesh": {"generator": "planar_grid", "origin": [-0.5, -0.5], "side": 1.0, "n": [16, 32, 64]},
            "core_energy": {"center": [0, 0, 0], "delta": 0.45}}"#,
    );
    let cubed = config(
        r#"{"schema": 1, "experiment": "core_energy", "surface": {"kind": "sphere", "radius": 1.0},
            "mesh": {"generator": "cubed_sphere", "n": [16, 32, 64]},
            "core_energy": {"center": [0, 0, 1], "delta": 0.8}}"#,
    );
    let p = run_core_energy(&planar, &dir.join("planar"))
        .unwrap()
        .result;
    let c = run_core_energy(&cubed, &dir.join("cubed")).unwrap().result;
    let charges_ok = p
        .table
        .rows
        .iter()
        .chain(&c.table.rows)
        .all(|r| r.interior_charge == 1 && r.converged);
    outcome(
        p.cauchy_decreasing && c.cauchy_decreasing && charges_ok,
        format!(
            "planar differences {:.4?}, cubed-sphere differences {:.4?}",
            p.table.differences, c.table.differences
        ),
    )
}

fn flat_annulus() -> Outcome {
    let opts = AnnulusOptions {
        resolution: 256,
        ..Default::default()
    };
    let r = annulus_minimizer(&Surface::plane(), &Vec3::zeros(), 0.3, &opts).unwrap();
    let target = PI * LN_2;
    let rel = ((r.eta - target) / target).abs();
    outcome(
        rel < 0.01,
        format!(
            "eta {:.8} vs π log 2 = {target:.8} (relative {rel:.2e})",
            r.eta
        ),
    )
}

fn smooth_torus_convergence() -> Outcome {
    let (big, small) = (1.0_f64, 0.5_f64);
    let s = Surface::torus(big, small).unwrap();
    let u = |p: &Vec3| global_unit_field(&s, p).unwrap();
    // v = e_φ has |dv| = 1 / ρ with ρ = R + r cos θ, so 1/2 ∫ |dv|² = π r ∫ dθ / (R + r cos θ).
    let closed_form = 2.0 * PI * PI * small / (big * big - small * small).sqrt();
    let weightings = [
        ("half_dirichlet", ExtrinsicWeighting::HalfDirichlet),
        ("extrinsic_energy", ExtrinsicWeighting::ExtrinsicEnergy),
        ("gamma_limit", ExtrinsicWeighting::GammaLimit),
    ];
    let continuum: Vec<f64> = weightings
        .iter()
        .map(|&(_, w)| extrinsic_energy(&s, u, 512, w).unwrap())
        .collect();
    let mut discrete = Vec::new();
    for n in [16, 32, 64] {
        let tri = torus_mesh(&s, 2 * n, n).unwrap();
        let frames = FrameField::build(&tri);
        let f = restrict_smooth(&tri, &frames, u).unwrap();
        discrete.push(xy_energy(&tri, &frames, &f, None).unwrap());
    }
    let finest = *discrete.last().unwrap();
    let (matched, _) = weightings
        .iter()
        .zip(&continuum)
        .min_by(|a, b| (a.1 - finest).abs().total_cmp(&(b.1 - finest).abs()))
        .map(|(w, c)| (w.0, c))
        .unwrap();
    let errors: Vec<f64> = discrete.iter().map(|e| (e - continuum[0]).abs()).collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let quadrature_ok = ((continuum[0] - closed_form) / closed_form).abs() < 1e-6;
    outcome(
        quadrature_ok && matched == "half_dirichlet" && ratios.iter().all(|&r| r >= 1.5),
        format!(
            "errors {}, ratios {ratios:.3?}, limit matches the {matched} weighting",
            sci(&errors)
        ),
    )
}

fn gl_constant() -> Outcome {
    let defects = [
        DefectSpec {
            center: Vec3::z(),
            charge: 1,
        },
        DefectSpec {
            center: -Vec3::z(),
            charge: 1,
        },
    ];
    let mut c = Vec::new();
    for level in [4, 5] {
        let tri = icosphere(&unit_sphere(), level).unwrap();
        let frames = FrameField::build(&tri);
        let f: DiscreteField =
            hedgehog_ansatz(&tri, &frames, &defects, &HedgehogOptions::default()).unwrap();
        c.push(
            interpolant_diagnostics(&tri, &realize(&f, &frames).unwrap())
                .unwrap()
                .gl_constant,
        );
    }
    let ratio = c[1] / c[0];
    outcome(
        c[0] > 0.0 && (0.5..=2.0).contains(&ratio),
        format!("C = {:.4} then {:.4} (ratio {ratio:.3})", c[0], c[1]),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let cfg = config(
        r#"{"schema": 1, "experiment": "minimize", "surface": {"kind": "sphere", "radius": 1.0},
            "mesh": {"generator": "icosphere", "levels": [3]}, "solve": {"restarts": 3}, "seed": 5}"#,
    );
    let a = dir.join("a");
    let b = dir.join("b");
    run_minimize(&cfg, &a, &RunOptions::default()).unwrap();
    run_minimize(&cfg, &b, &RunOptions::default()).unwrap();
    let strip = |text: String| {
        text.lines()
            .filter(|l| !l.contains("\"wall_time\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut differing = Vec::new();
    for name in [
        "mesh.off",
        "field.csv",
        "defects.json",
        "energy.json",
        "trace.csv",
        "report.json",
    ] {
        let x = strip(std::fs::read_to_string(a.join(name)).unwrap());
        let y = strip(std::fs::read_to_string(b.join(name)).unwrap());
        if x != y {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("differing artifacts: {differing:?}"),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter that matches nothing skips the suite.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, u64, Check)> = vec![
        ("1 stiffness exactness", 5, Box::new(stiffness_exactness)),
        ("2 gradient correctness", 10, Box::new(gradient_correctness)),
        ("3 Gauss-Bonnet quadrature", 5, Box::new(gauss_bonnet)),
        (
            "4 vorticity measure sums to zero",
            5,
            Box::new(vorticity_sum),
        ),
        (
            "5 sphere minimizers carry two unit defects",
            600,
            Box::new(|| sphere_minimizers(&d.join("c5"))),
        ),
        (
            "6 energy scaling",
            1800,
            Box::new(|| scaling(&d.join("c6"))),
        ),
        (
            "7 core energy remainders",
            1200,
            Box::new(|| core_energy_cauchy(&d.join("c7"))),
        ),
        ("8 flat annulus energy", 60, Box::new(flat_annulus)),
        (
            "9 smooth field convergence on the torus",
            300,
            Box::new(smooth_torus_convergence),
        ),
        ("10 pointwise GL constant", 120, Box::new(gl_constant)),
        (
            "11 deterministic artifacts",
            600,
            Box::new(|| determinism(&d.join("c11"))),
        ),
    ];
    let mut failures = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
