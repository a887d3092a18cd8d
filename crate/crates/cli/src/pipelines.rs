//! Experiment pipelines behind the subcommands. Each one writes its artifacts under the output
//! directory and returns the report it wrote to `report.json`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use shellxy_core::energy::xy_energy;
use shellxy_core::field::{
    global_unit_field, hedgehog_ansatz, prolongate, read_field_csv, realize, restrict_smooth,
    DefectSpec, HedgehogOptions,
};
use shellxy_core::mesh::{
    cubed_sphere, icosphere, planar_grid, read_off, torus_mesh, uv_sphere, validate_hypotheses,
    HypothesisReport,
};
use shellxy_core::minimize::{
    best_restart, core_energy, minimize_restarts_with_checkpoint, CoreEnergyOptions,
    CoreEnergyTable, RestartOutcome,
};
use shellxy_core::renormalized::estimate_renormalized;
use shellxy_core::vorticity::{core_triangles, detect_defects};
use shellxy_core::{
    DefectSet, DiscreteField, EnergyBreakdown, FrameField, RenormalizedEstimate, Surface,
    Triangulation, Vec3,
};

use crate::artifacts::{field_bytes, off_bytes, write_atomic, write_csv, write_json};
use crate::config::{ExperimentConfig, InitStrategy, MeshSpec, SCHEMA_VERSION};

/// Settings that come from the command line rather than the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write the iterate of every restart every this many iterations.
    pub checkpoint_every: Option<usize>,
}

/// Envelope shared by every `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report<T> {
    pub schema: u32,
    pub command: &'static str,
    pub config_hash: String,
    /// Content hash of the finest mesh involved.
    pub mesh_hash: String,
    pub seed: u64,
    pub result: T,
    pub wall_time: f64,
}

fn finish<T: Serialize>(
    out: &Path,
    command: &'static str,
    cfg: &ExperimentConfig,
    mesh_hash: String,
    start: Instant,
    result: T,
) -> Result<Report<T>> {
    let report = Report {
        schema: SCHEMA_VERSION,
        command,
        config_hash: cfg.hash(),
        mesh_hash,
        seed: cfg.seed,
        result,
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

pub fn build_surface(cfg: &ExperimentConfig) -> Result<Surface> {
    Surface::new(cfg.surface).context("field `surface`")
}

/// All levels of the configured family, coarse to fine.
pub fn build_family(cfg: &ExperimentConfig) -> Result<Vec<Triangulation>> {
    let s = build_surface(cfg)?;
    let family = match &cfg.mesh {
        MeshSpec::Icosphere { levels } => levels
            .iter()
            .map(|&l| icosphere(&s, l))
            .collect::<Result<Vec<_>, _>>(),
        MeshSpec::CubedSphere { n } => n.iter().map(|&n| cubed_sphere(&s, n)).collect(),
        MeshSpec::Torus { resolutions } => resolutions
            .iter()
            .map(|&[a, b]| torus_mesh(&s, a, b))
            .collect(),
        MeshSpec::UvSphere { resolutions } => resolutions
            .iter()
            .map(|&[a, b]| uv_sphere(&s, a, b))
            .collect(),
        MeshSpec::PlanarGrid { origin, side, n } => n
            .iter()
            .map(|&n| planar_grid(&s, *origin, side / n as f64, n, n))
            .collect(),
    };
    family.context("field `mesh`")
}

fn project(surface: &Surface, p: [f64; 3], field: &str) -> Result<Vec3> {
    surface
        .project(&Vec3::new(p[0], p[1], p[2]))
        .with_context(|| format!("field `{field}`: cannot project onto the surface"))
}

/// Deterministic starting fields for one level; restarts beyond these start at random.
fn starting_fields(
    cfg: &ExperimentConfig,
    tri: &Triangulation,
    frames: &FrameField,
    previous: Option<(&Triangulation, &FrameField, &[DiscreteField])>,
) -> Result<Vec<DiscreteField>> {
    let surface = tri.surface();
    Ok(match &cfg.init {
        InitStrategy::Random => Vec::new(),
        InitStrategy::Hedgehog { defects } => {
            let specs = defects
                .iter()
                .map(|d| {
                    Ok(DefectSpec {
                        center: project(surface, d.center, "init.defects.center")?,
                        charge: d.charge,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            vec![
                hedgehog_ansatz(tri, frames, &specs, &HedgehogOptions::default())
                    .context("hedgehog start")?,
            ]
        }
        InitStrategy::Smooth => {
            if global_unit_field(surface, &tri.vertices()[0]).is_none() {
                bail!(
                    "field `init`: the smooth start needs a surface with zero Euler characteristic"
                );
            }
            let f = |p: &Vec3| global_unit_field(surface, p).unwrap_or_else(Vec3::zeros);
            vec![restrict_smooth(tri, frames, f).context("smooth start")?]
        }
        InitStrategy::Continuation => match previous {
            None => Vec::new(),
            Some((coarse, coarse_frames, fields)) => fields
                .iter()
                .map(|f| prolongate(coarse, coarse_frames, f, tri, frames))
                .collect::<Result<Vec<_>, _>>()
                .context("transferring the coarse minimizers")?,
        },
    })
}

/// One restart as it appears in the reports.
#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub seed: u64,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub total_charge: i64,
    pub charges: Vec<i32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub num_vertices: usize,
    pub mesh_hash: String,
    pub eps: f64,
    pub abs_log_eps: f64,
    /// `converged` when at least one restart converged, `not_converged` otherwise.
    pub status: &'static str,
    pub best_restart: usize,
    /// Energy of the best restart.
    pub energy: f64,
    pub restarts: Vec<RestartSummary>,
}

/// Solved level: summary plus the fields needed to write artifacts.
struct SolvedLevel {
    tri: Triangulation,
    frames: FrameField,
    outcomes: Vec<RestartOutcome>,
    defects: Vec<DefectSet>,
    summary: LevelResult,
}

impl SolvedLevel {
    fn best(&self) -> &RestartOutcome {
        &self.outcomes[self.summary.best_restart]
    }
}

fn checkpoint_dir(out: &Path, level: usize) -> PathBuf {
    out.join("checkpoints").join(format!("level_{level}"))
}

fn solve_level(
    cfg: &ExperimentConfig,
    level: usize,
    tri: Triangulation,
    inits: Vec<DiscreteField>,
    frames: FrameField,
    out: &Path,
    run: &RunOptions,
) -> Result<SolvedLevel> {
    let mesh_hash = tri.content_hash();
    let config_hash = cfg.hash();
    let every = run.checkpoint_every.unwrap_or(0);
    let dir = checkpoint_dir(out, level);
    let failures = std::sync::Mutex::new(Vec::new());
    let sink = |k: usize, it: usize, f: &DiscreteField| {
        let path = dir.join(format!("restart_{k}_iter_{it:08}.csv"));
        let written =
            field_bytes(f, &mesh_hash, &config_hash).and_then(|b| write_atomic(&path, &b));
        if let Err(e) = written {
            failures
                .lock()
                .expect("checkpoint lock")
                .push(format!("{}: {e:#}", path.display()));
        }
    };
    info!(
        "level {level}: {} vertices, {} starts",
        tri.num_vertices(),
        cfg.solve.restarts.max(inits.len()).max(1)
    );
    let outcomes =
        minimize_restarts_with_checkpoint(&tri, &frames, &inits, &cfg.solve, every, &sink)
            .context("minimization")?;
    if let Some(e) = failures.into_inner().expect("checkpoint lock").first() {
        bail!("writing checkpoint {e}");
    }
    let radius = cfg.merge_radius * tri.mesh_size();
    let defects = outcomes
        .iter()
        .map(|o| detect_defects(&tri, &frames, &o.field, radius))
        .collect::<Result<Vec<_>, _>>()
        .context("defect detection")?;
    let best = best_restart(&outcomes).expect("at least one restart");
    let restarts: Vec<RestartSummary> = outcomes
        .iter()
        .zip(&defects)
        .map(|(o, d)| RestartSummary {
            seed: o.seed,
            energy: o.trace.final_energy(),
            grad_norm: o.trace.final_grad_norm(),
            iterations: o.trace.iterations(),
            converged: o.trace.converged,
            total_charge: d.total_charge(),
            charges: d.defects.iter().map(|x| x.charge).collect(),
        })
        .collect();
    let eps = tri.mesh_size();
    let summary = LevelResult {
        level,
        num_vertices: tri.num_vertices(),
        mesh_hash,
        eps,
        abs_log_eps: eps.ln().abs(),
        status: if outcomes[best].trace.converged {
            "converged"
        } else {
            "not_converged"
        },
        best_restart: best,
        energy: restarts[best].energy,
        restarts,
    };
    info!(
        "level {level}: best energy {:.10} ({})",
        summary.energy, summary.status
    );
    Ok(SolvedLevel {
        tri,
        frames,
        outcomes,
        defects,
        summary,
    })
}

/// Solves the given levels, either one after another (continuation) or concurrently.
fn solve_levels(
    cfg: &ExperimentConfig,
    family: Vec<Triangulation>,
    levels: &[usize],
    out: &Path,
    run: &RunOptions,
) -> Result<Vec<SolvedLevel>> {
    if cfg.init == InitStrategy::Continuation {
        let mut solved: Vec<SolvedLevel> = Vec::new();
        for (tri, &level) in family.into_iter().zip(levels) {
            let frames = FrameField::build(&tri);
            let inits = match solved.last() {
                None => starting_fields(cfg, &tri, &frames, None)?,
                Some(p) => {
                    let fields: Vec<DiscreteField> =
                        p.outcomes.iter().map(|o| o.field.clone()).collect();
                    starting_fields(cfg, &tri, &frames, Some((&p.tri, &p.frames, &fields)))?
                }
            };
            solved.push(solve_level(cfg, level, tri, inits, frames, out, run)?);
        }
        Ok(solved)
    } else {
        family
            .into_par_iter()
            .zip(levels.par_iter())
            .map(|(tri, &level)| {
                let frames = FrameField::build(&tri);
                let inits = starting_fields(cfg, &tri, &frames, None)?;
                solve_level(cfg, level, tri, inits, frames, out, run)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectsFile {
    pub config_hash: String,
    pub mesh_hash: String,
    pub merge_radius: f64,
    pub total_charge: i64,
    pub defects: DefectSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyFile {
    pub config_hash: String,
    pub mesh_hash: String,
    #[serde(flatten)]
    pub breakdown: EnergyBreakdown,
}

fn energy_breakdown(
    tri: &Triangulation,
    frames: &FrameField,
    field: &DiscreteField,
    defects: usize,
) -> Result<EnergyBreakdown> {
    let total = xy_energy(tri, frames, field, None)?;
    let vectors = realize(field, frames)?;
    let core = core_triangles(tri, &vectors);
    let core_energy = xy_energy(tri, frames, field, Some(&core))?;
    let mut per_region = BTreeMap::new();
    per_region.insert("core".to_owned(), core_energy);
    per_region.insert("outside_cores".to_owned(), total - core_energy);
    Ok(EnergyBreakdown::new(
        total,
        per_region,
        tri.mesh_size(),
        defects,
    ))
}

/// `mesh.off`, `field.csv`, `defects.json`, `energy.json` and `trace.csv` of the best restart.
fn write_level_artifacts(cfg: &ExperimentConfig, out: &Path, level: &SolvedLevel) -> Result<()> {
    let hash = cfg.hash();
    let best = level.best();
    let defects = &level.defects[level.summary.best_restart];
    write_atomic(&out.join("mesh.off"), &off_bytes(&level.tri, &hash)?)?;
    write_atomic(
        &out.join("field.csv"),
        &field_bytes(&best.field, &level.summary.mesh_hash, &hash)?,
    )?;
    write_defects(
        cfg,
        out,
        &level.summary.mesh_hash,
        level.tri.mesh_size(),
        defects,
    )?;
    let breakdown = energy_breakdown(&level.tri, &level.frames, &best.field, defects.len())?;
    write_json(
        &out.join("energy.json"),
        &EnergyFile {
            config_hash: hash.clone(),
            mesh_hash: level.summary.mesh_hash.clone(),
            breakdown,
        },
    )?;
    write_csv(&out.join("trace.csv"), &hash, &best.trace.to_csv())
}

fn write_defects(
    cfg: &ExperimentConfig,
    out: &Path,
    mesh_hash: &str,
    eps: f64,
    defects: &DefectSet,
) -> Result<DefectsFile> {
    let file = DefectsFile {
        config_hash: cfg.hash(),
        mesh_hash: mesh_hash.to_owned(),
        merge_radius: cfg.merge_radius * eps,
        total_charge: defects.total_charge(),
        defects: defects.clone(),
    };
    write_json(&out.join("defects.json"), &file)?;
    Ok(file)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeResult {
    pub levels: Vec<LevelResult>,
    pub energy: f64,
    pub converged: bool,
    pub total_charge: i64,
    pub defect_count: usize,
}

fn minimize_core(
    cfg: &ExperimentConfig,
    out: &Path,
    run: &RunOptions,
) -> Result<(MinimizeResult, SolvedLevel)> {
    let mut family = build_family(cfg)?;
    let (family, levels): (Vec<_>, Vec<usize>) = if cfg.init == InitStrategy::Continuation {
        let n = family.len();
        (family, (0..n).collect())
    } else {
        let last = family.len() - 1;
        (vec![family.swap_remove(last)], vec![last])
    };
    let mut solved = solve_levels(cfg, family, &levels, out, run)?;
    let finest = solved.pop().expect("at least one level");
    write_level_artifacts(cfg, out, &finest)?;
    let defects = &finest.defects[finest.summary.best_restart];
    let mut summaries: Vec<LevelResult> = solved.into_iter().map(|s| s.summary).collect();
    summaries.push(finest.summary.clone());
    let result = MinimizeResult {
        energy: finest.summary.energy,
        converged: finest.best().trace.converged,
        total_charge: defects.total_charge(),
        defect_count: defects.len(),
        levels: summaries,
    };
    Ok((result, finest))
}

/// Minimizes on the finest configured level (every level, with continuation).
pub fn run_minimize(
    cfg: &ExperimentConfig,
    out: &Path,
    run: &RunOptions,
) -> Result<Report<MinimizeResult>> {
    let start = Instant::now();
    let (result, finest) = minimize_core(cfg, out, run)?;
    finish(
        out,
        "minimize",
        cfg,
        finest.summary.mesh_hash.clone(),
        start,
        result,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub levels_used: Vec<usize>,
    /// `π |χ|`: the slope predicted for `|χ|` unit defects.
    pub expected_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingResult {
    pub levels: Vec<LevelResult>,
    /// Least-squares fit of energy against `|log eps|` over the converged levels; absent when
    /// fewer than two levels converged.
    pub fit: Option<ScalingFit>,
}

/// Least-squares line through `(x, y)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn run_scaling(
    cfg: &ExperimentConfig,
    out: &Path,
    run: &RunOptions,
) -> Result<Report<ScalingResult>> {
    let start = Instant::now();
    let family = build_family(cfg)?;
    if family.len() < 3 {
        bail!(
            "precondition: a scaling study needs at least 3 mesh levels, got {}",
            family.len()
        );
    }
    let levels: Vec<usize> = (0..family.len()).collect();
    let solved = solve_levels(cfg, family, &levels, out, run)?;
    let finest = solved.last().expect("levels");
    write_level_artifacts(cfg, out, finest)?;
    let summaries: Vec<LevelResult> = solved.iter().map(|s| s.summary.clone()).collect();
    let used: Vec<&LevelResult> = summaries
        .iter()
        .filter(|l| l.status == "converged")
        .collect();
    let x: Vec<f64> = used.iter().map(|l| l.abs_log_eps).collect();
    let y: Vec<f64> = used.iter().map(|l| l.energy).collect();
    let chi = finest.tri.surface().euler_characteristic();
    let fit = least_squares(&x, &y).map(|(slope, intercept)| ScalingFit {
        slope,
        intercept,
        levels_used: used.iter().map(|l| l.level).collect(),
        expected_slope: PI * chi.unsigned_abs() as f64,
    });
    let mut csv = String::from("level,num_vertices,eps,abs_log_eps,energy,status,total_charge\n");
    for l in &summaries {
        csv.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{},{}\n",
            l.level,
            l.num_vertices,
            l.eps,
            l.abs_log_eps,
            l.energy,
            l.status,
            l.restarts[l.best_restart].total_charge
        ));
    }
    write_csv(&out.join("scaling.csv"), &cfg.hash(), &csv)?;
    let mesh_hash = finest.summary.mesh_hash.clone();
    finish(
        out,
        "scaling",
        cfg,
        mesh_hash,
        start,
        ScalingResult {
            levels: summaries,
            fit,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct CoreEnergyResult {
    pub table: CoreEnergyTable,
    pub cauchy_decreasing: bool,
}

pub fn run_core_energy(cfg: &ExperimentConfig, out: &Path) -> Result<Report<CoreEnergyResult>> {
    let start = Instant::now();
    let family = build_family(cfg)?;
    let center = project(
        family[0].surface(),
        cfg.core_energy.center,
        "core_energy.center",
    )?;
    let opts = CoreEnergyOptions {
        delta: cfg.core_energy.delta,
        use_annulus: cfg.core_energy.use_annulus,
        annulus: cfg.core_energy.annulus,
        solve: cfg.solve.clone(),
    };
    let table = core_energy(&family, &center, &opts).context("core energy")?;
    write_csv(&out.join("core_energy.csv"), &cfg.hash(), &table.to_csv())?;
    let mesh_hash = family.last().expect("levels").content_hash();
    let cauchy_decreasing = table.is_cauchy_decreasing();
    finish(
        out,
        "core-energy",
        cfg,
        mesh_hash,
        start,
        CoreEnergyResult {
            table,
            cauchy_decreasing,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct RenormalizedResult {
    pub minimize: MinimizeResult,
    pub estimate: RenormalizedEstimate,
    pub cauchy_decreasing: bool,
}

/// Minimizes, then estimates the renormalized energy of the best minimizer.
pub fn run_renormalized(
    cfg: &ExperimentConfig,
    out: &Path,
    run: &RunOptions,
) -> Result<Report<RenormalizedResult>> {
    let start = Instant::now();
    let (minimize, finest) = minimize_core(cfg, out, run)?;
    let defects = &finest.defects[finest.summary.best_restart];
    let estimate = estimate_renormalized(
        &finest.tri,
        &finest.frames,
        &finest.best().field,
        defects,
        &cfg.renormalized.deltas,
    )
    .context("renormalized energy")?;
    write_csv(&out.join("shells.csv"), &cfg.hash(), &estimate.shells_csv())?;
    let cauchy_decreasing = estimate.is_cauchy_decreasing();
    let mesh_hash = finest.summary.mesh_hash.clone();
    finish(
        out,
        "renorm",
        cfg,
        mesh_hash,
        start,
        RenormalizedResult {
            minimize,
            estimate,
            cauchy_decreasing,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateLevel {
    pub level: usize,
    pub num_vertices: usize,
    pub mesh_hash: String,
    #[serde(flatten)]
    pub report: HypothesisReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateResult {
    pub levels: Vec<ValidateLevel>,
    pub h1_to_h3_pass: bool,
}

/// Checks H1-H4 on every level; H4 compares each level with the next one.
pub fn run_validate(cfg: &ExperimentConfig, out: &Path) -> Result<Report<ValidateResult>> {
    let start = Instant::now();
    let family = build_family(cfg)?;
    let levels: Vec<ValidateLevel> = (0..family.len())
        .into_par_iter()
        .map(|k| ValidateLevel {
            level: k,
            num_vertices: family[k].num_vertices(),
            mesh_hash: family[k].content_hash(),
            report: validate_hypotheses(&family[k], family.get(k + 1), &cfg.thresholds),
        })
        .collect();
    let h1_to_h3_pass = levels.iter().all(|l| l.report.h1_to_h3_pass());
    let mesh_hash = levels.last().expect("levels").mesh_hash.clone();
    finish(
        out,
        "validate",
        cfg,
        mesh_hash,
        start,
        ValidateResult {
            levels,
            h1_to_h3_pass,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshLevel {
    pub level: usize,
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub euler_characteristic: i64,
    pub mesh_size: f64,
    pub min_kappa: f64,
    pub mesh_hash: String,
}

/// Writes every level to `meshes/level_<k>.off` and the finest one to `mesh.off`.
pub fn run_mesh(cfg: &ExperimentConfig, out: &Path) -> Result<Report<Vec<MeshLevel>>> {
    let start = Instant::now();
    let family = build_family(cfg)?;
    let hash = cfg.hash();
    let mut levels = Vec::new();
    for (k, tri) in family.iter().enumerate() {
        write_atomic(
            &out.join("meshes").join(format!("level_{k}.off")),
            &off_bytes(tri, &hash)?,
        )?;
        levels.push(MeshLevel {
            level: k,
            num_vertices: tri.num_vertices(),
            num_triangles: tri.num_triangles(),
            euler_characteristic: tri.euler_characteristic(),
            mesh_size: tri.mesh_size(),
            min_kappa: tri.stiffness().min_kappa(),
            mesh_hash: tri.content_hash(),
        });
    }
    let finest = family.last().expect("levels");
    write_atomic(&out.join("mesh.off"), &off_bytes(finest, &hash)?)?;
    let mesh_hash = finest.content_hash();
    finish(out, "mesh", cfg, mesh_hash, start, levels)
}

/// Re-reads `mesh.off` and `field.csv` from `out` and rewrites `defects.json`.
pub fn run_defects(cfg: &ExperimentConfig, out: &Path) -> Result<DefectsFile> {
    let surface = build_surface(cfg)?;
    let mesh_path = out.join("mesh.off");
    let file = std::fs::File::open(&mesh_path)
        .with_context(|| format!("opening {}", mesh_path.display()))?;
    let tri = read_off(surface, BufReader::new(file))
        .with_context(|| format!("reading {}", mesh_path.display()))?;
    let mesh_hash = tri.content_hash();
    let field_path = out.join("field.csv");
    let file = std::fs::File::open(&field_path)
        .with_context(|| format!("opening {}", field_path.display()))?;
    let field = read_field_csv(BufReader::new(file), Some(&mesh_hash))
        .with_context(|| format!("reading {}", field_path.display()))?;
    let frames = FrameField::build(&tri);
    let defects = detect_defects(&tri, &frames, &field, cfg.merge_radius * tri.mesh_size())
        .context("defect detection")?;
    write_defects(cfg, out, &mesh_hash, tri.mesh_size(), &defects)
}
