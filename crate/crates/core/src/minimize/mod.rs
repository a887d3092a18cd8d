//! Minimization of the discrete XY energy over angle variables.
//!
//! The unknowns are the unconstrained angles `theta_i`, so the unit-tangency constraint is
//! built in. The generic optimizer in [`optimize`] works on any [`Objective`]; the XY problems
//! with free or Dirichlet boundary conditions are thin wrappers around it.

mod annulus;
mod core_energy;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{energy_and_gradient_with, energy_decrease_with, region_stiffness};
use crate::field::{check_len, random_field, DiscreteField, FieldError, FrameField};
use crate::mesh::{MeshError, Triangulation};
use crate::surface::SurfaceError;
use crate::vorticity::total_winding;

pub use annulus::{annulus_minimizer, AnnulusOptions, AnnulusResult, FLAT_ANNULUS_ETA};
pub use core_energy::{
    annulus_boundary_data, core_energy, core_energy_level, hedgehog_boundary_data, BoundaryData,
    CoreEnergyOptions, CoreEnergyRow, CoreEnergyTable,
};

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    FixedStep { eta: f64 },
    BarzilaiBorwein,
    NonlinearCg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Tolerance on the max-norm of the gradient; `None` means `1e-8` times the mean stiffness.
    pub grad_tol: Option<f64>,
    pub step_rule: StepRule,
    pub seed: u64,
    pub restarts: usize,
    /// Record the total winding after every iteration and report changes.
    pub track_charge: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 20_000,
            grad_tol: None,
            step_rule: StepRule::NonlinearCg,
            seed: 0,
            restarts: 1,
            track_charge: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

/// Iteration at which the total winding changed or some winding became ambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeEvent {
    pub iteration: usize,
    pub total_winding: i64,
    pub ambiguous: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterates: Vec<TraceRow>,
    pub converged: bool,
    pub wall_time: f64,
    pub charge_events: Vec<ChargeEvent>,
}

impl SolveTrace {
    pub fn final_energy(&self) -> f64 {
        self.iterates.last().map_or(f64::NAN, |r| r.energy)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.iterates.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    pub fn iterations(&self) -> usize {
        self.iterates.last().map_or(0, |r| r.iteration)
    }

    /// CSV with columns `iteration,energy,grad_norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,energy,grad_norm\n");
        for r in &self.iterates {
            s.push_str(&format!(
                "{},{:.16e},{:.16e}\n",
                r.iteration, r.energy, r.grad_norm
            ));
        }
        s
    }
}

#[derive(Error)]
pub enum MinimizeError {
    /// The best iterate and the trace are returned alongside the error.
    #[error("not converged after {} iterations (gradient {:.3e})", .trace.iterations(), .trace.final_grad_norm())]
    NotConverged {
        field: DiscreteField,
        trace: SolveTrace,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("no fixed vertices given")]
    NoFixedVertices,
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("unsupported surface: {0}")]
    UnsupportedSurface(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl std::fmt::Debug for MinimizeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinimizeError::NotConverged { field, trace } => f
                .debug_struct("NotConverged")
                .field("len", &field.len())
                .field("iterations", &trace.iterations())
                .field("energy", &trace.final_energy())
                .field("grad_norm", &trace.final_grad_norm())
                .finish(),
            MinimizeError::Field(e) => f.debug_tuple("Field").field(e).finish(),
            MinimizeError::Mesh(e) => f.debug_tuple("Mesh").field(e).finish(),
            MinimizeError::Surface(e) => f.debug_tuple("Surface").field(e).finish(),
            MinimizeError::NoFixedVertices => f.write_str("NoFixedVertices"),
            MinimizeError::InvalidOptions(m) => f.debug_tuple("InvalidOptions").field(m).finish(),
            MinimizeError::UnsupportedSurface(m) => {
                f.debug_tuple("UnsupportedSurface").field(m).finish()
            }
            MinimizeError::Precondition(m) => f.debug_tuple("Precondition").field(m).finish(),
        }
    }
}

impl MinimizeError {
    /// Best iterate of a non-converged run.
    pub fn into_partial(self) -> Option<(DiscreteField, SolveTrace)> {
        match self {
            MinimizeError::NotConverged { field, trace } => Some((field, trace)),
            _ => None,
        }
    }
}

/// A smooth function of `dim` real variables.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
    fn value(&self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }
    /// `f(x) - f(y)`; implementations should resolve differences below the roundoff of `f`.
    fn decrease(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value(x) - self.value(y)
    }
}

/// Result of [`optimize`].
#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rows: Vec<TraceRow>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Wolfe-type line search constant on the directional derivative.
pub const CURVATURE_C2: f64 = 0.1;
const MAX_CURVATURE_TRIALS: usize = 12;

struct Trial {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    decrease: f64,
}

/// Backtracking to the Armijo condition, tested on [`Objective::decrease`]; with `curvature`,
/// additionally refines the step by secant steps on the directional derivative until
/// `|g·d| <= c2 |g0·d|`. The returned step always satisfies the Armijo condition.
fn line_search(
    obj: &impl Objective,
    x: &[f64],
    f: f64,
    d: &[f64],
    gd: f64,
    mut alpha: f64,
    curvature: bool,
) -> Option<Trial> {
    let eval = |a: f64| {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let (ft, gt) = obj.value_and_gradient(&xt);
        // Differences of the recomputed values are only trusted well above roundoff.
        let diff = f - ft;
        let decrease = if diff.abs() > 1e-8 * f.abs() {
            diff
        } else {
            obj.decrease(x, &xt)
        };
        Trial {
            alpha: a,
            x: xt,
            f: ft,
            g: gt,
            decrease,
        }
    };
    let mut best: Option<Trial> = None;
    let (mut lo, mut dlo) = (0.0, gd);
    let mut hi: Option<(f64, f64)> = None;
    let mut refinements = 0;
    for _ in 0..MAX_BACKTRACKS {
        let t = eval(alpha);
        let decrease = t.decrease;
        if !(decrease >= -ARMIJO_C1 * alpha * gd) {
            if best.is_some() {
                // Overshot after an acceptable point: shrink towards it.
                hi = Some((alpha, f64::NAN));
                alpha = 0.5 * (lo + alpha);
                refinements += 1;
                if refinements >= MAX_CURVATURE_TRIALS {
                    break;
                }
                continue;
            }
            let denom = 2.0 * (-decrease - gd * alpha);
            let trial = if denom > 0.0 {
                -gd * alpha * alpha / denom
            } else {
                0.5 * alpha
            };
            alpha = trial.clamp(0.1 * alpha, 0.5 * alpha);
            continue;
        }
        if !curvature {
            return Some(t);
        }
        let gdt = dot(&t.g, d);
        if gdt.abs() <= CURVATURE_C2 * gd.abs() {
            return Some(t);
        }
        let a = alpha;
        if best.as_ref().is_none_or(|b| t.decrease > b.decrease) {
            best = Some(t);
        }
        refinements += 1;
        if refinements >= MAX_CURVATURE_TRIALS {
            break;
        }
        if gdt < 0.0 {
            lo = a;
            dlo = gdt;
        } else {
            hi = Some((a, gdt));
        }
        alpha = match hi {
            Some((h, dh)) if dh.is_finite() && dh > dlo => {
                let s = lo - dlo * (h - lo) / (dh - dlo);
                s.clamp(lo + 0.1 * (h - lo), h - 0.1 * (h - lo))
            }
            Some((h, _)) => 0.5 * (lo + h),
            None => {
                let s = if dlo > gd {
                    lo * gd / (gd - dlo)
                } else {
                    4.0 * lo
                };
                s.clamp(1.5 * lo, 4.0 * lo)
            }
        };
    }
    best
}

/// Descent with Armijo backtracking. `observe` is called after every accepted step with the
/// iteration number and iterate.
pub fn optimize(
    obj: &impl Objective,
    x0: Vec<f64>,
    rule: StepRule,
    grad_tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Outcome {
    let n = obj.dim();
    let mut x = x0;
    let (mut f, mut g) = obj.value_and_gradient(&x);
    let mut rows = vec![TraceRow {
        iteration: 0,
        energy: f,
        grad_norm: max_abs(&g),
    }];
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut prev_alpha = 0.0;
    let mut prev_gd = 0.0;
    let mut prev_s_y: Option<(f64, f64)> = None;
    let mut converged = max_abs(&g) <= grad_tol;
    let mut iter = 0;
    while !converged && iter < max_iters {
        iter += 1;
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            d = g.iter().map(|v| -v).collect();
            gd = -dot(&g, &g);
        }
        let dmax = max_abs(&d);
        let alpha = match rule {
            StepRule::FixedStep { eta } => eta,
            StepRule::BarzilaiBorwein => match prev_s_y {
                Some((ss, sy)) if sy > 0.0 => ss / sy,
                _ => (0.1 / dmax).min(1.0),
            },
            StepRule::NonlinearCg => {
                if prev_alpha > 0.0 {
                    (prev_alpha * prev_gd / gd).min(1.0 / dmax)
                } else {
                    (0.1 / dmax).min(1.0)
                }
            }
        };
        let curvature = matches!(rule, StepRule::NonlinearCg);
        let steepest = d.iter().zip(&g).all(|(a, b)| *a == -*b);
        let Some(Trial {
            alpha,
            x: xnew,
            f: ft,
            g: gt,
            ..
        }) = line_search(obj, &x, f, &d, gd, alpha, curvature)
        else {
            if steepest {
                break;
            }
            // Retry once along the steepest-descent direction.
            d = g.iter().map(|v| -v).collect();
            prev_alpha = 0.0;
            iter -= 1;
            continue;
        };
        let s_dot_s = alpha * alpha * dot(&d, &d);
        let mut s_dot_y = 0.0;
        for k in 0..n {
            s_dot_y += alpha * d[k] * (gt[k] - g[k]);
        }
        prev_s_y = Some((s_dot_s, s_dot_y));
        let beta = match rule {
            StepRule::NonlinearCg => {
                let num: f64 = gt.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
                (num / dot(&g, &g)).max(0.0)
            }
            _ => 0.0,
        };
        prev_alpha = alpha;
        prev_gd = gd;
        x = xnew;
        // The accepted step decreases the energy; keep the record monotone where the
        // recomputed value is off by roundoff.
        f = ft.min(f);
        g = gt;
        for k in 0..n {
            d[k] = -g[k] + beta * d[k];
        }
        if matches!(rule, StepRule::NonlinearCg) && iter % n.max(1) == 0 {
            d = g.iter().map(|v| -v).collect();
        }
        let gn = max_abs(&g);
        rows.push(TraceRow {
            iteration: iter,
            energy: f,
            grad_norm: gn,
        });
        observe(iter, &x);
        converged = gn <= grad_tol;
    }
    let grad_norm = max_abs(&g);
    Outcome {
        x,
        energy: f,
        grad_norm,
        iterations: iter,
        converged,
        rows,
    }
}

/// XY energy as a function of the angles at the free vertices.
pub struct XyObjective<'a> {
    tri: &'a Triangulation,
    frames: &'a FrameField,
    kappa: Vec<f64>,
    free: Vec<usize>,
    base: Vec<f64>,
}

impl<'a> XyObjective<'a> {
    pub fn new(
        tri: &'a Triangulation,
        frames: &'a FrameField,
        kappa: Vec<f64>,
        free: Vec<usize>,
        base: Vec<f64>,
    ) -> Self {
        XyObjective {
            tri,
            frames,
            kappa,
            free,
            base,
        }
    }

    pub fn full(&self, x: &[f64]) -> DiscreteField {
        let mut theta = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            theta[i] = x[k];
        }
        DiscreteField { theta }
    }

    pub fn restrict(&self, field: &DiscreteField) -> Vec<f64> {
        self.free.iter().map(|&i| field.theta[i]).collect()
    }
}

impl Objective for XyObjective<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let field = self.full(x);
        let (e, g) = energy_and_gradient_with(self.tri, self.frames, &field, &self.kappa);
        (e, self.free.iter().map(|&i| g[i]).collect())
    }

    fn decrease(&self, x: &[f64], y: &[f64]) -> f64 {
        let (a, b) = (self.full(x), self.full(y));
        energy_decrease_with(self.tri, self.frames, &a.theta, &b.theta, &self.kappa)
    }
}

fn resolve_tol(tri: &Triangulation, opts: &SolveOptions) -> Result<f64, MinimizeError> {
    if opts.max_iters == 0 {
        return Err(MinimizeError::InvalidOptions(
            "max_iters must be at least 1".into(),
        ));
    }
    let tol = opts.grad_tol.unwrap_or(1e-8 * tri.stiffness().mean_kappa());
    if !(tol > 0.0) {
        return Err(MinimizeError::InvalidOptions(
            "grad_tol must be positive".into(),
        ));
    }
    if let StepRule::FixedStep { eta } = opts.step_rule {
        if !(eta > 0.0) {
            return Err(MinimizeError::InvalidOptions(
                "fixed step must be positive".into(),
            ));
        }
    }
    Ok(tol)
}

/// Callback receiving `(iteration, field)` every `every` iterations.
pub struct Checkpoint<'c> {
    pub every: usize,
    pub sink: &'c (dyn Fn(usize, &DiscreteField) + Sync),
}

fn run(
    obj: &XyObjective<'_>,
    init: &DiscreteField,
    opts: &SolveOptions,
    tol: f64,
    checkpoint: Option<Checkpoint<'_>>,
) -> Result<(DiscreteField, SolveTrace), MinimizeError> {
    let start = Instant::now();
    let mut events = Vec::new();
    let mut last_total = None;
    let track = |field: &DiscreteField,
                 iteration: usize,
                 events: &mut Vec<ChargeEvent>,
                 last: &mut Option<i64>| {
        let (total, ambiguous) = total_winding(obj.tri, obj.frames, field);
        if ambiguous > 0 || last.is_some_and(|l| l != total) {
            events.push(ChargeEvent {
                iteration,
                total_winding: total,
                ambiguous,
            });
        }
        *last = Some(total);
    };
    if opts.track_charge {
        track(init, 0, &mut events, &mut last_total);
    }
    let out = optimize(
        obj,
        obj.restrict(init),
        opts.step_rule,
        tol,
        opts.max_iters,
        |it, x| {
            let needs_field = opts.track_charge
                || checkpoint
                    .as_ref()
                    .is_some_and(|c| c.every > 0 && it % c.every == 0);
            if !needs_field {
                return;
            }
            let field = obj.full(x);
            if opts.track_charge {
                track(&field, it, &mut events, &mut last_total);
            }
            if let Some(c) = checkpoint.as_ref() {
                if c.every > 0 && it % c.every == 0 {
                    (c.sink)(it, &field);
                }
            }
        },
    );
    let trace = SolveTrace {
        iterates: out.rows,
        converged: out.converged,
        wall_time: start.elapsed().as_secs_f64(),
        charge_events: events,
    };
    let field = obj.full(&out.x);
    if out.converged {
        Ok((field, trace))
    } else {
        Err(MinimizeError::NotConverged { field, trace })
    }
}

/// Minimizes the XY energy over all vertex angles starting from `init`.
pub fn minimize(
    tri: &Triangulation,
    frames: &FrameField,
    init: &DiscreteField,
    opts: &SolveOptions,
) -> Result<(DiscreteField, SolveTrace), MinimizeError> {
    minimize_with_checkpoint(tri, frames, init, opts, None)
}

pub fn minimize_with_checkpoint(
    tri: &Triangulation,
    frames: &FrameField,
    init: &DiscreteField,
    opts: &SolveOptions,
    checkpoint: Option<Checkpoint<'_>>,
) -> Result<(DiscreteField, SolveTrace), MinimizeError> {
    check_len(tri.num_vertices(), init.len())?;
    check_len(tri.num_vertices(), frames.len())?;
    let tol = resolve_tol(tri, opts)?;
    let obj = XyObjective::new(
        tri,
        frames,
        tri.stiffness().kappa.clone(),
        (0..tri.num_vertices()).collect(),
        init.theta.clone(),
    );
    run(&obj, init, opts, tol, checkpoint)
}

/// Minimizes over the vertices not in `fixed`; fixed angles are returned bit-exactly.
pub fn minimize_dirichlet(
    tri: &Triangulation,
    frames: &FrameField,
    init: &DiscreteField,
    fixed: &[usize],
    opts: &SolveOptions,
) -> Result<(DiscreteField, SolveTrace), MinimizeError> {
    let all: Vec<usize> = (0..tri.num_triangles()).collect();
    minimize_dirichlet_region(tri, frames, init, fixed, &all, opts)
}

/// Dirichlet problem on the subcomplex formed by `region` (a triangle list): only the energy of
/// those triangles counts, and only their vertices not in `fixed` move.
pub fn minimize_dirichlet_region(
    tri: &Triangulation,
    frames: &FrameField,
    init: &DiscreteField,
    fixed: &[usize],
    region: &[usize],
    opts: &SolveOptions,
) -> Result<(DiscreteField, SolveTrace), MinimizeError> {
    check_len(tri.num_vertices(), init.len())?;
    check_len(tri.num_vertices(), frames.len())?;
    if fixed.is_empty() {
        return Err(MinimizeError::NoFixedVertices);
    }
    let tol = resolve_tol(tri, opts)?;
    let mut is_fixed = vec![false; tri.num_vertices()];
    for &v in fixed {
        if v >= tri.num_vertices() {
            return Err(MinimizeError::Precondition(format!(
                "fixed vertex {v} out of range"
            )));
        }
        is_fixed[v] = true;
    }
    let mut in_region = vec![false; tri.num_vertices()];
    for &t in region {
        for v in tri.triangles()[t] {
            in_region[v] = true;
        }
    }
    let free: Vec<usize> = (0..tri.num_vertices())
        .filter(|&v| in_region[v] && !is_fixed[v])
        .collect();
    let kappa = if region.len() == tri.num_triangles() {
        tri.stiffness().kappa.clone()
    } else {
        region_stiffness(tri, region)
    };
    let obj = XyObjective::new(tri, frames, kappa, free, init.theta.clone());
    run(&obj, init, opts, tol, None)
}

/// One restart of [`minimize_restarts`].
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub seed: u64,
    pub field: DiscreteField,
    pub trace: SolveTrace,
}

/// Runs `opts.restarts` minimizations concurrently. Restart `k` starts from `inits[k]` when
/// present and from a uniformly random field otherwise; random fields use seeds drawn from one
/// generator seeded with `opts.seed`. Non-converged runs are kept with `converged = false`.
pub fn minimize_restarts(
    tri: &Triangulation,
    frames: &FrameField,
    inits: &[DiscreteField],
    opts: &SolveOptions,
) -> Result<Vec<RestartOutcome>, MinimizeError> {
    minimize_restarts_with_checkpoint(tri, frames, inits, opts, 0, &|_, _, _| {})
}

/// As [`minimize_restarts`]; `sink(restart, iteration, field)` is called every `every`
/// iterations of every restart (never when `every` is zero).
pub fn minimize_restarts_with_checkpoint(
    tri: &Triangulation,
    frames: &FrameField,
    inits: &[DiscreteField],
    opts: &SolveOptions,
    every: usize,
    sink: &(dyn Fn(usize, usize, &DiscreteField) + Sync),
) -> Result<Vec<RestartOutcome>, MinimizeError> {
    let count = opts.restarts.max(inits.len()).max(1);
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<u64> = (0..count).map(|_| master.random()).collect();
    seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let init = match inits.get(k) {
                Some(f) => f.clone(),
                None => random_field(tri.num_vertices(), &mut ChaCha8Rng::seed_from_u64(seed)),
            };
            let restart_sink = |it: usize, f: &DiscreteField| sink(k, it, f);
            let checkpoint = (every > 0).then_some(Checkpoint {
                every,
                sink: &restart_sink,
            });
            let (field, trace) =
                match minimize_with_checkpoint(tri, frames, &init, opts, checkpoint) {
                    Ok(r) => r,
                    Err(e @ MinimizeError::NotConverged { .. }) => {
                        e.into_partial().expect("partial result")
                    }
                    Err(e) => return Err(e),
                };
            Ok(RestartOutcome { seed, field, trace })
        })
        .collect()
}

/// Index of the lowest-energy outcome, preferring converged runs.
pub fn best_restart(outcomes: &[RestartOutcome]) -> Option<usize> {
    let key = |o: &RestartOutcome| (!o.trace.converged, o.trace.final_energy());
    (0..outcomes.len()).min_by(|&a, &b| {
        let (ca, ea) = key(&outcomes[a]);
        let (cb, eb) = key(&outcomes[b]);
        ca.cmp(&cb).then(ea.total_cmp(&eb))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{xy_energy, xy_gradient};
    use crate::field::{
        global_unit_field, hedgehog_ansatz, restrict_smooth, DefectSpec, HedgehogOptions,
    };
    use crate::mesh::{discrete_ball, icosphere, planar_grid, torus_mesh};
    use crate::surface::Surface;
    use crate::vorticity::detect_defects;
    use crate::Vec3;

    struct Quadratic;

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
            (
                x[0] * x[0] + 10.0 * x[1] * x[1],
                vec![2.0 * x[0], 20.0 * x[1]],
            )
        }
    }

    #[test]
    fn all_rules_solve_a_quadratic() {
        for rule in [
            StepRule::NonlinearCg,
            StepRule::BarzilaiBorwein,
            StepRule::FixedStep { eta: 0.04 },
        ] {
            let out = optimize(&Quadratic, vec![1.0, 1.0], rule, 1e-10, 10_000, |_, _| {});
            assert!(out.converged, "{rule:?}");
            assert!(out.x.iter().all(|v| v.abs() < 1e-9));
            assert!(out.rows.windows(2).all(|w| w[1].energy <= w[0].energy));
        }
    }

    #[test]
    fn torus_smooth_start_descends() {
        let s = Surface::torus(2.0, 0.5).unwrap();
        let tri = torus_mesh(&s, 48, 12).unwrap();
        let frames = FrameField::build(&tri);
        let init = restrict_smooth(&tri, &frames, |p| global_unit_field(&s, p).unwrap()).unwrap();
        let e0 = xy_energy(&tri, &frames, &init, None).unwrap();
        let (f, trace) = minimize(&tri, &frames, &init, &SolveOptions::default()).unwrap();
        assert!(trace.converged);
        assert!(trace.final_energy() <= e0);
        assert!(trace
            .iterates
            .windows(2)
            .all(|w| w[1].energy <= w[0].energy));
        assert!(detect_defects(&tri, &frames, &f, 3.0 * tri.mesh_size())
            .unwrap()
            .is_empty());
        let g = xy_gradient(&tri, &frames, &f).unwrap();
        let gn = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((gn - trace.final_grad_norm()).abs() <= 1e-12);
    }

    #[test]
    fn sphere_ansatz_converges_to_two_defects() {
        let s = Surface::sphere(1.0).unwrap();
        let tri = icosphere(&s, 3).unwrap();
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
        let init = hedgehog_ansatz(&tri, &frames, &spec, &HedgehogOptions::default()).unwrap();
        let opts = SolveOptions {
            track_charge: true,
            ..Default::default()
        };
        let (f, trace) = minimize(&tri, &frames, &init, &opts).unwrap();
        let d = detect_defects(&tri, &frames, &f, 3.0 * tri.mesh_size()).unwrap();
        assert_eq!(d.total_charge(), 2);
        assert!(d.defects.iter().all(|x| x.charge == 1));
        assert!(trace.charge_events.is_empty(), "{:?}", trace.charge_events);
    }

    #[test]
    fn dirichlet_examples() {
        let g = planar_grid(&Surface::plane(), [-1.0, -1.0], 0.1, 20, 20).unwrap();
        let frames = FrameField::build(&g);
        let n = g.num_vertices();
        let all: Vec<usize> = (0..n).collect();
        let init = DiscreteField::new((0..n).map(|i| i as f64 * 0.01).collect());
        let (f, trace) =
            minimize_dirichlet(&g, &frames, &init, &all, &SolveOptions::default()).unwrap();
        assert_eq!(f, init);
        assert_eq!(trace.iterations(), 0);

        let ball = discrete_ball(&g, &Vec3::zeros(), 0.75).unwrap();
        let mut init = DiscreteField::constant(n, 0.3);
        for &v in &ball.free_vertices {
            init.theta[v] = (v as f64).sin();
        }
        let (f, _) = minimize_dirichlet_region(
            &g,
            &frames,
            &init,
            &ball.boundary_vertices,
            &ball.triangles,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(ball
            .vertices
            .iter()
            .all(|&v| (f.theta[v] - 0.3).abs() < 1e-6));
        assert!(ball
            .boundary_vertices
            .iter()
            .all(|&v| f.theta[v].to_bits() == init.theta[v].to_bits()));
        assert!(matches!(
            minimize_dirichlet(&g, &frames, &init, &[], &SolveOptions::default()),
            Err(MinimizeError::NoFixedVertices)
        ));
    }

    #[test]
    fn restarts_are_deterministic() {
        let tri = icosphere(&Surface::sphere(1.0).unwrap(), 2).unwrap();
        let frames = FrameField::build(&tri);
        let opts = SolveOptions {
            restarts: 3,
            seed: 42,
            max_iters: 200,
            ..Default::default()
        };
        let a = minimize_restarts(&tri, &frames, &[], &opts).unwrap();
        let b = minimize_restarts(&tri, &frames, &[], &opts).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.field, y.field);
            assert_eq!(x.trace.iterates, y.trace.iterates);
        }
        assert!(best_restart(&a).is_some());
    }
}
