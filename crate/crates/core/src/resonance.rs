//! Periodic solvability of u'' + a u' + g(u) = p0 + s and the range of the
//! forcing mean s.
//!
//! The Lyapunov-Schmidt split solves the auxiliary two-point problem
//! v'' + a v' = p0 - g(c + w) + mean(g(c + w)), v(0) = v(ω) = 0 as a compact
//! family T(c, w), while the finite-dimensional equation mean(g(c + v)) = s
//! is handled on the traced branch. The solvability range I(p0) is the image
//! of the branch under the mean functional, with endpoints refined by local
//! bisection. Landesman-Lazer problems, the zero-mean correction map
//! x -> w_x under the Wirtinger condition, Hausdorff continuity experiments
//! and the geometric multiplicity search all build on the same pieces.

use crate::bvp::{damped_solve_norm, solve_two_point_damped, BvpError};
use crate::continuation::{
    find_phi_root, solve_at, trace_branch, Branch, BranchPoint, ContinuationError, Rect,
    TraceOptions, DEFAULT_ROOT_TOL,
};
use crate::fixed_point::{OperatorFamily, SolverError};
use crate::grid::{GridError, GridFn, PeriodicSignal, UniformGrid};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Nonlinearity g(u); writes the value into `out`.
pub type VectorMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

pub const DEFAULT_NODES: usize = 401;
pub const DEFAULT_LL_WINDOW_SCALE: f64 = 1e3;
pub const ODE_RESIDUAL_BOUND: f64 = 1e-6;
pub const CLOSURE_BOUND: f64 = 1e-6;
const RANGE_REFINE_ROUNDS: usize = 3;
pub const WX_RESIDUAL_BOUND: f64 = 1e-9;
pub const WX_MEAN_BOUND: f64 = 1e-10;

/// Solvability report attached to a Landesman-Lazer nonexistence outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandesmanLazerReport {
    pub g_minus: f64,
    pub g_plus: f64,
    pub s: f64,
    /// Whether s lies outside the open interval between the limits, making
    /// nonexistence the expected outcome rather than a failure.
    pub outside: bool,
}

#[derive(Debug, Error)]
pub enum ResonanceError {
    #[error("no sign change of s - mean g over [{lo:.4}, {hi:.4}] for s = {s}{}",
        necessary.map(|r| if r.outside {
            format!(" (necessary condition: s must lie strictly between {} and {})", r.g_minus, r.g_plus)
        } else {
            String::new()
        }).unwrap_or_default())]
    NoSignChange { s: f64, lo: f64, hi: f64, necessary: Option<LandesmanLazerReport> },
    #[error("generic-bounded problems need an explicit parameter window")]
    WindowRequired,
    #[error("operation requires a problem of dimension {expected}, got {got}")]
    WrongDim { expected: usize, got: usize },
    #[error("operation does not apply to the {0} nonlinearity class")]
    WrongClass(&'static str),
    #[error("s = {s} is not inside the computed range [{lo:.6}, {hi:.6}] by the required margin")]
    OutsideRange { s: f64, lo: f64, hi: f64 },
    #[error("periodic Newton failed (best residual {best_residual:.3e})")]
    NewtonFailure { best_residual: f64 },
    #[error("point set is empty")]
    EmptySet,
    #[error("solution failed verification: {detail}")]
    VerificationFailed { detail: String },
    #[error("forcing signal must share the problem period and dimension")]
    PeriodMismatch,
    #[error(transparent)]
    Continuation(#[from] ContinuationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Bvp(#[from] BvpError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Declared behaviour class of g, which fixes the automatic branch window.
#[derive(Debug, Clone)]
pub enum GClass {
    /// g(u + sigma_j e_j) = g(u): branch window [0, sigma].
    Periodic { sigma: Vec<f64> },
    /// Distinct limits at ±infinity; `window_scale` is the distance at which
    /// the limits are considered attained for windowing purposes.
    LandesmanLazer { g_minus: f64, g_plus: f64, window_scale: f64 },
    /// Bounded g without extra structure: the window must be supplied and
    /// the range estimate is labelled window-relative.
    GenericBounded,
}

impl GClass {
    fn name(&self) -> &'static str {
        match self {
            GClass::Periodic { .. } => "periodic",
            GClass::LandesmanLazer { .. } => "landesman-lazer",
            GClass::GenericBounded => "generic-bounded",
        }
    }
}

pub struct ResonantProblem {
    omega: f64,
    friction: f64,
    dim: usize,
    g: VectorMap,
    g_sup: f64,
    g_class: GClass,
    p0: PeriodicSignal,
    grid: UniformGrid,
    p0_nodes: Vec<f64>,
    k_disc: f64,
    radius: f64,
}

impl ResonantProblem {
    pub fn scalar(
        omega: f64,
        friction: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_sup: f64,
        g_class: GClass,
        p0: PeriodicSignal,
        n_nodes: usize,
    ) -> Result<Self, ResonanceError> {
        let map: VectorMap = Arc::new(move |u, out| out[0] = g(u[0]));
        Self::build(omega, friction, 1, map, g_sup, g_class, p0, n_nodes)
    }

    pub fn planar(
        omega: f64,
        friction: f64,
        g: VectorMap,
        g_sup: f64,
        g_class: GClass,
        p0: PeriodicSignal,
        n_nodes: usize,
    ) -> Result<Self, ResonanceError> {
        Self::build(omega, friction, 2, g, g_sup, g_class, p0, n_nodes)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        omega: f64,
        friction: f64,
        dim: usize,
        g: VectorMap,
        g_sup: f64,
        g_class: GClass,
        p0: PeriodicSignal,
        n_nodes: usize,
    ) -> Result<Self, ResonanceError> {
        if (p0.period() - omega).abs() > 1e-12 * omega.max(1.0) || p0.dim() != dim {
            return Err(ResonanceError::PeriodMismatch);
        }
        // enforce mean zero by subtracting the sample mean
        let mean = p0.mean();
        let sig_dim = p0.dim();
        let mut idx = 0usize;
        let p0 = p0.map(|v| {
            let c = idx % sig_dim;
            idx += 1;
            v - mean[c]
        });
        let grid = UniformGrid::new(0.0, omega, n_nodes)?;
        let mut p0_nodes = vec![0.0; n_nodes * dim];
        for (k, t) in grid.nodes().enumerate() {
            p0.eval(t, &mut p0_nodes[k * dim..(k + 1) * dim]);
        }
        let k_disc = damped_solve_norm(grid, friction)?;
        let radius = k_disc * (2.0 * g_sup + p0.sup_norm());
        Ok(Self { omega, friction, dim, g, g_sup, g_class, p0, grid, p0_nodes, k_disc, radius })
    }

    /// Same problem with a different forcing (mean is re-subtracted).
    pub fn with_p0(&self, p0: PeriodicSignal) -> Result<Self, ResonanceError> {
        Self::build(
            self.omega,
            self.friction,
            self.dim,
            Arc::clone(&self.g),
            self.g_sup,
            self.g_class.clone(),
            p0,
            self.grid.n_nodes(),
        )
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn p0(&self) -> &PeriodicSignal {
        &self.p0
    }

    pub fn g_sup(&self) -> f64 {
        self.g_sup
    }

    pub fn g_class(&self) -> &GClass {
        &self.g_class
    }

    /// Sampled sup norm of the discrete solve operator.
    pub fn solve_norm(&self) -> f64 {
        self.k_disc
    }

    /// Ball radius k * (2 ||g|| + ||p0||) for the auxiliary solutions.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn g_eval(&self, u: &[f64], out: &mut [f64]) {
        (self.g)(u, out)
    }

    fn g_scalar(&self, u: f64) -> f64 {
        let mut out = [0.0];
        (self.g)(&[u], &mut out);
        out[0]
    }

    fn auto_window(&self) -> Result<(f64, f64), ResonanceError> {
        match &self.g_class {
            GClass::Periodic { sigma } => Ok((0.0, sigma[0])),
            GClass::LandesmanLazer { window_scale, .. } => {
                let half = self.radius + window_scale;
                Ok((-half, half))
            }
            GClass::GenericBounded => Err(ResonanceError::WindowRequired),
        }
    }

    fn ll_report(&self, s: f64) -> Option<LandesmanLazerReport> {
        match &self.g_class {
            GClass::LandesmanLazer { g_minus, g_plus, .. } => {
                let (lo, hi) = (g_minus.min(*g_plus), g_minus.max(*g_plus));
                Some(LandesmanLazerReport {
                    g_minus: *g_minus,
                    g_plus: *g_plus,
                    s,
                    outside: s <= lo || s >= hi,
                })
            }
            _ => None,
        }
    }

    /// Cross-check declared Landesman-Lazer limits against samples at large
    /// |u|; returns the worst deviation, or None for other classes.
    pub fn ll_limit_deviation(&self) -> Option<f64> {
        match &self.g_class {
            GClass::LandesmanLazer { g_minus, g_plus, .. } => {
                let probe = 1e6;
                let at_plus = self.g_scalar(probe);
                let at_minus = self.g_scalar(-probe);
                Some((at_plus - g_plus).abs().max((at_minus - g_minus).abs()))
            }
            _ => None,
        }
    }
}

/// The compact family (c, w) -> two-point solve of
/// p0 - g(c + w) + mean(g(c + w)) with zero boundary values.
///
/// The mean correction is applied as an exact discrete projection, so the
/// assembled right side always has zero rectangle mean over [0, ω).
pub struct ResonanceFamily<'a> {
    prob: &'a ResonantProblem,
}

impl ResonanceFamily<'_> {
    fn assemble_load(&self, params: &[f64], state: &GridFn) -> GridFn {
        let p = self.prob;
        let n = p.grid.n_nodes();
        let dim = p.dim;
        let mut q = vec![0.0; n * dim];
        let mut shifted = vec![0.0; dim];
        let mut gval = vec![0.0; dim];
        let mut mean = vec![0.0; dim];
        for k in 0..n {
            for c in 0..dim {
                shifted[c] = state.value(k, c) + params[c];
            }
            (p.g)(&shifted, &mut gval);
            for c in 0..dim {
                q[k * dim + c] = p.p0_nodes[k * dim + c] - gval[c];
                if k + 1 < n {
                    mean[c] += q[k * dim + c];
                }
            }
        }
        for m in &mut mean {
            *m /= (n - 1) as f64;
        }
        for k in 0..n {
            for c in 0..dim {
                q[k * dim + c] -= mean[c];
            }
        }
        GridFn::from_values(p.grid, dim, q).expect("shape fixed")
    }
}

impl OperatorFamily for ResonanceFamily<'_> {
    fn evaluate(&self, params: &[f64], state: &GridFn) -> Result<GridFn, SolverError> {
        let q = self.assemble_load(params, state);
        solve_two_point_damped(&q, self.prob.friction)
            .map_err(|e| SolverError::Operator(e.to_string()))
    }

    fn param_dim(&self) -> usize {
        self.prob.dim
    }

    fn state_grid(&self) -> UniformGrid {
        self.prob.grid
    }

    fn state_dim(&self) -> usize {
        self.prob.dim
    }

    fn radius(&self) -> f64 {
        self.prob.radius
    }
}

pub fn resonance_operator(prob: &ResonantProblem) -> ResonanceFamily<'_> {
    ResonanceFamily { prob }
}

/// Rectangle-rule mean of g(c + w) over [0, ω), per component.
pub fn mean_nonlinearity(prob: &ResonantProblem, c: &[f64], w: &GridFn) -> Vec<f64> {
    let n = w.n_nodes();
    let dim = prob.dim;
    let mut shifted = vec![0.0; dim];
    let mut gval = vec![0.0; dim];
    let mut mean = vec![0.0; dim];
    for k in 0..n - 1 {
        for i in 0..dim {
            shifted[i] = w.value(k, i) + c[i];
        }
        (prob.g)(&shifted, &mut gval);
        for i in 0..dim {
            mean[i] += gval[i];
        }
    }
    for v in &mut mean {
        *v /= (n - 1) as f64;
    }
    mean
}

/// Computed approximation of the solvability range I(p0).
#[derive(Debug, Clone)]
pub struct IntervalEstimate {
    pub lo: f64,
    pub hi: f64,
    /// Residual width of the endpoint refinement brackets.
    pub tol: f64,
    /// All (c, mean g) samples used, branch order first.
    pub samples: Vec<(f64, f64)>,
    pub window: (f64, f64),
    /// True when the window was user-supplied for a generic-bounded g, in
    /// which case no endpoint convergence is claimed.
    pub window_relative: bool,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

struct RefinePoint {
    c: f64,
    value: f64,
    state: GridFn,
}

fn refine_extremum(
    family: &ResonanceFamily<'_>,
    prob: &ResonantProblem,
    points: &[BranchPoint],
    maximize: bool,
    opts: &TraceOptions,
    samples: &mut Vec<(f64, f64)>,
) -> Result<(f64, f64), ResonanceError> {
    let score = |v: f64| if maximize { v } else { -v };
    let seed = (0..points.len())
        .max_by(|&i, &j| score(points[i].phi).total_cmp(&score(points[j].phi)))
        .expect("non-empty branch");
    let mut tri: Vec<RefinePoint> = Vec::with_capacity(3);
    for idx in [seed.saturating_sub(1), seed, (seed + 1).min(points.len() - 1)] {
        if tri.iter().all(|p| p.c != points[idx].param) {
            tri.push(RefinePoint {
                c: points[idx].param,
                value: points[idx].phi,
                state: points[idx].state.clone(),
            });
        }
    }
    for _ in 0..RANGE_REFINE_ROUNDS {
        let bi = (0..tri.len())
            .max_by(|&i, &j| score(tri[i].value).total_cmp(&score(tri[j].value)))
            .unwrap();
        let warm = tri[bi].state.clone();
        let mut targets = Vec::with_capacity(2);
        if bi > 0 {
            targets.push(0.5 * (tri[bi - 1].c + tri[bi].c));
        }
        if bi + 1 < tri.len() {
            targets.push(0.5 * (tri[bi].c + tri[bi + 1].c));
        }
        for c_new in targets {
            let report = solve_at(family, c_new, &warm, opts)?;
            if !report.converged {
                return Err(ContinuationError::UnresolvedBranch {
                    param: c_new,
                    residual: report.residual,
                }
                .into());
            }
            let value = mean_nonlinearity(prob, &[c_new], &report.solution)[0];
            samples.push((c_new, value));
            tri.push(RefinePoint { c: c_new, value, state: report.solution });
        }
        tri.sort_by(|a, b| a.c.total_cmp(&b.c));
        let bi = (0..tri.len())
            .max_by(|&i, &j| score(tri[i].value).total_cmp(&score(tri[j].value)))
            .unwrap();
        let lo = bi.saturating_sub(1);
        let hi = (bi + 1).min(tri.len() - 1);
        tri = tri
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i >= lo && *i <= hi)
            .map(|(_, p)| p)
            .collect();
    }
    let bi = (0..tri.len())
        .max_by(|&i, &j| score(tri[i].value).total_cmp(&score(tri[j].value)))
        .unwrap();
    let tol = tri
        .iter()
        .map(|p| (score(tri[bi].value) - score(p.value)).abs())
        .fold(0.0f64, f64::max);
    Ok((tri[bi].value, tol))
}

/// Trace the branch over the parameter window and return [min I, max I]
/// with the extremal sub-intervals refined by local bisection.
pub fn compute_range(
    prob: &ResonantProblem,
    window: Option<(f64, f64)>,
    steps: usize,
    opts: &TraceOptions,
) -> Result<IntervalEstimate, ResonanceError> {
    if prob.dim != 1 {
        return Err(ResonanceError::WrongDim { expected: 1, got: prob.dim });
    }
    let window_relative = window.is_some() && matches!(prob.g_class, GClass::GenericBounded);
    let window = match window {
        Some(w) => w,
        None => prob.auto_window()?,
    };
    let family = resonance_operator(prob);
    let functional = |c: f64, w: &GridFn| mean_nonlinearity(prob, &[c], w)[0];
    let branch = trace_branch(&family, &functional, window, steps, opts)?;
    let mut samples: Vec<(f64, f64)> = branch.points.iter().map(|p| (p.param, p.phi)).collect();
    let (_, tol_hi) = refine_extremum(&family, prob, &branch.points, true, opts, &mut samples)?;
    let (_, tol_lo) = refine_extremum(&family, prob, &branch.points, false, opts, &mut samples)?;
    let lo = samples.iter().fold(f64::INFINITY, |m, s| m.min(s.1));
    let hi = samples.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.1));
    Ok(IntervalEstimate {
        lo,
        hi,
        tol: tol_hi.max(tol_lo).max(1e-12),
        samples,
        window,
        window_relative,
    })
}

/// A verified ω-periodic solution of u'' + a u' + g(u) = p0 + s.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    /// Boundary value c = u(0) = u(ω).
    pub c_star: f64,
    pub u: GridFn,
    pub s: f64,
    /// Sup norm of the interior residual of the differential equation.
    pub residual_ode: f64,
    /// |u(0) - u(ω)| + |u'(0) - u'(ω)|.
    pub closure_gap: f64,
    /// mean(g(u)), which matches s up to the root tolerance.
    pub mean_g: f64,
}

fn verify_periodic_solution(
    prob: &ResonantProblem,
    c_star: f64,
    state: &GridFn,
    s: f64,
) -> Result<PeriodicSolution, ResonanceError> {
    let mut u = state.clone();
    u.add_scalar(&[c_star]);
    let n = u.n_nodes();
    let mut residual_ode = 0.0f64;
    for k in 1..n - 1 {
        let acc = u.second_difference(k, 0);
        let vel = u.first_difference(k, 0);
        let res = acc + prob.friction * vel + prob.g_scalar(u.value(k, 0)) - prob.p0_nodes[k] - s;
        residual_ode = residual_ode.max(res.abs());
    }
    let (dl, dr) = u.end_derivatives();
    let closure_gap = (u.value(0, 0) - u.value(n - 1, 0)).abs() + (dl[0] - dr[0]).abs();
    if residual_ode > ODE_RESIDUAL_BOUND || closure_gap > CLOSURE_BOUND {
        return Err(ResonanceError::VerificationFailed {
            detail: format!(
                "c = {c_star:.6}: ode residual {residual_ode:.3e}, closure {closure_gap:.3e}"
            ),
        });
    }
    let mean_g = mean_nonlinearity(prob, &[c_star], state)[0];
    Ok(PeriodicSolution { c_star, u, s, residual_ode, closure_gap, mean_g })
}

/// Find an ω-periodic solution with forcing mean s by locating a sign change
/// of s - mean(g(c + v)) on the branch over the automatic window.
pub fn solve_for_s(
    prob: &ResonantProblem,
    s: f64,
    steps: usize,
    opts: &TraceOptions,
) -> Result<PeriodicSolution, ResonanceError> {
    let window = prob.auto_window()?;
    solve_for_s_in_window(prob, s, window, steps, opts)
}

/// [`solve_for_s`] over an explicit parameter window.
pub fn solve_for_s_in_window(
    prob: &ResonantProblem,
    s: f64,
    window: (f64, f64),
    steps: usize,
    opts: &TraceOptions,
) -> Result<PeriodicSolution, ResonanceError> {
    let traced = solve_for_s_traced(prob, s, window, steps, opts)?;
    match traced.outcome {
        SolveOutcome::Solved(sol) => Ok(sol),
        SolveOutcome::NoSignChange { lo, hi, necessary } => {
            Err(ResonanceError::NoSignChange { s, lo, hi, necessary })
        }
    }
}

/// Outcome of a traced solve: either a verified solution or the absence of a
/// sign change over the window (the nonexistence report for that window).
#[derive(Debug)]
pub enum SolveOutcome {
    Solved(PeriodicSolution),
    NoSignChange { lo: f64, hi: f64, necessary: Option<LandesmanLazerReport> },
}

/// A solve together with the branch it scanned.
#[derive(Debug)]
pub struct TracedSolve {
    pub branch: Branch,
    pub outcome: SolveOutcome,
}

/// [`solve_for_s_in_window`] keeping the traced branch; a missing sign
/// change becomes data rather than an error.
pub fn solve_for_s_traced(
    prob: &ResonantProblem,
    s: f64,
    window: (f64, f64),
    steps: usize,
    opts: &TraceOptions,
) -> Result<TracedSolve, ResonanceError> {
    if prob.dim != 1 {
        return Err(ResonanceError::WrongDim { expected: 1, got: prob.dim });
    }
    let family = resonance_operator(prob);
    let phi = |c: f64, w: &GridFn| s - mean_nonlinearity(prob, &[c], w)[0];
    let branch = trace_branch(&family, &phi, window, steps, opts)?;
    match find_phi_root(&branch, &family, &phi, DEFAULT_ROOT_TOL, opts) {
        Ok((c_star, state)) => {
            let sol = verify_periodic_solution(prob, c_star, &state, s)?;
            Ok(TracedSolve { branch, outcome: SolveOutcome::Solved(sol) })
        }
        Err(ContinuationError::NoSignChange { lo, hi }) => Ok(TracedSolve {
            branch,
            outcome: SolveOutcome::NoSignChange { lo, hi, necessary: prob.ll_report(s) },
        }),
        Err(e) => Err(e.into()),
    }
}

/// Report of the relaxed monotonicity (Wirtinger) check.
#[derive(Debug, Clone, Copy)]
pub struct WirtingerReport {
    pub holds: bool,
    pub sup_quotient: f64,
    /// The comparison bound (2π/ω)².
    pub bound: f64,
    pub samples: usize,
}

/// Sample difference quotients <g(u) - g(v), u - v> / |u - v|² over a box
/// and compare the supremum against (2π/ω)². Sampling is deterministic
/// (Weyl sequences), alternating far pairs and near-coincident pairs.
pub fn check_wirtinger(
    prob: &ResonantProblem,
    box_radius: f64,
    n_samples: usize,
) -> WirtingerReport {
    let bound = (2.0 * PI / prob.omega).powi(2);
    let dim = prob.dim;
    let alphas = [
        std::f64::consts::SQRT_2 - 1.0,
        3.0f64.sqrt() - 1.0,
        5.0f64.sqrt() - 2.0,
        7.0f64.sqrt() - 2.0,
    ];
    let coord = |m: usize, i: usize, shift: f64| -> f64 {
        let x = (m as f64 * alphas[i % alphas.len()] + shift).fract();
        box_radius * (2.0 * x - 1.0)
    };
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut gu = vec![0.0; dim];
    let mut gv = vec![0.0; dim];
    let mut sup = f64::NEG_INFINITY;
    let n = n_samples.max(2);
    for m in 0..n {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = coord(m + 1, i, 0.0);
        }
        if m % 2 == 0 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = coord(m + 1, i, 0.5);
            }
        } else {
            let delta = 1e-3 * box_radius.max(1e-6);
            v.copy_from_slice(&u);
            v[m % dim] += delta;
        }
        let mut dist2 = 0.0;
        for i in 0..dim {
            let d = u[i] - v[i];
            dist2 += d * d;
        }
        if dist2 < 1e-24 {
            continue;
        }
        (prob.g)(&u, &mut gu);
        (prob.g)(&v, &mut gv);
        let mut num = 0.0;
        for i in 0..dim {
            num += (gu[i] - gv[i]) * (u[i] - v[i]);
        }
        sup = sup.max(num / dist2);
    }
    WirtingerReport { holds: sup < bound - 1e-9, sup_quotient: sup, bound, samples: n }
}

/// Solution of the zero-mean correction problem at anchor x.
#[derive(Debug, Clone)]
pub struct WxSolution {
    /// Zero-mean periodic correction w_x.
    pub w: PeriodicSignal,
    /// The constant value of w'' + a w' + g(x + w) - p0, per component.
    pub constant: Vec<f64>,
    pub eq_residual: f64,
    pub mean_residual: f64,
    pub iterations: usize,
}

/// Newton solve of the periodic problem: find (w, C) with
/// w'' + a w' + g(x + w) = p0 + C and mean(w) = 0.
///
/// The discretization is a fourth-order wraparound stencil on the forcing
/// sample grid, with the constants C as extra unknowns and the zero-mean
/// constraints as extra rows; this makes the Lyapunov-Schmidt split explicit
/// in the unknowns.
pub fn solve_wx(prob: &ResonantProblem, x: &[f64]) -> Result<WxSolution, ResonanceError> {
    solve_wx_from(prob, x, None)
}

/// [`solve_wx`] with an explicit starting guess for the w samples.
pub fn solve_wx_from(
    prob: &ResonantProblem,
    x: &[f64],
    start: Option<&[f64]>,
) -> Result<WxSolution, ResonanceError> {
    let dim = prob.dim;
    assert_eq!(x.len(), dim, "anchor dimension mismatch");
    let n = prob.p0.n_samples();
    let h = prob.p0.step();
    let a = prob.friction;
    let unknowns = n * dim + dim;
    // constraint rows are scaled to the stencil magnitude, which pins the
    // mean to well below the equation tolerance
    let mean_scale = 1.0 / (h * h);

    // fourth-order periodic stencils at offsets -2..=2
    let c2 = [-1.0, 16.0, -30.0, 16.0, -1.0].map(|v| v / (12.0 * h * h));
    let c1 = [1.0, -8.0, 0.0, 8.0, -1.0].map(|v| v / (12.0 * h));

    let mut z = DVector::zeros(unknowns);
    if let Some(start) = start {
        assert_eq!(start.len(), n * dim);
        for (i, &v) in start.iter().enumerate() {
            z[i] = v;
        }
    }
    let mut gval = vec![0.0; dim];
    (prob.g)(x, &mut gval);
    for c in 0..dim {
        z[n * dim + c] = gval[c];
    }

    let residual_of = |z: &DVector<f64>| -> (DVector<f64>, f64, f64) {
        let mut shifted = vec![0.0; dim];
        let mut gval = vec![0.0; dim];
        let mut r = DVector::zeros(unknowns);
        let mut eq_res = 0.0f64;
        for k in 0..n {
            for c in 0..dim {
                shifted[c] = x[c] + z[k * dim + c];
            }
            (prob.g)(&shifted, &mut gval);
            for c in 0..dim {
                let mut d2 = 0.0;
                let mut d1 = 0.0;
                for (o, (w2, w1)) in c2.iter().zip(&c1).enumerate() {
                    let idx = (k as isize + o as isize - 2).rem_euclid(n as isize) as usize;
                    let val = z[idx * dim + c];
                    d2 += w2 * val;
                    d1 += w1 * val;
                }
                let res = d2 + a * d1 + gval[c] - prob.p0.sample(k, c) - z[n * dim + c];
                r[k * dim + c] = res;
                eq_res = eq_res.max(res.abs());
            }
        }
        let mut mean_res = 0.0f64;
        for c in 0..dim {
            let mean: f64 = (0..n).map(|k| z[k * dim + c]).sum::<f64>() / n as f64;
            r[n * dim + c] = mean_scale * mean;
            mean_res = mean_res.max(mean.abs());
        }
        (r, eq_res, mean_res)
    };

    let (mut r, mut eq_res, mut mean_res) = residual_of(&z);
    let mut best_residual = f64::INFINITY;
    let mut shifted = vec![0.0; dim];
    let mut gpert = vec![0.0; dim];
    for iter in 0..50 {
        if eq_res <= WX_RESIDUAL_BOUND && mean_res <= WX_MEAN_BOUND {
            let samples = z.as_slice()[..n * dim].to_vec();
            let w = PeriodicSignal::new(prob.omega, dim, samples)?;
            let constant = (0..dim).map(|c| z[n * dim + c]).collect();
            return Ok(WxSolution {
                w,
                constant,
                eq_residual: eq_res,
                mean_residual: mean_res,
                iterations: iter,
            });
        }
        best_residual = best_residual.min(eq_res.max(mean_res));

        // structured Jacobian: circulant stencil plus nonlinear node blocks
        let mut jac = DMatrix::zeros(unknowns, unknowns);
        for k in 0..n {
            for c in 0..dim {
                shifted[c] = x[c] + z[k * dim + c];
            }
            (prob.g)(&shifted, &mut gval);
            for (o, (w2, w1)) in c2.iter().zip(&c1).enumerate() {
                let idx = (k as isize + o as isize - 2).rem_euclid(n as isize) as usize;
                let coeff = w2 + a * w1;
                for c in 0..dim {
                    jac[(k * dim + c, idx * dim + c)] += coeff;
                }
            }
            for cp in 0..dim {
                let delta = 1e-7 * (1.0 + shifted[cp].abs());
                let keep = shifted[cp];
                shifted[cp] += delta;
                (prob.g)(&shifted, &mut gpert);
                shifted[cp] = keep;
                for c in 0..dim {
                    jac[(k * dim + c, k * dim + cp)] += (gpert[c] - gval[c]) / delta;
                }
            }
            for c in 0..dim {
                jac[(k * dim + c, n * dim + c)] = -1.0;
            }
        }
        for c in 0..dim {
            for k in 0..n {
                jac[(n * dim + c, k * dim + c)] = mean_scale / n as f64;
            }
        }

        let lu = jac.lu();
        let delta = match lu.solve(&r) {
            Some(d) => d,
            None => return Err(ResonanceError::NewtonFailure { best_residual }),
        };
        let current = eq_res.max(mean_res * mean_scale);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=20 {
            let trial = &z - lambda * &delta;
            let (rt, eq_t, mean_t) = residual_of(&trial);
            let trial_score = eq_t.max(mean_t * mean_scale);
            if trial_score.is_finite() && trial_score < current {
                z = trial;
                r = rt;
                eq_res = eq_t;
                mean_res = mean_t;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(ResonanceError::NewtonFailure { best_residual });
        }
    }
    Err(ResonanceError::NewtonFailure { best_residual })
}

/// Sampled image of x -> mean(g(x + w_x)) over a planar anchor grid.
#[derive(Debug, Clone)]
pub struct RangeCloud {
    /// (anchor, image) pairs in row-major grid order.
    pub points: Vec<([f64; 2], [f64; 2])>,
    /// Anchors where the Newton solve failed.
    pub skipped: Vec<[f64; 2]>,
    /// Largest image jump between grid neighbours (continuity diagnostic).
    pub max_neighbor_jump: f64,
    pub wirtinger: WirtingerReport,
}

/// Evaluate the connected-range map on a planar grid of anchors.
pub fn sample_range_nd(
    prob: &ResonantProblem,
    rect: Rect,
    resolution: usize,
) -> Result<RangeCloud, ResonanceError> {
    if prob.dim != 2 {
        return Err(ResonanceError::WrongDim { expected: 2, got: prob.dim });
    }
    let res = resolution.max(2);
    let box_radius = rect.x.0.abs().max(rect.x.1.abs()).max(rect.y.0.abs()).max(rect.y.1.abs());
    let wirtinger = check_wirtinger(prob, box_radius + 1.0, 10_000);
    let n = prob.p0.n_samples();
    let mut points = Vec::with_capacity(res * res);
    let mut skipped = Vec::new();
    let mut grid_values: Vec<Option<[f64; 2]>> = vec![None; res * res];
    let mut warm: Option<Vec<f64>> = None;
    let mut gval = [0.0f64; 2];
    let mut shifted = [0.0f64; 2];
    for iy in 0..res {
        for ix in 0..res {
            let x = [
                rect.x.0 + (rect.x.1 - rect.x.0) * ix as f64 / (res - 1) as f64,
                rect.y.0 + (rect.y.1 - rect.y.0) * iy as f64 / (res - 1) as f64,
            ];
            match solve_wx_from(prob, &x, warm.as_deref()) {
                Ok(sol) => {
                    let mut image = [0.0f64; 2];
                    for k in 0..n {
                        shifted[0] = x[0] + sol.w.sample(k, 0);
                        shifted[1] = x[1] + sol.w.sample(k, 1);
                        (prob.g)(&shifted, &mut gval);
                        image[0] += gval[0];
                        image[1] += gval[1];
                    }
                    image[0] /= n as f64;
                    image[1] /= n as f64;
                    grid_values[iy * res + ix] = Some(image);
                    points.push((x, image));
                    warm = Some(sol.w.samples().to_vec());
                }
                Err(ResonanceError::NewtonFailure { .. }) => {
                    skipped.push(x);
                    warm = None;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut max_jump = 0.0f64;
    for iy in 0..res {
        for ix in 0..res {
            let Some(v) = grid_values[iy * res + ix] else { continue };
            for (nx, ny) in [(ix + 1, iy), (ix, iy + 1)] {
                if nx < res && ny < res {
                    if let Some(w) = grid_values[ny * res + nx] {
                        let jump = ((v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2)).sqrt();
                        max_jump = max_jump.max(jump);
                    }
                }
            }
        }
    }
    Ok(RangeCloud { points, skipped, max_neighbor_jump: max_jump, wirtinger })
}

/// Hausdorff distance between two finite point sets (exact double loop).
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, ResonanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(ResonanceError::EmptySet);
    }
    let dist =
        |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|p| to.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// Uniform samples of an interval, as 1-d points for [`hausdorff_distance`].
pub fn interval_samples(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|k| vec![lo + (hi - lo) * k as f64 / (n - 1) as f64]).collect()
}

/// Recompute the range under forcing perturbations of the given amplitudes
/// and tabulate Hausdorff distances to the unperturbed range.
pub fn continuity_experiment(
    prob: &ResonantProblem,
    perturbation: &PeriodicSignal,
    amplitudes: &[f64],
    steps: usize,
    opts: &TraceOptions,
) -> Result<Vec<(f64, f64)>, ResonanceError> {
    let base = compute_range(prob, None, steps, opts)?;
    let base_samples = interval_samples(base.lo, base.hi, 101);
    // perturbation resampled onto the forcing grid, mean removed
    let n = prob.p0.n_samples();
    let pert_vals: Vec<f64> =
        (0..n).map(|k| perturbation.eval_comp(prob.p0.sample_time(k), 0)).collect();
    let pert_mean = pert_vals.iter().sum::<f64>() / n as f64;
    let mut table = Vec::with_capacity(amplitudes.len());
    for &amp in amplitudes {
        let samples: Vec<f64> = (0..n)
            .map(|k| prob.p0.sample(k, 0) + amp * (pert_vals[k] - pert_mean))
            .collect();
        let perturbed = prob.with_p0(PeriodicSignal::new(prob.omega, 1, samples)?)?;
        let range = compute_range(&perturbed, None, steps, opts)?;
        let d = hausdorff_distance(&interval_samples(range.lo, range.hi, 101), &base_samples)?;
        table.push((amp, d));
    }
    Ok(table)
}

/// Check that the periodic solutions u = c + v along a branch never
/// intersect: for every pair c_i < c_j the gap min_t (u_j - u_i) must stay
/// positive. Returns the flag and the global minimum gap.
pub fn nonintersection_check(branch: &Branch) -> (bool, f64) {
    let pts = &branch.points;
    if pts.len() < 2 {
        return (true, f64::INFINITY);
    }
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&i, &j| pts[i].param.total_cmp(&pts[j].param));
    let n_nodes = pts[0].state.n_nodes();
    let mut min_gap = f64::INFINITY;
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            let (i, j) = (order[a], order[b]);
            for k in 0..n_nodes {
                let gap = (pts[j].param + pts[j].state.value(k, 0))
                    - (pts[i].param + pts[i].state.value(k, 0));
                min_gap = min_gap.min(gap);
            }
        }
    }
    (min_gap > 0.0, min_gap)
}

/// Run [`solve_for_s`] over eight σ/4-shifted windows and group the
/// solutions that differ by an integer multiple of the period σ.
pub fn multistart_geometric(
    prob: &ResonantProblem,
    s: f64,
    steps: usize,
    margin: f64,
    opts: &TraceOptions,
) -> Result<Vec<Vec<PeriodicSolution>>, ResonanceError> {
    let sigma = match &prob.g_class {
        GClass::Periodic { sigma } => sigma[0],
        other => return Err(ResonanceError::WrongClass(other.name())),
    };
    let range = compute_range(prob, None, steps, opts)?;
    if s < range.lo + margin || s > range.hi - margin {
        return Err(ResonanceError::OutsideRange { s, lo: range.lo, hi: range.hi });
    }
    let mut solutions: Vec<PeriodicSolution> = Vec::new();
    let mut last_nosign: Option<ResonanceError> = None;
    for j in 0..8 {
        let shift = j as f64 * sigma / 4.0;
        match solve_for_s_in_window(prob, s, (shift, shift + sigma), steps, opts) {
            Ok(sol) => solutions.push(sol),
            Err(e @ ResonanceError::NoSignChange { .. }) => last_nosign = Some(e),
            Err(e) => return Err(e),
        }
    }
    if solutions.is_empty() {
        return Err(last_nosign.unwrap_or(ResonanceError::NoSignChange {
            s,
            lo: 0.0,
            hi: sigma,
            necessary: None,
        }));
    }
    let mut groups: Vec<Vec<PeriodicSolution>> = Vec::new();
    'outer: for sol in solutions {
        for group in &mut groups {
            let rep = &group[0];
            let k = ((sol.u.value(0, 0) - rep.u.value(0, 0)) / sigma).round();
            let mut dist = 0.0f64;
            for (idx, v) in sol.u.values().iter().enumerate() {
                dist = dist.max((v - rep.u.values()[idx] - k * sigma).abs());
            }
            if dist <= 1e-4 {
                group.push(sol);
                continue 'outer;
            }
        }
        groups.push(vec![sol]);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero_forcing(omega: f64) -> PeriodicSignal {
        PeriodicSignal::constant(omega, 256, 0.0).unwrap()
    }

    fn pendulum(omega: f64, friction: f64, p0: PeriodicSignal) -> ResonantProblem {
        ResonantProblem::scalar(
            omega,
            friction,
            f64::sin,
            1.0,
            GClass::Periodic { sigma: vec![2.0 * PI] },
            p0,
            DEFAULT_NODES,
        )
        .unwrap()
    }

    #[test]
    fn operator_zero_data() {
        let prob = ResonantProblem::scalar(
            1.0,
            0.0,
            |_| 0.0,
            0.0,
            GClass::GenericBounded,
            zero_forcing(1.0),
            101,
        )
        .unwrap();
        let fam = resonance_operator(&prob);
        let v = fam.evaluate(&[0.3], &GridFn::zeros(prob.grid(), 1)).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn operator_constant_nonlinearity_cancels() {
        let omega = 2.0;
        let p0 =
            PeriodicSignal::from_scalar_fn(omega, 256, |t| (2.0 * PI * t / omega).cos()).unwrap();
        let make = |kappa: f64| {
            let p0 = p0.clone();
            ResonantProblem::scalar(
                omega,
                0.7,
                move |_| kappa,
                kappa.abs() + 1e-9,
                GClass::GenericBounded,
                p0,
                201,
            )
            .unwrap()
        };
        let base = make(0.0);
        let shifted = make(5.0);
        let w = GridFn::from_scalar_fn(base.grid(), |t| 0.3 * (3.0 * t).sin());
        let v0 = resonance_operator(&base).evaluate(&[0.0], &w).unwrap();
        let v5 = resonance_operator(&shifted).evaluate(&[-3.0], &w).unwrap();
        assert!(v0.sup_dist(&v5) < 1e-12);
    }

    #[test]
    fn operator_fourier_closed_form() {
        // g = 0, a = 0, p0 = cos(2 pi t / omega):
        // v = (omega / 2 pi)^2 (1 - cos(2 pi t / omega))
        let omega = 2.0;
        let p0 =
            PeriodicSignal::from_scalar_fn(omega, 256, |t| (2.0 * PI * t / omega).cos()).unwrap();
        let prob = ResonantProblem::scalar(
            omega,
            0.0,
            |_| 0.0,
            0.0,
            GClass::GenericBounded,
            p0,
            DEFAULT_NODES,
        )
        .unwrap();
        let fam = resonance_operator(&prob);
        let v = fam.evaluate(&[0.0], &GridFn::zeros(prob.grid(), 1)).unwrap();
        let scale = (omega / (2.0 * PI)).powi(2);
        let mut worst = 0.0f64;
        for (k, t) in prob.grid().nodes().enumerate() {
            let exact = scale * (1.0 - (2.0 * PI * t / omega).cos());
            worst = worst.max((v.value(k, 0) - exact).abs());
        }
        assert!(worst < 1e-4, "sup error {worst}");
        // discrete periodic-closure derivative identity
        let (dl, dr) = v.end_derivatives();
        assert!((dl[0] - dr[0]).abs() < 1e-6, "closure jump {}", (dl[0] - dr[0]).abs());
    }

    #[test]
    fn mean_nonlinearity_closed_forms() {
        let omega = 2.0;
        let prob = pendulum(omega, 0.0, zero_forcing(omega));
        let w = GridFn::zeros(prob.grid(), 1);
        assert_abs_diff_eq!(mean_nonlinearity(&prob, &[0.0], &w)[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mean_nonlinearity(&prob, &[PI / 2.0], &w)[0], 1.0, epsilon = 1e-14);
        let w = GridFn::from_scalar_fn(prob.grid(), move |t| (2.0 * PI * t / omega).sin());
        assert_abs_diff_eq!(mean_nonlinearity(&prob, &[0.0], &w)[0], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn range_pendulum_unforced() {
        let prob = pendulum(2.0 * PI, 0.0, zero_forcing(2.0 * PI));
        let est = compute_range(&prob, None, 64, &TraceOptions::default()).unwrap();
        assert_abs_diff_eq!(est.lo, -1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(est.hi, 1.0, epsilon = 1e-3);
        assert!(est.lo >= -1.0 - 1e-9 && est.hi <= 1.0 + 1e-9);
        assert!(!est.window_relative);
    }

    #[test]
    fn range_constant_nonlinearity_is_singleton() {
        let prob = ResonantProblem::scalar(
            1.0,
            0.0,
            |_| 0.3,
            0.3,
            GClass::GenericBounded,
            zero_forcing(1.0),
            101,
        )
        .unwrap();
        let est = compute_range(&prob, Some((-1.0, 1.0)), 16, &TraceOptions::default()).unwrap();
        assert_abs_diff_eq!(est.lo, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(est.hi, 0.3, epsilon = 1e-12);
        assert!(est.window_relative);
    }

    #[test]
    fn range_requires_window_for_generic_class() {
        let prob = ResonantProblem::scalar(
            1.0,
            0.0,
            |u: f64| u.tanh(),
            1.0,
            GClass::GenericBounded,
            zero_forcing(1.0),
            101,
        )
        .unwrap();
        assert!(matches!(
            compute_range(&prob, None, 16, &TraceOptions::default()),
            Err(ResonanceError::WindowRequired)
        ));
    }

    #[test]
    fn forced_pendulum_range_contains_zero() {
        let omega = PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| 0.5 * (2.0 * t).cos()).unwrap();
        let prob = pendulum(omega, 0.0, p0);
        let est = compute_range(&prob, None, 48, &TraceOptions::default()).unwrap();
        assert!(est.lo < -1e-6 && est.hi > 1e-6, "range [{}, {}]", est.lo, est.hi);
        assert!(est.lo >= -1.0 - 1e-9 && est.hi <= 1.0 + 1e-9);
    }

    #[test]
    fn solve_for_s_landesman_lazer() {
        let omega = 2.0 * PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| 0.2 * t.cos()).unwrap();
        let prob = ResonantProblem::scalar(
            omega,
            0.5,
            |u: f64| (2.0 / PI) * u.atan(),
            1.0,
            GClass::LandesmanLazer {
                g_minus: -1.0,
                g_plus: 1.0,
                window_scale: DEFAULT_LL_WINDOW_SCALE,
            },
            p0,
            DEFAULT_NODES,
        )
        .unwrap();
        let sol = solve_for_s(&prob, 0.5, 64, &TraceOptions::with_tol(1e-12)).unwrap();
        assert!(sol.residual_ode <= 1e-6);
        assert!(sol.closure_gap <= 1e-6);
        assert!((sol.mean_g - 0.5).abs() <= 1e-8);

        match solve_for_s(&prob, 1.5, 64, &TraceOptions::with_tol(1e-12)) {
            Err(ResonanceError::NoSignChange { necessary: Some(rep), .. }) => assert!(rep.outside),
            other => panic!("expected NoSignChange with necessary-condition report, got {other:?}"),
        }
    }

    #[test]
    fn solve_for_s_zero_nonlinearity() {
        let omega = 1.0;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| (2.0 * PI * t).sin()).unwrap();
        let prob = ResonantProblem::scalar(
            omega,
            0.0,
            |_| 0.0,
            0.0,
            GClass::GenericBounded,
            p0,
            DEFAULT_NODES,
        )
        .unwrap();
        let sol =
            solve_for_s_in_window(&prob, 0.0, (-1.0, 1.0), 16, &TraceOptions::with_tol(1e-12))
                .unwrap();
        assert!(sol.residual_ode <= 1e-8);
    }

    #[test]
    fn picard_and_newton_agree_on_forced_pendulum() {
        use crate::fixed_point::{newton_solve, picard_solve, SolveOptions};
        let omega = PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| 0.3 * (2.0 * t).cos()).unwrap();
        let prob = pendulum(omega, 0.0, p0);
        let fam = resonance_operator(&prob);
        let opts = SolveOptions::with_tol(1e-11);
        let start = GridFn::zeros(prob.grid(), 1);
        let newton = newton_solve(&fam, &[0.0], &start, &opts).unwrap();
        assert!(newton.converged);
        assert!(newton.residual <= 1e-9);
        let picard = picard_solve(&fam, &[0.0], &start, &opts).unwrap();
        assert!(picard.converged, "picard residual {}", picard.residual);
        assert!(newton.solution.sup_dist(&picard.solution) <= 1e-7);
    }

    #[test]
    fn wirtinger_examples() {
        let prob = pendulum(PI, 0.0, zero_forcing(PI));
        let rep = check_wirtinger(&prob, 10.0, 20_000);
        assert!(rep.holds);
        assert!(rep.sup_quotient <= 1.0 + 1e-6);
        assert_abs_diff_eq!(rep.bound, 4.0, epsilon = 1e-12);

        let steep = ResonantProblem::scalar(
            2.0 * PI,
            0.0,
            |u| 5.0 * u,
            1e9,
            GClass::GenericBounded,
            zero_forcing(2.0 * PI),
            101,
        )
        .unwrap();
        let rep = check_wirtinger(&steep, 10.0, 10_000);
        assert!(!rep.holds);
        assert_abs_diff_eq!(rep.sup_quotient, 5.0, epsilon = 1e-6);

        let flat = ResonantProblem::scalar(
            2.0 * PI,
            0.0,
            |_| 0.7,
            0.7,
            GClass::GenericBounded,
            zero_forcing(2.0 * PI),
            101,
        )
        .unwrap();
        let rep = check_wirtinger(&flat, 10.0, 10_000);
        assert!(rep.holds);
        assert_abs_diff_eq!(rep.sup_quotient, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wx_fourier_oracle() {
        // g = 0, a = 0, p0 = cos t, omega = 2 pi: w = -cos t, C = 0
        let omega = 2.0 * PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| t.cos()).unwrap();
        let prob = ResonantProblem::scalar(
            omega,
            0.0,
            |_| 0.0,
            0.0,
            GClass::GenericBounded,
            p0,
            DEFAULT_NODES,
        )
        .unwrap();
        let sol = solve_wx(&prob, &[3.7]).unwrap();
        assert!(sol.eq_residual <= 1e-9);
        assert!(sol.mean_residual <= 1e-10);
        assert_abs_diff_eq!(sol.constant[0], 0.0, epsilon = 1e-9);
        let mut worst = 0.0f64;
        for k in 0..sol.w.n_samples() {
            let t = sol.w.sample_time(k);
            worst = worst.max((sol.w.sample(k, 0) + t.cos()).abs());
        }
        assert!(worst < 1e-7, "sup error vs Fourier solution {worst}");
    }

    #[test]
    fn wx_zero_data() {
        let prob = ResonantProblem::scalar(
            2.0,
            1.3,
            |_| 0.0,
            0.0,
            GClass::GenericBounded,
            zero_forcing(2.0),
            101,
        )
        .unwrap();
        let sol = solve_wx(&prob, &[0.4]).unwrap();
        assert!(sol.w.sup_norm() < 1e-12);
        assert_abs_diff_eq!(sol.constant[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wx_linear_nonlinearity_closed_form() {
        // g(u) = eps u, a = 0, omega = 2 pi, p0 = cos t:
        // w = cos(t) / (eps - 1), C = eps x
        let eps = 0.1;
        let omega = 2.0 * PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| t.cos()).unwrap();
        let prob = ResonantProblem::scalar(
            omega,
            0.0,
            move |u| eps * u,
            1e9,
            GClass::GenericBounded,
            p0,
            DEFAULT_NODES,
        )
        .unwrap();
        let x = 2.5;
        let sol = solve_wx(&prob, &[x]).unwrap();
        assert_abs_diff_eq!(sol.constant[0], eps * x, epsilon = 1e-8);
        let mut worst = 0.0f64;
        for k in 0..sol.w.n_samples() {
            let t = sol.w.sample_time(k);
            worst = worst.max((sol.w.sample(k, 0) - t.cos() / (eps - 1.0)).abs());
        }
        assert!(worst < 1e-7, "sup error vs closed form {worst}");
    }

    #[test]
    fn wx_two_starts_agree_under_wirtinger() {
        let omega = PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| 0.4 * (2.0 * t).cos()).unwrap();
        let prob = pendulum(omega, 0.3, p0);
        assert!(check_wirtinger(&prob, 8.0, 10_000).holds);
        let from_zero = solve_wx(&prob, &[0.8]).unwrap();
        let n = from_zero.w.n_samples();
        let wiggle: Vec<f64> = (0..n).map(|k| 0.3 * (7.3 * k as f64 + 1.1).sin()).collect();
        let from_wiggle = solve_wx_from(&prob, &[0.8], Some(&wiggle)).unwrap();
        let mut dist = 0.0f64;
        for k in 0..n {
            dist = dist.max((from_zero.w.sample(k, 0) - from_wiggle.w.sample(k, 0)).abs());
        }
        assert!(dist <= 1e-7, "two Newton starts disagree by {dist}");
        assert!(from_zero.mean_residual <= 1e-10);
    }

    #[test]
    fn hausdorff_examples() {
        let a = vec![vec![0.0], vec![1.0]];
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let single = vec![vec![0.0]];
        let pair = vec![vec![0.0], vec![1.0]];
        assert_eq!(hausdorff_distance(&single, &pair).unwrap(), 1.0);
        let unit = interval_samples(0.0, 1.0, 101);
        let double = interval_samples(0.0, 2.0, 101);
        assert_abs_diff_eq!(hausdorff_distance(&unit, &double).unwrap(), 1.0, epsilon = 1e-12);
        assert!(hausdorff_distance(&[], &pair).is_err());
    }

    #[test]
    fn nonintersection_on_constant_branch() {
        let prob = pendulum(2.0 * PI, 0.0, zero_forcing(2.0 * PI));
        let fam = resonance_operator(&prob);
        let functional = |c: f64, w: &GridFn| mean_nonlinearity(&prob, &[c], w)[0];
        let branch =
            trace_branch(&fam, &functional, (0.0, 1.0), 11, &TraceOptions::default()).unwrap();
        let (holds, min_gap) = nonintersection_check(&branch);
        assert!(holds);
        assert_abs_diff_eq!(min_gap, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn multistart_finds_two_geometric_groups() {
        let omega = PI;
        let p0 = PeriodicSignal::from_scalar_fn(omega, 256, |t| 0.3 * (2.0 * t).cos()).unwrap();
        let prob = pendulum(omega, 0.0, p0);
        let groups =
            multistart_geometric(&prob, 0.0, 32, 1e-3, &TraceOptions::with_tol(1e-12)).unwrap();
        assert!(groups.len() >= 2, "got {} geometric groups", groups.len());
        for group in &groups {
            for sol in group {
                assert!(sol.residual_ode <= 1e-6);
            }
        }
    }

    #[test]
    fn multistart_unforced_pendulum_equilibria() {
        let prob = pendulum(PI, 0.0, zero_forcing(PI));
        let groups =
            multistart_geometric(&prob, 0.0, 32, 1e-3, &TraceOptions::with_tol(1e-12)).unwrap();
        // expect group representatives at u = 0 and u = pi (mod 2 pi)
        let mut found_zero = false;
        let mut found_pi = false;
        for group in &groups {
            let c = group[0].u.value(0, 0);
            let c_mod = c.rem_euclid(2.0 * PI);
            if c_mod.min(2.0 * PI - c_mod) < 1e-6 {
                found_zero = true;
            }
            if (c_mod - PI).abs() < 1e-6 {
                found_pi = true;
            }
        }
        let reps: Vec<f64> = groups.iter().map(|g| g[0].c_star).collect();
        assert!(found_zero && found_pi, "group representatives at {reps:?}");
    }

    #[test]
    fn multistart_rejects_exterior_s() {
        let prob = pendulum(PI, 0.0, zero_forcing(PI));
        assert!(matches!(
            multistart_geometric(&prob, 0.999, 32, 1e-2, &TraceOptions::default()),
            Err(ResonanceError::OutsideRange { .. })
        ));
    }
}
