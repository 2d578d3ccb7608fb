//! Branch tracing over a scalar parameter, sign-change refinement and the
//! finite-dimensional degree utilities.
//!
//! `trace_branch` sweeps the parameter interval with warm starts, recording
//! the fixed point and a user functional Φ at every step; `find_phi_root`
//! bisects between branch points with opposite Φ signs, re-solving the fixed
//! point at every midpoint. This is the numerical realization of a connected
//! fixed-point continuum crossed by a sign-changing functional.

use crate::fixed_point::{
    newton_solve, picard_solve, OperatorFamily, SolveOptions, SolveReport, SolverError,
};
use crate::grid::GridFn;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("branch unresolved at parameter {param} (best residual {residual:.3e})")]
    UnresolvedBranch { param: f64, residual: f64 },
    #[error("functional has no sign change over [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("map vanishes on the boundary near parameter {s:.6}")]
    ZeroOnBoundary { s: f64 },
    #[error("angle step unresolved after max subdivision near parameter {s:.6}")]
    UnresolvedAngleStep { s: f64 },
    #[error("sign condition violated: {detail}")]
    SignCondition { detail: String },
    #[error("bound violated: {detail}")]
    BoundViolation { detail: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One recorded point of a traced branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub param: f64,
    pub state: GridFn,
    pub phi: f64,
    pub residual: f64,
}

/// Ordered trace of the fixed-point branch; parameters are strictly
/// monotone along the sequence.
#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
}

impl Branch {
    pub fn param_start(&self) -> f64 {
        self.points.first().map_or(f64::NAN, |p| p.param)
    }

    pub fn param_end(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.param)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub solver: SolveOptions,
    /// Fall back to Newton when Picard does not converge.
    pub newton_fallback: bool,
    /// Local step halvings allowed when a solve fails.
    pub max_step_halvings: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { solver: SolveOptions::default(), newton_fallback: true, max_step_halvings: 6 }
    }
}

impl TraceOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { solver: SolveOptions::with_tol(tol), ..Default::default() }
    }
}

pub const DEFAULT_TRACE_STEPS: usize = 64;
pub const DEFAULT_ROOT_TOL: f64 = 1e-8;

/// Functional evaluated along the branch.
pub type Phi<'a> = &'a dyn Fn(f64, &GridFn) -> f64;

pub(crate) fn solve_at(
    op: &dyn OperatorFamily,
    param: f64,
    warm: &GridFn,
    opts: &TraceOptions,
) -> Result<SolveReport, SolverError> {
    let report = picard_solve(op, &[param], warm, &opts.solver)?;
    if report.converged || !opts.newton_fallback {
        return Ok(report);
    }
    match newton_solve(op, &[param], warm, &opts.solver) {
        Ok(newton) if newton.converged => Ok(newton),
        Ok(newton) => Ok(if newton.residual < report.residual { newton } else { report }),
        // Newton failures fall back to the best Picard iterate; the caller
        // decides whether the residual is acceptable.
        Err(_) => Ok(report),
    }
}

/// Trace the fixed-point branch over `range`, recording (c, v, Φ, residual)
/// at `steps` uniformly spaced parameters. Failed solves halve the local
/// parameter step (up to `max_step_halvings`), inserting intermediate points.
pub fn trace_branch(
    op: &dyn OperatorFamily,
    phi: Phi,
    range: (f64, f64),
    steps: usize,
    opts: &TraceOptions,
) -> Result<Branch, ContinuationError> {
    assert!(steps >= 2, "need at least two continuation steps");
    let (a, b) = range;
    let mut points: Vec<BranchPoint> = Vec::with_capacity(steps);

    let first = solve_at(op, a, &op.zero_state(), opts)?;
    if !first.converged {
        return Err(ContinuationError::UnresolvedBranch { param: a, residual: first.residual });
    }
    points.push(BranchPoint {
        param: a,
        phi: phi(a, &first.solution),
        residual: first.residual,
        state: first.solution,
    });

    for k in 1..steps {
        let target = a + (b - a) * k as f64 / (steps - 1) as f64;
        advance(op, phi, target, opts, &mut points, 0)?;
    }
    Ok(Branch { points })
}

fn advance(
    op: &dyn OperatorFamily,
    phi: Phi,
    target: f64,
    opts: &TraceOptions,
    points: &mut Vec<BranchPoint>,
    depth: usize,
) -> Result<(), ContinuationError> {
    let last = points.last().expect("branch seeded");
    let report = solve_at(op, target, &last.state, opts)?;
    if report.converged {
        points.push(BranchPoint {
            param: target,
            phi: phi(target, &report.solution),
            residual: report.residual,
            state: report.solution,
        });
        return Ok(());
    }
    if depth >= opts.max_step_halvings {
        return Err(ContinuationError::UnresolvedBranch {
            param: target,
            residual: report.residual,
        });
    }
    let mid = 0.5 * (last.param + target);
    advance(op, phi, mid, opts, points, depth + 1)?;
    advance(op, phi, target, opts, points, depth + 1)
}

/// Indices `i` such that points `i` and `i+1` bracket a sign change of Φ
/// (a zero at point `i` counts as its own bracket).
fn sign_change_brackets(branch: &Branch) -> Vec<usize> {
    let mut out = Vec::new();
    let pts = &branch.points;
    let mut k = 0;
    while k < pts.len() {
        if pts[k].phi == 0.0 {
            out.push(k);
            k += 1;
            continue;
        }
        if k + 1 < pts.len() && pts[k + 1].phi != 0.0 && pts[k].phi * pts[k + 1].phi < 0.0 {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Bisection between two branch points with opposite Φ signs, re-solving the
/// fixed point at each midpoint. Stops when the parameter interval shrinks
/// below `tol_c` or |Φ| drops below 1e-10.
fn refine_bracket(
    op: &dyn OperatorFamily,
    phi: Phi,
    lo: &BranchPoint,
    hi: &BranchPoint,
    tol_c: f64,
    opts: &TraceOptions,
) -> Result<BranchPoint, ContinuationError> {
    const PHI_TOL: f64 = 1e-10;
    if lo.phi == 0.0 {
        return Ok(lo.clone());
    }
    if hi.phi == 0.0 {
        return Ok(hi.clone());
    }
    let mut c_lo = lo.param;
    let mut c_hi = hi.param;
    let mut phi_lo = lo.phi;
    let mut best = if lo.phi.abs() <= hi.phi.abs() { lo.clone() } else { hi.clone() };
    let mut warm = best.state.clone();
    for _ in 0..200 {
        if (c_hi - c_lo).abs() <= tol_c || best.phi.abs() <= PHI_TOL {
            break;
        }
        let c_mid = 0.5 * (c_lo + c_hi);
        let report = solve_at(op, c_mid, &warm, opts)?;
        if !report.converged {
            return Err(ContinuationError::UnresolvedBranch {
                param: c_mid,
                residual: report.residual,
            });
        }
        let phi_mid = phi(c_mid, &report.solution);
        warm = report.solution.clone();
        let mid_point = BranchPoint {
            param: c_mid,
            phi: phi_mid,
            residual: report.residual,
            state: report.solution,
        };
        if phi_mid.abs() < best.phi.abs() {
            best = mid_point;
        }
        if phi_mid == 0.0 {
            break;
        }
        if phi_lo * phi_mid < 0.0 {
            c_hi = c_mid;
        } else {
            c_lo = c_mid;
            phi_lo = phi_mid;
        }
    }
    Ok(best)
}

/// Locate the first Φ sign change on the branch and refine it.
///
/// `NoSignChange` is the solver's nonexistence report for the scanned range.
pub fn find_phi_root(
    branch: &Branch,
    op: &dyn OperatorFamily,
    phi: Phi,
    tol_c: f64,
    opts: &TraceOptions,
) -> Result<(f64, GridFn), ContinuationError> {
    let roots = phi_roots(branch, op, phi, tol_c, opts)?;
    match roots.into_iter().next() {
        Some(p) => Ok((p.param, p.state)),
        None => Err(ContinuationError::NoSignChange {
            lo: branch.param_start(),
            hi: branch.param_end(),
        }),
    }
}

/// Refine every Φ sign change found along the branch, in parameter order.
pub fn phi_roots(
    branch: &Branch,
    op: &dyn OperatorFamily,
    phi: Phi,
    tol_c: f64,
    opts: &TraceOptions,
) -> Result<Vec<BranchPoint>, ContinuationError> {
    let mut out = Vec::new();
    for i in sign_change_brackets(branch) {
        let lo = &branch.points[i];
        if lo.phi == 0.0 {
            out.push(lo.clone());
            continue;
        }
        let hi = &branch.points[i + 1];
        out.push(refine_bracket(op, phi, lo, hi, tol_c, opts)?);
    }
    Ok(out)
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn centered(half_width: f64, half_height: f64) -> Self {
        Self { x: (-half_width, half_width), y: (-half_height, half_height) }
    }

    /// Point on the boundary loop at parameter `s` in [0, 4), one unit of
    /// parameter per side, counterclockwise from the lower-left corner.
    fn boundary_point(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(4.0);
        let side = s.floor() as usize % 4;
        let local = s - s.floor();
        let (x0, x1) = self.x;
        let (y0, y1) = self.y;
        match side {
            0 => [x0 + local * (x1 - x0), y0],
            1 => [x1, y0 + local * (y1 - y0)],
            2 => [x1 - local * (x1 - x0), y1],
            _ => [x0, y1 - local * (y1 - y0)],
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x.0 && p[0] <= self.x.1 && p[1] >= self.y.0 && p[1] <= self.y.1
    }
}

/// Planar map for degree computations.
pub type PlanarMap<'a> = &'a dyn Fn([f64; 2]) -> [f64; 2];

const MAX_ANGLE_SUBDIVISIONS: usize = 4;

fn angle_between(f0: [f64; 2], f1: [f64; 2]) -> f64 {
    let cross = f0[0] * f1[1] - f0[1] * f1[0];
    let dot = f0[0] * f1[0] + f0[1] * f1[1];
    cross.atan2(dot)
}

fn checked_value(
    f: PlanarMap,
    rect: &Rect,
    s: f64,
    floor: f64,
) -> Result<[f64; 2], ContinuationError> {
    let v = f(rect.boundary_point(s));
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if !norm.is_finite() || norm <= floor {
        return Err(ContinuationError::ZeroOnBoundary { s });
    }
    Ok(v)
}

fn accumulate_angle(
    f: PlanarMap,
    rect: &Rect,
    s0: f64,
    v0: [f64; 2],
    s1: f64,
    v1: [f64; 2],
    floor: f64,
    depth: usize,
) -> Result<f64, ContinuationError> {
    let step = angle_between(v0, v1);
    // Keep every accepted increment safely below pi so no winding is lost
    // across the atan2 branch cut.
    if step.abs() < 0.5 * PI {
        return Ok(step);
    }
    if depth >= MAX_ANGLE_SUBDIVISIONS {
        return Err(ContinuationError::UnresolvedAngleStep { s: s0 });
    }
    let sm = 0.5 * (s0 + s1);
    let vm = checked_value(f, rect, sm, floor)?;
    Ok(accumulate_angle(f, rect, s0, v0, sm, vm, floor, depth + 1)?
        + accumulate_angle(f, rect, sm, vm, s1, v1, floor, depth + 1)?)
}

/// Winding number of F around zero along the rectangle boundary: the sum of
/// branch-cut-safe incremental angles of F over the discretized loop,
/// divided by 2π.
pub fn winding_number(
    f: PlanarMap,
    rect: &Rect,
    n_boundary: usize,
) -> Result<i64, ContinuationError> {
    let n = n_boundary.max(64);
    let params: Vec<f64> = (0..n).map(|k| 4.0 * k as f64 / n as f64).collect();
    let raw: Vec<[f64; 2]> = params.iter().map(|&s| f(rect.boundary_point(s))).collect();
    let max_norm = raw
        .iter()
        .fold(0.0f64, |m, v| m.max((v[0] * v[0] + v[1] * v[1]).sqrt()));
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Err(ContinuationError::ZeroOnBoundary { s: 0.0 });
    }
    let floor = 1e-13 * max_norm;
    let mut values = Vec::with_capacity(n);
    for (&s, &v) in params.iter().zip(&raw) {
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if norm <= floor {
            return Err(ContinuationError::ZeroOnBoundary { s });
        }
        values.push(v);
    }
    let mut total = 0.0;
    for k in 0..n {
        let k1 = (k + 1) % n;
        let s1 = if k1 == 0 { 4.0 } else { params[k1] };
        total += accumulate_angle(f, rect, params[k], values[k], s1, values[k1], floor, 0)?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Scalar bisection for f with a sign change over [lo, hi].
fn bisect_scalar(
    f: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    tol_x: f64,
) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        if (hi - lo).abs() <= tol_x {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-dimensional Poincaré–Miranda demo solver on the unit square.
///
/// The scalar family f_t(x) = x - φ₂(t, x)/M has, for each t, a fixed point
/// located by bisection on φ₂(t, ·); the branch of fixed points is swept over
/// t and the sign change of φ₁ along it is refined. Returns a zero of φ.
pub fn poincare_miranda_solve(
    phi: &dyn Fn(f64, f64) -> [f64; 2],
    bound: f64,
    n_steps: usize,
) -> Result<(f64, f64), ContinuationError> {
    let samples = 40usize;
    // second-component sign condition along the bottom and top edges
    for k in 0..=samples {
        let t = k as f64 / samples as f64;
        let low = phi(t, 0.0)[1];
        let high = phi(t, 1.0)[1];
        if low > 0.0 || high < 0.0 {
            return Err(ContinuationError::SignCondition {
                detail: format!("phi2({t:.3}, 0) = {low:.3e}, phi2({t:.3}, 1) = {high:.3e}"),
            });
        }
    }
    // the bound keeps x - phi2/M inside [0, 1]
    let mut sup = 0.0f64;
    for i in 0..=samples {
        for j in 0..=samples {
            let v = phi(i as f64 / samples as f64, j as f64 / samples as f64)[1].abs();
            sup = sup.max(v);
        }
    }
    if bound < sup {
        return Err(ContinuationError::BoundViolation {
            detail: format!("M = {bound} is below the sampled sup |phi2| = {sup:.6}"),
        });
    }

    let x_of = |t: f64| -> f64 {
        let f = |x: f64| phi(t, x)[1];
        bisect_scalar(&f, 0.0, 1.0, f(0.0), 1e-13)
    };
    let g = |t: f64| phi(t, x_of(t))[0];

    let g0 = g(0.0);
    let g1 = g(1.0);
    if g0 > 0.0 || g1 < 0.0 {
        return Err(ContinuationError::SignCondition {
            detail: format!("phi1 along the branch: {g0:.3e} at t=0, {g1:.3e} at t=1"),
        });
    }

    let steps = n_steps.max(2);
    let mut prev_t = 0.0;
    let mut prev_g = g0;
    for k in 1..steps {
        let t = k as f64 / (steps - 1) as f64;
        let gt = g(t);
        if prev_g == 0.0 || prev_g * gt <= 0.0 {
            let t_star = bisect_scalar(&g, prev_t, t, prev_g, 1e-11);
            let x_star = x_of(t_star);
            return Ok((t_star, x_star));
        }
        prev_t = t;
        prev_g = gt;
    }
    Err(ContinuationError::NoSignChange { lo: 0.0, hi: 1.0 })
}
