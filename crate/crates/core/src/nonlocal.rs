//! Solver for u'' = f(t, u) on (-L, L) with the nonlocal boundary condition
//! u(±L) = g(u(0)), in scalar and planar variants.
//!
//! The substitution u = v + c with c = u(±L) turns the problem into a fixed
//! point of the compact family T(c, w) = Dirichlet solve of f(·, w + c),
//! paired with the scalar bifurcation equation Φ(c, w) = c - g(w(0) + c).
//! Branch tracing over a bracket [a, b] on which Φ changes sign yields every
//! solution crossed by the branch. The planar variant verifies the two
//! degree hypotheses by sampling and a winding number, then solves the
//! coupled system by multistart Newton.

use crate::bvp::{solve_dirichlet, BvpError};
use crate::continuation::{
    phi_roots, trace_branch, winding_number, ContinuationError, Rect, TraceOptions,
};
use crate::fixed_point::{newton_root, OperatorFamily, SolverError};
use crate::grid::{GridFn, UniformGrid};
use nalgebra::DVector;
use std::sync::Arc;
use thiserror::Error;

/// Right-hand side field f(t, u); writes the value into `out`.
pub type Field = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// Boundary map g(u); writes the value into `out`.
pub type VectorMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

pub const DEFAULT_NODES: usize = 401;
const BRACKET_SAMPLES: usize = 101;
const MAX_BRACKET_DOUBLINGS: u32 = 20;
pub const ODE_RESIDUAL_BOUND: f64 = 1e-6;
pub const BC_RESIDUAL_BOUND: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NonlocalError {
    #[error("no admissible bracket for the {class} growth class (scanned to {scanned_to:.3e})")]
    BracketNotFound { class: &'static str, scanned_to: f64 },
    #[error("user bracket fails the boundary inequalities: {detail}")]
    BracketInvalid { detail: String },
    #[error("hypothesis ({which}) failed: {detail}")]
    HypothesisFailed { which: u8, detail: String },
    #[error("no verified solution after {starts} Newton starts; existence is guaranteed under the checked hypotheses, so this is a numerical failure")]
    NoSolutionFound { starts: usize },
    #[error("solution failed verification: {detail}")]
    VerificationFailed { detail: String },
    #[error("operation requires a problem of dimension {expected}, got {got}")]
    WrongDim { expected: usize, got: usize },
    #[error("operation does not apply to the {0} growth class")]
    WrongGrowthClass(&'static str),
    #[error("relaxed growth constants violate k*eps + A < 1 (got {value})")]
    BadRelaxedConstants { value: f64 },
    #[error(transparent)]
    Continuation(#[from] ContinuationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Bvp(#[from] BvpError),
}

/// Declared growth behaviour of the boundary map g, which decides how the
/// continuation bracket is chosen.
#[derive(Debug, Clone)]
pub enum GrowthClass {
    /// limsup |g(u)/u| < 1 at infinity.
    Sublinear,
    /// liminf g(u)/u > 1 at infinity.
    Superlinear,
    /// Explicit bracket with g(a + r) <= a and g(b + r) >= b for |r| <= R.
    UserBracket { a: f64, b: f64 },
    /// Planar problems: open rectangle D for the degree hypotheses.
    PlanarDegree { rect: Rect },
}

impl GrowthClass {
    fn name(&self) -> &'static str {
        match self {
            GrowthClass::Sublinear => "sublinear",
            GrowthClass::Superlinear => "superlinear",
            GrowthClass::UserBracket { .. } => "user-bracket",
            GrowthClass::PlanarDegree { .. } => "planar-degree",
        }
    }
}

pub struct NonlocalProblem {
    half_length: f64,
    dim: usize,
    f: Field,
    g: VectorMap,
    f_sup: f64,
    growth: GrowthClass,
    grid: UniformGrid,
    radius: f64,
}

impl NonlocalProblem {
    /// Scalar problem on (-L, L). When `f_sup` is not declared it is sampled
    /// over the grid times a working range grown self-consistently with the
    /// resulting ball radius.
    pub fn scalar(
        half_length: f64,
        n_nodes: usize,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_sup: Option<f64>,
        growth: GrowthClass,
    ) -> Result<Self, NonlocalError> {
        let field: Field = Arc::new(move |t, u, out| out[0] = f(t, u[0]));
        let map: VectorMap = Arc::new(move |u, out| out[0] = g(u[0]));
        Self::build(half_length, n_nodes, 1, field, map, f_sup, growth)
    }

    /// Planar problem on (-L, L) with the degree rectangle D.
    pub fn planar(
        half_length: f64,
        n_nodes: usize,
        f: Field,
        g: VectorMap,
        f_sup: Option<f64>,
        rect: Rect,
    ) -> Result<Self, NonlocalError> {
        Self::build(half_length, n_nodes, 2, f, g, f_sup, GrowthClass::PlanarDegree { rect })
    }

    fn build(
        half_length: f64,
        n_nodes: usize,
        dim: usize,
        f: Field,
        g: VectorMap,
        f_sup: Option<f64>,
        growth: GrowthClass,
    ) -> Result<Self, NonlocalError> {
        let grid = UniformGrid::symmetric(half_length, n_nodes)
            .map_err(|e| SolverError::Operator(e.to_string()))?;
        let k = 0.5 * half_length * half_length;
        let f_sup = match f_sup {
            Some(v) => v,
            None => {
                // grow the sampling window together with the induced radius
                let (abs_a, abs_b) = match &growth {
                    GrowthClass::UserBracket { a, b } => (a.abs(), b.abs()),
                    _ => (0.0, 0.0),
                };
                let mut range = (abs_a + abs_b + 1.0).max(1.0);
                let mut sup = sample_field_sup(&f, &grid, dim, range);
                for _ in 0..3 {
                    let next = (abs_a + abs_b + 2.0 * k * sup).max(range);
                    if next <= range * (1.0 + 1e-9) {
                        break;
                    }
                    range = next;
                    sup = sample_field_sup(&f, &grid, dim, range);
                }
                sup
            }
        };
        let radius = k * f_sup;
        Ok(Self { half_length, dim, f, g, f_sup, growth, grid, radius })
    }

    /// Replace the ball radius by the a-priori bound (kC + B)/(1 - k eps - A)
    /// valid when f is eps-sublinear with |f| <= eps |u| + C and
    /// |g(v)| <= A |v| + B.
    pub fn with_relaxed_radius(
        mut self,
        eps: f64,
        lin_a: f64,
        lin_b: f64,
        f_c: f64,
    ) -> Result<Self, NonlocalError> {
        let k = 0.5 * self.half_length * self.half_length;
        let denom = 1.0 - k * eps - lin_a;
        if denom <= 0.0 {
            return Err(NonlocalError::BadRelaxedConstants { value: k * eps + lin_a });
        }
        self.radius = (k * f_c + lin_b) / denom;
        Ok(self)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn f_sup(&self) -> f64 {
        self.f_sup
    }

    /// Invariant-ball radius R = (L^2/2) * f_sup (or the relaxed override).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn growth(&self) -> &GrowthClass {
        &self.growth
    }

    fn mid_index(&self) -> usize {
        (self.grid.n_nodes() - 1) / 2
    }

    pub fn g_eval(&self, u: &[f64], out: &mut [f64]) {
        (self.g)(u, out)
    }

    fn g_scalar(&self, u: f64) -> f64 {
        let mut out = [0.0];
        (self.g)(&[u], &mut out);
        out[0]
    }

    fn load(&self, c: &[f64], w: &GridFn) -> GridFn {
        let dim = self.dim;
        let mut shifted = vec![0.0; dim];
        let mut node = 0usize;
        GridFn::from_fn(self.grid, dim, |t, out| {
            for (i, s) in shifted.iter_mut().enumerate() {
                *s = w.value(node, i) + c[i];
            }
            (self.f)(t, &shifted, out);
            node += 1;
        })
    }
}

fn sample_field_sup(f: &Field, grid: &UniformGrid, dim: usize, range: f64) -> f64 {
    let n_u = if dim == 1 { 201 } else { 41 };
    let mut out = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut sup = 0.0f64;
    let t_samples = 201;
    for i in 0..t_samples {
        let t = grid.start() + (grid.end() - grid.start()) * i as f64 / (t_samples - 1) as f64;
        if dim == 1 {
            for j in 0..n_u {
                u[0] = -range + 2.0 * range * j as f64 / (n_u - 1) as f64;
                f(t, &u, &mut out);
                sup = sup.max(out[0].abs());
            }
        } else {
            for j0 in 0..n_u {
                for j1 in 0..n_u {
                    u[0] = -range + 2.0 * range * j0 as f64 / (n_u - 1) as f64;
                    u[1] = -range + 2.0 * range * j1 as f64 / (n_u - 1) as f64;
                    f(t, &u, &mut out);
                    sup = sup.max(euclid(&out));
                }
            }
        }
    }
    sup
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The compact operator family (c, w) -> Dirichlet solve of f(·, w + c).
pub struct NonlocalFamily<'a> {
    prob: &'a NonlocalProblem,
}

impl OperatorFamily for NonlocalFamily<'_> {
    fn evaluate(&self, params: &[f64], state: &GridFn) -> Result<GridFn, SolverError> {
        let load = self.prob.load(params, state);
        solve_dirichlet(&load).map_err(|e| SolverError::Operator(e.to_string()))
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

pub fn nonlocal_operator(prob: &NonlocalProblem) -> NonlocalFamily<'_> {
    NonlocalFamily { prob }
}

/// Bifurcation functional Φ(c, w) = c - g(w(0) + c) for scalar problems.
pub fn nonlocal_phi(prob: &NonlocalProblem, c: f64, w: &GridFn) -> f64 {
    c - prob.g_scalar(w.value(prob.mid_index(), 0) + c)
}

/// Choose a continuation bracket [a, b] with Φ of opposite signs at the two
/// ends, according to the declared growth class.
///
/// User brackets are verified against the non-asymptotic inequalities on a
/// sampled |r| <= R; the asymptotic classes scan a doubling sequence of c.
pub fn choose_bracket(prob: &NonlocalProblem) -> Result<(f64, f64), NonlocalError> {
    if prob.dim != 1 {
        return Err(NonlocalError::WrongDim { expected: 1, got: prob.dim });
    }
    let radius = prob.radius();
    let r_at = |j: usize| -radius + 2.0 * radius * j as f64 / (BRACKET_SAMPLES - 1) as f64;
    let g_min_max = |base: f64| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..BRACKET_SAMPLES {
            let v = prob.g_scalar(base + r_at(j));
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    };

    match &prob.growth {
        GrowthClass::UserBracket { a, b } => {
            let (_, max_at_a) = g_min_max(*a);
            let (min_at_b, _) = g_min_max(*b);
            if max_at_a <= *a && min_at_b >= *b {
                Ok((*a, *b))
            } else {
                Err(NonlocalError::BracketInvalid {
                    detail: format!(
                        "need g(a+r) <= a and g(b+r) >= b; got max g(a+r) = {max_at_a:.6}, \
                         min g(b+r) = {min_at_b:.6} for (a, b) = ({a}, {b})"
                    ),
                })
            }
        }
        GrowthClass::Superlinear => {
            let mut c = if radius > 0.0 { radius } else { 1.0 };
            for _ in 0..=MAX_BRACKET_DOUBLINGS {
                let (min_hi, _) = g_min_max(c);
                let (_, max_lo) = g_min_max(-c);
                if min_hi > c && max_lo < -c {
                    return Ok((-c, c));
                }
                c *= 2.0;
            }
            Err(NonlocalError::BracketNotFound { class: "superlinear", scanned_to: c })
        }
        GrowthClass::Sublinear => {
            let mut c = if radius > 0.0 { radius } else { 1.0 };
            for _ in 0..=MAX_BRACKET_DOUBLINGS {
                let (_, max_hi) = g_min_max(c);
                let (min_lo, _) = g_min_max(-c);
                if max_hi < c && min_lo > -c {
                    return Ok((-c, c));
                }
                c *= 2.0;
            }
            Err(NonlocalError::BracketNotFound { class: "sublinear", scanned_to: c })
        }
        GrowthClass::PlanarDegree { .. } => Err(NonlocalError::WrongGrowthClass("planar-degree")),
    }
}

/// A verified solution of the nonlocal problem.
#[derive(Debug, Clone)]
pub struct NonlocalSolution {
    /// Boundary value c = u(±L).
    pub c_star: f64,
    pub u: GridFn,
    /// Sup norm of the discrete interior residual u'' - f(t, u).
    pub residual_ode: f64,
    /// |u(±L) - g(u(0))|.
    pub residual_bc: f64,
}

fn ode_residual(prob: &NonlocalProblem, u: &GridFn) -> f64 {
    let mut out = vec![0.0; prob.dim];
    let mut worst = 0.0f64;
    for k in 1..u.n_nodes() - 1 {
        (prob.f)(u.grid().node(k), u.node_values(k), &mut out);
        for c in 0..prob.dim {
            worst = worst.max((u.second_difference(k, c) - out[c]).abs());
        }
    }
    worst
}

fn bc_residual(prob: &NonlocalProblem, u: &GridFn) -> f64 {
    let n = u.n_nodes();
    let mut gu = vec![0.0; prob.dim];
    (prob.g)(u.node_values(prob.mid_index()), &mut gu);
    let mut worst = 0.0f64;
    for c in 0..prob.dim {
        worst = worst.max((u.value(0, c) - gu[c]).abs());
        worst = worst.max((u.value(n - 1, c) - gu[c]).abs());
    }
    worst
}

/// A scalar solve together with the branch it was read off from.
#[derive(Debug, Clone)]
pub struct NonlocalRun {
    pub bracket: (f64, f64),
    pub branch: crate::continuation::Branch,
    pub solutions: Vec<NonlocalSolution>,
}

/// Trace the branch over the chosen bracket, refine every sign change of Φ
/// and return the verified solutions u = c* + v*.
pub fn solve_nonlocal(
    prob: &NonlocalProblem,
    steps: usize,
    opts: &TraceOptions,
) -> Result<Vec<NonlocalSolution>, NonlocalError> {
    let bracket = choose_bracket(prob)?;
    solve_nonlocal_in(prob, bracket, steps, opts)
}

/// Same as [`solve_nonlocal`] with an explicit bracket.
pub fn solve_nonlocal_in(
    prob: &NonlocalProblem,
    bracket: (f64, f64),
    steps: usize,
    opts: &TraceOptions,
) -> Result<Vec<NonlocalSolution>, NonlocalError> {
    solve_nonlocal_traced(prob, bracket, steps, opts).map(|run| run.solutions)
}

/// [`solve_nonlocal_in`] keeping the traced branch for inspection.
pub fn solve_nonlocal_traced(
    prob: &NonlocalProblem,
    bracket: (f64, f64),
    steps: usize,
    opts: &TraceOptions,
) -> Result<NonlocalRun, NonlocalError> {
    if prob.dim != 1 {
        return Err(NonlocalError::WrongDim { expected: 1, got: prob.dim });
    }
    let family = nonlocal_operator(prob);
    let phi = |c: f64, w: &GridFn| nonlocal_phi(prob, c, w);
    let branch = trace_branch(&family, &phi, bracket, steps, opts)?;
    let roots = phi_roots(&branch, &family, &phi, crate::continuation::DEFAULT_ROOT_TOL, opts)?;
    if roots.is_empty() {
        return Err(ContinuationError::NoSignChange { lo: bracket.0, hi: bracket.1 }.into());
    }
    let mut solutions = Vec::with_capacity(roots.len());
    for root in roots {
        let mut u = root.state.clone();
        u.add_scalar(&[root.param]);
        let residual_ode = ode_residual(prob, &u);
        let residual_bc = bc_residual(prob, &u);
        if residual_ode > ODE_RESIDUAL_BOUND || residual_bc > BC_RESIDUAL_BOUND {
            return Err(NonlocalError::VerificationFailed {
                detail: format!(
                    "c = {:.6}: ode residual {residual_ode:.3e}, bc residual {residual_bc:.3e}",
                    root.param
                ),
            });
        }
        solutions.push(NonlocalSolution { c_star: root.param, u, residual_ode, residual_bc });
    }
    Ok(NonlocalRun { bracket, branch, solutions })
}

/// A verified planar solution together with the hypothesis diagnostics.
#[derive(Debug, Clone)]
pub struct PlanarSolution {
    /// Boundary value c = u(±L) in the rectangle D.
    pub boundary_value: [f64; 2],
    pub u: GridFn,
    pub residual_ode: f64,
    pub residual_bc: f64,
    /// Winding number of c - g(c) along ∂D.
    pub winding: i64,
    /// Sampled minimum of |g(r + c) - c| over ∂D x {|r| <= R}.
    pub hypothesis_margin: f64,
    pub starts_tried: usize,
}

const HYP_BOUNDARY_SAMPLES: usize = 201;
const HYP_RADIAL_SAMPLES: usize = 41;

/// Verify the two degree hypotheses, then find a solution of the planar
/// problem by multistart Newton on the coupled unknowns (c, v).
pub fn solve_nonlocal_planar(
    prob: &NonlocalProblem,
    multistart_per_axis: usize,
    opts: &TraceOptions,
) -> Result<PlanarSolution, NonlocalError> {
    if prob.dim != 2 {
        return Err(NonlocalError::WrongDim { expected: 2, got: prob.dim });
    }
    let rect = match &prob.growth {
        GrowthClass::PlanarDegree { rect } => *rect,
        other => return Err(NonlocalError::WrongGrowthClass(other.name())),
    };
    let radius = prob.radius();

    // hypothesis (1): g(r + c) != c on the boundary, for all |r| <= R
    let mut margin = f64::INFINITY;
    let mut margin_at = ([0.0; 2], [0.0; 2]);
    let mut gv = [0.0f64; 2];
    for bi in 0..HYP_BOUNDARY_SAMPLES {
        let s = 4.0 * bi as f64 / HYP_BOUNDARY_SAMPLES as f64;
        let c = boundary_point(&rect, s);
        for ri in 0..HYP_RADIAL_SAMPLES {
            let rho = radius * ri as f64 / (HYP_RADIAL_SAMPLES - 1) as f64;
            for ai in 0..HYP_RADIAL_SAMPLES {
                let ang = 2.0 * std::f64::consts::PI * ai as f64 / HYP_RADIAL_SAMPLES as f64;
                let r = [rho * ang.cos(), rho * ang.sin()];
                let arg = [c[0] + r[0], c[1] + r[1]];
                (prob.g)(&arg, &mut gv);
                let gap = euclid(&[gv[0] - c[0], gv[1] - c[1]]);
                if gap < margin {
                    margin = gap;
                    margin_at = (c, r);
                }
                if rho == 0.0 {
                    break;
                }
            }
        }
    }
    if margin < 1e-9 {
        return Err(NonlocalError::HypothesisFailed {
            which: 1,
            detail: format!(
                "g(r + c) = c within {margin:.3e} at c = {:?}, r = {:?}",
                margin_at.0, margin_at.1
            ),
        });
    }

    // hypothesis (2): deg(I - g, D, 0) != 0 via the boundary winding number
    let id_minus_g = |p: [f64; 2]| -> [f64; 2] {
        let mut out = [0.0; 2];
        (prob.g)(&p, &mut out);
        [p[0] - out[0], p[1] - out[1]]
    };
    let winding = winding_number(&id_minus_g, &rect, 256)?;
    if winding == 0 {
        return Err(NonlocalError::HypothesisFailed {
            which: 2,
            detail: "winding number of c - g(c) along the rectangle boundary is 0".into(),
        });
    }

    // multistart Newton on the coupled unknowns z = (c, v)
    let grid = prob.grid;
    let n = grid.n_nodes();
    let mid = prob.mid_index();
    let residual_map = |z: &DVector<f64>| -> Result<DVector<f64>, SolverError> {
        let c = [z[0], z[1]];
        let v = GridFn::from_values(grid, 2, z.as_slice()[2..].to_vec())
            .map_err(|e| SolverError::Operator(e.to_string()))?;
        let tv = solve_dirichlet(&prob.load(&c, &v))
            .map_err(|e| SolverError::Operator(e.to_string()))?;
        let mut gval = [0.0f64; 2];
        (prob.g)(&[v.value(mid, 0) + c[0], v.value(mid, 1) + c[1]], &mut gval);
        let mut out = DVector::zeros(2 + 2 * n);
        out[0] = c[0] - gval[0];
        out[1] = c[1] - gval[1];
        for (i, (a, b)) in v.values().iter().zip(tv.values()).enumerate() {
            out[2 + i] = a - b;
        }
        Ok(out)
    };

    let ms = multistart_per_axis.max(1);
    let start_coord = |i: usize, lo: f64, hi: f64| -> f64 {
        if ms == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (ms - 1) as f64
        }
    };
    let mut tried = 0usize;
    for iy in 0..ms {
        for ix in 0..ms {
            tried += 1;
            let mut z0 = DVector::zeros(2 + 2 * n);
            z0[0] = start_coord(ix, rect.x.0, rect.x.1);
            z0[1] = start_coord(iy, rect.y.0, rect.y.1);
            let result = match newton_root(&residual_map, z0, opts.solver.tol, 60) {
                Ok(r) if r.converged => r,
                _ => continue,
            };
            let c = [result.x[0], result.x[1]];
            let v = GridFn::from_values(grid, 2, result.x.as_slice()[2..].to_vec())
                .expect("shape fixed");
            let mut u = v;
            u.add_scalar(&c);
            let residual_ode = ode_residual(prob, &u);
            let residual_bc = bc_residual(prob, &u);
            if residual_ode <= ODE_RESIDUAL_BOUND && residual_bc <= BC_RESIDUAL_BOUND {
                return Ok(PlanarSolution {
                    boundary_value: c,
                    u,
                    residual_ode,
                    residual_bc,
                    winding,
                    hypothesis_margin: margin,
                    starts_tried: tried,
                });
            }
        }
    }
    Err(NonlocalError::NoSolutionFound { starts: tried })
}

fn boundary_point(rect: &Rect, s: f64) -> [f64; 2] {
    let s = s.rem_euclid(4.0);
    let side = s.floor() as usize % 4;
    let local = s - s.floor();
    let (x0, x1) = rect.x;
    let (y0, y1) = rect.y;
    match side {
        0 => [x0 + local * (x1 - x0), y0],
        1 => [x1, y0 + local * (y1 - y0)],
        2 => [x1 - local * (x1 - x0), y1],
        _ => [x0, y1 - local * (y1 - y0)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quadratic_problem() -> NonlocalProblem {
        NonlocalProblem::scalar(
            1.0,
            DEFAULT_NODES,
            |_, _| 2.0,
            |u| 0.5 * u,
            Some(2.0),
            GrowthClass::Sublinear,
        )
        .unwrap()
    }

    #[test]
    fn operator_zero_field() {
        let prob = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 0.0,
            |u| u,
            Some(0.0),
            GrowthClass::UserBracket { a: -1.0, b: 1.0 },
        )
        .unwrap();
        let fam = nonlocal_operator(&prob);
        let w = GridFn::constant(prob.grid(), &[0.3]);
        let tv = fam.evaluate(&[0.7], &w).unwrap();
        assert_eq!(tv.sup_norm(), 0.0);
    }

    #[test]
    fn operator_constant_field_closed_form() {
        let prob = quadratic_problem();
        let fam = nonlocal_operator(&prob);
        let tv = fam.evaluate(&[5.0], &GridFn::constant(prob.grid(), &[-2.0])).unwrap();
        for (k, t) in prob.grid().nodes().enumerate() {
            assert_abs_diff_eq!(tv.value(k, 0), t * t - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn operator_respects_ball_radius() {
        // f = sin(u), L = 1: R = 0.5 bounds every output
        let prob = NonlocalProblem::scalar(
            1.0,
            201,
            |_, u| u.sin(),
            |u| 0.1 * u,
            Some(1.0),
            GrowthClass::Sublinear,
        )
        .unwrap();
        assert_abs_diff_eq!(prob.radius(), 0.5, epsilon = 1e-9);
        let fam = nonlocal_operator(&prob);
        for (c, amp) in [(0.0, 0.0), (3.0, 0.4), (-7.0, 0.5)] {
            let w = GridFn::from_scalar_fn(prob.grid(), |t| amp * (5.0 * t).cos());
            let tv = fam.evaluate(&[c], &w).unwrap();
            assert!(tv.sup_norm() <= prob.radius() + 1e-9);
        }
    }

    #[test]
    fn phi_closed_forms() {
        let prob_g0 = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 0.0,
            |_| 0.0,
            Some(0.0),
            GrowthClass::Sublinear,
        )
        .unwrap();
        let w = GridFn::zeros(prob_g0.grid(), 1);
        assert_eq!(nonlocal_phi(&prob_g0, 1.7, &w), 1.7);

        let prob_id = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 0.0,
            |u| u,
            Some(0.0),
            GrowthClass::UserBracket { a: -1.0, b: 1.0 },
        )
        .unwrap();
        let w = GridFn::constant(prob_id.grid(), &[0.25]);
        assert_abs_diff_eq!(nonlocal_phi(&prob_id, 3.0, &w), -0.25, epsilon = 1e-14);

        // f = 2, g = u/2, w = t^2 - 1: phi = c/2 + 1/2
        let prob = quadratic_problem();
        let w = GridFn::from_scalar_fn(prob.grid(), |t| t * t - 1.0);
        for c in [-2.0, -1.0, 0.0, 1.5] {
            assert_abs_diff_eq!(nonlocal_phi(&prob, c, &w), 0.5 * c + 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn bracket_scan_cubic() {
        // g = u^3 with R = 0: the scan reduces to g(c) > c, bracket (-2, 2)
        let prob = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 0.0,
            |u| u * u * u,
            Some(0.0),
            GrowthClass::Superlinear,
        )
        .unwrap();
        let (a, b) = choose_bracket(&prob).unwrap();
        assert!(a <= -1.0 && b >= 1.0, "bracket ({a}, {b}) must contain the roots of c = c^3");
        assert!(b <= 2.0 + 1e-12);
    }

    #[test]
    fn bracket_scan_linear_superlinear_passes() {
        // g = 2u with R = 1: scan succeeds once c > 2R
        let prob = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 2.0,
            |u| 2.0 * u,
            Some(2.0),
            GrowthClass::Superlinear,
        )
        .unwrap();
        let (a, b) = choose_bracket(&prob).unwrap();
        assert!(b > 2.0 * prob.radius());
        assert_eq!(a, -b);
    }

    #[test]
    fn bracket_zero_map() {
        let prob = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 2.0,
            |_| 0.0,
            Some(2.0),
            GrowthClass::Sublinear,
        )
        .unwrap();
        let (a, b) = choose_bracket(&prob).unwrap();
        assert!(a < 0.0 && b > 0.0);
        // the verified bracket indeed changes the sign of phi
        let w = GridFn::zeros(prob.grid(), 1);
        assert!(nonlocal_phi(&prob, a, &w) < 0.0);
        assert!(nonlocal_phi(&prob, b, &w) > 0.0);
    }

    #[test]
    fn solve_quadratic_closed_form() {
        let prob = quadratic_problem();
        let sols = solve_nonlocal(&prob, 64, &TraceOptions::with_tol(1e-12)).unwrap();
        assert_eq!(sols.len(), 1);
        let s = &sols[0];
        assert_abs_diff_eq!(s.c_star, -1.0, epsilon = 1e-7);
        for (k, t) in prob.grid().nodes().enumerate() {
            assert_abs_diff_eq!(s.u.value(k, 0), t * t - 2.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn solve_cubic_three_roots() {
        let prob = NonlocalProblem::scalar(
            1.0,
            101,
            |_, _| 0.0,
            |u| u * u * u,
            Some(0.0),
            GrowthClass::Superlinear,
        )
        .unwrap();
        let sols = solve_nonlocal(&prob, 64, &TraceOptions::with_tol(1e-12)).unwrap();
        assert_eq!(sols.len(), 3);
        let mut cs: Vec<f64> = sols.iter().map(|s| s.c_star).collect();
        cs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(cs[0], -1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(cs[1], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(cs[2], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn solve_stability_under_g_perturbation() {
        // c* for g = u/2 is -1; for g + eps it moves by 2*eps
        let eps = 1e-3;
        let prob = NonlocalProblem::scalar(
            1.0,
            DEFAULT_NODES,
            |_, _| 2.0,
            move |u| 0.5 * u + eps,
            Some(2.0),
            GrowthClass::Sublinear,
        )
        .unwrap();
        let sols = solve_nonlocal(&prob, 64, &TraceOptions::with_tol(1e-12)).unwrap();
        assert_eq!(sols.len(), 1);
        assert!((sols[0].c_star - (-1.0)).abs() <= 5.0 * eps);
    }

    #[test]
    fn branch_states_stay_in_ball() {
        let prob = NonlocalProblem::scalar(
            1.0,
            201,
            |t, u| (t + u).sin(),
            |u| 0.5 * u,
            None,
            GrowthClass::Sublinear,
        )
        .unwrap();
        let fam = nonlocal_operator(&prob);
        let phi = |c: f64, w: &GridFn| nonlocal_phi(&prob, c, w);
        let bracket = choose_bracket(&prob).unwrap();
        let branch =
            trace_branch(&fam, &phi, bracket, 33, &TraceOptions::with_tol(1e-12)).unwrap();
        for p in &branch.points {
            assert!(p.state.sup_norm() <= prob.radius() + 1e-8);
        }
    }

    #[test]
    fn direct_schauder_iteration_agrees_on_sublinear_case() {
        // Cross-check: iterate the non-split operator u -> dirichlet solve of
        // f(t, u_prev) shifted by g(u_prev(0)), which Schauder's theorem
        // handles directly in the sublinear case.
        let prob = quadratic_problem();
        let grid = prob.grid();
        let mid = (grid.n_nodes() - 1) / 2;
        let mut u = GridFn::zeros(grid, 1);
        for _ in 0..200 {
            let load = GridFn::constant(grid, &[2.0]);
            let mut next = solve_dirichlet(&load).unwrap();
            let c = 0.5 * u.value(mid, 0);
            next.add_scalar(&[c]);
            if u.sup_dist(&next) < 1e-13 {
                u = next;
                break;
            }
            u = next;
        }
        let sols = solve_nonlocal(&prob, 64, &TraceOptions::with_tol(1e-12)).unwrap();
        assert!(u.sup_dist(&sols[0].u) < 1e-6);
    }

    fn zero_field() -> Field {
        Arc::new(|_, _, out| {
            out[0] = 0.0;
            out[1] = 0.0;
        })
    }

    #[test]
    fn planar_linear_halving_map() {
        // f = 0, g = c/2: the only solution is u = 0
        let g: VectorMap = Arc::new(|u, out| {
            out[0] = 0.5 * u[0];
            out[1] = 0.5 * u[1];
        });
        let prob =
            NonlocalProblem::planar(1.0, 101, zero_field(), g, Some(0.0), Rect::centered(1.0, 1.0))
                .unwrap();
        let sol = solve_nonlocal_planar(&prob, 3, &TraceOptions::default()).unwrap();
        assert!(euclid(&sol.boundary_value) < 1e-8);
        assert!(sol.u.sup_norm() < 1e-8);
        assert_eq!(sol.winding, 1);
    }

    #[test]
    fn planar_expanding_map_winding_one() {
        // f = 0, g = 2c: winding of c - g(c) = -c is 1
        let g: VectorMap = Arc::new(|u, out| {
            out[0] = 2.0 * u[0];
            out[1] = 2.0 * u[1];
        });
        let prob =
            NonlocalProblem::planar(1.0, 101, zero_field(), g, Some(0.0), Rect::centered(1.0, 1.0))
                .unwrap();
        let sol = solve_nonlocal_planar(&prob, 3, &TraceOptions::default()).unwrap();
        assert!(euclid(&sol.boundary_value) < 1e-8);
        assert!(sol.u.sup_norm() < 1e-8);
        assert_eq!(sol.winding, 1);
    }

    #[test]
    fn planar_componentwise_closed_form() {
        // f = (2, 0), g = c/2: c = (-1, 0), u1 = t^2 - 2, u2 = 0. The degree
        // rectangle keeps its boundary clear of the ball |r| <= R = 1.
        let f: Field = Arc::new(|_, _, out| {
            out[0] = 2.0;
            out[1] = 0.0;
        });
        let g: VectorMap = Arc::new(|u, out| {
            out[0] = 0.5 * u[0];
            out[1] = 0.5 * u[1];
        });
        let prob =
            NonlocalProblem::planar(1.0, 201, f, g, Some(2.0), Rect::centered(3.0, 3.0)).unwrap();
        let sol = solve_nonlocal_planar(&prob, 3, &TraceOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.boundary_value[0], -1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.boundary_value[1], 0.0, epsilon = 1e-7);
        for (k, t) in prob.grid().nodes().enumerate() {
            assert_abs_diff_eq!(sol.u.value(k, 0), t * t - 2.0, epsilon = 1e-6);
            assert_abs_diff_eq!(sol.u.value(k, 1), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn planar_hypothesis_one_rejects_grazing_map() {
        // g = identity makes g(r + c) = c at r = 0 fail everywhere
        let g: VectorMap = Arc::new(|u, out| {
            out[0] = u[0];
            out[1] = u[1];
        });
        let prob =
            NonlocalProblem::planar(1.0, 101, zero_field(), g, Some(0.0), Rect::centered(1.0, 1.0))
                .unwrap();
        assert!(matches!(
            solve_nonlocal_planar(&prob, 2, &TraceOptions::default()),
            Err(NonlocalError::HypothesisFailed { which: 1, .. })
        ));
    }

    #[test]
    fn planar_hypothesis_scaling_invariance() {
        // positive scaling of g never changes the winding count while the
        // map stays admissible
        for lambda in [0.5, 1.0, 1.5] {
            let g: VectorMap = Arc::new(move |u: &[f64], out: &mut [f64]| {
                out[0] = lambda * 0.5 * u[0];
                out[1] = lambda * 0.5 * u[1];
            });
            let id_minus_g = move |p: [f64; 2]| {
                let mut out = [0.0; 2];
                g(&p, &mut out);
                [p[0] - out[0], p[1] - out[1]]
            };
            let w = winding_number(&id_minus_g, &Rect::centered(1.0, 1.0), 128).unwrap();
            assert_eq!(w, 1, "lambda = {lambda}");
        }
    }

    #[test]
    fn relaxed_radius_from_remark_constants() {
        let prob = NonlocalProblem::scalar(
            1.0,
            101,
            |_, u| 0.05 * u,
            |u| 0.5 * u,
            Some(1.0),
            GrowthClass::Sublinear,
        )
        .unwrap()
        .with_relaxed_radius(0.05, 0.5, 0.0, 0.0)
        .unwrap();
        // (k C + B) / (1 - k eps - A) with k = 0.5: 0 / 0.475 = 0
        assert_abs_diff_eq!(prob.radius(), 0.0, epsilon = 1e-12);
        assert!(NonlocalProblem::scalar(
            1.0,
            101,
            |_, u| 2.5 * u,
            |u| 0.5 * u,
            Some(1.0),
            GrowthClass::Sublinear,
        )
        .unwrap()
        .with_relaxed_radius(2.5, 0.5, 0.0, 0.0)
        .is_err());
    }
}
