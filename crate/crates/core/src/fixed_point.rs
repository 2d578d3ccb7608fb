//! Generic solvers for v = T(c, v) with a parameterized compact operator T.
//!
//! Applications supply an [`OperatorFamily`]; the solvers know nothing about
//! where the operator came from. Picard iteration with convex damping is the
//! cheap default; a damped Newton method on F(v) = v - T(c, v) with a
//! finite-difference Jacobian is the fallback when Picard stalls.

use crate::grid::{GridFn, UniformGrid};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("operator produced a non-finite value")]
    NonFinite,
    #[error("jacobian is singular")]
    SingularJacobian,
    #[error("no residual descent after {halvings} step halvings (residual {residual:.3e})")]
    NoDescent { halvings: usize, residual: f64 },
    #[error("operator evaluation failed: {0}")]
    Operator(String),
}

/// A family of compact operators (c, w) -> T(c, w) acting on grid functions.
///
/// `radius` declares the invariant ball: the family promises
/// `||evaluate(c, w)|| <= radius()` for all admissible inputs, which is what
/// makes fixed-point continuation across parameters possible at all.
pub trait OperatorFamily {
    fn evaluate(&self, params: &[f64], state: &GridFn) -> Result<GridFn, SolverError>;
    fn param_dim(&self) -> usize;
    fn state_grid(&self) -> UniformGrid;
    fn state_dim(&self) -> usize;
    fn radius(&self) -> f64;

    fn zero_state(&self) -> GridFn {
        GridFn::zeros(self.state_grid(), self.state_dim())
    }
}

/// Options shared by the fixed-point solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Sup-norm residual target.
    pub tol: f64,
    pub picard_max_iter: usize,
    pub newton_max_iter: usize,
    /// Initial Picard damping in (0, 1]; halved (at most twice) when the
    /// residual increases.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, picard_max_iter: 500, newton_max_iter: 50, damping: 1.0 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Outcome of a fixed-point solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridFn,
    /// Sup-norm of v - T(c, v) at `solution`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Picard iteration v <- (1 - damping) v + damping T(c, v).
///
/// Returns the first iterate whose residual meets the tolerance, otherwise
/// `converged = false` with the best iterate seen.
pub fn picard_solve(
    op: &dyn OperatorFamily,
    params: &[f64],
    start: &GridFn,
    opts: &SolveOptions,
) -> Result<SolveReport, SolverError> {
    let mut v = start.clone();
    let mut damping = opts.damping.clamp(f64::EPSILON, 1.0);
    let damping_floor = damping / 4.0;
    let mut prev_residual = f64::INFINITY;
    let mut best: Option<(GridFn, f64)> = None;
    for iter in 0..=opts.picard_max_iter {
        let tv = op.evaluate(params, &v)?;
        if !tv.is_finite() {
            return Err(SolverError::NonFinite);
        }
        let residual = v.sup_dist(&tv);
        if residual <= opts.tol {
            return Ok(SolveReport { solution: v, residual, iterations: iter, converged: true });
        }
        if best.as_ref().map_or(true, |(_, r)| residual < *r) {
            best = Some((v.clone(), residual));
        }
        if iter == opts.picard_max_iter {
            break;
        }
        if residual > prev_residual && damping > damping_floor * 1.0001 {
            damping *= 0.5;
        }
        prev_residual = residual;
        v.lin_comb(1.0 - damping, damping, &tv);
    }
    let (solution, residual) = best.expect("at least one iterate");
    Ok(SolveReport { solution, residual, iterations: opts.picard_max_iter, converged: false })
}

/// Result of a dense Newton solve on a flat unknown vector.
#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 20;

/// Damped Newton iteration on a residual map F with a forward-difference
/// Jacobian, solved densely. The step is halved until the residual decreases.
pub fn newton_root(
    f: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>, SolverError>,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonResult, SolverError> {
    let n = x0.len();
    let mut x = x0;
    let mut r = f(&x)?;
    let mut residual = r.amax();
    if !residual.is_finite() {
        return Err(SolverError::NonFinite);
    }
    for iter in 0..max_iter {
        if residual <= tol {
            return Ok(NewtonResult { x, residual, iterations: iter, converged: true });
        }
        let fd_step = 1e-6 * (1.0 + x.amax());
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            xp[j] += fd_step;
            let rp = f(&xp)?;
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r[i]) / fd_step;
            }
            xp[j] = x[j];
        }
        let lu = jac.lu();
        let delta = lu.solve(&r).ok_or(SolverError::SingularJacobian)?;
        let mut accepted = false;
        let mut lambda = 1.0;
        for halving in 0..=MAX_HALVINGS {
            let trial = &x - lambda * &delta;
            let rt = f(&trial)?;
            let res_t = rt.amax();
            if res_t.is_finite() && (res_t < residual || res_t <= tol) {
                x = trial;
                r = rt;
                residual = res_t;
                accepted = true;
                break;
            }
            if halving == MAX_HALVINGS {
                return Err(SolverError::NoDescent { halvings: MAX_HALVINGS, residual });
            }
            lambda *= 0.5;
        }
        debug_assert!(accepted);
    }
    let converged = residual <= tol;
    Ok(NewtonResult { x, residual, iterations: max_iter, converged })
}

fn flatten(v: &GridFn) -> DVector<f64> {
    DVector::from_column_slice(v.values())
}

fn unflatten(grid: UniformGrid, dim: usize, x: &DVector<f64>) -> GridFn {
    GridFn::from_values(grid, dim, x.as_slice().to_vec()).expect("shape fixed by caller")
}

/// Damped Newton on F(v) = v - T(c, v), as a robust fallback to Picard.
pub fn newton_solve(
    op: &dyn OperatorFamily,
    params: &[f64],
    start: &GridFn,
    opts: &SolveOptions,
) -> Result<SolveReport, SolverError> {
    let grid = op.state_grid();
    let dim = op.state_dim();
    let f = |x: &DVector<f64>| -> Result<DVector<f64>, SolverError> {
        let v = unflatten(grid, dim, x);
        let tv = op.evaluate(params, &v)?;
        if !tv.is_finite() {
            return Err(SolverError::NonFinite);
        }
        Ok(x - flatten(&tv))
    };
    let result = newton_root(&f, flatten(start), opts.tol, opts.newton_max_iter)?;
    Ok(SolveReport {
        solution: unflatten(grid, dim, &result.x),
        residual: result.residual,
        iterations: result.iterations,
        converged: result.converged,
    })
}

/// An operator family defined by a closure; the workhorse adapter for the
/// application modules and for tests.
pub struct FnFamily<F> {
    pub eval: F,
    pub param_dim: usize,
    pub grid: UniformGrid,
    pub dim: usize,
    pub radius: f64,
}

impl<F> OperatorFamily for FnFamily<F>
where
    F: Fn(&[f64], &GridFn) -> Result<GridFn, SolverError>,
{
    fn evaluate(&self, params: &[f64], state: &GridFn) -> Result<GridFn, SolverError> {
        (self.eval)(params, state)
    }

    fn param_dim(&self) -> usize {
        self.param_dim
    }

    fn state_grid(&self) -> UniformGrid {
        self.grid
    }

    fn state_dim(&self) -> usize {
        self.dim
    }

    fn radius(&self) -> f64 {
        self.radius
    }
}
