//! Linear boundary-value solvers on uniform grids.
//!
//! Three solvers cover every compact operator in this crate: a Dirichlet
//! solver for v'' = h on a symmetric interval, a damped two-point solver for
//! v'' + a v' = q with zero boundary values, and the periodic closure of the
//! scalar linear equation v' = -D v + r. All second-order discretizations use
//! central differences, so each solve is a tridiagonal sweep per component.

use crate::grid::{hermite_segment_integral, GridFn, PeriodicSignal, UniformGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BvpError {
    #[error("solver needs at least 3 nodes, got {got}")]
    DegenerateGrid { got: usize },
    #[error("tridiagonal system is singular near row {row}")]
    SingularSystem { row: usize },
    #[error("decay coefficient must be positive everywhere (min {min})")]
    NonPositiveDecay { min: f64 },
    #[error("signals must share period and sample count")]
    SignalMismatch,
    #[error("periodic closure is degenerate (multiplier {multiplier})")]
    DegenerateClosure { multiplier: f64 },
}

/// Thomas algorithm for a tridiagonal system with constant bands.
///
/// Solves `sub * x[k-1] + diag * x[k] + sup * x[k+1] = rhs[k]` in place.
fn solve_tridiagonal_const(
    sub: f64,
    diag: f64,
    sup: f64,
    rhs: &mut [f64],
) -> Result<(), BvpError> {
    let n = rhs.len();
    let mut c_prime = vec![0.0; n];
    let mut denom = diag;
    if denom.abs() < 1e-300 {
        return Err(BvpError::SingularSystem { row: 0 });
    }
    c_prime[0] = sup / denom;
    rhs[0] /= denom;
    for k in 1..n {
        denom = diag - sub * c_prime[k - 1];
        if denom.abs() < 1e-300 {
            return Err(BvpError::SingularSystem { row: k });
        }
        c_prime[k] = sup / denom;
        rhs[k] = (rhs[k] - sub * rhs[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= c_prime[k] * rhs[k + 1];
    }
    Ok(())
}

/// Solve v'' = h with v = 0 at both endpoints, per component.
///
/// Second-order central differences; the discrete solution satisfies the
/// sup-norm bound `||v|| <= (L^2/2) ||h||` up to O(step^2), with `L` the
/// half-length of the (symmetric) interval.
pub fn solve_dirichlet(h: &GridFn) -> Result<GridFn, BvpError> {
    solve_two_point_damped(h, 0.0)
}

/// Solve v'' + a v' = q with v = 0 at both endpoints, per component.
pub fn solve_two_point_damped(q: &GridFn, damping: f64) -> Result<GridFn, BvpError> {
    let grid = q.grid();
    let n = grid.n_nodes();
    if n < 3 {
        return Err(BvpError::DegenerateGrid { got: n });
    }
    let step = grid.step();
    let sub = 1.0 - 0.5 * damping * step;
    let diag = -2.0;
    let sup = 1.0 + 0.5 * damping * step;
    let mut out = GridFn::zeros(grid, q.dim());
    let mut rhs = vec![0.0; n - 2];
    for c in 0..q.dim() {
        for k in 1..n - 1 {
            rhs[k - 1] = step * step * q.value(k, c);
        }
        solve_tridiagonal_const(sub, diag, sup, &mut rhs)?;
        for k in 1..n - 1 {
            out.set(k, c, rhs[k - 1]);
        }
    }
    Ok(out)
}

/// Sup-norm of the discrete two-point solve operator q -> v on this grid:
/// the maximum absolute row sum of the inverse system matrix, times step^2.
/// This is the discrete instance of the a-priori constant in
/// ||v|| <= k ||v'' + a v'||.
pub fn damped_solve_norm(grid: UniformGrid, damping: f64) -> Result<f64, BvpError> {
    let n = grid.n_nodes();
    if n < 3 {
        return Err(BvpError::DegenerateGrid { got: n });
    }
    let step = grid.step();
    let sub = 1.0 - 0.5 * damping * step;
    let diag = -2.0;
    let sup = 1.0 + 0.5 * damping * step;
    let m = n - 2;
    let mut row_sums = vec![0.0f64; m];
    let mut rhs = vec![0.0f64; m];
    for j in 0..m {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        rhs[j] = 1.0;
        solve_tridiagonal_const(sub, diag, sup, &mut rhs)?;
        for (sum, v) in row_sums.iter_mut().zip(&rhs) {
            *sum += v.abs();
        }
    }
    Ok(step * step * row_sums.iter().fold(0.0f64, |a, &b| a.max(b)))
}

/// Unique periodic solution of v' = -D v + r via the integrating factor.
///
/// `decay` must be a positive scalar signal; `forcing` may be vector-valued
/// with the same period and sample count. The closure value is
/// v(0) = (integral of E r over one period) / (E(period) - 1) with
/// E(t) = exp(integral of D from 0 to t), and the output is positive whenever
/// the forcing is.
pub fn solve_periodic_first_order(
    decay: &PeriodicSignal,
    forcing: &PeriodicSignal,
) -> Result<PeriodicSignal, BvpError> {
    if decay.dim() != 1 {
        return Err(BvpError::SignalMismatch);
    }
    if (decay.period() - forcing.period()).abs() > 1e-12 * decay.period()
        || decay.n_samples() != forcing.n_samples()
    {
        return Err(BvpError::SignalMismatch);
    }
    let min_decay = decay.min_sample(0);
    if !(min_decay > 0.0) {
        return Err(BvpError::NonPositiveDecay { min: min_decay });
    }
    let n = decay.n_samples();
    let h = decay.step();
    let cum_decay = decay.cumulative_integral(0);
    let growth: Vec<f64> = cum_decay.iter().map(|&v| v.exp()).collect();
    let multiplier = growth[n] - 1.0;
    if !(multiplier > 1e-300) || !multiplier.is_finite() {
        return Err(BvpError::DegenerateClosure { multiplier });
    }

    let dim = forcing.dim();
    let mut samples = vec![0.0; n * dim];
    // derivative of the forcing interpolant at its nodes, per component
    let forcing_deriv = |k: usize, c: usize| -> f64 {
        let at = |off: isize| forcing.sample((k as isize + off).rem_euclid(n as isize) as usize, c);
        (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h)
    };
    for c in 0..dim {
        // integrand y = E * r with derivative y' = E (D r + r')
        let y = |k: usize| -> f64 {
            if k == n {
                growth[n] * forcing.sample(0, c)
            } else {
                growth[k] * forcing.sample(k, c)
            }
        };
        let ydot = |k: usize| -> f64 {
            let kk = k % n;
            let e = if k == n { growth[n] } else { growth[k] };
            e * (decay.sample(kk, 0) * forcing.sample(kk, c) + forcing_deriv(kk, c))
        };
        let mut acc = 0.0;
        let mut cum_er = Vec::with_capacity(n + 1);
        cum_er.push(0.0);
        for k in 0..n {
            acc += hermite_segment_integral(y(k), y(k + 1), ydot(k), ydot(k + 1), h);
            cum_er.push(acc);
        }
        let v0 = cum_er[n] / multiplier;
        for k in 0..n {
            samples[k * dim + c] = (v0 + cum_er[k]) / growth[k];
        }
    }
    Ok(PeriodicSignal::new(decay.period(), dim, samples).expect("valid signal"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sup_err(f: &GridFn, exact: impl Fn(f64) -> f64) -> f64 {
        f.grid()
            .nodes()
            .enumerate()
            .fold(0.0f64, |m, (k, t)| m.max((f.value(k, 0) - exact(t)).abs()))
    }

    #[test]
    fn dirichlet_zero_load() {
        let g = UniformGrid::symmetric(1.0, 101).unwrap();
        let v = solve_dirichlet(&GridFn::zeros(g, 1)).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn dirichlet_constant_load_is_exact() {
        // v'' = 1 on (-1, 1) has the quadratic solution (t^2 - 1)/2, which the
        // central difference scheme reproduces exactly.
        let g = UniformGrid::symmetric(1.0, 401).unwrap();
        let v = solve_dirichlet(&GridFn::constant(g, &[1.0])).unwrap();
        assert!(sup_err(&v, |t| 0.5 * (t * t - 1.0)) < 1e-13);
        assert_abs_diff_eq!(v.value(200, 0), -0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(v.sup_norm(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn dirichlet_eigenfunction_and_order() {
        let exact = |t: f64| -(PI * t).sin() / (PI * PI);
        let mut errs = Vec::new();
        for n in [101usize, 201, 401] {
            let g = UniformGrid::symmetric(1.0, n).unwrap();
            let v = solve_dirichlet(&GridFn::from_scalar_fn(g, |t| (PI * t).sin())).unwrap();
            errs.push(sup_err(&v, exact));
        }
        assert!(errs[2] < 1e-4, "401-node error {}", errs[2]);
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn damped_zero_load() {
        let g = UniformGrid::new(0.0, 1.0, 101).unwrap();
        let v = solve_two_point_damped(&GridFn::zeros(g, 1), 3.0).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn damped_fourier_closed_form() {
        // a = 0, omega = 1, q = sin(2 pi t): v = -sin(2 pi t)/(4 pi^2) and
        // v'(0) = v'(1) = -1/(2 pi).
        let g = UniformGrid::new(0.0, 1.0, 401).unwrap();
        let q = GridFn::from_scalar_fn(g, |t| (2.0 * PI * t).sin());
        let v = solve_two_point_damped(&q, 0.0).unwrap();
        assert!(sup_err(&v, |t| -(2.0 * PI * t).sin() / (4.0 * PI * PI)) < 1e-6);
        let (dl, dr) = v.end_derivatives();
        assert_abs_diff_eq!(dl[0], -1.0 / (2.0 * PI), epsilon = 1e-5);
        assert_abs_diff_eq!(dr[0], -1.0 / (2.0 * PI), epsilon = 1e-5);
    }

    #[test]
    fn damped_friction_closed_form_and_order() {
        // v'' + v' = sin(2 pi t) on [0, 1] with zero boundary values.
        let b = -1.0 / (2.0 * PI * (4.0 * PI * PI + 1.0));
        let a = -1.0 / (4.0 * PI * PI + 1.0);
        let exact = move |t: f64| a * (2.0 * PI * t).sin() + b * ((2.0 * PI * t).cos() - 1.0);
        let mut errs = Vec::new();
        for n in [101usize, 201, 401] {
            let g = UniformGrid::new(0.0, 1.0, n).unwrap();
            let q = GridFn::from_scalar_fn(g, |t| (2.0 * PI * t).sin());
            let v = solve_two_point_damped(&q, 1.0).unwrap();
            errs.push(sup_err(&v, exact));
        }
        assert!(errs[2] < 1e-4);
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn damped_mean_zero_periodic_closure() {
        // Zero-mean right side forces matching one-sided derivatives at the
        // two endpoints up to O(step^2).
        let mut jumps = Vec::new();
        for n in [101usize, 201, 401] {
            let g = UniformGrid::new(0.0, 1.0, n).unwrap();
            let q = GridFn::from_scalar_fn(g, |t| (2.0 * PI * t).cos());
            let v = solve_two_point_damped(&q, 1.0).unwrap();
            let (dl, dr) = v.end_derivatives();
            jumps.push((dl[0] - dr[0]).abs());
        }
        assert!(jumps[2] < 1e-6, "jump at 401 nodes {}", jumps[2]);
        let order = (jumps[0] / jumps[1]).log2();
        assert!(order >= 1.7, "jump order {order}, jumps {jumps:?}");
    }

    #[test]
    fn solve_norm_matches_green_function_mass() {
        // for v'' = q on [0, 1] the Green function has maximal mass 1/8
        let g = UniformGrid::new(0.0, 1.0, 201).unwrap();
        let norm = damped_solve_norm(g, 0.0).unwrap();
        assert_abs_diff_eq!(norm, 0.125, epsilon = 1e-3);
        // friction shrinks the operator norm
        assert!(damped_solve_norm(g, 2.0).unwrap() < norm);
    }

    #[test]
    fn periodic_first_order_constant_equilibrium() {
        let d = PeriodicSignal::constant(1.0, 256, 1.0).unwrap();
        let r = PeriodicSignal::constant(1.0, 256, 2.0).unwrap();
        let v = solve_periodic_first_order(&d, &r).unwrap();
        for k in 0..v.n_samples() {
            assert_abs_diff_eq!(v.sample(k, 0), 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn periodic_first_order_matches_fine_integration() {
        // D(t) = 1 + 0.5 sin(2 pi t), r = D * 1: the solution is v = 1, and
        // the quadrature output must agree with a fine RK4 re-integration
        // started from the closure value.
        let omega = 1.0;
        let d = PeriodicSignal::from_scalar_fn(omega, 256, |t| 1.0 + 0.5 * (2.0 * PI * t).sin())
            .unwrap();
        let r = d.clone();
        let v = solve_periodic_first_order(&d, &r).unwrap();

        // fine RK4 on v' = -D v + r using the signal interpolants
        let steps = 8192usize;
        let h = omega / steps as f64;
        let rhs = |t: f64, y: f64| -d.eval_comp(t, 0) * y + r.eval_comp(t, 0);
        let mut y = v.sample(0, 0);
        let mut errs: f64 = 0.0;
        for k in 0..steps {
            let t = k as f64 * h;
            if k % 32 == 0 {
                errs = errs.max((y - v.eval_comp(t, 0)).abs());
            }
            let k1 = rhs(t, y);
            let k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
            let k4 = rhs(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!(errs <= 1e-8, "sup error vs re-integration {errs}");
        // periodicity: one full period returns to the start
        assert_abs_diff_eq!(y, v.sample(0, 0), epsilon = 1e-8);
    }

    #[test]
    fn periodic_first_order_rejects_nonpositive_decay() {
        let d = PeriodicSignal::from_scalar_fn(1.0, 64, |t| (2.0 * PI * t).sin()).unwrap();
        let r = PeriodicSignal::constant(1.0, 64, 1.0).unwrap();
        assert!(matches!(
            solve_periodic_first_order(&d, &r),
            Err(BvpError::NonPositiveDecay { .. })
        ));
    }

    #[test]
    fn positivity_of_periodic_solution() {
        let d = PeriodicSignal::from_scalar_fn(2.0, 256, |t| 0.5 + 0.3 * (PI * t).cos()).unwrap();
        let r = PeriodicSignal::from_scalar_fn(2.0, 256, |t| 0.2 + 0.1 * (PI * t).sin()).unwrap();
        let v = solve_periodic_first_order(&d, &r).unwrap();
        assert!(v.min_sample(0) > 0.0);
    }
}
