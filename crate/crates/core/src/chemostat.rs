//! Periodic orbits of a delayed chemostat via its Poincaré map.
//!
//! The model couples substrate s and biomass x through a growth law μ with a
//! fixed delay τ in the biomass equation. Integration is the method of
//! steps: over each delay interval the delayed term is a known function of
//! stored history, and a fixed-step fourth-order Runge-Kutta scheme with
//! cubic-Hermite dense output advances the state. The Poincaré map shifts
//! the substrate history by one period; its partial fixed points in the
//! history variable, swept over the initial biomass x0, carry the sign
//! change of the growth-balance functional that pins the periodic orbit.

use crate::bvp::{solve_periodic_first_order, BvpError};
use crate::fixed_point::{picard_solve, OperatorFamily, SolveOptions, SolverError};
use crate::grid::{hermite_segment_integral, GridError, GridFn, PeriodicSignal, UniformGrid};
use thiserror::Error;

pub const DEFAULT_STEPS_PER_PERIOD: usize = 2048;
pub const DEFAULT_HISTORY_NODES: usize = 257;
pub const INNER_TOL: f64 = 1e-9;
pub const INNER_MAX_ITER: usize = 300;
pub const ORBIT_TOL: f64 = 1e-8;
pub const POINCARE_RESIDUAL_BOUND: f64 = 1e-7;
pub const LOG_IDENTITY_BOUND: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ChemostatError {
    #[error("invalid model: {detail}")]
    InvalidModel { detail: String },
    #[error("state left the positive cone at t = {t:.6} (s = {s:.3e}, x = {x:.3e})")]
    PositivityViolation { t: f64, s: f64, x: f64 },
    #[error("non-finite state at t = {t:.6}")]
    NonFiniteState { t: f64 },
    #[error("inner fixed point did not converge (best residual {best_residual:.3e})")]
    NoConvergence { best_residual: f64 },
    #[error("growth-balance functional stayed positive up to x0 = {x0_max:.3e} (last value {phi:.3e}); the sign change exists, so this is a numerical failure")]
    ScanExhausted { x0_max: f64, phi: f64 },
    #[error("orbit failed verification: {detail}")]
    VerificationFailed { detail: String },
    #[error(transparent)]
    Bvp(#[from] BvpError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Growth law μ(s).
#[derive(Debug, Clone)]
pub enum MuSpec {
    Monod { m: f64, ks: f64 },
    /// Strictly increasing table (s, μ(s)); piecewise-linear evaluation,
    /// extended linearly beyond the last point.
    Tabulated { s: Vec<f64>, mu: Vec<f64> },
}

impl MuSpec {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            MuSpec::Monod { m, ks } => m * s / (ks + s),
            MuSpec::Tabulated { s: xs, mu } => {
                if s <= xs[0] {
                    return mu[0];
                }
                let last = xs.len() - 1;
                if s >= xs[last] {
                    let slope = (mu[last] - mu[last - 1]) / (xs[last] - xs[last - 1]);
                    return mu[last] + slope * (s - xs[last]);
                }
                let j = xs.partition_point(|&v| v <= s) - 1;
                let theta = (s - xs[j]) / (xs[j + 1] - xs[j]);
                mu[j] + theta * (mu[j + 1] - mu[j])
            }
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            MuSpec::Monod { m, ks } => m * ks / ((ks + s) * (ks + s)),
            MuSpec::Tabulated { .. } => {
                let delta = 1e-6 * (1.0 + s.abs());
                let lo = (s - delta).max(0.0);
                (self.eval(s + delta) - self.eval(lo)) / (s + delta - lo)
            }
        }
    }
}

/// Model data for the delayed chemostat.
pub struct ChemostatModel {
    omega: f64,
    tau: f64,
    gamma: f64,
    dilution: PeriodicSignal,
    inflow: PeriodicSignal,
    mu: MuSpec,
    steps_per_period: usize,
    history_grid: UniformGrid,
}

impl ChemostatModel {
    pub fn new(
        omega: f64,
        tau: f64,
        gamma: f64,
        dilution: PeriodicSignal,
        inflow: PeriodicSignal,
        mu: MuSpec,
    ) -> Result<Self, ChemostatError> {
        Self::with_resolution(
            omega,
            tau,
            gamma,
            dilution,
            inflow,
            mu,
            DEFAULT_STEPS_PER_PERIOD,
            DEFAULT_HISTORY_NODES,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_resolution(
        omega: f64,
        tau: f64,
        gamma: f64,
        dilution: PeriodicSignal,
        inflow: PeriodicSignal,
        mu: MuSpec,
        steps_per_period: usize,
        history_nodes: usize,
    ) -> Result<Self, ChemostatError> {
        let invalid = |detail: String| Err(ChemostatError::InvalidModel { detail });
        if !(omega > 0.0) {
            return invalid(format!("period must be positive, got {omega}"));
        }
        if !(tau > 0.0 && tau < omega) {
            return invalid(format!("delay must satisfy 0 < tau < omega, got tau = {tau}"));
        }
        if !(gamma > 0.0) {
            return invalid(format!("yield must be positive, got {gamma}"));
        }
        for (name, sig) in [("dilution", &dilution), ("inflow", &inflow)] {
            if (sig.period() - omega).abs() > 1e-12 * omega || sig.dim() != 1 {
                return invalid(format!("{name} signal must be scalar with period {omega}"));
            }
            if sig.min_sample(0) <= 0.0 {
                return invalid(format!("{name} signal must be positive"));
            }
        }
        if mu.eval(0.0).abs() > 1e-12 {
            return invalid("growth law must vanish at zero".into());
        }
        let probe_max = 2.0 * inflow.sup_norm() + 1.0;
        let mut prev = 0.0;
        for k in 1..=1000 {
            let s = probe_max * k as f64 / 1000.0;
            let m = mu.eval(s);
            if m <= prev {
                return invalid(format!("growth law is not strictly increasing near s = {s}"));
            }
            prev = m;
        }
        let step = omega / steps_per_period as f64;
        if tau < step {
            return invalid(format!(
                "delay {tau} is below the integrator step {step}; increase steps_per_period"
            ));
        }
        let history_grid = UniformGrid::new(-tau, 0.0, history_nodes.max(5))?;
        Ok(Self { omega, tau, gamma, dilution, inflow, mu, steps_per_period, history_grid })
    }

    /// Same model at a different integrator resolution (for step-halving
    /// comparisons).
    pub fn with_steps_per_period(&self, steps: usize) -> Result<Self, ChemostatError> {
        Self::with_resolution(
            self.omega,
            self.tau,
            self.gamma,
            self.dilution.clone(),
            self.inflow.clone(),
            self.mu.clone(),
            steps,
            self.history_grid.n_nodes(),
        )
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dilution(&self) -> &PeriodicSignal {
        &self.dilution
    }

    pub fn inflow(&self) -> &PeriodicSignal {
        &self.inflow
    }

    pub fn mu(&self) -> &MuSpec {
        &self.mu
    }

    pub fn step(&self) -> f64 {
        self.omega / self.steps_per_period as f64
    }

    pub fn history_grid(&self) -> UniformGrid {
        self.history_grid
    }

    /// Sample a history function from pointwise values.
    pub fn history_from_fn(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn::from_scalar_fn(self.history_grid, f)
    }

    /// Membership check for the admissible cone 0 <= phi <= phi*.
    pub fn is_admissible(&self, phi: &GridFn, phi_star: &GridFn, slack: f64) -> bool {
        phi.values()
            .iter()
            .zip(phi_star.values())
            .all(|(&v, &cap)| v >= -slack && v <= cap + slack)
    }
}

/// Unique positive ω-periodic solution of v' = D (s0 - v).
pub fn compute_vstar(model: &ChemostatModel) -> Result<PeriodicSignal, ChemostatError> {
    let forcing = model.dilution.zip_map(&model.inflow, |d, s| d * s);
    Ok(solve_periodic_first_order(&model.dilution, &forcing)?)
}

/// The trivial-solution history φ* = v* restricted to [-τ, 0].
pub fn phi_star(model: &ChemostatModel) -> Result<GridFn, ChemostatError> {
    let vstar = compute_vstar(model)?;
    Ok(model.history_from_fn(|t| vstar.eval_comp(t, 0)))
}

/// Dense trajectory of (s, x) on [-τ, t_end].
#[derive(Debug, Clone)]
pub struct Trajectory {
    step: f64,
    history: GridFn,
    states: Vec<[f64; 2]>,
    derivs: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_end(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.step
    }

    pub fn history(&self) -> &GridFn {
        &self.history
    }

    pub fn n_nodes(&self) -> usize {
        self.states.len()
    }

    pub fn node_time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn state(&self, k: usize) -> [f64; 2] {
        self.states[k]
    }

    pub fn deriv(&self, k: usize) -> [f64; 2] {
        self.derivs[k]
    }

    fn eval_component(&self, t: f64, comp: usize) -> f64 {
        let raw = t / self.step;
        let near = raw.round();
        if (raw - near).abs() <= 1e-9 && near >= 0.0 && (near as usize) < self.states.len() {
            return self.states[near as usize][comp];
        }
        let j = (raw.floor().max(0.0) as usize).min(self.states.len() - 2);
        let theta = raw - j as f64;
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.states[j][comp]
            + h10 * self.step * self.derivs[j][comp]
            + h01 * self.states[j + 1][comp]
            + h11 * self.step * self.derivs[j + 1][comp]
    }

    /// Substrate value; history evaluation for t <= 0.
    pub fn eval_s(&self, t: f64) -> f64 {
        if t <= 0.0 {
            self.history.eval_comp(t, 0)
        } else {
            self.eval_component(t, 0)
        }
    }

    /// Biomass value for t >= 0.
    pub fn eval_x(&self, t: f64) -> f64 {
        self.eval_component(t.max(0.0), 1)
    }

    /// Mean of μ(s) over [0, t_end] by Hermite-corrected quadrature on the
    /// integration grid.
    pub fn mean_mu_s(&self, mu: &MuSpec) -> f64 {
        let n = self.states.len();
        let mut total = 0.0;
        for k in 0..n - 1 {
            let y0 = mu.eval(self.states[k][0]);
            let y1 = mu.eval(self.states[k + 1][0]);
            let d0 = mu.deriv(self.states[k][0]) * self.derivs[k][0];
            let d1 = mu.deriv(self.states[k + 1][0]) * self.derivs[k + 1][0];
            total += hermite_segment_integral(y0, y1, d0, d1, self.step);
        }
        total / self.t_end()
    }
}

/// Method-of-steps RK4 integration from history `phi` and biomass `x0`.
///
/// The delayed term reads the stored dense output (or the initial history),
/// which is always complete up to the stage time because the step never
/// exceeds τ. Integration runs to the smallest step multiple at or above
/// `t_end`. Positivity is monitored, never clamped.
pub fn integrate_dde(
    model: &ChemostatModel,
    phi: &GridFn,
    x0: f64,
    t_end: f64,
) -> Result<Trajectory, ChemostatError> {
    if x0 < 0.0 {
        return Err(ChemostatError::InvalidModel { detail: format!("x0 must be >= 0, got {x0}") });
    }
    let h = model.step();
    let n_steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let mut states: Vec<[f64; 2]> = Vec::with_capacity(n_steps + 1);
    let mut derivs: Vec<[f64; 2]> = Vec::with_capacity(n_steps + 1);

    let delayed = |states: &[[f64; 2]], derivs: &[[f64; 2]], t: f64| -> f64 {
        if t <= 0.0 {
            phi.eval_comp(t, 0)
        } else {
            let raw = t / h;
            let j = (raw.floor() as usize).min(states.len().saturating_sub(2));
            let theta = raw - j as f64;
            let t2 = theta * theta;
            let t3 = t2 * theta;
            (2.0 * t3 - 3.0 * t2 + 1.0) * states[j][0]
                + (t3 - 2.0 * t2 + theta) * h * derivs[j][0]
                + (-2.0 * t3 + 3.0 * t2) * states[j + 1][0]
                + (t3 - t2) * h * derivs[j + 1][0]
        }
    };

    let rhs = |states: &[[f64; 2]], derivs: &[[f64; 2]], t: f64, s: f64, x: f64| -> [f64; 2] {
        let d = model.dilution.eval_comp(t, 0);
        let s_in = model.inflow.eval_comp(t, 0);
        let s_del = delayed(states, derivs, t - model.tau);
        [d * (s_in - s) - model.mu.eval(s) * x / model.gamma, x * (model.mu.eval(s_del) - d)]
    };

    let s0 = phi.eval_comp(0.0, 0);
    states.push([s0, x0]);
    let d0 = rhs(&states, &derivs, 0.0, s0, x0);
    derivs.push(d0);

    for k in 0..n_steps {
        let t = k as f64 * h;
        let [s, x] = states[k];
        let k1 = derivs[k];
        let k2 = rhs(&states, &derivs, t + 0.5 * h, s + 0.5 * h * k1[0], x + 0.5 * h * k1[1]);
        let k3 = rhs(&states, &derivs, t + 0.5 * h, s + 0.5 * h * k2[0], x + 0.5 * h * k2[1]);
        let k4 = rhs(&states, &derivs, t + h, s + h * k3[0], x + h * k3[1]);
        let s_next = s + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        let x_next = x + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        let t_next = t + h;
        if !s_next.is_finite() || !x_next.is_finite() {
            return Err(ChemostatError::NonFiniteState { t: t_next });
        }
        if s_next < 0.0 || x_next < 0.0 {
            return Err(ChemostatError::PositivityViolation { t: t_next, s: s_next, x: x_next });
        }
        states.push([s_next, x_next]);
        let d_next = rhs(&states, &derivs, t_next, s_next, x_next);
        derivs.push(d_next);
    }
    Ok(Trajectory { step: h, history: phi.clone(), states, derivs })
}

/// One application of the Poincaré map: the substrate history shifted by one
/// period (sampled on the model history grid) and the terminal biomass.
pub fn poincare_map(
    model: &ChemostatModel,
    phi: &GridFn,
    x0: f64,
) -> Result<(GridFn, f64), ChemostatError> {
    let traj = integrate_dde(model, phi, x0, model.omega)?;
    let omega = model.omega;
    let shifted = model.history_from_fn(|t| traj.eval_s(omega + t));
    let x_end = traj.state(traj.n_nodes() - 1)[1];
    Ok((shifted, x_end))
}

/// The history-coordinate Poincaré map at fixed biomass, wrapped as an
/// operator family (the continuation parameter is ignored).
pub struct InnerHistoryFamily<'a> {
    model: &'a ChemostatModel,
    x0: f64,
    radius: f64,
}

impl<'a> InnerHistoryFamily<'a> {
    pub fn new(model: &'a ChemostatModel, x0: f64) -> Result<Self, ChemostatError> {
        let vstar = compute_vstar(model)?;
        Ok(Self { model, x0, radius: vstar.sup_norm() })
    }
}

impl OperatorFamily for InnerHistoryFamily<'_> {
    fn evaluate(&self, _params: &[f64], state: &GridFn) -> Result<GridFn, SolverError> {
        poincare_map(self.model, state, self.x0)
            .map(|(phi, _)| phi)
            .map_err(|e| SolverError::Operator(e.to_string()))
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn state_grid(&self) -> UniformGrid {
        self.model.history_grid()
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn radius(&self) -> f64 {
        self.radius
    }
}

/// Converged inner fixed point of the history map at biomass x0.
#[derive(Debug, Clone)]
pub struct InnerFixedPoint {
    pub phi: GridFn,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Picard iteration on φ -> P¹(φ, x0) started from φ*.
pub fn inner_fixed_point(
    model: &ChemostatModel,
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InnerFixedPoint, ChemostatError> {
    let start = phi_star(model)?;
    inner_fixed_point_from(model, x0, &start, tol, max_iter)
}

/// [`inner_fixed_point`] from an explicit starting history.
pub fn inner_fixed_point_from(
    model: &ChemostatModel,
    x0: f64,
    start: &GridFn,
    tol: f64,
    max_iter: usize,
) -> Result<InnerFixedPoint, ChemostatError> {
    let family = InnerHistoryFamily::new(model, x0)?;
    let opts = SolveOptions { tol, picard_max_iter: max_iter, ..Default::default() };
    let report = picard_solve(&family, &[0.0], start, &opts)?;
    if !report.converged {
        return Err(ChemostatError::NoConvergence { best_residual: report.residual });
    }
    Ok(InnerFixedPoint {
        phi: report.solution,
        residual: report.residual,
        iterations: report.iterations,
    })
}

/// Growth-balance functional: mean μ(s) - mean D over one period from the
/// initial pair (φ, x0).
pub fn phi_functional(
    model: &ChemostatModel,
    x0: f64,
    phi: &GridFn,
) -> Result<f64, ChemostatError> {
    let traj = integrate_dde(model, phi, x0, model.omega)?;
    Ok(traj.mean_mu_s(&model.mu) - model.dilution.mean()[0])
}

/// mean μ(v*) - mean D: positive exactly when a positive periodic orbit
/// exists.
pub fn existence_margin(model: &ChemostatModel) -> Result<f64, ChemostatError> {
    let vstar = compute_vstar(model)?;
    let n = vstar.n_samples();
    let mean_mu = (0..n).map(|k| model.mu.eval(vstar.sample(k, 0))).sum::<f64>() / n as f64;
    Ok(mean_mu - model.dilution.mean()[0])
}

/// Certificate that the necessary existence condition fails.
#[derive(Debug, Clone, Copy)]
pub struct NonexistenceCertificate {
    /// mean μ(v*) - mean D (non-positive).
    pub margin: f64,
    pub mean_dilution: f64,
    pub mean_mu_vstar: f64,
}

/// A verified positive periodic orbit.
#[derive(Debug)]
pub struct PeriodicOrbit {
    pub x0: f64,
    pub history: GridFn,
    pub trajectory: Trajectory,
    /// max(sup |P¹(φ, x0) - φ|, |x(ω) - x0|).
    pub poincare_residual: f64,
    /// |ln x(ω) - ln x0 - ω Φ|.
    pub log_identity_gap: f64,
    pub phi_value: f64,
    pub existence_margin: f64,
}

/// Outcome of the orbit search: a verified orbit, or a certificate that the
/// necessary condition fails.
#[derive(Debug)]
pub enum OrbitOutcome {
    Orbit(Box<PeriodicOrbit>),
    Nonexistence(NonexistenceCertificate),
}

/// Locate a positive periodic orbit by a geometric scan of x0 followed by
/// bisection on the growth-balance functional along the inner fixed points,
/// then verify the Poincaré residual, the logarithmic identity and the
/// trajectory bounds.
///
/// A nonexistence certificate is issued only from the margin test. A scan
/// that exhausts `x0_max` without a sign change is reported as a numerical
/// failure instead, because the sign change is guaranteed once the margin
/// is positive.
pub fn find_periodic_orbit(
    model: &ChemostatModel,
    x0_max: f64,
    tol: f64,
) -> Result<OrbitOutcome, ChemostatError> {
    let margin = existence_margin(model)?;
    if margin <= 0.0 {
        let vstar = compute_vstar(model)?;
        let n = vstar.n_samples();
        let mean_mu =
            (0..n).map(|k| model.mu.eval(vstar.sample(k, 0))).sum::<f64>() / n as f64;
        return Ok(OrbitOutcome::Nonexistence(NonexistenceCertificate {
            margin,
            mean_dilution: model.dilution.mean()[0],
            mean_mu_vstar: mean_mu,
        }));
    }

    let mean_d = model.dilution.mean()[0];
    let mean_ds0 = model.dilution.zip_map(&model.inflow, |d, s| d * s).mean()[0];
    let x_init = model.gamma * mean_ds0 / mean_d;

    // geometric scan until the functional turns negative
    let mut lo = 0.0f64;
    let mut warm = phi_star(model)?;
    let mut x_probe = x_init;
    let mut hi;
    let mut best: (f64, InnerFixedPoint, f64);
    loop {
        if x_probe > x0_max {
            return Err(ChemostatError::ScanExhausted { x0_max, phi: margin });
        }
        let fp = inner_fixed_point_from(model, x_probe, &warm, INNER_TOL, INNER_MAX_ITER)?;
        let value = phi_functional(model, x_probe, &fp.phi)?;
        warm = fp.phi.clone();
        if value < 0.0 {
            hi = x_probe;
            best = (x_probe, fp, value);
            break;
        }
        lo = x_probe;
        x_probe *= 2.0;
    }

    // bisection on x0 against the functional sign
    for _ in 0..200 {
        if best.2.abs() <= tol || (hi - lo) < 1e-15 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fp = inner_fixed_point_from(model, mid, &warm, INNER_TOL, INNER_MAX_ITER)?;
        let value = phi_functional(model, mid, &fp.phi)?;
        warm = fp.phi.clone();
        if value.abs() < best.2.abs() {
            best = (mid, fp, value);
        }
        if value < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (x0_star, fp, phi_value) = best;
    if phi_value.abs() > tol {
        return Err(ChemostatError::VerificationFailed {
            detail: format!("bisection stalled with |Phi| = {:.3e}", phi_value.abs()),
        });
    }

    // verification on the final trajectory
    let traj = integrate_dde(model, &fp.phi, x0_star, model.omega)?;
    let omega = model.omega;
    let shifted = model.history_from_fn(|t| traj.eval_s(omega + t));
    let x_end = traj.state(traj.n_nodes() - 1)[1];
    let poincare_residual = fp.phi.sup_dist(&shifted).max((x_end - x0_star).abs());
    if poincare_residual > POINCARE_RESIDUAL_BOUND {
        return Err(ChemostatError::VerificationFailed {
            detail: format!("Poincare residual {poincare_residual:.3e}"),
        });
    }
    let phi_check = traj.mean_mu_s(&model.mu) - mean_d;
    let log_identity_gap = ((x_end.ln() - x0_star.ln()) - omega * phi_check).abs();
    if log_identity_gap > LOG_IDENTITY_BOUND {
        return Err(ChemostatError::VerificationFailed {
            detail: format!("log identity gap {log_identity_gap:.3e}"),
        });
    }
    let vstar = compute_vstar(model)?;
    let x_floor = (-omega * mean_d).exp() * x0_star;
    for k in 0..traj.n_nodes() {
        let t = traj.node_time(k);
        let [s, x] = traj.state(k);
        if !(s > 0.0) || !(s < vstar.eval_comp(t, 0)) {
            return Err(ChemostatError::VerificationFailed {
                detail: format!("substrate bound violated at t = {t:.6}: s = {s:.6e}"),
            });
        }
        if !(x > x_floor) {
            return Err(ChemostatError::VerificationFailed {
                detail: format!("biomass bound violated at t = {t:.6}: x = {x:.6e}"),
            });
        }
    }

    Ok(OrbitOutcome::Orbit(Box::new(PeriodicOrbit {
        x0: x0_star,
        history: fp.phi,
        trajectory: traj,
        poincare_residual,
        log_identity_gap,
        phi_value,
        existence_margin: margin,
    })))
}
