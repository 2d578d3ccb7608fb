//! Per-command runners: build the problem from the config, run the solver,
//! write outputs and map outcomes to exit codes.

use crate::config::{
    CheckConfig, ChemostatConfig, ConfigError, DemoConfig, GClassSpec, GrowthSpec, NonlocalConfig,
    ResonanceConfig, RunConfig,
};
use crate::functions::{build_signal, mu_spec, planar_function, scalar_function, scalar_sup};
use crate::output::{self, ResultDoc, SampledFunction};
use contbvp_core::chemostat::{
    existence_margin, find_periodic_orbit, ChemostatModel, OrbitOutcome,
};
use contbvp_core::continuation::{poincare_miranda_solve, Rect, TraceOptions};
use contbvp_core::grid::PeriodicSignal;
use contbvp_core::nonlocal::{
    choose_bracket, solve_nonlocal_planar, solve_nonlocal_traced, GrowthClass, NonlocalProblem,
};
use contbvp_core::resonance::{
    check_wirtinger, compute_range, hausdorff_distance, interval_samples, solve_for_s_traced,
    GClass, ResonantProblem, SolveOutcome, DEFAULT_LL_WINDOW_SCALE,
};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_NO_SOLUTION: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub out: PathBuf,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub jobs: usize,
}

impl CommonOpts {
    fn trace_options(&self) -> TraceOptions {
        TraceOptions::with_tol(self.tol.unwrap_or(1e-12))
    }

    fn bvp_nodes(&self) -> Result<usize, ConfigError> {
        match self.grid {
            None => Ok(401),
            Some(n) if n >= 5 && n % 2 == 1 => Ok(n),
            Some(n) => Err(ConfigError::Invalid(format!(
                "--grid must be odd and at least 5 (the mesh must contain the midpoint), got {n}"
            ))),
        }
    }
}

const SIGNAL_SAMPLES: usize = 256;

fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    opt.as_ref()
        .ok_or_else(|| ConfigError::Invalid(format!("config is missing the [{name}] section")))
}

fn build_nonlocal_scalar(
    cfg: &NonlocalConfig,
    nodes: usize,
) -> Result<NonlocalProblem, CliError> {
    let f_u = cfg.f.as_ref().map(scalar_function).transpose()?;
    let f_t = cfg.f_t.clone();
    let growth = match &cfg.growth {
        GrowthSpec::Sublinear => GrowthClass::Sublinear,
        GrowthSpec::Superlinear => GrowthClass::Superlinear,
        GrowthSpec::UserBracket { a, b } => GrowthClass::UserBracket { a: *a, b: *b },
        GrowthSpec::Planar { .. } => {
            return Err(ConfigError::Invalid(
                "planar growth requires dim = 2; use the planar solve path".into(),
            )
            .into())
        }
    };
    let g = scalar_function(&cfg.g)?;
    let f = move |t: f64, u: f64| -> f64 {
        let from_u = f_u.as_ref().map_or(0.0, |f| f(u));
        let from_t = f_t
            .as_ref()
            .map_or(0.0, |c| c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck));
        from_u + from_t
    };
    NonlocalProblem::scalar(cfg.half_length, nodes, f, move |u| g(u), cfg.f_sup, growth)
        .map_err(numerical)
}

pub fn run_solve_nonlocal(
    config: &RunConfig,
    opts: &CommonOpts,
) -> Result<i32, CliError> {
    let cfg = section(&config.nonlocal, "nonlocal")?;
    let nodes = opts.bvp_nodes()?;
    let trace = opts.trace_options();
    if cfg.dim == 2 {
        return run_solve_nonlocal_planar(cfg, nodes, &trace, opts);
    }

    let prob = build_nonlocal_scalar(cfg, nodes)?;
    let bracket = choose_bracket(&prob).map_err(numerical)?;
    let run = solve_nonlocal_traced(&prob, bracket, cfg.steps, &trace).map_err(numerical)?;

    let mut doc = ResultDoc::new("solve nonlocal", "solved", EXIT_OK);
    doc.nonlocal = Some(output::NonlocalDoc {
        bracket: [bracket.0, bracket.1],
        ball_radius: prob.radius(),
        solutions: run
            .solutions
            .iter()
            .map(|s| output::NonlocalSolutionDoc {
                c_star: s.c_star,
                residual_ode: s.residual_ode,
                residual_bc: s.residual_bc,
                residual_ode_ok: s.residual_ode <= contbvp_core::nonlocal::ODE_RESIDUAL_BOUND,
                residual_bc_ok: s.residual_bc <= contbvp_core::nonlocal::BC_RESIDUAL_BOUND,
                u: SampledFunction::from_grid_fn(&s.u, 0),
            })
            .collect(),
    });
    output::write_result(&opts.out, &doc)?;
    output::write_branch_csv(&opts.out, &run.branch)?;
    Ok(EXIT_OK)
}

fn run_solve_nonlocal_planar(
    cfg: &NonlocalConfig,
    nodes: usize,
    trace: &TraceOptions,
    opts: &CommonOpts,
) -> Result<i32, CliError> {
    let rect = match &cfg.growth {
        GrowthSpec::Planar { rect } => Rect {
            x: (rect.x[0], rect.x[1]),
            y: (rect.y[0], rect.y[1]),
        },
        _ => {
            return Err(ConfigError::Invalid(
                "dim = 2 requires growth = { class = \"planar\", rect = ... }".into(),
            )
            .into())
        }
    };
    let g = planar_function(&cfg.g)?;
    let f_const = cfg.f_const.unwrap_or([0.0, 0.0]);
    let f: contbvp_core::nonlocal::Field = Arc::new(move |_, _, out| {
        out[0] = f_const[0];
        out[1] = f_const[1];
    });
    let f_sup = cfg
        .f_sup
        .unwrap_or_else(|| (f_const[0] * f_const[0] + f_const[1] * f_const[1]).sqrt());
    let prob = NonlocalProblem::planar(cfg.half_length, nodes, f, g, Some(f_sup), rect)
        .map_err(numerical)?;
    let sol = solve_nonlocal_planar(&prob, cfg.multistart, trace).map_err(numerical)?;

    let mut doc = ResultDoc::new("solve nonlocal", "solved", EXIT_OK);
    doc.planar = Some(output::PlanarDoc {
        boundary_value: sol.boundary_value,
        winding: sol.winding,
        hypothesis_margin: sol.hypothesis_margin,
        starts_tried: sol.starts_tried,
        residual_ode: sol.residual_ode,
        residual_bc: sol.residual_bc,
        u1: SampledFunction::from_grid_fn(&sol.u, 0),
        u2: SampledFunction::from_grid_fn(&sol.u, 1),
    });
    output::write_result(&opts.out, &doc)?;
    Ok(EXIT_OK)
}

fn build_resonance(
    cfg: &ResonanceConfig,
    nodes: usize,
) -> Result<(ResonantProblem, Option<(f64, f64)>), CliError> {
    let g = scalar_function(&cfg.g)?;
    let g_class = match &cfg.g_class {
        GClassSpec::Periodic { sigma } => GClass::Periodic { sigma: vec![*sigma] },
        GClassSpec::LandesmanLazer { g_minus, g_plus, window_scale } => GClass::LandesmanLazer {
            g_minus: *g_minus,
            g_plus: *g_plus,
            window_scale: window_scale.unwrap_or(DEFAULT_LL_WINDOW_SCALE),
        },
        GClassSpec::Generic { .. } => GClass::GenericBounded,
    };
    let window = match &cfg.g_class {
        GClassSpec::Generic { window } => Some((window[0], window[1])),
        _ => None,
    };
    let p0 = build_signal(&cfg.p0, cfg.omega, SIGNAL_SAMPLES)?;
    let prob = ResonantProblem::scalar(
        cfg.omega,
        cfg.a,
        move |u| g(u),
        cfg.g_sup,
        g_class,
        p0,
        nodes,
    )
    .map_err(numerical)?;
    Ok((prob, window))
}

pub fn run_solve_resonance(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = section(&config.resonance, "resonance")?;
    let s = cfg
        .s
        .ok_or_else(|| ConfigError::Invalid("solve resonance needs `s` in [resonance]".into()))?;
    let nodes = opts.bvp_nodes()?;
    let (prob, window) = build_resonance(cfg, nodes)?;
    let window = match window {
        Some(w) => w,
        None => match prob.g_class() {
            GClass::Periodic { sigma } => (0.0, sigma[0]),
            GClass::LandesmanLazer { window_scale, .. } => {
                let half = prob.radius() + window_scale;
                (-half, half)
            }
            GClass::GenericBounded => unreachable!("generic class always carries a window"),
        },
    };
    let traced =
        solve_for_s_traced(&prob, s, window, cfg.steps, &opts.trace_options()).map_err(numerical)?;
    match traced.outcome {
        SolveOutcome::Solved(sol) => {
            let mut doc = ResultDoc::new("solve resonance", "solved", EXIT_OK);
            doc.resonance = Some(output::ResonanceDoc {
                s,
                c_star: sol.c_star,
                mean_g: sol.mean_g,
                residual_ode: sol.residual_ode,
                closure_gap: sol.closure_gap,
                residual_ok: sol.residual_ode <= contbvp_core::resonance::ODE_RESIDUAL_BOUND
                    && sol.closure_gap <= contbvp_core::resonance::CLOSURE_BOUND,
                u: SampledFunction::from_grid_fn(&sol.u, 0),
            });
            output::write_result(&opts.out, &doc)?;
            output::write_branch_csv(&opts.out, &traced.branch)?;
            Ok(EXIT_OK)
        }
        SolveOutcome::NoSignChange { necessary, .. } => {
            // a verified Landesman-Lazer exterior is a certified no-solution
            // outcome; anything else is a numerical failure of the scan
            let certified = necessary.as_ref().is_some_and(|r| r.outside);
            let (status, code) = if certified {
                ("no-solution", EXIT_NO_SOLUTION)
            } else {
                ("numerical-failure", EXIT_NUMERICAL)
            };
            let mut doc = ResultDoc::new("solve resonance", status, code);
            if let Some(rep) = necessary {
                doc.error = Some(format!(
                    "s = {} lies outside the admissible interval ({}, {})",
                    rep.s, rep.g_minus, rep.g_plus
                ));
            } else {
                doc.error = Some("no sign change found over the scanned window".into());
            }
            output::write_result(&opts.out, &doc)?;
            output::write_branch_csv(&opts.out, &traced.branch)?;
            Ok(code)
        }
    }
}

pub fn run_range_resonance(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = section(&config.resonance, "resonance")?;
    let nodes = opts.bvp_nodes()?;
    let (prob, window) = build_resonance(cfg, nodes)?;
    let est =
        compute_range(&prob, window, cfg.steps, &opts.trace_options()).map_err(numerical)?;
    let mut doc = ResultDoc::new("range resonance", "range", EXIT_OK);
    doc.range = Some(output::RangeDoc {
        lo: est.lo,
        hi: est.hi,
        width: est.width(),
        tol: est.tol,
        window: [est.window.0, est.window.1],
        window_relative: est.window_relative,
        inside_sup_bound: est.lo >= -prob.g_sup() - 1e-9 && est.hi <= prob.g_sup() + 1e-9,
    });
    output::write_result(&opts.out, &doc)?;
    output::write_range_csv(&opts.out, &est.samples)?;
    Ok(EXIT_OK)
}

pub fn run_scan_degeneracy(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = section(&config.resonance, "resonance")?;
    let nodes = opts.bvp_nodes()?;
    let threshold = cfg.degeneracy_tol.unwrap_or(1e-6);
    let (prob, window) = build_resonance(cfg, nodes)?;
    let est =
        compute_range(&prob, window, cfg.steps, &opts.trace_options()).map_err(numerical)?;
    let mut doc = ResultDoc::new("scan degeneracy", "report", EXIT_OK);
    doc.degeneracy = Some(output::DegeneracyDoc {
        lo: est.lo,
        hi: est.hi,
        width: est.width(),
        threshold,
        width_within_threshold: est.width() <= threshold,
        asserts_degeneracy: false,
    });
    output::write_result(&opts.out, &doc)?;
    output::write_range_csv(&opts.out, &est.samples)?;
    Ok(EXIT_OK)
}

pub fn run_experiment_continuity(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = section(&config.resonance, "resonance")?;
    if cfg.perturbation.is_empty() || cfg.amplitudes.is_empty() {
        return Err(ConfigError::Invalid(
            "experiment continuity needs `perturbation` and `amplitudes` in [resonance]".into(),
        )
        .into());
    }
    let nodes = opts.bvp_nodes()?;
    let trace = opts.trace_options();
    let (prob, window) = build_resonance(cfg, nodes)?;
    if window.is_some() {
        return Err(ConfigError::Invalid(
            "continuity experiments need a periodic or landesman-lazer class".into(),
        )
        .into());
    }
    let pert = build_signal(&cfg.perturbation, cfg.omega, SIGNAL_SAMPLES)?;

    let base = compute_range(&prob, None, cfg.steps, &trace).map_err(numerical)?;
    let base_samples = interval_samples(base.lo, base.hi, 101);
    let n = prob.p0().n_samples();
    let pert_vals: Vec<f64> =
        (0..n).map(|k| pert.eval_comp(prob.p0().sample_time(k), 0)).collect();
    let pert_mean = pert_vals.iter().sum::<f64>() / n as f64;

    let one_amplitude = |amp: f64| -> Result<f64, CliError> {
        let samples: Vec<f64> = (0..n)
            .map(|k| prob.p0().sample(k, 0) + amp * (pert_vals[k] - pert_mean))
            .collect();
        let signal = PeriodicSignal::new(prob.omega(), 1, samples).map_err(numerical)?;
        let perturbed = prob.with_p0(signal).map_err(numerical)?;
        let range = compute_range(&perturbed, None, cfg.steps, &trace).map_err(numerical)?;
        hausdorff_distance(&interval_samples(range.lo, range.hi, 101), &base_samples)
            .map_err(numerical)
    };

    let jobs = opts.jobs.max(1);
    let distances: Vec<Result<f64, CliError>> = if jobs <= 1 {
        cfg.amplitudes.iter().map(|&a| one_amplitude(a)).collect()
    } else {
        // embarrassingly parallel over amplitudes; results keep input order
        let mut slots: Vec<Option<Result<f64, CliError>>> =
            (0..cfg.amplitudes.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (chunk_idx, chunk) in slots.chunks_mut(jobs.min(cfg.amplitudes.len())).enumerate() {
                let amplitudes = &cfg.amplitudes;
                let one = &one_amplitude;
                let base = chunk_idx * jobs.min(amplitudes.len());
                scope.spawn(move || {
                    for (off, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(one(amplitudes[base + off]));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("all slots filled")).collect()
    };

    let mut table = Vec::with_capacity(distances.len());
    for (amp, dist) in cfg.amplitudes.iter().zip(distances) {
        table.push(output::ContinuityRow { amplitude: *amp, hausdorff_distance: dist? });
    }
    let mut doc = ResultDoc::new("experiment continuity", "report", EXIT_OK);
    doc.continuity =
        Some(output::ContinuityDoc { base_lo: base.lo, base_hi: base.hi, table });
    output::write_result(&opts.out, &doc)?;
    output::write_range_csv(&opts.out, &base.samples)?;
    Ok(EXIT_OK)
}

fn build_chemostat(cfg: &ChemostatConfig) -> Result<ChemostatModel, CliError> {
    let dilution = build_signal(&cfg.dilution, cfg.omega, SIGNAL_SAMPLES)?;
    let inflow = build_signal(&cfg.inflow, cfg.omega, SIGNAL_SAMPLES)?;
    let mu = mu_spec(&cfg.mu)?;
    let model = ChemostatModel::new(cfg.omega, cfg.tau, cfg.gamma, dilution, inflow, mu)
        .map_err(numerical)?;
    match cfg.steps_per_period {
        Some(steps) => model.with_steps_per_period(steps).map_err(numerical),
        None => Ok(model),
    }
}

pub fn run_solve_chemostat(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = section(&config.chemostat, "chemostat")?;
    let model = build_chemostat(cfg)?;
    let tol = opts.tol.unwrap_or(contbvp_core::chemostat::ORBIT_TOL);
    match find_periodic_orbit(&model, cfg.x0_max, tol).map_err(numerical)? {
        OrbitOutcome::Orbit(orbit) => {
            let mut doc = ResultDoc::new("solve chemostat", "solved", EXIT_OK);
            doc.chemostat = Some(output::ChemostatDoc {
                x0: orbit.x0,
                existence_margin: orbit.existence_margin,
                poincare_residual: orbit.poincare_residual,
                log_identity_gap: orbit.log_identity_gap,
                phi_value: orbit.phi_value,
                poincare_residual_ok: orbit.poincare_residual
                    <= contbvp_core::chemostat::POINCARE_RESIDUAL_BOUND,
                log_identity_ok: orbit.log_identity_gap
                    <= contbvp_core::chemostat::LOG_IDENTITY_BOUND,
                trajectory_bounds_ok: true,
                history: SampledFunction::from_grid_fn(&orbit.history, 0),
            });
            output::write_result(&opts.out, &doc)?;
            output::write_trajectory_csv(&opts.out, &orbit.trajectory)?;
            Ok(EXIT_OK)
        }
        OrbitOutcome::Nonexistence(cert) => {
            let mut doc =
                ResultDoc::new("solve chemostat", "nonexistence", EXIT_NO_SOLUTION);
            doc.certificate = Some(output::CertificateDoc {
                kind: "necessary-condition-violation".into(),
                margin: cert.margin,
                mean_dilution: cert.mean_dilution,
                mean_mu_vstar: cert.mean_mu_vstar,
            });
            output::write_result(&opts.out, &doc)?;
            Ok(EXIT_NO_SOLUTION)
        }
    }
}

pub fn run_demo_poincare_miranda(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg: &DemoConfig = section(&config.demo, "demo")?;
    let phi1 = cfg.phi1;
    let phi2 = cfg.phi2;
    let phi = move |t: f64, x: f64| [phi1.eval(t, x), phi2.eval(t, x)];
    let (t_star, x_star) = poincare_miranda_solve(&phi, cfg.bound, cfg.steps).map_err(numerical)?;
    let mut doc = ResultDoc::new("demo poincare-miranda", "solved", EXIT_OK);
    doc.demo = Some(output::DemoDoc { t_star, x_star, phi_at_root: phi(t_star, x_star) });
    output::write_result(&opts.out, &doc)?;
    Ok(EXIT_OK)
}

pub fn run_check_condition(config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    let check = section(&config.check, "check")?;
    let doc_body = match check {
        CheckConfig::Wirtinger { box_radius, samples } => {
            let cfg = section(&config.resonance, "resonance")?;
            let (prob, _) = build_resonance(cfg, opts.bvp_nodes()?)?;
            let report = check_wirtinger(&prob, *box_radius, *samples);
            output::CheckDoc {
                kind: "wirtinger".into(),
                holds: report.holds,
                sup_quotient: Some(report.sup_quotient),
                bound: Some(report.bound),
                margin: None,
                limit_deviation: None,
            }
        }
        CheckConfig::NecSuf => {
            let cfg = section(&config.chemostat, "chemostat")?;
            let model = build_chemostat(cfg)?;
            let margin = existence_margin(&model).map_err(numerical)?;
            output::CheckDoc {
                kind: "nec-suf".into(),
                holds: margin > 0.0,
                sup_quotient: None,
                bound: None,
                margin: Some(margin),
                limit_deviation: None,
            }
        }
        CheckConfig::LlLimits => {
            let cfg = section(&config.resonance, "resonance")?;
            let (prob, _) = build_resonance(cfg, opts.bvp_nodes()?)?;
            let deviation = prob.ll_limit_deviation().ok_or_else(|| {
                ConfigError::Invalid("ll-limits needs a landesman-lazer class".into())
            })?;
            output::CheckDoc {
                kind: "ll-limits".into(),
                holds: deviation <= 1e-3,
                sup_quotient: None,
                bound: None,
                margin: None,
                limit_deviation: Some(deviation),
            }
        }
    };
    let mut doc = ResultDoc::new("check condition", "report", EXIT_OK);
    doc.check = Some(doc_body);
    output::write_result(&opts.out, &doc)?;
    Ok(EXIT_OK)
}

/// Best-effort error summary so downstream tooling sees failures too.
pub fn write_failure(out: &Path, command: &str, err: &CliError) {
    let mut doc = ResultDoc::new(command, "numerical-failure", err.exit_code());
    doc.error = Some(err.to_string());
    let _ = output::write_result(out, &doc);
}
