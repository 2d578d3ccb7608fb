//! Resolution of named function families into the closures the solver
//! library consumes.

use crate::config::{ConfigError, FunctionSpec, SignalTerm};
use contbvp_core::chemostat::MuSpec;
use contbvp_core::grid::PeriodicSignal;
use std::f64::consts::PI;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn table_eval(xs: &[f64], ys: &[f64], u: f64) -> f64 {
    if u <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if u >= xs[last] {
        let slope = (ys[last] - ys[last - 1]) / (xs[last] - xs[last - 1]);
        return ys[last] + slope * (u - xs[last]);
    }
    let j = xs.partition_point(|&v| v <= u) - 1;
    let theta = (u - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + theta * (ys[j + 1] - ys[j])
}

/// Resolve a scalar function family.
pub fn scalar_function(spec: &FunctionSpec) -> Result<ScalarFn, ConfigError> {
    Ok(match spec {
        FunctionSpec::Sin => Arc::new(f64::sin),
        FunctionSpec::Monod { m, ks } => {
            let (m, ks) = (*m, *ks);
            Arc::new(move |u| m * u / (ks + u))
        }
        FunctionSpec::AtanLl { scale } => {
            let scale = *scale;
            Arc::new(move |u| (2.0 / PI) * (scale * u).atan())
        }
        FunctionSpec::Poly { coeffs } => {
            let coeffs = coeffs.clone();
            Arc::new(move |u| coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c))
        }
        FunctionSpec::CubicRootShift => Arc::new(|u: f64| u + u.cbrt().sin()),
        FunctionSpec::Tabulated { file } => {
            let (xs, ys) = crate::config::read_table(file)?;
            Arc::new(move |u| table_eval(&xs, &ys, u))
        }
        FunctionSpec::Linear { .. } => {
            return Err(ConfigError::Invalid(
                "the linear family applies only to planar boundary maps".into(),
            ))
        }
    })
}

/// A conservative sup bound for a scalar family over a working range, used
/// when the problem needs a declared bound.
pub fn scalar_sup(spec: &FunctionSpec, range: f64) -> Result<f64, ConfigError> {
    match spec {
        FunctionSpec::Sin => Ok(1.0),
        FunctionSpec::AtanLl { .. } => Ok(1.0),
        _ => {
            let f = scalar_function(spec)?;
            let mut sup = 0.0f64;
            for k in 0..=400 {
                let u = -range + 2.0 * range * k as f64 / 400.0;
                sup = sup.max(f(u).abs());
            }
            Ok(sup)
        }
    }
}

/// Resolve a planar map family (dimension 2).
pub fn planar_function(
    spec: &FunctionSpec,
) -> Result<contbvp_core::nonlocal::VectorMap, ConfigError> {
    match spec {
        FunctionSpec::Linear { matrix } => {
            let m = *matrix;
            Ok(Arc::new(move |u: &[f64], out: &mut [f64]| {
                out[0] = m[0][0] * u[0] + m[0][1] * u[1];
                out[1] = m[1][0] * u[0] + m[1][1] * u[1];
            }))
        }
        other => {
            let f = scalar_function(other)?;
            Ok(Arc::new(move |u: &[f64], out: &mut [f64]| {
                out[0] = f(u[0]);
                out[1] = f(u[1]);
            }))
        }
    }
}

/// Resolve a growth law for the chemostat.
pub fn mu_spec(spec: &FunctionSpec) -> Result<MuSpec, ConfigError> {
    match spec {
        FunctionSpec::Monod { m, ks } => Ok(MuSpec::Monod { m: *m, ks: *ks }),
        FunctionSpec::Tabulated { file } => {
            let (s, mu) = crate::config::read_table(file)?;
            Ok(MuSpec::Tabulated { s, mu })
        }
        _ => Err(ConfigError::Invalid(
            "growth laws must be monod(m, ks) or tabulated(file)".into(),
        )),
    }
}

/// Sample a sum of signal terms on `n` nodes over one period.
pub fn build_signal(
    terms: &[SignalTerm],
    period: f64,
    n: usize,
) -> Result<PeriodicSignal, ConfigError> {
    let eval = |t: f64| -> f64 {
        terms
            .iter()
            .map(|term| match term {
                SignalTerm::Const { value } => *value,
                SignalTerm::Cos { amplitude, harmonic } => {
                    amplitude * (2.0 * PI * *harmonic as f64 * t / period).cos()
                }
                SignalTerm::Sin { amplitude, harmonic } => {
                    amplitude * (2.0 * PI * *harmonic as f64 * t / period).sin()
                }
            })
            .sum()
    };
    PeriodicSignal::from_scalar_fn(period, n, eval)
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}
