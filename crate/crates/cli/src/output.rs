//! Machine-readable run outputs: a JSON summary plus plot-ready CSV files.
//! Field order is fixed by the struct declarations, so identical runs yield
//! byte-identical files.

use contbvp_core::chemostat::Trajectory;
use contbvp_core::continuation::Branch;
use contbvp_core::grid::GridFn;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct ResultDoc {
    pub command: String,
    /// "solved" | "range" | "no-solution" | "nonexistence" | "report" |
    /// "numerical-failure"
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlocal: Option<NonlocalDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar: Option<PlanarDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance: Option<ResonanceDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<DegeneracyDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity: Option<ContinuityDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chemostat: Option<ChemostatDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckDoc>,
}

impl ResultDoc {
    pub fn new(command: &str, status: &str, exit_code: i32) -> Self {
        Self {
            command: command.into(),
            status: status.into(),
            exit_code,
            error: None,
            nonlocal: None,
            planar: None,
            resonance: None,
            range: None,
            degeneracy: None,
            continuity: None,
            chemostat: None,
            certificate: None,
            demo: None,
            check: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SampledFunction {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn from_grid_fn(u: &GridFn, comp: usize) -> Self {
        Self {
            t: u.grid().nodes().collect(),
            values: (0..u.n_nodes()).map(|k| u.value(k, comp)).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NonlocalSolutionDoc {
    pub c_star: f64,
    pub residual_ode: f64,
    pub residual_bc: f64,
    pub residual_ode_ok: bool,
    pub residual_bc_ok: bool,
    pub u: SampledFunction,
}

#[derive(Debug, Serialize)]
pub struct NonlocalDoc {
    pub bracket: [f64; 2],
    pub ball_radius: f64,
    pub solutions: Vec<NonlocalSolutionDoc>,
}

#[derive(Debug, Serialize)]
pub struct PlanarDoc {
    pub boundary_value: [f64; 2],
    pub winding: i64,
    pub hypothesis_margin: f64,
    pub starts_tried: usize,
    pub residual_ode: f64,
    pub residual_bc: f64,
    pub u1: SampledFunction,
    pub u2: SampledFunction,
}

#[derive(Debug, Serialize)]
pub struct ResonanceDoc {
    pub s: f64,
    pub c_star: f64,
    pub mean_g: f64,
    pub residual_ode: f64,
    pub closure_gap: f64,
    pub residual_ok: bool,
    pub u: SampledFunction,
}

#[derive(Debug, Serialize)]
pub struct NecessaryConditionDoc {
    pub g_minus: f64,
    pub g_plus: f64,
    pub s: f64,
    pub outside: bool,
}

#[derive(Debug, Serialize)]
pub struct RangeDoc {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub tol: f64,
    pub window: [f64; 2],
    pub window_relative: bool,
    pub inside_sup_bound: bool,
}

#[derive(Debug, Serialize)]
pub struct DegeneracyDoc {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub threshold: f64,
    pub width_within_threshold: bool,
    /// Bounds only: a narrow estimate never asserts a genuinely degenerate
    /// range.
    pub asserts_degeneracy: bool,
}

#[derive(Debug, Serialize)]
pub struct ContinuityRow {
    pub amplitude: f64,
    pub hausdorff_distance: f64,
}

#[derive(Debug, Serialize)]
pub struct ContinuityDoc {
    pub base_lo: f64,
    pub base_hi: f64,
    pub table: Vec<ContinuityRow>,
}

#[derive(Debug, Serialize)]
pub struct ChemostatDoc {
    pub x0: f64,
    pub existence_margin: f64,
    pub poincare_residual: f64,
    pub log_identity_gap: f64,
    pub phi_value: f64,
    pub poincare_residual_ok: bool,
    pub log_identity_ok: bool,
    pub trajectory_bounds_ok: bool,
    pub history: SampledFunction,
}

#[derive(Debug, Serialize)]
pub struct CertificateDoc {
    pub kind: String,
    pub margin: f64,
    pub mean_dilution: f64,
    pub mean_mu_vstar: f64,
}

#[derive(Debug, Serialize)]
pub struct DemoDoc {
    pub t_star: f64,
    pub x_star: f64,
    pub phi_at_root: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct CheckDoc {
    pub kind: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_quotient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_deviation: Option<f64>,
}

pub fn write_result(out_dir: &Path, doc: &ResultDoc) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut body = serde_json::to_string_pretty(doc).expect("serializable result");
    body.push('\n');
    std::fs::write(out_dir.join("result.json"), body)
}

pub fn write_branch_csv(out_dir: &Path, branch: &Branch) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut f = std::fs::File::create(out_dir.join("branch.csv"))?;
    writeln!(f, "c,phi,residual")?;
    for p in &branch.points {
        writeln!(f, "{},{},{}", p.param, p.phi, p.residual)?;
    }
    Ok(())
}

pub fn write_range_csv(out_dir: &Path, samples: &[(f64, f64)]) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut f = std::fs::File::create(out_dir.join("range.csv"))?;
    writeln!(f, "c,I_value")?;
    for (c, v) in samples {
        writeln!(f, "{c},{v}")?;
    }
    Ok(())
}

pub fn write_trajectory_csv(out_dir: &Path, traj: &Trajectory) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut f = std::fs::File::create(out_dir.join("trajectory.csv"))?;
    writeln!(f, "t,s,x")?;
    for k in 0..traj.n_nodes() {
        let [s, x] = traj.state(k);
        writeln!(f, "{},{},{}", traj.node_time(k), s, x)?;
    }
    Ok(())
}
