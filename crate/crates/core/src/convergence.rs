//! Error metrics and convergence studies.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::collocation::{assemble, CollocationSystem, NodeResiduals, SolveInfo};
use crate::error::{Error, Result};
use crate::franke::make_franke_problem;
use crate::kernel::{KernelTable, OperatorL};
use crate::pointsets::{
    generate_boundary_points, generate_eval_grid, generate_point_set, EvaluationGrid,
};
use crate::sphere::{
    mesh_norm_boundary, mesh_norm_interior, MeshSampling, SphericalCap, SurfacePoint,
};

pub const KERNEL_NAME: &str = "wendland_3_3";

/// Normalized L² error `((1/|Ω|) Σ Δθ Δφ |u − Λu|² sinθ)^{1/2}` by the
/// midpoint rule on `grid`. For the π/3 cap this is
/// `((1/π)(2π²/(3|G|)) Σ |u − Λu|² sinθ)^{1/2}`.
pub fn interior_l2_error(
    grid: &EvaluationGrid,
    exact: impl Fn(&SurfacePoint) -> f64,
    approx: impl Fn(&SurfacePoint) -> f64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("evaluation grid is empty"));
    }
    let sum: f64 = grid
        .nodes
        .iter()
        .map(|n| {
            let e = exact(&n.point) - approx(&n.point);
            e * e * n.theta.sin()
        })
        .sum();
    Ok((grid.cell_weight * sum / grid.cap_area).sqrt())
}

/// `max |u − Λu|` over `n_samples` equispaced rim points.
pub fn boundary_sup_error(
    cap: &SphericalCap,
    n_samples: usize,
    exact: impl Fn(&SurfacePoint) -> f64,
    approx: impl Fn(&SurfacePoint) -> f64,
) -> Result<f64> {
    let pts = generate_boundary_points(cap, n_samples)?;
    Ok(pts
        .iter()
        .map(|p| (exact(p) - approx(p)).abs())
        .fold(0.0, f64::max))
}

/// `EOC_k = ln(e_{k−1}/e_k) / ln(h_{k−1}/h_k)` for `k ≥ 1`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::invalid(
            "eoc needs two equally long sequences of length >= 2",
        ));
    }
    if errors.iter().chain(hs).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::invalid("errors and mesh norms must be positive"));
    }
    Ok((1..errors.len())
        .map(|k| (errors[k - 1] / errors[k]).ln() / (hs[k - 1] / hs[k]).ln())
        .collect())
}

fn eoc_pair(e: (Option<f64>, Option<f64>), h: (Option<f64>, Option<f64>)) -> Option<f64> {
    match (e, h) {
        ((Some(e0), Some(e1)), (Some(h0), Some(h1))) if h0 != h1 => {
            eoc(&[e0, e1], &[h0, h1]).ok().map(|v| v[0])
        }
        _ => None,
    }
}

/// Shared numerical settings of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub cap_radius: f64,
    pub kappa: f64,
    pub grid_ntheta: usize,
    pub grid_nphi: usize,
    pub boundary_samples: usize,
    pub mesh_sampling: MeshSampling,
    pub regularize_eps: f64,
}

impl Default for ExperimentSetup {
    fn default() -> Self {
        ExperimentSetup {
            cap_radius: PI / 3.0,
            kappa: 1.0,
            grid_ntheta: 67,
            grid_nphi: 200,
            boundary_samples: 3000,
            mesh_sampling: MeshSampling::default(),
            regularize_eps: 0.0,
        }
    }
}

impl ExperimentSetup {
    pub fn cap(&self) -> Result<SphericalCap> {
        SphericalCap::north(self.cap_radius)
    }

    pub fn op(&self) -> Result<OperatorL> {
        OperatorL::new(self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    pub interior: usize,
    pub boundary: usize,
    pub h_interior: Option<f64>,
    pub h_boundary: Option<f64>,
    pub e_l2: f64,
    pub e_sup_boundary: f64,
    pub residuals: NodeResiduals,
    pub solve: SolveInfo,
}

pub struct RunOutcome {
    pub system: CollocationSystem,
    pub grid: EvaluationGrid,
    pub metrics: RunMetrics,
}

/// Solves the Franke problem with `m` interior and `k` boundary points and
/// measures everything a report row needs.
pub fn run_single(setup: &ExperimentSetup, m: usize, k: usize) -> Result<RunOutcome> {
    let cap = setup.cap()?;
    let op = setup.op()?;
    let problem = make_franke_problem(cap, op);
    let table = KernelTable::wendland(op);
    let points = generate_point_set(&cap, m, k)?;
    let mut system = assemble(&points, &table, &problem)?;
    let solve = *system.solve(setup.regularize_eps)?;

    let grid = generate_eval_grid(&cap, setup.grid_ntheta, setup.grid_nphi)?;
    let exact = problem
        .exact_u
        .clone()
        .expect("Franke problem has an exact solution");
    let approx = |p: &SurfacePoint| system.evaluate(p).expect("system is solved");
    let e_l2 = interior_l2_error(&grid, |p| exact(p), approx)?;
    let e_sup_boundary = boundary_sup_error(&cap, setup.boundary_samples, |p| exact(p), approx)?;
    let residuals = system.node_residuals(&problem)?;
    let h_interior = if m > 0 {
        Some(mesh_norm_interior(&points, &cap, setup.mesh_sampling)?)
    } else {
        None
    };
    let h_boundary = if k > 0 {
        Some(mesh_norm_boundary(&points, &cap)?)
    } else {
        None
    };
    Ok(RunOutcome {
        metrics: RunMetrics {
            interior: m,
            boundary: k,
            h_interior,
            h_boundary,
            e_l2,
            e_sup_boundary,
            residuals,
            solve,
        },
        system,
        grid,
    })
}

/// Which count a study varies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    /// Vary `M` with fixed `boundary` points.
    Interior { counts: Vec<usize>, boundary: usize },
    /// Vary `N − M` with fixed `interior` points.
    Boundary { counts: Vec<usize>, interior: usize },
}

impl Sweep {
    pub fn reference_interior() -> Self {
        Sweep::Interior {
            counts: vec![500, 1000, 2000, 4000],
            boundary: 200,
        }
    }

    pub fn reference_boundary() -> Self {
        Sweep::Boundary {
            counts: vec![100, 200, 400, 800],
            interior: 1000,
        }
    }

    fn runs(&self) -> Vec<(usize, usize)> {
        match self {
            Sweep::Interior { counts, boundary } => {
                counts.iter().map(|&m| (m, *boundary)).collect()
            }
            Sweep::Boundary { counts, interior } => {
                counts.iter().map(|&k| (*interior, k)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub setup: ExperimentSetup,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub interior: usize,
    pub boundary: usize,
    pub h_interior: Option<f64>,
    pub h_boundary: Option<f64>,
    pub e_l2: Option<f64>,
    pub e_sup_boundary: Option<f64>,
    pub eoc_l2: Option<f64>,
    pub eoc_sup: Option<f64>,
    pub relative_residual: Option<f64>,
    pub failure: Option<String>,
}

impl ConvergenceRow {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub kernel: String,
    pub kappa: f64,
    pub cap_radius: f64,
    pub grid_ntheta: usize,
    pub grid_nphi: usize,
    pub boundary_samples: usize,
    pub mesh_sampling: MeshSampling,
    pub regularize_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub metadata: ReportMetadata,
}

/// Runs every row of the sweep in order. A row whose solve fails is
/// recorded with its error and the sweep carries on.
pub fn run_convergence_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    let setup = &config.setup;
    // surface configuration errors before any expensive work
    setup.cap()?;
    setup.op()?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (m, k) in config.sweep.runs() {
        let row = match run_single(setup, m, k) {
            Ok(out) => {
                let r = out.metrics;
                ConvergenceRow {
                    interior: m,
                    boundary: k,
                    h_interior: r.h_interior,
                    h_boundary: r.h_boundary,
                    e_l2: Some(r.e_l2),
                    e_sup_boundary: Some(r.e_sup_boundary),
                    eoc_l2: None,
                    eoc_sup: None,
                    relative_residual: Some(r.solve.relative_residual),
                    failure: None,
                }
            }
            Err(e @ (Error::InvalidInput(_) | Error::Io(_) | Error::Parse(_))) => return Err(e),
            Err(e) => ConvergenceRow {
                interior: m,
                boundary: k,
                h_interior: None,
                h_boundary: None,
                e_l2: None,
                e_sup_boundary: None,
                eoc_l2: None,
                eoc_sup: None,
                relative_residual: None,
                failure: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    for k in 1..rows.len() {
        let (prev, cur) = (&rows[k - 1], &rows[k]);
        let (eoc_l2, eoc_sup) = match config.sweep {
            Sweep::Interior { .. } => (
                eoc_pair((prev.e_l2, cur.e_l2), (prev.h_interior, cur.h_interior)),
                None,
            ),
            Sweep::Boundary { .. } => (
                None,
                eoc_pair(
                    (prev.e_sup_boundary, cur.e_sup_boundary),
                    (prev.h_boundary, cur.h_boundary),
                ),
            ),
        };
        rows[k].eoc_l2 = eoc_l2;
        rows[k].eoc_sup = eoc_sup;
    }
    Ok(ConvergenceReport {
        rows,
        metadata: ReportMetadata {
            kernel: KERNEL_NAME.to_string(),
            kappa: setup.kappa,
            cap_radius: setup.cap_radius,
            grid_ntheta: setup.grid_ntheta,
            grid_nphi: setup.grid_nphi,
            boundary_samples: setup.boundary_samples,
            mesh_sampling: setup.mesh_sampling,
            regularize_eps: setup.regularize_eps,
        },
    })
}

/// Scientific notation with a four-digit mantissa and two-digit exponent,
/// e.g. `2.9000E-03`.
pub fn sci4(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.4E}");
    let (mant, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", exp.abs())
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub const REPORT_HEADER: &str = "M,N-M,h_X1,h_X2,e_l2,e_inf,EOC_l2,EOC_inf,status";

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.interior,
                r.boundary,
                opt(r.h_interior, |v| format!("{v:.4}")),
                opt(r.h_boundary, |v| format!("{v:.4}")),
                opt(r.e_l2, sci4),
                opt(r.e_sup_boundary, sci4),
                opt(r.eoc_l2, |v| format!("{v:.2}")),
                opt(r.eoc_sup, |v| format!("{v:.2}")),
                if r.is_ok() { "ok" } else { "failed" },
            )?;
        }
        Ok(())
    }
}
