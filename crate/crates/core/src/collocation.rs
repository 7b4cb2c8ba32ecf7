//! Symmetric collocation: assembly of the Gram system of the functionals
//! `δ_x ∘ L` (interior) and `δ_x` (boundary), its solution, and evaluation of
//! the approximant `Λu = Σ_{j≤M} α_j L₂φ(·, x_j) + Σ_{j>M} α_j φ(·, x_j)`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::franke::DirichletProblem;
use crate::kernel::{KernelTable, OperatorL, RadialProfile};
use crate::linalg::{Cholesky, SymmetricMatrix};
use crate::sphere::{chord_distance, PointSet, SurfacePoint};

/// Relative residual above which one refinement step is applied.
pub const REFINE_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveInfo {
    /// `max |Aα − b| / max |b|` after the final step.
    pub relative_residual: f64,
    pub refined: bool,
    /// Relative diagonal jitter that was added before factorizing (0 = none).
    pub regularize_eps: f64,
}

#[derive(Debug, Clone)]
pub struct CollocationSystem {
    pub points: PointSet,
    pub table: KernelTable,
    pub op: OperatorL,
    pub matrix: SymmetricMatrix,
    pub rhs: Vec<f64>,
    alpha: Option<Vec<f64>>,
    info: Option<SolveInfo>,
}

/// Profile linking functional `i` with basis function `j`.
fn block_profile(table: &KernelTable, i_interior: bool, j_interior: bool) -> &RadialProfile {
    match (i_interior, j_interior) {
        (true, true) => &table.ll_psi,
        (false, false) => &table.psi,
        _ => &table.l_psi,
    }
}

/// Builds the Gram matrix and right-hand side; rejects coincident points.
pub fn assemble(
    points: &PointSet,
    table: &KernelTable,
    problem: &DirichletProblem,
) -> Result<CollocationSystem> {
    let all: Vec<SurfacePoint> = points.iter().copied().collect();
    for i in 0..all.len() {
        for j in 0..i {
            let c = chord_distance(&all[i], &all[j]);
            if c == 0.0 {
                return Err(Error::DuplicatePoints {
                    first: j,
                    second: i,
                    chord: c,
                });
            }
        }
    }
    assemble_unchecked(points, table, problem)
}

/// [`assemble`] without the coincident-point check.
pub fn assemble_unchecked(
    points: &PointSet,
    table: &KernelTable,
    problem: &DirichletProblem,
) -> Result<CollocationSystem> {
    if (table.kappa - problem.op.kappa()).abs() > 0.0 {
        return Err(Error::invalid(format!(
            "kernel table built for kappa {} but problem uses {}",
            table.kappa,
            problem.op.kappa()
        )));
    }
    if points.is_empty() {
        return Err(Error::EmptyPointSet("collocation"));
    }
    let m = points.interior.len();
    let all: Vec<SurfacePoint> = points.iter().copied().collect();
    let matrix = SymmetricMatrix::from_lower(all.len(), |i, j| {
        block_profile(table, i < m, j < m).value(chord_distance(&all[i], &all[j]))
    });
    let rhs = points
        .interior
        .iter()
        .map(|p| (problem.f)(p))
        .chain(points.boundary.iter().map(|p| (problem.g)(p)))
        .collect();
    Ok(CollocationSystem {
        points: points.clone(),
        table: table.clone(),
        op: problem.op,
        matrix,
        rhs,
        alpha: None,
        info: None,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

impl CollocationSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn interior_count(&self) -> usize {
        self.points.interior.len()
    }

    pub fn alpha(&self) -> Option<&[f64]> {
        self.alpha.as_deref()
    }

    pub fn info(&self) -> Option<&SolveInfo> {
        self.info.as_ref()
    }

    pub fn is_solved(&self) -> bool {
        self.alpha.is_some()
    }

    /// Factorizes and solves. With `regularize_eps > 0` every diagonal entry
    /// is scaled by `1 + regularize_eps` first (the stored matrix keeps the
    /// jitter so residuals refer to the system actually solved).
    pub fn solve(&mut self, regularize_eps: f64) -> Result<&SolveInfo> {
        if !(regularize_eps >= 0.0 && regularize_eps.is_finite()) {
            return Err(Error::invalid(format!(
                "regularize_eps {regularize_eps} must be >= 0"
            )));
        }
        if regularize_eps > 0.0 {
            for i in 0..self.matrix.dim() {
                let d = self.matrix.get(i, i);
                self.matrix.add_to_diagonal(i, regularize_eps * d);
            }
        }
        let chol = Cholesky::factor(&self.matrix)?;
        let mut alpha = chol.solve(&self.rhs);
        let scale = max_abs(&self.rhs).max(f64::MIN_POSITIVE);
        let residual = |alpha: &[f64]| -> Vec<f64> {
            self.matrix
                .mul_vec(alpha)
                .iter()
                .zip(&self.rhs)
                .map(|(ax, b)| b - ax)
                .collect()
        };
        let mut r = residual(&alpha);
        let mut rel = max_abs(&r) / scale;
        let mut refined = false;
        if rel > REFINE_THRESHOLD {
            let delta = chol.solve(&r);
            alpha.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
            r = residual(&alpha);
            rel = max_abs(&r) / scale;
            refined = true;
        }
        self.alpha = Some(alpha);
        self.info = Some(SolveInfo {
            relative_residual: rel,
            refined,
            regularize_eps,
        });
        Ok(self.info.as_ref().unwrap())
    }

    /// Replaces the coefficients (for diagnostics and linearity checks).
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<CollocationSystem> {
        if alpha.len() != self.len() {
            return Err(Error::invalid("coefficient vector has the wrong length"));
        }
        let mut sys = self.clone();
        sys.alpha = Some(alpha);
        Ok(sys)
    }

    fn combine(
        &self,
        p: &SurfacePoint,
        interior: &RadialProfile,
        boundary: &RadialProfile,
    ) -> Result<f64> {
        let alpha = self.alpha.as_ref().ok_or(Error::Unsolved)?;
        let m = self.interior_count();
        let mut s = 0.0;
        for (j, x) in self.points.iter().enumerate() {
            let prof = if j < m { interior } else { boundary };
            s += alpha[j] * prof.value(chord_distance(p, x));
        }
        Ok(s)
    }

    /// `Λu(p)`.
    pub fn evaluate(&self, p: &SurfacePoint) -> Result<f64> {
        self.combine(p, &self.table.l_psi, &self.table.psi)
    }

    /// `L(Λu)(p)`.
    pub fn evaluate_l(&self, p: &SurfacePoint) -> Result<f64> {
        self.combine(p, &self.table.ll_psi, &self.table.l_psi)
    }

    /// `αᵀAα`, the squared native-space norm of the approximant.
    pub fn native_norm_sq(&self) -> Result<f64> {
        let alpha = self.alpha.as_ref().ok_or(Error::Unsolved)?;
        Ok(self.matrix.quadratic_form(alpha))
    }

    /// Signed defect at every node, interior first: `L(Λu) − f` at interior
    /// nodes and `Λu − g` at boundary nodes.
    pub fn node_defects(&self, problem: &DirichletProblem) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for p in &self.points.interior {
            out.push(self.evaluate_l(p)? - (problem.f)(p));
        }
        for p in &self.points.boundary {
            out.push(self.evaluate(p)? - (problem.g)(p));
        }
        Ok(out)
    }

    /// Collocation defects at the nodes: `max |L(Λu) − f|` over interior
    /// nodes and `max |Λu − g|` over boundary nodes.
    pub fn node_residuals(&self, problem: &DirichletProblem) -> Result<NodeResiduals> {
        let defects = self.node_defects(problem)?;
        let (di, db) = defects.split_at(self.interior_count());
        let mut out = NodeResiduals {
            interior: max_abs(di),
            boundary: max_abs(db),
            ..NodeResiduals::default()
        };
        for p in &self.points.interior {
            out.max_f = out.max_f.max((problem.f)(p).abs());
        }
        for p in &self.points.boundary {
            out.max_g = out.max_g.max((problem.g)(p).abs());
        }
        Ok(out)
    }

    /// `row,col,value` triplets of the nonzero entries.
    pub fn write_matrix_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,value")?;
        let n = self.matrix.dim();
        for i in 0..n {
            for (j, v) in self.matrix.row(i).iter().enumerate() {
                if *v != 0.0 {
                    writeln!(out, "{i},{j},{v:?}")?;
                }
            }
        }
        Ok(())
    }

    /// One coefficient per line.
    pub fn write_alpha<W: Write>(&self, mut out: W) -> Result<()> {
        let alpha = self.alpha.as_ref().ok_or(Error::Unsolved)?;
        for a in alpha {
            writeln!(out, "{a:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NodeResiduals {
    pub interior: f64,
    pub boundary: f64,
    pub max_f: f64,
    pub max_g: f64,
}

impl NodeResiduals {
    pub fn interior_relative(&self) -> f64 {
        self.interior / self.max_f.max(f64::MIN_POSITIVE)
    }

    pub fn boundary_relative(&self) -> f64 {
        self.boundary / self.max_g.max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::franke::{make_franke_problem, ScalarField};
    use crate::pointsets::generate_point_set;
    use crate::sphere::SphericalCap;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup() -> (SphericalCap, KernelTable, DirichletProblem) {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        let op = OperatorL::new(1.0).unwrap();
        (cap, KernelTable::wendland(op), make_franke_problem(cap, op))
    }

    #[test]
    fn pure_interpolation_block() {
        let (cap, table, prob) = setup();
        let a = cap.point_at(cap.radius(), 0.0);
        let b = cap.point_at(cap.radius(), PI);
        let sys = assemble(&PointSet::new(vec![], vec![a, b]), &table, &prob).unwrap();
        let d = chord_distance(&a, &b);
        assert_eq!(sys.matrix.get(0, 0), table.psi.value(0.0));
        assert_eq!(sys.matrix.get(1, 1), 1.0);
        assert_eq!(sys.matrix.get(0, 1), table.psi.value(d));
        assert_eq!(sys.matrix.get(1, 0), table.psi.value(d));
    }

    #[test]
    fn block_structure() {
        let (cap, table, prob) = setup();
        let set = generate_point_set(&cap, 40, 12).unwrap();
        let sys = assemble(&set, &table, &prob).unwrap();
        assert_eq!(sys.matrix.max_asymmetry(), 0.0);
        let ll0 = table.ll_psi.value(0.0);
        for i in 0..40 {
            assert_eq!(sys.matrix.get(i, i), ll0);
        }
        for i in 40..52 {
            assert_eq!(sys.matrix.get(i, i), 1.0);
        }
        let all: Vec<_> = set.iter().copied().collect();
        for i in 0..52 {
            for j in 0..52 {
                if chord_distance(&all[i], &all[j]) > 1.0 {
                    assert_eq!(sys.matrix.get(i, j), 0.0);
                }
            }
        }
        assert!((sys.rhs[0] - (prob.f)(&all[0])).abs() == 0.0);
        assert!((sys.rhs[45] - (prob.g)(&all[45])).abs() == 0.0);
    }

    #[test]
    fn single_boundary_point() {
        let (cap, table, _) = setup();
        let op = OperatorL::new(1.0).unwrap();
        let g: ScalarField = Arc::new(|_| 3.25);
        let prob = DirichletProblem::new(Arc::new(|_| 0.0), g, cap, op);
        let p = cap.point_at(cap.radius(), 1.0);
        let mut sys = assemble(&PointSet::new(vec![], vec![p]), &table, &prob).unwrap();
        sys.solve(0.0).unwrap();
        assert_eq!(sys.alpha().unwrap(), &[3.25]);
    }

    #[test]
    fn duplicates() {
        let (cap, table, prob) = setup();
        let p = cap.point_at(cap.radius(), 1.0);
        let q = cap.point_at(cap.radius(), 2.0);
        let set = PointSet::new(vec![], vec![p, q, p]);
        assert!(matches!(
            assemble(&set, &table, &prob),
            Err(Error::DuplicatePoints { .. })
        ));
        let mut sys = assemble_unchecked(&set, &table, &prob).unwrap();
        assert!(matches!(
            sys.solve(0.0),
            Err(Error::NotPositiveDefinite { pivot: 2, .. })
        ));
        assert!(!sys.is_solved());
    }

    #[test]
    fn unsolved_and_zero_coefficients() {
        let (cap, table, prob) = setup();
        let set = generate_point_set(&cap, 20, 10).unwrap();
        let sys = assemble(&set, &table, &prob).unwrap();
        assert!(matches!(sys.evaluate(&cap.center()), Err(Error::Unsolved)));
        assert!(matches!(
            sys.evaluate_l(&cap.center()),
            Err(Error::Unsolved)
        ));
        let zero = sys.with_alpha(vec![0.0; 30]).unwrap();
        assert_eq!(zero.evaluate(&cap.center()).unwrap(), 0.0);
        assert_eq!(zero.evaluate_l(&cap.center()).unwrap(), 0.0);
        assert!(sys.with_alpha(vec![0.0; 3]).is_err());
    }

    #[test]
    fn compact_support_far_away() {
        let (cap, table, prob) = setup();
        let set = generate_point_set(&cap, 30, 10).unwrap();
        let mut sys = assemble(&set, &table, &prob).unwrap();
        sys.solve(0.0).unwrap();
        assert_eq!(sys.evaluate(&SurfacePoint::SOUTH).unwrap(), 0.0);
        assert_eq!(sys.evaluate_l(&SurfacePoint::SOUTH).unwrap(), 0.0);
    }

    #[test]
    fn small_system_collocates() {
        let (cap, table, prob) = setup();
        let set = generate_point_set(&cap, 200, 60).unwrap();
        let mut sys = assemble(&set, &table, &prob).unwrap();
        let info = *sys.solve(0.0).unwrap();
        assert!(info.relative_residual <= 1e-8);
        let r = sys.node_residuals(&prob).unwrap();
        assert!(r.interior_relative() <= 1e-6, "{r:?}");
        assert!(r.boundary_relative() <= 1e-8, "{r:?}");
    }

    #[test]
    fn evaluate_l_is_linear_in_alpha() {
        let (cap, table, prob) = setup();
        let set = generate_point_set(&cap, 25, 10).unwrap();
        let sys = assemble(&set, &table, &prob).unwrap();
        let a: Vec<f64> = (0..35).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..35).map(|i| (i as f64 * 0.3).cos()).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let p = cap.point_at(0.4, 0.9);
        let lhs = sys.with_alpha(a).unwrap().evaluate_l(&p).unwrap()
            + sys.with_alpha(b).unwrap().evaluate_l(&p).unwrap();
        let rhs = sys.with_alpha(ab).unwrap().evaluate_l(&p).unwrap();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn regularization_is_recorded() {
        let (cap, table, prob) = setup();
        let set = generate_point_set(&cap, 20, 10).unwrap();
        let mut sys = assemble(&set, &table, &prob).unwrap();
        let before = sys.matrix.get(0, 0);
        let info = *sys.solve(1e-6).unwrap();
        assert_eq!(info.regularize_eps, 1e-6);
        assert!((sys.matrix.get(0, 0) - before * (1.0 + 1e-6)).abs() <= 1e-12 * before);
        assert!(sys.clone().solve(-1.0).is_err());
    }

    #[test]
    fn kappa_mismatch() {
        let (cap, _, prob) = setup();
        let table = KernelTable::wendland(OperatorL::new(2.0).unwrap());
        let set = generate_point_set(&cap, 5, 5).unwrap();
        assert!(assemble(&set, &table, &prob).is_err());
    }

    #[test]
    fn dumps() {
        let (cap, table, prob) = setup();
        let set = PointSet::new(vec![], vec![cap.point_at(cap.radius(), 0.0)]);
        let mut sys = assemble(&set, &table, &prob).unwrap();
        let mut buf = Vec::new();
        assert!(sys.write_alpha(&mut buf).is_err());
        sys.solve(0.0).unwrap();
        sys.write_alpha(&mut buf).unwrap();
        let mut m = Vec::new();
        sys.write_matrix_csv(&mut m).unwrap();
        assert_eq!(String::from_utf8(m).unwrap(), "row,col,value\n0,0,1.0\n");
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }
}
