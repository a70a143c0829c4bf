//! Constraint residuals recomputed from the problem data alone.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{LinearKind, SdpProblem};

/// Residuals of a candidate point. Negative numbers are violations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    /// Smallest eigenvalue of each LMI, in problem order.
    pub lmi_min_eigenvalues: Vec<f64>,
    /// Most negative `aᵀv + b` over inequality rows (0 when none violated).
    pub worst_inequality: f64,
    /// Largest `|aᵀv + b|` over equality rows.
    pub worst_equality: f64,
    /// Most negative bound slack.
    pub worst_bound: f64,
    pub ok: bool,
}

/// Evaluates every constraint of `problem` at `x` by dense assembly.
/// `ok` is set when all violations are at most `feas_tol`.
pub fn verify(problem: &SdpProblem, x: &[f64], feas_tol: f64) -> ViolationReport {
    let lmi_min_eigenvalues: Vec<f64> = problem
        .lmis
        .iter()
        .map(|l| {
            let mut m: DMatrix<f64> = l.constant.to_dense();
            for (var, f) in &l.coeffs {
                m += f.to_dense() * x[*var];
            }
            let m = (&m + m.transpose()) * 0.5;
            if m.nrows() == 0 {
                0.0
            } else {
                SymmetricEigen::new(m).eigenvalues.min()
            }
        })
        .collect();
    let mut worst_inequality: f64 = 0.0;
    let mut worst_equality: f64 = 0.0;
    for c in &problem.linear {
        let val: f64 = c.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>() + c.constant;
        match c.kind {
            LinearKind::GreaterEq => worst_inequality = worst_inequality.min(val),
            LinearKind::Equal => worst_equality = worst_equality.max(val.abs()),
        }
    }
    let mut worst_bound: f64 = 0.0;
    for b in &problem.bounds {
        if let Some(lo) = b.lower {
            worst_bound = worst_bound.min(x[b.var] - lo);
        }
        if let Some(hi) = b.upper {
            worst_bound = worst_bound.min(hi - x[b.var]);
        }
    }
    let ok = lmi_min_eigenvalues.iter().all(|&e| e >= -feas_tol)
        && worst_inequality >= -feas_tol
        && worst_equality <= feas_tol
        && worst_bound >= -feas_tol;
    ViolationReport {
        lmi_min_eigenvalues,
        worst_inequality,
        worst_equality,
        worst_bound,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{LmiConstraint, SymSparse, VarBound, VarIndexMap, VarShape};

    fn problem() -> SdpProblem {
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(2));
        let mut p = SdpProblem::new(map);
        let mut l = LmiConstraint::new("L", 2);
        let mut f0 = SymSparse::new(2);
        f0.add(0, 0, 1.0);
        let mut f1 = SymSparse::new(2);
        f1.add(1, 1, 1.0);
        l.coeffs.push((0, f0));
        l.coeffs.push((1, f1));
        l.constant.add(0, 1, 1.0);
        p.lmis.push(l);
        p.bounds.push(VarBound { var: 0, lower: Some(0.0), upper: Some(2.0) });
        p
    }

    #[test]
    fn feasible_point_passes() {
        let r = verify(&problem(), &[1.0, 1.0], 1e-9);
        assert!(r.ok, "{r:?}");
        assert!(r.lmi_min_eigenvalues[0].abs() < 1e-12);
    }

    #[test]
    fn corrupted_point_is_flagged() {
        let r = verify(&problem(), &[2.0 + 1.0, 1.0], 1e-9);
        assert!(!r.ok);
        assert!((r.worst_bound + 1.0).abs() < 1e-12);
        let r = verify(&problem(), &[1.0, 0.0], 1e-9);
        assert!(!r.ok);
        assert!(r.lmi_min_eigenvalues[0] < -0.5);
    }
}
