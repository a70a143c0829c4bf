//! Reduction of an [`SdpProblem`] to the solver's internal standard form.
//!
//! * variables fixed by equal bounds or single-variable equalities are
//!   substituted out;
//! * LMI rows/columns that are identically zero after substitution are
//!   dropped (they carry no constraint but destroy strict feasibility);
//! * bounds become rows of the linear-inequality block.

use nalgebra::{DMatrix, DVector};

use super::ipm::{PsdBlock, Rows, StdForm, Term};
use super::{LinearKind, SdpProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RowOrigin {
    Linear(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug)]
pub(crate) struct Reduced {
    pub std: StdForm,
    /// Original index of each standard-form variable.
    pub free_vars: Vec<usize>,
    pub fixed: Vec<Option<f64>>,
    /// For each original LMI: kept rows and its block index (if any rows kept).
    pub lmi_rows: Vec<Vec<usize>>,
    pub lmi_block: Vec<Option<usize>>,
    pub lp_origin: Vec<RowOrigin>,
    pub eq_origin: Vec<usize>,
    pub objective_offset: f64,
    /// Set when presolve alone proves infeasibility.
    pub infeasible: Option<(RowOrigin, f64)>,
}

fn merged(coeffs: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut c = coeffs.to_vec();
    c.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(c.len());
    for (i, a) in c {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += a,
            _ => out.push((i, a)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

pub(crate) fn presolve(p: &SdpProblem) -> Reduced {
    let n = p.num_vars();
    let tol = |c: f64| 1e-9 * (1.0 + c.abs());
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut infeasible = None;

    for (bi, b) in p.bounds.iter().enumerate() {
        if let (Some(lo), Some(hi)) = (b.lower, b.upper) {
            if lo == hi {
                match fixed[b.var] {
                    Some(v) if (v - lo).abs() > tol(lo) => {
                        infeasible = Some((RowOrigin::Lower(bi), -(v - lo).abs()))
                    }
                    _ => fixed[b.var] = Some(lo),
                }
            }
        }
    }
    let linear: Vec<Vec<(usize, f64)>> = p.linear.iter().map(|l| merged(&l.coeffs)).collect();
    // Single-variable equalities, repeated until nothing new gets fixed.
    loop {
        let mut changed = false;
        for (li, l) in p.linear.iter().enumerate() {
            if l.kind != LinearKind::Equal {
                continue;
            }
            let open: Vec<&(usize, f64)> = linear[li].iter().filter(|(i, _)| fixed[*i].is_none()).collect();
            if open.len() != 1 {
                continue;
            }
            let (var, a) = *open[0];
            let rest: f64 = linear[li]
                .iter()
                .filter_map(|&(i, c)| fixed[i].map(|v| c * v))
                .sum::<f64>()
                + l.constant;
            fixed[var] = Some(-rest / a);
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let free_vars: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut std_index = vec![usize::MAX; n];
    for (k, &i) in free_vars.iter().enumerate() {
        std_index[i] = k;
    }
    let m = free_vars.len();
    let fixed_val = |i: usize| fixed[i].unwrap_or(0.0);

    let objective_offset = p.objective_offset
        + (0..n).filter_map(|i| fixed[i].map(|v| p.objective[i] * v)).sum::<f64>();
    let c = DVector::from_iterator(m, free_vars.iter().map(|&i| p.objective[i]));

    // LMIs.
    let mut psd = Vec::new();
    let mut lmi_rows = Vec::new();
    let mut lmi_block = Vec::new();
    for lmi in &p.lmis {
        let dim = lmi.dim();
        let mut constant = lmi.constant.to_dense();
        let mut touched = vec![false; dim];
        let mut free_coeffs: Vec<(usize, Vec<(usize, usize, f64)>)> = Vec::new();
        for (var, f) in &lmi.coeffs {
            let entries = f.entries();
            if let Some(v) = fixed[*var] {
                for &(i, j, a) in &entries {
                    constant[(i, j)] += a * v;
                    if i != j {
                        constant[(j, i)] += a * v;
                    }
                }
            } else {
                for &(i, j, _) in &entries {
                    touched[i] = true;
                    touched[j] = true;
                }
                free_coeffs.push((std_index[*var], entries));
            }
        }
        let keep: Vec<usize> = (0..dim)
            .filter(|&r| touched[r] || constant.row(r).iter().any(|&x| x != 0.0))
            .collect();
        let mut new_pos = vec![usize::MAX; dim];
        for (k, &r) in keep.iter().enumerate() {
            new_pos[r] = k;
        }
        if keep.is_empty() {
            lmi_rows.push(keep);
            lmi_block.push(None);
            continue;
        }
        let kd = keep.len();
        let kept_constant = DMatrix::from_fn(kd, kd, |a, b| constant[(keep[a], keep[b])]);
        let mut terms: Vec<Vec<Term>> = (0..m).map(|_| Vec::new()).collect();
        for (var, entries) in free_coeffs {
            let mut by_row: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
            for (i, j, a) in entries {
                let (ri, rj) = (new_pos[i], new_pos[j]);
                let (row, col, val) = if ri == rj { (ri, rj, 0.5 * a) } else { (ri.min(rj), ri.max(rj), a) };
                match by_row.iter_mut().find(|e| e.0 == row) {
                    Some(e) => e.1.push((col, val)),
                    None => by_row.push((row, vec![(col, val)])),
                }
            }
            for (row, g) in by_row {
                let g = merged(&g);
                terms[var].push(Term {
                    row,
                    idx: g.iter().map(|e| e.0).collect(),
                    val: g.iter().map(|e| e.1).collect(),
                });
            }
        }
        lmi_block.push(Some(psd.len()));
        lmi_rows.push(keep);
        psd.push(PsdBlock {
            dim: kd,
            constant: kept_constant,
            terms,
        });
    }

    // Linear rows.
    let mut lp = Rows::default();
    let mut lp_origin = Vec::new();
    let mut eq = Rows::default();
    let mut eq_origin = Vec::new();
    let push_row = |rows: &mut Rows, coeffs: &[(usize, f64)], constant: f64| -> Option<f64> {
        let mut c0 = constant;
        let mut row = Vec::new();
        for &(i, a) in coeffs {
            if fixed[i].is_some() {
                c0 += a * fixed_val(i);
            } else {
                row.push((std_index[i], a));
            }
        }
        if row.is_empty() {
            Some(c0)
        } else {
            rows.rows.push(row);
            rows.constant.push(c0);
            None
        }
    };
    for (li, l) in p.linear.iter().enumerate() {
        match l.kind {
            LinearKind::GreaterEq => match push_row(&mut lp, &linear[li], l.constant) {
                None => lp_origin.push(RowOrigin::Linear(li)),
                Some(v) if v < -tol(l.constant) => infeasible = Some((RowOrigin::Linear(li), v)),
                Some(_) => {}
            },
            LinearKind::Equal => match push_row(&mut eq, &linear[li], l.constant) {
                None => eq_origin.push(li),
                Some(v) if v.abs() > tol(l.constant) => {
                    infeasible = Some((RowOrigin::Linear(li), -v.abs()))
                }
                Some(_) => {}
            },
        }
    }
    for (bi, b) in p.bounds.iter().enumerate() {
        if let Some(lo) = b.lower {
            match push_row(&mut lp, &[(b.var, 1.0)], -lo) {
                None => lp_origin.push(RowOrigin::Lower(bi)),
                Some(v) if v < -tol(lo) => infeasible = Some((RowOrigin::Lower(bi), v)),
                Some(_) => {}
            }
        }
        if let Some(hi) = b.upper {
            match push_row(&mut lp, &[(b.var, -1.0)], hi) {
                None => lp_origin.push(RowOrigin::Upper(bi)),
                Some(v) if v < -tol(hi) => infeasible = Some((RowOrigin::Upper(bi), v)),
                Some(_) => {}
            }
        }
    }

    Reduced {
        std: StdForm {
            num_vars: m,
            c,
            psd,
            lp,
            eq,
        },
        free_vars,
        fixed,
        lmi_rows,
        lmi_block,
        lp_origin,
        eq_origin,
        objective_offset,
        infeasible,
    }
}
