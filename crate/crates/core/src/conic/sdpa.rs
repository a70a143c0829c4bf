//! Export to the SDPA sparse text format (`.dat-s`).
//!
//! The SDPA primal reads `min cᵀx  s.t.  Σ xᵢFᵢ − F₀ ⪰ 0`, so the constant
//! block is written with its sign flipped. Layout:
//!
//! ```text
//! "comment lines start with a quote or asterisk
//! m                       number of variables
//! nblocks                 number of blocks
//! d1 d2 ... [-nlp]        block sizes; a negative size is a diagonal block
//! c1 c2 ... cm            objective
//! i block row col value   one line per upper-triangle entry, 1-based;
//!                         i = 0 is F₀
//! ```
//!
//! Inequality rows and variable bounds form one trailing diagonal block.
//! Equalities `aᵀv + b = 0` become the pair `aᵀv + b ≥ 0`, `−aᵀv − b ≥ 0`.
//! The objective offset is given in a comment line.

use std::fmt::Write as _;

use super::{LinearKind, SdpProblem};

pub fn to_sdpa(problem: &SdpProblem) -> String {
    let m = problem.num_vars();
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for c in &problem.linear {
        rows.push((c.coeffs.clone(), c.constant));
        if c.kind == LinearKind::Equal {
            rows.push((c.coeffs.iter().map(|&(i, a)| (i, -a)).collect(), -c.constant));
        }
    }
    for b in &problem.bounds {
        if let Some(lo) = b.lower {
            rows.push((vec![(b.var, 1.0)], -lo));
        }
        if let Some(hi) = b.upper {
            rows.push((vec![(b.var, -1.0)], hi));
        }
    }
    let mut sizes: Vec<String> = problem.lmis.iter().map(|l| l.dim().to_string()).collect();
    if !rows.is_empty() {
        sizes.push(format!("-{}", rows.len()));
    }

    let mut out = String::new();
    writeln!(out, "\"sensorsched export; objective offset {:e}", problem.objective_offset).unwrap();
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{}", sizes.len()).unwrap();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let obj: Vec<String> = problem.objective.iter().map(|c| format!("{c:e}")).collect();
    writeln!(out, "{}", obj.join(" ")).unwrap();

    let mut lines: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (b, l) in problem.lmis.iter().enumerate() {
        for (i, j, v) in l.constant.entries() {
            lines.push((0, b + 1, i + 1, j + 1, -v));
        }
        for (var, f) in &l.coeffs {
            for (i, j, v) in f.entries() {
                lines.push((var + 1, b + 1, i + 1, j + 1, v));
            }
        }
    }
    let lp_block = problem.lmis.len() + 1;
    for (k, (coeffs, constant)) in rows.iter().enumerate() {
        if *constant != 0.0 {
            lines.push((0, lp_block, k + 1, k + 1, -constant));
        }
        for &(i, a) in coeffs {
            if a != 0.0 {
                lines.push((i + 1, lp_block, k + 1, k + 1, a));
            }
        }
    }
    lines.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    // Merge duplicates introduced by repeated variables in one row.
    let mut merged: Vec<(usize, usize, usize, usize, f64)> = Vec::with_capacity(lines.len());
    for l in lines {
        match merged.last_mut() {
            Some(p) if (p.0, p.1, p.2, p.3) == (l.0, l.1, l.2, l.3) => p.4 += l.4,
            _ => merged.push(l),
        }
    }
    for (i, b, r, c, v) in merged {
        if v != 0.0 {
            writeln!(out, "{i} {b} {r} {c} {v:e}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{LinearConstraint, LmiConstraint, SymSparse, VarBound, VarIndexMap, VarShape};

    #[test]
    fn small_problem_layout() {
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(2));
        let mut p = SdpProblem::new(map);
        p.objective = vec![1.0, 0.0];
        let mut l = LmiConstraint::new("L", 2);
        l.constant.add(0, 1, 1.0);
        let mut f = SymSparse::new(2);
        f.add(0, 0, 1.0);
        l.coeffs.push((0, f));
        p.lmis.push(l);
        p.linear.push(LinearConstraint {
            name: "e".into(),
            coeffs: vec![(1, 1.0)],
            constant: -3.0,
            kind: LinearKind::Equal,
        });
        p.bounds.push(VarBound { var: 0, lower: None, upper: Some(5.0) });
        let s = to_sdpa(&p);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "2");
        assert_eq!(lines[2], "2");
        assert_eq!(lines[3], "2 -3");
        assert_eq!(lines[4], "1e0 0e0");
        assert!(lines.contains(&"0 1 1 2 -1e0"));
        assert!(lines.contains(&"1 1 1 1 1e0"));
        assert!(lines.contains(&"0 2 1 1 3e0"));
        assert!(lines.contains(&"0 2 2 2 -3e0"));
        assert!(lines.contains(&"0 2 3 3 -5e0"));
        assert!(lines.contains(&"1 2 3 3 -1e0"));
        assert!(lines.contains(&"2 2 2 2 -1e0"));
    }
}
