//! Primal–dual path-following method (HKM direction, Mehrotra
//! predictor–corrector) on the internal standard form
//!
//! ```text
//! min cᵀv  s.t.  Z_b = F0_b + Σ v_i F_i^b ⪰ 0,  z = b + A v ≥ 0,  E v + e = 0
//! ```
//!
//! with dual multipliers `X_b ⪰ 0`, `x ≥ 0`, `y` free.
//!
//! Every coefficient matrix is stored as a list of rank-two terms
//! `e_r gᵀ + g e_rᵀ` with sparse `g`, which makes the Schur complement
//! `M_ij = tr(F_i X F_j Z⁻¹)` cheap to form for the arrow-shaped LMIs the
//! scheduling problem produces.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;

use super::presolve::{presolve, Reduced, RowOrigin};
use super::{ConicSolution, ConicStatus, InfeasibilityCertificate, LinearKind, SdpProblem, SolveOptions};
use crate::error::Result;

#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub row: usize,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct PsdBlock {
    pub dim: usize,
    pub constant: DMatrix<f64>,
    /// `terms[var]`
    pub terms: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Rows {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub constant: Vec<f64>,
}

impl Rows {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.rows.iter().map(|r| r.iter().map(|&(i, a)| a * v[i]).sum::<f64>()),
        )
    }

    fn adjoint_add(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        for (k, r) in self.rows.iter().enumerate() {
            for &(i, a) in r {
                out[i] += a * y[k];
            }
        }
    }

    fn constant(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.constant)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StdForm {
    pub num_vars: usize,
    pub c: DVector<f64>,
    pub psd: Vec<PsdBlock>,
    pub lp: Rows,
    pub eq: Rows,
}

impl PsdBlock {
    fn apply(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (i, terms) in self.terms.iter().enumerate() {
            if v[i] == 0.0 {
                continue;
            }
            for t in terms {
                for (&k, &g) in t.idx.iter().zip(&t.val) {
                    out[(t.row, k)] += v[i] * g;
                    out[(k, t.row)] += v[i] * g;
                }
            }
        }
        out
    }

    /// `out_i += ⟨F_i, Y⟩` for symmetric `Y`.
    fn adjoint_add(&self, y: &DMatrix<f64>, out: &mut DVector<f64>) {
        for (i, terms) in self.terms.iter().enumerate() {
            let mut acc = 0.0;
            for t in terms {
                for (&k, &g) in t.idx.iter().zip(&t.val) {
                    acc += g * y[(t.row, k)];
                }
            }
            out[i] += 2.0 * acc;
        }
    }

    fn coeff_norm(&self, i: usize) -> f64 {
        let mut m: DMatrix<f64> = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms[i] {
            for (&k, &g) in t.idx.iter().zip(&t.val) {
                m[(t.row, k)] += g;
                m[(k, t.row)] += g;
            }
        }
        m.norm()
    }
}

impl StdForm {
    fn data_norm(&self) -> f64 {
        let mut s: f64 = self.psd.iter().map(|b| b.constant.norm_squared()).sum();
        s += self.lp.constant().norm_squared() + self.eq.constant().norm_squared();
        s.sqrt()
    }

    fn eq_matrix(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.eq.len(), self.num_vars);
        for (k, r) in self.eq.rows.iter().enumerate() {
            for &(i, a) in r {
                e[(k, i)] += a;
            }
        }
        e
    }

    fn total_dim(&self) -> usize {
        self.psd.iter().map(|b| b.dim).sum::<usize>() + self.lp.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub xl: DVector<f64>,
    pub zl: DVector<f64>,
}

struct Residuals {
    rp: Vec<DMatrix<f64>>,
    rpl: DVector<f64>,
    re: DVector<f64>,
    rd: DVector<f64>,
    pobj: f64,
    dobj: f64,
    gap: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Optimal,
    Unbounded,
    /// Iterates suggest primal infeasibility or made no progress.
    Stalled,
}

struct Run {
    outcome: Outcome,
    it: Iterate,
    pobj: f64,
    dobj: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
    iters: usize,
    message: String,
}

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn residuals(p: &StdForm, it: &Iterate, b_norm: f64, c_norm: f64) -> Residuals {
    let m = p.num_vars;
    let mut rp = Vec::with_capacity(p.psd.len());
    let mut rd = p.c.clone();
    let mut at = DVector::zeros(m);
    let mut dobj = 0.0;
    let mut gap = 0.0;
    let mut pn = 0.0;
    for (b, blk) in p.psd.iter().enumerate() {
        let r = &blk.constant + blk.apply(&it.v) - &it.z[b];
        pn += r.norm_squared();
        rp.push(r);
        blk.adjoint_add(&it.x[b], &mut at);
        dobj -= blk.constant.dot(&it.x[b]);
        gap += it.x[b].dot(&it.z[b]);
    }
    let rpl = p.lp.constant() + p.lp.apply(&it.v) - &it.zl;
    pn += rpl.norm_squared();
    p.lp.adjoint_add(&it.xl, &mut at);
    dobj -= p.lp.constant().dot(&it.xl);
    gap += it.xl.dot(&it.zl);
    let re = -(p.eq.constant() + p.eq.apply(&it.v));
    pn += re.norm_squared();
    p.eq.adjoint_add(&it.y, &mut at);
    dobj -= p.eq.constant().dot(&it.y);
    rd -= at;
    let pobj = p.c.dot(&it.v);
    let denom = 1.0 + pobj.abs() + dobj.abs();
    let relgap = gap.max((pobj - dobj).abs()) / denom;
    Residuals {
        pinf: pn.sqrt() / (1.0 + b_norm),
        dinf: rd.norm() / (1.0 + c_norm),
        rp,
        rpl,
        re,
        rd,
        pobj,
        dobj,
        gap,
        relgap,
    }
}

/// Largest `α ≤ 1/τ`-scaled step keeping `S + α dS ⪰ 0`, given `chol(S)`.
fn max_step_psd(l: &DMatrix<f64>, ds: &DMatrix<f64>) -> f64 {
    let a = l.solve_lower_triangular(ds).expect("triangular solve");
    let b = l.solve_lower_triangular(&a.transpose()).expect("triangular solve");
    let lam = SymmetricEigen::new(sym(&b)).eigenvalues.min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step_lp(s: &DVector<f64>, ds: &DVector<f64>) -> f64 {
    s.iter()
        .zip(ds.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dv: DVector<f64>,
    dy: DVector<f64>,
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
}

struct Factors {
    zinv: Vec<DMatrix<f64>>,
    lx: Vec<DMatrix<f64>>,
    lz: Vec<DMatrix<f64>>,
    m_chol: Cholesky<f64, Dyn>,
    /// `M⁻¹Eᵀ` and the Cholesky factor of `E M⁻¹ Eᵀ`.
    eq: Option<(DMatrix<f64>, DMatrix<f64>, Cholesky<f64, Dyn>)>,
}

fn schur(p: &StdForm, it: &Iterate, zinv: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = p.num_vars;
    // Per block, per variable, per term: (X g, Z⁻¹ g).
    let pre: Vec<Vec<Vec<(DVector<f64>, DVector<f64>)>>> = p
        .psd
        .iter()
        .enumerate()
        .map(|(b, blk)| {
            blk.terms
                .iter()
                .map(|terms| {
                    terms
                        .iter()
                        .map(|t| {
                            let mut xg = DVector::zeros(blk.dim);
                            let mut zg = DVector::zeros(blk.dim);
                            for (&k, &g) in t.idx.iter().zip(&t.val) {
                                xg.axpy(g, &it.x[b].column(k), 1.0);
                                zg.axpy(g, &zinv[b].column(k), 1.0);
                            }
                            (xg, zg)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; m - i];
            for (b, blk) in p.psd.iter().enumerate() {
                let (x, zi) = (&it.x[b], &zinv[b]);
                for (t, term) in blk.terms[i].iter().enumerate() {
                    let (xg, zg) = &pre[b][i][t];
                    let r = term.row;
                    for j in i..m {
                        let mut acc = 0.0;
                        for (u, h) in blk.terms[j].iter().enumerate() {
                            let (xh, zh) = &pre[b][j][u];
                            let s = h.row;
                            let (mut hxg, mut hzg) = (0.0, 0.0);
                            for (&k, &hv) in h.idx.iter().zip(&h.val) {
                                hxg += hv * xg[k];
                                hzg += hv * zg[k];
                            }
                            acc += xg[s] * zh[r] + hxg * zi[(s, r)] + x[(r, s)] * hzg + xh[r] * zg[s];
                        }
                        row[j - i] += acc;
                    }
                }
            }
            row
        })
        .collect();
    let mut mat = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (o, val) in row.into_iter().enumerate() {
            mat[(i, i + o)] = val;
            mat[(i + o, i)] = val;
        }
    }
    for (k, r) in p.lp.rows.iter().enumerate() {
        let d = it.xl[k] / it.zl[k];
        for &(i, a) in r {
            for &(j, b) in r {
                mat[(i, j)] += a * b * d;
            }
        }
    }
    mat
}

fn regularized_cholesky(mut mat: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(mat.clone()) {
        return Some(c);
    }
    let scale = mat.diagonal().amax().max(1e-300);
    let mut delta = 1e-14 * scale;
    for _ in 0..8 {
        for i in 0..mat.nrows() {
            mat[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(mat.clone()) {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

fn factor(p: &StdForm, it: &Iterate) -> Option<Factors> {
    let mut zinv = Vec::new();
    let mut lx = Vec::new();
    let mut lz = Vec::new();
    for b in 0..p.psd.len() {
        let cz = Cholesky::new(sym(&it.z[b]))?;
        let cx = Cholesky::new(sym(&it.x[b]))?;
        zinv.push(sym(&cz.inverse()));
        lz.push(cz.l());
        lx.push(cx.l());
    }
    let m_chol = regularized_cholesky(schur(p, it, &zinv))?;
    let eq = if p.eq.len() > 0 {
        let e = p.eq_matrix();
        let minv_et = m_chol.solve(&e.transpose());
        let se = &e * &minv_et;
        let c = regularized_cholesky(sym(&se))?;
        Some((e, minv_et, c))
    } else {
        None
    };
    Some(Factors {
        zinv,
        lx,
        lz,
        m_chol,
        eq,
    })
}

fn direction(
    p: &StdForm,
    it: &Iterate,
    res: &Residuals,
    f: &Factors,
    sigma_mu: f64,
    corr: Option<(&[DMatrix<f64>], &DVector<f64>)>,
) -> Direction {
    let m = p.num_vars;
    let mut h = DVector::zeros(m);
    let mut base = Vec::with_capacity(p.psd.len());
    for (b, blk) in p.psd.iter().enumerate() {
        let mut t = &f.zinv[b] * sigma_mu - &it.x[b];
        if let Some((c, _)) = corr {
            t -= &c[b];
        }
        let full = sym(&(&t - &it.x[b] * &res.rp[b] * &f.zinv[b]));
        blk.adjoint_add(&full, &mut h);
        base.push(t);
    }
    let mut tl = it.zl.map(|z| sigma_mu / z) - &it.xl;
    if let Some((_, cl)) = corr {
        tl -= cl;
    }
    let full_l = &tl - it.xl.component_mul(&res.rpl).component_div(&it.zl);
    p.lp.adjoint_add(&full_l, &mut h);

    let rhs = h - &res.rd;
    let u = f.m_chol.solve(&rhs);
    let (dv, dy) = match &f.eq {
        Some((e, minv_et, c)) => {
            let dy = c.solve(&(&res.re - e * &u));
            (u + minv_et * &dy, dy)
        }
        None => (u, DVector::zeros(0)),
    };
    let mut dx = Vec::with_capacity(p.psd.len());
    let mut dz = Vec::with_capacity(p.psd.len());
    for (b, blk) in p.psd.iter().enumerate() {
        let dzb = blk.apply(&dv) + &res.rp[b];
        let dxb = &base[b] - sym(&(&it.x[b] * &dzb * &f.zinv[b]));
        dx.push(sym(&dxb));
        dz.push(dzb);
    }
    let dzl = p.lp.apply(&dv) + &res.rpl;
    let dxl = &tl - it.xl.component_mul(&dzl).component_div(&it.zl);
    Direction {
        dv,
        dy,
        dx,
        dz,
        dxl,
        dzl,
    }
}

fn step_lengths(p: &StdForm, it: &Iterate, f: &Factors, d: &Direction) -> (f64, f64) {
    let mut ax = max_step_lp(&it.xl, &d.dxl);
    let mut az = max_step_lp(&it.zl, &d.dzl);
    for b in 0..p.psd.len() {
        ax = ax.min(max_step_psd(&f.lx[b], &d.dx[b]));
        az = az.min(max_step_psd(&f.lz[b], &d.dz[b]));
    }
    (ax, az)
}

fn initial_point(p: &StdForm) -> Iterate {
    let m = p.num_vars;
    let mut x = Vec::new();
    let mut z = Vec::new();
    for blk in &p.psd {
        let n = blk.dim as f64;
        let mut xi: f64 = 10f64.max(n.sqrt());
        let mut eta: f64 = 10f64.max(n.sqrt()).max(blk.constant.norm());
        for i in 0..m {
            if blk.terms[i].is_empty() {
                continue;
            }
            let fi = blk.coeff_norm(i);
            xi = xi.max(n * (1.0 + p.c[i].abs()) / (1.0 + fi));
            eta = eta.max(fi);
        }
        x.push(DMatrix::identity(blk.dim, blk.dim) * xi);
        z.push(DMatrix::identity(blk.dim, blk.dim) * eta);
    }
    let mut xi_l: f64 = 10.0;
    let mut eta_l: f64 = 10f64.max(p.lp.constant().amax());
    let mut col = vec![0.0f64; m];
    for r in &p.lp.rows {
        for &(i, a) in r {
            col[i] += a * a;
        }
    }
    for i in 0..m {
        if col[i] > 0.0 {
            let a = col[i].sqrt();
            xi_l = xi_l.max((1.0 + p.c[i].abs()) / (1.0 + a));
            eta_l = eta_l.max(a);
        }
    }
    Iterate {
        v: DVector::zeros(m),
        y: DVector::zeros(p.eq.len()),
        x,
        z,
        xl: DVector::from_element(p.lp.len(), xi_l),
        zl: DVector::from_element(p.lp.len(), eta_l),
    }
}

fn run(p: &StdForm, opts: &SolveOptions) -> Run {
    let n_total = p.total_dim().max(1) as f64;
    let b_norm = p.data_norm();
    let c_norm = p.c.norm();
    let mut it = initial_point(p);
    let mut best: Option<(f64, Iterate, usize)> = None;
    let mut message = String::from("iteration limit reached");
    let mut outcome = Outcome::Stalled;
    let mut iters = 0;
    loop {
        let res = residuals(p, &it, b_norm, c_norm);
        let merit = (res.relgap / opts.gap_tol).max(res.pinf / opts.feas_tol).max(res.dinf / opts.feas_tol);
        if merit.is_finite() && best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, it.clone(), iters));
        }
        log::debug!(
            "ipm {iters:3}: pobj {:+.9e} dobj {:+.9e} gap {:.2e} pinf {:.2e} dinf {:.2e}",
            res.pobj,
            res.dobj,
            res.relgap,
            res.pinf,
            res.dinf
        );
        if res.relgap <= opts.gap_tol && res.pinf <= opts.feas_tol && res.dinf <= opts.feas_tol {
            outcome = Outcome::Optimal;
            message = "converged".into();
            break;
        }
        if res.pinf <= opts.feas_tol && res.pobj < -1e12 * (1.0 + c_norm) {
            outcome = Outcome::Unbounded;
            message = "primal objective diverges to −∞".into();
            break;
        }
        // Dual ray: a growing dual objective with stationarity nearly free of c.
        if res.dobj > 0.0 {
            let ray = (&p.c - &res.rd).norm() / res.dobj;
            if ray < 1e-8 && res.dobj > 1e8 * (1.0 + c_norm) {
                message = "dual iterates approach an infeasibility ray".into();
                break;
            }
        }
        if iters >= opts.max_iters {
            break;
        }
        let Some(f) = factor(p, &it) else {
            message = "factorization failed".into();
            break;
        };
        let mu = res.gap / n_total;
        let aff = direction(p, &it, &res, &f, 0.0, None);
        let (ax_a, az_a) = step_lengths(p, &it, &f, &aff);
        let (ax_a, az_a) = (ax_a.min(1.0), az_a.min(1.0));
        let mut mu_aff = 0.0;
        for b in 0..p.psd.len() {
            let xa = &it.x[b] + &aff.dx[b] * ax_a;
            let za = &it.z[b] + &aff.dz[b] * az_a;
            mu_aff += xa.dot(&za);
        }
        mu_aff += (&it.xl + &aff.dxl * ax_a).dot(&(&it.zl + &aff.dzl * az_a));
        mu_aff /= n_total;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr: Vec<DMatrix<f64>> = (0..p.psd.len())
            .map(|b| sym(&(&aff.dx[b] * &aff.dz[b] * &f.zinv[b])))
            .collect();
        let corr_l = aff.dxl.component_mul(&aff.dzl).component_div(&it.zl);
        let d = direction(p, &it, &res, &f, sigma * mu, Some((&corr, &corr_l)));
        let (ax, az) = step_lengths(p, &it, &f, &d);
        let tau = 0.9 + 0.09 * ax_a.min(az_a);
        let (ax, az) = ((tau * ax).min(1.0), (tau * az).min(1.0));
        if !(ax.is_finite() && az.is_finite()) || (ax < 1e-10 && az < 1e-10) {
            message = "step length collapsed".into();
            break;
        }
        it.v.axpy(az, &d.dv, 1.0);
        it.zl.axpy(az, &d.dzl, 1.0);
        it.xl.axpy(ax, &d.dxl, 1.0);
        if !d.dy.is_empty() {
            it.y.axpy(ax, &d.dy, 1.0);
        }
        for b in 0..p.psd.len() {
            it.x[b] = sym(&(&it.x[b] + &d.dx[b] * ax));
            it.z[b] = sym(&(&it.z[b] + &d.dz[b] * az));
        }
        iters += 1;
        let blown = it.x.iter().any(|x| x.amax() > 1e15) || it.xl.amax() > 1e15;
        if blown || !it.v.iter().all(|x| x.is_finite()) {
            message = "iterates diverged".into();
            break;
        }
    }
    if outcome != Outcome::Optimal {
        if let Some((_, b, _)) = best {
            it = b;
        }
    }
    let res = residuals(p, &it, b_norm, c_norm);
    Run {
        outcome,
        it,
        pobj: res.pobj,
        dobj: res.dobj,
        relgap: res.relgap,
        pinf: res.pinf,
        dinf: res.dinf,
        iters,
        message,
    }
}

/// `min t  s.t.  F(v) + tI ⪰ 0,  Av + b + t ≥ 0,  t ≥ −1,  Ev + e = 0`.
/// The extra variable is last.
fn phase_one(p: &StdForm) -> StdForm {
    let m = p.num_vars;
    let mut c = DVector::zeros(m + 1);
    c[m] = 1.0;
    let psd = p
        .psd
        .iter()
        .map(|blk| {
            let mut terms = blk.terms.clone();
            terms.push(
                (0..blk.dim)
                    .map(|r| Term {
                        row: r,
                        idx: vec![r],
                        val: vec![0.5],
                    })
                    .collect(),
            );
            PsdBlock {
                dim: blk.dim,
                constant: blk.constant.clone(),
                terms,
            }
        })
        .collect();
    let mut lp = p.lp.clone();
    for r in &mut lp.rows {
        r.push((m, 1.0));
    }
    lp.rows.push(vec![(m, 1.0)]);
    lp.constant.push(1.0);
    StdForm {
        num_vars: m + 1,
        c,
        psd,
        lp,
        eq: p.eq.clone(),
    }
}

fn expand_x(r: &Reduced, v: &DVector<f64>) -> Vec<f64> {
    let mut x: Vec<f64> = r.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (k, &i) in r.free_vars.iter().enumerate() {
        x[i] = v[k];
    }
    x
}

fn expand_lmi(problem: &SdpProblem, r: &Reduced, blocks: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    problem
        .lmis
        .iter()
        .enumerate()
        .map(|(li, lmi)| {
            let mut out = DMatrix::zeros(lmi.dim(), lmi.dim());
            if let Some(b) = r.lmi_block[li] {
                let rows = &r.lmi_rows[li];
                for (a, &ra) in rows.iter().enumerate() {
                    for (c, &rc) in rows.iter().enumerate() {
                        out[(ra, rc)] = blocks[b][(a, c)];
                    }
                }
            }
            out
        })
        .collect()
}

fn certificate_from(problem: &SdpProblem, r: &Reduced, it: &Iterate) -> InfeasibilityCertificate {
    let p = &r.std;
    let m = p.num_vars;
    let n_lp = p.lp.len();
    let xl = it.xl.rows(0, n_lp).into_owned();
    let mut stat = DVector::zeros(m);
    let mut pairing = 0.0;
    for (b, blk) in p.psd.iter().enumerate() {
        let mut tmp = DVector::zeros(m);
        let trimmed = PsdBlock {
            dim: blk.dim,
            constant: blk.constant.clone(),
            terms: blk.terms[..m].to_vec(),
        };
        trimmed.adjoint_add(&it.x[b], &mut tmp);
        stat += tmp;
        pairing += blk.constant.dot(&it.x[b]);
    }
    p.lp.adjoint_add(&xl, &mut stat);
    p.eq.adjoint_add(&it.y, &mut stat);
    pairing += p.lp.constant().dot(&xl) + p.eq.constant().dot(&it.y);

    let mut linear = vec![0.0; problem.linear.len()];
    let mut bounds = vec![(0.0, 0.0); problem.bounds.len()];
    for (k, o) in r.lp_origin.iter().enumerate() {
        match *o {
            RowOrigin::Linear(li) => linear[li] = xl[k],
            RowOrigin::Lower(bi) => bounds[bi].0 = xl[k],
            RowOrigin::Upper(bi) => bounds[bi].1 = xl[k],
        }
    }
    for (k, &li) in r.eq_origin.iter().enumerate() {
        linear[li] = it.y[k];
    }
    InfeasibilityCertificate {
        lmi_multipliers: expand_lmi(problem, r, &it.x),
        linear_multipliers: linear,
        bound_multipliers: bounds,
        stationarity_residual: stat.amax(),
        constant_pairing: pairing,
    }
}

fn presolve_certificate(problem: &SdpProblem, origin: RowOrigin, value: f64) -> InfeasibilityCertificate {
    let mut linear = vec![0.0; problem.linear.len()];
    let mut bounds = vec![(0.0, 0.0); problem.bounds.len()];
    let mut pairing = value;
    match origin {
        RowOrigin::Linear(li) => {
            // For a violated equality the sign of the multiplier follows the residual.
            if problem.linear[li].kind == LinearKind::Equal {
                pairing = -value.abs();
            }
            linear[li] = 1.0;
        }
        RowOrigin::Lower(bi) => bounds[bi].0 = 1.0,
        RowOrigin::Upper(bi) => bounds[bi].1 = 1.0,
    }
    InfeasibilityCertificate {
        lmi_multipliers: problem.lmis.iter().map(|l| DMatrix::zeros(l.dim(), l.dim())).collect(),
        linear_multipliers: linear,
        bound_multipliers: bounds,
        stationarity_residual: 0.0,
        constant_pairing: pairing,
    }
}

/// Checks a variable-free standard form directly.
fn constant_feasible(p: &StdForm, tol: f64) -> bool {
    p.psd.iter().all(|b| {
        let scale = 1.0 + b.constant.amax();
        SymmetricEigen::new(b.constant.clone()).eigenvalues.min() >= -tol * scale
    }) && p.lp.constant.iter().all(|&c| c >= -tol * (1.0 + c.abs()))
        && p.eq.constant.iter().all(|&c| c.abs() <= tol * (1.0 + c.abs()))
}

/// Runs on `c / ‖c‖∞` so that the iterates do not depend on the objective's scale.
fn run_normalized(p: &StdForm, opts: &SolveOptions) -> Run {
    let cs = p.c.amax();
    if cs == 0.0 || cs == 1.0 {
        return run(p, opts);
    }
    let mut q = p.clone();
    q.c /= cs;
    let mut r = run(&q, opts);
    r.pobj *= cs;
    r.dobj *= cs;
    r.it.y *= cs;
    r.it.xl *= cs;
    for x in &mut r.it.x {
        *x *= cs;
    }
    r
}

pub(crate) fn solve_problem(problem: &SdpProblem, opts: &SolveOptions) -> Result<ConicSolution> {
    let reduced = presolve(problem);
    let p = &reduced.std;
    let empty = |status, message: String, certificate| ConicSolution {
        status,
        x: expand_x(&reduced, &DVector::zeros(p.num_vars)),
        primal_objective: problem.objective_value(&expand_x(&reduced, &DVector::zeros(p.num_vars))),
        dual_objective: f64::NAN,
        relative_gap: f64::NAN,
        primal_infeasibility: f64::NAN,
        dual_infeasibility: f64::NAN,
        iterations: 0,
        lmi_duals: problem.lmis.iter().map(|l| DMatrix::zeros(l.dim(), l.dim())).collect(),
        certificate,
        message,
    };
    if let Some((origin, value)) = reduced.infeasible {
        let cert = presolve_certificate(problem, origin, value);
        return Ok(empty(ConicStatus::Infeasible, format!("presolve: {origin:?} violated by {value:e}"), Some(cert)));
    }
    if p.num_vars == 0 && constant_feasible(p, opts.feas_tol) {
        return Ok(empty(ConicStatus::Optimal, "all variables fixed by presolve".into(), None));
    }

    let main = if p.num_vars > 0 { Some(run_normalized(p, opts)) } else { None };
    if let Some(r) = &main {
        if r.outcome != Outcome::Stalled {
            let status = match r.outcome {
                Outcome::Optimal => ConicStatus::Optimal,
                _ => ConicStatus::Unbounded,
            };
            return Ok(ConicSolution {
                status,
                x: expand_x(&reduced, &r.it.v),
                primal_objective: r.pobj + reduced.objective_offset,
                dual_objective: r.dobj + reduced.objective_offset,
                relative_gap: r.relgap,
                primal_infeasibility: r.pinf,
                dual_infeasibility: r.dinf,
                iterations: r.iters,
                lmi_duals: expand_lmi(problem, &reduced, &r.it.x),
                certificate: None,
                message: r.message.clone(),
            });
        }
    }

    // Decide feasibility with an auxiliary problem that is always strictly feasible.
    let aux = phase_one(p);
    let ph = run(&aux, opts);
    let t = ph.it.v[p.num_vars];
    let threshold = 1e-6 * (1.0 + p.psd.iter().map(|b| b.constant.amax()).fold(0.0, f64::max));
    let main_iters = main.as_ref().map_or(0, |r| r.iters);
    let fallback = main.unwrap_or(Run {
        outcome: Outcome::Stalled,
        it: Iterate {
            v: DVector::zeros(0),
            y: DVector::zeros(p.eq.len()),
            x: p.psd.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect(),
            z: p.psd.iter().map(|b| b.constant.clone()).collect(),
            xl: DVector::zeros(p.lp.len()),
            zl: p.lp.constant(),
        },
        pobj: 0.0,
        dobj: f64::NAN,
        relgap: f64::NAN,
        pinf: f64::NAN,
        dinf: f64::NAN,
        iters: 0,
        message: String::new(),
    });
    let certified = ph.outcome == Outcome::Optimal && t > threshold;
    if certified {
        let cert = certificate_from(problem, &reduced, &ph.it);
        return Ok(ConicSolution {
            status: ConicStatus::Infeasible,
            x: expand_x(&reduced, &fallback.it.v),
            primal_objective: fallback.pobj + reduced.objective_offset,
            dual_objective: fallback.dobj + reduced.objective_offset,
            relative_gap: fallback.relgap,
            primal_infeasibility: fallback.pinf,
            dual_infeasibility: fallback.dinf,
            iterations: main_iters + ph.iters,
            lmi_duals: expand_lmi(problem, &reduced, &fallback.it.x),
            certificate: Some(cert),
            message: format!("minimal uniform constraint violation {t:.3e}"),
        });
    }
    Ok(ConicSolution {
        status: ConicStatus::NumericalFailure,
        x: expand_x(&reduced, &fallback.it.v),
        primal_objective: fallback.pobj + reduced.objective_offset,
        dual_objective: fallback.dobj + reduced.objective_offset,
        relative_gap: fallback.relgap,
        primal_infeasibility: fallback.pinf,
        dual_infeasibility: fallback.dinf,
        iterations: main_iters + ph.iters,
        lmi_duals: expand_lmi(problem, &reduced, &fallback.it.x),
        certificate: None,
        message: format!(
            "{}; feasibility problem {:?} with violation {t:.3e}",
            fallback.message, ph.outcome
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, LinearConstraint, LmiConstraint, SymSparse, VarBound, VarIndexMap, VarShape};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn scalar_psd_cone() {
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(1));
        let mut p = SdpProblem::new(map);
        p.objective[0] = 1.0;
        let mut l = LmiConstraint::new("x", 1);
        let mut f = SymSparse::new(1);
        f.add(0, 0, 1.0);
        l.coeffs.push((0, f));
        p.lmis.push(l);
        p.bounds.push(VarBound { var: 0, lower: None, upper: Some(5.0) });
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal, "{}", s.message);
        assert!(s.x[0].abs() < 1e-6, "{}", s.x[0]);
    }

    #[test]
    fn trace_minimization_hits_lower_matrix() {
        let mut map = VarIndexMap::new();
        let w = map.add("W", VarShape::Symmetric(2));
        let mut p = SdpProblem::new(map.clone());
        let mut l = LmiConstraint::new("W-D", 2);
        l.constant.add(0, 0, -1.0);
        l.constant.add(1, 1, -2.0);
        for j in 0..2 {
            for i in j..2 {
                let (slot, scale) = map.symmetric(w, i, j);
                let mut f = SymSparse::new(2);
                f.add(i, j, scale);
                l.coeffs.push((slot, f));
                if i == j {
                    p.objective[slot] = 1.0;
                }
            }
        }
        p.lmis.push(l);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal, "{}", s.message);
        assert!((s.primal_objective - 3.0).abs() < 1e-6);
        let wv = map.symmetric_value(w, &s.x);
        assert!((wv - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).amax() < 1e-5);
    }

    #[test]
    fn infeasible_problem_yields_certificate() {
        // [[x, 1], [1, −x]] ⪰ 0 has no solution.
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(1));
        let mut p = SdpProblem::new(map);
        p.objective[0] = 1.0;
        let mut l = LmiConstraint::new("L", 2);
        l.constant.add(0, 1, 1.0);
        let mut f = SymSparse::new(2);
        f.add(0, 0, 1.0);
        f.add(1, 1, -1.0);
        l.coeffs.push((0, f));
        p.lmis.push(l);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, ConicStatus::Infeasible, "{}", s.message);
        let c = s.certificate.unwrap();
        assert!(c.constant_pairing < -1e-3);
        assert!(c.stationarity_residual < 1e-6);
        assert!(SymmetricEigen::new(c.lmi_multipliers[0].clone()).eigenvalues.min() > -1e-9);
    }

    #[test]
    fn equality_constraints_and_lp_rows() {
        // min x0 + 2 x1 s.t. x0 + x1 = 1, x ≥ 0, x0 ≥ x1²  →  x = (1, 0).
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(2));
        let mut p = SdpProblem::new(map);
        p.objective = vec![1.0, 2.0];
        p.linear.push(LinearConstraint {
            name: "sum".into(),
            coeffs: vec![(0, 1.0), (1, 1.0)],
            constant: -1.0,
            kind: LinearKind::Equal,
        });
        for v in 0..2 {
            p.bounds.push(VarBound { var: v, lower: Some(0.0), upper: None });
        }
        let mut l = LmiConstraint::new("L", 2);
        l.constant.add(1, 1, 1.0);
        let mut f0 = SymSparse::new(2);
        f0.add(0, 0, 1.0);
        let mut f1 = SymSparse::new(2);
        f1.add(0, 1, 1.0);
        l.coeffs.push((0, f0));
        l.coeffs.push((1, f1));
        p.lmis.push(l);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal, "{}", s.message);
        assert!((s.x[0] - 1.0).abs() < 1e-6 && s.x[1].abs() < 1e-6, "{:?}", s.x);
    }

    #[test]
    fn unbounded_linear_objective() {
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(1));
        let mut p = SdpProblem::new(map);
        p.objective[0] = -1.0;
        let mut l = LmiConstraint::new("x", 1);
        let mut f = SymSparse::new(1);
        f.add(0, 0, 1.0);
        l.coeffs.push((0, f));
        p.lmis.push(l);
        let s = solve(&p, &opts()).unwrap();
        assert_ne!(s.status, ConicStatus::Optimal);
        assert_ne!(s.status, ConicStatus::Infeasible);
    }

    #[test]
    fn presolve_infeasibility_is_certified() {
        let mut map = VarIndexMap::new();
        map.add("x", VarShape::Vector(1));
        let mut p = SdpProblem::new(map);
        p.bounds.push(VarBound { var: 0, lower: Some(2.0), upper: Some(2.0) });
        p.linear.push(LinearConstraint {
            name: "x<=1".into(),
            coeffs: vec![(0, -1.0)],
            constant: 1.0,
            kind: LinearKind::GreaterEq,
        });
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, ConicStatus::Infeasible);
        assert!(s.certificate.unwrap().constant_pairing < 0.0);
    }
}
