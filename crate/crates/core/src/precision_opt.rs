//! Minimum-precision schedules: the weighted ℓ1 semidefinite program over a
//! batch horizon, its reweighted refinement, and thresholded reports.
//!
//! Stacked precision layout: entry `(k, ch)` of a horizon with `m_y` channels
//! per step lives at index `k·m_y + ch`, `k = 0..p`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{
    self, ConicStatus, GroupId, InfeasibilityCertificate, LinearConstraint, LinearKind, LmiConstraint,
    SdpProblem, SolveOptions, SymSparse, VarBound, VarIndexMap, VarShape,
};
use crate::error::{check_dim, Error, Result};
use crate::kalman::{batch_posterior_stats, optimal_batch_gain, BatchSystem};
use crate::linalg::{min_eigenvalue, symmetrize};

/// One horizon's scheduling problem.
#[derive(Debug, Clone)]
pub struct PrecisionProblem {
    pub batch: BatchSystem,
    /// Bound on the trace of the posterior covariance at the horizon end.
    pub gamma: f64,
    /// `p × m_y` upper bounds; zero entries force the channel off.
    pub s_max: DMatrix<f64>,
    /// Objective weights in stacked layout.
    pub rho: Vec<f64>,
}

impl PrecisionProblem {
    /// Unit weights.
    pub fn new(batch: BatchSystem, gamma: f64, s_max: DMatrix<f64>) -> Result<Self> {
        let rho = vec![1.0; batch.measurement_dim()];
        Self::with_weights(batch, gamma, s_max, rho)
    }

    pub fn with_weights(batch: BatchSystem, gamma: f64, s_max: DMatrix<f64>, rho: Vec<f64>) -> Result<Self> {
        check_dim("s_max rows (steps)", batch.horizon(), s_max.nrows())?;
        check_dim("s_max columns (channels)", batch.channels_per_step(), s_max.ncols())?;
        check_dim("weight vector", batch.measurement_dim(), rho.len())?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if s_max.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("s_max entries must be finite and non-negative".into()));
        }
        if rho.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        Ok(Self { batch, gamma, s_max, rho })
    }

    /// Upper bounds in stacked layout.
    pub fn bounds(&self) -> Vec<f64> {
        let (p, my) = (self.batch.horizon(), self.batch.channels_per_step());
        (0..p * my).map(|i| self.s_max[(i / my, i % my)]).collect()
    }

    pub fn max_bound(&self) -> f64 {
        self.s_max.max()
    }
}

/// An assembled program plus the map back to `(W, G, s̄)`.
///
/// Variables may be scaled: `W = w·W'`, `s̄ = σ·s̄'`, `G = √(wσ)·G'`, with the
/// LMI taken under the congruence `diag(I/√w, I, I/√σ)`. Unit factors give
/// the program in natural units.
#[derive(Debug, Clone)]
pub struct AssembledSdp {
    pub problem: SdpProblem,
    pub w: GroupId,
    pub g: GroupId,
    pub s: GroupId,
    pub w_scale: f64,
    pub s_scale: f64,
    /// Natural objective = `objective_scale · problem objective`.
    pub objective_scale: f64,
}

impl AssembledSdp {
    /// `(W, G, s̄)` in natural units.
    pub fn unscale(&self, v: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
        let vars = &self.problem.vars;
        let w = vars.symmetric_value(self.w, v) * self.w_scale;
        let g = vars.matrix_value(self.g, v) * (self.w_scale * self.s_scale).sqrt();
        let s = vars.vector_value(self.s, v).iter().map(|x| x * self.s_scale).collect();
        (w, g, s)
    }

    /// Inverse of [`AssembledSdp::unscale`].
    pub fn pack(&self, w: &DMatrix<f64>, g: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
        let vars = &self.problem.vars;
        let mut v = vec![0.0; vars.len()];
        let n = w.nrows();
        for j in 0..n {
            for i in j..n {
                let (slot, scale) = vars.symmetric(self.w, i, j);
                v[slot] = w[(i, j)] / scale / self.w_scale;
            }
        }
        let gs = (self.w_scale * self.s_scale).sqrt();
        for c in 0..g.ncols() {
            for r in 0..g.nrows() {
                v[vars.matrix(self.g, r, c)] = g[(r, c)] / gs;
            }
        }
        for (i, &x) in s.iter().enumerate() {
            v[vars.vector(self.s, i)] = x / self.s_scale;
        }
        v
    }
}

/// The program in natural units: variables `W` (symmetric `n×n`),
/// `G = M K̄` (`n × m_y p`), `s̄`; constraints
/// `[[W, (M − G C̄) Σ̄^½, G], [∗, I, 0], [∗, ∗, diag(s̄)]] ⪰ 0`,
/// `trace W ≤ γ`, `0 ≤ s̄ ≤ s_max`; objective `ρᵀs̄`.
pub fn assemble_lmi(problem: &PrecisionProblem) -> Result<AssembledSdp> {
    assemble_scaled(problem, 1.0, 1.0)
}

/// The program in the variables `W' = W/w_scale`, `s̄' = s̄/s_scale`.
/// [`solve_precisions`] uses `w_scale = γ` and `s_scale = max(s_max)`.
pub fn assemble_scaled(problem: &PrecisionProblem, w_scale: f64, s_scale: f64) -> Result<AssembledSdp> {
    let batch = &problem.batch;
    let n = batch.state_dim();
    let p = batch.horizon();
    let np = n * p;
    let my = batch.measurement_dim();
    check_dim("stacked covariance square root", np, batch.cov_sqrt.nrows())?;
    check_dim("stacked measurement matrix", my, batch.c_bar.nrows())?;
    let dim = n + np + my;
    let mut vars = VarIndexMap::new();
    let w = vars.add("W", VarShape::Symmetric(n));
    let g = vars.add("G", VarShape::Matrix { rows: n, cols: my });
    let s = vars.add("s", VarShape::Vector(my));
    let mut sdp = SdpProblem::new(vars.clone());

    let root = &batch.cov_sqrt;
    let k = &batch.c_bar * root;
    let sq_w = w_scale.sqrt();
    let sq_s = s_scale.sqrt();
    let mut lmi = LmiConstraint::new("covariance bound", dim);
    // M Σ̄^½ is the last block row of the square root.
    for i in 0..n {
        for c in 0..np {
            let v = root[(np - n + i, c)] / sq_w;
            if v != 0.0 {
                lmi.constant.add(i, n + c, v);
            }
        }
    }
    for c in 0..np {
        lmi.constant.add(n + c, n + c, 1.0);
    }
    for j in 0..n {
        for i in j..n {
            let (slot, scale) = vars.symmetric(w, i, j);
            let mut f = SymSparse::new(dim);
            f.add(i, j, scale);
            lmi.coeffs.push((slot, f));
        }
    }
    for j in 0..my {
        for i in 0..n {
            let mut f = SymSparse::new(dim);
            for c in 0..np {
                let v = -sq_s * k[(j, c)];
                if v != 0.0 {
                    f.add(i, n + c, v);
                }
            }
            f.add(i, n + np + j, 1.0);
            lmi.coeffs.push((vars.matrix(g, i, j), f));
        }
    }
    for j in 0..my {
        let mut f = SymSparse::new(dim);
        f.add(n + np + j, n + np + j, 1.0);
        lmi.coeffs.push((vars.vector(s, j), f));
    }
    sdp.lmis.push(lmi);

    sdp.linear.push(LinearConstraint {
        name: "trace bound".into(),
        coeffs: (0..n).map(|i| (vars.symmetric(w, i, i).0, -1.0)).collect(),
        constant: problem.gamma / w_scale,
        kind: LinearKind::GreaterEq,
    });
    let bounds = problem.bounds();
    for (j, &hi) in bounds.iter().enumerate() {
        let var = vars.vector(s, j);
        sdp.bounds.push(VarBound {
            var,
            lower: Some(0.0),
            upper: Some(hi / s_scale),
        });
        if hi == 0.0 {
            for i in 0..n {
                sdp.bounds.push(VarBound {
                    var: vars.matrix(g, i, j),
                    lower: Some(0.0),
                    upper: Some(0.0),
                });
            }
        }
    }
    let rho_max = problem.rho.iter().cloned().fold(0.0, f64::max);
    let objective_scale = if w_scale == 1.0 && s_scale == 1.0 { 1.0 } else { s_scale * rho_max };
    for (j, &r) in problem.rho.iter().enumerate() {
        sdp.objective[vars.vector(s, j)] = r * s_scale / objective_scale;
    }
    Ok(AssembledSdp {
        problem: sdp,
        w,
        g,
        s,
        w_scale,
        s_scale,
        objective_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Summary of one weighted solve inside the reweighting loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReweightStep {
    pub weighted_objective: f64,
    pub l1_norm: f64,
    pub active_count: usize,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct PrecisionSchedule {
    pub s: Vec<f64>,
    pub gain: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub status: ScheduleStatus,
    /// `ρᵀs̄` with the problem's weights.
    pub objective: f64,
    /// Weighted solves performed.
    pub iterations: usize,
    pub active_count: usize,
    pub solver_iterations: usize,
    pub relative_gap: f64,
    pub message: String,
    pub certificate: Option<InfeasibilityCertificate>,
    pub history: Vec<ReweightStep>,
    /// Weights of the solve that produced `s`.
    pub weights: Vec<f64>,
    horizon: usize,
    channels: usize,
}

impl PrecisionSchedule {
    /// `p × m_y` grid of the raw precisions.
    pub fn grid(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.horizon, self.channels, |k, ch| self.s[k * self.channels + ch])
    }
}

/// Entries counted as active: `s̄ᵢ > rel · max(s_max)`.
pub fn active_set(s: &[f64], max_bound: f64, rel: f64) -> Vec<usize> {
    let thr = rel * max_bound;
    (0..s.len()).filter(|&i| s[i] > thr).collect()
}

pub const DEFAULT_ACTIVE_THRESHOLD: f64 = 1e-6;

/// Solves the weighted ℓ1 program once.
pub fn solve_precisions(problem: &PrecisionProblem, opts: &SolveOptions) -> Result<PrecisionSchedule> {
    let n = problem.batch.state_dim();
    let my = problem.batch.measurement_dim();
    let s_scale = if problem.max_bound() > 0.0 { problem.max_bound() } else { 1.0 };
    let asm = assemble_scaled(problem, problem.gamma, s_scale)?;
    let sol = conic::solve(&asm.problem, opts)?;
    let (w, gain, s) = asm.unscale(&sol.x);
    let status = match sol.status {
        ConicStatus::Optimal => ScheduleStatus::Optimal,
        ConicStatus::Infeasible => ScheduleStatus::Infeasible,
        ConicStatus::Unbounded | ConicStatus::NumericalFailure => ScheduleStatus::NumericalFailure,
    };
    let objective = problem.rho.iter().zip(&s).map(|(r, x)| r * x).sum();
    let active_count = active_set(&s, problem.max_bound(), DEFAULT_ACTIVE_THRESHOLD).len();
    log::info!(
        "weighted solve: {:?} after {} iterations, objective {objective:.6e}, {active_count} active",
        sol.status,
        sol.iterations
    );
    debug_assert_eq!(gain.shape(), (n, my));
    Ok(PrecisionSchedule {
        status,
        objective,
        iterations: 1,
        active_count,
        solver_iterations: sol.iterations,
        relative_gap: sol.relative_gap,
        message: sol.message,
        certificate: sol.certificate,
        history: vec![ReweightStep {
            weighted_objective: objective,
            l1_norm: s.iter().sum(),
            active_count,
            solver_iterations: sol.iterations,
        }],
        s,
        gain,
        w,
        weights: problem.rho.clone(),
        horizon: problem.batch.horizon(),
        channels: problem.batch.channels_per_step(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReweightOptions {
    /// Weight offset; `None` means `1e-3 · max(s_max)`.
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    /// Active-set threshold relative to `max(s_max)`.
    pub active_threshold: f64,
}

impl Default for ReweightOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_iters: 5,
            active_threshold: DEFAULT_ACTIVE_THRESHOLD,
        }
    }
}

/// Iterates weighted solves with `ρ ← 1/(s̄ + ε)` until the active set
/// repeats or `max_iters` solves have run. The result is the sparsest
/// schedule seen (latest among ties); `objective` is reported with the
/// problem's original weights.
pub fn reweighted_solve(
    problem: &PrecisionProblem,
    ropts: &ReweightOptions,
    opts: &SolveOptions,
) -> Result<PrecisionSchedule> {
    let eps = ropts.epsilon.unwrap_or(1e-3 * problem.max_bound());
    if !(eps > 0.0) || ropts.max_iters == 0 {
        return Err(Error::InvalidInput("reweighting needs epsilon > 0 and max_iters ≥ 1".into()));
    }
    let mut current = problem.clone();
    let mut history = Vec::new();
    let mut best: Option<PrecisionSchedule> = None;
    let mut previous: Option<Vec<usize>> = None;
    let mut total_iters = 0;
    for iter in 0..ropts.max_iters {
        let mut sched = solve_precisions(&current, opts)?;
        total_iters += sched.solver_iterations;
        let active = active_set(&sched.s, problem.max_bound(), ropts.active_threshold);
        history.push(ReweightStep {
            weighted_objective: current.rho.iter().zip(&sched.s).map(|(r, x)| r * x).sum(),
            l1_norm: sched.s.iter().sum(),
            active_count: active.len(),
            solver_iterations: sched.solver_iterations,
        });
        if sched.status != ScheduleStatus::Optimal {
            sched.iterations = iter + 1;
            sched.history = history;
            sched.solver_iterations = total_iters;
            return Ok(sched);
        }
        sched.active_count = active.len();
        sched.objective = problem.rho.iter().zip(&sched.s).map(|(r, x)| r * x).sum();
        let repeat = previous.as_ref() == Some(&active);
        let rho: Vec<f64> = sched.s.iter().map(|&x| 1.0 / (x.max(0.0) + eps)).collect();
        if best.as_ref().map_or(true, |b| active.len() <= b.active_count) {
            best = Some(sched);
        }
        if repeat {
            break;
        }
        previous = Some(active);
        current.rho = rho;
    }
    let mut out = best.expect("at least one solve");
    out.iterations = history.len();
    out.history = history;
    out.solver_iterations = total_iters;
    Ok(out)
}

/// Smallest eigenvalue of `W − N Σ̄ Nᵀ − Σ_{s̄ᵢ>0} gᵢgᵢᵀ/s̄ᵢ`, `N = M − G C̄`.
/// Nonzero gain columns on zero precisions are a contract violation.
pub fn schur_min_eigenvalue(
    batch: &BatchSystem,
    w: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    s: &[f64],
) -> Result<f64> {
    let post = batch_posterior_stats(batch, gain, s, None)?;
    Ok(min_eigenvalue(&symmetrize(&(w - post.cov))))
}

/// Posterior covariance at the horizon end when the optimal gain for `s`
/// is used.
pub fn optimal_posterior(batch: &BatchSystem, s: &[f64]) -> Result<DMatrix<f64>> {
    let gain = optimal_batch_gain(batch, s)?;
    Ok(batch_posterior_stats(batch, &gain, s, None)?.cov)
}

/// Thresholded precision grid and active-set summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    /// `p × m_y`, entries below the threshold set to zero, row-major.
    pub grid: Vec<Vec<f64>>,
    /// Active `(step, channel)` pairs, zero-based.
    pub active: Vec<(usize, usize)>,
    pub active_per_step: Vec<usize>,
    /// Relative threshold finally applied (may be below the requested one).
    pub threshold: f64,
    /// Posterior trace with the thresholded precisions and optimal gains.
    pub verified_trace: f64,
    pub gamma: f64,
    /// `verified_trace ≤ γ·(1 + 1e-3)`.
    pub verified: bool,
}

impl SparsityReport {
    pub fn precisions(&self) -> Vec<f64> {
        self.grid.iter().flatten().cloned().collect()
    }

    pub fn is_active(&self, step: usize, channel: usize) -> bool {
        self.grid[step][channel] > 0.0
    }
}

/// Zeroes entries below `threshold · max(s_max)` and checks that the
/// thresholded schedule still meets `γ` with optimal gains. If it does not,
/// the threshold is lowered by decades until it does (or reaches zero).
pub fn sparsity_report(
    problem: &PrecisionProblem,
    schedule: &PrecisionSchedule,
    threshold: f64,
) -> Result<SparsityReport> {
    if schedule.status != ScheduleStatus::Optimal {
        return Err(Error::InvalidInput("sparsity report needs an optimal schedule".into()));
    }
    let (p, my) = (problem.batch.horizon(), problem.batch.channels_per_step());
    let smax = problem.max_bound();
    let mut thr = threshold;
    loop {
        let s: Vec<f64> = schedule
            .s
            .iter()
            .map(|&x| if x > thr * smax { x } else { 0.0 })
            .collect();
        let trace = optimal_posterior(&problem.batch, &s)?.trace();
        let verified = trace <= problem.gamma * (1.0 + 1e-3);
        if verified || thr == 0.0 {
            let grid: Vec<Vec<f64>> = (0..p).map(|k| s[k * my..(k + 1) * my].to_vec()).collect();
            let active: Vec<(usize, usize)> = (0..p * my)
                .filter(|&i| s[i] > 0.0)
                .map(|i| (i / my, i % my))
                .collect();
            let active_per_step = grid.iter().map(|r| r.iter().filter(|&&x| x > 0.0).count()).collect();
            return Ok(SparsityReport {
                grid,
                active,
                active_per_step,
                threshold: thr,
                verified_trace: trace,
                gamma: problem.gamma,
                verified,
            });
        }
        thr = if thr > 1e-15 { thr / 10.0 } else { 0.0 };
    }
}

/// Fraction of active cells at zero-based steps `≥ from_step`.
pub fn late_fraction(report: &SparsityReport, from_step: usize) -> f64 {
    if report.active.is_empty() {
        return 0.0;
    }
    report.active.iter().filter(|(k, _)| *k >= from_step).count() as f64 / report.active.len() as f64
}

/// `s̄ ↦ ρᵀs̄` helper for reports.
pub fn weighted_l1(rho: &[f64], s: &[f64]) -> f64 {
    rho.iter().zip(s).map(|(r, x)| r * x).sum()
}

/// Prior trace at the horizon end, the `γ` base for fraction rules.
pub fn prior_trace(batch: &BatchSystem) -> f64 {
    batch.final_prior_cov().trace()
}

/// Dense evaluation of the natural-unit LMI block at `(W, G, s̄)`.
pub fn lmi_block(batch: &BatchSystem, w: &DMatrix<f64>, gain: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let n = batch.state_dim();
    let np = batch.cov_sqrt.nrows();
    let my = s.len();
    let nmat = batch.selector() - gain * &batch.c_bar;
    let top = &nmat * &batch.cov_sqrt;
    let mut out = DMatrix::zeros(n + np + my, n + np + my);
    out.view_mut((0, 0), (n, n)).copy_from(w);
    out.view_mut((0, n), (n, np)).copy_from(&top);
    out.view_mut((n, 0), (np, n)).copy_from(&top.transpose());
    out.view_mut((0, n + np), (n, my)).copy_from(gain);
    out.view_mut((n + np, 0), (my, n)).copy_from(&gain.transpose());
    out.view_mut((n, n), (np, np)).fill_with_identity();
    out.view_mut((n + np, n + np), (my, my))
        .copy_from(&DMatrix::from_diagonal(&DVector::from_column_slice(s)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{DiscreteStep, GaussianState};
    use crate::kalman::build_batch;

    fn small_batch() -> BatchSystem {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let steps: Vec<DiscreteStep> = (0..3)
            .map(|_| DiscreteStep {
                a: a.clone(),
                b: DMatrix::identity(2, 2),
                q: DMatrix::identity(2, 2) * 0.01,
            })
            .collect();
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let meas = vec![c.clone(), c.clone(), c];
        let start = GaussianState {
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2),
        };
        build_batch(&steps, &meas, &start, 3).unwrap()
    }

    #[test]
    fn natural_and_scaled_programs_agree() {
        let batch = small_batch();
        let gamma = 0.3 * prior_trace(&batch);
        let prob = PrecisionProblem::new(batch, gamma, DMatrix::from_element(3, 2, 50.0)).unwrap();
        let natural = assemble_lmi(&prob).unwrap();
        let scaled = assemble_scaled(&prob, gamma, 50.0).unwrap();
        assert_eq!(natural.problem.num_vars(), 3 + 12 + 6);
        assert_eq!(natural.problem.lmis[0].dim(), 2 + 6 + 6);
        // Same point, both programs: LMI eigenvalue signs and objectives agree.
        let s = vec![10.0; 6];
        let gain = optimal_batch_gain(&prob.batch, &s).unwrap();
        let w = optimal_posterior(&prob.batch, &s).unwrap() + DMatrix::identity(2, 2) * 1e-3;
        let vn = natural.pack(&w, &gain, &s);
        let vs = scaled.pack(&w, &gain, &s);
        let en = min_eigenvalue(&natural.problem.lmis[0].evaluate(&vn));
        let es = min_eigenvalue(&scaled.problem.lmis[0].evaluate(&vs));
        assert!(en > 0.0 && es > 0.0);
        let on = natural.problem.objective_value(&vn) * natural.objective_scale;
        let os = scaled.problem.objective_value(&vs) * scaled.objective_scale;
        assert!((on - 60.0).abs() < 1e-9 && (os - 60.0).abs() < 1e-9);
        let dense = lmi_block(&prob.batch, &w, &gain, &s);
        assert!((dense - natural.problem.lmis[0].evaluate(&vn)).amax() < 1e-12);
    }

    #[test]
    fn loose_gamma_needs_no_sensing() {
        let batch = small_batch();
        let gamma = 10.0 * prior_trace(&batch);
        let prob = PrecisionProblem::new(batch, gamma, DMatrix::from_element(3, 2, 50.0)).unwrap();
        let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(sched.status, ScheduleStatus::Optimal);
        assert!(sched.objective <= 1e-4 * 50.0 * 6.0, "{}", sched.objective);
    }

    #[test]
    fn solved_schedule_is_certified() {
        let batch = small_batch();
        let gamma = 0.3 * prior_trace(&batch);
        let prob = PrecisionProblem::new(batch, gamma, DMatrix::from_element(3, 2, 50.0)).unwrap();
        let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(sched.status, ScheduleStatus::Optimal, "{}", sched.message);
        assert!(sched.w.trace() <= gamma * (1.0 + 1e-6));
        let schur = schur_min_eigenvalue(&prob.batch, &sched.w, &sched.gain, &sched.s).unwrap();
        assert!(schur >= -1e-6, "{schur}");
        assert!(optimal_posterior(&prob.batch, &sched.s).unwrap().trace() <= gamma * (1.0 + 1e-6));
    }

    #[test]
    fn all_masked_is_infeasible() {
        let batch = small_batch();
        let gamma = 0.3 * prior_trace(&batch);
        let prob = PrecisionProblem::new(batch, gamma, DMatrix::zeros(3, 2)).unwrap();
        let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(sched.status, ScheduleStatus::Infeasible);
        assert!(sched.certificate.is_some());
    }

    #[test]
    fn reweighting_stops_on_repeated_support() {
        let batch = small_batch();
        let gamma = 10.0 * prior_trace(&batch);
        let prob = PrecisionProblem::new(batch, gamma, DMatrix::from_element(3, 2, 50.0)).unwrap();
        let sched = reweighted_solve(&prob, &ReweightOptions::default(), &SolveOptions::default()).unwrap();
        assert_eq!(sched.iterations, 2);
        assert_eq!(sched.active_count, 0);
    }

    #[test]
    fn empty_schedule_report() {
        let batch = small_batch();
        let gamma = 10.0 * prior_trace(&batch);
        let prob = PrecisionProblem::new(batch, gamma, DMatrix::from_element(3, 2, 50.0)).unwrap();
        let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        let rep = sparsity_report(&prob, &sched, 1e-6).unwrap();
        assert!(rep.active.is_empty());
        assert!(rep.verified);
        assert_eq!(rep.grid.len(), 3);
    }
}
