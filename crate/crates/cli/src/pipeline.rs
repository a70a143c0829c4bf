//! Scenario preparation and per-case solving shared by the subcommands.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use sensorsched_core::conic::verify;
use sensorsched_core::kalman::{build_batch, sequential_filter};
use sensorsched_core::precision_opt::{
    assemble_lmi, reweighted_solve, schur_min_eigenvalue, sparsity_report, ReweightStep, SparsityReport,
};
use sensorsched_core::conic::InfeasibilityCertificate;
use sensorsched_core::scenario::prepare;
use sensorsched_core::{
    BatchSystem, GaussianState, Horizon, PrecisionProblem, PrecisionSchedule, ScenarioSpec, ScheduleStatus,
};

use crate::config::{BoundCase, ScenarioConfig};
use crate::error::CliError;

pub const TRACE_W_TOL: f64 = 1e-6;
pub const SCHUR_FLOOR: f64 = -1e-6;
pub const ANALYTIC_TRACE_TOL: f64 = 1e-4;

/// A configuration with its prepared horizon(s).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub spec: ScenarioSpec,
    /// Nominal, discretization and measurement matrices over all chained
    /// horizons; `horizon.batch` covers the whole span.
    pub horizon: Horizon,
    /// Batch model of the first horizon.
    pub batch: BatchSystem,
    pub prior_trace: f64,
    pub gamma: f64,
    pub cases: Vec<BoundCase>,
    pub channel_labels: Vec<String>,
    pub chained: usize,
}

impl Experiment {
    pub fn new(config: ScenarioConfig) -> Result<Self, CliError> {
        Self::chained(config, 1)
    }

    /// Prepares `horizons` consecutive horizons of `timing.steps` each.
    pub fn chained(config: ScenarioConfig, horizons: usize) -> Result<Self, CliError> {
        if horizons == 0 {
            return Err(CliError::Usage("at least one horizon required".into()));
        }
        let spec = config.scenario_spec()?;
        let mut span = spec.clone();
        span.horizon = spec.horizon * horizons;
        let horizon = prepare(&span)?;
        let batch = if horizons == 1 {
            horizon.batch.clone()
        } else {
            build_batch(
                &horizon.discretization.system.steps,
                &horizon.measurement_matrices,
                &spec.initial,
                spec.horizon,
            )?
        };
        let prior_trace = batch.final_prior_cov().trace();
        let gamma = config.gamma(prior_trace);
        let cases = config.bound_cases()?;
        let channel_labels = spec.topology.channel_labels();
        Ok(Self {
            config,
            spec,
            horizon,
            batch,
            prior_trace,
            gamma,
            cases,
            channel_labels,
            chained: horizons,
        })
    }

    pub fn steps(&self) -> usize {
        self.spec.horizon
    }

    pub fn problem(&self, case: &BoundCase) -> Result<PrecisionProblem, CliError> {
        self.problem_for(self.batch.clone(), self.gamma, case)
    }

    fn problem_for(&self, batch: BatchSystem, gamma: f64, case: &BoundCase) -> Result<PrecisionProblem, CliError> {
        let problem = match &self.config.objective.rho {
            Some(rho) => PrecisionProblem::with_weights(batch, gamma, case.bounds.clone(), rho.clone())?,
            None => PrecisionProblem::new(batch, gamma, case.bounds.clone())?,
        };
        Ok(problem)
    }
}

/// Independent checks of an optimal schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeChecks {
    pub trace_w: f64,
    pub trace_w_ok: bool,
    pub schur_min_eigenvalue: f64,
    pub schur_ok: bool,
    /// Smallest eigenvalue of the assembled LMI at the solution.
    pub lmi_min_eigenvalue: f64,
    /// Posterior trace from the sequential filter run on the thresholded
    /// schedule with optimal gains.
    pub analytic_trace: f64,
    pub analytic_ok: bool,
    pub bounds_ok: bool,
}

impl GuaranteeChecks {
    pub fn all_ok(&self) -> bool {
        self.trace_w_ok && self.schur_ok && self.analytic_ok && self.bounds_ok
    }
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case: BoundCase,
    /// Zero-based index of the chained horizon.
    pub horizon_index: usize,
    pub gamma: f64,
    pub prior_trace: f64,
    pub schedule: PrecisionSchedule,
    pub sparsity: Option<SparsityReport>,
    pub checks: Option<GuaranteeChecks>,
    pub runtime_s: f64,
}

impl CaseResult {
    /// Thresholded precisions as per-step rows, or the raw grid when the
    /// schedule is not optimal.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        match &self.sparsity {
            Some(r) => r.grid.clone(),
            None => {
                let g = self.schedule.grid();
                (0..g.nrows()).map(|k| g.row(k).iter().cloned().collect()).collect()
            }
        }
    }
}

/// Rows of a `p × m_y` matrix.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|k| m.row(k).iter().cloned().collect()).collect()
}

pub fn check_schedule(
    problem: &PrecisionProblem,
    schedule: &PrecisionSchedule,
    report: &SparsityReport,
    steps: &[sensorsched_core::DiscreteStep],
    meas: &[DMatrix<f64>],
    start: &GaussianState,
) -> Result<GuaranteeChecks, CliError> {
    let gamma = problem.gamma;
    let trace_w = schedule.w.trace();
    let schur = schur_min_eigenvalue(&problem.batch, &schedule.w, &schedule.gain, &schedule.s)?;
    let asm = assemble_lmi(problem)?;
    let violation = verify(&asm.problem, &asm.pack(&schedule.w, &schedule.gain, &schedule.s), 1e-6);
    let run = sequential_filter(steps, meas, start, &report.grid, None)?;
    let analytic_trace = run.posteriors.last().map(|s| s.cov.trace()).unwrap_or(f64::NAN);
    let bounds = problem.bounds();
    let bounds_ok = schedule
        .s
        .iter()
        .zip(&bounds)
        .all(|(&s, &hi)| s >= -1e-8 && s <= hi + 1e-8);
    Ok(GuaranteeChecks {
        trace_w,
        trace_w_ok: trace_w <= gamma * (1.0 + TRACE_W_TOL),
        schur_min_eigenvalue: schur,
        schur_ok: schur >= SCHUR_FLOOR,
        lmi_min_eigenvalue: violation.lmi_min_eigenvalues.first().copied().unwrap_or(f64::NAN),
        analytic_trace,
        analytic_ok: analytic_trace <= gamma * (1.0 + ANALYTIC_TRACE_TOL),
        bounds_ok,
    })
}

fn solve_one(
    exp: &Experiment,
    problem: &PrecisionProblem,
    case: &BoundCase,
    horizon_index: usize,
    start: &GaussianState,
) -> Result<CaseResult, CliError> {
    let t0 = Instant::now();
    let schedule = reweighted_solve(problem, &exp.config.reweight_options(), &exp.config.solve_options())?;
    let (sparsity, checks) = if schedule.status == ScheduleStatus::Optimal {
        let report = sparsity_report(problem, &schedule, exp.config.reweight.active_threshold)?;
        let p = exp.steps();
        let first = horizon_index * p;
        let steps = &exp.horizon.discretization.system.steps[first..first + p];
        let meas = &exp.horizon.measurement_matrices[first..first + p];
        let checks = check_schedule(problem, &schedule, &report, steps, meas, start)?;
        (Some(report), Some(checks))
    } else {
        (None, None)
    };
    Ok(CaseResult {
        case: case.clone(),
        horizon_index,
        gamma: problem.gamma,
        prior_trace: problem.batch.final_prior_cov().trace(),
        schedule,
        sparsity,
        checks,
        runtime_s: t0.elapsed().as_secs_f64(),
    })
}

/// Reweighted solve of one bound case on the first horizon.
pub fn solve_case(exp: &Experiment, case: &BoundCase) -> Result<CaseResult, CliError> {
    let problem = exp.problem(case)?;
    solve_one(exp, &problem, case, 0, &exp.spec.initial)
}

/// Solves the cases in parallel; results keep the input order.
pub fn solve_cases(exp: &Experiment, cases: &[BoundCase]) -> Vec<Result<CaseResult, CliError>> {
    cases.par_iter().map(|c| solve_case(exp, c)).collect()
}

/// Receding-horizon chain: each horizon starts from the posterior of the
/// previous one under its thresholded schedule. Stops at the first
/// non-optimal horizon.
pub fn solve_chain(exp: &Experiment, case: &BoundCase) -> Result<Vec<CaseResult>, CliError> {
    let p = exp.steps();
    let mut start = exp.spec.initial.clone();
    let mut out = Vec::with_capacity(exp.chained);
    for h in 0..exp.chained {
        let steps = &exp.horizon.discretization.system.steps[h * p..(h + 1) * p];
        let meas = &exp.horizon.measurement_matrices[h * p..(h + 1) * p];
        let batch = build_batch(steps, meas, &start, p)?;
        let gamma = exp.config.gamma(batch.final_prior_cov().trace());
        let problem = exp.problem_for(batch, gamma, case)?;
        let result = solve_one(exp, &problem, case, h, &start)?;
        let next = match &result.sparsity {
            Some(report) => {
                let run = sequential_filter(steps, meas, &start, &report.grid, None)?;
                run.posteriors.last().cloned()
            }
            None => None,
        };
        out.push(result);
        match next {
            Some(s) => start = s,
            None => break,
        }
    }
    Ok(out)
}

/// Scalar digest of a Farkas-type infeasibility certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    /// Negative for a valid certificate.
    pub constant_pairing: f64,
    pub stationarity_residual: f64,
    pub lmi_multiplier_traces: Vec<f64>,
    pub linear_multipliers: Vec<f64>,
}

impl From<&InfeasibilityCertificate> for CertificateSummary {
    fn from(c: &InfeasibilityCertificate) -> Self {
        Self {
            constant_pairing: c.constant_pairing,
            stationarity_residual: c.stationarity_residual,
            lmi_multiplier_traces: c.lmi_multipliers.iter().map(|m| m.trace()).collect(),
            linear_multipliers: c.linear_multipliers.clone(),
        }
    }
}

/// JSON view of one solved case.
#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub label: String,
    pub horizon: usize,
    pub s_max: f64,
    pub status: ScheduleStatus,
    pub gamma: f64,
    pub prior_trace: f64,
    pub objective: f64,
    pub l1_norm: f64,
    pub active_count: usize,
    pub active_per_step: Vec<usize>,
    /// `[step, channel]`, both one-based.
    pub active_cells: Vec<[usize; 2]>,
    pub threshold: Option<f64>,
    pub checks: Option<GuaranteeChecks>,
    pub reweight_iterations: usize,
    pub solver_iterations: usize,
    pub relative_gap: f64,
    pub history: Vec<ReweightStep>,
    pub message: String,
    pub certificate: Option<CertificateSummary>,
    pub precision_csv: Option<String>,
    pub heatmap_svg: Option<String>,
    pub runtime_s: f64,
}

impl CaseReport {
    pub fn from_result(r: &CaseResult) -> Self {
        let s = &r.schedule;
        let (active_cells, active_per_step, threshold) = match &r.sparsity {
            Some(rep) => (
                rep.active.iter().map(|&(k, c)| [k + 1, c + 1]).collect(),
                rep.active_per_step.clone(),
                Some(rep.threshold),
            ),
            None => (Vec::new(), Vec::new(), None),
        };
        Self {
            label: r.case.label.clone(),
            horizon: r.horizon_index + 1,
            s_max: r.case.nominal,
            status: s.status,
            gamma: r.gamma,
            prior_trace: r.prior_trace,
            objective: s.objective,
            l1_norm: s.s.iter().sum(),
            active_count: s.active_count,
            active_per_step,
            active_cells,
            threshold,
            checks: r.checks.clone(),
            reweight_iterations: s.iterations,
            solver_iterations: s.solver_iterations,
            relative_gap: s.relative_gap,
            history: s.history.clone(),
            message: s.message.clone(),
            certificate: s.certificate.as_ref().map(CertificateSummary::from),
            precision_csv: None,
            heatmap_svg: None,
            runtime_s: r.runtime_s,
        }
    }
}
