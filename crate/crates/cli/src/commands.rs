//! The four subcommands. Each writes its files into the output directory and
//! returns a summary plus the process outcome.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use sensorsched_core::ScheduleStatus;

use crate::config::{format_bound, BoundCase, ScalarOrList, ScenarioConfig};
use crate::error::{io_err, CliError, Outcome};
use crate::montecarlo::{self, MonteCarloSummary};
use crate::pipeline::{solve_cases, solve_chain, CaseReport, CaseResult, Experiment};
use crate::svg::{self, Panel, Series};

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub s_max: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub gap_tol: Option<f64>,
    pub feas_tol: Option<f64>,
}

/// Reads the file (or takes the built-in reference scenario) and applies
/// the overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &overrides.s_max {
        cfg.objective.s_max = list.iter().map(|&v| ScalarOrList::Scalar(v)).collect();
    }
    if let Some(trials) = overrides.trials {
        cfg.validation.trials = trials;
    }
    if let Some(t) = overrides.gap_tol {
        cfg.solver.gap_tol = t;
    }
    if let Some(t) = overrides.feas_tol {
        cfg.solver.feas_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_file(path, &(text + "\n"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_resolved_config(out: &Path, cfg: &ScenarioConfig) -> Result<(), CliError> {
    write_file(out.join("config.resolved.toml"), &cfg.to_toml_string())
}

fn worst_outcome(statuses: impl IntoIterator<Item = ScheduleStatus>) -> Outcome {
    let mut outcome = Outcome::Success;
    for s in statuses {
        match s {
            ScheduleStatus::NumericalFailure => return Outcome::NumericalFailure,
            ScheduleStatus::Infeasible => outcome = Outcome::Infeasible,
            ScheduleStatus::Optimal => {}
        }
    }
    outcome
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub config_hash: String,
    pub samples: usize,
    pub t_end: f64,
    pub final_prior_trace: f64,
    pub files: Vec<String>,
}

/// Nominal trajectory and unconditioned mean/covariance over one horizon.
///
/// Files: `nominal.csv` (`t, x1, z1, …`), `envelope.csv` (`t`, then
/// `mean_<s>, sigma_<s>` per state `s`, then `trace`), `trajectory.svg` and
/// `envelope.svg`.
pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<SimulateSummary, CliError> {
    create_dir(out)?;
    let exp = Experiment::new(cfg.clone())?;
    let nominal = &exp.horizon.nominal;
    let fine = &exp.horizon.discretization.fine;
    let agents = exp.spec.agents.agents().len();
    let names: Vec<String> = (1..=agents).flat_map(|a| [format!("x{a}"), format!("z{a}")]).collect();

    let mut w = csv_writer(&out.join("nominal.csv"))?;
    let mut head = vec!["t".to_string()];
    head.extend(names.iter().cloned());
    w.write_record(&head)?;
    for (i, x) in nominal.states().iter().enumerate() {
        let mut rec = vec![nominal.time(i).to_string()];
        rec.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(out.join("nominal.csv")))?;

    let mut w = csv_writer(&out.join("envelope.csv"))?;
    let mut head = vec!["t".to_string()];
    for n in &names {
        head.push(format!("mean_{n}"));
        head.push(format!("sigma_{n}"));
    }
    head.push("trace".into());
    w.write_record(&head)?;
    for (t, s) in fine.times.iter().zip(&fine.states) {
        let mut rec = vec![t.to_string()];
        for i in 0..s.dim() {
            rec.push(s.mean[i].to_string());
            rec.push(s.cov[(i, i)].max(0.0).sqrt().to_string());
        }
        rec.push(s.cov.trace().to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(out.join("envelope.csv")))?;

    let stride = (nominal.len() / 400).max(1);
    let idx: Vec<usize> = (0..nominal.len()).step_by(stride).chain(std::iter::once(nominal.len() - 1)).collect();
    let series = (0..agents)
        .map(|a| Series {
            label: format!("agent {}", a + 1),
            x: idx.iter().map(|&i| nominal.state(i)[2 * a]).collect(),
            y: idx.iter().map(|&i| nominal.state(i)[2 * a + 1]).collect(),
            band: None,
        })
        .collect();
    let panel = Panel {
        title: "nominal trajectories (x, z)".into(),
        series,
        markers: exp.spec.topology.stations().to_vec(),
        equal_aspect: true,
    };
    write_file(out.join("trajectory.svg"), &svg::line_panels(&[panel], 1, "Nominal trajectories"))?;

    let fidx: Vec<usize> = (0..fine.times.len())
        .step_by((fine.times.len() / 400).max(1))
        .chain(std::iter::once(fine.times.len() - 1))
        .collect();
    let t: Vec<f64> = fidx.iter().map(|&i| fine.times[i]).collect();
    let panels: Vec<Panel> = names
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let mean: Vec<f64> = fidx.iter().map(|&i| fine.states[i].mean[s]).collect();
            let sd: Vec<f64> = fidx.iter().map(|&i| fine.states[i].cov[(s, s)].max(0.0).sqrt()).collect();
            let lo = mean.iter().zip(&sd).map(|(m, d)| m - d).collect();
            let hi = mean.iter().zip(&sd).map(|(m, d)| m + d).collect();
            Panel {
                title: format!("{name}: mean and 1σ"),
                series: vec![Series {
                    label: name.clone(),
                    x: t.clone(),
                    y: mean,
                    band: Some((lo, hi)),
                }],
                markers: Vec::new(),
                equal_aspect: false,
            }
        })
        .collect();
    write_file(out.join("envelope.svg"), &svg::line_panels(&panels, 2, "Mean and covariance evolution"))?;
    write_resolved_config(out, cfg)?;

    Ok(SimulateSummary {
        config_hash: cfg.hash(),
        samples: fine.times.len(),
        t_end: *fine.times.last().unwrap_or(&0.0),
        final_prior_trace: exp.prior_trace,
        files: ["nominal.csv", "envelope.csv", "trajectory.svg", "envelope.svg"].map(String::from).to_vec(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub prepare_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
}

/// `report.json` written by `optimize`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub steps: usize,
    pub channels: Vec<String>,
    pub horizons: usize,
    pub prior_trace: f64,
    pub gamma: f64,
    pub cases: Vec<CaseReport>,
    pub timing: Timing,
}

fn file_stem(result: &CaseResult, chained: usize) -> String {
    if chained > 1 {
        format!("smax_{}_h{}", result.case.label, result.horizon_index + 1)
    } else {
        format!("smax_{}", result.case.label)
    }
}

/// Precision grid CSV: `step, y1, …, y_m`, one row per step `1..=p`.
pub fn write_grid_csv(path: &Path, rows: &[Vec<f64>], labels: &[String]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut head = vec!["step".to_string()];
    head.extend(labels.iter().cloned());
    w.write_record(&head)?;
    for (k, row) in rows.iter().enumerate() {
        let mut rec = vec![(k + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a grid written by [`write_grid_csv`].
pub fn read_grid_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn emit_case(out: &Path, exp: &Experiment, result: &CaseResult) -> Result<CaseReport, CliError> {
    let mut report = CaseReport::from_result(result);
    if result.schedule.status == ScheduleStatus::Optimal {
        let stem = file_stem(result, exp.chained);
        let csv_name = format!("precisions_{stem}.csv");
        let svg_name = format!("heatmap_{stem}.svg");
        let rows = result.rows();
        write_grid_csv(&out.join(&csv_name), &rows, &exp.channel_labels)?;
        let title = format!("Sensing precisions, s_max = {}", format_bound(result.case.nominal));
        write_file(out.join(&svg_name), &svg::heatmap(&rows, &exp.channel_labels, result.case.nominal, &title))?;
        report.precision_csv = Some(csv_name);
        report.heatmap_svg = Some(svg_name);
    }
    Ok(report)
}

/// Solves every bound case, writes per-case grids and heatmaps plus
/// `report.json`. Infeasible cases get no grid or heatmap.
pub fn optimize(cfg: &ScenarioConfig, out: &Path, horizons: usize) -> Result<(RunReport, Outcome), CliError> {
    create_dir(out)?;
    let t0 = Instant::now();
    let exp = Experiment::chained(cfg.clone(), horizons)?;
    let prepare_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let results: Vec<CaseResult> = if horizons == 1 {
        solve_cases(&exp, &exp.cases).into_iter().collect::<Result<_, _>>()?
    } else {
        let mut all = Vec::new();
        for case in &exp.cases {
            all.extend(solve_chain(&exp, case)?);
        }
        all
    };
    let solve_s = t1.elapsed().as_secs_f64();
    let cases = results.iter().map(|r| emit_case(out, &exp, r)).collect::<Result<Vec<_>, _>>()?;
    let outcome = worst_outcome(results.iter().map(|r| r.schedule.status));
    let report = RunReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        steps: exp.steps(),
        channels: exp.channel_labels.clone(),
        horizons,
        prior_trace: exp.prior_trace,
        gamma: exp.gamma,
        cases,
        timing: Timing {
            prepare_s,
            solve_s,
            total_s: t0.elapsed().as_secs_f64(),
        },
    };
    write_json(out.join("report.json"), &report)?;
    write_resolved_config(out, cfg)?;
    Ok((report, outcome))
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationCase {
    pub label: String,
    pub status: ScheduleStatus,
    pub gamma: f64,
    pub monte_carlo: Option<MonteCarloSummary>,
    /// Empirical trace within `γ + 3·SE`.
    pub within_gamma: Option<bool>,
    /// Empirical and analytic traces within `3·SE` of each other.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub cases: Vec<ValidationCase>,
}

fn validation_case(
    exp: &Experiment,
    label: String,
    status: ScheduleStatus,
    rows: Option<&[Vec<f64>]>,
) -> Result<ValidationCase, CliError> {
    let p = exp.steps();
    let monte_carlo = match rows {
        Some(rows) => Some(montecarlo::run(
            &exp.horizon.discretization.system.steps[..p],
            &exp.horizon.measurement_matrices[..p],
            &exp.spec.initial,
            rows,
            exp.config.validation.trials,
            exp.config.seed,
        )?),
        None => None,
    };
    let within_gamma = monte_carlo
        .as_ref()
        .map(|m| m.empirical_trace <= exp.gamma + 3.0 * m.standard_error);
    let consistent = monte_carlo
        .as_ref()
        .map(|m| (m.empirical_trace - m.analytic_trace).abs() <= 3.0 * m.standard_error);
    Ok(ValidationCase {
        label,
        status,
        gamma: exp.gamma,
        monte_carlo,
        within_gamma,
        consistent,
    })
}

/// Monte Carlo check of each optimal schedule, or of the grid in
/// `schedule` when given. Writes `validation.csv` and `validation.json`.
pub fn validate(cfg: &ScenarioConfig, out: &Path, schedule: Option<&Path>) -> Result<(ValidationReport, Outcome), CliError> {
    create_dir(out)?;
    let trials = cfg.validation.trials;
    let mut cases = Vec::new();
    let mut outcome = Outcome::Success;
    if trials > 0 {
        let exp = Experiment::new(cfg.clone())?;
        match schedule {
            Some(path) => {
                let rows = read_grid_csv(path)?;
                if rows.len() != exp.steps() || rows.iter().any(|r| r.len() != exp.channel_labels.len()) {
                    return Err(CliError::Usage(format!(
                        "{}: expected a {}×{} precision grid",
                        path.display(),
                        exp.steps(),
                        exp.channel_labels.len()
                    )));
                }
                if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(CliError::Usage(format!("{}: precisions must be finite and non-negative", path.display())));
                }
                let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                cases.push(validation_case(&exp, label, ScheduleStatus::Optimal, Some(&rows))?);
            }
            None => {
                let results: Vec<CaseResult> = solve_cases(&exp, &exp.cases).into_iter().collect::<Result<_, _>>()?;
                outcome = worst_outcome(results.iter().map(|r| r.schedule.status));
                for r in &results {
                    let rows = r.sparsity.as_ref().map(|s| s.grid.clone());
                    cases.push(validation_case(&exp, r.case.label.clone(), r.schedule.status, rows.as_deref())?);
                }
            }
        }
    }

    let path = out.join("validation.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "label",
        "status",
        "trials",
        "empirical_trace",
        "standard_error",
        "analytic_trace",
        "gamma",
        "within_gamma",
        "consistent",
    ])?;
    for c in &cases {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let flag = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        let mc = c.monte_carlo.as_ref();
        w.write_record([
            c.label.clone(),
            format!("{:?}", c.status),
            mc.map(|m| m.trials.to_string()).unwrap_or_default(),
            opt(mc.map(|m| m.empirical_trace)),
            opt(mc.map(|m| m.standard_error)),
            opt(mc.map(|m| m.analytic_trace)),
            c.gamma.to_string(),
            flag(c.within_gamma),
            flag(c.consistent),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    let report = ValidationReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        trials,
        cases,
    };
    write_json(out.join("validation.json"), &report)?;
    write_resolved_config(out, cfg)?;
    Ok((report, outcome))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub s_max: f64,
    pub status: ScheduleStatus,
    pub feasible: bool,
    pub active_count: usize,
    /// Objective of the first (unit-weight) solve.
    pub first_objective: f64,
    /// `ρᵀs̄` of the reported schedule.
    pub objective: f64,
    pub l1_norm: f64,
    pub analytic_trace: Option<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
}

/// Solves one case per bound in parallel and tabulates the trade-off.
/// Writes `sweep.csv`, `sweep.svg` and `sweep.json`.
pub fn sweep(cfg: &ScenarioConfig, out: &Path) -> Result<(SweepReport, Outcome), CliError> {
    let bounds: Vec<f64> = cfg
        .objective
        .s_max
        .iter()
        .map(|c| match c {
            ScalarOrList::Scalar(v) => Ok(*v),
            ScalarOrList::List(_) => Err(CliError::Usage("sweep needs scalar s_max values".into())),
        })
        .collect::<Result<_, _>>()?;
    if bounds.len() < 2 {
        return Err(CliError::Usage(format!("sweep needs at least two s_max values, got {}", bounds.len())));
    }
    create_dir(out)?;
    let exp = Experiment::new(cfg.clone())?;
    let cases: Vec<BoundCase> = exp.cases.clone();
    let results: Vec<CaseResult> = solve_cases(&exp, &cases).into_iter().collect::<Result<_, _>>()?;
    let rows: Vec<SweepRow> = results
        .iter()
        .zip(&bounds)
        .map(|(r, &b)| {
            let s = &r.schedule;
            SweepRow {
                s_max: b,
                status: s.status,
                feasible: s.status == ScheduleStatus::Optimal,
                active_count: if s.status == ScheduleStatus::Optimal { s.active_count } else { 0 },
                first_objective: s.history.first().map(|h| h.weighted_objective).unwrap_or(f64::NAN),
                objective: s.objective,
                l1_norm: s.s.iter().sum(),
                analytic_trace: r.checks.as_ref().map(|c| c.analytic_trace),
                gamma: r.gamma,
            }
        })
        .collect();

    let path = out.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "s_max",
        "status",
        "feasible",
        "active_count",
        "first_objective",
        "objective",
        "l1_norm",
        "analytic_trace",
        "gamma",
    ])?;
    for r in &rows {
        w.write_record([
            format_bound(r.s_max),
            format!("{:?}", r.status),
            r.feasible.to_string(),
            r.active_count.to_string(),
            r.first_objective.to_string(),
            r.objective.to_string(),
            r.l1_norm.to_string(),
            r.analytic_trace.map(|v| v.to_string()).unwrap_or_default(),
            r.gamma.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;

    let labels: Vec<String> = rows.iter().map(|r| format!("s_max {}", format_bound(r.s_max))).collect();
    let counts: Vec<f64> = rows.iter().map(|r| r.active_count as f64).collect();
    let notes: Vec<String> = rows
        .iter()
        .map(|r| if r.feasible { format!("{}", r.active_count) } else { "infeasible".into() })
        .collect();
    write_file(
        out.join("sweep.svg"),
        &svg::bar_chart(&labels, &counts, &notes, "active channels", "Active channels per precision bound"),
    )?;
    let report = SweepReport {
        config_hash: cfg.hash(),
        rows,
    };
    write_json(out.join("sweep.json"), &report)?;
    write_resolved_config(out, cfg)?;
    let outcome = if results.iter().any(|r| r.schedule.status == ScheduleStatus::NumericalFailure) {
        Outcome::NumericalFailure
    } else {
        Outcome::Success
    };
    Ok((report, outcome))
}
