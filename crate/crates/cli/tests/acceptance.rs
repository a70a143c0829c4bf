//! Acceptance criteria for the reference scenario.
//!
//! Runs without the libtest harness so that every criterion prints exactly
//! one `PASS`, `FLAG` or `FAIL` line. `FLAG` marks an equally good
//! alternative to a named result and does not fail the run.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensorsched_cli::config::ScenarioConfig;
use sensorsched_cli::montecarlo;
use sensorsched_cli::pipeline::{solve_case, CaseResult, Experiment};
use sensorsched_core::conic::{self, ConicStatus};
use sensorsched_core::discretization::state_transition;
use sensorsched_core::dynamics::{jacobian, propagate_nominal, vector_field};
use sensorsched_core::kalman::{batch_posterior_stats, build_batch, optimal_batch_gain, sequential_filter};
use sensorsched_core::linalg::min_eigenvalue;
use sensorsched_core::precision_opt::{assemble_scaled, late_fraction, weighted_l1};
use sensorsched_core::sensing::{measurement_jacobian, range_measurement};
use sensorsched_core::{DiscreteStep, GaussianState, PrecisionProblem, ScheduleStatus};

const SOLVE_TIME_LIMIT_S: f64 = 60.0;
const NAMED_SUPPORT_REL_TOL: f64 = 1e-3;
const LATE_STEP: usize = 7;
const LATE_FRACTION_MIN: f64 = 0.6;
const TRACE_W_TOL: f64 = 1e-6;
const SCHUR_FLOOR: f64 = -1e-6;
const ANALYTIC_TOL: f64 = 1e-4;
const MC_TRIALS: usize = 2000;
const MC_SIGMAS: f64 = 3.0;
const BATCH_SEQ_TOL: f64 = 1e-6;
const RANDOM_SYSTEMS: usize = 50;
const JACOBIAN_TOL: f64 = 1e-6;
const JACOBIAN_POINTS: usize = 100;
const ROTATION_TOL: f64 = 1e-8;
const QUADRATURE_TOL: f64 = 1e-4;
const MONOTONE_REL_TOL: f64 = 1e-6;
const MASKED_TOL: f64 = 1e-9;

struct Outcome {
    id: usize,
    verdict: Verdict,
    detail: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Flag,
    Fail,
}

impl Outcome {
    fn new(id: usize, ok: bool, detail: String) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Self { id, verdict, detail }
    }

    fn print(&self) {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Flag => "FLAG",
            Verdict::Fail => "FAIL",
        };
        println!("{tag} criterion {}: {}", self.id, self.detail);
    }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

struct Scenario {
    exp: Experiment,
    results: Vec<CaseResult>,
}

impl Scenario {
    fn solve(name: &str) -> Scenario {
        let config = ScenarioConfig::load(&config_path(name)).expect("shipped config loads");
        let exp = Experiment::new(config).expect("scenario prepares");
        let results = exp
            .cases
            .iter()
            .map(|c| solve_case(&exp, c).expect("solver returns a status"))
            .collect();
        Scenario { exp, results }
    }

    fn case(&self, label: &str) -> &CaseResult {
        self.results.iter().find(|r| r.case.label == label).expect("bound case present")
    }

    fn steps(&self) -> &[DiscreteStep] {
        &self.exp.horizon.discretization.system.steps[..self.exp.steps()]
    }

    fn meas(&self) -> &[DMatrix<f64>] {
        &self.exp.horizon.measurement_matrices[..self.exp.steps()]
    }
}

fn status_line(s: &Scenario) -> String {
    s.results
        .iter()
        .map(|r| format!("{}={:?} ({:.1}s)", r.case.label, r.schedule.status, r.runtime_s))
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_1(free: &Scenario, blocked: &Scenario) -> Outcome {
    let expect = |s: &Scenario, label: &str, want: ScheduleStatus| s.case(label).schedule.status == want;
    let statuses_ok = ["450", "750", "1200"].iter().all(|l| expect(free, l, ScheduleStatus::Optimal))
        && expect(blocked, "450", ScheduleStatus::Infeasible)
        && expect(blocked, "750", ScheduleStatus::Optimal)
        && expect(blocked, "1200", ScheduleStatus::Optimal);
    let slowest = free
        .results
        .iter()
        .chain(&blocked.results)
        .map(|r| r.runtime_s / r.schedule.iterations.max(1) as f64)
        .fold(0.0, f64::max);
    let ok = statuses_ok && slowest < SOLVE_TIME_LIMIT_S;
    Outcome::new(
        1,
        ok,
        format!(
            "feasibility matrix; no blocking [{}]; blocked [{}]; slowest single solve {slowest:.1}s (limit {SOLVE_TIME_LIMIT_S}s)",
            status_line(free),
            status_line(blocked)
        ),
    )
}

fn active_at(r: &CaseResult, step: usize) -> BTreeSet<usize> {
    r.sparsity
        .as_ref()
        .map(|rep| rep.active.iter().filter(|(k, _)| *k == step).map(|&(_, c)| c).collect())
        .unwrap_or_default()
}

fn names(set: &BTreeSet<usize>) -> String {
    let v: Vec<String> = set.iter().map(|c| format!("y{}", c + 1)).collect();
    format!("{{{}}}", v.join(","))
}

/// Re-solves the ℓ1 program of `r` (original weights) with named cells held above the
/// active threshold and `silenced` cells forced to zero. Returns the
/// weighted objective, or the solver status if the restricted program is
/// not solved to optimality.
fn restricted_objective(
    s: &Scenario,
    r: &CaseResult,
    named: &[(usize, usize)],
    silenced: &[(usize, usize)],
) -> Result<f64, String> {
    let mut bounds = r.case.bounds.clone();
    for &(k, c) in silenced {
        bounds[(k, c)] = 0.0;
    }
    let problem = s.exp.problem(&r.case).map_err(|e| e.to_string())?;
    let problem = PrecisionProblem::with_weights(problem.batch, r.gamma, bounds, problem.rho)
        .map_err(|e| e.to_string())?;
    let floor = 10.0 * s.exp.config.reweight.active_threshold * problem.max_bound();
    let mut asm = assemble_scaled(&problem, problem.gamma, problem.max_bound()).map_err(|e| e.to_string())?;
    let per_step = problem.batch.channels_per_step();
    for &(k, c) in named {
        let var = asm.problem.vars.vector(asm.s, k * per_step + c);
        for b in asm.problem.bounds.iter_mut().filter(|b| b.var == var) {
            b.lower = Some(floor / asm.s_scale);
        }
    }
    let sol = conic::solve(&asm.problem, &s.exp.config.solve_options()).map_err(|e| e.to_string())?;
    if sol.status != ConicStatus::Optimal {
        return Err(format!("{:?}: {}", sol.status, sol.message));
    }
    let (_, _, sv) = asm.unscale(&sol.x);
    Ok(weighted_l1(&problem.rho, &sv))
}

fn describe(r: &Result<f64, String>) -> String {
    match r {
        Ok(v) => format!("objective {v:.6e}"),
        Err(e) => format!("not solved ({e})"),
    }
}

fn criterion_2(free: &Scenario, blocked: &Scenario) -> Outcome {
    let mut failures = Vec::new();
    let mut flags = Vec::new();
    let mut notes = Vec::new();

    // Step 9 of the 1200 case without blocking.
    let step9 = 8;
    let named9: BTreeSet<usize> = [1, 3, 4].into_iter().collect();
    let r = free.case("1200");
    let got = active_at(r, step9);
    if r.schedule.status != ScheduleStatus::Optimal {
        failures.push("1200 without blocking not optimal".to_string());
    } else if got == named9 {
        notes.push(format!("1200 step 9 active {}", names(&got)));
    } else {
        let reference = r.schedule.history[0].weighted_objective;
        let named: Vec<_> = named9.iter().map(|&c| (step9, c)).collect();
        let silenced: Vec<_> = (0..free.exp.batch.channels_per_step())
            .filter(|c| !named9.contains(c))
            .map(|c| (step9, c))
            .collect();
        match restricted_objective(free, r, &named, &silenced) {
            Ok(obj) if (obj - reference).abs() <= NAMED_SUPPORT_REL_TOL * reference.abs() => flags.push(format!(
                "1200 step 9 active {} instead of {}; named support objective {obj:.6e} vs {reference:.6e}",
                names(&got),
                names(&named9)
            )),
            other => failures.push(format!(
                "1200 step 9 active {} instead of {}; named support {} vs {reference:.6e}",
                names(&got),
                names(&named9),
                describe(&other)
            )),
        }
    }

    // y4 at steps 9 and 10 of the blocked 750 case.
    let r = blocked.case("750");
    if r.schedule.status != ScheduleStatus::Optimal {
        failures.push("blocked 750 not optimal".to_string());
    } else {
        let y4 = 3;
        let missing: Vec<usize> = [8, 9].into_iter().filter(|&k| !active_at(r, k).contains(&y4)).collect();
        if missing.is_empty() {
            notes.push("blocked 750 y4 active at steps 9 and 10".into());
        } else {
            let reference = r.schedule.history[0].weighted_objective;
            let named: Vec<_> = [8, 9].into_iter().map(|k| (k, y4)).collect();
            let steps: Vec<String> = missing.iter().map(|k| (k + 1).to_string()).collect();
            match restricted_objective(blocked, r, &named, &[]) {
                Ok(obj) if (obj - reference).abs() <= NAMED_SUPPORT_REL_TOL * reference.abs() => flags.push(format!(
                    "blocked 750 y4 inactive at step {}; named support objective {obj:.6e} vs {reference:.6e}",
                    steps.join(",")
                )),
                other => failures.push(format!(
                    "blocked 750 y4 inactive at step {}; named support {} vs {reference:.6e}",
                    steps.join(","),
                    describe(&other)
                )),
            }
        }
    }

    // Late concentration over every optimal case.
    let mut fractions = Vec::new();
    for (tag, s) in [("free", free), ("blocked", blocked)] {
        for r in &s.results {
            if let Some(rep) = &r.sparsity {
                let f = late_fraction(rep, LATE_STEP);
                fractions.push(format!("{tag} {}={f:.2}", r.case.label));
                if f < LATE_FRACTION_MIN {
                    failures.push(format!("{tag} {} late fraction {f:.2}", r.case.label));
                }
            }
        }
    }
    notes.push(format!("late fractions (k>=8) [{}]", fractions.join(", ")));

    let mut detail = notes;
    detail.extend(flags.iter().cloned());
    detail.extend(failures.iter().cloned());
    let verdict = if !failures.is_empty() {
        Verdict::Fail
    } else if !flags.is_empty() {
        Verdict::Flag
    } else {
        Verdict::Pass
    };
    Outcome {
        id: 2,
        verdict,
        detail: format!("sparsity pattern; {}", detail.join("; ")),
    }
}

fn criterion_3(free: &Scenario, blocked: &Scenario) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut count = 0;
    for (tag, s) in [("free", free), ("blocked", blocked)] {
        for r in &s.results {
            if r.schedule.status != ScheduleStatus::Optimal {
                continue;
            }
            count += 1;
            let Some(checks) = &r.checks else {
                ok = false;
                lines.push(format!("{tag} {} missing checks", r.case.label));
                continue;
            };
            let g = r.gamma;
            let mc = montecarlo::run(
                s.steps(),
                s.meas(),
                &s.exp.spec.initial,
                &r.rows(),
                MC_TRIALS,
                s.exp.config.seed,
            )
            .expect("monte carlo runs");
            let a = checks.trace_w <= g * (1.0 + TRACE_W_TOL);
            let b = checks.schur_min_eigenvalue >= SCHUR_FLOOR;
            let c = checks.analytic_trace <= g * (1.0 + ANALYTIC_TOL);
            let d = mc.empirical_trace <= g + MC_SIGMAS * mc.standard_error;
            ok &= a && b && c && d;
            lines.push(format!(
                "{tag} {}: trW/γ={:.6} schur={:.1e} analytic/γ={:.4} mc/γ={:.4}±{:.4}{}",
                r.case.label,
                checks.trace_w / g,
                checks.schur_min_eigenvalue,
                checks.analytic_trace / g,
                mc.empirical_trace / g,
                mc.standard_error / g,
                if a && b && c && d { "" } else { " VIOLATED" }
            ));
        }
    }
    Outcome::new(3, ok && count > 0, format!("guarantees on {count} optimal schedules; {}", lines.join("; ")))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

/// Textbook covariance recursion with a Joseph-form update, one step at a
/// time and one scalar channel at a time.
fn textbook_filter(steps: &[DiscreteStep], meas: &[DMatrix<f64>], p0: &DMatrix<f64>, prec: &[Vec<f64>]) -> DMatrix<f64> {
    let n = p0.nrows();
    let mut p = p0.clone();
    for (k, s) in steps.iter().enumerate() {
        p = &s.a * &p * s.a.transpose() + &s.b * &s.q * s.b.transpose();
        for (c, &lambda) in prec[k].iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let h = meas[k].row(c).transpose();
            let r = 1.0 / lambda;
            let ph = &p * &h;
            let denom = (h.transpose() * &ph)[(0, 0)] + r;
            let gain = ph / denom;
            let i_kh = DMatrix::identity(n, n) - &gain * h.transpose();
            p = &i_kh * &p * i_kh.transpose() + &gain * gain.transpose() * r;
        }
    }
    p
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    let mut worst_textbook: f64 = 0.0;
    let mut worst_sequential: f64 = 0.0;
    for _ in 0..RANDOM_SYSTEMS {
        let n = rng.random_range(1..=4);
        let p = rng.random_range(1..=4);
        let m = rng.random_range(1..=n);
        let my = rng.random_range(1..=3);
        let steps: Vec<DiscreteStep> = (0..p)
            .map(|_| DiscreteStep {
                a: DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.2..1.2)),
                b: DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0)),
                q: random_psd(&mut rng, m, 0.2),
            })
            .collect();
        let meas: Vec<DMatrix<f64>> = (0..p).map(|_| DMatrix::from_fn(my, n, |_, _| rng.random_range(-1.0..1.0))).collect();
        let start = GaussianState {
            mean: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            cov: random_psd(&mut rng, n, 0.5),
        };
        let prec: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                (0..my)
                    .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.5..50.0) })
                    .collect()
            })
            .collect();

        let batch = build_batch(&steps, &meas, &start, p).expect("batch builds");
        let s: Vec<f64> = prec.iter().flatten().cloned().collect();
        let gain = optimal_batch_gain(&batch, &s).expect("gain");
        let post = batch_posterior_stats(&batch, &gain, &s, None).expect("posterior").cov;
        let textbook = textbook_filter(&steps, &meas, &start.cov, &prec);
        let seq = sequential_filter(&steps, &meas, &start, &prec, None).expect("filter");
        let seq_cov = &seq.posteriors[p - 1].cov;
        worst_textbook = worst_textbook.max((&post - &textbook).norm() / textbook.norm());
        worst_sequential = worst_sequential.max((&post - seq_cov).norm() / seq_cov.norm());
    }
    let ok = worst_textbook <= BATCH_SEQ_TOL && worst_sequential <= BATCH_SEQ_TOL;
    Outcome::new(
        4,
        ok,
        format!(
            "batch vs sequential on {RANDOM_SYSTEMS} random LTV systems; worst relative Frobenius error {worst_textbook:.2e} (textbook filter), {worst_sequential:.2e} (library filter), tolerance {BATCH_SEQ_TOL:e}"
        ),
    )
}

fn fd_jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(f: F, x: &DVector<f64>, rows: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(rows, x.len());
    for c in 0..x.len() {
        let h = 1e-6 * (1.0 + x[c].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        j.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    j
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn criterion_5(free: &Scenario) -> Outcome {
    let spec = &free.exp.spec;
    let n = spec.agents.state_dim();
    let my = spec.topology.channel_count();
    let mut rng = ChaCha8Rng::seed_from_u64(5005);

    let mut worst_f: f64 = 0.0;
    for _ in 0..JACOBIAN_POINTS {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
        let fd = fd_jacobian(|y| vector_field(y, &spec.agents).unwrap(), &x, n);
        worst_f = worst_f.max(rel_err(&fd, &jacobian(&x, &spec.agents).unwrap()));
    }

    let mut worst_h: f64 = 0.0;
    let mut checked = 0;
    while checked < JACOBIAN_POINTS {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
        match range_measurement(&x, &spec.topology) {
            Ok(y) if y.min() >= 0.1 => {}
            _ => continue,
        }
        let fd = fd_jacobian(|s| range_measurement(s, &spec.topology).unwrap(), &x, my);
        worst_h = worst_h.max(rel_err(&fd, &measurement_jacobian(&x, &spec.topology).unwrap()));
        checked += 1;
    }

    let nominal = propagate_nominal(&spec.agents, 2.0 * PI, 2.0 * PI / 1000.0).unwrap();
    let mut worst_rot: f64 = 0.0;
    for (t0, t1) in [(0.0, 1.0), (0.3, 2.9), (1.0, 2.0 * PI)] {
        let phi = state_transition(&nominal, t0, t1).unwrap();
        let d: f64 = t1 - t0;
        let rot = DMatrix::from_row_slice(2, 2, &[d.cos(), d.sin(), -d.sin(), d.cos()]);
        worst_rot = worst_rot.max((phi.view((0, 0), (2, 2)) - rot).amax());
    }

    let h = &free.exp.horizon;
    let diffusion = &spec.noise.input * &spec.noise.spectral_density * spec.noise.input.transpose();
    let m = spec.substeps;
    let mut worst_q: f64 = 0.0;
    let mut min_q_eig = f64::INFINITY;
    for (k, step) in free.steps().iter().enumerate() {
        let t0 = spec.dt * k as f64;
        let t1 = spec.dt * (k + 1) as f64;
        let tau = |i: usize| t0 + (t1 - t0) * i as f64 / m as f64;
        let integrand = |s: f64| {
            let phi = state_transition(&h.nominal, s, t1).unwrap();
            &phi * &diffusion * phi.transpose()
        };
        let mut q = integrand(tau(0)) + integrand(tau(m));
        for i in 1..m {
            q += integrand(tau(i)) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        q *= (t1 - t0) / m as f64 / 3.0;
        let bq = &step.b * &step.q * step.b.transpose();
        worst_q = worst_q.max(rel_err(&bq, &q));
        min_q_eig = min_q_eig.min(min_eigenvalue(&step.q));
    }

    let ok = worst_f <= JACOBIAN_TOL
        && worst_h <= JACOBIAN_TOL
        && worst_rot <= ROTATION_TOL
        && worst_q <= QUADRATURE_TOL
        && min_q_eig >= 0.0;
    Outcome::new(
        5,
        ok,
        format!(
            "kernels; dynamics Jacobian {worst_f:.1e}, range Jacobian {worst_h:.1e} (tol {JACOBIAN_TOL:e}, {JACOBIAN_POINTS} points); harmonic rotation {worst_rot:.1e} (tol {ROTATION_TOL:e}); Q_k vs quadrature {worst_q:.1e} (tol {QUADRATURE_TOL:e}); min eig Q_k {min_q_eig:.1e}"
        ),
    )
}

fn criterion_6(free: &Scenario, blocked: &Scenario) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (tag, s) in [("free", free), ("blocked", blocked)] {
        let objs: Vec<(String, f64)> = s
            .results
            .iter()
            .filter(|r| r.schedule.status == ScheduleStatus::Optimal)
            .map(|r| (r.case.label.clone(), r.schedule.history[0].weighted_objective))
            .collect();
        for w in objs.windows(2) {
            if w[1].1 > w[0].1 * (1.0 + MONOTONE_REL_TOL) {
                ok = false;
            }
        }
        let shown: Vec<String> = objs.iter().map(|(l, v)| format!("{l}:{v:.6}")).collect();
        parts.push(format!("{tag} ℓ1 [{}]", shown.join(" ")));
    }
    if free.results.iter().filter(|r| r.schedule.status == ScheduleStatus::Optimal).count() < 2 {
        ok = false;
    }

    let mut worst_masked: f64 = 0.0;
    let mut masked_cells = 0;
    for r in &blocked.results {
        let per_step = blocked.exp.batch.channels_per_step();
        for k in 0..r.case.bounds.nrows() {
            for c in 0..per_step {
                if r.case.bounds[(k, c)] != 0.0 {
                    continue;
                }
                masked_cells += 1;
                let j = k * per_step + c;
                worst_masked = worst_masked.max(r.schedule.s[j].abs());
                worst_masked = worst_masked.max(r.schedule.gain.column(j).amax());
            }
        }
    }
    ok &= masked_cells > 0 && worst_masked <= MASKED_TOL;
    Outcome::new(
        6,
        ok,
        format!(
            "monotone objective and masking; {}; {masked_cells} masked cells, largest |s|,|G| {worst_masked:.1e} (tol {MASKED_TOL:e})",
            parts.join("; ")
        ),
    )
}

fn run_binary(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_sensorsched"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn criterion_7() -> Outcome {
    let config = config_path("reference.toml");
    let config = config.to_str().unwrap();
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut runs = Vec::new();
    let mut all_ran = true;
    for i in 0..2 {
        let out = tmp.path().join(format!("run{i}"));
        let out_s = out.to_str().unwrap();
        let common = ["--config", config, "--out", out_s, "--seed", "17"];
        all_ran &= run_binary(&[&["simulate"][..], &common].concat());
        all_ran &= run_binary(&[&["optimize"][..], &common, &["--s-max", "750"]].concat());
        all_ran &= run_binary(&[&["validate"][..], &common, &["--s-max", "750", "--trials", "300"]].concat());
        runs.push(csv_files(&out));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    let ok = all_ran && !runs[0].is_empty() && runs[0] == runs[1];
    Outcome::new(
        7,
        ok,
        format!(
            "two runs with seed 17 produce byte-identical CSV files [{}]{}",
            names.join(", "),
            if all_ran { "" } else { "; a run exited nonzero" }
        ),
    )
}

fn main() -> ExitCode {
    let free = Scenario::solve("reference.toml");
    let blocked = Scenario::solve("blocked.toml");
    let outcomes = vec![
        criterion_1(&free, &blocked),
        criterion_2(&free, &blocked),
        criterion_3(&free, &blocked),
        criterion_4(),
        criterion_5(&free),
        criterion_6(&free, &blocked),
        criterion_7(),
    ];
    for o in &outcomes {
        o.print();
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| o.verdict == Verdict::Fail).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria met");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
