// Properties of the precision program checked against independent routes.
extern crate openblas_src;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensorsched_core::conic::verify;
use sensorsched_core::kalman::{batch_posterior_stats, build_batch, optimal_batch_gain};
use sensorsched_core::precision_opt::{
    assemble_lmi, optimal_posterior, prior_trace, reweighted_solve, schur_min_eigenvalue, solve_precisions,
    ReweightOptions, DEFAULT_ACTIVE_THRESHOLD,
};
use sensorsched_core::{BatchSystem, DiscreteStep, GaussianState, PrecisionProblem, ScheduleStatus, SolveOptions};

fn random_batch(rng: &mut ChaCha8Rng) -> BatchSystem {
    let n = rng.random_range(2..=3);
    let my = rng.random_range(1..=3);
    let p = rng.random_range(2..=4);
    let steps: Vec<DiscreteStep> = (0..p)
        .map(|_| DiscreteStep {
            a: DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3)),
            b: DMatrix::identity(n, n),
            q: DMatrix::identity(n, n) * rng.random_range(0.01..0.1),
        })
        .collect();
    let meas: Vec<DMatrix<f64>> = (0..p).map(|_| DMatrix::from_fn(my, n, |_, _| rng.random_range(-1.0..1.0))).collect();
    let start = GaussianState {
        mean: DVector::zeros(n),
        cov: DMatrix::identity(n, n) * rng.random_range(0.2..1.0),
    };
    build_batch(&steps, &meas, &start, p).unwrap()
}

/// γ strictly between the best reachable trace and the prior trace.
fn feasible_gamma(batch: &BatchSystem, s_max: &DMatrix<f64>, frac: f64) -> f64 {
    let full: Vec<f64> = s_max.transpose().iter().cloned().collect();
    let best = optimal_posterior(batch, &full).unwrap().trace();
    best + frac * (prior_trace(batch) - best)
}

fn stacked(s_max: &DMatrix<f64>) -> Vec<f64> {
    s_max.transpose().iter().cloned().collect()
}

/// Information form: min ρᵀs̄ s.t. [[W, M], [Mᵀ, Σ̄⁻¹ + C̄ᵀ diag(s̄) C̄]] ⪰ 0,
/// tr W ≤ γ, 0 ≤ s̄ ≤ s_max, solved by Clarabel.
fn information_form_objective(batch: &BatchSystem, gamma: f64, smax: &[f64], rho: &[f64]) -> (SolverStatus, f64) {
    let n = batch.state_dim();
    let np = batch.cov.nrows();
    let ms = smax.len();
    let info = batch.cov.clone().try_inverse().unwrap();
    let sel = batch.selector();
    let d = n + np;
    // Variables: W (upper triangle, column-wise), then s̄.
    let nw = n * (n + 1) / 2;
    let nv = nw + ms;
    let wslot = |i: usize, j: usize| {
        let (i, j) = (i.min(j), i.max(j));
        j * (j + 1) / 2 + i
    };
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut b = Vec::new();
    // tr W ≤ γ
    rows.push((0..n).map(|i| (wslot(i, i), 1.0)).collect());
    b.push(gamma);
    for i in 0..ms {
        rows.push(vec![(nw + i, -1.0)]);
        b.push(0.0);
        rows.push(vec![(nw + i, 1.0)]);
        b.push(smax[i]);
    }
    let r2 = 2f64.sqrt();
    for j in 0..d {
        for i in 0..=j {
            let sc = if i == j { 1.0 } else { r2 };
            let mut row = Vec::new();
            let constant = if j < n {
                0.0
            } else if i < n {
                sel[(i, j - n)]
            } else {
                info[(i - n, j - n)]
            };
            if j < n {
                // W_ij = v[slot] directly.
                row.push((wslot(i, j), -sc));
            } else if i >= n {
                for c in 0..ms {
                    let v = batch.c_bar[(c, i - n)] * batch.c_bar[(c, j - n)];
                    if v != 0.0 {
                        row.push((nw + c, -sc * v));
                    }
                }
            }
            rows.push(row);
            b.push(sc * constant);
        }
    }
    let mut a = vec![vec![0.0; nv]; rows.len()];
    for (r, row) in rows.iter().enumerate() {
        for &(i, v) in row {
            a[r][i] += v;
        }
    }
    let mut q = vec![0.0; nv];
    q[nw..].copy_from_slice(rho);
    let cones = [SupportedConeT::NonnegativeConeT(1 + 2 * ms), SupportedConeT::PSDTriangleConeT(d)];
    let settings = DefaultSettings { verbose: false, ..DefaultSettings::default() };
    let mut solver =
        DefaultSolver::new(&CscMatrix::zeros((nv, nv)), &q, &CscMatrix::from(&a), &b, &cones, settings).unwrap();
    solver.solve();
    (solver.solution.status, solver.solution.obj_val)
}

#[test]
fn information_form_reaches_the_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..10 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let s_max = DMatrix::from_fn(p, my, |_, _| rng.random_range(5.0..50.0));
        let gamma = feasible_gamma(&batch, &s_max, rng.random_range(0.2..0.8));
        let rho: Vec<f64> = (0..p * my).map(|_| rng.random_range(0.5..2.0)).collect();
        let prob = PrecisionProblem::with_weights(batch.clone(), gamma, s_max.clone(), rho.clone()).unwrap();
        let ours = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(ours.status, ScheduleStatus::Optimal, "trial {trial}: {}", ours.message);
        let (status, theirs) = information_form_objective(&batch, gamma, &stacked(&s_max), &rho);
        assert_eq!(status, SolverStatus::Solved, "trial {trial}");
        let rel = (ours.objective - theirs).abs() / (1.0 + theirs.abs());
        assert!(rel <= 1e-5, "trial {trial}: {} vs {theirs}", ours.objective);
    }
}

#[test]
fn no_update_point_is_feasible_exactly_when_the_prior_meets_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..10 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let s_max = DMatrix::from_element(p, my, 10.0);
        let prior = batch.final_prior_cov();
        let eps = 1e-6;
        let w = &prior + DMatrix::identity(prior.nrows(), prior.nrows()) * eps;
        let g = DMatrix::zeros(batch.state_dim(), p * my);
        let s = vec![0.0; p * my];
        for (gamma, expect) in [(w.trace() * 1.01, true), (w.trace() * 0.99, false)] {
            let prob = PrecisionProblem::new(batch.clone(), gamma, s_max.clone()).unwrap();
            let sdp = assemble_lmi(&prob).unwrap();
            let x = sdp.pack(&w, &g, &s);
            let rep = verify(&sdp.problem, &x, 1e-9);
            assert_eq!(rep.ok, expect, "{rep:?}");
            assert!(rep.lmi_min_eigenvalues[0] >= -1e-9);
        }
    }
}

#[test]
fn objective_is_monotone_in_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..6 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let levels = [450.0, 750.0, 1200.0];
        let gamma = feasible_gamma(&batch, &DMatrix::from_element(p, my, levels[0]), 0.3);
        let objs: Vec<f64> = levels
            .iter()
            .map(|&l| {
                let prob = PrecisionProblem::new(batch.clone(), gamma, DMatrix::from_element(p, my, l)).unwrap();
                let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
                assert_eq!(sched.status, ScheduleStatus::Optimal);
                sched.objective
            })
            .collect();
        // Ties are common when no bound is active; allow the cross-solve tolerance.
        for w in objs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-5), "{objs:?}");
        }
    }
}

#[test]
fn masked_channels_stay_silent() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let mut checked = 0;
    while checked < 6 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let mut s_max = DMatrix::from_element(p, my, 40.0);
        for _ in 0..(p * my / 3).max(1) {
            s_max[(rng.random_range(0..p), rng.random_range(0..my))] = 0.0;
        }
        if s_max.iter().all(|&x| x == 0.0) {
            continue;
        }
        let gamma = feasible_gamma(&batch, &s_max, 0.3);
        let prob = PrecisionProblem::new(batch, gamma, s_max.clone()).unwrap();
        let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(sched.status, ScheduleStatus::Optimal, "{}", sched.message);
        for (i, &bound) in stacked(&s_max).iter().enumerate() {
            if bound == 0.0 {
                assert!(sched.s[i].abs() <= 1e-9);
                assert!(sched.gain.column(i).norm() <= 1e-9);
            }
        }
        checked += 1;
    }
}

#[test]
fn zero_precision_channels_can_be_deleted() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    for _ in 0..6 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let s_max = DMatrix::from_element(p, my, 30.0);
        let gamma = feasible_gamma(&batch, &s_max, 0.4);
        let prob = PrecisionProblem::new(batch.clone(), gamma, s_max.clone()).unwrap();
        let first = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(first.status, ScheduleStatus::Optimal);
        let mut reduced = s_max.clone();
        for k in 0..p {
            for c in 0..my {
                if first.s[batch.channel_index(k, c)] <= DEFAULT_ACTIVE_THRESHOLD * 30.0 {
                    reduced[(k, c)] = 0.0;
                }
            }
        }
        let prob2 = PrecisionProblem::new(batch, gamma, reduced).unwrap();
        let second = solve_precisions(&prob2, &SolveOptions::default()).unwrap();
        assert_eq!(second.status, ScheduleStatus::Optimal);
        let rel = (first.objective - second.objective).abs() / first.objective.abs().max(1e-12);
        assert!(rel <= 1e-4, "{} vs {}", first.objective, second.objective);
    }
}

#[test]
fn optimal_results_carry_valid_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..8 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let s_max = DMatrix::from_element(p, my, 25.0);
        let gamma = feasible_gamma(&batch, &s_max, rng.random_range(0.1..0.9));
        let prob = PrecisionProblem::new(batch.clone(), gamma, s_max.clone()).unwrap();
        let sched = solve_precisions(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(sched.status, ScheduleStatus::Optimal);
        assert!(sched.w.trace() <= gamma * (1.0 + 1e-6));
        assert!(sched.s.iter().all(|&x| (-1e-8..=25.0 + 1e-8).contains(&x)));
        let schur = schur_min_eigenvalue(&batch, &sched.w, &sched.gain, &sched.s).unwrap();
        assert!(schur >= -1e-6, "{schur}");
        let sdp = assemble_lmi(&prob).unwrap();
        let rep = verify(&sdp.problem, &sdp.pack(&sched.w, &sched.gain, &sched.s), 1e-6);
        assert!(rep.lmi_min_eigenvalues[0] >= -1e-6, "{rep:?}");
        // The SDP's own gain meets γ; the optimal gain can only do better.
        let own = batch_posterior_stats(&batch, &sched.gain, &sched.s, None);
        if let Ok(own) = own {
            assert!(own.cov.trace() <= gamma * (1.0 + 1e-4));
        }
        assert!(optimal_posterior(&batch, &sched.s).unwrap().trace() <= gamma * (1.0 + 1e-4));
    }
}

#[test]
fn reweighting_never_returns_a_denser_schedule_than_seen() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let mut violations = 0;
    for trial in 0..20 {
        let batch = random_batch(&mut rng);
        let (p, my) = (batch.horizon(), batch.channels_per_step());
        let s_max = DMatrix::from_element(p, my, 40.0);
        let gamma = feasible_gamma(&batch, &s_max, rng.random_range(0.2..0.6));
        let prob = PrecisionProblem::new(batch, gamma, s_max).unwrap();
        let sched = reweighted_solve(&prob, &ReweightOptions::default(), &SolveOptions::default()).unwrap();
        assert_eq!(sched.status, ScheduleStatus::Optimal);
        let counts: Vec<usize> = sched.history.iter().map(|h| h.active_count).collect();
        if counts.windows(2).any(|w| w[1] > w[0]) {
            violations += 1;
            eprintln!("trial {trial}: active counts not monotone: {counts:?}");
        }
        assert_eq!(sched.active_count, *counts.iter().min().unwrap());
        assert!(sched.iterations <= 5);
    }
    eprintln!("reweighting monotonicity violations: {violations}/20");
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any precisions with their optimal gain and `W = Σ⁺` satisfy the LMI.
    #[test]
    fn optimal_gain_point_satisfies_the_lmi(seed in any::<u64>(), scale in 0.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = random_batch(&mut rng);
        let ms = batch.measurement_dim();
        let s: Vec<f64> = (0..ms).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..scale) }).collect();
        let gain = optimal_batch_gain(&batch, &s).unwrap();
        let post = batch_posterior_stats(&batch, &gain, &s, None).unwrap().cov;
        let w = &post + DMatrix::identity(post.nrows(), post.nrows()) * 1e-9;
        let block = sensorsched_core::precision_opt::lmi_block(&batch, &w, &gain, &s);
        prop_assert!(min_eig(block) >= -1e-8);
        let direct = optimal_posterior(&batch, &s).unwrap();
        prop_assert!((direct - post).amax() <= 1e-9);
    }

    /// Shrinking W below the posterior breaks the LMI.
    #[test]
    fn undersized_w_is_rejected(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = random_batch(&mut rng);
        let ms = batch.measurement_dim();
        let s: Vec<f64> = (0..ms).map(|_| rng.random_range(1.0..20.0)).collect();
        let gain = optimal_batch_gain(&batch, &s).unwrap();
        let post = optimal_posterior(&batch, &s).unwrap();
        let w = &post * 0.9;
        prop_assert!(schur_min_eigenvalue(&batch, &w, &gain, &s).unwrap() < 0.0);
    }
}
