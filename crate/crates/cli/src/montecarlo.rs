//! Monte Carlo check of a precision schedule on the linearized model.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use sensorsched_core::kalman::sequential_filter;
use sensorsched_core::linalg::psd_sqrt;
use sensorsched_core::{DiscreteStep, GaussianState, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    /// Mean of `‖x_p − x̂_p‖²` over trials.
    pub empirical_trace: f64,
    pub standard_error: f64,
    /// Trace of the filter's posterior covariance at the last step.
    pub analytic_trace: f64,
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Draws `trials` truths `x_{k+1} = A_k x_k + B_k w_k` with
/// `x_0 ~ N(μ₀, Σ₀)`, measures them on channels with positive precision
/// (`R = diag(s)⁻¹`), runs the Kalman filter and averages the squared error
/// at the last step. `precisions` is step-major, one row per step.
///
/// Trial `i` draws from stream `i` of a ChaCha8 generator seeded with
/// `seed`, so results do not depend on thread scheduling.
pub fn run(
    steps: &[DiscreteStep],
    meas: &[DMatrix<f64>],
    start: &GaussianState,
    precisions: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    let p = precisions.len();
    let analytic = sequential_filter(steps, meas, start, precisions, None)?;
    let analytic_trace = analytic.posteriors[p - 1].cov.trace();
    if trials == 0 {
        return Ok(MonteCarloSummary {
            trials: 0,
            empirical_trace: f64::NAN,
            standard_error: f64::NAN,
            analytic_trace,
        });
    }
    let n = start.dim();
    let init_root = psd_sqrt(&start.cov, 1e-10, "initial covariance")?;
    let noise_roots = steps[..p]
        .iter()
        .map(|s| psd_sqrt(&s.q, 1e-10, "process noise"))
        .collect::<Result<Vec<_>>>()?;

    let errors = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut x = &start.mean + &init_root * normal_vector(&mut rng, n);
            let mut ys = Vec::with_capacity(p);
            for k in 0..p {
                let s = &steps[k];
                let w = &noise_roots[k] * normal_vector(&mut rng, s.q.nrows());
                x = &s.a * x + &s.b * w;
                let mut y = &meas[k] * &x;
                for (c, &prec) in precisions[k].iter().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if prec > 0.0 {
                        y[c] += z / prec.sqrt();
                    }
                }
                ys.push(y);
            }
            let run = sequential_filter(steps, meas, start, precisions, Some(&ys))?;
            Ok((x - &run.posteriors[p - 1].mean).norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;

    let mean = errors.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(MonteCarloSummary {
        trials,
        empirical_trace: mean,
        standard_error: (var / trials as f64).sqrt(),
        analytic_trace,
    })
}
