//! Linearization along the nominal trajectory: state-transition matrices,
//! continuous mean/covariance propagation and the discrete process noise
//! that makes the sampled covariances consistent.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dynamics::{field_unchecked, jacobian_unchecked, NominalTrajectory};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{is_finite, max_abs, project_psd, symmetrize};

/// Continuous white-noise input `B_c w(t)` with spectral density `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousNoiseSpec {
    pub spectral_density: DMatrix<f64>,
    pub input: DMatrix<f64>,
}

impl ContinuousNoiseSpec {
    pub fn new(spectral_density: DMatrix<f64>, input: DMatrix<f64>) -> Result<Self> {
        check_dim(
            "noise spectral density",
            input.ncols(),
            spectral_density.nrows(),
        )?;
        check_dim(
            "noise spectral density",
            input.ncols(),
            spectral_density.ncols(),
        )?;
        if max_abs(&(&spectral_density - spectral_density.transpose())) > 1e-12 {
            return Err(Error::InvalidInput(
                "spectral density must be symmetric".into(),
            ));
        }
        Ok(Self {
            spectral_density,
            input,
        })
    }

    /// `B_c = I_agents ⊗ [0 1]ᵀ`: noise drives the second state of each agent.
    pub fn per_agent_acceleration(agents: usize, intensity: f64) -> Self {
        let mut input = DMatrix::zeros(2 * agents, agents);
        for i in 0..agents {
            input[(2 * i + 1, i)] = 1.0;
        }
        Self {
            spectral_density: DMatrix::identity(agents, agents) * intensity,
            input,
        }
    }

    fn diffusion(&self) -> DMatrix<f64> {
        &self.input * &self.spectral_density * self.input.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_dim("covariance rows", mean.len(), cov.nrows())?;
        check_dim("covariance cols", mean.len(), cov.ncols())?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// One step `x_{k+1} = A_k x_k + B_k w_k`, `w_k ~ N(0, Q_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStep {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLtvSystem {
    pub dt: f64,
    pub steps: Vec<DiscreteStep>,
}

impl DiscreteLtvSystem {
    pub fn state_dim(&self) -> usize {
        self.steps.first().map_or(0, |s| s.a.nrows())
    }

    pub fn noise_dim(&self) -> usize {
        self.steps.first().map_or(0, |s| s.b.ncols())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Integrates `[x; payload]` from `t0` to `t1`, where `x` follows the nominal
/// dynamics and `payload` evolves by `rhs(A_c(x), payload)`. Grid points are
/// hit exactly, so `x` reproduces the stored nominal there. `observe` is
/// called at every grid point reached (including `t0` when on-grid).
fn march<R, O>(
    nominal: &NominalTrajectory,
    t0: f64,
    t1: f64,
    payload: DVector<f64>,
    rhs: R,
    mut observe: O,
) -> Result<DVector<f64>>
where
    R: Fn(&DMatrix<f64>, &DVector<f64>) -> DVector<f64>,
    O: FnMut(usize, &DVector<f64>) -> Result<()>,
{
    nominal.check_inside(t0)?;
    nominal.check_inside(t1)?;
    if t1 < t0 {
        return Err(Error::InvalidInput(format!(
            "interval end {t1} precedes start {t0}"
        )));
    }
    let cfg = nominal.config();
    let n = cfg.state_dim();
    let h = nominal.step();
    let mut y = DVector::zeros(n + payload.len());
    y.rows_mut(0, n).copy_from(&nominal.state_at(t0)?);
    y.rows_mut(n, payload.len()).copy_from(&payload);

    let joint = |y: &DVector<f64>| {
        let x = y.rows(0, n).into_owned();
        let a = jacobian_unchecked(&x, cfg);
        let p = y.rows(n, y.len() - n).into_owned();
        let mut out = DVector::zeros(y.len());
        out.rows_mut(0, n).copy_from(&field_unchecked(&x, cfg));
        out.rows_mut(n, y.len() - n).copy_from(&rhs(&a, &p));
        out
    };

    let mut t = t0;
    let mut idx = match nominal.grid_index(t0) {
        Some(i) => {
            observe(i, &y.rows(n, y.len() - n).into_owned())?;
            i
        }
        None => (t0 / h).floor() as usize,
    };
    let end_idx = nominal.grid_index(t1);
    loop {
        let next_grid = nominal.time(idx + 1);
        let (target, on_grid) = match end_idx {
            Some(e) if idx >= e => break,
            Some(_) => (next_grid, true),
            None if next_grid < t1 - 1e-12 => (next_grid, true),
            None => (t1, false),
        };
        let dt = target - t;
        if dt > 0.0 {
            y = crate::dynamics::rk4_step(&joint, &y, dt);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                time: target,
                what: "linearized propagation",
            });
        }
        t = target;
        if !on_grid {
            break;
        }
        idx += 1;
        // Snap the nominal part onto the stored grid value to avoid drift.
        y.rows_mut(0, n).copy_from(nominal.state(idx));
        observe(idx, &y.rows(n, y.len() - n).into_owned())?;
    }
    Ok(y.rows(n, y.len() - n).into_owned())
}

fn mat_to_vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn vec_to_mat(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// `Φ(t1, t0)` from the variational equation `Φ̇ = A_c(t) Φ`, `Φ(t0) = I`.
pub fn state_transition(nominal: &NominalTrajectory, t0: f64, t1: f64) -> Result<DMatrix<f64>> {
    let n = nominal.config().state_dim();
    let phi0 = mat_to_vec(&DMatrix::identity(n, n));
    let out = march(
        nominal,
        t0,
        t1,
        phi0,
        |a, p| mat_to_vec(&(a * vec_to_mat(p, n))),
        |_, _| Ok(()),
    )?;
    Ok(vec_to_mat(&out, n))
}

/// Mean and covariance samples on the nominal grid.
#[derive(Debug, Clone)]
pub struct MeanCovSeries {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
}

/// Integrates `μ̇ = A_c μ`, `Σ̇ = A_c Σ + Σ A_cᵀ + B_c Q B_cᵀ` along the nominal
/// from `t = 0` to `t_end` (which must lie on the grid).
pub fn propagate_mean_cov(
    state0: &GaussianState,
    nominal: &NominalTrajectory,
    noise: &ContinuousNoiseSpec,
    t_end: f64,
) -> Result<MeanCovSeries> {
    let n = nominal.config().state_dim();
    check_dim("initial mean", n, state0.dim())?;
    check_dim("noise input rows", n, noise.input.nrows())?;
    let end = nominal.grid_index(t_end).ok_or_else(|| {
        Error::InvalidInput(format!("t_end = {t_end} is not a nominal grid point"))
    })?;
    let diffusion = noise.diffusion();

    let mut payload = DVector::zeros(n + n * n);
    payload.rows_mut(0, n).copy_from(&state0.mean);
    payload
        .rows_mut(n, n * n)
        .copy_from(&mat_to_vec(&symmetrize(&state0.cov)));

    let mut times = Vec::with_capacity(end + 1);
    let mut states = Vec::with_capacity(end + 1);
    march(
        nominal,
        0.0,
        nominal.time(end),
        payload,
        |a, p| {
            let mu = p.rows(0, n).into_owned();
            let s = vec_to_mat(&p.rows(n, n * n).into_owned(), n);
            let ds = a * &s + &s * a.transpose() + &diffusion;
            let mut out = DVector::zeros(p.len());
            out.rows_mut(0, n).copy_from(&(a * mu));
            out.rows_mut(n, n * n).copy_from(&mat_to_vec(&ds));
            out
        },
        |i, p| {
            let cov = symmetrize(&vec_to_mat(&p.rows(n, n * n).into_owned(), n));
            if !is_finite(&cov) {
                return Err(Error::Divergence {
                    time: nominal.time(i),
                    what: "covariance",
                });
            }
            times.push(nominal.time(i));
            states.push(GaussianState {
                mean: p.rows(0, n).into_owned(),
                cov,
            });
            Ok(())
        },
    )?;
    Ok(MeanCovSeries { times, states })
}

/// `Q_k = Σ(t_{k+1}) − A_k Σ(t_k) A_kᵀ`, symmetrized and projected onto the
/// PSD cone (eigenvalues below 1e-12 set to zero).
pub fn discretize_process_noise(
    covariances: &[DMatrix<f64>],
    transitions: &[DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    check_dim(
        "covariance samples",
        transitions.len() + 1,
        covariances.len(),
    )?;
    transitions
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let q = symmetrize(&(&covariances[k + 1] - a * &covariances[k] * a.transpose()));
            let eig = SymmetricEigen::new(q.clone());
            let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if lo < -1e-6 * scale {
                return Err(Error::NoiseInconsistency {
                    step: k,
                    min_eigenvalue: lo,
                });
            }
            Ok(project_psd(&q, 1e-12))
        })
        .collect()
}

/// The sampled linearized model on `t_k = k·dt`, `k = 0..=count`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub system: DiscreteLtvSystem,
    /// Unconditioned mean/covariance at each `t_k`.
    pub samples: Vec<GaussianState>,
    /// Same statistics on the fine integration grid.
    pub fine: MeanCovSeries,
}

/// Builds `A_k = Φ(t_{k+1}, t_k)`, `B_k = I` and `Q_k` for `count` steps.
pub fn discretize(
    nominal: &NominalTrajectory,
    noise: &ContinuousNoiseSpec,
    initial: &GaussianState,
    dt: f64,
    count: usize,
) -> Result<Discretization> {
    if !(dt > 0.0) || count == 0 {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and at least one step, got dt = {dt}, count = {count}"
        )));
    }
    let n = nominal.config().state_dim();
    let t_end = dt * count as f64;
    let sample_idx: Vec<usize> = (0..=count)
        .map(|k| {
            nominal.grid_index(dt * k as f64).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "sample time {} is not on the nominal grid",
                    dt * k as f64
                ))
            })
        })
        .collect::<Result<_>>()?;
    let fine = propagate_mean_cov(initial, nominal, noise, t_end)?;
    let samples: Vec<GaussianState> = sample_idx.iter().map(|&i| fine.states[i].clone()).collect();
    let transitions: Vec<DMatrix<f64>> = (0..count)
        .map(|k| state_transition(nominal, dt * k as f64, dt * (k + 1) as f64))
        .collect::<Result<_>>()?;
    let covs: Vec<DMatrix<f64>> = samples.iter().map(|s| s.cov.clone()).collect();
    let qs = discretize_process_noise(&covs, &transitions)?;
    let steps = transitions
        .into_iter()
        .zip(qs)
        .map(|(a, q)| DiscreteStep {
            a,
            b: DMatrix::identity(n, n),
            q,
        })
        .collect();
    Ok(Discretization {
        system: DiscreteLtvSystem { dt, steps },
        samples,
        fine,
    })
}
