//! Sequential Kalman recursions and the stacked horizon ("batch") model.
//!
//! All covariance updates use the Joseph form, which stays valid for
//! suboptimal gains.

use nalgebra::{DMatrix, DVector};

use crate::discretization::{DiscreteStep, GaussianState};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{min_eigenvalue, psd_sqrt, symmetrize};

/// `μ⁻ = A μ⁺`, `Σ⁻ = A Σ⁺ Aᵀ + B Q Bᵀ`.
pub fn kf_predict(
    state: &GaussianState,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<GaussianState> {
    let n = state.dim();
    check_dim("predict A rows", n, a.nrows())?;
    check_dim("predict A cols", n, a.ncols())?;
    check_dim("predict B rows", n, b.nrows())?;
    check_dim("predict Q", b.ncols(), q.nrows())?;
    check_dim("predict Q", b.ncols(), q.ncols())?;
    Ok(GaussianState {
        mean: a * &state.mean,
        cov: symmetrize(&(a * &state.cov * a.transpose() + b * q * b.transpose())),
    })
}

/// `K = Σ Cᵀ (C Σ Cᵀ + R)⁻¹`.
pub fn kalman_gain(
    cov: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r_diag: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_dim("gain C cols", cov.nrows(), c.ncols())?;
    check_dim("gain R", c.nrows(), r_diag.len())?;
    if c.nrows() == 0 {
        return Ok(DMatrix::zeros(cov.nrows(), 0));
    }
    let pct = cov * c.transpose();
    let innov = symmetrize(&(c * &pct + DMatrix::from_diagonal(r_diag)));
    let chol = innov.cholesky().ok_or_else(|| {
        Error::Numerical("innovation covariance is not positive definite".into())
    })?;
    // K = P Cᵀ S⁻¹  ⇔  S Kᵀ = C P
    Ok(chol.solve(&pct.transpose()).transpose())
}

/// Measurement update with noise variances `r_diag`. Channels that should not
/// be used must be removed from `c`, `r_diag` and `y` beforehand.
pub fn kf_update(
    state: &GaussianState,
    c: &DMatrix<f64>,
    r_diag: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<GaussianState> {
    check_dim("update y", c.nrows(), y.len())?;
    if r_diag.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput(
            "measurement variances must be positive".into(),
        ));
    }
    let k = kalman_gain(&state.cov, c, r_diag)?;
    Ok(joseph_update(state, c, r_diag, y, &k))
}

fn joseph_update(
    state: &GaussianState,
    c: &DMatrix<f64>,
    r_diag: &DVector<f64>,
    y: &DVector<f64>,
    k: &DMatrix<f64>,
) -> GaussianState {
    let n = state.dim();
    let ikc = DMatrix::identity(n, n) - k * c;
    let cov = &ikc * &state.cov * ikc.transpose() + k * DMatrix::from_diagonal(r_diag) * k.transpose();
    GaussianState {
        mean: &state.mean + k * (y - c * &state.mean),
        cov: symmetrize(&cov),
    }
}

/// Update with per-channel precisions; zero-precision channels are dropped.
pub fn kf_update_precisions(
    state: &GaussianState,
    c: &DMatrix<f64>,
    precisions: &[f64],
    y: &DVector<f64>,
) -> Result<GaussianState> {
    check_dim("precision count", c.nrows(), precisions.len())?;
    check_dim("update y", c.nrows(), y.len())?;
    if precisions.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::InvalidInput("precisions must be non-negative".into()));
    }
    let active: Vec<usize> = (0..precisions.len()).filter(|&i| precisions[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(state.clone());
    }
    let ca = c.select_rows(active.iter());
    let r = DVector::from_iterator(active.len(), active.iter().map(|&i| 1.0 / precisions[i]));
    let ya = DVector::from_iterator(active.len(), active.iter().map(|&i| y[i]));
    kf_update(state, &ca, &r, &ya)
}

/// Horizon-stacked model for one batch update.
#[derive(Debug, Clone)]
pub struct BatchSystem {
    /// Stacked transition from the horizon start, `(np)×n`.
    pub a_bar: DMatrix<f64>,
    /// Block lower-triangular noise map, `(np)×(mp)`.
    pub b_bar: DMatrix<f64>,
    /// Block-diagonal measurement matrix, `(m_y p)×(np)`.
    pub c_bar: DMatrix<f64>,
    /// Block-diagonal process noise, `(mp)×(mp)`.
    pub q_bar: DMatrix<f64>,
    /// Stacked prior mean.
    pub mean: DVector<f64>,
    /// Stacked prior covariance.
    pub cov: DMatrix<f64>,
    /// Principal square root of [`BatchSystem::cov`].
    pub cov_sqrt: DMatrix<f64>,
    state_dim: usize,
    channels: usize,
    horizon: usize,
}

impl BatchSystem {
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn channels_per_step(&self) -> usize {
        self.channels
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn measurement_dim(&self) -> usize {
        self.channels * self.horizon
    }

    /// `M = [0 … 0 I]`, selecting the last state block.
    pub fn selector(&self) -> DMatrix<f64> {
        let n = self.state_dim;
        let mut m = DMatrix::zeros(n, n * self.horizon);
        m.view_mut((0, n * (self.horizon - 1)), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        m
    }

    /// Prior covariance at the horizon end, `M Σ̄⁻ Mᵀ`.
    pub fn final_prior_cov(&self) -> DMatrix<f64> {
        let n = self.state_dim;
        self.cov
            .view((n * (self.horizon - 1), n * (self.horizon - 1)), (n, n))
            .into_owned()
    }

    pub fn final_prior_mean(&self) -> DVector<f64> {
        let n = self.state_dim;
        self.mean.rows(n * (self.horizon - 1), n).into_owned()
    }

    /// Stacked index of (step within horizon, channel).
    pub fn channel_index(&self, step: usize, channel: usize) -> usize {
        step * self.channels + channel
    }
}

/// Stacks `horizon` steps starting from the posterior at the horizon start.
/// `steps[j]` propagates to step `j+1`; `meas[j]` observes step `j+1`.
pub fn build_batch(
    steps: &[DiscreteStep],
    meas: &[DMatrix<f64>],
    posterior: &GaussianState,
    horizon: usize,
) -> Result<BatchSystem> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if steps.len() < horizon || meas.len() < horizon {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} needs {horizon} steps and measurement matrices, got {} and {}",
            steps.len(),
            meas.len()
        )));
    }
    let n = posterior.dim();
    let m = steps[0].b.ncols();
    let my = meas[0].nrows();
    for (j, s) in steps[..horizon].iter().enumerate() {
        check_dim("batch A", n, s.a.nrows())?;
        check_dim("batch A", n, s.a.ncols())?;
        check_dim("batch B rows", n, s.b.nrows())?;
        check_dim("batch B cols", m, s.b.ncols())?;
        check_dim("batch Q", m, s.q.nrows())?;
        check_dim("batch C rows", my, meas[j].nrows())?;
        check_dim("batch C cols", n, meas[j].ncols())?;
    }
    let p = horizon;

    let mut a_bar = DMatrix::zeros(n * p, n);
    let mut cum = DMatrix::identity(n, n);
    for i in 0..p {
        cum = &steps[i].a * cum;
        a_bar.view_mut((i * n, 0), (n, n)).copy_from(&cum);
    }

    // Block (i, j), j ≤ i: A_i ⋯ A_{j+1} B_j, built column by column.
    let mut b_bar = DMatrix::zeros(n * p, m * p);
    for j in 0..p {
        let mut blk = steps[j].b.clone();
        b_bar.view_mut((j * n, j * m), (n, m)).copy_from(&blk);
        for i in (j + 1)..p {
            blk = &steps[i].a * blk;
            b_bar.view_mut((i * n, j * m), (n, m)).copy_from(&blk);
        }
    }

    let mut c_bar = DMatrix::zeros(my * p, n * p);
    let mut q_bar = DMatrix::zeros(m * p, m * p);
    for j in 0..p {
        c_bar.view_mut((j * my, j * n), (my, n)).copy_from(&meas[j]);
        q_bar.view_mut((j * m, j * m), (m, m)).copy_from(&steps[j].q);
    }

    let mean = &a_bar * &posterior.mean;
    let cov = symmetrize(
        &(&a_bar * &posterior.cov * a_bar.transpose() + &b_bar * &q_bar * b_bar.transpose()),
    );
    let cov_sqrt = psd_sqrt(&cov, 1e-8, "stacked prior covariance")?;

    Ok(BatchSystem {
        a_bar,
        b_bar,
        c_bar,
        q_bar,
        mean,
        cov,
        cov_sqrt,
        state_dim: n,
        channels: my,
        horizon: p,
    })
}

fn check_gain_shape(batch: &BatchSystem, gain: &DMatrix<f64>, precisions: &[f64]) -> Result<()> {
    check_dim("gain rows", batch.state_dim, gain.nrows())?;
    check_dim("gain cols", batch.measurement_dim(), gain.ncols())?;
    check_dim("precision vector", batch.measurement_dim(), precisions.len())?;
    if precisions.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidInput(
            "precisions must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Posterior at the horizon end for the reduced gain `G = M K̄`:
/// `Σ⁺ = N Σ̄⁻ Nᵀ + G R̄ Gᵀ`, `N = M − G C̄`, with `R̄ = diag(s̄)⁻¹` over the
/// active channels. The mean uses `innovation = ȳ − C̄ μ̄⁻` when given and the
/// prior mean otherwise.
pub fn batch_posterior_stats(
    batch: &BatchSystem,
    gain: &DMatrix<f64>,
    precisions: &[f64],
    innovation: Option<&DVector<f64>>,
) -> Result<GaussianState> {
    check_gain_shape(batch, gain, precisions)?;
    let mut noise = DMatrix::zeros(batch.state_dim, batch.state_dim);
    for (i, &s) in precisions.iter().enumerate() {
        let col = gain.column(i);
        if s == 0.0 {
            if col.amax() > 0.0 {
                return Err(Error::Contract(format!(
                    "gain column {i} is nonzero on a zero-precision channel"
                )));
            }
            continue;
        }
        noise += (col * col.transpose()) / s;
    }
    let nmat = batch.selector() - gain * &batch.c_bar;
    let cov = symmetrize(&(&nmat * &batch.cov * nmat.transpose() + noise));
    let mut mean = batch.final_prior_mean();
    if let Some(v) = innovation {
        check_dim("innovation", batch.measurement_dim(), v.len())?;
        mean += gain * v;
    }
    Ok(GaussianState { mean, cov })
}

/// Optimal reduced gain `M K̄` for the given precisions. Zero-precision
/// channels get exactly zero columns.
///
/// Uses `K̄ = Σ̄ C̄ᵀ S^½ (S^½ C̄ Σ̄ C̄ᵀ S^½ + I)⁻¹ S^½`, which is the usual gain
/// with `R̄ = S⁻¹` but stays defined when some precisions vanish.
pub fn optimal_batch_gain(batch: &BatchSystem, precisions: &[f64]) -> Result<DMatrix<f64>> {
    check_dim("precision vector", batch.measurement_dim(), precisions.len())?;
    if precisions.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidInput(
            "precisions must be finite and non-negative".into(),
        ));
    }
    let my = batch.measurement_dim();
    let n = batch.state_dim;
    let active: Vec<usize> = (0..my).filter(|&i| precisions[i] > 0.0).collect();
    let mut gain = DMatrix::zeros(n, my);
    if active.is_empty() {
        return Ok(gain);
    }
    let root = DVector::from_iterator(active.len(), active.iter().map(|&i| precisions[i].sqrt()));
    let ca = batch.c_bar.select_rows(active.iter());
    // Scaled measurement matrix H = S^½ C̄ over the active rows.
    let mut h = ca;
    for (r, &w) in root.iter().enumerate() {
        h.row_mut(r).scale_mut(w);
    }
    let sel_cov = batch
        .cov
        .rows(n * (batch.horizon - 1), n)
        .into_owned();
    let inner = symmetrize(&(&h * &batch.cov * h.transpose())) + DMatrix::identity(active.len(), active.len());
    let chol = inner
        .cholesky()
        .ok_or_else(|| Error::Numerical("gain system not positive definite".into()))?;
    // M Σ̄ Hᵀ (H Σ̄ Hᵀ + I)⁻¹ S^½
    let rhs = (&sel_cov * h.transpose()).transpose();
    let mut g = chol.solve(&rhs).transpose();
    for (col, &w) in root.iter().enumerate() {
        g.column_mut(col).scale_mut(w);
    }
    for (col, &i) in active.iter().enumerate() {
        gain.set_column(i, &g.column(col));
    }
    Ok(gain)
}

/// Result of running the sequential filter across a horizon.
#[derive(Debug, Clone)]
pub struct FilterRun {
    /// Prior at each step `1..=p`.
    pub priors: Vec<GaussianState>,
    /// Posterior at each step `1..=p`.
    pub posteriors: Vec<GaussianState>,
}

/// Runs predict/update over the horizon with per-step precision vectors.
/// Without measurements the update uses `y = C μ⁻` (zero innovation), which
/// leaves covariances unaffected.
pub fn sequential_filter(
    steps: &[DiscreteStep],
    meas: &[DMatrix<f64>],
    start: &GaussianState,
    precisions: &[Vec<f64>],
    measurements: Option<&[DVector<f64>]>,
) -> Result<FilterRun> {
    let p = precisions.len();
    if steps.len() < p || meas.len() < p {
        return Err(Error::InvalidInput(
            "not enough steps or measurement matrices for the schedule".into(),
        ));
    }
    let mut state = start.clone();
    let mut priors = Vec::with_capacity(p);
    let mut posteriors = Vec::with_capacity(p);
    for j in 0..p {
        let s = &steps[j];
        state = kf_predict(&state, &s.a, &s.b, &s.q)?;
        priors.push(state.clone());
        let y = match measurements {
            Some(ys) => ys[j].clone(),
            None => &meas[j] * &state.mean,
        };
        state = kf_update_precisions(&state, &meas[j], &precisions[j], &y)?;
        posteriors.push(state.clone());
    }
    Ok(FilterRun { priors, posteriors })
}

/// Smallest eigenvalue of a covariance, for PSD checks in tests and reports.
pub fn covariance_floor(state: &GaussianState) -> f64 {
    min_eigenvalue(&state.cov)
}
