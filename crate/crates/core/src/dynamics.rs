//! Nonlinear planar agent models, their Jacobians, and nominal trajectory
//! propagation.
//!
//! Every agent contributes two states, a position-like coordinate `x` and a
//! second coordinate `z`. The full state stacks agents in configuration
//! order: `[x1, z1, x2, z2, ...]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// `ẋ = z, ż = −x`
    HarmonicOscillator,
    /// `ẋ = z, ż = (1 − x²/c²) z − x/c`
    VanDerPol,
    /// `ẋ = −z, ż = (1 − x²/c²) z − x/c`
    VanDerPolReversed,
    /// `ẋ = −z, ż = (1 − x²/c²) z + x/c`, the image of [`AgentKind::VanDerPol`]
    /// under `x → −x`. Its orbits are closed where the reversed form's are not.
    VanDerPolMirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub kind: AgentKind,
    /// Shape parameter, only read by the Van der Pol variants.
    pub c: f64,
}

impl AgentModel {
    pub fn harmonic() -> Self {
        Self {
            kind: AgentKind::HarmonicOscillator,
            c: 1.0,
        }
    }

    pub fn van_der_pol(c: f64) -> Self {
        Self {
            kind: AgentKind::VanDerPol,
            c,
        }
    }

    pub fn with_kind(kind: AgentKind, c: f64) -> Self {
        Self { kind, c }
    }

    fn field(&self, x: f64, z: f64) -> (f64, f64) {
        let c = self.c;
        match self.kind {
            AgentKind::HarmonicOscillator => (z, -x),
            AgentKind::VanDerPol => (z, (1.0 - x * x / (c * c)) * z - x / c),
            AgentKind::VanDerPolReversed => (-z, (1.0 - x * x / (c * c)) * z - x / c),
            AgentKind::VanDerPolMirrored => (-z, (1.0 - x * x / (c * c)) * z + x / c),
        }
    }

    /// 2×2 Jacobian block, row-major.
    fn block(&self, x: f64, z: f64) -> [[f64; 2]; 2] {
        let c = self.c;
        let c2 = c * c;
        match self.kind {
            AgentKind::HarmonicOscillator => [[0.0, 1.0], [-1.0, 0.0]],
            AgentKind::VanDerPol => [[0.0, 1.0], [-2.0 * x * z / c2 - 1.0 / c, 1.0 - x * x / c2]],
            AgentKind::VanDerPolReversed => {
                [[0.0, -1.0], [-2.0 * x * z / c2 - 1.0 / c, 1.0 - x * x / c2]]
            }
            AgentKind::VanDerPolMirrored => {
                [[0.0, -1.0], [-2.0 * x * z / c2 + 1.0 / c, 1.0 - x * x / c2]]
            }
        }
    }
}

/// Ordered agent list with the primary/secondary split and the nominal
/// initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAgentConfig {
    agents: Vec<AgentModel>,
    primary_count: usize,
    initial_nominal: DVector<f64>,
}

impl MultiAgentConfig {
    pub fn new(
        agents: Vec<AgentModel>,
        primary_count: usize,
        initial_nominal: DVector<f64>,
    ) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidInput("at least one agent required".into()));
        }
        if primary_count > agents.len() {
            return Err(Error::InvalidInput(format!(
                "primary count {primary_count} exceeds agent count {}",
                agents.len()
            )));
        }
        for (i, a) in agents.iter().enumerate() {
            let vdp = !matches!(a.kind, AgentKind::HarmonicOscillator);
            if vdp && !(a.c > 0.0 && a.c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "agent {i}: Van der Pol shape parameter must be positive, got {}",
                    a.c
                )));
            }
        }
        check_dim("initial nominal state", 2 * agents.len(), initial_nominal.len())?;
        Ok(Self {
            agents,
            primary_count,
            initial_nominal,
        })
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn primary_count(&self) -> usize {
        self.primary_count
    }

    pub fn secondary_count(&self) -> usize {
        self.agents.len() - self.primary_count
    }

    pub fn state_dim(&self) -> usize {
        2 * self.agents.len()
    }

    pub fn initial_nominal(&self) -> &DVector<f64> {
        &self.initial_nominal
    }

    pub fn is_primary(&self, agent: usize) -> bool {
        agent < self.primary_count
    }
}

/// Noise-free time derivative of the stacked state.
pub fn vector_field(state: &DVector<f64>, config: &MultiAgentConfig) -> Result<DVector<f64>> {
    check_dim("vector_field state", config.state_dim(), state.len())?;
    Ok(field_unchecked(state, config))
}

pub(crate) fn field_unchecked(state: &DVector<f64>, config: &MultiAgentConfig) -> DVector<f64> {
    let mut out = DVector::zeros(state.len());
    for (i, agent) in config.agents.iter().enumerate() {
        let (dx, dz) = agent.field(state[2 * i], state[2 * i + 1]);
        out[2 * i] = dx;
        out[2 * i + 1] = dz;
    }
    out
}

/// Block-diagonal Jacobian of [`vector_field`].
pub fn jacobian(state: &DVector<f64>, config: &MultiAgentConfig) -> Result<DMatrix<f64>> {
    check_dim("jacobian state", config.state_dim(), state.len())?;
    Ok(jacobian_unchecked(state, config))
}

pub(crate) fn jacobian_unchecked(state: &DVector<f64>, config: &MultiAgentConfig) -> DMatrix<f64> {
    let n = state.len();
    let mut a = DMatrix::zeros(n, n);
    for (i, agent) in config.agents.iter().enumerate() {
        let b = agent.block(state[2 * i], state[2 * i + 1]);
        for r in 0..2 {
            for c in 0..2 {
                a[(2 * i + r, 2 * i + c)] = b[r][c];
            }
        }
    }
    a
}

/// One classical fourth-order Runge–Kutta step for `ẏ = f(y)`.
pub(crate) fn rk4_step<F>(f: F, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (h / 2.0)));
    let k3 = f(&(y + &k2 * (h / 2.0)));
    let k4 = f(&(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Nominal trajectory on a uniform grid `t_i = i·h`, `i = 0..=steps`.
#[derive(Debug, Clone)]
pub struct NominalTrajectory {
    config: MultiAgentConfig,
    step: f64,
    states: Vec<DVector<f64>>,
}

impl NominalTrajectory {
    pub fn config(&self) -> &MultiAgentConfig {
        &self.config
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|i| self.time(i)).collect()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &DVector<f64> {
        &self.states[i]
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.states.len() - 1)
    }

    /// Grid index of `t` when it lies on the grid (within 1e-9 of a step).
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let r = t / self.step;
        let i = r.round();
        if (r - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.states.len() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Nominal state at an arbitrary `t` inside the grid: a partial RK4 step
    /// from the grid point at or below `t`.
    pub fn state_at(&self, t: f64) -> Result<DVector<f64>> {
        self.check_inside(t)?;
        if let Some(i) = self.grid_index(t) {
            return Ok(self.states[i].clone());
        }
        let i = (t / self.step).floor() as usize;
        let dt = t - self.time(i);
        Ok(rk4_step(
            |y| field_unchecked(y, &self.config),
            &self.states[i],
            dt,
        ))
    }

    pub(crate) fn check_inside(&self, t: f64) -> Result<()> {
        let end = self.t_end();
        if !(t >= -1e-12 && t <= end + 1e-9 * end.max(1.0)) {
            return Err(Error::InvalidInput(format!(
                "time {t} outside nominal grid [0, {end}]"
            )));
        }
        Ok(())
    }
}

/// Integrates the noise-free dynamics from the configured initial condition
/// with fixed-step RK4.
///
/// The step is shrunk to `t_end / ceil(t_end / h)` so that `t_end` lands on
/// the grid.
pub fn propagate_nominal(
    config: &MultiAgentConfig,
    t_end: f64,
    h: f64,
) -> Result<NominalTrajectory> {
    if !(h > 0.0 && h.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need h > 0 and t_end > 0, got h = {h}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / h - 1e-9).ceil().max(1.0) as usize;
    let step = t_end / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = config.initial_nominal.clone();
    states.push(x.clone());
    for i in 0..steps {
        x = rk4_step(|y| field_unchecked(y, config), &x, step);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                time: (i + 1) as f64 * step,
                what: "nominal state",
            });
        }
        states.push(x.clone());
    }
    Ok(NominalTrajectory {
        config: config.clone(),
        step,
        states,
    })
}
