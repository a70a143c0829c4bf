//! End-to-end preparation of one scheduling horizon: nominal trajectory,
//! linearized discrete model, measurement matrices and the batch system.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::discretization::{discretize, ContinuousNoiseSpec, Discretization, GaussianState};
use crate::dynamics::{propagate_nominal, AgentKind, AgentModel, MultiAgentConfig, NominalTrajectory};
use crate::error::{Error, Result};
use crate::kalman::{build_batch, BatchSystem};
use crate::sensing::{measurement_jacobian, RelativePair, SensingTopology, StationLink};

/// Everything needed to build a horizon.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub agents: MultiAgentConfig,
    pub topology: SensingTopology,
    pub noise: ContinuousNoiseSpec,
    /// Statistics at `t = 0`, which is also the horizon start.
    pub initial: GaussianState,
    /// Measurement interval.
    pub dt: f64,
    /// Number of measurement steps `p`; measurements at `t_k = k·dt`, `k = 1..=p`.
    pub horizon: usize,
    /// RK4 steps per measurement interval.
    pub substeps: usize,
}

/// Initial nominal state of the three-agent scenario.
pub const REFERENCE_INITIAL_STATE: [f64; 6] = [3.0, 0.0, 1.7636, 0.5215, -1.7636, 0.5215];

impl ScenarioSpec {
    /// Three agents (one harmonic primary, two Van der Pol secondaries with
    /// `c = 0.9`), four stations ranging the primary, two relative ranges,
    /// `μ(0) = 0.05·x̂(0)`, `Σ(0) = 0.01·diag|μ(0)|`, acceleration noise
    /// density `0.05²`, ten measurements per period `2π`.
    ///
    /// `third` selects the model of the last agent.
    pub fn reference(third: AgentKind) -> Self {
        let x0 = DVector::from_column_slice(&REFERENCE_INITIAL_STATE);
        let agents = MultiAgentConfig::new(
            vec![
                AgentModel::harmonic(),
                AgentModel::van_der_pol(0.9),
                AgentModel::with_kind(third, 0.9),
            ],
            1,
            x0.clone(),
        )
        .expect("reference agents are valid");
        let topology = SensingTopology::new(
            vec![[3.0, -3.0], [-3.0, -3.0], [-3.0, 3.0], [3.0, 3.0]],
            (0..4).map(|s| StationLink { station: s, agent: 0 }).collect(),
            vec![
                RelativePair { observer: 0, target: 1 },
                RelativePair { observer: 0, target: 2 },
            ],
            &agents,
        )
        .expect("reference topology is valid");
        let mean = &x0 * 0.05;
        let cov = DMatrix::from_diagonal(&mean.map(|m| 0.01 * m.abs()));
        Self {
            agents,
            topology,
            noise: ContinuousNoiseSpec::per_agent_acceleration(3, 0.0025),
            initial: GaussianState { mean, cov },
            dt: 0.1 * 2.0 * PI,
            horizon: 10,
            substeps: 100,
        }
    }
}

/// A prepared horizon.
#[derive(Debug, Clone)]
pub struct Horizon {
    pub nominal: NominalTrajectory,
    pub discretization: Discretization,
    /// `C_k` at `t_k`, `k = 1..=p`.
    pub measurement_matrices: Vec<DMatrix<f64>>,
    pub batch: BatchSystem,
}

impl Horizon {
    /// Trace of the prior covariance at the last measurement instant.
    pub fn final_prior_trace(&self) -> f64 {
        self.batch.final_prior_cov().trace()
    }
}

pub fn prepare(spec: &ScenarioSpec) -> Result<Horizon> {
    if spec.horizon == 0 || spec.substeps == 0 || !(spec.dt > 0.0) {
        return Err(Error::InvalidInput(
            "horizon, substeps and dt must be positive".into(),
        ));
    }
    let t_end = spec.dt * spec.horizon as f64;
    let nominal = propagate_nominal(&spec.agents, t_end, spec.dt / spec.substeps as f64)?;
    let discretization = discretize(&nominal, &spec.noise, &spec.initial, spec.dt, spec.horizon)?;
    let measurement_matrices = (1..=spec.horizon)
        .map(|k| {
            let idx = nominal
                .grid_index(spec.dt * k as f64)
                .ok_or_else(|| Error::InvalidInput(format!("t_{k} not on the nominal grid")))?;
            measurement_jacobian(nominal.state(idx), &spec.topology)
        })
        .collect::<Result<Vec<_>>>()?;
    let batch = build_batch(
        &discretization.system.steps,
        &measurement_matrices,
        &spec.initial,
        spec.horizon,
    )?;
    Ok(Horizon {
        nominal,
        discretization,
        measurement_matrices,
        batch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_dimensions() {
        let h = prepare(&ScenarioSpec::reference(AgentKind::VanDerPolMirrored)).unwrap();
        assert_eq!(h.batch.state_dim(), 6);
        assert_eq!(h.batch.channels_per_step(), 6);
        assert_eq!(h.batch.horizon(), 10);
        assert_eq!(h.measurement_matrices.len(), 10);
        let sampled = &h.discretization.samples[10].cov;
        assert!((h.batch.final_prior_cov() - sampled).amax() < 1e-8 * sampled.amax());
    }
}
