//! Range measurement model, its Jacobian, and channel availability.
//!
//! Channel order is fixed: station links first (in the order given), then
//! relative agent pairs. Every precision grid, LMI block and report uses this
//! order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::MultiAgentConfig;
use crate::error::{check_dim, Error, Result};

/// A fixed tracking station ranging to one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationLink {
    pub station: usize,
    pub agent: usize,
}

/// An observer agent ranging to a target agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePair {
    pub observer: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingTopology {
    stations: Vec<[f64; 2]>,
    links: Vec<StationLink>,
    pairs: Vec<RelativePair>,
    state_dim: usize,
}

impl SensingTopology {
    /// Validates the topology against the agent configuration: station links
    /// may only reach primary agents, relative pairs must be observed by a
    /// primary agent and target a secondary one.
    pub fn new(
        stations: Vec<[f64; 2]>,
        links: Vec<StationLink>,
        pairs: Vec<RelativePair>,
        agents: &MultiAgentConfig,
    ) -> Result<Self> {
        let count = agents.agents().len();
        for (i, l) in links.iter().enumerate() {
            if l.station >= stations.len() {
                return Err(Error::InvalidInput(format!(
                    "link {i}: station {} does not exist",
                    l.station
                )));
            }
            if l.agent >= count || !agents.is_primary(l.agent) {
                return Err(Error::InvalidInput(format!(
                    "link {i}: agent {} is not a primary agent",
                    l.agent
                )));
            }
        }
        for (i, p) in pairs.iter().enumerate() {
            if p.observer >= count || !agents.is_primary(p.observer) {
                return Err(Error::InvalidInput(format!(
                    "pair {i}: observer {} is not a primary agent",
                    p.observer
                )));
            }
            if p.target >= count || agents.is_primary(p.target) {
                return Err(Error::InvalidInput(format!(
                    "pair {i}: target {} is not a secondary agent",
                    p.target
                )));
            }
        }
        if links.len() + pairs.len() == 0 {
            return Err(Error::InvalidInput("topology has no channels".into()));
        }
        Ok(Self {
            stations,
            links,
            pairs,
            state_dim: agents.state_dim(),
        })
    }

    pub fn channel_count(&self) -> usize {
        self.links.len() + self.pairs.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn stations(&self) -> &[[f64; 2]] {
        &self.stations
    }

    pub fn links(&self) -> &[StationLink] {
        &self.links
    }

    pub fn pairs(&self) -> &[RelativePair] {
        &self.pairs
    }

    /// `y1`, `y2`, ... in channel order.
    pub fn channel_labels(&self) -> Vec<String> {
        (1..=self.channel_count()).map(|i| format!("y{i}")).collect()
    }

    /// For each channel, the two position pairs it measures between:
    /// `(observed agent, reference point)`.
    fn geometry(&self, state: &DVector<f64>) -> Vec<(usize, Option<usize>, [f64; 2])> {
        let mut out = Vec::with_capacity(self.channel_count());
        for l in &self.links {
            out.push((l.agent, None, self.stations[l.station]));
        }
        for p in &self.pairs {
            let o = [state[2 * p.observer], state[2 * p.observer + 1]];
            out.push((p.target, Some(p.observer), o));
        }
        out
    }
}

/// Noise-free ranges in channel order.
pub fn range_measurement(state: &DVector<f64>, topology: &SensingTopology) -> Result<DVector<f64>> {
    check_dim("range_measurement state", topology.state_dim, state.len())?;
    let geo = topology.geometry(state);
    let mut y = DVector::zeros(geo.len());
    for (ch, (agent, _, from)) in geo.into_iter().enumerate() {
        let dx = state[2 * agent] - from[0];
        let dz = state[2 * agent + 1] - from[1];
        let r = dx.hypot(dz);
        if r == 0.0 {
            return Err(Error::Singularity { channel: ch });
        }
        y[ch] = r;
    }
    Ok(y)
}

/// `∂y/∂x` at `state`. Station rows carry the unit direction in the observed
/// agent's columns; relative rows carry it with opposite signs in the target
/// and observer columns.
pub fn measurement_jacobian(
    state: &DVector<f64>,
    topology: &SensingTopology,
) -> Result<DMatrix<f64>> {
    check_dim("measurement_jacobian state", topology.state_dim, state.len())?;
    let geo = topology.geometry(state);
    let mut c = DMatrix::zeros(geo.len(), state.len());
    for (ch, (agent, observer, from)) in geo.into_iter().enumerate() {
        let dx = state[2 * agent] - from[0];
        let dz = state[2 * agent + 1] - from[1];
        let r = dx.hypot(dz);
        if r == 0.0 {
            return Err(Error::Singularity { channel: ch });
        }
        c[(ch, 2 * agent)] = dx / r;
        c[(ch, 2 * agent + 1)] = dz / r;
        if let Some(o) = observer {
            c[(ch, 2 * o)] = -dx / r;
            c[(ch, 2 * o + 1)] = -dz / r;
        }
    }
    Ok(c)
}

/// Per-step, per-channel usability (`true` = usable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilityMask {
    steps: usize,
    channels: usize,
    usable: Vec<bool>,
}

impl AvailabilityMask {
    pub fn all_available(steps: usize, channels: usize) -> Self {
        Self {
            steps,
            channels,
            usable: vec![true; steps * channels],
        }
    }

    pub fn none_available(steps: usize, channels: usize) -> Self {
        Self {
            steps,
            channels,
            usable: vec![false; steps * channels],
        }
    }

    /// `step` and `channel` are zero-based.
    pub fn block(&mut self, step: usize, channel: usize) -> Result<()> {
        if step >= self.steps || channel >= self.channels {
            return Err(Error::InvalidInput(format!(
                "mask entry (step {step}, channel {channel}) outside {}×{}",
                self.steps, self.channels
            )));
        }
        self.usable[step * self.channels + channel] = false;
        Ok(())
    }

    pub fn is_usable(&self, step: usize, channel: usize) -> bool {
        self.usable[step * self.channels + channel]
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn blocked(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.steps)
            .flat_map(move |k| (0..self.channels).map(move |c| (k, c)))
            .filter(move |&(k, c)| !self.is_usable(k, c))
    }
}

/// Zeroes the precision upper bound of every unusable (step, channel).
pub fn apply_mask(mask: &AvailabilityMask, bounds: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("mask steps", mask.steps, bounds.nrows())?;
    check_dim("mask channels", mask.channels, bounds.ncols())?;
    let mut out = bounds.clone();
    for (k, c) in mask.blocked() {
        out[(k, c)] = 0.0;
    }
    Ok(out)
}
