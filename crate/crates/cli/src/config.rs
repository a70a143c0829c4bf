//! TOML scenario configuration.
//!
//! Every table is optional and defaults to the three-agent reference
//! scenario, so an empty file is a valid configuration. Unknown keys are
//! rejected. Step and channel numbers in `[[mask]]` entries are one-based,
//! matching the `k = 1..p` and `y1..y_m` labels used in outputs.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sensorsched_core::conic::SolveOptions;
use sensorsched_core::dynamics::{AgentKind, AgentModel, MultiAgentConfig};
use sensorsched_core::precision_opt::ReweightOptions;
use sensorsched_core::scenario::REFERENCE_INITIAL_STATE;
use sensorsched_core::sensing::{apply_mask, RelativePair, StationLink};
use sensorsched_core::{AvailabilityMask, ContinuousNoiseSpec, GaussianState, ScenarioSpec, SensingTopology};

/// A configuration problem, located by its dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "reference_agents")]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub mask: Vec<MaskEntry>,
    #[serde(default)]
    pub reweight: ReweightConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Van der Pol shape parameter.
    #[serde(default = "one")]
    pub c: f64,
    /// Nominal `(x, z)` at `t = 0`.
    pub initial: [f64; 2],
    /// Primary agents must come first.
    #[serde(default)]
    pub primary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub stations: Vec<[f64; 2]>,
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub pairs: Vec<PairConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub station: usize,
    pub agent: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub observer: usize,
    pub target: usize,
}

/// Either one value for everything or one value per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn expand(&self, len: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; len]),
            Self::List(v) if v.len() == len => Ok(v.clone()),
            Self::List(v) => Err(ConfigError::new(path, format!("expected {len} entries, got {}", v.len()))),
        }
    }

    fn max(&self) -> f64 {
        match self {
            Self::Scalar(v) => *v,
            Self::List(v) => v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Spectral density of the acceleration noise on each agent's second
    /// state, scalar or per agent.
    pub acceleration_density: ScalarOrList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `μ(0) = mean_scale · x̂(0)` unless `mean` is given.
    #[serde(default = "default_mean_scale")]
    pub mean_scale: f64,
    /// `Σ(0) = cov_scale · diag|μ(0)|` unless `cov_diag` is given.
    #[serde(default = "default_cov_scale")]
    pub cov_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_diag: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    /// Reference period `T_p`.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Measurement interval; `period / 10` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Measurements per horizon.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// RK4 steps per measurement interval.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

impl TimingConfig {
    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.period / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaRule {
    Absolute(f64),
    /// Fraction of the prior covariance trace at the last step.
    PriorFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default = "default_gamma")]
    pub gamma: GammaRule,
    /// Precision bound cases; each is a scalar or one value per channel.
    #[serde(default = "default_s_max")]
    pub s_max: Vec<ScalarOrList>,
    /// Initial weights, one per (step, channel) in step-major order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskEntry {
    /// One-based measurement step.
    pub step: usize,
    /// One-based channels unavailable at `step`.
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweightConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Defaults to `1e-3 · max s_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_reweight_iters")]
    pub max_iters: usize,
    /// Relative to `max s_max`.
    #[serde(default = "default_active_threshold")]
    pub active_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_feas_tol")]
    pub feas_tol: f64,
    #[serde(default = "default_solver_iters")]
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_seed() -> u64 {
    7
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_mean_scale() -> f64 {
    0.05
}
fn default_cov_scale() -> f64 {
    0.01
}
fn default_period() -> f64 {
    2.0 * PI
}
fn default_steps() -> usize {
    10
}
fn default_substeps() -> usize {
    100
}
fn default_gamma() -> GammaRule {
    GammaRule::PriorFraction(0.1)
}
fn default_s_max() -> Vec<ScalarOrList> {
    vec![ScalarOrList::Scalar(450.0), ScalarOrList::Scalar(750.0), ScalarOrList::Scalar(1200.0)]
}
fn default_reweight_iters() -> usize {
    5
}
fn default_active_threshold() -> f64 {
    1e-6
}
fn default_gap_tol() -> f64 {
    SolveOptions::default().gap_tol
}
fn default_feas_tol() -> f64 {
    SolveOptions::default().feas_tol
}
fn default_solver_iters() -> usize {
    SolveOptions::default().max_iters
}
fn default_trials() -> usize {
    2000
}

fn reference_agents() -> Vec<AgentConfig> {
    let x = REFERENCE_INITIAL_STATE;
    vec![
        AgentConfig {
            kind: AgentKind::HarmonicOscillator,
            c: 1.0,
            initial: [x[0], x[1]],
            primary: true,
        },
        AgentConfig {
            kind: AgentKind::VanDerPol,
            c: 0.9,
            initial: [x[2], x[3]],
            primary: false,
        },
        AgentConfig {
            kind: AgentKind::VanDerPolMirrored,
            c: 0.9,
            initial: [x[4], x[5]],
            primary: false,
        },
    ]
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            stations: vec![[3.0, -3.0], [-3.0, -3.0], [-3.0, 3.0], [3.0, 3.0]],
            links: (0..4).map(|station| LinkConfig { station, agent: 0 }).collect(),
            pairs: vec![PairConfig { observer: 0, target: 1 }, PairConfig { observer: 0, target: 2 }],
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            acceleration_density: ScalarOrList::Scalar(0.0025),
        }
    }
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            mean_scale: default_mean_scale(),
            cov_scale: default_cov_scale(),
            mean: None,
            cov_diag: None,
        }
    }
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            period: default_period(),
            dt: None,
            steps: default_steps(),
            substeps: default_substeps(),
        }
    }
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            s_max: default_s_max(),
            rho: None,
        }
    }
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            epsilon: None,
            max_iters: default_reweight_iters(),
            active_threshold: default_active_threshold(),
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: default_gap_tol(),
            feas_tol: default_feas_tol(),
            max_iters: default_solver_iters(),
        }
    }
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { trials: default_trials() }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            agents: reference_agents(),
            sensing: SensingConfig::default(),
            noise: NoiseConfig::default(),
            initial: InitialConfig::default(),
            timing: TimingConfig::default(),
            objective: ObjectiveConfig::default(),
            mask: Vec::new(),
            reweight: ReweightConfig::default(),
            solver: SolverConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

/// One precision-bound case after masking.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCase {
    /// `450` for scalar cases, `case2` for per-channel ones.
    pub label: String,
    /// Largest bound before masking.
    pub nominal: f64,
    /// `p × m_y` bounds with masked cells zeroed.
    pub bounds: DMatrix<f64>,
}

fn positive(v: f64, path: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(v: f64, path: &str) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be non-negative and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("", e.to_string().trim_end()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().message().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON form, so equivalent files hash alike.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn channel_count(&self) -> usize {
        self.sensing.links.len() + self.sensing.pairs.len()
    }

    /// Cross-field checks that the schema cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n_agents = self.agents.len();
        if n_agents == 0 {
            return Err(ConfigError::new("agents", "at least one agent required"));
        }
        let primaries = self.agents.iter().take_while(|a| a.primary).count();
        if let Some(i) = self.agents.iter().skip(primaries).position(|a| a.primary) {
            return Err(ConfigError::new(
                format!("agents[{}].primary", primaries + i),
                "primary agents must be listed before secondary ones",
            ));
        }
        if primaries == 0 {
            return Err(ConfigError::new("agents", "at least one primary agent required"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.kind != AgentKind::HarmonicOscillator {
                positive(a.c, &format!("agents[{i}].c"))?;
            }
            if !a.initial.iter().all(|v| v.is_finite()) {
                return Err(ConfigError::new(format!("agents[{i}].initial"), "must be finite"));
            }
        }
        for (i, l) in self.sensing.links.iter().enumerate() {
            if l.station >= self.sensing.stations.len() {
                return Err(ConfigError::new(
                    format!("sensing.links[{i}].station"),
                    format!("station {} does not exist", l.station),
                ));
            }
            if l.agent >= primaries {
                return Err(ConfigError::new(
                    format!("sensing.links[{i}].agent"),
                    format!("agent {} is not a primary agent", l.agent),
                ));
            }
        }
        for (i, p) in self.sensing.pairs.iter().enumerate() {
            if p.observer >= primaries {
                return Err(ConfigError::new(
                    format!("sensing.pairs[{i}].observer"),
                    format!("agent {} is not a primary agent", p.observer),
                ));
            }
            if p.target < primaries || p.target >= n_agents {
                return Err(ConfigError::new(
                    format!("sensing.pairs[{i}].target"),
                    format!("agent {} is not a secondary agent", p.target),
                ));
            }
        }
        let channels = self.channel_count();
        if channels == 0 {
            return Err(ConfigError::new("sensing", "no measurement channels"));
        }
        let density = self.noise.acceleration_density.expand(n_agents, "noise.acceleration_density")?;
        for (i, d) in density.iter().enumerate() {
            non_negative(*d, &format!("noise.acceleration_density[{i}]"))?;
        }
        non_negative(self.initial.mean_scale, "initial.mean_scale")?;
        non_negative(self.initial.cov_scale, "initial.cov_scale")?;
        if let Some(m) = &self.initial.mean {
            if m.len() != 2 * n_agents {
                return Err(ConfigError::new("initial.mean", format!("expected {} entries", 2 * n_agents)));
            }
        }
        if let Some(c) = &self.initial.cov_diag {
            if c.len() != 2 * n_agents {
                return Err(ConfigError::new("initial.cov_diag", format!("expected {} entries", 2 * n_agents)));
            }
            for (i, v) in c.iter().enumerate() {
                non_negative(*v, &format!("initial.cov_diag[{i}]"))?;
            }
        }
        positive(self.timing.period, "timing.period")?;
        if let Some(dt) = self.timing.dt {
            positive(dt, "timing.dt")?;
        }
        if self.timing.steps == 0 {
            return Err(ConfigError::new("timing.steps", "must be at least 1"));
        }
        if self.timing.substeps == 0 {
            return Err(ConfigError::new("timing.substeps", "must be at least 1"));
        }
        match self.objective.gamma {
            GammaRule::Absolute(g) => positive(g, "objective.gamma.absolute")?,
            GammaRule::PriorFraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(ConfigError::new(
                        "objective.gamma.prior_fraction",
                        format!("must lie strictly between 0 and 1, got {f}"),
                    ));
                }
            }
        }
        if self.objective.s_max.is_empty() {
            return Err(ConfigError::new("objective.s_max", "at least one case required"));
        }
        for (i, case) in self.objective.s_max.iter().enumerate() {
            let path = format!("objective.s_max[{i}]");
            for v in case.expand(channels, &path)? {
                non_negative(v, &path)?;
            }
            if !(case.max() > 0.0) {
                return Err(ConfigError::new(path, "at least one bound must be positive"));
            }
        }
        if let Some(rho) = &self.objective.rho {
            let len = self.timing.steps * channels;
            if rho.len() != len {
                return Err(ConfigError::new("objective.rho", format!("expected {len} entries, got {}", rho.len())));
            }
            for (i, r) in rho.iter().enumerate() {
                positive(*r, &format!("objective.rho[{i}]"))?;
            }
        }
        for (i, m) in self.mask.iter().enumerate() {
            if m.step == 0 || m.step > self.timing.steps {
                return Err(ConfigError::new(
                    format!("mask[{i}].step"),
                    format!("must lie in 1..={}, got {}", self.timing.steps, m.step),
                ));
            }
            for (j, &c) in m.channels.iter().enumerate() {
                if c == 0 || c > channels {
                    return Err(ConfigError::new(
                        format!("mask[{i}].channels[{j}]"),
                        format!("must lie in 1..={channels}, got {c}"),
                    ));
                }
            }
        }
        if let Some(e) = self.reweight.epsilon {
            positive(e, "reweight.epsilon")?;
        }
        if self.reweight.max_iters == 0 {
            return Err(ConfigError::new("reweight.max_iters", "must be at least 1"));
        }
        non_negative(self.reweight.active_threshold, "reweight.active_threshold")?;
        positive(self.solver.gap_tol, "solver.gap_tol")?;
        positive(self.solver.feas_tol, "solver.feas_tol")?;
        if self.solver.max_iters == 0 {
            return Err(ConfigError::new("solver.max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec, ConfigError> {
        self.validate()?;
        let n_agents = self.agents.len();
        let models = self.agents.iter().map(|a| AgentModel::with_kind(a.kind, a.c)).collect();
        let x0 = DVector::from_iterator(2 * n_agents, self.agents.iter().flat_map(|a| a.initial));
        let primaries = self.agents.iter().filter(|a| a.primary).count();
        let agents = MultiAgentConfig::new(models, primaries, x0.clone()).map_err(|e| ConfigError::new("agents", e.to_string()))?;
        let topology = SensingTopology::new(
            self.sensing.stations.clone(),
            self.sensing.links.iter().map(|l| StationLink { station: l.station, agent: l.agent }).collect(),
            self.sensing
                .pairs
                .iter()
                .map(|p| RelativePair { observer: p.observer, target: p.target })
                .collect(),
            &agents,
        )
        .map_err(|e| ConfigError::new("sensing", e.to_string()))?;
        let density = self.noise.acceleration_density.expand(n_agents, "noise.acceleration_density")?;
        let base = ContinuousNoiseSpec::per_agent_acceleration(n_agents, 1.0);
        let noise = ContinuousNoiseSpec::new(DMatrix::from_diagonal(&DVector::from_vec(density)), base.input)
            .map_err(|e| ConfigError::new("noise", e.to_string()))?;
        let mean = match &self.initial.mean {
            Some(m) => DVector::from_column_slice(m),
            None => &x0 * self.initial.mean_scale,
        };
        let cov_diag = match &self.initial.cov_diag {
            Some(c) => DVector::from_column_slice(c),
            None => mean.map(|m| self.initial.cov_scale * m.abs()),
        };
        Ok(ScenarioSpec {
            agents,
            topology,
            noise,
            initial: GaussianState {
                mean,
                cov: DMatrix::from_diagonal(&cov_diag),
            },
            dt: self.timing.dt(),
            horizon: self.timing.steps,
            substeps: self.timing.substeps,
        })
    }

    pub fn availability(&self) -> AvailabilityMask {
        let mut mask = AvailabilityMask::all_available(self.timing.steps, self.channel_count());
        for m in &self.mask {
            for &c in &m.channels {
                mask.block(m.step - 1, c - 1).expect("mask validated");
            }
        }
        mask
    }

    pub fn bound_cases(&self) -> Result<Vec<BoundCase>, ConfigError> {
        let (p, my) = (self.timing.steps, self.channel_count());
        let mask = self.availability();
        self.objective
            .s_max
            .iter()
            .enumerate()
            .map(|(i, case)| {
                let path = format!("objective.s_max[{i}]");
                let per_channel = case.expand(my, &path)?;
                let raw = DMatrix::from_fn(p, my, |_, c| per_channel[c]);
                let bounds = apply_mask(&mask, &raw).map_err(|e| ConfigError::new(&path, e.to_string()))?;
                let label = match case {
                    ScalarOrList::Scalar(v) => format_bound(*v),
                    ScalarOrList::List(_) => format!("case{}", i + 1),
                };
                Ok(BoundCase {
                    label,
                    nominal: case.max(),
                    bounds,
                })
            })
            .collect()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            gap_tol: self.solver.gap_tol,
            feas_tol: self.solver.feas_tol,
            max_iters: self.solver.max_iters,
        }
    }

    pub fn reweight_options(&self) -> ReweightOptions {
        ReweightOptions {
            epsilon: self.reweight.epsilon,
            max_iters: if self.reweight.enabled { self.reweight.max_iters } else { 1 },
            active_threshold: self.reweight.active_threshold,
        }
    }

    pub fn gamma(&self, prior_trace: f64) -> f64 {
        match self.objective.gamma {
            GammaRule::Absolute(g) => g,
            GammaRule::PriorFraction(f) => f * prior_trace,
        }
    }
}

/// `450` rather than `450.0`; other values keep their shortest form.
pub fn format_bound(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
