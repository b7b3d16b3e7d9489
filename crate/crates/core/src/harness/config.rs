//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_ORACLE_CAP;
use crate::network::{build_graph, AgentGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphConfig {
    Ring(usize),
    Line(usize),
    Complete(usize),
    Edges { agents: usize, edges: Vec<(usize, usize)> },
}

impl GraphConfig {
    pub fn build(&self) -> Result<AgentGraph> {
        match self {
            GraphConfig::Ring(n) => AgentGraph::ring(*n),
            GraphConfig::Line(n) => AgentGraph::line(*n),
            GraphConfig::Complete(n) => AgentGraph::complete(*n),
            GraphConfig::Edges { agents, edges } => build_graph(*agents, edges),
        }
    }
}

fn default_gamma() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobBalancingConfig {
    #[serde(default = "JobBalancingConfig::default_graph")]
    pub graph: GraphConfig,
    #[serde(default = "JobBalancingConfig::default_jobs")]
    pub total_jobs: usize,
    /// Defaults to ⌈2·total_jobs/n⌉.
    #[serde(default)]
    pub max_jobs_per_node: Option<usize>,
    #[serde(default = "JobBalancingConfig::default_delegation")]
    pub max_delegation: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl JobBalancingConfig {
    fn default_graph() -> GraphConfig {
        GraphConfig::Ring(30)
    }
    fn default_jobs() -> usize {
        60
    }
    fn default_delegation() -> usize {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorCoverageConfig {
    #[serde(default = "SensorCoverageConfig::default_graph")]
    pub graph: GraphConfig,
    #[serde(default = "SensorCoverageConfig::default_side")]
    pub grid_side: usize,
    #[serde(default = "SensorCoverageConfig::default_detect")]
    pub detect_prob: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl SensorCoverageConfig {
    fn default_graph() -> GraphConfig {
        GraphConfig::Ring(20)
    }
    fn default_side() -> usize {
        5
    }
    fn default_detect() -> f64 {
        0.7
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMpgConfig {
    #[serde(default = "RandomMpgConfig::default_graph")]
    pub graph: GraphConfig,
    #[serde(default = "RandomMpgConfig::default_size")]
    pub state_size: usize,
    #[serde(default = "RandomMpgConfig::default_size")]
    pub action_size: usize,
    #[serde(default)]
    pub model_seed: u64,
    #[serde(default)]
    pub identical_interest: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl RandomMpgConfig {
    fn default_graph() -> GraphConfig {
        GraphConfig::Line(3)
    }
    fn default_size() -> usize {
        2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    JobBalancing(JobBalancingConfig),
    SensorCoverage(SensorCoverageConfig),
    RandomMpg(RandomMpgConfig),
}

impl EnvironmentConfig {
    pub fn gamma(&self) -> f64 {
        match self {
            EnvironmentConfig::JobBalancing(c) => c.gamma,
            EnvironmentConfig::SensorCoverage(c) => c.gamma,
            EnvironmentConfig::RandomMpg(c) => c.gamma,
        }
    }

    pub fn graph(&self) -> &GraphConfig {
        match self {
            EnvironmentConfig::JobBalancing(c) => &c.graph,
            EnvironmentConfig::SensorCoverage(c) => &c.graph,
            EnvironmentConfig::RandomMpg(c) => &c.graph,
        }
    }
}

/// A single radius, or a list of radii for a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Single(usize),
    List(Vec<usize>),
}

impl KappaSpec {
    pub fn values(&self) -> Vec<usize> {
        match self {
            KappaSpec::Single(k) => vec![*k],
            KappaSpec::List(v) => v.clone(),
        }
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self, KappaSpec::List(_))
    }
}

mod defaults {
    use super::*;

    pub fn kappa() -> KappaSpec {
        KappaSpec::Single(1)
    }
    pub fn eta() -> f64 {
        0.1
    }
    pub fn eta_decay() -> f64 {
        1.0
    }
    pub fn iterations() -> usize {
        200
    }
    pub fn episodes() -> usize {
        20
    }
    pub fn horizon() -> usize {
        50
    }
    pub fn eval_episodes() -> usize {
        200
    }
    pub fn replicates() -> usize {
        1
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("artifacts")
    }
    pub fn oracle_cap() -> u64 {
        DEFAULT_ORACLE_CAP as u64
    }
    pub fn verify_policies() -> usize {
        5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "defaults::kappa")]
    pub kappa: KappaSpec,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::eta_decay")]
    pub eta_decay: f64,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    /// Episodes per iteration in Monte-Carlo mode.
    #[serde(default = "defaults::episodes")]
    pub episodes: usize,
    /// Recorded steps per episode in Monte-Carlo mode.
    #[serde(default = "defaults::horizon")]
    pub horizon: usize,
    /// Episodes for the terminal return estimate of a sweep (oracle-infeasible models).
    #[serde(default = "defaults::eval_episodes")]
    pub eval_episodes: usize,
    /// Seeds per κ in a sweep.
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub exact_advantages: bool,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "defaults::oracle_cap")]
    pub oracle_cap: u64,
    /// Random policies per certificate in `verify`.
    #[serde(default = "defaults::verify_policies")]
    pub verify_policies: usize,
    pub environment: EnvironmentConfig,
}

impl ExperimentConfig {
    /// Parses, fills derived defaults and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self) {
        if let EnvironmentConfig::JobBalancing(c) = &mut self.environment {
            if c.max_jobs_per_node.is_none() {
                let n = match &c.graph {
                    GraphConfig::Ring(n) | GraphConfig::Line(n) | GraphConfig::Complete(n) => *n,
                    GraphConfig::Edges { agents, .. } => *agents,
                };
                c.max_jobs_per_node = Some((2 * c.total_jobs).div_ceil(n.max(1)).max(1));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("iterations", self.iterations),
            ("episodes", self.episodes),
            ("horizon", self.horizon),
            ("eval_episodes", self.eval_episodes),
            ("replicates", self.replicates),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.eta_decay > 0.0 && self.eta_decay <= 1.0) {
            return Err(Error::Config(format!("eta_decay = {} not in (0, 1]", self.eta_decay)));
        }
        if self.oracle_cap == 0 {
            return Err(Error::Config("oracle_cap must be positive".into()));
        }
        if self.kappa.values().is_empty() {
            return Err(Error::Config("kappa list is empty".into()));
        }
        let gamma = self.environment.gamma();
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Config(format!("gamma = {gamma} not in (0, 1)")));
        }
        self.environment.graph().build()?;
        Ok(())
    }

    /// The resolved configuration in the input format.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn oracle_cap(&self) -> u128 {
        self.oracle_cap as u128
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
