use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{GameModel, LocalObservation, MixedRadix};
use crate::network::AgentId;

/// Largest observation space a dense random policy may be drawn over.
const DENSE_ROW_LIMIT: u128 = 1 << 22;

/// Numerically stable soft-max.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Soft-max parameters of one agent, keyed by its κ-hop state observation.
///
/// Rows are stored sparsely; an absent row is all zeros, i.e. the uniform
/// distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    agent: AgentId,
    kappa: usize,
    members: Vec<AgentId>,
    strides: Vec<u128>,
    codec: MixedRadix,
    num_actions: usize,
    theta: BTreeMap<u128, Vec<f64>>,
}

impl PolicyTable {
    /// All-zero table over the κ-hop neighborhood of `agent`.
    pub fn new(model: &GameModel, agent: AgentId, kappa: usize) -> Result<Self> {
        let nb = model.graph().kappa_neighborhood(agent, kappa)?;
        Self::over_members(model, agent, kappa, nb.members)
    }

    /// All-zero table observing every agent.
    pub fn full_information(model: &GameModel, agent: AgentId) -> Result<Self> {
        let n = model.num_agents();
        if agent >= n {
            return Err(Error::AgentOutOfRange { agent, n });
        }
        let kappa = model.graph().diameter().unwrap_or(n);
        Self::over_members(model, agent, kappa, (0..n).collect())
    }

    fn over_members(model: &GameModel, agent: AgentId, kappa: usize, members: Vec<AgentId>) -> Result<Self> {
        let radices: Vec<usize> = members.iter().map(|&j| model.state_sizes()[j]).collect();
        let codec = MixedRadix::new(radices.clone());
        if codec.cardinality().is_none() {
            return Err(Error::InvalidArgument(format!(
                "observation space of agent {agent} at kappa {kappa} overflows u128"
            )));
        }
        let mut strides = Vec::with_capacity(radices.len());
        let mut stride = 1u128;
        for r in radices {
            strides.push(stride);
            stride *= r as u128;
        }
        Ok(Self {
            agent,
            kappa,
            members,
            strides,
            codec,
            num_actions: model.action_sizes()[agent],
            theta: BTreeMap::new(),
        })
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn members(&self) -> &[AgentId] {
        &self.members
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn observation_count(&self) -> u128 {
        self.codec.cardinality().expect("checked at construction")
    }

    /// Observation index of a joint state.
    pub fn observation(&self, state: &[usize]) -> u128 {
        self.members
            .iter()
            .zip(&self.strides)
            .map(|(&j, &s)| state[j] as u128 * s)
            .sum()
    }

    /// Local state values of an observation index, in member order.
    pub fn decode_observation(&self, obs: u128) -> Vec<usize> {
        self.codec.decode(obs)
    }

    pub fn row(&self, obs: u128) -> Option<&[f64]> {
        self.theta.get(&obs).map(Vec::as_slice)
    }

    pub fn theta(&self, obs: u128, action: usize) -> f64 {
        self.row(obs).map_or(0.0, |r| r[action])
    }

    /// Mutable row, materialized as zeros on first touch.
    pub fn row_mut(&mut self, obs: u128) -> &mut [f64] {
        let k = self.num_actions;
        self.theta.entry(obs).or_insert_with(|| vec![0.0; k])
    }

    /// Stored rows in ascending observation order.
    pub fn rows(&self) -> impl Iterator<Item = (u128, &[f64])> {
        self.theta.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn stored_rows(&self) -> usize {
        self.theta.len()
    }

    /// π_i(· | obs).
    pub fn distribution(&self, obs: u128) -> Vec<f64> {
        match self.row(obs) {
            Some(row) => softmax(row),
            None => vec![1.0 / self.num_actions as f64; self.num_actions],
        }
    }

    /// π_i(· | s_{N_i^κ}) for an explicit local observation.
    pub fn policy_distribution(&self, obs: &LocalObservation) -> Result<Vec<f64>> {
        if obs.center != self.agent || obs.members != self.members {
            return Err(Error::InvalidArgument(format!(
                "observation over {:?} centred on {} does not match the table of agent {} over {:?}",
                obs.members, obs.center, self.agent, self.members
            )));
        }
        let index = self.codec.encode(&obs.values)?;
        Ok(self.distribution(index))
    }

    pub fn max_abs_theta(&self) -> f64 {
        self.theta
            .values()
            .flat_map(|r| r.iter())
            .fold(0.0, |m, &x| m.max(x.abs()))
    }
}

/// One soft-max table per agent, sharing a truncation radius.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPolicy {
    kappa: usize,
    tables: Vec<PolicyTable>,
}

impl JointPolicy {
    /// Uniform policies over κ-hop observations. κ beyond the diameter of a
    /// connected graph is clamped to the diameter.
    pub fn uniform(model: &GameModel, kappa: usize) -> Result<Self> {
        let kappa = match model.graph().diameter() {
            Ok(d) => kappa.min(d),
            Err(_) => kappa,
        };
        let tables = (0..model.num_agents())
            .map(|i| PolicyTable::new(model, i, kappa))
            .collect::<Result<_>>()?;
        Ok(Self { kappa, tables })
    }

    /// Uniform policies that observe the full joint state.
    pub fn full_information(model: &GameModel) -> Result<Self> {
        let tables: Vec<_> = (0..model.num_agents())
            .map(|i| PolicyTable::full_information(model, i))
            .collect::<Result<_>>()?;
        let kappa = tables.first().map_or(0, |t| t.kappa());
        Ok(Self { kappa, tables })
    }

    /// Every observation row filled with parameters drawn uniformly from
    /// `[-scale, scale]`.
    pub fn random(model: &GameModel, kappa: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut policy = Self::uniform(model, kappa)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for table in &mut policy.tables {
            let rows = table.observation_count();
            if rows > DENSE_ROW_LIMIT {
                return Err(Error::InvalidArgument(format!(
                    "{rows} observation rows are too many for a dense random policy"
                )));
            }
            for obs in 0..rows {
                for x in table.row_mut(obs) {
                    *x = rng.gen_range(-scale..=scale);
                }
            }
        }
        Ok(policy)
    }

    pub fn from_tables(tables: Vec<PolicyTable>) -> Result<Self> {
        let kappa = tables.first().map_or(0, |t| t.kappa());
        if tables.iter().any(|t| t.kappa() != kappa) {
            return Err(Error::InvalidArgument("all tables must share one kappa".into()));
        }
        if tables.iter().enumerate().any(|(i, t)| t.agent() != i) {
            return Err(Error::InvalidArgument("tables must be ordered by agent".into()));
        }
        Ok(Self { kappa, tables })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn num_agents(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, i: AgentId) -> &PolicyTable {
        &self.tables[i]
    }

    pub fn table_mut(&mut self, i: AgentId) -> &mut PolicyTable {
        &mut self.tables[i]
    }

    pub fn tables(&self) -> &[PolicyTable] {
        &self.tables
    }

    /// π_i(· | s_{N_i^κ}) evaluated at a joint state.
    pub fn action_distribution(&self, i: AgentId, state: &[usize]) -> Vec<f64> {
        let t = &self.tables[i];
        t.distribution(t.observation(state))
    }

    /// Π_i π_i(a_i | s_{N_i^κ}).
    pub fn joint_action_probability(&self, state: &[usize], action: &[usize]) -> f64 {
        self.tables
            .iter()
            .zip(action)
            .map(|(t, &a)| t.distribution(t.observation(state))[a])
            .product()
    }

    /// Checks that the tables were built for `model`'s spaces.
    pub fn check_compatible(&self, model: &GameModel) -> Result<()> {
        if self.tables.len() != model.num_agents() {
            return Err(Error::InvalidArgument(format!(
                "policy has {} agents, model has {}",
                self.tables.len(),
                model.num_agents()
            )));
        }
        for (i, t) in self.tables.iter().enumerate() {
            let radices: Vec<usize> = t.members().iter().map(|&j| model.state_sizes()[j]).collect();
            if t.num_actions() != model.action_sizes()[i] || t.codec.radices() != radices.as_slice() {
                return Err(Error::InvalidArgument(format!(
                    "policy table of agent {i} does not match the model's spaces"
                )));
            }
        }
        Ok(())
    }
}
