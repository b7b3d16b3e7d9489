//! Monte-Carlo estimates of local Q-values from sampled trajectories.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::learning::JointPolicy;
use crate::model::GameModel;
use crate::network::AgentId;
use crate::rollout::{derive_seed, sample_trajectory, truncation_horizon, AgentStreams, Trajectory, RETURN_TAIL_TOL};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VisitStats {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: u64,
}

impl VisitStats {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &VisitStats) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    /// Standard error of the mean (zero with fewer than two visits).
    pub fn std_err(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Sampled episodes for one batch: each has `horizon` recorded steps followed
/// by a tail long enough that the truncated return is within
/// [`RETURN_TAIL_TOL`] of the infinite-horizon one.
#[derive(Clone, Debug)]
pub struct EpisodeBatch {
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
}

impl EpisodeBatch {
    pub fn sample(
        model: &GameModel,
        policy: &JointPolicy,
        episodes: usize,
        horizon: usize,
        seed: u64,
        parallelism: Parallelism,
    ) -> Result<Self> {
        if episodes == 0 {
            return Err(Error::InvalidArgument("at least one episode is required".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let tail = truncation_horizon(model.gamma(), model.r_max(), RETURN_TAIL_TOL);
        let n = model.num_agents();
        let trajectories = parallelism
            .map(episodes, |e| {
                let mut streams = AgentStreams::new(derive_seed(seed, &[e as u64]), n);
                sample_trajectory(model, policy, horizon + tail, &mut streams)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { horizon, trajectories })
    }

    /// Discounted returns-to-go of agent `i` for the recorded steps of one episode.
    pub fn returns_to_go(&self, episode: usize, i: AgentId, gamma: f64) -> Vec<f64> {
        let steps = &self.trajectories[episode].steps;
        let mut g = 0.0;
        let mut out = vec![0.0; steps.len()];
        for t in (0..steps.len()).rev() {
            g = steps[t].rewards[i] + gamma * g;
            out[t] = g;
        }
        out.truncate(self.horizon);
        out
    }

    /// Mean discounted return from s⁰ for each agent.
    pub fn mean_initial_returns(&self, gamma: f64, num_agents: usize) -> Vec<f64> {
        let e = self.trajectories.len() as f64;
        (0..num_agents)
            .map(|i| {
                (0..self.trajectories.len())
                    .map(|k| self.returns_to_go(k, i, gamma)[0])
                    .sum::<f64>()
                    / e
            })
            .collect()
    }
}

/// Local Q estimates keyed by (local state index, local action index) over
/// N_i^κ, in the mixed-radix order of the members.
#[derive(Clone, Debug)]
pub struct McLocalQ {
    pub agent: AgentId,
    pub kappa: usize,
    pub members: Vec<AgentId>,
    pub entries: BTreeMap<(u128, u128), VisitStats>,
}

impl McLocalQ {
    pub fn from_batch(model: &GameModel, batch: &EpisodeBatch, i: AgentId, kappa: usize) -> Result<Self> {
        let nb = model.graph().kappa_neighborhood(i, kappa)?;
        Self::over_members(model, batch, i, nb.kappa, nb.members)
    }

    /// Same as [`McLocalQ::from_batch`] over an explicit member list (sorted,
    /// containing `i`), e.g. a full-information policy's observation set.
    pub fn over_members(model: &GameModel, batch: &EpisodeBatch, i: AgentId, kappa: usize, members: Vec<AgentId>) -> Result<Self> {
        let n = model.num_agents();
        if i >= n {
            return Err(Error::AgentOutOfRange { agent: i, n });
        }
        if !members.contains(&i) || members.iter().any(|&j| j >= n) || !members.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!("invalid member list {members:?} for agent {i}")));
        }
        let gamma = model.gamma();
        let mut entries: BTreeMap<(u128, u128), VisitStats> = BTreeMap::new();
        for (k, traj) in batch.trajectories.iter().enumerate() {
            let returns = batch.returns_to_go(k, i, gamma);
            for (step, g) in traj.steps.iter().zip(returns) {
                let key = (
                    local_index(&step.state, &members, model.state_sizes()),
                    local_index(&step.action, &members, model.action_sizes()),
                );
                entries.entry(key).or_default().push(g);
            }
        }
        Ok(Self {
            agent: i,
            kappa,
            members,
            entries,
        })
    }

    pub fn get(&self, local_state: u128, local_action: u128) -> Option<&VisitStats> {
        self.entries.get(&(local_state, local_action))
    }

    /// Visit-weighted marginal over the other members' actions, keyed by local
    /// state and then the agent's own action.
    pub fn own_action_marginal(&self, action_sizes: &[usize]) -> BTreeMap<u128, Vec<VisitStats>> {
        let own = action_sizes[self.agent];
        let mut out: BTreeMap<u128, Vec<VisitStats>> = BTreeMap::new();
        for (&(ls, la), stats) in &self.entries {
            let mut rest = la;
            let mut ai = 0;
            for &j in &self.members {
                let d = (rest % action_sizes[j] as u128) as usize;
                if j == self.agent {
                    ai = d;
                    break;
                }
                rest /= action_sizes[j] as u128;
            }
            out.entry(ls).or_insert_with(|| vec![VisitStats::default(); own])[ai].merge(stats);
        }
        out
    }
}

fn local_index(values: &[usize], members: &[AgentId], sizes: &[usize]) -> u128 {
    let mut index = 0u128;
    let mut stride = 1u128;
    for &j in members {
        index += values[j] as u128 * stride;
        stride *= sizes[j] as u128;
    }
    index
}

/// Samples `episodes` trajectories and averages returns-to-go per visited
/// local configuration of agent `i`.
pub fn mc_local_q(
    model: &GameModel,
    policy: &JointPolicy,
    i: AgentId,
    kappa: usize,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<McLocalQ> {
    let batch = EpisodeBatch::sample(model, policy, episodes, horizon, seed, Parallelism::default())?;
    McLocalQ::from_batch(model, &batch, i, kappa)
}
