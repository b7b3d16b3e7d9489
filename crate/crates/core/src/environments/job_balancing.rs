//! Job balancing on a network: agents hold jobs and delegate some of them to
//! their neighbors, rewarded for staying close to their neighborhood average.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{GameModel, InitialDistribution, LocalDynamics};
use crate::network::{AgentGraph, AgentId};

#[derive(Clone, Debug, PartialEq)]
pub struct JobBalancingSpec {
    pub graph: AgentGraph,
    pub total_jobs: usize,
    /// Largest number of jobs a node can hold; states are 0..=max_jobs_per_node.
    pub max_jobs_per_node: usize,
    /// Largest delegation; actions are 0..=max_delegation.
    pub max_delegation: usize,
    pub gamma: f64,
}

impl JobBalancingSpec {
    /// Defaults: state cap ⌈2·total/n⌉ (at least 1), delegation cap 1, γ = 0.9.
    pub fn new(graph: AgentGraph, total_jobs: usize) -> Self {
        let n = graph.num_agents().max(1);
        Self {
            max_jobs_per_node: (2 * total_jobs).div_ceil(n).max(1),
            max_delegation: 1,
            gamma: 0.9,
            graph,
            total_jobs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_agents();
        if self.max_jobs_per_node == 0 || self.max_delegation == 0 {
            return Err(Error::InvalidModel("state and delegation caps must be positive".into()));
        }
        if self.total_jobs > n * self.max_jobs_per_node {
            return Err(Error::InvalidModel(format!(
                "{} jobs do not fit on {n} nodes holding at most {} each",
                self.total_jobs, self.max_jobs_per_node
            )));
        }
        Ok(())
    }
}

impl Default for JobBalancingSpec {
    /// 30 agents on a ring sharing 60 jobs.
    fn default() -> Self {
        Self::new(AgentGraph::ring(30).expect("ring of 30"), 60)
    }
}

/// Deterministic job-balancing dynamics.
#[derive(Debug)]
pub struct JobBalancing {
    /// Non-self neighbors of each agent, ascending.
    neighbors: Vec<Vec<AgentId>>,
    cap: usize,
    clamp_events: AtomicU64,
}

impl JobBalancing {
    pub fn new(graph: &AgentGraph, cap: usize) -> Self {
        Self {
            neighbors: (0..graph.num_agents()).map(|i| graph.neighbors(i).to_vec()).collect(),
            cap,
            clamp_events: AtomicU64::new(0),
        }
    }

    /// Jobs agent `j` actually delegates: its action, limited by what it holds.
    /// An isolated agent keeps everything.
    pub fn effective_delegation(&self, j: AgentId, state: &[usize], action: &[usize]) -> usize {
        if self.neighbors[j].is_empty() {
            0
        } else {
            action[j].min(state[j])
        }
    }

    /// Jobs `j` sends to neighbor `k`: an equal split, with the remainder going
    /// to the lowest-id neighbors.
    pub fn share(&self, j: AgentId, k: AgentId, state: &[usize], action: &[usize]) -> usize {
        let nbrs = &self.neighbors[j];
        let Some(rank) = nbrs.iter().position(|&x| x == k) else {
            return 0;
        };
        let d = self.effective_delegation(j, state, action);
        d / nbrs.len() + usize::from(rank < d % nbrs.len())
    }

    /// Next job count of agent `i` before clamping.
    pub fn unclamped_next(&self, i: AgentId, state: &[usize], action: &[usize]) -> usize {
        let incoming: usize = self.neighbors[i].iter().map(|&j| self.share(j, i, state, action)).sum();
        state[i] - self.effective_delegation(i, state, action) + incoming
    }

    /// Full deterministic step; the flag reports whether any node was clamped.
    pub fn step(&self, state: &[usize], action: &[usize]) -> (Vec<usize>, bool) {
        let mut clamped = false;
        let next = (0..state.len())
            .map(|i| {
                let x = self.unclamped_next(i, state, action);
                clamped |= x > self.cap;
                x.min(self.cap)
            })
            .collect();
        (next, clamped)
    }

    /// Number of kernel evaluations that had to clamp a node to the cap.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events.load(Ordering::Relaxed)
    }
}

/// 1/|s_i − mean_{N_i} s| when the deviation is non-zero, 1 otherwise.
pub fn deviation_reward(own: usize, neighborhood_jobs: &[usize]) -> f64 {
    let m = neighborhood_jobs.len() as f64;
    let sum: usize = neighborhood_jobs.iter().sum();
    // deviation·|N_i| is an integer, which keeps the zero test exact
    let scaled = (own * neighborhood_jobs.len()) as i64 - sum as i64;
    if scaled == 0 {
        1.0
    } else {
        m / scaled.unsigned_abs() as f64
    }
}

impl LocalDynamics for JobBalancing {
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        out.fill(0.0);
        let x = self.unclamped_next(agent, state, action);
        if x > self.cap {
            self.clamp_events.fetch_add(1, Ordering::Relaxed);
        }
        out[x.min(self.cap)] = 1.0;
    }

    fn reward(&self, agent: AgentId, state: &[usize], _action: &[usize]) -> f64 {
        let jobs: Vec<usize> = std::iter::once(agent)
            .chain(self.neighbors[agent].iter().copied())
            .map(|j| state[j])
            .collect();
        deviation_reward(state[agent], &jobs)
    }
}

/// Largest reward: |N_i| for an agent with neighbors (deviation 1/|N_i|),
/// 1 for an isolated one.
fn job_reward_ceiling(graph: &AgentGraph) -> f64 {
    (0..graph.num_agents())
        .map(|i| if graph.degree(i) == 0 { 1.0 } else { (graph.degree(i) + 1) as f64 })
        .fold(1.0, f64::max)
}

/// Model together with a handle on its dynamics (for clamp counts and direct
/// stepping).
pub fn job_balancing_parts(spec: &JobBalancingSpec) -> Result<(GameModel, Arc<JobBalancing>)> {
    spec.validate()?;
    let n = spec.graph.num_agents();
    let dynamics = Arc::new(JobBalancing::new(&spec.graph, spec.max_jobs_per_node));
    let model = GameModel::new(
        spec.graph.clone(),
        vec![spec.max_jobs_per_node + 1; n],
        vec![spec.max_delegation + 1; n],
        dynamics.clone(),
        spec.gamma,
        job_reward_ceiling(&spec.graph),
    )?
    .with_initial(InitialDistribution::FixedSum { total: spec.total_jobs })?;
    dynamics.clamp_events.store(0, Ordering::Relaxed);
    Ok((model, dynamics))
}

pub fn job_balancing_model(spec: &JobBalancingSpec) -> Result<GameModel> {
    job_balancing_parts(spec).map(|(m, _)| m)
}
