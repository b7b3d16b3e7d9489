//! Random tabular networked games for oracle-scale certification.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::{oracle_entries, DEFAULT_ORACLE_CAP};
use crate::model::{GameModel, LocalDynamics, MixedRadix, RewardScope};
use crate::network::{AgentGraph, AgentId};

/// Local configuration index over (s_{N_i}, a_{N_i}): member states first.
#[derive(Debug)]
struct LocalIndexer {
    members: Vec<AgentId>,
    codec: MixedRadix,
}

impl LocalIndexer {
    fn new(members: Vec<AgentId>, state_sizes: &[usize], action_sizes: &[usize]) -> Self {
        let mut radices: Vec<usize> = members.iter().map(|&j| state_sizes[j]).collect();
        radices.extend(members.iter().map(|&j| action_sizes[j]));
        Self {
            members,
            codec: MixedRadix::new(radices),
        }
    }

    fn count(&self) -> usize {
        self.codec.cardinality().unwrap_or(u128::MAX) as usize
    }

    fn index(&self, state: &[usize], action: &[usize]) -> usize {
        let radices = self.codec.radices();
        let m = self.members.len();
        let mut index = 0;
        let mut stride = 1;
        for (k, &j) in self.members.iter().enumerate() {
            index += state[j] * stride;
            stride *= radices[k];
        }
        for (k, &j) in self.members.iter().enumerate() {
            index += action[j] * stride;
            stride *= radices[m + k];
        }
        index
    }
}

#[derive(Debug)]
enum SharedReward {
    /// Each agent has its own local table.
    Independent,
    /// One table over (s_{N_0}, a_{N_0}) (the full joint space on a complete graph).
    Common(Vec<f64>),
    /// Every agent receives Σ_j of the local tables.
    SumOfLocal,
}

/// Tabular dynamics with Dirichlet(1) kernel rows and U[0,1] rewards.
#[derive(Debug)]
pub struct RandomDynamics {
    state_sizes: Vec<usize>,
    indexers: Vec<LocalIndexer>,
    kernels: Vec<Vec<f64>>,
    rewards: Vec<Vec<f64>>,
    shared: SharedReward,
}

impl RandomDynamics {
    /// Flattened kernel of agent `i`, one row of |S_i| entries per local configuration.
    pub fn kernel(&self, i: AgentId) -> &[f64] {
        &self.kernels[i]
    }

    fn local_reward(&self, i: AgentId, state: &[usize], action: &[usize]) -> f64 {
        self.rewards[i][self.indexers[i].index(state, action)]
    }
}

impl LocalDynamics for RandomDynamics {
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        let k = self.state_sizes[agent];
        let row = self.indexers[agent].index(state, action);
        out.copy_from_slice(&self.kernels[agent][row * k..(row + 1) * k]);
    }

    fn reward(&self, agent: AgentId, state: &[usize], action: &[usize]) -> f64 {
        match &self.shared {
            SharedReward::Independent => self.local_reward(agent, state, action),
            SharedReward::Common(table) => table[self.indexers[0].index(state, action)],
            SharedReward::SumOfLocal => (0..self.indexers.len()).map(|j| self.local_reward(j, state, action)).sum(),
        }
    }
}

fn dirichlet_row<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    // −ln U with U in (0, 1] is Exp(1); normalized exponentials are Dirichlet(1)
    let mut w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        w.iter_mut().for_each(|x| *x = 1.0 / k as f64);
    }
    w
}

/// Random networked game on `graph`.
///
/// With `identical_interest` every agent gets the same reward: one shared
/// table when the graph is complete, otherwise the sum of all local terms
/// (a non-local reward usable only with the oracle).
pub fn random_networked_mpg(
    graph: &AgentGraph,
    state_sizes: &[usize],
    action_sizes: &[usize],
    gamma: f64,
    seed: u64,
    identical_interest: bool,
) -> Result<GameModel> {
    let n = graph.num_agents();
    if state_sizes.len() != n || action_sizes.len() != n {
        return Err(Error::InvalidModel(format!(
            "{n} agents but {} state sizes and {} action sizes",
            state_sizes.len(),
            action_sizes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indexers: Vec<LocalIndexer> = (0..n)
        .map(|i| LocalIndexer::new(graph.closed_neighborhood(i), state_sizes, action_sizes))
        .collect();
    let mut kernels = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for (i, ix) in indexers.iter().enumerate() {
        let rows = ix.count();
        let mut kernel = Vec::with_capacity(rows * state_sizes[i]);
        for _ in 0..rows {
            kernel.extend(dirichlet_row(&mut rng, state_sizes[i]));
        }
        kernels.push(kernel);
        rewards.push((0..rows).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>());
    }
    let complete = graph.num_edges() == n * (n - 1) / 2;
    let (shared, scope, r_max) = match (identical_interest, complete) {
        (false, _) => (SharedReward::Independent, RewardScope::Local, 1.0),
        (true, true) => (SharedReward::Common(rewards[0].clone()), RewardScope::Local, 1.0),
        (true, false) => (SharedReward::SumOfLocal, RewardScope::Global, n as f64),
    };
    let dynamics = RandomDynamics {
        state_sizes: state_sizes.to_vec(),
        indexers,
        kernels,
        rewards,
        shared,
    };
    let model = GameModel::with_scope(
        graph.clone(),
        state_sizes.to_vec(),
        action_sizes.to_vec(),
        Arc::new(dynamics),
        gamma,
        r_max,
        scope,
    )?
    .with_identical_interest(identical_interest);
    let entries = oracle_entries(&model);
    if entries > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleInfeasible {
            entries,
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::exact_evaluate;
    use crate::learning::JointPolicy;
    use crate::model::MixedRadix;

    fn kernel_bits(model: &GameModel) -> Vec<u64> {
        let s = MixedRadix::new(model.state_sizes().to_vec());
        let a = MixedRadix::new(model.action_sizes().to_vec());
        let mut out = Vec::new();
        let mut row = vec![0.0; 4];
        for si in 0..s.cardinality().unwrap() {
            for ai in 0..a.cardinality().unwrap() {
                for i in 0..model.num_agents() {
                    row.resize(model.state_sizes()[i], 0.0);
                    model.transition_row(i, &s.decode(si), &a.decode(ai), &mut row);
                    out.extend(row.iter().map(|x| x.to_bits()));
                    out.push(model.reward(i, &s.decode(si), &a.decode(ai)).to_bits());
                }
            }
        }
        out
    }

    #[test]
    fn same_seed_same_model() {
        let g = AgentGraph::line(3).unwrap();
        let a = random_networked_mpg(&g, &[2, 3, 2], &[2, 2, 2], 0.9, 11, false).unwrap();
        let b = random_networked_mpg(&g, &[2, 3, 2], &[2, 2, 2], 0.9, 11, false).unwrap();
        let c = random_networked_mpg(&g, &[2, 3, 2], &[2, 2, 2], 0.9, 12, false).unwrap();
        assert_eq!(kernel_bits(&a), kernel_bits(&b));
        assert_ne!(kernel_bits(&a), kernel_bits(&c));
    }

    #[test]
    fn rows_are_normalized() {
        let g = AgentGraph::ring(4).unwrap();
        let m = random_networked_mpg(&g, &[3, 2, 3, 2], &[2, 2, 2, 2], 0.9, 5, false).unwrap();
        let s = MixedRadix::new(m.state_sizes().to_vec());
        let a = MixedRadix::new(m.action_sizes().to_vec());
        for si in 0..s.cardinality().unwrap() {
            for ai in 0..a.cardinality().unwrap() {
                for i in 0..4 {
                    let mut row = vec![0.0; m.state_sizes()[i]];
                    m.transition_row(i, &s.decode(si), &a.decode(ai), &mut row);
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identical_interest_values_coincide() {
        for (g, seed) in [(AgentGraph::complete(3).unwrap(), 1), (AgentGraph::line(3).unwrap(), 2)] {
            let m = random_networked_mpg(&g, &[2; 3], &[2; 3], 0.9, seed, true).unwrap();
            assert!(m.identical_interest());
            for p in 0..5 {
                let policy = JointPolicy::random(&m, 2, 2.0, p).unwrap();
                let t = exact_evaluate(&m, &policy).unwrap();
                for i in 1..3 {
                    for (x, y) in t.values(0).iter().zip(t.values(i)) {
                        assert!((x - y).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn too_large_for_the_oracle() {
        let g = AgentGraph::ring(8).unwrap();
        assert!(matches!(
            random_networked_mpg(&g, &[4; 8], &[3; 8], 0.9, 0, false),
            Err(Error::OracleInfeasible { .. })
        ));
    }
}
