//! Team-reward counterpart of a game: every agent receives the sum of all
//! agents' rewards, which makes the common value an exact potential.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{GameModel, LocalDynamics, RewardScope};
use crate::network::AgentId;

#[derive(Debug)]
pub struct TeamReward {
    inner: Arc<dyn LocalDynamics>,
    num_agents: usize,
}

impl LocalDynamics for TeamReward {
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        self.inner.transition_row(agent, state, action, out);
    }

    fn reward(&self, _agent: AgentId, state: &[usize], action: &[usize]) -> f64 {
        (0..self.num_agents).map(|j| self.inner.reward(j, state, action)).sum()
    }
}

/// Same kernel, initial distribution and discount; rewards replaced by the
/// team sum (non-local, so oracle-only).
pub fn team_reward_model(model: &GameModel) -> Result<GameModel> {
    let n = model.num_agents();
    let dynamics = TeamReward {
        inner: model.dynamics().clone(),
        num_agents: n,
    };
    GameModel::with_scope(
        model.graph().clone(),
        model.state_sizes().to_vec(),
        model.action_sizes().to_vec(),
        Arc::new(dynamics),
        model.gamma(),
        model.r_max() * n as f64,
        RewardScope::Global,
    )?
    .with_initial(model.initial().clone())
    .map(|m| m.with_identical_interest(true))
}
