#![allow(dead_code)]

use std::sync::Arc;

use netmpg::model::{GameModel, LocalDynamics};
use netmpg::network::{build_graph, AgentGraph, AgentId};

/// One agent, one state, reward per action.
#[derive(Debug)]
pub struct Bandit(pub Vec<f64>);

impl LocalDynamics for Bandit {
    fn transition_row(&self, _: AgentId, _: &[usize], _: &[usize], out: &mut [f64]) {
        out[0] = 1.0;
    }

    fn reward(&self, _: AgentId, _: &[usize], action: &[usize]) -> f64 {
        self.0[action[0]]
    }
}

pub fn bandit(rewards: &[f64], gamma: f64) -> GameModel {
    let r_max = rewards.iter().copied().fold(1.0, f64::max);
    GameModel::new(
        AgentGraph::line(1).unwrap(),
        vec![1],
        vec![rewards.len()],
        Arc::new(Bandit(rewards.to_vec())),
        gamma,
        r_max,
    )
    .unwrap()
}

/// Wraps another model's kernel with a constant reward.
#[derive(Debug)]
pub struct ConstantReward {
    pub inner: Arc<dyn LocalDynamics>,
    pub value: f64,
}

impl LocalDynamics for ConstantReward {
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        self.inner.transition_row(agent, state, action, out);
    }

    fn reward(&self, _: AgentId, _: &[usize], _: &[usize]) -> f64 {
        self.value
    }
}

pub fn with_constant_reward(model: &GameModel, value: f64) -> GameModel {
    GameModel::new(
        model.graph().clone(),
        model.state_sizes().to_vec(),
        model.action_sizes().to_vec(),
        Arc::new(ConstantReward {
            inner: model.dynamics().clone(),
            value,
        }),
        model.gamma(),
        1.0,
    )
    .unwrap()
}

/// One agent cycling 0 → 1 → 2 → 0 regardless of its action; reward s/2.
#[derive(Debug)]
pub struct Cycle;

impl LocalDynamics for Cycle {
    fn transition_row(&self, _: AgentId, state: &[usize], _: &[usize], out: &mut [f64]) {
        out.fill(0.0);
        out[(state[0] + 1) % 3] = 1.0;
    }

    fn reward(&self, _: AgentId, state: &[usize], _: &[usize]) -> f64 {
        state[0] as f64 / 2.0
    }
}

pub fn cycle(gamma: f64) -> GameModel {
    GameModel::new(AgentGraph::line(1).unwrap(), vec![3], vec![1], Arc::new(Cycle), gamma, 1.0).unwrap()
}

/// Agents that never interact: own-state kernel and own reward only.
#[derive(Debug)]
pub struct Decoupled;

impl LocalDynamics for Decoupled {
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        let s = state[agent];
        let stay = if action[agent] == 0 { 0.8 } else { 0.3 };
        out[s] = stay;
        out[1 - s] = 1.0 - stay;
    }

    fn reward(&self, agent: AgentId, state: &[usize], action: &[usize]) -> f64 {
        (1 + state[agent] + action[agent] + agent % 2) as f64 / 8.0
    }
}

pub fn decoupled(n: usize) -> GameModel {
    GameModel::new(build_graph(n, &[]).unwrap(), vec![2; n], vec![2; n], Arc::new(Decoupled), 0.9, 1.0).unwrap()
}
