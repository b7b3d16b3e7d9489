//! Seeded trajectory sampling.
//!
//! Each agent owns an independent random stream derived from the episode
//! seed and its index. Its action draws and its state-transition draws both
//! come from that stream, so a trajectory does not depend on the order in
//! which agent components are drawn, nor on how episodes are scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learning::JointPolicy;
use crate::model::{sample_categorical, GameModel, JointAction, JointState};

/// Tail tolerance for truncating infinite-horizon returns.
pub const RETURN_TAIL_TOL: f64 = 1e-6;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(master), |acc, &t| mix64(acc ^ mix64(t)))
}

/// Per-agent random streams for one episode.
#[derive(Clone, Debug)]
pub struct AgentStreams {
    initial: ChaCha8Rng,
    agents: Vec<ChaCha8Rng>,
}

impl AgentStreams {
    pub fn new(seed: u64, num_agents: usize) -> Self {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Self {
            initial: stream(0),
            agents: (0..num_agents as u64).map(|k| stream(k + 1)).collect(),
        }
    }

    pub fn initial(&mut self) -> &mut ChaCha8Rng {
        &mut self.initial
    }

    pub fn agent(&mut self, i: usize) -> &mut ChaCha8Rng {
        &mut self.agents[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: JointState,
    pub action: JointAction,
    pub rewards: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Reward sequence of agent `i`.
    pub fn rewards_of(&self, i: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.rewards[i]).collect()
    }
}

/// Draws s' with each component from Pr(· | s_{N_i}, a_{N_i}) on agent i's stream.
pub fn sample_transition(
    model: &GameModel,
    state: &[usize],
    action: &[usize],
    streams: &mut AgentStreams,
) -> JointState {
    let mut row = Vec::new();
    (0..model.num_agents())
        .map(|i| {
            row.clear();
            row.resize(model.state_sizes()[i], 0.0);
            model.transition_row(i, state, action, &mut row);
            sample_categorical(&row, streams.agent(i))
        })
        .collect()
}

/// Draws a_i ~ π_i(· | s_{N_i^κ}) for every agent.
pub fn sample_actions(policy: &JointPolicy, state: &[usize], streams: &mut AgentStreams) -> JointAction {
    (0..policy.num_agents())
        .map(|i| sample_categorical(&policy.action_distribution(i, state), streams.agent(i)))
        .collect()
}

/// Rolls out `horizon` steps from s⁰ ~ μ.
pub fn sample_trajectory(
    model: &GameModel,
    policy: &JointPolicy,
    horizon: usize,
    streams: &mut AgentStreams,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("trajectory horizon must be positive".into()));
    }
    policy.check_compatible(model)?;
    let n = model.num_agents();
    let mut state = model.sample_initial(streams.initial());
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let action = sample_actions(policy, &state, streams);
        let rewards = (0..n).map(|i| model.reward(i, &state, &action)).collect();
        let next = if t + 1 < horizon {
            Some(sample_transition(model, &state, &action, streams))
        } else {
            None
        };
        steps.push(Step {
            state: std::mem::take(&mut state),
            action,
            rewards,
        });
        if let Some(next) = next {
            state = next;
        }
    }
    Ok(Trajectory { steps })
}

/// Σ_t γᵗ rᵗ.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}

/// Discounted return of a finite prefix together with the worst-case mass
/// γᵀ·r_max/(1−γ) of the omitted tail.
pub fn discounted_return_with_tail(rewards: &[f64], gamma: f64, r_max: f64) -> (f64, f64) {
    let tail = gamma.powi(rewards.len() as i32) * r_max / (1.0 - gamma);
    (discounted_return(rewards, gamma), tail)
}

/// Smallest T with γᵀ·r_max/(1−γ) ≤ tol.
pub fn truncation_horizon(gamma: f64, r_max: f64, tol: f64) -> usize {
    let ratio = tol * (1.0 - gamma) / r_max;
    if ratio >= 1.0 {
        return 1;
    }
    (ratio.ln() / gamma.ln()).ceil().max(1.0) as usize
}
