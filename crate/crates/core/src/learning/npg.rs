//! Advantage estimation and the soft-max natural policy gradient step.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::evaluation::{decay_bound, EpisodeBatch, ExactTables, JointOracle, McLocalQ};
use crate::learning::policy::{JointPolicy, PolicyTable};
use crate::model::GameModel;
use crate::network::AgentId;

/// Â_i per (observation, own action). `None` marks an action without an
/// estimate, which the update leaves untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvantageTable {
    pub agent: AgentId,
    pub num_actions: usize,
    pub entries: BTreeMap<u128, Vec<Option<f64>>>,
}

impl AdvantageTable {
    pub fn new(agent: AgentId, num_actions: usize) -> Self {
        Self {
            agent,
            num_actions,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, obs: u128, action: usize) -> Option<f64> {
        self.entries.get(&obs).and_then(|row| row[action])
    }

    pub fn set(&mut self, obs: u128, action: usize, value: f64) {
        let k = self.num_actions;
        self.entries.entry(obs).or_insert_with(|| vec![None; k])[action] = Some(value);
    }

    /// Largest |Â| over all estimates.
    pub fn max_abs(&self) -> f64 {
        self.entries
            .values()
            .flatten()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// θ ← θ + η/(1−γ)·Â in place; returns the largest parameter change.
pub fn apply_npg_step(table: &mut PolicyTable, advantages: &AdvantageTable, eta: f64, gamma: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size {eta} must be positive")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("discount {gamma} not in (0, 1)")));
    }
    if advantages.num_actions != table.num_actions() || advantages.agent != table.agent() {
        return Err(Error::InvalidArgument("advantage table does not match the policy table".into()));
    }
    for (&obs, row) in &advantages.entries {
        if let Some(action) = row.iter().position(|x| matches!(x, Some(v) if !v.is_finite())) {
            return Err(Error::NonFiniteAdvantage {
                agent: table.agent(),
                observation: obs,
                action,
            });
        }
    }
    let coefficient = eta / (1.0 - gamma);
    let mut max_delta = 0.0f64;
    for (&obs, row) in &advantages.entries {
        if row.iter().all(Option::is_none) {
            continue;
        }
        let theta = table.row_mut(obs);
        for (t, adv) in theta.iter_mut().zip(row) {
            if let Some(a) = adv {
                let delta = coefficient * a;
                *t += delta;
                max_delta = max_delta.max(delta.abs());
            }
        }
    }
    Ok(max_delta)
}

/// Functional form of [`apply_npg_step`].
pub fn npg_update(table: &PolicyTable, advantages: &AdvantageTable, eta: f64, gamma: f64) -> Result<PolicyTable> {
    let mut next = table.clone();
    apply_npg_step(&mut next, advantages, eta, gamma)?;
    Ok(next)
}

/// Sampled advantages of agent `i` over its policy observations.
///
/// Local Q estimates over N_i^κ are marginalized onto the agent's own action
/// (visit-weighted), and V̂ is their policy average over the visited actions.
pub fn advantages_from_batch(model: &GameModel, policy: &JointPolicy, batch: &EpisodeBatch, i: AgentId) -> Result<AdvantageTable> {
    let table = policy.table(i);
    let local = McLocalQ::over_members(model, batch, i, table.kappa(), table.members().to_vec())?;
    let mut out = AdvantageTable::new(i, table.num_actions());
    for (obs, stats) in local.own_action_marginal(model.action_sizes()) {
        let pi = table.distribution(obs);
        let (mut mass, mut v_hat) = (0.0, 0.0);
        for (p, s) in pi.iter().zip(&stats) {
            if let Some(q) = s.mean() {
                mass += p;
                v_hat += p * q;
            }
        }
        if mass == 0.0 {
            continue;
        }
        v_hat /= mass;
        for (a, s) in stats.iter().enumerate() {
            if let Some(q) = s.mean() {
                out.set(obs, a, q - v_hat);
            }
        }
    }
    Ok(out)
}

/// Exact advantages of agent `i` over its policy observations:
///
/// Â(o, a_i) = Σ_s d(s | o) Σ_{a_{-i}} π_{-i}(a_{-i} | s) A_i(s, a_i, a_{-i}),
///
/// the visitation-weighted truncated Q marginalized onto the own action, minus
/// its policy average. Observations with zero occupancy use uniform state
/// weights.
pub fn exact_local_advantages(
    oracle: &JointOracle<'_>,
    tables: &ExactTables,
    occupancy: &[f64],
    policy: &JointPolicy,
    i: AgentId,
) -> Result<AdvantageTable> {
    let table = policy.table(i);
    let space = oracle.space();
    let ki = table.num_actions();
    let obs_count = usize::try_from(table.observation_count())
        .map_err(|_| Error::InvalidArgument("observation space too large for exact advantages".into()))?;
    let mut num = vec![0.0; obs_count * ki];
    let mut den = vec![0.0; obs_count * ki];
    let mut fb_num = vec![0.0; obs_count * ki];
    let mut fb_den = vec![0.0; obs_count * ki];
    let mut seen = vec![false; obs_count];
    for (s, &mass) in occupancy.iter().enumerate().take(space.num_states) {
        let obs = table.observation(space.state(s)) as usize;
        seen[obs] = true;
        for a in 0..space.num_actions {
            let ai = space.action(a)[i];
            let q = tables.q(i, s, a);
            let w = mass * oracle.joint_probability(s, a);
            let k = obs * ki + ai;
            num[k] += w * q;
            den[k] += w;
            let u = oracle.others_probability(i, s, a);
            fb_num[k] += u * q;
            fb_den[k] += u;
        }
    }
    let mut out = AdvantageTable::new(i, ki);
    for obs in (0..obs_count).filter(|&o| seen[o]) {
        let q_hat: Vec<f64> = (0..ki)
            .map(|a| {
                let k = obs * ki + a;
                if den[k] > 0.0 {
                    num[k] / den[k]
                } else {
                    fb_num[k] / fb_den[k]
                }
            })
            .collect();
        let pi = table.distribution(obs as u128);
        let v_hat: f64 = pi.iter().zip(&q_hat).map(|(p, q)| p * q).sum();
        for (a, q) in q_hat.iter().enumerate() {
            out.set(obs as u128, a, q - v_hat);
        }
    }
    Ok(out)
}

/// How advantages are obtained for an update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdvantageSource {
    /// From the exact oracle (oracle-scale models only).
    Exact { cap: u128 },
    /// From `episodes` sampled episodes with `horizon` recorded steps each.
    MonteCarlo { episodes: usize, horizon: usize, seed: u64 },
}

/// Advantage estimate of agent `i` for its current policy table.
pub fn estimate_advantages(model: &GameModel, policy: &JointPolicy, i: AgentId, source: AdvantageSource) -> Result<AdvantageTable> {
    if i >= model.num_agents() {
        return Err(Error::AgentOutOfRange {
            agent: i,
            n: model.num_agents(),
        });
    }
    match source {
        AdvantageSource::Exact { cap } => {
            let oracle = JointOracle::new(
                model,
                policy,
                crate::evaluation::OracleOptions {
                    cap,
                    ..Default::default()
                },
            )?;
            let tables = oracle.evaluate()?;
            let occupancy = oracle.occupancy();
            exact_local_advantages(&oracle, &tables, &occupancy, policy, i)
        }
        AdvantageSource::MonteCarlo { episodes, horizon, seed } => {
            let batch = EpisodeBatch::sample(model, policy, episodes, horizon, seed, Default::default())?;
            advantages_from_batch(model, policy, &batch, i)
        }
    }
}

/// ε(κ) = (r_max/(1−γ))·γ^(κ+1).
pub fn epsilon_for_kappa(r_max: f64, gamma: f64, kappa: usize) -> Result<f64> {
    decay_bound(r_max, gamma, kappa)
}
