//! Brute-force evaluation on the joint MDP.
//!
//! The joint kernel is materialized here only: P^π as a dense S×S matrix and,
//! for best responses, one mixed row per (s, a_i).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::learning::JointPolicy;
use crate::model::{GameModel, MixedRadix};

/// Default cap on oracle table entries.
pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;
/// Bellman residual at which value iteration stops.
pub const VALUE_TOL: f64 = 1e-10;
/// The direct linear solve is used only up to this many joint states.
pub const DIRECT_SOLVE_LIMIT: usize = 1024;
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMethod {
    ValueIteration,
    Direct,
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub cap: u128,
    pub parallelism: Parallelism,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ORACLE_CAP,
            parallelism: Parallelism::default(),
        }
    }
}

/// Enumerated joint state and action spaces.
#[derive(Clone, Debug)]
pub struct JointSpace {
    pub num_agents: usize,
    pub num_states: usize,
    pub num_actions: usize,
    pub state_codec: MixedRadix,
    pub action_codec: MixedRadix,
    states: Vec<usize>,
    actions: Vec<usize>,
}

impl JointSpace {
    pub fn new(model: &GameModel) -> Result<Self> {
        let n = model.num_agents();
        let state_codec = MixedRadix::new(model.state_sizes().to_vec());
        let action_codec = MixedRadix::new(model.action_sizes().to_vec());
        let too_big = || Error::OracleInfeasible {
            entries: u128::MAX,
            cap: DEFAULT_ORACLE_CAP,
        };
        let num_states = usize::try_from(state_codec.cardinality().ok_or_else(too_big)?).map_err(|_| too_big())?;
        let num_actions = usize::try_from(action_codec.cardinality().ok_or_else(too_big)?).map_err(|_| too_big())?;
        let mut states = Vec::with_capacity(num_states * n);
        for s in 0..num_states {
            states.extend(state_codec.decode(s as u128));
        }
        let mut actions = Vec::with_capacity(num_actions * n);
        for a in 0..num_actions {
            actions.extend(action_codec.decode(a as u128));
        }
        Ok(Self {
            num_agents: n,
            num_states,
            num_actions,
            state_codec,
            action_codec,
            states,
            actions,
        })
    }

    pub fn state(&self, s: usize) -> &[usize] {
        &self.states[s * self.num_agents..(s + 1) * self.num_agents]
    }

    pub fn action(&self, a: usize) -> &[usize] {
        &self.actions[a * self.num_agents..(a + 1) * self.num_agents]
    }
}

/// Table entries the oracle would allocate: n·S·A values plus the dense
/// transition matrices S²·max(1, max_i |A_i|).
pub fn oracle_entries(model: &GameModel) -> u128 {
    let s = model.joint_state_count().unwrap_or(u128::MAX);
    let a = model.joint_action_count().unwrap_or(u128::MAX);
    let widest = model.action_sizes().iter().copied().max().unwrap_or(1) as u128;
    (model.num_agents() as u128)
        .saturating_mul(s)
        .saturating_mul(a)
        .saturating_add(s.saturating_mul(s).saturating_mul(widest))
}

pub fn oracle_feasible(model: &GameModel, cap: u128) -> bool {
    oracle_entries(model) <= cap
}

/// Exact V, Q and advantage tables for every agent.
#[derive(Clone, Debug)]
pub struct ExactTables {
    pub num_agents: usize,
    pub num_states: usize,
    pub num_actions: usize,
    v: Vec<f64>,
    q: Vec<f64>,
    adv: Vec<f64>,
    /// max_i max_s |V_i − (R_i^π + γ P^π V_i)|
    pub residual: f64,
}

impl ExactTables {
    pub fn v(&self, i: usize, s: usize) -> f64 {
        self.v[i * self.num_states + s]
    }

    pub fn q(&self, i: usize, s: usize, a: usize) -> f64 {
        self.q[(i * self.num_states + s) * self.num_actions + a]
    }

    pub fn advantage(&self, i: usize, s: usize, a: usize) -> f64 {
        self.adv[(i * self.num_states + s) * self.num_actions + a]
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.v[i * self.num_states..(i + 1) * self.num_states]
    }

    /// Q_i as an S×A row-major slice.
    pub fn q_values(&self, i: usize) -> &[f64] {
        let w = self.num_states * self.num_actions;
        &self.q[i * w..(i + 1) * w]
    }

    pub fn advantages(&self, i: usize) -> &[f64] {
        let w = self.num_states * self.num_actions;
        &self.adv[i * w..(i + 1) * w]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashGap {
    /// max_i max_s [V_i^{BR_i, π_{-i}}(s) − V_i^π(s)]
    pub gap: f64,
    pub per_agent: Vec<f64>,
}

/// Joint-space view of a (model, policy) pair.
pub struct JointOracle<'a> {
    model: &'a GameModel,
    space: JointSpace,
    parallelism: Parallelism,
    /// π_i(a_i | s), per agent S×|A_i|.
    agent_probs: Vec<Vec<f64>>,
    /// π(a | s), S×A.
    joint_probs: Vec<f64>,
    /// r_i(s, a), per agent S×A.
    rewards: Vec<Vec<f64>>,
    /// P^π(s' | s), S×S.
    p_pi: Vec<f64>,
    mu: Vec<f64>,
}

impl<'a> JointOracle<'a> {
    pub fn new(model: &'a GameModel, policy: &JointPolicy, options: OracleOptions) -> Result<Self> {
        let entries = oracle_entries(model);
        if entries > options.cap {
            return Err(Error::OracleInfeasible {
                entries,
                cap: options.cap,
            });
        }
        policy.check_compatible(model)?;
        let space = JointSpace::new(model)?;
        let (ns, na, n) = (space.num_states, space.num_actions, space.num_agents);
        let par = options.parallelism;

        let agent_probs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let table = policy.table(i);
                (0..ns)
                    .flat_map(|s| table.distribution(table.observation(space.state(s))))
                    .collect()
            })
            .collect();

        let mut joint_probs = vec![0.0; ns * na];
        par.for_each_chunk(&mut joint_probs, na, |s, row| {
            for (a, p) in row.iter_mut().enumerate() {
                *p = space
                    .action(a)
                    .iter()
                    .enumerate()
                    .map(|(i, &ai)| agent_probs[i][s * model.action_sizes()[i] + ai])
                    .product();
            }
        });

        let rewards: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; ns * na];
                par.for_each_chunk(&mut r, na, |s, row| {
                    for (a, x) in row.iter_mut().enumerate() {
                        *x = model.reward(i, space.state(s), space.action(a));
                    }
                });
                r
            })
            .collect();

        let mut p_pi = vec![0.0; ns * ns];
        par.for_each_chunk(&mut p_pi, ns, |s, row| {
            let mut next = Vec::new();
            let mut scratch = Vec::new();
            for a in 0..na {
                let w = joint_probs[s * na + a];
                if w == 0.0 {
                    continue;
                }
                next_state_distribution(model, space.state(s), space.action(a), &mut next, &mut scratch);
                for (acc, p) in row.iter_mut().zip(&next) {
                    *acc += w * p;
                }
            }
        });

        let mu = (0..ns).map(|s| model.initial_probability(space.state(s))).collect();

        Ok(Self {
            model,
            space,
            parallelism: par,
            agent_probs,
            joint_probs,
            rewards,
            p_pi,
            mu,
        })
    }

    pub fn model(&self) -> &GameModel {
        self.model
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// π(a | s).
    pub fn joint_probability(&self, s: usize, a: usize) -> f64 {
        self.joint_probs[s * self.space.num_actions + a]
    }

    /// π_i(a_i | s).
    pub fn agent_probability(&self, i: usize, s: usize, ai: usize) -> f64 {
        self.agent_probs[i][s * self.model.action_sizes()[i] + ai]
    }

    /// Π_{j≠i} π_j(a_j | s).
    pub fn others_probability(&self, i: usize, s: usize, a: usize) -> f64 {
        self.space
            .action(a)
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, &aj)| self.agent_probability(j, s, aj))
            .product()
    }

    pub fn reward(&self, i: usize, s: usize, a: usize) -> f64 {
        self.rewards[i][s * self.space.num_actions + a]
    }

    /// P^π(s' | s).
    pub fn transition(&self, s: usize, next: usize) -> f64 {
        self.p_pi[s * self.space.num_states + next]
    }

    fn policy_rewards(&self, i: usize) -> Vec<f64> {
        let na = self.space.num_actions;
        (0..self.space.num_states)
            .map(|s| {
                (0..na)
                    .map(|a| self.joint_probs[s * na + a] * self.rewards[i][s * na + a])
                    .sum()
            })
            .collect()
    }

    fn bellman(&self, r_pi: &[f64], v: &[f64], out: &mut [f64]) {
        let ns = self.space.num_states;
        let gamma = self.model.gamma();
        self.parallelism.for_each_chunk(out, 1, |s, x| {
            let row = &self.p_pi[s * ns..(s + 1) * ns];
            x[0] = r_pi[s] + gamma * row.iter().zip(v).map(|(p, v)| p * v).sum::<f64>();
        });
    }

    /// Value iteration for every agent.
    pub fn evaluate(&self) -> Result<ExactTables> {
        self.evaluate_with(EvalMethod::ValueIteration)
    }

    pub fn evaluate_with(&self, method: EvalMethod) -> Result<ExactTables> {
        let n = self.space.num_agents;
        let ns = self.space.num_states;
        let mut v = Vec::with_capacity(n * ns);
        for i in 0..n {
            let r_pi = self.policy_rewards(i);
            let vi = match method {
                EvalMethod::ValueIteration => self.value_iteration(&r_pi),
                EvalMethod::Direct => self.direct_solve(&r_pi)?,
            };
            v.extend(vi);
        }
        self.finish_tables(v)
    }

    fn value_iteration(&self, r_pi: &[f64]) -> Vec<f64> {
        let ns = self.space.num_states;
        let mut v = vec![0.0; ns];
        let mut next = vec![0.0; ns];
        for _ in 0..MAX_SWEEPS {
            self.bellman(r_pi, &v, &mut next);
            let change = v.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            std::mem::swap(&mut v, &mut next);
            // residual of the returned iterate is at most γ·change
            if change <= VALUE_TOL {
                break;
            }
        }
        v
    }

    fn direct_solve(&self, r_pi: &[f64]) -> Result<Vec<f64>> {
        let ns = self.space.num_states;
        if ns > DIRECT_SOLVE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "direct solve limited to {DIRECT_SOLVE_LIMIT} joint states, model has {ns}"
            )));
        }
        let gamma = self.model.gamma();
        let m = DMatrix::from_fn(ns, ns, |s, t| {
            let eye = if s == t { 1.0 } else { 0.0 };
            eye - gamma * self.p_pi[s * ns + t]
        });
        let b = DVector::from_column_slice(r_pi);
        m.lu()
            .solve(&b)
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::InvalidModel("singular evaluation system".into()))
    }

    fn finish_tables(&self, v: Vec<f64>) -> Result<ExactTables> {
        let n = self.space.num_agents;
        let ns = self.space.num_states;
        let na = self.space.num_actions;
        let gamma = self.model.gamma();

        let mut residual = 0.0f64;
        let mut scratch = vec![0.0; ns];
        for i in 0..n {
            let r_pi = self.policy_rewards(i);
            let vi = &v[i * ns..(i + 1) * ns];
            self.bellman(&r_pi, vi, &mut scratch);
            residual = vi.iter().zip(&scratch).fold(residual, |m, (a, b)| m.max((a - b).abs()));
        }

        // q laid out as [agent][state][action]; filled per state for all agents
        let rows: Vec<Vec<f64>> = self.parallelism.map(ns, |s| {
            let mut next = Vec::new();
            let mut tmp = Vec::new();
            let mut out = vec![0.0; n * na];
            for a in 0..na {
                next_state_distribution(self.model, self.space.state(s), self.space.action(a), &mut next, &mut tmp);
                for i in 0..n {
                    let vi = &v[i * ns..(i + 1) * ns];
                    let ev: f64 = next.iter().zip(vi).map(|(p, x)| p * x).sum();
                    out[i * na + a] = self.rewards[i][s * na + a] + gamma * ev;
                }
            }
            out
        });
        let mut q = vec![0.0; n * ns * na];
        let mut adv = vec![0.0; n * ns * na];
        for (s, row) in rows.iter().enumerate() {
            for i in 0..n {
                for a in 0..na {
                    let idx = (i * ns + s) * na + a;
                    q[idx] = row[i * na + a];
                    adv[idx] = q[idx] - v[i * ns + s];
                }
            }
        }
        Ok(ExactTables {
            num_agents: n,
            num_states: ns,
            num_actions: na,
            v,
            q,
            adv,
            residual,
        })
    }

    /// Normalized discounted state occupancy d(s) = (1−γ) Σ_t γᵗ Pr(sᵗ = s), s⁰ ~ μ.
    pub fn occupancy(&self) -> Vec<f64> {
        let ns = self.space.num_states;
        let gamma = self.model.gamma();
        let mut d = self.mu.clone();
        let mut next = vec![0.0; ns];
        for _ in 0..MAX_SWEEPS {
            self.parallelism.for_each_chunk(&mut next, 1, |t, x| {
                let inflow: f64 = (0..ns).map(|s| d[s] * self.p_pi[s * ns + t]).sum();
                x[0] = (1.0 - gamma) * self.mu[t] + gamma * inflow;
            });
            let change: f64 = d.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut d, &mut next);
            if change <= 1e-15 {
                break;
            }
        }
        d
    }

    /// Exact best-response gap of every agent against the others' policies.
    pub fn nash_gap(&self, tables: &ExactTables) -> Result<NashGap> {
        let n = self.space.num_agents;
        let ns = self.space.num_states;
        let na = self.space.num_actions;
        let gamma = self.model.gamma();
        let mut per_agent = Vec::with_capacity(n);
        for i in 0..n {
            let ki = self.model.action_sizes()[i];
            // mixed[s] holds, for each own action, the reward followed by the S next-state masses
            let mixed: Vec<Vec<f64>> = self.parallelism.map(ns, |s| {
                let width = ns + 1;
                let mut out = vec![0.0; ki * width];
                let mut next = Vec::new();
                let mut tmp = Vec::new();
                for a in 0..na {
                    let w = self.others_probability(i, s, a);
                    if w == 0.0 {
                        continue;
                    }
                    let ai = self.space.action(a)[i];
                    let block = &mut out[ai * width..(ai + 1) * width];
                    block[0] += w * self.rewards[i][s * na + a];
                    next_state_distribution(self.model, self.space.state(s), self.space.action(a), &mut next, &mut tmp);
                    for (acc, p) in block[1..].iter_mut().zip(&next) {
                        *acc += w * p;
                    }
                }
                out
            });
            let mut v = tables.values(i).to_vec();
            let mut fresh = vec![0.0; ns];
            for _ in 0..MAX_SWEEPS {
                self.parallelism.for_each_chunk(&mut fresh, 1, |s, x| {
                    let width = ns + 1;
                    x[0] = (0..ki)
                        .map(|ai| {
                            let block = &mixed[s][ai * width..(ai + 1) * width];
                            block[0] + gamma * block[1..].iter().zip(&v).map(|(p, x)| p * x).sum::<f64>()
                        })
                        .fold(f64::NEG_INFINITY, f64::max);
                });
                let change = v.iter().zip(&fresh).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                std::mem::swap(&mut v, &mut fresh);
                if change <= VALUE_TOL * 0.1 {
                    break;
                }
            }
            let gap = v
                .iter()
                .zip(tables.values(i))
                .fold(0.0f64, |m, (br, vi)| m.max(br - vi));
            per_agent.push(gap.max(0.0));
        }
        let gap = per_agent.iter().copied().fold(0.0, f64::max);
        Ok(NashGap { gap, per_agent })
    }

    /// E_{s⁰~μ}[V_i(s⁰)] for each agent.
    pub fn initial_values(&self, tables: &ExactTables) -> Vec<f64> {
        (0..self.space.num_agents)
            .map(|i| self.mu.iter().zip(tables.values(i)).map(|(m, v)| m * v).sum())
            .collect()
    }
}

/// Writes the product distribution Π_i Pr(s_i' | s_{N_i}, a_{N_i}) over joint
/// next states into `out`, agent 0 varying fastest.
pub fn next_state_distribution(
    model: &GameModel,
    state: &[usize],
    action: &[usize],
    out: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) {
    out.clear();
    out.push(1.0);
    for (i, &size) in model.state_sizes().iter().enumerate() {
        scratch.clear();
        scratch.resize(size, 0.0);
        model.transition_row(i, state, action, scratch);
        let prev = std::mem::take(out);
        out.reserve(prev.len() * size);
        for &p in scratch.iter() {
            out.extend(prev.iter().map(|q| q * p));
        }
    }
}

pub fn exact_evaluate(model: &GameModel, policy: &JointPolicy) -> Result<ExactTables> {
    JointOracle::new(model, policy, OracleOptions::default())?.evaluate()
}

pub fn nash_gap(model: &GameModel, policy: &JointPolicy) -> Result<f64> {
    let oracle = JointOracle::new(model, policy, OracleOptions::default())?;
    let tables = oracle.evaluate()?;
    Ok(oracle.nash_gap(&tables)?.gap)
}
