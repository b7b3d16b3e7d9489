//! Truncated Q-functions: weighted averages of the true Q over exterior
//! (outside N_i^κ) configurations.

use crate::error::{Error, Result};
use crate::evaluation::oracle::{ExactTables, JointOracle, JointSpace};
use crate::network::{AgentId, Neighborhood};

/// Decomposition of joint indices into (N_i^κ, exterior) parts.
#[derive(Clone, Debug)]
pub struct LocalSplit {
    pub agent: AgentId,
    pub kappa: usize,
    pub members: Vec<AgentId>,
    pub exterior: Vec<AgentId>,
    pub local_states: usize,
    pub local_actions: usize,
    pub exterior_states: usize,
    pub exterior_actions: usize,
    loc_state: Vec<usize>,
    ext_state: Vec<usize>,
    loc_action: Vec<usize>,
    ext_action: Vec<usize>,
}

fn sub_index(digits: &[usize], sizes: &[usize], which: &[usize]) -> usize {
    let mut index = 0;
    let mut stride = 1;
    for &j in which {
        index += digits[j] * stride;
        stride *= sizes[j];
    }
    index
}

impl LocalSplit {
    pub fn new(space: &JointSpace, nb: &Neighborhood) -> Self {
        let n = space.num_agents;
        let members = nb.members.clone();
        let exterior = nb.complement(n);
        let s_sizes = space.state_codec.radices();
        let a_sizes = space.action_codec.radices();
        let prod = |sizes: &[usize], which: &[usize]| which.iter().map(|&j| sizes[j]).product::<usize>();
        let loc_state = (0..space.num_states)
            .map(|s| sub_index(space.state(s), s_sizes, &members))
            .collect();
        let ext_state = (0..space.num_states)
            .map(|s| sub_index(space.state(s), s_sizes, &exterior))
            .collect();
        let loc_action = (0..space.num_actions)
            .map(|a| sub_index(space.action(a), a_sizes, &members))
            .collect();
        let ext_action = (0..space.num_actions)
            .map(|a| sub_index(space.action(a), a_sizes, &exterior))
            .collect();
        Self {
            agent: nb.center,
            kappa: nb.kappa,
            local_states: prod(s_sizes, &members),
            local_actions: prod(a_sizes, &members),
            exterior_states: prod(s_sizes, &exterior),
            exterior_actions: prod(a_sizes, &exterior),
            members,
            exterior,
            loc_state,
            ext_state,
            loc_action,
            ext_action,
        }
    }

    pub fn local_state(&self, s: usize) -> usize {
        self.loc_state[s]
    }

    pub fn exterior_state(&self, s: usize) -> usize {
        self.ext_state[s]
    }

    /// Local state-action index: local state varies fastest.
    pub fn local_pair(&self, s: usize, a: usize) -> usize {
        self.loc_state[s] + self.local_states * self.loc_action[a]
    }

    pub fn exterior_pair(&self, s: usize, a: usize) -> usize {
        self.ext_state[s] + self.exterior_states * self.ext_action[a]
    }

    /// Local state of a local state-action index.
    pub fn state_of_pair(&self, local_pair: usize) -> usize {
        local_pair % self.local_states
    }

    pub fn local_pairs(&self) -> usize {
        self.local_states * self.local_actions
    }

    pub fn exterior_pairs(&self) -> usize {
        self.exterior_states * self.exterior_actions
    }

    /// Action component of `agent` inside a local action index.
    pub fn member_action(&self, local_pair: usize, action_sizes: &[usize], agent: AgentId) -> usize {
        let mut rest = local_pair / self.local_states;
        for &j in &self.members {
            let d = rest % action_sizes[j];
            if j == agent {
                return d;
            }
            rest /= action_sizes[j];
        }
        panic!("agent {agent} is not a member of the split");
    }
}

/// Normalized non-negative weights w_i(exterior; local) for state-action
/// pairs, plus their state-only counterparts used for V̂.
#[derive(Clone, Debug)]
pub struct TruncationWeights {
    pub split: LocalSplit,
    /// Row per local pair, column per exterior pair.
    pair_weights: Vec<f64>,
    /// Row per local state, column per exterior state.
    state_weights: Vec<f64>,
    /// Unnormalized occupancy mass of each local pair (zero for uniform weights).
    pub pair_mass: Vec<f64>,
}

impl TruncationWeights {
    /// Equal weight on every exterior configuration.
    pub fn uniform(split: LocalSplit) -> Self {
        let pe = split.exterior_pairs();
        let se = split.exterior_states;
        Self {
            pair_weights: vec![1.0 / pe as f64; split.local_pairs() * pe],
            state_weights: vec![1.0 / se as f64; split.local_states * se],
            pair_mass: vec![0.0; split.local_pairs()],
            split,
        }
    }

    /// Conditional discounted-visitation frequencies of the exterior given the
    /// local configuration. Local rows with no mass fall back to uniform.
    pub fn visitation(oracle: &JointOracle<'_>, occupancy: &[f64], split: LocalSplit) -> Self {
        let space = oracle.space();
        let pe = split.exterior_pairs();
        let se = split.exterior_states;
        let mut pair_weights = vec![0.0; split.local_pairs() * pe];
        let mut state_weights = vec![0.0; split.local_states * se];
        for s in 0..space.num_states {
            state_weights[split.local_state(s) * se + split.exterior_state(s)] += occupancy[s];
            for a in 0..space.num_actions {
                let w = occupancy[s] * oracle.joint_probability(s, a);
                pair_weights[split.local_pair(s, a) * pe + split.exterior_pair(s, a)] += w;
            }
        }
        let mut pair_mass = Vec::with_capacity(split.local_pairs());
        for row in pair_weights.chunks_mut(pe) {
            pair_mass.push(row.iter().sum());
            normalize_or_uniform(row);
        }
        for row in state_weights.chunks_mut(se) {
            normalize_or_uniform(row);
        }
        Self {
            split,
            pair_weights,
            state_weights,
            pair_mass,
        }
    }

    pub fn pair_row(&self, local_pair: usize) -> &[f64] {
        let pe = self.split.exterior_pairs();
        &self.pair_weights[local_pair * pe..(local_pair + 1) * pe]
    }

    pub fn state_row(&self, local_state: usize) -> &[f64] {
        let se = self.split.exterior_states;
        &self.state_weights[local_state * se..(local_state + 1) * se]
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        let pairs = (0..self.split.local_pairs()).map(|l| self.pair_row(l).iter().sum::<f64>());
        let states = (0..self.split.local_states).map(|l| self.state_row(l).iter().sum::<f64>());
        pairs.chain(states).fold(0.0, |m, x| m.max((x - 1.0).abs()))
    }
}

fn normalize_or_uniform(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter_mut().for_each(|w| *w /= total);
    } else {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|w| *w = u);
    }
}

/// Q̂_i over local state-action pairs.
#[derive(Clone, Debug)]
pub struct LocalQTable {
    pub agent: AgentId,
    pub kappa: usize,
    pub values: Vec<f64>,
}

/// V̂_i over local states.
#[derive(Clone, Debug)]
pub struct LocalVTable {
    pub agent: AgentId,
    pub kappa: usize,
    pub values: Vec<f64>,
}

fn check_weights(tables: &ExactTables, weights: &TruncationWeights) -> Result<()> {
    let split = &weights.split;
    if split.agent >= tables.num_agents || split.loc_state.len() != tables.num_states || split.loc_action.len() != tables.num_actions {
        return Err(Error::InvalidArgument("truncation weights do not match the evaluated tables".into()));
    }
    Ok(())
}

/// Q̂_i(local) = Σ_exterior w_i(exterior; local) · Q_i(local ⊎ exterior).
pub fn truncated_q(tables: &ExactTables, weights: &TruncationWeights) -> Result<LocalQTable> {
    check_weights(tables, weights)?;
    let split = &weights.split;
    let mut values = vec![0.0; split.local_pairs()];
    let q = tables.q_values(split.agent);
    for s in 0..tables.num_states {
        for a in 0..tables.num_actions {
            let l = split.local_pair(s, a);
            let e = split.exterior_pair(s, a);
            values[l] += weights.pair_row(l)[e] * q[s * tables.num_actions + a];
        }
    }
    Ok(LocalQTable {
        agent: split.agent,
        kappa: split.kappa,
        values,
    })
}

/// V̂_i(local) = Σ_exterior w_i(exterior; local) · V_i(local ⊎ exterior).
pub fn truncated_v(tables: &ExactTables, weights: &TruncationWeights) -> Result<LocalVTable> {
    check_weights(tables, weights)?;
    let split = &weights.split;
    let mut values = vec![0.0; split.local_states];
    let v = tables.values(split.agent);
    for (s, &vs) in v.iter().enumerate() {
        let l = split.local_state(s);
        values[l] += weights.state_row(l)[split.exterior_state(s)] * vs;
    }
    Ok(LocalVTable {
        agent: split.agent,
        kappa: split.kappa,
        values,
    })
}
