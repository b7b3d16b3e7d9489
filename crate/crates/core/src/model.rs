//! Finite networked Markov game: per-agent spaces, a factored transition
//! kernel, local rewards, discount and initial distribution.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{AgentGraph, AgentId, Neighborhood};

/// Joint state, one component per agent.
pub type JointState = Vec<usize>;
/// Joint action, one component per agent.
pub type JointAction = Vec<usize>;

/// Tolerance on kernel row sums and on the initial distribution mass.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Exhaustive validation is used up to this many kernel rows; above it a
/// seeded sample of [`VALIDATION_SAMPLES`] rows is checked instead.
pub const EXHAUSTIVE_VALIDATION_ROWS: u128 = 1_000_000;
pub const VALIDATION_SAMPLES: usize = 10_000;

/// Per-agent transition rows and rewards.
///
/// Both methods receive the full joint state and action for convenience, but
/// a local model must only read the components of the agent's closed
/// neighborhood N_i. Models whose rewards read beyond N_i must be built with
/// [`RewardScope::Global`].
pub trait LocalDynamics: Send + Sync + fmt::Debug {
    /// Writes Pr(s_i' | s_{N_i}, a_{N_i}) into `out`, which has length |S_i|.
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]);

    /// r_i(s_{N_i}, a_{N_i}).
    fn reward(&self, agent: AgentId, state: &[usize], action: &[usize]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardScope {
    /// r_i reads only N_i.
    Local,
    /// r_i may read any component (team rewards and similar oracle-only games).
    Global,
}

/// Distribution of the initial joint state.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDistribution {
    Uniform,
    Point(JointState),
    /// Explicit probabilities indexed by joint state index.
    Weights(Vec<f64>),
    /// Uniform over joint states whose components sum to `total`.
    FixedSum { total: usize },
}

/// Mixed-radix codec; the first component is the least significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedRadix {
    radices: Vec<usize>,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        Self { radices }
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Product of the radices, `None` on u128 overflow.
    pub fn cardinality(&self) -> Option<u128> {
        self.radices
            .iter()
            .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
    }

    pub fn encode(&self, digits: &[usize]) -> Result<u128> {
        if digits.len() != self.radices.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} components, got {}",
                self.radices.len(),
                digits.len()
            )));
        }
        let mut index = 0u128;
        let mut stride = 1u128;
        for (k, (&d, &r)) in digits.iter().zip(&self.radices).enumerate() {
            if d >= r {
                return Err(Error::ComponentOutOfRange {
                    component: k,
                    value: d,
                    size: r,
                });
            }
            index = (d as u128)
                .checked_mul(stride)
                .and_then(|x| x.checked_add(index))
                .ok_or_else(|| Error::InvalidArgument("mixed-radix index overflows u128".into()))?;
            stride = stride.saturating_mul(r as u128);
        }
        Ok(index)
    }

    pub fn decode(&self, mut index: u128) -> Vec<usize> {
        self.radices
            .iter()
            .map(|&r| {
                let d = (index % r as u128) as usize;
                index /= r as u128;
                d
            })
            .collect()
    }
}

/// A κ-hop restriction of a joint state (or action), in neighborhood order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalObservation {
    pub center: AgentId,
    pub kappa: usize,
    pub members: Vec<AgentId>,
    pub values: Vec<usize>,
}

pub fn project_local(state: &[usize], nb: &Neighborhood) -> LocalObservation {
    LocalObservation {
        center: nb.center,
        kappa: nb.kappa,
        members: nb.members.clone(),
        values: nb.members.iter().map(|&j| state[j]).collect(),
    }
}

/// Row index of a local state observation in the model's state radices.
pub fn local_obs_index(obs: &LocalObservation, model: &GameModel) -> Result<u128> {
    let radices = obs.members.iter().map(|&j| model.state_sizes[j]).collect();
    MixedRadix::new(radices).encode(&obs.values)
}

#[derive(Clone)]
pub struct GameModel {
    graph: AgentGraph,
    state_sizes: Vec<usize>,
    action_sizes: Vec<usize>,
    dynamics: Arc<dyn LocalDynamics>,
    gamma: f64,
    r_max: f64,
    initial: InitialDistribution,
    reward_scope: RewardScope,
    identical_interest: bool,
    neighborhoods: Vec<Vec<AgentId>>,
    fixed_sum_counts: Option<Arc<Vec<Vec<f64>>>>,
}

impl fmt::Debug for GameModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameModel")
            .field("agents", &self.num_agents())
            .field("state_sizes", &self.state_sizes)
            .field("action_sizes", &self.action_sizes)
            .field("gamma", &self.gamma)
            .field("r_max", &self.r_max)
            .field("initial", &self.initial)
            .field("reward_scope", &self.reward_scope)
            .field("dynamics", &self.dynamics)
            .finish()
    }
}

impl GameModel {
    /// Builds and validates a model with a uniform initial distribution and
    /// local rewards. Kernel rows and reward ranges are checked here.
    pub fn new(
        graph: AgentGraph,
        state_sizes: Vec<usize>,
        action_sizes: Vec<usize>,
        dynamics: Arc<dyn LocalDynamics>,
        gamma: f64,
        r_max: f64,
    ) -> Result<Self> {
        Self::with_scope(
            graph,
            state_sizes,
            action_sizes,
            dynamics,
            gamma,
            r_max,
            RewardScope::Local,
        )
    }

    pub fn with_scope(
        graph: AgentGraph,
        state_sizes: Vec<usize>,
        action_sizes: Vec<usize>,
        dynamics: Arc<dyn LocalDynamics>,
        gamma: f64,
        r_max: f64,
        reward_scope: RewardScope,
    ) -> Result<Self> {
        let n = graph.num_agents();
        if state_sizes.len() != n || action_sizes.len() != n {
            return Err(Error::InvalidModel(format!(
                "{n} agents but {} state sizes and {} action sizes",
                state_sizes.len(),
                action_sizes.len()
            )));
        }
        if state_sizes.iter().chain(&action_sizes).any(|&s| s == 0) {
            return Err(Error::InvalidModel("every state and action space must be non-empty".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!("discount {gamma} not in (0, 1)")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidModel(format!("reward ceiling {r_max} must be positive")));
        }
        let neighborhoods = (0..n).map(|i| graph.closed_neighborhood(i)).collect();
        let model = Self {
            graph,
            state_sizes,
            action_sizes,
            dynamics,
            gamma,
            r_max,
            initial: InitialDistribution::Uniform,
            reward_scope,
            identical_interest: false,
            neighborhoods,
            fixed_sum_counts: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_initial(mut self, initial: InitialDistribution) -> Result<Self> {
        let n = self.num_agents();
        match &initial {
            InitialDistribution::Uniform => {}
            InitialDistribution::Point(s) => self.check_state(s)?,
            InitialDistribution::Weights(w) => {
                let expected = self.joint_state_count();
                if expected != Some(w.len() as u128) {
                    return Err(Error::InvalidDistribution(format!(
                        "{} weights for {expected:?} joint states",
                        w.len()
                    )));
                }
                check_probability_vector(w, NORMALIZATION_TOL)?;
            }
            InitialDistribution::FixedSum { total } => {
                let counts = fixed_sum_counts(&self.state_sizes, *total);
                if counts[0][*total] == 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "no joint state of {n} agents sums to {total}"
                    )));
                }
                self.fixed_sum_counts = Some(Arc::new(counts));
            }
        }
        self.initial = initial;
        Ok(self)
    }

    /// Marks every agent as sharing one reward function, so the common value
    /// is a potential.
    pub fn with_identical_interest(mut self, identical: bool) -> Self {
        self.identical_interest = identical;
        self
    }

    pub fn graph(&self) -> &AgentGraph {
        &self.graph
    }

    pub fn num_agents(&self) -> usize {
        self.graph.num_agents()
    }

    pub fn state_sizes(&self) -> &[usize] {
        &self.state_sizes
    }

    pub fn action_sizes(&self) -> &[usize] {
        &self.action_sizes
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn initial(&self) -> &InitialDistribution {
        &self.initial
    }

    pub fn reward_scope(&self) -> RewardScope {
        self.reward_scope
    }

    pub fn identical_interest(&self) -> bool {
        self.identical_interest
    }

    pub fn dynamics(&self) -> &Arc<dyn LocalDynamics> {
        &self.dynamics
    }

    /// Closed one-hop neighborhood N_i, ascending.
    pub fn neighborhood(&self, i: AgentId) -> &[AgentId] {
        &self.neighborhoods[i]
    }

    pub fn joint_state_count(&self) -> Option<u128> {
        MixedRadix::new(self.state_sizes.clone()).cardinality()
    }

    pub fn joint_action_count(&self) -> Option<u128> {
        MixedRadix::new(self.action_sizes.clone()).cardinality()
    }

    pub fn transition_row(&self, i: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        self.dynamics.transition_row(i, state, action, out)
    }

    pub fn reward(&self, i: AgentId, state: &[usize], action: &[usize]) -> f64 {
        self.dynamics.reward(i, state, action)
    }

    pub fn check_state(&self, s: &[usize]) -> Result<()> {
        check_components(s, &self.state_sizes)
    }

    pub fn check_action(&self, a: &[usize]) -> Result<()> {
        check_components(a, &self.action_sizes)
    }

    /// Draws s⁰ ~ μ.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> JointState {
        match &self.initial {
            InitialDistribution::Uniform => {
                self.state_sizes.iter().map(|&k| rng.gen_range(0..k)).collect()
            }
            InitialDistribution::Point(s) => s.clone(),
            InitialDistribution::Weights(w) => {
                let index = sample_categorical(w, rng);
                MixedRadix::new(self.state_sizes.clone()).decode(index as u128)
            }
            InitialDistribution::FixedSum { total } => {
                let counts = self.fixed_sum_counts.as_ref().expect("counts built with the distribution");
                let mut remaining = *total;
                let mut s = Vec::with_capacity(self.num_agents());
                for (k, &size) in self.state_sizes.iter().enumerate() {
                    let upper = (size - 1).min(remaining);
                    let weights: Vec<f64> = (0..=upper).map(|x| counts[k + 1][remaining - x]).collect();
                    let x = sample_categorical(&weights, rng);
                    s.push(x);
                    remaining -= x;
                }
                s
            }
        }
    }

    /// μ(s) for a joint state given by its components.
    pub fn initial_probability(&self, s: &[usize]) -> f64 {
        match &self.initial {
            InitialDistribution::Uniform => {
                1.0 / self.state_sizes.iter().map(|&k| k as f64).product::<f64>()
            }
            InitialDistribution::Point(p) => {
                if p.as_slice() == s {
                    1.0
                } else {
                    0.0
                }
            }
            InitialDistribution::Weights(w) => {
                let idx = MixedRadix::new(self.state_sizes.clone())
                    .encode(s)
                    .expect("valid joint state");
                w[idx as usize]
            }
            InitialDistribution::FixedSum { total } => {
                let counts = self.fixed_sum_counts.as_ref().expect("counts built with the distribution");
                if s.iter().sum::<usize>() == *total {
                    1.0 / counts[0][*total]
                } else {
                    0.0
                }
            }
        }
    }

    /// Checks kernel normalization and reward range over every local
    /// configuration, or over a seeded sample on large models.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_agents();
        let mut rows_total: u128 = 0;
        for i in 0..n {
            let per_agent = self.neighborhoods[i].iter().try_fold(1u128, |acc, &j| {
                acc.checked_mul((self.state_sizes[j] * self.action_sizes[j]) as u128)
            });
            rows_total = rows_total.saturating_add(per_agent.unwrap_or(u128::MAX));
        }
        let mut state = vec![0usize; n];
        let mut action = vec![0usize; n];
        let mut row = Vec::new();
        if rows_total <= EXHAUSTIVE_VALIDATION_ROWS {
            for i in 0..n {
                let members = &self.neighborhoods[i];
                let mut radices: Vec<usize> = members.iter().map(|&j| self.state_sizes[j]).collect();
                radices.extend(members.iter().map(|&j| self.action_sizes[j]));
                let codec = MixedRadix::new(radices);
                let count = codec.cardinality().unwrap_or(0);
                for index in 0..count {
                    let digits = codec.decode(index);
                    for (k, &j) in members.iter().enumerate() {
                        state[j] = digits[k];
                        action[j] = digits[members.len() + k];
                    }
                    self.check_row(i, &state, &action, &mut row)?;
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_a11d);
            for _ in 0..VALIDATION_SAMPLES {
                let i = rng.gen_range(0..n);
                for j in 0..n {
                    state[j] = rng.gen_range(0..self.state_sizes[j]);
                    action[j] = rng.gen_range(0..self.action_sizes[j]);
                }
                self.check_row(i, &state, &action, &mut row)?;
            }
        }
        if self.reward_scope == RewardScope::Global {
            let mut rng = ChaCha8Rng::seed_from_u64(0x0061_0ba1);
            for _ in 0..VALIDATION_SAMPLES.min(1000) {
                for j in 0..n {
                    state[j] = rng.gen_range(0..self.state_sizes[j]);
                    action[j] = rng.gen_range(0..self.action_sizes[j]);
                }
                for i in 0..n {
                    self.check_reward(i, &state, &action)?;
                }
            }
        }
        Ok(())
    }

    fn check_row(&self, i: AgentId, state: &[usize], action: &[usize], row: &mut Vec<f64>) -> Result<()> {
        row.clear();
        row.resize(self.state_sizes[i], 0.0);
        self.dynamics.transition_row(i, state, action, row);
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidModel(format!(
                "transition row of agent {i} at state {state:?}, action {action:?} sums to {sum}"
            )));
        }
        self.check_reward(i, state, action)
    }

    fn check_reward(&self, i: AgentId, state: &[usize], action: &[usize]) -> Result<()> {
        let r = self.dynamics.reward(i, state, action);
        if !(r >= 0.0 && r <= self.r_max + 1e-12) {
            return Err(Error::InvalidModel(format!(
                "reward {r} of agent {i} at state {state:?}, action {action:?} outside [0, {}]",
                self.r_max
            )));
        }
        Ok(())
    }
}

fn check_components(v: &[usize], sizes: &[usize]) -> Result<()> {
    if v.len() != sizes.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} components, got {}",
            sizes.len(),
            v.len()
        )));
    }
    for (k, (&x, &size)) in v.iter().zip(sizes).enumerate() {
        if x >= size {
            return Err(Error::ComponentOutOfRange {
                component: k,
                value: x,
                size,
            });
        }
    }
    Ok(())
}

/// `counts[k][r]` = number of ways for agents k.. to hold exactly r in total.
fn fixed_sum_counts(sizes: &[usize], total: usize) -> Vec<Vec<f64>> {
    let n = sizes.len();
    let mut counts = vec![vec![0.0; total + 1]; n + 1];
    counts[n][0] = 1.0;
    for k in (0..n).rev() {
        for r in 0..=total {
            counts[k][r] = (0..sizes[k].min(r + 1)).map(|x| counts[k + 1][r - x]).sum();
        }
    }
    counts
}

pub fn check_probability_vector(p: &[f64], tol: f64) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDistribution("entries must be finite and non-negative".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Inverse-CDF draw from unnormalized non-negative weights.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_graph;

    #[derive(Debug)]
    struct Stay;

    impl LocalDynamics for Stay {
        fn transition_row(&self, agent: AgentId, state: &[usize], _: &[usize], out: &mut [f64]) {
            out.iter_mut().for_each(|p| *p = 0.0);
            out[state[agent]] = 1.0;
        }
        fn reward(&self, _: AgentId, _: &[usize], _: &[usize]) -> f64 {
            0.5
        }
    }

    #[derive(Debug)]
    struct Leaky;

    impl LocalDynamics for Leaky {
        fn transition_row(&self, _: AgentId, _: &[usize], _: &[usize], out: &mut [f64]) {
            out.iter_mut().for_each(|p| *p = 0.4);
        }
        fn reward(&self, _: AgentId, _: &[usize], _: &[usize]) -> f64 {
            0.0
        }
    }

    fn stay_model(sizes: Vec<usize>) -> GameModel {
        let n = sizes.len();
        GameModel::new(AgentGraph::line(n).unwrap(), sizes, vec![2; n], Arc::new(Stay), 0.9, 1.0).unwrap()
    }

    #[test]
    fn project_local_restricts_coordinates() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        let nb = g.kappa_neighborhood(0, 1).unwrap();
        assert_eq!(project_local(&[2, 0, 1], &nb).values, vec![2, 0]);
        let all = g.kappa_neighborhood(1, 1).unwrap();
        assert_eq!(project_local(&[2, 0, 1], &all).values, vec![2, 0, 1]);
        let single = g.kappa_neighborhood(1, 0).unwrap();
        assert_eq!(project_local(&[2, 0, 1], &single).values, vec![0]);
    }

    #[test]
    fn local_obs_index_examples() {
        let model = stay_model(vec![2, 2]);
        let nb = model.graph().kappa_neighborhood(0, 1).unwrap();
        assert_eq!(local_obs_index(&project_local(&[0, 0], &nb), &model).unwrap(), 0);
        assert_eq!(local_obs_index(&project_local(&[1, 1], &nb), &model).unwrap(), 3);

        let model = stay_model(vec![3, 2]);
        let nb = model.graph().kappa_neighborhood(0, 1).unwrap();
        assert_eq!(local_obs_index(&project_local(&[2, 1], &nb), &model).unwrap(), 5);
        // bijective over all six tuples
        let mut seen = [false; 6];
        for a in 0..3 {
            for b in 0..2 {
                let idx = local_obs_index(&project_local(&[a, b], &nb), &model).unwrap() as usize;
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn local_obs_index_rejects_out_of_range() {
        let model = stay_model(vec![2, 2]);
        let obs = LocalObservation {
            center: 0,
            kappa: 1,
            members: vec![0, 1],
            values: vec![0, 2],
        };
        assert!(matches!(
            local_obs_index(&obs, &model),
            Err(Error::ComponentOutOfRange { component: 1, value: 2, size: 2 })
        ));
    }

    #[test]
    fn unnormalized_kernel_is_rejected_at_construction() {
        let err = GameModel::new(AgentGraph::line(2).unwrap(), vec![2, 2], vec![2, 2], Arc::new(Leaky), 0.9, 1.0);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn reward_above_ceiling_is_rejected() {
        let err = GameModel::new(AgentGraph::line(2).unwrap(), vec![2, 2], vec![2, 2], Arc::new(Stay), 0.9, 0.25);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn bad_discount_rejected() {
        for gamma in [0.0, 1.0, -0.3] {
            let err = GameModel::new(AgentGraph::line(1).unwrap(), vec![2], vec![2], Arc::new(Stay), gamma, 1.0);
            assert!(err.is_err());
        }
    }

    #[test]
    fn fixed_sum_initial_distribution() {
        let model = stay_model(vec![3, 3, 3])
            .with_initial(InitialDistribution::FixedSum { total: 3 })
            .unwrap();
        // compositions of 3 into 3 parts each ≤ 2: 7
        let mut mass = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    mass += model.initial_probability(&[a, b, c]);
                }
            }
        }
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((model.initial_probability(&[1, 1, 1]) - 1.0 / 7.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = model.sample_initial(&mut rng);
            assert_eq!(s.iter().sum::<usize>(), 3);
            assert!(s.iter().all(|&x| x < 3));
        }
    }

    #[test]
    fn weights_must_normalize() {
        let model = stay_model(vec![2]);
        assert!(model.clone().with_initial(InitialDistribution::Weights(vec![0.3, 0.3])).is_err());
        assert!(model.with_initial(InitialDistribution::Weights(vec![0.3, 0.7])).is_ok());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
