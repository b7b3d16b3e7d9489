//! Independent, synchronous truncated NPG training loop.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::evaluation::{oracle_feasible, EpisodeBatch, JointOracle, OracleOptions, DEFAULT_ORACLE_CAP};
use crate::exec::Parallelism;
use crate::learning::npg::{advantages_from_batch, apply_npg_step, exact_local_advantages, AdvantageTable};
use crate::learning::policy::JointPolicy;
use crate::model::GameModel;
use crate::rollout::derive_seed;

/// Any |θ| above this aborts training.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Where each iteration's advantages come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdvantageMode {
    /// Exact oracle advantages; requires an oracle-feasible model.
    Exact,
    /// `episodes` fresh episodes per iteration with `horizon` recorded steps.
    MonteCarlo { episodes: usize, horizon: usize },
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub kappa: usize,
    /// Observe the full joint state regardless of κ.
    pub full_information: bool,
    pub eta: f64,
    /// η_t = eta · eta_decay^t.
    pub eta_decay: f64,
    pub iterations: usize,
    pub mode: AdvantageMode,
    pub seed: u64,
    pub oracle_cap: u128,
    /// Record the exact Nash gap each iteration when the oracle is feasible.
    pub track_nash_gap: bool,
    pub convergence_tol: f64,
    pub convergence_window: usize,
    pub parallelism: Parallelism,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            kappa: 1,
            full_information: false,
            eta: 0.1,
            eta_decay: 1.0,
            iterations: 200,
            mode: AdvantageMode::Exact,
            seed: 0,
            oracle_cap: DEFAULT_ORACLE_CAP,
            track_nash_gap: true,
            convergence_tol: 1e-6,
            convergence_window: 10,
            parallelism: Parallelism::default(),
        }
    }
}

/// Metrics of one policy iterate. `max_theta_delta` and `eta` are `None` on
/// the terminal row, which evaluates the final policy without updating it.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_returns: Vec<f64>,
    pub potential: Option<f64>,
    pub nash_gap: Option<f64>,
    pub max_theta_delta: Option<f64>,
    pub eta: Option<f64>,
    pub wall_clock_secs: f64,
}

impl IterationRecord {
    /// Average over agents of the per-agent return estimates.
    pub fn mean_return(&self) -> f64 {
        self.mean_returns.iter().sum::<f64>() / self.mean_returns.len() as f64
    }
}

// wall-clock is excluded so that reruns compare equal
impl PartialEq for IterationRecord {
    fn eq(&self, other: &Self) -> bool {
        self.iteration == other.iteration
            && self.mean_returns == other.mean_returns
            && self.potential == other.potential
            && self.nash_gap == other.nash_gap
            && self.max_theta_delta == other.max_theta_delta
            && self.eta == other.eta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearningRecord {
    pub rows: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl LearningRecord {
    pub fn terminal(&self) -> &IterationRecord {
        self.rows.last().expect("a learning record always has a terminal row")
    }

    /// Rows that carried an update (all but the terminal evaluation).
    pub fn updates(&self) -> &[IterationRecord] {
        &self.rows[..self.rows.len() - 1]
    }
}

struct Snapshot {
    advantages: Vec<AdvantageTable>,
    mean_returns: Vec<f64>,
    potential: Option<f64>,
    nash_gap: Option<f64>,
}

fn assess(model: &GameModel, policy: &JointPolicy, opts: &TrainOptions, iteration: usize, want_advantages: bool) -> Result<Snapshot> {
    let n = model.num_agents();
    let oracle_opts = OracleOptions {
        cap: opts.oracle_cap,
        parallelism: opts.parallelism,
    };
    let track = opts.track_nash_gap && oracle_feasible(model, opts.oracle_cap);
    match opts.mode {
        AdvantageMode::Exact => {
            let oracle = JointOracle::new(model, policy, oracle_opts)?;
            let tables = oracle.evaluate()?;
            let advantages = if want_advantages {
                let occupancy = oracle.occupancy();
                opts.parallelism
                    .map(n, |i| exact_local_advantages(&oracle, &tables, &occupancy, policy, i))
                    .into_iter()
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            };
            let mean_returns = oracle.initial_values(&tables);
            let nash_gap = if track { Some(oracle.nash_gap(&tables)?.gap) } else { None };
            Ok(Snapshot {
                advantages,
                potential: model.identical_interest().then(|| mean_returns[0]),
                mean_returns,
                nash_gap,
            })
        }
        AdvantageMode::MonteCarlo { episodes, horizon } => {
            let seed = derive_seed(opts.seed, &[iteration as u64]);
            let batch = EpisodeBatch::sample(model, policy, episodes, horizon, seed, opts.parallelism)?;
            let advantages = if want_advantages {
                opts.parallelism
                    .map(n, |i| advantages_from_batch(model, policy, &batch, i))
                    .into_iter()
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            };
            let mean_returns = batch.mean_initial_returns(model.gamma(), n);
            let nash_gap = if track {
                let oracle = JointOracle::new(model, policy, oracle_opts)?;
                let tables = oracle.evaluate()?;
                Some(oracle.nash_gap(&tables)?.gap)
            } else {
                None
            };
            Ok(Snapshot {
                advantages,
                potential: model.identical_interest().then(|| mean_returns[0]),
                mean_returns,
                nash_gap,
            })
        }
    }
}

fn check_options(model: &GameModel, opts: &TrainOptions) -> Result<()> {
    if !(opts.eta > 0.0 && opts.eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size {} must be positive", opts.eta)));
    }
    if !(opts.eta_decay > 0.0 && opts.eta_decay <= 1.0) {
        return Err(Error::InvalidArgument(format!("step-size decay {} not in (0, 1]", opts.eta_decay)));
    }
    if opts.iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    if opts.convergence_window == 0 {
        return Err(Error::InvalidArgument("convergence window must be positive".into()));
    }
    match opts.mode {
        AdvantageMode::Exact if !oracle_feasible(model, opts.oracle_cap) => Err(Error::OracleInfeasible {
            entries: crate::evaluation::oracle_entries(model),
            cap: opts.oracle_cap,
        }),
        AdvantageMode::MonteCarlo { episodes, horizon } if episodes == 0 || horizon == 0 => {
            Err(Error::InvalidArgument("episodes and horizon must be positive".into()))
        }
        _ => Ok(()),
    }
}

/// Trains all agents from uniform policies (θ = 0). Every iteration each
/// agent estimates its own advantages against a frozen snapshot of the joint
/// policy, then all tables are updated together.
pub fn train(model: &GameModel, opts: &TrainOptions) -> Result<(JointPolicy, LearningRecord)> {
    check_options(model, opts)?;
    let mut policy = if opts.full_information {
        JointPolicy::full_information(model)?
    } else {
        JointPolicy::uniform(model, opts.kappa)?
    };
    let gamma = model.gamma();
    let start = Instant::now();
    let mut rows = Vec::with_capacity(opts.iterations + 1);
    let mut streak = 0;
    let mut stop = StopReason::BudgetExhausted;
    let mut eta = opts.eta;
    let mut t = 0;
    while t < opts.iterations {
        let snap = assess(model, &policy, opts, t, true)?;
        let mut max_delta = 0.0f64;
        for (i, adv) in snap.advantages.iter().enumerate() {
            let table = policy.table_mut(i);
            max_delta = max_delta.max(apply_npg_step(table, adv, eta, gamma)?);
            let magnitude = table.max_abs_theta();
            if magnitude > DIVERGENCE_LIMIT || !magnitude.is_finite() {
                return Err(Error::Diverged {
                    iteration: t,
                    agent: i,
                    magnitude,
                });
            }
        }
        rows.push(IterationRecord {
            iteration: t,
            mean_returns: snap.mean_returns,
            potential: snap.potential,
            nash_gap: snap.nash_gap,
            max_theta_delta: Some(max_delta),
            eta: Some(eta),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        });
        t += 1;
        eta *= opts.eta_decay;
        streak = if max_delta < opts.convergence_tol { streak + 1 } else { 0 };
        if streak >= opts.convergence_window {
            stop = StopReason::Converged;
            break;
        }
    }
    let snap = assess(model, &policy, opts, t, false)?;
    rows.push(IterationRecord {
        iteration: t,
        mean_returns: snap.mean_returns,
        potential: snap.potential,
        nash_gap: snap.nash_gap,
        max_theta_delta: None,
        eta: None,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    });
    Ok((policy, LearningRecord { rows, stop }))
}
