//! Exact oracles: joint-MDP evaluation, truncated Q-functions, decay-bound
//! certificates, Nash gaps and Monte-Carlo local Q estimates.

mod certify;
mod montecarlo;
mod oracle;
mod truncation;

pub use certify::{
    certify_decay, certify_decay_tables, certify_gradient_step, certify_truncated_q, decay_bound, decay_gap,
    visitation_weights, Certificate, CERTIFICATE_TOL,
};
pub use montecarlo::{mc_local_q, EpisodeBatch, McLocalQ, VisitStats};
pub use oracle::{
    exact_evaluate, nash_gap, next_state_distribution, oracle_entries, oracle_feasible, EvalMethod, ExactTables,
    JointOracle, JointSpace, NashGap, OracleOptions, DEFAULT_ORACLE_CAP, DIRECT_SOLVE_LIMIT, VALUE_TOL,
};
pub use truncation::{truncated_q, truncated_v, LocalQTable, LocalSplit, LocalVTable, TruncationWeights};

use crate::error::{Error, Result};

/// Total-variation distance between two distributions on a finite space,
/// computed as half the L1 distance.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!(
            "length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    crate::model::check_probability_vector(p, 1e-9)?;
    crate::model::check_probability_vector(q, 1e-9)?;
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}
