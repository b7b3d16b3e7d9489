//! Exhaustive checks of the locality bounds on oracle-scale instances.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluation::oracle::{ExactTables, JointOracle, OracleOptions};
use crate::evaluation::truncation::{truncated_q, truncated_v, LocalSplit, TruncationWeights};
use crate::learning::JointPolicy;
use crate::model::GameModel;
use crate::network::AgentId;

/// Slack allowed on every bound comparison.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// (r_max/(1−γ))·γ^(κ+1).
pub fn decay_bound(r_max: f64, gamma: f64, kappa: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("discount {gamma} not in (0, 1)")));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("reward ceiling {r_max} must be positive")));
    }
    let exponent = i32::try_from(kappa + 1).unwrap_or(i32::MAX);
    Ok(r_max / (1.0 - gamma) * gamma.powi(exponent))
}

/// One measured-versus-bound comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub name: String,
    pub agent: Option<AgentId>,
    pub kappa: Option<usize>,
    pub max_gap: f64,
    pub bound: f64,
    pub pass: bool,
    pub details: Vec<(String, String)>,
}

impl Certificate {
    pub fn new(name: &str, agent: Option<AgentId>, kappa: Option<usize>, max_gap: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            agent,
            kappa,
            max_gap,
            bound,
            pass: max_gap <= bound + CERTIFICATE_TOL,
            details: Vec::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl ToString) -> Self {
        self.details.push((key.to_string(), value.to_string()));
        self
    }

    /// Margin left under the bound (negative on failure).
    pub fn margin(&self) -> f64 {
        self.bound - self.max_gap
    }

    /// key=value lines, one record.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "certificate={}", self.name);
        if let Some(a) = self.agent {
            let _ = writeln!(out, "agent={a}");
        }
        if let Some(k) = self.kappa {
            let _ = writeln!(out, "kappa={k}");
        }
        let _ = writeln!(out, "max_gap={}", self.max_gap);
        let _ = writeln!(out, "bound={}", self.bound);
        let _ = writeln!(out, "margin={}", self.margin());
        for (k, v) in &self.details {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "pass={}", self.pass);
        out
    }
}

/// Max |Q_i(s,a) − Q_i(s',a')| over pairs that agree on N_i^κ.
pub fn decay_gap(tables: &ExactTables, split: &LocalSplit) -> f64 {
    let mut lo = vec![f64::INFINITY; split.local_pairs()];
    let mut hi = vec![f64::NEG_INFINITY; split.local_pairs()];
    for s in 0..tables.num_states {
        for a in 0..tables.num_actions {
            let l = split.local_pair(s, a);
            let q = tables.q(split.agent, s, a);
            lo[l] = lo[l].min(q);
            hi[l] = hi[l].max(q);
        }
    }
    lo.iter()
        .zip(&hi)
        .filter(|(l, _)| l.is_finite())
        .fold(0.0, |m, (l, h)| m.max(h - l))
}

pub fn certify_decay_tables(model: &GameModel, tables: &ExactTables, split: &LocalSplit) -> Result<Certificate> {
    let bound = decay_bound(model.r_max(), model.gamma(), split.kappa)?;
    Ok(Certificate::new("lemma1_q_decay", Some(split.agent), Some(split.kappa), decay_gap(tables, split), bound))
}

/// Lemma-1 style certificate: exterior changes move Q_i by at most the decay bound.
pub fn certify_decay(model: &GameModel, policy: &JointPolicy, i: AgentId, kappa: usize) -> Result<Certificate> {
    let oracle = JointOracle::new(model, policy, OracleOptions::default())?;
    let tables = oracle.evaluate()?;
    let nb = model.graph().kappa_neighborhood(i, kappa)?;
    let split = LocalSplit::new(oracle.space(), &nb);
    certify_decay_tables(model, &tables, &split)
}

/// Max |Q̂_i(local(s,a)) − Q_i(s,a)| against the decay bound.
pub fn certify_truncated_q(model: &GameModel, tables: &ExactTables, weights: &TruncationWeights, label: &str) -> Result<Certificate> {
    let split = &weights.split;
    let q_hat = truncated_q(tables, weights)?;
    let mut gap = 0.0f64;
    for s in 0..tables.num_states {
        for a in 0..tables.num_actions {
            gap = gap.max((q_hat.values[split.local_pair(s, a)] - tables.q(split.agent, s, a)).abs());
        }
    }
    let bound = decay_bound(model.r_max(), model.gamma(), split.kappa)?;
    Ok(Certificate::new("lemma2_truncated_q", Some(split.agent), Some(split.kappa), gap, bound)
        .with_detail("weights", label)
        .with_detail("max_row_error", weights.max_row_error()))
}

/// Gap between the truncated and true advantage steps, (1/(1−γ))·|Â_i − A_i|,
/// against 2·k·γ^(κ+1)/(1−γ); the looser 2·r_max/(1−γ)² is checked too.
pub fn certify_gradient_step(model: &GameModel, tables: &ExactTables, weights: &TruncationWeights, label: &str) -> Result<Certificate> {
    let split = &weights.split;
    let gamma = model.gamma();
    let q_hat = truncated_q(tables, weights)?;
    let v_hat = truncated_v(tables, weights)?;
    let mut adv_gap = 0.0f64;
    for s in 0..tables.num_states {
        for a in 0..tables.num_actions {
            let l = split.local_pair(s, a);
            let a_hat = q_hat.values[l] - v_hat.values[split.state_of_pair(l)];
            adv_gap = adv_gap.max((a_hat - tables.advantage(split.agent, s, a)).abs());
        }
    }
    let step_gap = adv_gap / (1.0 - gamma);
    let decay = decay_bound(model.r_max(), gamma, split.kappa)?;
    let proof_bound = 2.0 * decay / (1.0 - gamma);
    let statement_bound = 2.0 * model.r_max() / ((1.0 - gamma) * (1.0 - gamma));
    let mut cert = Certificate::new("lemma3_gradient_step", Some(split.agent), Some(split.kappa), step_gap, proof_bound)
        .with_detail("weights", label)
        .with_detail("max_advantage_gap", adv_gap)
        .with_detail("advantage_bound", 2.0 * decay)
        .with_detail("statement_bound", statement_bound);
    cert.pass = cert.pass && step_gap <= statement_bound + CERTIFICATE_TOL;
    Ok(cert)
}

/// Discounted-visitation truncation weights for agent `i` at radius κ.
pub fn visitation_weights(model: &GameModel, policy: &JointPolicy, i: AgentId, kappa: usize) -> Result<TruncationWeights> {
    let oracle = JointOracle::new(model, policy, OracleOptions::default())?;
    let occupancy = oracle.occupancy();
    let nb = model.graph().kappa_neighborhood(i, kappa)?;
    let split = LocalSplit::new(oracle.space(), &nb);
    Ok(TruncationWeights::visitation(&oracle, &occupancy, split))
}
