//! Certification driver: every locality bound and the learning guarantees,
//! checked exhaustively on an oracle-scale instance.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use crate::environments::team_reward_model;
use crate::error::{Error, Result};
use crate::evaluation::{
    certify_decay_tables, certify_gradient_step, certify_truncated_q, decay_bound, nash_gap, oracle_entries,
    oracle_feasible, Certificate, JointOracle, LocalSplit, OracleOptions, TruncationWeights,
};
use crate::exec::Parallelism;
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{build_model, write_snapshot, RunArtifacts};
use crate::learning::{train, AdvantageMode, JointPolicy, TrainOptions};
use crate::model::GameModel;
use crate::rollout::derive_seed;

pub const CERTIFICATION: &str = "certification.txt";

/// Largest allowed per-iteration drop of the potential.
pub const MONOTONICITY_TOL: f64 = 1e-10;
/// Slack on Nash-gap certificates.
pub const NASH_SLACK: f64 = 1e-3;

pub const DECAY: &str = "lemma1_q_decay";
pub const TRUNCATED_Q: &str = "lemma2_truncated_q";
pub const GRADIENT_STEP: &str = "lemma3_gradient_step";
pub const MONOTONE: &str = "lemma4_potential_monotone";
pub const FULL_INFORMATION: &str = "lemma5_full_information_nash";
pub const EPSILON_NASH: &str = "theorem2_epsilon_nash";

/// Every certificate family a report must contain.
pub const REQUIRED: [&str; 6] = [DECAY, TRUNCATED_Q, GRADIENT_STEP, MONOTONE, FULL_INFORMATION, EPSILON_NASH];

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub random_policies: usize,
    pub policy_scale: f64,
    pub seed: u64,
    pub eta: f64,
    pub iterations: usize,
    pub oracle_cap: u128,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            random_policies: 5,
            policy_scale: 2.0,
            seed: 0,
            eta: 0.1,
            iterations: 200,
            oracle_cap: crate::evaluation::DEFAULT_ORACLE_CAP,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CertificationReport {
    pub certificates: Vec<Certificate>,
    /// Set when the learning certificates ran on the team-reward counterpart.
    pub team_counterpart: bool,
}

impl CertificationReport {
    pub fn all_pass(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Certificate> {
        self.certificates.iter().filter(|c| !c.pass).collect()
    }

    /// Certificate families that did not run.
    pub fn missing(&self) -> Vec<&'static str> {
        REQUIRED
            .iter()
            .copied()
            .filter(|name| !self.certificates.iter().any(|c| c.name == *name))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.certificates {
            s.push_str(&c.to_record());
            s.push('\n');
        }
        let _ = writeln!(s, "team_counterpart={}", self.team_counterpart);
        let _ = writeln!(s, "certificates={}", self.certificates.len());
        let _ = writeln!(s, "failures={}", self.failures().len());
        let _ = writeln!(s, "coverage={}", if self.missing().is_empty() { "complete" } else { "incomplete" });
        let _ = writeln!(s, "all_pass={}", self.all_pass());
        s
    }
}

fn radii(model: &GameModel) -> Vec<usize> {
    let top = model.graph().diameter().unwrap_or(model.num_agents() - 1);
    (0..=top).collect()
}

/// Worst case of a family over the tested policies, keyed by (agent, κ, weights).
fn keep_worst(slot: &mut Option<Certificate>, c: Certificate) {
    match slot {
        Some(old) if old.margin() <= c.margin() => {
            if !c.pass {
                old.pass = false;
            }
        }
        _ => {
            let pass = c.pass && slot.as_ref().is_none_or(|o| o.pass);
            *slot = Some(Certificate { pass, ..c });
        }
    }
}

/// Locality certificates over every agent, κ and tested policy.
fn locality_certificates(model: &GameModel, opts: &VerifyOptions) -> Result<Vec<Certificate>> {
    let n = model.num_agents();
    let kappas = radii(model);
    let top = *kappas.last().expect("at least one radius");
    let mut policies = vec![JointPolicy::uniform(model, top)?];
    for p in 0..opts.random_policies {
        policies.push(JointPolicy::random(model, top, opts.policy_scale, derive_seed(opts.seed, &[p as u64]))?);
    }
    // slots: agent × κ × {decay, q-visit, q-uniform, step-visit, step-uniform}
    let families = 5;
    let mut worst: Vec<Option<Certificate>> = vec![None; n * kappas.len() * families];
    let oracle_opts = OracleOptions {
        cap: opts.oracle_cap,
        parallelism: Parallelism::default(),
    };
    for policy in &policies {
        let oracle = JointOracle::new(model, policy, oracle_opts)?;
        let tables = oracle.evaluate()?;
        let occupancy = oracle.occupancy();
        let jobs: Vec<(usize, usize)> = (0..n).flat_map(|i| kappas.iter().map(move |&k| (i, k))).collect();
        let results = Parallelism::default()
            .map(jobs.len(), |j| -> Result<Vec<Certificate>> {
                let (i, kappa) = jobs[j];
                let split = LocalSplit::new(oracle.space(), &model.graph().kappa_neighborhood(i, kappa)?);
                let visit = TruncationWeights::visitation(&oracle, &occupancy, split.clone());
                let uniform = TruncationWeights::uniform(split.clone());
                Ok(vec![
                    certify_decay_tables(model, &tables, &split)?,
                    certify_truncated_q(model, &tables, &visit, "visitation")?,
                    certify_truncated_q(model, &tables, &uniform, "uniform")?,
                    certify_gradient_step(model, &tables, &visit, "visitation")?,
                    certify_gradient_step(model, &tables, &uniform, "uniform")?,
                ])
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        for (j, certs) in results.into_iter().enumerate() {
            for (f, c) in certs.into_iter().enumerate() {
                keep_worst(&mut worst[j * families + f], c);
            }
        }
    }
    Ok(worst
        .into_iter()
        .flatten()
        .map(|c| c.with_detail("policies", policies.len()))
        .collect())
}

fn learning_certificates(game: &GameModel, opts: &VerifyOptions) -> Result<Vec<Certificate>> {
    let kappas = radii(game);
    let top = *kappas.last().expect("at least one radius");
    let mut out = Vec::new();
    for &kappa in &kappas {
        let train_opts = TrainOptions {
            kappa,
            eta: opts.eta,
            iterations: opts.iterations,
            mode: AdvantageMode::Exact,
            seed: opts.seed,
            oracle_cap: opts.oracle_cap,
            track_nash_gap: false,
            ..Default::default()
        };
        let (policy, record) = train(game, &train_opts)?;
        let phi: Vec<f64> = record
            .rows
            .iter()
            .map(|r| r.potential.ok_or_else(|| Error::InvalidModel("potential unavailable".into())))
            .collect::<Result<_>>()?;
        let max_drop = phi.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
        let mut mono = Certificate::new(MONOTONE, None, Some(kappa), max_drop, MONOTONICITY_TOL)
            .with_detail("iterations", record.updates().len())
            .with_detail("initial_potential", phi[0])
            .with_detail("final_potential", phi[phi.len() - 1]);
        mono.pass = max_drop <= MONOTONICITY_TOL;
        out.push(mono);

        let gap = nash_gap(game, &policy)?;
        let epsilon = decay_bound(game.r_max(), game.gamma(), kappa)?;
        let mut eps_cert = Certificate::new(EPSILON_NASH, None, Some(kappa), gap, epsilon + NASH_SLACK)
            .with_detail("epsilon", epsilon)
            .with_detail("stop", format!("{:?}", record.stop));
        eps_cert.pass = gap <= epsilon + NASH_SLACK;
        out.push(eps_cert);
        if kappa == top {
            let mut full = Certificate::new(FULL_INFORMATION, None, Some(kappa), gap, NASH_SLACK)
                .with_detail("stop", format!("{:?}", record.stop));
            full.pass = gap <= NASH_SLACK;
            out.push(full);
        }
    }
    Ok(out)
}

/// Runs every certificate family on `model`. The learning certificates need
/// a potential; when `model` is not identical-interest they run on its
/// team-reward counterpart.
pub fn verify_model(model: &GameModel, opts: &VerifyOptions) -> Result<CertificationReport> {
    if !oracle_feasible(model, opts.oracle_cap) {
        return Err(Error::OracleInfeasible {
            entries: oracle_entries(model),
            cap: opts.oracle_cap,
        });
    }
    let mut certificates = locality_certificates(model, opts)?;
    let team_counterpart = !model.identical_interest();
    let game = if team_counterpart {
        team_reward_model(model)?
    } else {
        model.clone()
    };
    certificates.extend(learning_certificates(&game, opts)?);
    let report = CertificationReport {
        certificates,
        team_counterpart,
    };
    let missing = report.missing();
    if !missing.is_empty() {
        return Err(Error::InvalidArgument(format!("certificate coverage incomplete: {missing:?}")));
    }
    Ok(report)
}

/// `verify` for a config; writes certification.txt and the config snapshot.
pub fn verify(cfg: &ExperimentConfig) -> Result<(RunArtifacts, CertificationReport)> {
    let dir = cfg.output_dir.clone();
    let config_snapshot = write_snapshot(cfg, &dir)?;
    let built = build_model(&cfg.environment)?;
    let opts = VerifyOptions {
        random_policies: cfg.verify_policies,
        seed: cfg.seed,
        eta: cfg.eta,
        iterations: cfg.iterations,
        oracle_cap: cfg.oracle_cap(),
        ..Default::default()
    };
    let report = verify_model(&built.model, &opts)?;
    let path: PathBuf = dir.join(CERTIFICATION);
    fs::write(&path, report.render())?;
    Ok((
        RunArtifacts {
            dir,
            certification: Some(path),
            config_snapshot,
            ..Default::default()
        },
        report,
    ))
}
