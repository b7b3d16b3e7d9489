//! κ sweeps: terminal-return gap of each truncation radius against the
//! widest one, next to the theoretical ε(κ).

use std::fmt::Write as _;
use std::fs;

use crate::error::{Error, Result};
use crate::evaluation::{nash_gap, oracle_feasible, EpisodeBatch, JointOracle, OracleOptions};
use crate::exec::Parallelism;
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{build_model, train_options, write_convergence_csv, write_snapshot, RunArtifacts};
use crate::learning::{epsilon_for_kappa, train, JointPolicy, LearningRecord};
use crate::model::GameModel;
use crate::rollout::derive_seed;

pub const EPSILON_CSV: &str = "epsilon_vs_kappa.csv";
pub const REPLICATES_CSV: &str = "epsilon_vs_kappa_replicates.csv";

/// Tag separating evaluation streams from training streams.
const EVAL_TAG: u64 = 0xe7a1;

/// Mean over agents of the terminal discounted return: exact when the oracle
/// is feasible, otherwise a Monte-Carlo estimate on streams shared by all κ.
pub fn terminal_return(model: &GameModel, policy: &JointPolicy, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let n = model.num_agents() as f64;
    if oracle_feasible(model, cfg.oracle_cap()) {
        let oracle = JointOracle::new(
            model,
            policy,
            OracleOptions {
                cap: cfg.oracle_cap(),
                ..Default::default()
            },
        )?;
        let tables = oracle.evaluate()?;
        return Ok(oracle.initial_values(&tables).iter().sum::<f64>() / n);
    }
    let batch = EpisodeBatch::sample(
        model,
        policy,
        cfg.eval_episodes,
        1,
        derive_seed(seed, &[EVAL_TAG]),
        Parallelism::default(),
    )?;
    Ok(batch.mean_initial_returns(model.gamma(), model.num_agents()).iter().sum::<f64>() / n)
}

/// 100·|J − J_ref|/|J_ref|.
pub fn relative_error_pct(j: f64, j_ref: f64) -> f64 {
    if j == j_ref {
        0.0
    } else {
        100.0 * (j - j_ref).abs() / j_ref.abs()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One sweep row.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub kappa: usize,
    pub relative_error_pct: f64,
    pub theoretical_bound: f64,
    /// Per-replicate relative errors, in replicate order.
    pub replicate_errors: Vec<f64>,
}

struct SweepRun {
    seed: u64,
    kappa: usize,
    record: LearningRecord,
    terminal_return: f64,
    policy: JointPolicy,
}

pub fn sweep_kappa(cfg: &ExperimentConfig) -> Result<(RunArtifacts, Vec<SweepRow>)> {
    let mut kappas = cfg.kappa.values();
    kappas.sort_unstable();
    kappas.dedup();
    if kappas.len() < 2 {
        return Err(Error::Config("a sweep needs at least two distinct kappa values".into()));
    }
    let dir = cfg.output_dir.clone();
    let config_snapshot = write_snapshot(cfg, &dir)?;
    let built = build_model(&cfg.environment)?;
    let model = &built.model;
    let jobs: Vec<(u64, usize)> = (0..cfg.replicates as u64)
        .flat_map(|r| kappas.iter().map(move |&k| (cfg.seed.wrapping_add(r), k)))
        .collect();
    let runs = Parallelism::default()
        .map(jobs.len(), |j| {
            let (seed, kappa) = jobs[j];
            let (policy, record) = train(model, &train_options(cfg, model, kappa, seed))?;
            let terminal_return = terminal_return(model, &policy, cfg, seed)?;
            Ok(SweepRun {
                seed,
                kappa,
                record,
                terminal_return,
                policy,
            })
        })
        .into_iter()
        .collect::<Result<Vec<SweepRun>>>();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => {
            fs::write(dir.join("failure.txt"), format!("{e}\n"))?;
            return Err(e);
        }
    };

    let mut extra_csvs = Vec::new();
    for run in &runs {
        let path = dir.join(format!("convergence_kappa{}_seed{}.csv", run.kappa, run.seed));
        write_convergence_csv(&path, &run.record)?;
        extra_csvs.push(path);
    }

    let per_rep = kappas.len();
    let mut rep_rows = Vec::new();
    let mut errors = vec![Vec::new(); per_rep];
    for chunk in runs.chunks(per_rep) {
        let j_ref = chunk[per_rep - 1].terminal_return;
        for (k, run) in chunk.iter().enumerate() {
            let e = relative_error_pct(run.terminal_return, j_ref);
            errors[k].push(e);
            rep_rows.push((run.seed, run.kappa, run.terminal_return, e));
        }
    }
    let rows: Vec<SweepRow> = kappas
        .iter()
        .zip(errors)
        .map(|(&kappa, errs)| {
            Ok(SweepRow {
                kappa,
                relative_error_pct: median(&errs),
                theoretical_bound: epsilon_for_kappa(model.r_max(), model.gamma(), kappa)?,
                replicate_errors: errs,
            })
        })
        .collect::<Result<_>>()?;

    let epsilon_csv = dir.join(EPSILON_CSV);
    let mut w = csv::Writer::from_path(&epsilon_csv)?;
    w.write_record(["kappa", "relative_error_pct", "theoretical_bound"])?;
    for r in &rows {
        w.write_record([r.kappa.to_string(), r.relative_error_pct.to_string(), r.theoretical_bound.to_string()])?;
    }
    w.flush()?;

    let reps = dir.join(REPLICATES_CSV);
    let mut w = csv::Writer::from_path(&reps)?;
    w.write_record(["seed", "kappa", "terminal_return", "relative_error_pct"])?;
    for (seed, kappa, j, e) in &rep_rows {
        w.write_record([seed.to_string(), kappa.to_string(), j.to_string(), e.to_string()])?;
    }
    w.flush()?;
    extra_csvs.push(reps);

    let mut s = String::new();
    let _ = writeln!(s, "agents={}", model.num_agents());
    let _ = writeln!(s, "kappas={kappas:?}");
    let _ = writeln!(s, "replicates={}", cfg.replicates);
    let _ = writeln!(s, "reference_kappa={}", kappas[per_rep - 1]);
    let exact = oracle_feasible(model, cfg.oracle_cap());
    let _ = writeln!(s, "terminal_return={}", if exact { "exact" } else { "monte_carlo" });
    if exact {
        // certify the reference runs with the best-response oracle
        for run in runs.chunks(per_rep).map(|c| &c[per_rep - 1]) {
            let _ = writeln!(s, "reference_nash_gap_seed{}={}", run.seed, nash_gap(model, &run.policy)?);
        }
    }
    if let Some(d) = &built.job_dynamics {
        let _ = writeln!(s, "clamp_events={}", d.clamp_events());
    }
    fs::write(dir.join("sweep_summary.txt"), s)?;

    Ok((
        RunArtifacts {
            dir,
            epsilon_csv: Some(epsilon_csv),
            config_snapshot,
            extra_csvs,
            ..Default::default()
        },
        rows,
    ))
}
