//! Single training runs and their CSV artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::environments::{
    job_balancing_parts, random_networked_mpg, sensor_coverage_model, JobBalancing, JobBalancingSpec,
    SensorCoverageSpec,
};
use crate::error::{Error, Result};
use crate::evaluation::oracle_feasible;
use crate::harness::config::{EnvironmentConfig, ExperimentConfig};
use crate::learning::{train, AdvantageMode, JointPolicy, LearningRecord, TrainOptions};
use crate::model::GameModel;

pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const SNAPSHOT: &str = "config.toml";
pub const SUMMARY: &str = "summary.txt";

/// Paths written by a harness command. Absent entries were not produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub convergence_csv: Option<PathBuf>,
    pub epsilon_csv: Option<PathBuf>,
    pub certification: Option<PathBuf>,
    pub config_snapshot: PathBuf,
    /// Every additional CSV (per-κ and per-seed runs).
    pub extra_csvs: Vec<PathBuf>,
}

/// A constructed environment, plus the job-balancing dynamics when present.
pub struct BuiltModel {
    pub model: GameModel,
    pub job_dynamics: Option<Arc<JobBalancing>>,
}

pub fn build_model(env: &EnvironmentConfig) -> Result<BuiltModel> {
    match env {
        EnvironmentConfig::JobBalancing(c) => {
            let graph = c.graph.build()?;
            let mut spec = JobBalancingSpec::new(graph, c.total_jobs);
            spec.max_delegation = c.max_delegation;
            spec.gamma = c.gamma;
            if let Some(cap) = c.max_jobs_per_node {
                spec.max_jobs_per_node = cap;
            }
            let (model, dynamics) = job_balancing_parts(&spec)?;
            Ok(BuiltModel {
                model,
                job_dynamics: Some(dynamics),
            })
        }
        EnvironmentConfig::SensorCoverage(c) => {
            let graph = c.graph.build()?;
            let spec = SensorCoverageSpec {
                detect_prob: vec![c.detect_prob; graph.num_agents()],
                graph,
                grid_side: c.grid_side,
                gamma: c.gamma,
            };
            Ok(BuiltModel {
                model: sensor_coverage_model(&spec)?,
                job_dynamics: None,
            })
        }
        EnvironmentConfig::RandomMpg(c) => {
            let graph = c.graph.build()?;
            let n = graph.num_agents();
            let model = random_networked_mpg(
                &graph,
                &vec![c.state_size; n],
                &vec![c.action_size; n],
                c.gamma,
                c.model_seed,
                c.identical_interest,
            )?;
            Ok(BuiltModel {
                model,
                job_dynamics: None,
            })
        }
    }
}

/// Training options for one radius of `cfg`.
pub fn train_options(cfg: &ExperimentConfig, model: &GameModel, kappa: usize, seed: u64) -> TrainOptions {
    let mode = if cfg.exact_advantages {
        AdvantageMode::Exact
    } else {
        AdvantageMode::MonteCarlo {
            episodes: cfg.episodes,
            horizon: cfg.horizon,
        }
    };
    TrainOptions {
        kappa,
        eta: cfg.eta,
        eta_decay: cfg.eta_decay,
        iterations: cfg.iterations,
        mode,
        seed,
        oracle_cap: cfg.oracle_cap(),
        track_nash_gap: oracle_feasible(model, cfg.oracle_cap()),
        ..Default::default()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the convergence table: one row per iterate, empty cells where a
/// metric is unavailable.
pub fn write_convergence_csv(path: &Path, record: &LearningRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "mean_return_per_agent", "max_theta_delta", "nash_gap", "potential_estimate"])?;
    for row in &record.rows {
        w.write_record([
            row.iteration.to_string(),
            row.mean_return().to_string(),
            fmt_opt(row.max_theta_delta),
            fmt_opt(row.nash_gap),
            fmt_opt(row.potential),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_snapshot(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(SNAPSHOT);
    fs::write(&path, cfg.to_toml()?)?;
    Ok(path)
}

fn single_kappa(cfg: &ExperimentConfig) -> Result<usize> {
    match cfg.kappa.values().as_slice() {
        [k] => Ok(*k),
        _ => Err(Error::Config("run takes a single kappa; use sweep for a list".into())),
    }
}

/// Trains once and writes convergence.csv, a summary and the config snapshot.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let kappa = single_kappa(cfg)?;
    let dir = cfg.output_dir.clone();
    let config_snapshot = write_snapshot(cfg, &dir)?;
    let built = build_model(&cfg.environment)?;
    let model = &built.model;
    let opts = train_options(cfg, model, kappa, cfg.seed);
    let (policy, record) = match train(model, &opts) {
        Ok(out) => out,
        Err(e) => {
            fs::write(dir.join("failure.txt"), format!("{e}\n"))?;
            return Err(e);
        }
    };
    let convergence = dir.join(CONVERGENCE_CSV);
    write_convergence_csv(&convergence, &record)?;
    fs::write(dir.join(SUMMARY), summary(cfg, &built, &policy, &record))?;
    Ok(RunArtifacts {
        dir,
        convergence_csv: Some(convergence),
        config_snapshot,
        ..Default::default()
    })
}

fn summary(cfg: &ExperimentConfig, built: &BuiltModel, policy: &JointPolicy, record: &LearningRecord) -> String {
    let model = &built.model;
    let terminal = record.terminal();
    let mut s = String::new();
    let _ = writeln!(s, "agents={}", model.num_agents());
    let _ = writeln!(s, "kappa={}", policy.kappa());
    let _ = writeln!(s, "seed={}", cfg.seed);
    let _ = writeln!(s, "exact_advantages={}", cfg.exact_advantages);
    let _ = writeln!(s, "r_max={}", model.r_max());
    let _ = writeln!(s, "stop={:?}", record.stop);
    let _ = writeln!(s, "iterations_run={}", record.updates().len());
    let _ = writeln!(s, "terminal_mean_return={}", terminal.mean_return());
    let _ = writeln!(s, "terminal_nash_gap={}", fmt_opt(terminal.nash_gap));
    if let Some(d) = &built.job_dynamics {
        let _ = writeln!(s, "clamp_events={}", d.clamp_events());
    }
    s
}
