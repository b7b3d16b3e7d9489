//! Concrete games: job balancing, sensor coverage, random tabular games and
//! team-reward counterparts.

mod job_balancing;
mod random;
mod sensor_coverage;
mod team;

pub use job_balancing::{
    deviation_reward, job_balancing_model, job_balancing_parts, JobBalancing, JobBalancingSpec,
};
pub use random::{random_networked_mpg, RandomDynamics};
pub use sensor_coverage::{
    cell_transition, move_target, sensor_coverage_model, Move, SensorCoverage, SensorCoverageSpec, INTENDED_MOVE,
    LATERAL_MOVE,
};
pub use team::{team_reward_model, TeamReward};
