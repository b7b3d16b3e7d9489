//! Soft-max tabular policies over κ-hop observations, the independent NPG
//! update and the training loop.

mod npg;
mod policy;
mod train;

pub use npg::{
    advantages_from_batch, apply_npg_step, epsilon_for_kappa, estimate_advantages, exact_local_advantages, npg_update,
    AdvantageSource, AdvantageTable,
};
pub use policy::{softmax, JointPolicy, PolicyTable};
pub use train::{train, AdvantageMode, IterationRecord, LearningRecord, StopReason, TrainOptions, DIVERGENCE_LIMIT};
