//! On-policy actor-critic training: rollouts, advantage estimation, the clipped
//! surrogate update, and deterministic evaluation.
//!
//! A2C is not a separate algorithm here. It is [`TrainConfig::a2c`]: one epoch over the
//! full rollout with clipping disabled, run through the same update code as PPO.

mod gae;
mod loss;
mod rollout;
mod train;

pub use gae::{compute_gae, normalize};
pub use loss::{clipped_surrogate, ppo_loss, ppo_loss_and_grad, LossConfig, LossStats, Minibatch};
pub use rollout::{evaluate_policy, EpisodeStats, EvalMetrics, Policy, RolloutBuffer, RolloutCollector, ScriptedPolicy};
pub use train::{
    advantages_and_returns, clip_grad_norm, init_params, linear_lr, minibatch, train, train_with, update_policy, Agent, LogRecord,
    TrainConfig, TrainOutcome,
};
