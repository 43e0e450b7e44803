use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gae::{compute_gae, normalize};
use super::loss::{ppo_loss_and_grad, LossConfig, LossStats, Minibatch};
use super::rollout::{evaluate_policy, EpisodeStats, EvalMetrics, RolloutBuffer, RolloutCollector};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::neural::{Adam, CriticTrunk, PolicyNet, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Ppo,
    A2c,
}

impl Agent {
    pub fn name(self) -> &'static str {
        match self {
            Agent::Ppo => "ppo",
            Agent::A2c => "a2c",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Agent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Agent::Ppo),
            "a2c" => Ok(Agent::A2c),
            other => Err(Error::Usage(format!("unknown agent '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment step budget.
    pub total_steps: usize,
    pub rollout_length: usize,
    pub epochs: usize,
    /// `None` uses the whole rollout as one batch.
    #[serde(with = "none_keyword")]
    pub minibatch_size: Option<usize>,
    /// `None` disables ratio clipping.
    #[serde(with = "none_keyword")]
    pub clip_epsilon: Option<f64>,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Initial learning rate; decays linearly to 0 over `total_steps`.
    pub lr0: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub normalize_advantages: bool,
    /// Rescale each minibatch gradient to at most this global L2 norm.
    #[serde(with = "none_keyword")]
    pub max_grad_norm: Option<f64>,
    /// Evaluate after this many completed training episodes; 0 disables periodic evaluation.
    pub eval_every_episodes: usize,
    pub eval_episodes: usize,
    pub hidden: usize,
    pub critic: CriticTrunk,
    pub seed: u64,
    /// Stop as soon as a deterministic evaluation reaches this placement rate.
    #[serde(with = "none_keyword")]
    pub target_placement_rate: Option<f64>,
}

/// Optional values written as the string `"none"` when absent, so that an override file can
/// switch off a setting whose default is present.
mod none_keyword {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr<T> {
        Value(T),
        Keyword(String),
    }

    pub fn serialize<T: Serialize, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => v.serialize(s),
            None => s.serialize_str("none"),
        }
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        match Repr::<T>::deserialize(d)? {
            Repr::Value(v) => Ok(Some(v)),
            Repr::Keyword(k) if k == "none" => Ok(None),
            Repr::Keyword(k) => Err(serde::de::Error::custom(format!("expected a value or \"none\", got \"{k}\""))),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::ppo()
    }
}

impl TrainConfig {
    pub fn ppo() -> Self {
        Self {
            total_steps: 500_000,
            rollout_length: 2048,
            epochs: 10,
            minibatch_size: Some(256),
            clip_epsilon: Some(0.2),
            gamma: 0.95,
            gae_lambda: 0.95,
            lr0: 5e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            normalize_advantages: true,
            max_grad_norm: None,
            eval_every_episodes: 50,
            eval_episodes: 1,
            hidden: crate::neural::DEFAULT_HIDDEN,
            critic: CriticTrunk::Separate,
            seed: 0,
            target_placement_rate: None,
        }
    }

    /// One epoch over the full rollout without clipping.
    pub fn a2c() -> Self {
        Self {
            rollout_length: 16,
            epochs: 1,
            minibatch_size: None,
            clip_epsilon: None,
            normalize_advantages: false,
            ..Self::ppo()
        }
    }

    pub fn for_agent(agent: Agent) -> Self {
        match agent {
            Agent::Ppo => Self::ppo(),
            Agent::A2c => Self::a2c(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.clip_epsilon.is_some_and(|e| !(e >= 0.0)) {
            return bad("clip_epsilon must be nonnegative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.rollout_length == 0 || self.minibatch_size == Some(0) {
            return bad("rollout_length and minibatch_size must be positive");
        }
        if self.max_grad_norm.is_some_and(|m| !(m > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        if !(self.lr0 >= 0.0) {
            return bad("lr0 must be nonnegative");
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig { clip_epsilon: self.clip_epsilon, entropy_coef: self.entropy_coef, value_coef: self.value_coef }
    }
}

/// `lr0 * (1 - steps_done / total_steps)`.
pub fn linear_lr(lr0: f64, steps_done: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        return lr0;
    }
    lr0 * (1.0 - steps_done as f64 / total_steps as f64)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Update {
        update: usize,
        steps: usize,
        episodes: usize,
        lr: f64,
        loss: f64,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
        approx_kl: f64,
        clip_fraction: f64,
        /// Mean return of training episodes finished during this rollout.
        mean_episode_return: Option<f64>,
        mean_episode_length: Option<f64>,
    },
    Eval {
        update: usize,
        steps: usize,
        episodes: usize,
        metrics: EvalMetrics,
    },
}

impl LogRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: PolicyNet<T>,
    pub log: Vec<LogRecord>,
    pub steps: usize,
    pub episodes: usize,
    pub final_eval: Option<EvalMetrics>,
    /// Best deterministic placement rate seen in any evaluation.
    pub best_placement_rate: Option<f64>,
}

impl<T> TrainOutcome<T> {
    pub fn evals(&self) -> impl Iterator<Item = (usize, &EvalMetrics)> {
        self.log.iter().filter_map(|r| match r {
            LogRecord::Eval { steps, metrics, .. } => Some((*steps, metrics)),
            _ => None,
        })
    }
}

/// Independent random streams derived from one seed.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn init_params<T: Real>(env: &EnvConfig, cfg: &TrainConfig) -> PolicyNet<T> {
    PolicyNet::init_with(env.observation_len(), cfg.hidden, &env.action_dims(), cfg.critic, &mut stream(cfg.seed, 0))
}

/// Advantages (normalized if configured) and returns of a rollout.
pub fn advantages_and_returns(buf: &RolloutBuffer, cfg: &TrainConfig) -> (Vec<f64>, Vec<f64>) {
    let (mut adv, ret) = compute_gae(&buf.rewards, &buf.values, &buf.dones, buf.bootstrap_value, cfg.gamma, cfg.gae_lambda);
    if cfg.normalize_advantages {
        normalize(&mut adv);
    }
    (adv, ret)
}

pub fn minibatch<T: Real>(buf: &RolloutBuffer, idx: &[usize], advantages: &[f64], returns: &[f64]) -> Minibatch<T> {
    let obs = Array2::from_shape_fn((idx.len(), buf.obs_dim), |(r, c)| T::of(buf.observation(idx[r])[c]));
    Minibatch {
        obs,
        actions: idx.iter().map(|&i| buf.actions[i]).collect(),
        old_log_probs: idx.iter().map(|&i| buf.log_probs[i]).collect(),
        advantages: idx.iter().map(|&i| advantages[i]).collect(),
        returns: idx.iter().map(|&i| returns[i]).collect(),
    }
}

/// `epochs` passes over the rollout in (shuffled) minibatches, one Adam step per minibatch.
/// Returns the mean loss statistics.
pub fn update_policy<T: Real>(
    params: &mut PolicyNet<T>,
    adam: &mut Adam<T>,
    buf: &RolloutBuffer,
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> LossStats {
    let (advantages, returns) = advantages_and_returns(buf, cfg);
    let n = buf.len();
    let batch = cfg.minibatch_size.unwrap_or(n).min(n);
    let loss_cfg = cfg.loss_config();
    let mut order: Vec<usize> = (0..n).collect();
    let mut total = LossStats::default();
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        if batch < n {
            order.shuffle(rng);
        }
        for chunk in order.chunks(batch) {
            let mb = minibatch::<T>(buf, chunk, &advantages, &returns);
            let (stats, mut grads) = ppo_loss_and_grad(params, &mb, &loss_cfg);
            if let Some(max_norm) = cfg.max_grad_norm {
                clip_grad_norm(&mut grads, max_norm);
            }
            adam.step(params, &grads, lr);
            total.loss += stats.loss;
            total.policy_loss += stats.policy_loss;
            total.value_loss += stats.value_loss;
            total.entropy += stats.entropy;
            total.approx_kl += stats.approx_kl;
            total.clip_fraction += stats.clip_fraction;
            count += 1.0;
        }
    }
    LossStats {
        loss: total.loss / count,
        policy_loss: total.policy_loss / count,
        value_loss: total.value_loss / count,
        entropy: total.entropy / count,
        approx_kl: total.approx_kl / count,
        clip_fraction: total.clip_fraction / count,
    }
}

/// Scale `grads` so its global L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(grads: &mut PolicyNet<T>, max_norm: f64) -> f64 {
    let norm = grads
        .layers()
        .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = T::of(max_norm / (norm + 1e-6));
        for l in grads.layers_mut() {
            l.weight.mapv_inplace(|v| v * scale);
            l.bias.mapv_inplace(|v| v * scale);
        }
    }
    norm
}

pub fn train<T: Real>(env: &EnvConfig, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with(env, cfg, |_, _| Ok(()))
}

/// Train and call `hook` after every log record with the current parameters.
pub fn train_with<T: Real, F>(env: &EnvConfig, cfg: &TrainConfig, mut hook: F) -> Result<TrainOutcome<T>>
where
    F: FnMut(&PolicyNet<T>, &LogRecord) -> Result<()>,
{
    env.validate()?;
    cfg.validate()?;
    let mut params = init_params::<T>(env, cfg);
    let mut adam = Adam::new(&params);
    let mut rollout_rng = stream(cfg.seed, 1);
    let mut shuffle_rng = stream(cfg.seed, 2);
    let mut eval_rng = stream(cfg.seed, 3);
    let mut collector = RolloutCollector::new(env)?;
    let mut log = Vec::new();
    let mut finished: Vec<EpisodeStats> = Vec::new();
    let (mut steps, mut update) = (0usize, 0usize);
    let mut best: Option<f64> = None;
    let mut final_eval = None;

    while steps < cfg.total_steps {
        let n = cfg.rollout_length.min(cfg.total_steps - steps);
        let lr = linear_lr(cfg.lr0, steps, cfg.total_steps);
        let episodes_before = finished.len();
        let buf = collector.collect(&params, n, &mut rollout_rng, &mut finished)?;
        steps += n;
        let stats = update_policy(&mut params, &mut adam, &buf, cfg, lr, &mut shuffle_rng);
        update += 1;

        let fresh = &finished[episodes_before..];
        let mean_of = |f: fn(&EpisodeStats) -> f64| {
            (!fresh.is_empty()).then(|| fresh.iter().map(f).sum::<f64>() / fresh.len() as f64)
        };
        let record = LogRecord::Update {
            update,
            steps,
            episodes: finished.len(),
            lr,
            loss: stats.loss,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            mean_episode_return: mean_of(|e| e.episode_return),
            mean_episode_length: mean_of(|e| e.length as f64),
        };
        hook(&params, &record)?;
        log.push(record);

        let every = cfg.eval_every_episodes;
        let due = every > 0 && finished.len() / every > episodes_before / every;
        let last = steps >= cfg.total_steps;
        if due || last {
            let metrics = evaluate_policy(env, &mut &params, cfg.eval_episodes.max(1), true, &mut eval_rng)?;
            best = Some(best.map_or(metrics.placement_rate, |b: f64| b.max(metrics.placement_rate)));
            final_eval = Some(metrics);
            let record = LogRecord::Eval { update, steps, episodes: finished.len(), metrics };
            hook(&params, &record)?;
            log.push(record);
            if cfg.target_placement_rate.is_some_and(|t| metrics.placement_rate >= t) {
                break;
            }
        }
    }

    Ok(TrainOutcome { params, log, steps, episodes: finished.len(), final_eval, best_placement_rate: best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_points() {
        assert_eq!(linear_lr(5e-4, 0, 1000), 5e-4);
        assert_eq!(linear_lr(5e-4, 500, 1000), 2.5e-4);
        assert_eq!(linear_lr(5e-4, 1000, 1000), 0.0);
    }

    #[test]
    fn presets_validate() {
        TrainConfig::ppo().validate().unwrap();
        TrainConfig::a2c().validate().unwrap();
        let mut bad = TrainConfig::ppo();
        bad.gamma = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = TrainConfig::ppo();
        bad.epochs = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_hyperparameters() {
        for cfg in [TrainConfig::ppo(), TrainConfig::a2c()] {
            assert_eq!(cfg.lr0, 0.0005);
            assert_eq!(cfg.gamma, 0.95);
            assert_eq!(cfg.eval_every_episodes, 50);
        }
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = TrainConfig { clip_epsilon: None, seed: 9, ..TrainConfig::ppo() };
        let text = toml::to_string(&cfg).unwrap();
        let back: TrainConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: TrainConfig = toml::from_str("total_steps = 10\nseed = 3\nclip_epsilon = \"none\"").unwrap();
        assert_eq!(partial.total_steps, 10);
        assert_eq!(partial.rollout_length, 2048);
        assert_eq!(partial.clip_epsilon, None);
        assert_eq!(partial.minibatch_size, Some(256));
        assert!(toml::from_str::<TrainConfig>("clip_epsilon = \"off\"").is_err());
    }
}
