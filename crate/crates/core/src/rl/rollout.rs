use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvConfig, PackingEnv, NUM_BOARDS};
use crate::error::Result;
use crate::neural::{PolicyNet, Real, NUM_HEADS};

/// Anything that maps observations to multi-discrete actions.
pub trait Policy {
    /// Called at the start of every episode.
    fn reset(&mut self) {}

    fn act(&mut self, obs: &[f64], deterministic: bool, rng: &mut dyn RngCore) -> Result<[usize; NUM_HEADS]>;
}

impl<T: Real> Policy for &PolicyNet<T> {
    fn act(&mut self, obs: &[f64], deterministic: bool, rng: &mut dyn RngCore) -> Result<[usize; NUM_HEADS]> {
        let (dist, _) = self.forward(obs)?;
        Ok(if deterministic { dist.mode() } else { dist.sample(rng).0 })
    }
}

/// Replays a fixed action list; once exhausted it repeats the last action.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    actions: Vec<[usize; NUM_HEADS]>,
    cursor: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<[usize; NUM_HEADS]>) -> Self {
        Self { actions, cursor: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn reset(&mut self) {
        self.cursor = 0;
    }

    fn act(&mut self, _obs: &[f64], _deterministic: bool, _rng: &mut dyn RngCore) -> Result<[usize; NUM_HEADS]> {
        let a = self.actions.get(self.cursor).or(self.actions.last()).copied().unwrap_or([0; NUM_HEADS]);
        self.cursor += 1;
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode_return: f64,
    pub length: usize,
    pub terminal_reward: f64,
    pub placement_rate: f64,
    pub coverage: [f64; NUM_BOARDS],
}

fn episode_stats(env: &PackingEnv, episode_return: f64, length: usize, terminal_reward: f64) -> EpisodeStats {
    EpisodeStats { episode_return, length, terminal_reward, placement_rate: env.placement_rate(), coverage: env.coverage() }
}

/// Per-step training data of one rollout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    /// Row-major `len x obs_dim`.
    pub observations: Vec<f64>,
    pub actions: Vec<[usize; NUM_HEADS]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// The episode ended at this step.
    pub dones: Vec<bool>,
    /// Value of the observation following the last step, 0 if that step was terminal.
    pub bootstrap_value: f64,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }
}

/// Steps one environment with a sampled policy, resetting it when an episode ends.
#[derive(Debug, Clone)]
pub struct RolloutCollector {
    env: PackingEnv,
    obs: Vec<f64>,
    episode_return: f64,
    episode_len: usize,
}

impl RolloutCollector {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let env = PackingEnv::new(config.clone())?;
        let obs = env.observation();
        Ok(Self { env, obs, episode_return: 0.0, episode_len: 0 })
    }

    /// Collect `n_steps` transitions. Finished episodes are appended to `episodes`.
    pub fn collect<T: Real>(
        &mut self,
        net: &PolicyNet<T>,
        n_steps: usize,
        rng: &mut dyn RngCore,
        episodes: &mut Vec<EpisodeStats>,
    ) -> Result<RolloutBuffer> {
        let obs_dim = self.obs.len();
        let mut buf = RolloutBuffer { obs_dim, ..Default::default() };
        for _ in 0..n_steps {
            let (dist, value) = net.forward(&self.obs)?;
            let (action, log_prob) = dist.sample(rng);
            let step = self.env.step(Action::from_array(action))?;
            buf.observations.extend_from_slice(&self.obs);
            buf.actions.push(action);
            buf.log_probs.push(log_prob);
            buf.rewards.push(step.reward);
            buf.values.push(value);
            buf.dones.push(step.done);
            self.episode_return += step.reward;
            self.episode_len += 1;
            if step.done {
                episodes.push(episode_stats(&self.env, self.episode_return, self.episode_len, step.reward));
                self.obs = self.env.reset();
                self.episode_return = 0.0;
                self.episode_len = 0;
            } else {
                self.obs = step.observation;
            }
        }
        buf.bootstrap_value = match buf.dones.last() {
            Some(false) => net.forward(&self.obs)?.1,
            _ => 0.0,
        };
        Ok(buf)
    }
}

/// Aggregated results of evaluation episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_reward: f64,
    pub mean_terminal_reward: f64,
    pub mean_episode_length: f64,
    pub placement_rate: f64,
    pub coverage: [f64; NUM_BOARDS],
    pub episodes: usize,
}

impl EvalMetrics {
    pub fn from_episodes(episodes: &[EpisodeStats]) -> Self {
        let n = episodes.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeStats) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        Self {
            mean_reward: mean(&|e| e.episode_return),
            mean_terminal_reward: mean(&|e| e.terminal_reward),
            mean_episode_length: mean(&|e| e.length as f64),
            placement_rate: mean(&|e| e.placement_rate),
            coverage: [mean(&|e| e.coverage[0]), mean(&|e| e.coverage[1])],
            episodes: episodes.len(),
        }
    }

    pub const CSV_HEADER: &'static str =
        "episodes,mean_reward,mean_terminal_reward,mean_episode_length,placement_rate,coverage_board0,coverage_board1";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.episodes,
            self.mean_reward,
            self.mean_terminal_reward,
            self.mean_episode_length,
            self.placement_rate,
            self.coverage[0],
            self.coverage[1]
        )
    }
}

/// Run full episodes with `policy`. Deterministic mode takes the per-head argmax.
pub fn evaluate_policy<P: Policy>(
    config: &EnvConfig,
    policy: &mut P,
    episodes: usize,
    deterministic: bool,
    rng: &mut dyn RngCore,
) -> Result<EvalMetrics> {
    let mut env = PackingEnv::new(config.clone())?;
    let mut stats = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        policy.reset();
        let (mut ret, mut len) = (0.0, 0);
        loop {
            let action = policy.act(&obs, deterministic, rng)?;
            let step = env.step(Action::from_array(action))?;
            ret += step.reward;
            len += 1;
            if step.done {
                stats.push(episode_stats(&env, ret, len, step.reward));
                break;
            }
            obs = step.observation;
        }
    }
    Ok(EvalMetrics::from_episodes(&stats))
}
