mod common;

use ndarray::Array2;
use pack2d::experiments::mini_instance;
use pack2d::neural::{CriticTrunk, PolicyNet};
use pack2d::rl::{
    compute_gae, ppo_loss, ppo_loss_and_grad, train, LogRecord, LossConfig, Minibatch, RolloutCollector, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{ref_gae, ref_return_minus_baseline};

proptest! {
    #[test]
    fn gae_matches_explicit_sums(
        steps in prop::collection::vec((-8.0f64..64.0, -20.0f64..120.0, prop::bool::weighted(0.2)), 1..=64),
        bootstrap in -20.0f64..120.0,
        gamma in 0.5f64..=1.0,
        lambda in 0.0f64..=1.0,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let dones: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        let want = ref_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..rewards.len() {
            prop_assert!((adv[t] - want[t]).abs() <= 1e-8);
            prop_assert!((ret[t] - adv[t] - values[t]).abs() <= 1e-9);
        }
        let (mc, _) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, 1.0);
        let want_mc = ref_return_minus_baseline(&rewards, &values, &dones, bootstrap, gamma);
        for t in 0..rewards.len() {
            prop_assert!((mc[t] - want_mc[t]).abs() <= 1e-8);
        }
    }
}

fn net_and_batch(seed: u64, critic: CriticTrunk, log_ratio: f64) -> (PolicyNet<f64>, Minibatch<f64>) {
    let env = mini_instance().env;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyNet::<f64>::init_with(env.observation_len(), 12, &env.action_dims(), critic, &mut rng);
    let noisy: Vec<f64> = net.flat().iter().map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    net.set_flat(&noisy);
    let n = 10;
    let obs = Array2::from_shape_fn((n, net.input_dim()), |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let dims = net.head_sizes();
    let actions: Vec<[usize; 4]> = (0..n).map(|_| std::array::from_fn(|h| rng.random_range(0..dims[h]))).collect();
    let cache = net.forward_batch(obs.clone());
    let old_log_probs = (0..n).map(|i| cache.dist(i).log_prob(&actions[i]).unwrap() - log_ratio).collect();
    let batch = Minibatch {
        obs,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        returns: (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect(),
    };
    (net, batch)
}

/// Central differences over every parameter; returns the worst relative error.
fn finite_difference_error(net: &PolicyNet<f64>, batch: &Minibatch<f64>, cfg: &LossConfig) -> f64 {
    let (_, grads) = ppo_loss_and_grad(net, batch, cfg);
    let analytic = grads.flat();
    let base = net.flat();
    let h = 1e-5;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in (0..base.len()).step_by(7) {
        let mut p = base.clone();
        p[k] += h;
        probe.set_flat(&p);
        let up = ppo_loss(&probe, batch, cfg).loss;
        p[k] -= 2.0 * h;
        probe.set_flat(&p);
        let down = ppo_loss(&probe, batch, cfg).loss;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    worst
}

#[test]
fn value_loss_gradient() {
    for critic in [CriticTrunk::Shared, CriticTrunk::Separate] {
        let (net, batch) = net_and_batch(1, critic, 0.0);
        let cfg = LossConfig { clip_epsilon: Some(0.2), entropy_coef: 0.0, value_coef: 0.7 };
        let batch = Minibatch { advantages: vec![0.0; batch.advantages.len()], ..batch };
        let err = finite_difference_error(&net, &batch, &cfg);
        assert!(err <= 1e-4, "{critic:?}: {err:e}");
    }
}

#[test]
fn entropy_gradient() {
    let (net, batch) = net_and_batch(2, CriticTrunk::Separate, 0.0);
    let cfg = LossConfig { clip_epsilon: None, entropy_coef: 1.0, value_coef: 0.0 };
    let batch = Minibatch { advantages: vec![0.0; batch.advantages.len()], ..batch };
    let err = finite_difference_error(&net, &batch, &cfg);
    assert!(err <= 1e-4, "{err:e}");
}

#[test]
fn clipped_policy_gradient() {
    // Ratios of exp(0.5) sit outside the clip range; the clipped samples contribute nothing.
    for log_ratio in [0.0, 0.5, -0.5] {
        let (net, batch) = net_and_batch(3, CriticTrunk::Shared, log_ratio);
        let cfg = LossConfig { clip_epsilon: Some(0.2), entropy_coef: 0.0, value_coef: 0.0 };
        let err = finite_difference_error(&net, &batch, &cfg);
        assert!(err <= 1e-4, "log ratio {log_ratio}: {err:e}");
    }
}

#[test]
fn unchanged_parameters_give_unit_ratios() {
    let (net, batch) = net_and_batch(4, CriticTrunk::Separate, 0.0);
    let cfg = LossConfig { clip_epsilon: Some(0.2), entropy_coef: 0.0, value_coef: 0.0 };
    let stats = ppo_loss(&net, &batch, &cfg);
    let mean_adv = batch.advantages.iter().sum::<f64>() / batch.advantages.len() as f64;
    assert!((stats.policy_loss + mean_adv).abs() < 1e-12);
    assert!(stats.approx_kl.abs() < 1e-12);
    assert_eq!(stats.clip_fraction, 0.0);
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        total_steps: 600,
        rollout_length: 128,
        minibatch_size: Some(32),
        epochs: 3,
        hidden: 16,
        eval_every_episodes: 5,
        seed,
        ..TrainConfig::ppo()
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let env = mini_instance().env;
    let a = train::<f32>(&env, &small_config(9)).unwrap();
    let b = train::<f32>(&env, &small_config(9)).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.params, b.params);
    let c = train::<f32>(&env, &small_config(10)).unwrap();
    assert_ne!(a.params, c.params);
    assert!(a.log.iter().any(|r| matches!(r, LogRecord::Eval { .. })));
    assert_eq!(a.steps, 600);
}

#[test]
fn learning_rate_decays_linearly_across_updates() {
    let env = mini_instance().env;
    let out = train::<f32>(&env, &small_config(1)).unwrap();
    let lrs: Vec<(usize, f64)> = out
        .log
        .iter()
        .filter_map(|r| match r {
            LogRecord::Update { steps, lr, .. } => Some((*steps, *lr)),
            _ => None,
        })
        .collect();
    let mut before = 0;
    for (steps, lr) in lrs {
        assert_eq!(lr, 5e-4 * (1.0 - before as f64 / 600.0));
        before = steps;
    }
}

#[test]
fn rollout_done_flags_mark_episode_ends() {
    let env = mini_instance().env;
    let net = PolicyNet::<f64>::init(env.observation_len(), 8, &env.action_dims(), &mut ChaCha8Rng::seed_from_u64(0));
    let mut collector = RolloutCollector::new(&env).unwrap();
    let mut episodes = Vec::new();
    let buf = collector.collect(&net, 500, &mut ChaCha8Rng::seed_from_u64(1), &mut episodes).unwrap();
    assert_eq!(buf.len(), 500);
    let ends: Vec<usize> = (0..buf.len()).filter(|&i| buf.dones[i]).collect();
    assert_eq!(ends.len(), episodes.len());
    assert!(!episodes.is_empty());
    let mut start = 0;
    for (&end, ep) in ends.iter().zip(&episodes) {
        assert_eq!(ep.length, end - start + 1);
        let ret: f64 = buf.rewards[start..=end].iter().sum();
        assert!((ret - ep.episode_return).abs() < 1e-9);
        assert_eq!(buf.rewards[end], ep.terminal_reward);
        // The step after an episode end starts from an empty board with full stock.
        if end + 1 < buf.len() {
            let obs = buf.observation(end + 1);
            assert!(obs[..32].iter().all(|&c| c == 0.0));
            assert!(obs[32..].iter().all(|&q| q == 1.0));
        }
        start = end + 1;
    }
}

#[test]
fn rollout_ending_on_a_terminal_step_has_no_bootstrap() {
    let env = mini_instance().env;
    let net = PolicyNet::<f64>::init(env.observation_len(), 8, &env.action_dims(), &mut ChaCha8Rng::seed_from_u64(0));
    let mut probe = RolloutCollector::new(&env).unwrap();
    let first = probe.collect(&net, 400, &mut ChaCha8Rng::seed_from_u64(5), &mut Vec::new()).unwrap();
    let end = first.dones.iter().position(|&d| d).expect("an episode ends within 400 steps") + 1;
    let mut collector = RolloutCollector::new(&env).unwrap();
    let buf = collector.collect(&net, end, &mut ChaCha8Rng::seed_from_u64(5), &mut Vec::new()).unwrap();
    assert!(buf.dones[end - 1]);
    assert_eq!(buf.bootstrap_value, 0.0);
    let cut = collector.collect(&net, 3, &mut ChaCha8Rng::seed_from_u64(6), &mut Vec::new()).unwrap();
    assert!(!cut.dones[2]);
    assert_ne!(cut.bootstrap_value, 0.0);
}
