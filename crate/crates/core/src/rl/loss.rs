//! Clipped-surrogate actor-critic objective and its analytic gradient.

use ndarray::{Array1, Array2};

use crate::neural::{ForwardCache, Gradients, OutputGrads, PolicyNet, Real, NUM_HEADS};

/// Coefficients of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// `None` disables clipping.
    pub clip_epsilon: Option<f64>,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

/// Samples of one gradient step. Advantages are expected to be normalized already.
#[derive(Debug, Clone)]
pub struct Minibatch<T> {
    pub obs: Array2<T>,
    pub actions: Vec<[usize; NUM_HEADS]>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Per-sample clipped surrogate `min(rho*A, clip(rho)*A)` and whether the unclipped branch is
/// the active one.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_epsilon: Option<f64>) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = match clip_epsilon {
        Some(eps) => ratio.clamp(1.0 - eps, 1.0 + eps) * advantage,
        None => unclipped,
    };
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Loss value only.
pub fn ppo_loss<T: Real>(net: &PolicyNet<T>, batch: &Minibatch<T>, cfg: &LossConfig) -> LossStats {
    let cache = net.forward_batch(batch.obs.clone());
    evaluate(&cache, batch, cfg, false).0
}

/// Loss value and gradient with respect to every parameter.
pub fn ppo_loss_and_grad<T: Real>(
    net: &PolicyNet<T>,
    batch: &Minibatch<T>,
    cfg: &LossConfig,
) -> (LossStats, Gradients<T>) {
    let cache = net.forward_batch(batch.obs.clone());
    let (stats, out) = evaluate(&cache, batch, cfg, true);
    (stats, net.backward(&cache, &out.expect("gradients requested")))
}

fn evaluate<T: Real>(
    cache: &ForwardCache<T>,
    batch: &Minibatch<T>,
    cfg: &LossConfig,
    want_grads: bool,
) -> (LossStats, Option<OutputGrads<T>>) {
    let n = cache.batch_len();
    let inv_n = 1.0 / n as f64;
    let mut grads = want_grads.then(|| OutputGrads {
        logits: cache.logits.iter().map(|l| Array2::zeros(l.raw_dim())).collect(),
        values: Array1::zeros(n),
    });
    let mut stats = LossStats::default();
    for i in 0..n {
        let dist = cache.dist(i);
        let action = &batch.actions[i];
        let log_prob = dist.log_prob(action).expect("actions in range");
        let head_entropies = dist.head_entropies();
        let entropy: f64 = head_entropies.iter().sum();
        let log_ratio = log_prob - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let (surrogate, unclipped_active) = clipped_surrogate(ratio, adv, cfg.clip_epsilon);
        let value = cache.values[i].as_f64();
        let err = value - batch.returns[i];

        stats.policy_loss -= surrogate * inv_n;
        stats.value_loss += err * err * inv_n;
        stats.entropy += entropy * inv_n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
        if let Some(eps) = cfg.clip_epsilon {
            if (ratio - 1.0).abs() > eps {
                stats.clip_fraction += inv_n;
            }
        }

        if let Some(g) = grads.as_mut() {
            // d(loss)/d(log_prob): the surrogate contributes only through the unclipped branch.
            let d_log_prob = if unclipped_active { -ratio * adv * inv_n } else { 0.0 };
            let d_entropy = -cfg.entropy_coef * inv_n;
            for (h, (probs, log_probs)) in dist.probs().iter().zip(dist.log_probs()).enumerate() {
                let h_ent = head_entropies[h];
                let mut row = g.logits[h].row_mut(i);
                for (j, (&p, &log_p)) in probs.iter().zip(log_probs).enumerate() {
                    let onehot = if j == action[h] { 1.0 } else { 0.0 };
                    let d = d_log_prob * (onehot - p) + d_entropy * (-p * (log_p + h_ent));
                    row[j] = T::of(d);
                }
            }
            g.values[i] = T::of(2.0 * cfg.value_coef * err * inv_n);
        }
    }
    stats.loss = stats.policy_loss + cfg.value_coef * stats.value_loss - cfg.entropy_coef * stats.entropy;
    (stats, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_arithmetic() {
        assert_eq!(clipped_surrogate(1.5, 1.0, Some(0.2)).0, 1.2);
        assert!((clipped_surrogate(0.5, -1.0, Some(0.2)).0 + 0.8).abs() < 1e-15);
        assert_eq!(clipped_surrogate(1.0, 2.0, Some(0.2)), (2.0, true));
        assert_eq!(clipped_surrogate(5.0, 2.0, None), (10.0, true));
    }
}
