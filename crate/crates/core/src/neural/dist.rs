use rand::Rng;

use crate::error::{Error, Result};

pub const NUM_HEADS: usize = 4;

/// Independent categorical distributions, one per action component.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiDiscreteDist {
    probs: Vec<Vec<f64>>,
    log_probs: Vec<Vec<f64>>,
}

impl MultiDiscreteDist {
    /// Softmax of each head's logits, computed with the max-shift for stability.
    pub fn from_logits<L: AsRef<[f64]>>(logits: &[L]) -> Self {
        let mut probs = Vec::with_capacity(logits.len());
        let mut log_probs = Vec::with_capacity(logits.len());
        for head in logits {
            let (p, lp) = softmax(head.as_ref());
            probs.push(p);
            log_probs.push(lp);
        }
        Self { probs, log_probs }
    }

    pub fn from_probs(probs: Vec<Vec<f64>>) -> Self {
        let log_probs = probs.iter().map(|h| h.iter().map(|p| p.ln()).collect()).collect();
        Self { probs, log_probs }
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[Vec<f64>] {
        &self.log_probs
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        self.probs.iter().map(Vec::len).collect()
    }

    /// Draw every component independently. Returns the action and its joint log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ([usize; NUM_HEADS], f64) {
        let mut action = [0; NUM_HEADS];
        let mut log_prob = 0.0;
        for (h, probs) in self.probs.iter().enumerate() {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` a hair below 1; fall back to the last nonzero entry.
            let i = pick.unwrap_or_else(|| probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1));
            action[h] = i;
            log_prob += self.log_probs[h][i];
        }
        (action, log_prob)
    }

    /// Per-head argmax, lowest index on ties.
    pub fn mode(&self) -> [usize; NUM_HEADS] {
        let mut action = [0; NUM_HEADS];
        for (h, probs) in self.probs.iter().enumerate() {
            let mut best = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            action[h] = best;
        }
        action
    }

    pub fn log_prob(&self, action: &[usize; NUM_HEADS]) -> Result<f64> {
        let mut total = 0.0;
        for (h, &a) in action.iter().enumerate() {
            let head = &self.log_probs[h];
            if a >= head.len() {
                return Err(Error::Usage(format!("action component {h}={a} out of range 0..{}", head.len())));
            }
            total += head[a];
        }
        Ok(total)
    }

    pub fn head_entropies(&self) -> Vec<f64> {
        self.probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, lp)| -p.iter().zip(lp).filter(|(&p, _)| p > 0.0).map(|(p, lp)| p * lp).sum::<f64>())
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        self.head_entropies().iter().sum()
    }

    pub fn log_prob_entropy(&self, action: &[usize; NUM_HEADS]) -> Result<(f64, f64)> {
        Ok((self.log_prob(action)?, self.entropy()))
    }
}

fn softmax(logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let log_norm = max + sum.ln();
    let log_probs: Vec<f64> = logits.iter().map(|z| z - log_norm).collect();
    (log_probs.iter().map(|lp| lp.exp()).collect(), log_probs)
}
