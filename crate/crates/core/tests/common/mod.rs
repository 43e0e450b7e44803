//! Independent reference implementations used as test oracles. They deliberately share no
//! code with the library beyond plain data types.
#![allow(dead_code)]

use pack2d::env::{EnvConfig, PieceType};
use pack2d::neural::PolicyNet;

/// Brute-force environment written directly from the step rules, with its own state.
#[derive(Debug, Clone)]
pub struct RefEnv {
    pub cfg: EnvConfig,
    /// `cells[b][x][y]` holds the piece id + 1, 0 when empty.
    pub cells: Vec<Vec<Vec<usize>>>,
    pub left: Vec<usize>,
    pub steps: usize,
    pub finished: bool,
}

/// Everything a step reports, in comparable form.
#[derive(Debug, Clone, PartialEq)]
pub struct RefStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub valid: bool,
    pub r_height: i32,
    pub clipped: (usize, usize),
    pub kind: &'static str,
}

pub fn ref_height_score(piece_h: u32, board_h: u32) -> i32 {
    // Percent comparisons in exact rational form: p / b <= k / 100.
    let (p, b) = (piece_h as u128, board_h as u128);
    if p * 2 <= b {
        0
    } else if p * 5 <= b * 4 {
        1
    } else if p <= b {
        2
    } else {
        -2
    }
}

impl RefEnv {
    pub fn new(cfg: &EnvConfig) -> Self {
        let cells = cfg.boards.iter().map(|b| vec![vec![0; b.width]; b.length]).collect();
        Self { cfg: cfg.clone(), cells, left: cfg.pieces.iter().map(|p| p.initial_qty).collect(), steps: 0, finished: false }
    }

    fn filled(&self, b: usize) -> usize {
        self.cells[b].iter().flatten().filter(|&&c| c != 0).count()
    }

    fn coverage(&self, b: usize) -> f64 {
        let spec = self.cfg.boards[b];
        100.0 * self.filled(b) as f64 / (spec.length * spec.width) as f64
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::new();
        for board in &self.cells {
            for row in board {
                for &c in row {
                    obs.push(if c == 0 { 0.0 } else { 1.0 });
                }
            }
        }
        for (p, piece) in self.cfg.pieces.iter().enumerate() {
            obs.push(if piece.initial_qty == 0 { 0.0 } else { self.left[p] as f64 / piece.initial_qty as f64 });
        }
        obs
    }

    fn out(&self, reward: f64, valid: bool, r_height: i32, clipped: (usize, usize), kind: &'static str) -> RefStep {
        RefStep { observation: self.observation(), reward, done: self.finished, valid, r_height, clipped, kind }
    }

    pub fn step(&mut self, x: usize, y: usize, b: usize, p: usize) -> RefStep {
        assert!(!self.finished);
        let cap = self.cfg.max_steps.unwrap_or(4 * self.cfg.pieces.iter().map(|q| q.initial_qty).sum::<usize>());
        let all_full = (0..2).all(|k| {
            let s = self.cfg.boards[k];
            self.filled(k) == s.length * s.width
        });
        if self.left.iter().all(|&n| n == 0) || all_full || self.steps >= cap {
            self.finished = true;
            let reward = (self.coverage(0) + self.coverage(1)) / 2.0;
            return self.out(reward, false, 0, (x, y), "Terminal");
        }
        self.steps += 1;
        if self.left[p] == 0 {
            return self.out(-8.0, false, 0, (x, y), "Exhausted");
        }
        self.left[p] -= 1;
        let piece: PieceType = self.cfg.pieces[p];
        let spec = self.cfg.boards[b];
        let score = ref_height_score(piece.height, spec.height_limit);
        if piece.length > spec.length || piece.width > spec.width {
            return self.out(-8.0, false, score, (x, y), "DoesNotFit");
        }
        let cx = if x + piece.length > spec.length { spec.length - piece.length } else { x };
        let cy = if y + piece.width > spec.width { spec.width - piece.width } else { y };
        let mut clash = false;
        for i in cx..cx + piece.length {
            for j in cy..cy + piece.width {
                clash |= self.cells[b][i][j] != 0;
            }
        }
        if clash {
            return self.out(-8.0, false, score, (cx, cy), "Overlap");
        }
        if score < 0 {
            return self.out(-8.0, false, score, (cx, cy), "TooTall");
        }
        for i in cx..cx + piece.length {
            for j in cy..cy + piece.width {
                self.cells[b][i][j] = p + 1;
            }
        }
        let reward = (piece.length * piece.width) as f64 * score as f64;
        self.out(reward, true, score, (cx, cy), "Placed")
    }
}

/// Advantages by explicit truncated sums `sum_l (gamma*lambda)^l delta_{t+l}`, stopping after
/// the step that ends an episode.
pub fn ref_gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| rewards[t] + if dones[t] { 0.0 } else { gamma * next_value(t) } - values[t];
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                sum += weight * delta(k);
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Discounted return to the end of the episode (or the bootstrap) minus the value baseline.
pub fn ref_return_minus_baseline(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut g = 0.0;
            let mut discount = 1.0;
            let mut ended = false;
            for k in t..n {
                g += discount * rewards[k];
                if dones[k] {
                    ended = true;
                    break;
                }
                discount *= gamma;
            }
            if !ended {
                g += discount * bootstrap;
            }
            g - values[t]
        })
        .collect()
}

/// Plain-loop dense layer: `out[j] = b[j] + sum_i x[i] * w[i][j]`.
fn dense(x: &[f64], w: &ndarray::Array2<f64>, b: &ndarray::Array1<f64>) -> Vec<f64> {
    (0..w.ncols()).map(|j| b[j] + (0..w.nrows()).map(|i| x[i] * w[[i, j]]).sum::<f64>()).collect()
}

/// Per-sample forward pass: (trunk activations, head logits, critic activations, value).
pub struct RefForward {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<Vec<f64>>,
    pub c1: Option<Vec<f64>>,
    pub c2: Option<Vec<f64>>,
    pub value: f64,
}

pub fn ref_forward(net: &PolicyNet<f64>, x: &[f64]) -> RefForward {
    let tanh = |v: Vec<f64>| v.into_iter().map(f64::tanh).collect::<Vec<_>>();
    let h1 = tanh(dense(x, &net.trunk[0].weight, &net.trunk[0].bias));
    let h2 = tanh(dense(&h1, &net.trunk[1].weight, &net.trunk[1].bias));
    let logits = net.heads.iter().map(|h| dense(&h2, &h.weight, &h.bias)).collect();
    let (c1, c2) = match &net.critic_trunk {
        Some([a, b]) => {
            let c1 = tanh(dense(x, &a.weight, &a.bias));
            let c2 = tanh(dense(&c1, &b.weight, &b.bias));
            (Some(c1), Some(c2))
        }
        None => (None, None),
    };
    let value = dense(c2.as_ref().unwrap_or(&h2), &net.value.weight, &net.value.bias)[0];
    RefForward { h1, h2, logits, c1, c2, value }
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Accumulate gradients of one dense layer and return the gradient at its input.
fn dense_back(x: &[f64], w: &ndarray::Array2<f64>, d_out: &[f64], gw: &mut ndarray::Array2<f64>, gb: &mut ndarray::Array1<f64>) -> Vec<f64> {
    for j in 0..w.ncols() {
        gb[j] += d_out[j];
        for i in 0..w.nrows() {
            gw[[i, j]] += x[i] * d_out[j];
        }
    }
    (0..w.nrows()).map(|i| (0..w.ncols()).map(|j| w[[i, j]] * d_out[j]).sum()).collect()
}

/// Loss and gradient of the plain advantage actor-critic objective
/// `-mean(log pi(a|s) * A) + value_coef * mean((v - R)^2) - entropy_coef * mean(H)`,
/// derived and back-propagated independently of the library.
pub fn ref_a2c_loss_and_grad(
    net: &PolicyNet<f64>,
    obs: &[Vec<f64>],
    actions: &[[usize; 4]],
    advantages: &[f64],
    returns: &[f64],
    value_coef: f64,
    entropy_coef: f64,
) -> (f64, PolicyNet<f64>) {
    let mut g = net.zeros_like();
    let n = obs.len() as f64;
    let mut loss = 0.0;
    for (s, x) in obs.iter().enumerate() {
        let f = ref_forward(net, x);
        let mut d_h2 = vec![0.0; f.h2.len()];
        for (h, z) in f.logits.iter().enumerate() {
            let lp = log_softmax(z);
            let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
            let ent: f64 = -p.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
            loss += -lp[actions[s][h]] * advantages[s] / n - entropy_coef * ent / n;
            let dz: Vec<f64> = (0..z.len())
                .map(|j| {
                    let onehot = if j == actions[s][h] { 1.0 } else { 0.0 };
                    -advantages[s] / n * (onehot - p[j]) + entropy_coef / n * p[j] * (lp[j] + ent)
                })
                .collect();
            let head = &mut g.heads[h];
            let back = dense_back(&f.h2, &net.heads[h].weight, &dz, &mut head.weight, &mut head.bias);
            d_h2.iter_mut().zip(back).for_each(|(a, b)| *a += b);
        }
        let err = f.value - returns[s];
        loss += value_coef * err * err / n;
        let dv = [2.0 * value_coef * err / n];
        let value_in = f.c2.as_ref().unwrap_or(&f.h2);
        let d_value_in = dense_back(value_in, &net.value.weight, &dv, &mut g.value.weight, &mut g.value.bias);
        match (&net.critic_trunk, f.c1.as_ref(), f.c2.as_ref()) {
            (Some(layers), Some(c1), Some(c2)) => {
                let [g0, g1] = g.critic_trunk.as_mut().unwrap();
                let d_pre2: Vec<f64> = d_value_in.iter().zip(c2).map(|(d, h)| d * (1.0 - h * h)).collect();
                let back = dense_back(c1, &layers[1].weight, &d_pre2, &mut g1.weight, &mut g1.bias);
                let d_pre1: Vec<f64> = back.iter().zip(c1).map(|(d, h)| d * (1.0 - h * h)).collect();
                dense_back(x, &layers[0].weight, &d_pre1, &mut g0.weight, &mut g0.bias);
            }
            _ => d_h2.iter_mut().zip(d_value_in).for_each(|(a, b)| *a += b),
        }
        let d_pre2: Vec<f64> = d_h2.iter().zip(&f.h2).map(|(d, h)| d * (1.0 - h * h)).collect();
        let [g0, g1] = &mut g.trunk;
        let back = dense_back(&f.h1, &net.trunk[1].weight, &d_pre2, &mut g1.weight, &mut g1.bias);
        let d_pre1: Vec<f64> = back.iter().zip(&f.h1).map(|(d, h)| d * (1.0 - h * h)).collect();
        dense_back(x, &net.trunk[0].weight, &d_pre1, &mut g0.weight, &mut g0.bias);
    }
    (loss, g)
}

/// 4x4 boards, uniform height 100, quantities 2/2/4/4.
pub fn mini_config() -> EnvConfig {
    pack2d::experiments::mini_instance().env
}
