use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::dist::MultiDiscreteDist;
use super::Real;
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 128;

/// Affine layer `y = x W + b` with `W` stored input-major (`in x out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    /// Orthogonal weights scaled by `gain`, zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let q = orthogonal_matrix(inputs, outputs, rng);
        Self { weight: q.mapv(|v| T::of(v * gain)), bias: Array1::zeros(outputs) }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn cast<U: Real>(&self) -> Linear<U> {
        Linear { weight: self.weight.mapv(|v| U::of(v.as_f64())), bias: self.bias.mapv(|v| U::of(v.as_f64())) }
    }
}

/// Gram-Schmidt on a Gaussian matrix; orthonormal columns when `rows >= cols`, orthonormal
/// rows otherwise.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let (n, k) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    while vecs.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            vecs.push(v);
        }
    }
    Array2::from_shape_fn((rows, cols), |(i, j)| if rows >= cols { vecs[j][i] } else { vecs[i][j] })
}

/// Whether the value head reads the policy trunk or has a tanh trunk of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticTrunk {
    #[default]
    Shared,
    Separate,
}

/// Two-layer tanh trunk, one logit head per action component, and a scalar value head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet<T> {
    pub trunk: [Linear<T>; 2],
    pub heads: Vec<Linear<T>>,
    /// Present when the critic has its own trunk.
    pub critic_trunk: Option<[Linear<T>; 2]>,
    pub value: Linear<T>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = PolicyNet<T>;

/// Activations kept from a batched forward pass for [`PolicyNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub input: Array2<T>,
    pub hidden1: Array2<T>,
    pub hidden2: Array2<T>,
    /// Critic trunk activations, when the critic has its own trunk.
    pub critic_hidden: Option<(Array2<T>, Array2<T>)>,
    pub logits: Vec<Array2<T>>,
    pub values: Array1<T>,
}

/// Derivatives of a scalar loss with respect to the network outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads<T> {
    pub logits: Vec<Array2<T>>,
    pub values: Array1<T>,
}

impl<T: Real> PolicyNet<T> {
    pub fn zeros(input_dim: usize, hidden: usize, head_sizes: &[usize]) -> Self {
        Self::zeros_with(input_dim, hidden, head_sizes, CriticTrunk::Shared)
    }

    pub fn zeros_with(input_dim: usize, hidden: usize, head_sizes: &[usize], critic: CriticTrunk) -> Self {
        let trunk = || [Linear::zeros(input_dim, hidden), Linear::zeros(hidden, hidden)];
        Self {
            trunk: trunk(),
            heads: head_sizes.iter().map(|&k| Linear::zeros(hidden, k)).collect(),
            critic_trunk: (critic == CriticTrunk::Separate).then(trunk),
            value: Linear::zeros(hidden, 1),
        }
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self::zeros_with(self.input_dim(), self.hidden(), &self.head_sizes(), self.critic())
    }

    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, head_sizes: &[usize], rng: &mut R) -> Self {
        Self::init_with(input_dim, hidden, head_sizes, CriticTrunk::Shared, rng)
    }

    /// Orthogonal init: gain 1 for the trunks and value head, 0.01 for the policy heads.
    pub fn init_with<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: usize,
        head_sizes: &[usize],
        critic: CriticTrunk,
        rng: &mut R,
    ) -> Self {
        let trunk = [Linear::orthogonal(input_dim, hidden, 1.0, rng), Linear::orthogonal(hidden, hidden, 1.0, rng)];
        let heads = head_sizes.iter().map(|&k| Linear::orthogonal(hidden, k, 0.01, rng)).collect();
        let critic_trunk = (critic == CriticTrunk::Separate)
            .then(|| [Linear::orthogonal(input_dim, hidden, 1.0, rng), Linear::orthogonal(hidden, hidden, 1.0, rng)]);
        Self { trunk, heads, critic_trunk, value: Linear::orthogonal(hidden, 1, 1.0, rng) }
    }

    pub fn critic(&self) -> CriticTrunk {
        if self.critic_trunk.is_some() {
            CriticTrunk::Separate
        } else {
            CriticTrunk::Shared
        }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk[0].inputs()
    }

    pub fn hidden(&self) -> usize {
        self.trunk[0].outputs()
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        self.heads.iter().map(Linear::outputs).collect()
    }

    /// Layers in declaration order: trunk, heads, critic trunk (if any), value head.
    pub fn layers(&self) -> impl Iterator<Item = &Linear<T>> {
        self.trunk
            .iter()
            .chain(self.heads.iter())
            .chain(self.critic_trunk.iter().flatten())
            .chain(std::iter::once(&self.value))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Linear<T>> {
        self.trunk
            .iter_mut()
            .chain(self.heads.iter_mut())
            .chain(self.critic_trunk.iter_mut().flatten())
            .chain(std::iter::once(&mut self.value))
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every parameter in declaration order: per layer, weights row-major then bias.
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_flat(&mut self, values: &[T]) {
        assert_eq!(values.len(), self.num_params(), "parameter count mismatch");
        let mut it = values.iter().copied();
        for l in self.layers_mut() {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = it.next().expect("length checked"));
        }
    }

    /// Apply `f(param, other)` elementwise across two networks of the same shape.
    pub fn zip_apply(&mut self, other: &Self, mut f: impl FnMut(&mut T, T)) {
        for (a, b) in self.layers_mut().zip(other.layers()) {
            a.weight.zip_mut_with(&b.weight, |x, &y| f(x, y));
            a.bias.zip_mut_with(&b.bias, |x, &y| f(x, y));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> PolicyNet<U> {
        PolicyNet {
            trunk: [self.trunk[0].cast(), self.trunk[1].cast()],
            heads: self.heads.iter().map(Linear::cast).collect(),
            critic_trunk: self.critic_trunk.as_ref().map(|[a, b]| [a.cast(), b.cast()]),
            value: self.value.cast(),
        }
    }

    pub fn forward_batch(&self, input: Array2<T>) -> ForwardCache<T> {
        let hidden1 = self.trunk[0].forward(&input.view()).mapv_into(T::tanh);
        let hidden2 = self.trunk[1].forward(&hidden1.view()).mapv_into(T::tanh);
        let logits = self.heads.iter().map(|h| h.forward(&hidden2.view())).collect();
        let critic_hidden = self.critic_trunk.as_ref().map(|[c1, c2]| {
            let h1 = c1.forward(&input.view()).mapv_into(T::tanh);
            let h2 = c2.forward(&h1.view()).mapv_into(T::tanh);
            (h1, h2)
        });
        let value_input = critic_hidden.as_ref().map_or(&hidden2, |(_, h2)| h2);
        let values = self.value.forward(&value_input.view()).index_axis_move(Axis(1), 0);
        ForwardCache { input, hidden1, hidden2, critic_hidden, logits, values }
    }

    /// Single-observation forward pass.
    pub fn forward(&self, obs: &[f64]) -> Result<(MultiDiscreteDist, f64)> {
        if obs.len() != self.input_dim() {
            return Err(Error::Usage(format!(
                "observation has length {}, network expects {}",
                obs.len(),
                self.input_dim()
            )));
        }
        let input = Array2::from_shape_fn((1, obs.len()), |(_, j)| T::of(obs[j]));
        let cache = self.forward_batch(input);
        Ok((cache.dist(0), cache.values[0].as_f64()))
    }

    pub fn backward(&self, cache: &ForwardCache<T>, grads: &OutputGrads<T>) -> Gradients<T> {
        let d_values = grads.values.view().insert_axis(Axis(1));
        let d_value_input: Array2<T> = d_values.dot(&self.value.weight.t());
        let value_input = cache.critic_hidden.as_ref().map_or(&cache.hidden2, |(_, h2)| h2);
        let value = Linear { weight: value_input.t().dot(&d_values), bias: d_values.sum_axis(Axis(0)) };

        let mut heads = Vec::with_capacity(self.heads.len());
        let mut d_hidden2: Array2<T> = Array2::zeros(cache.hidden2.raw_dim());
        for (head, d_logits) in self.heads.iter().zip(&grads.logits) {
            d_hidden2 += &d_logits.dot(&head.weight.t());
            heads.push(Linear { weight: cache.hidden2.t().dot(d_logits), bias: d_logits.sum_axis(Axis(0)) });
        }

        let critic_trunk = match (&self.critic_trunk, &cache.critic_hidden) {
            (Some(layers), Some((h1, h2))) => Some(trunk_backward(layers, &cache.input, h1, h2, d_value_input)),
            _ => {
                d_hidden2 += &d_value_input;
                None
            }
        };
        let trunk = trunk_backward(&self.trunk, &cache.input, &cache.hidden1, &cache.hidden2, d_hidden2);
        PolicyNet { trunk, heads, critic_trunk, value }
    }
}

/// Backpropagate through `tanh(tanh(x W0 + b0) W1 + b1)` given the gradient at its output.
fn trunk_backward<T: Real>(
    layers: &[Linear<T>; 2],
    input: &Array2<T>,
    hidden1: &Array2<T>,
    hidden2: &Array2<T>,
    d_hidden2: Array2<T>,
) -> [Linear<T>; 2] {
    let one = T::one();
    let d_pre2 = d_hidden2 * &hidden2.mapv(|h| one - h * h);
    let second = Linear { weight: hidden1.t().dot(&d_pre2), bias: d_pre2.sum_axis(Axis(0)) };
    let d_pre1 = d_pre2.dot(&layers[1].weight.t()) * &hidden1.mapv(|h| one - h * h);
    let first = Linear { weight: input.t().dot(&d_pre1), bias: d_pre1.sum_axis(Axis(0)) };
    [first, second]
}

impl<T: Real> ForwardCache<T> {
    pub fn batch_len(&self) -> usize {
        self.input.nrows()
    }

    /// Distribution for row `i` of the batch.
    pub fn dist(&self, i: usize) -> MultiDiscreteDist {
        let logits: Vec<Vec<f64>> = self.logits.iter().map(|l| l.row(i).iter().map(|v| v.as_f64()).collect()).collect();
        MultiDiscreteDist::from_logits(&logits)
    }
}
