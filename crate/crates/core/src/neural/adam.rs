use super::net::{Gradients, PolicyNet};
use super::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction. Moments have the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub m: PolicyNet<T>,
    pub v: PolicyNet<T>,
    /// Number of completed steps.
    pub t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &PolicyNet<T>) -> Self {
        let zeros = params.zeros_like();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn step(&mut self, params: &mut PolicyNet<T>, grads: &Gradients<T>, lr: f64) {
        self.t += 1;
        let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
        let (one, eps) = (T::one(), T::of(ADAM_EPS));
        self.m.zip_apply(grads, |m, g| *m = b1 * *m + (one - b1) * g);
        self.v.zip_apply(grads, |v, g| *v = b2 * *v + (one - b2) * g * g);
        let step = T::of(lr);
        let c1 = T::of(1.0 - ADAM_BETA1.powf(self.t as f64));
        let c2 = T::of(1.0 - ADAM_BETA2.powf(self.t as f64));
        let mut update = self.m.clone();
        update.zip_apply(&self.v, |m, v| *m = step * (*m / c1) / ((v / c2).sqrt() + eps));
        params.zip_apply(&update, |p, u| *p -= u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> PolicyNet<f64> {
        PolicyNet::init(4, 5, &[2, 2, 2, 4], &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = net();
        let before = p.clone();
        let mut adam = Adam::new(&p);
        let zero = PolicyNet::zeros(4, 5, &[2, 2, 2, 4]);
        adam.step(&mut p, &zero, 1e-3);
        assert_eq!(p, before);
        assert!(adam.m.flat().iter().chain(adam.v.flat().iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_is_a_signed_lr_step() {
        let mut p = net();
        let before = p.flat();
        let mut adam = Adam::new(&p);
        let mut g = PolicyNet::zeros(4, 5, &[2, 2, 2, 4]);
        let grads: Vec<f64> = (0..g.num_params()).map(|i| (i as f64 - 40.0) * 0.37 + 0.01).collect();
        g.set_flat(&grads);
        let lr = 5e-4;
        adam.step(&mut p, &g, lr);
        // Closed form after one step: lr * g / (|g| + eps).
        for ((a, b), gi) in p.flat().iter().zip(&before).zip(&grads) {
            let expected = b - lr * gi / (gi.abs() + ADAM_EPS);
            assert!((a - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic() {
        let mut g = PolicyNet::zeros(4, 5, &[2, 2, 2, 4]);
        let n = g.num_params();
        g.set_flat(&(0..n).map(|i| (i as f64).sin()).collect::<Vec<_>>());
        let (mut a, mut b) = (net(), net());
        let (mut oa, mut ob) = (Adam::new(&a), Adam::new(&b));
        for _ in 0..3 {
            oa.step(&mut a, &g, 1e-3);
            ob.step(&mut b, &g, 1e-3);
        }
        assert_eq!(a, b);
    }
}
