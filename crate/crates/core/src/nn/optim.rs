use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::math::sqrt;

/// Adam with decoupled weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        Self::with_hyper(store, 5e-4, 0.9, 0.999, 1e-8, 1e-5)
    }

    pub fn with_hyper(store: &ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        let zeros = || store.iter().map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols())).collect::<Vec<_>>();
        Self { lr, beta1, beta2, eps, weight_decay, step: 0, m: zeros(), v: zeros() }
    }

    /// Applies one update from the gradients stored in `store`.
    pub fn update(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - crate::math::powi(self.beta1, t);
        let c2 = 1.0 - crate::math::powi(self.beta2, t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.data();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (k, x) in p.value.data_mut().iter_mut().enumerate() {
                *x -= self.lr * self.weight_decay * *x;
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                *x -= self.lr * mh / (sqrt(vh) + self.eps);
            }
        }
    }
}
