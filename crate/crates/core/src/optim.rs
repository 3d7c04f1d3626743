//! Adam over [`Params`].

use crate::model::{AdamState, Params};
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Adam {
    /// One bias-corrected Adam update of `params` with `grads`.
    pub fn step<T: Real>(&self, params: &mut Params<T>, grads: &Params<T>, state: &mut AdamState<T>) {
        state.step += 1;
        let t = state.step as i32;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let bias1 = one - T::from_f64(libm::pow(self.beta1, t as f64));
        let bias2 = one - T::from_f64(libm::pow(self.beta2, t as f64));
        let lr = T::from_f64(self.learning_rate);
        let eps = T::from_f64(self.epsilon);

        let groups = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(state.first.tensors_mut())
            .zip(state.second.tensors_mut());
        for (((p, g), m), v) in groups {
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut())
                .zip(v.as_mut_slice().iter_mut());
            for (((p, &g), m), v) in iter {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
