//! Adam optimizer with externally supplied learning rate.

use lltext_core::Scalar;

use crate::params::ParamSet;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        let m = params.iter().map(|(_, t)| Tensor::zeros(t.shape().to_vec())).collect();
        let v = params.iter().map(|(_, t)| Tensor::zeros(t.shape().to_vec())).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update. `grads` aligns with the parameter insertion order;
    /// `None` entries are treated as zero gradients.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Option<Tensor<T>>], lr: f64) {
        assert_eq!(grads.len(), params.len(), "gradient/parameter count mismatch");
        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let bc1 = T::of(1.0 - self.beta1.powi(t));
        let bc2 = T::of(1.0 - self.beta2.powi(t));
        let lr = T::of(lr);
        let eps = T::of(self.epsilon);
        for (i, (_, p)) in params.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            match &grads[i] {
                Some(g) => {
                    for k in 0..p.numel() {
                        let gk = g.data()[k];
                        let mk = b1 * m.data()[k] + (T::one() - b1) * gk;
                        let vk = b2 * v.data()[k] + (T::one() - b2) * gk * gk;
                        m.data_mut()[k] = mk;
                        v.data_mut()[k] = vk;
                        let m_hat = mk / bc1;
                        let v_hat = vk / bc2;
                        p.data_mut()[k] = p.data()[k] - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
                None => {
                    // Zero gradient: moments decay, parameters still move if
                    // momentum is nonzero.
                    for k in 0..p.numel() {
                        let mk = b1 * m.data()[k];
                        let vk = b2 * v.data()[k];
                        m.data_mut()[k] = mk;
                        v.data_mut()[k] = vk;
                        let m_hat = mk / bc1;
                        let v_hat = vk / bc2;
                        p.data_mut()[k] = p.data()[k] - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }

    /// Optimizer state access for checkpointing, aligned with parameter order.
    pub fn state(&self) -> (u64, &[Tensor<T>], &[Tensor<T>]) {
        (self.step_count, &self.m, &self.v)
    }

    pub fn restore(&mut self, step_count: u64, m: Vec<Tensor<T>>, v: Vec<Tensor<T>>) {
        assert_eq!(m.len(), self.m.len(), "moment count mismatch on restore");
        assert_eq!(v.len(), self.v.len(), "moment count mismatch on restore");
        self.step_count = step_count;
        self.m = m;
        self.v = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_on_quadratic() {
        // Minimize (p - 3)^2 elementwise.
        let mut params = ParamSet::new();
        params.insert("p", Tensor::new(vec![1], vec![0.0f64]));
        let mut adam = Adam::new(&params);
        for _ in 0..4000 {
            let p = params.get("p").data()[0];
            let grad = Tensor::new(vec![1], vec![2.0 * (p - 3.0)]);
            adam.step(&mut params, &[Some(grad)], 1e-2);
        }
        assert!((params.get("p").data()[0] - 3.0).abs() < 1e-3);
    }
}
