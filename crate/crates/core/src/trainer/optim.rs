//! Adam optimizer with standard coefficients.

use ndarray::Array2;

use crate::network::ParamSet;

pub struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: &ParamSet) -> Self {
        let m = (0..params.len())
            .map(|i| Array2::zeros(params.value(i).dim()))
            .collect();
        let v = (0..params.len())
            .map(|i| Array2::zeros(params.value(i).dim()))
            .collect();
        Adam {
            m,
            v,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update; `grads[i]` aligns with parameter i (None = zero grad).
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Option<Array2<f64>>], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let Some(grad) = &grads[i] else { continue };
            for ((m, v), &g) in self.m[i]
                .iter_mut()
                .zip(self.v[i].iter_mut())
                .zip(grad.iter())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            }
            let value = params.value_mut(i);
            for ((p, &m), &v) in value.iter_mut().zip(self.m[i].iter()).zip(self.v[i].iter()) {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
