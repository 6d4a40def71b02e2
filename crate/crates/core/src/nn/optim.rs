use super::params::ParamStore;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// One bias-corrected update of every trainable parameter from its gradient.
    pub fn step(&mut self, params: &mut ParamStore) {
        if self.m.is_empty() {
            for p in params.iter_mut() {
                self.m.push(vec![0.0; p.value.numel()]);
                self.v.push(vec![0.0; p.value.numel()]);
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (i, p) in params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let grad = p.grad.data().to_vec();
            for (k, (w, g)) in p.value.data_mut().iter_mut().zip(grad).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                *w -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = ParamStore::new();
        let id = p.add("w", Tensor::new(vec![2], vec![1.0, 1.0]).unwrap());
        p.get_mut(id).grad = Tensor::new(vec![2], vec![3.0, -0.5]).unwrap();
        let mut opt = Adam::new(0.01);
        opt.step(&mut p);
        let w = p.value(id).data();
        assert!((w[0] - 0.99).abs() < 1e-9);
        assert!((w[1] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let mut p = ParamStore::new();
        let id = p.add("w", Tensor::full(&[1], 2.0));
        p.set_trainable(id, false);
        p.get_mut(id).grad = Tensor::full(&[1], 1.0);
        Adam::new(0.1).step(&mut p);
        assert_eq!(p.value(id).data(), &[2.0]);
    }
}
