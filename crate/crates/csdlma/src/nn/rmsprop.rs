//! RMSProp: per-parameter moving average of squared gradients,
//! `acc <- rho * acc + (1 - rho) * g^2`, update
//! `theta <- theta - lr * g / sqrt(acc + eps)`.

#[derive(Debug, Clone)]
pub struct RmsProp {
    accumulator: Vec<f64>,
    learning_rate: f64,
    rho: f64,
    eps: f64,
}

impl RmsProp {
    pub fn new(num_params: usize, learning_rate: f64, rho: f64, eps: f64) -> RmsProp {
        assert!((0.0..=1.0).contains(&rho));
        RmsProp {
            accumulator: vec![0.0; num_params],
            learning_rate,
            rho,
            eps,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.accumulator.len());
        assert_eq!(grad.len(), self.accumulator.len());
        for ((p, acc), &g) in params.iter_mut().zip(&mut self.accumulator).zip(grad) {
            *acc = self.rho * *acc + (1.0 - self.rho) * g * g;
            *p -= self.learning_rate * g / (*acc + self.eps).sqrt();
        }
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }
}
