use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::model::layers::SlotMut;
use crate::model::Module;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
}

/// Adam without weight decay. Moment buffers follow the module's parameter
/// visiting order, so one instance must always step the same module.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    first: Vec<ArrayD<f64>>,
    second: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, betas: (f64, f64)) -> Self {
        Adam {
            learning_rate,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step(&mut self, module: &mut dyn Module) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (lr, b1, b2, eps) = (self.learning_rate, self.beta1, self.beta2, self.eps);
        let mut idx = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        module.visit_mut("", &mut |_, slot| {
            let SlotMut::Param(p) = slot else { return };
            if first.len() <= idx {
                first.push(ArrayD::zeros(p.value.raw_dim()));
                second.push(ArrayD::zeros(p.value.raw_dim()));
            }
            let (m, v) = (&mut first[idx], &mut second[idx]);
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
            idx += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::layers::{Linear, Module};
    use ndarray::Array2;
    use rand::SeedableRng;

    #[test]
    fn first_step_moves_each_weight_by_learning_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut lin = Linear::new(2, 1, &mut rng);
        let before = lin.weight.value.clone();
        lin.zero_grad();
        let x = Array2::from_elem((1, 2), 1.0);
        lin.backward(x.view(), Array2::from_elem((1, 1), 3.0).view());
        let mut adam = Adam::new(0.01, (0.9, 0.999));
        adam.step(&mut lin);
        for (a, b) in before.iter().zip(lin.weight.value.iter()) {
            assert!(((a - b) - 0.01).abs() < 1e-9);
        }
    }
}
