use serde::{Deserialize, Serialize};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for one flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub clip: Option<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    /// Entries with `false` are never touched.
    trainable: Vec<bool>,
}

impl Adam {
    pub fn new(dim: usize, lr: f64, clip: Option<f64>) -> Self {
        Self {
            lr,
            clip,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            trainable: vec![true; dim],
        }
    }

    pub fn with_mask(mut self, trainable: Vec<bool>) -> Self {
        assert_eq!(trainable.len(), self.m.len(), "mask length");
        self.trainable = trainable;
        self
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter length");
        assert_eq!(grads.len(), self.m.len(), "gradient length");
        let scale = match self.clip {
            Some(c) => {
                let norm = grads
                    .iter()
                    .zip(&self.trainable)
                    .filter(|(_, &t)| t)
                    .map(|(g, _)| g * g)
                    .sum::<f64>()
                    .sqrt();
                if norm > c {
                    c / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            if !self.trainable[i] {
                continue;
            }
            let g = if scale == 1.0 { grads[i] } else { grads[i] * scale };
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}

/// One Adam update in functional form.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut Adam) {
    state.step(params, grads);
}
