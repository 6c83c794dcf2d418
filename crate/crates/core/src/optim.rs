use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, cfg: AdamConfig) -> Self {
        Self { lr, cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let AdamConfig { beta1: b1, beta2: b2, eps } = self.cfg;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + eps);
        }
    }

    /// Makes room for `count` new parameters at position `at` with fresh
    /// moments.
    pub fn insert(&mut self, at: usize, count: usize) {
        self.m.splice(at..at, std::iter::repeat_n(0.0, count));
        self.v.splice(at..at, std::iter::repeat_n(0.0, count));
    }
}
