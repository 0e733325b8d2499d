use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

/// Optimizer state over a list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    learning_rate: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: i32,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, learning_rate: f64, shapes: &[usize]) -> Self {
        let (first, second) = match config {
            OptimizerConfig::Sgd => (Vec::new(), Vec::new()),
            OptimizerConfig::Adam { .. } => (
                shapes.iter().map(|&n| vec![0.0; n]).collect(),
                shapes.iter().map(|&n| vec![0.0; n]).collect(),
            ),
        };
        Optimizer {
            config,
            learning_rate,
            first,
            second,
            steps: 0,
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        self.steps += 1;
        let lr = self.learning_rate;
        match self.config {
            OptimizerConfig::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (x, d) in p.iter_mut().zip(g) {
                        *x -= lr * d;
                    }
                }
            }
            OptimizerConfig::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                for (t, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    let (m, v) = (&mut self.first[t], &mut self.second[t]);
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}
