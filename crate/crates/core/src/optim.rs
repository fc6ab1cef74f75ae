//! Parameter update rules: plain gradient descent and Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{GradientSet, StackedLstm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub rule: UpdateRule,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
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

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            rule: UpdateRule::Adam,
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig { rule: UpdateRule::Sgd, ..Self::adam(learning_rate) }
    }
}

/// Optimizer hyperparameters plus per-parameter moment accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub step: u64,
    /// First moments, one array per parameter array (Adam only).
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &[&[f64]]) -> Self {
        let moments = || match config.rule {
            UpdateRule::Adam => params.iter().map(|p| vec![0.0; p.len()]).collect(),
            UpdateRule::Sgd => Vec::new(),
        };
        OptimizerState { config, step: 0, first_moment: moments(), second_moment: moments() }
    }

    pub fn for_network(config: OptimizerConfig, net: &StackedLstm) -> Self {
        Self::new(config, &net.param_arrays())
    }

    /// Applies one update in place. Non-finite gradients leave parameters
    /// untouched and report divergence.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::dims("parameter and gradient shapes differ"));
        }
        if self.config.rule == UpdateRule::Adam
            && (self.first_moment.len() != params.len()
                || self.first_moment.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()))
        {
            return Err(Error::dims("optimizer state does not match parameters"));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }

        let lr = self.config.learning_rate;
        self.step += 1;
        match self.config.rule {
            UpdateRule::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= lr * gi;
                    }
                }
            }
            UpdateRule::Adam => {
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
                let t = self.step as i32;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
                {
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = b1 * m[i] + (1.0 - b1) * gi;
                        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut StackedLstm, grads: &GradientSet) -> Result<()> {
        if !grads.is_congruent(net) {
            return Err(Error::dims("gradient set does not match network"));
        }
        let g = grads.arrays();
        self.step(&mut net.param_arrays_mut(), &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut p = vec![1.0];
        let mut st = OptimizerState::new(OptimizerConfig::sgd(0.1), &[&p]);
        st.step(&mut [&mut p], &[&[2.0]]).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // m̂ = g and v̂ = g² after bias correction, so Δ = lr·g/(|g| + ε)
        let g = 0.37;
        let lr = 0.01;
        let mut p = vec![0.5];
        let mut st = OptimizerState::new(OptimizerConfig::adam(lr), &[&p]);
        st.step(&mut [&mut p], &[&[g]]).unwrap();
        let m = 0.1 * g;
        let v = 0.001 * g * g;
        let expected = 0.5 - lr * (m / 0.1) / ((v / 0.001_f64).sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!(((0.5 - p[0]) - lr).abs() < 1e-7);

        // second step with the same gradient keeps |Δ| ≈ lr
        let before = p[0];
        st.step(&mut [&mut p], &[&[g]]).unwrap();
        let m2 = 0.9 * m + 0.1 * g;
        let v2 = 0.999 * v + 0.001 * g * g;
        let exp2 = before - lr * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999_f64.powi(2))).sqrt() + 1e-8);
        assert!((p[0] - exp2).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for cfg in [OptimizerConfig::sgd(0.5), OptimizerConfig::adam(0.5)] {
            let mut p = vec![1.5, -2.0];
            let mut st = OptimizerState::new(cfg, &[&p]);
            st.step(&mut [&mut p], &[&[0.0, 0.0]]).unwrap();
            assert_eq!(p, vec![1.5, -2.0]);
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut p = vec![1.0];
        let mut st = OptimizerState::new(OptimizerConfig::adam(0.1), &[&p]);
        let err = st.step(&mut [&mut p], &[&[f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("diverged"));
        assert_eq!(p[0], 1.0);
        assert!(st.step(&mut [&mut p], &[&[1.0, 2.0]]).is_err());
    }
}
