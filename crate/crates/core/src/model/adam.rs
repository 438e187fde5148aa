//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::cnn::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[Param], config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

/// One Adam update with learning rate `lr`.
pub fn adam_step(params: &mut [Param], grads: &[Vec<f64>], state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Dimension(format!(
            "{} parameters, {} gradients, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::Dimension(format!("gradient shape mismatch for {}", p.name)));
        }
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((x, &g), m), v) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Vec<Param> {
        vec![Param {
            name: "x".into(),
            shape: vec![1],
            data: vec![v],
        }]
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = scalar(1.5);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &[vec![0.0]], &mut s, 0.1).unwrap();
        assert_eq!(p[0].data[0], 1.5);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [-3.0, 0.02, 7.0] {
            let mut p = scalar(0.0);
            let mut s = AdamState::new(&p, AdamConfig::default());
            adam_step(&mut p, &[vec![g]], &mut s, 0.01).unwrap();
            let want = -0.01 * g.signum() / (1.0 + 1e-8 / g.abs());
            assert!((p[0].data[0] - want).abs() < 1e-15, "{g}");
        }
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        // Hand-rolled recurrence, written out term by term.
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.05f64);
        let (g1, g2) = (0.4f64, -1.3f64);
        let mut x = 2.0f64;
        let m1 = (1.0 - b1) * g1;
        let v1 = (1.0 - b2) * g1 * g1;
        x -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g2;
        let v2 = b2 * v1 + (1.0 - b2) * g2 * g2;
        x -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);

        let mut p = scalar(2.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &[vec![g1]], &mut s, lr).unwrap();
        adam_step(&mut p, &[vec![g2]], &mut s, lr).unwrap();
        assert!((p[0].data[0] - x).abs() < 1e-14, "{} vs {x}", p[0].data[0]);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &[vec![0.0, 1.0]], &mut s, 0.1).is_err());
        assert!(adam_step(&mut p, &[], &mut s, 0.1).is_err());
    }
}
