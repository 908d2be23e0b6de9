//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::diff_engine::ParamGrad;
use crate::error::{arg_err, EviError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize, config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) || !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return arg_err(format!("invalid Adam configuration {config:?}"));
        }
        if !(config.eps > 0.0) {
            return arg_err("Adam epsilon must be positive");
        }
        Ok(Self {
            config,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        })
    }

    pub fn with_defaults(param_count: usize) -> Self {
        Self::new(param_count, AdamConfig::default()).expect("defaults are valid")
    }

    /// One update of `params` in place. A non-finite gradient leaves state
    /// and parameters untouched and reports the step it would have been.
    pub fn step(&mut self, params: &mut [f64], grad: &ParamGrad) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return arg_err(format!(
                "Adam state has {} entries, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grad.len()
            ));
        }
        if !grad.is_finite() {
            return Err(EviError::Diverged {
                epoch: (self.t + 1) as usize,
                reason: "non-finite gradient".into(),
            });
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, m), v), &g) in params
            .iter_mut()
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
            .zip(grad.as_slice())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &ParamGrad) -> Result<()> {
    state.step(params, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_from_unit_gradient() {
        let mut s = AdamState::with_defaults(1);
        let mut theta = [0.0];
        s.step(&mut theta, &ParamGrad::from(vec![1.0])).unwrap();
        // m̂ = v̂ = 1 exactly, so the step is lr/(1 + ε)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-18, "{}", theta[0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut s = AdamState::with_defaults(3);
        let mut theta = [0.5, -1.0, 2.0];
        for _ in 0..50 {
            s.step(&mut theta, &ParamGrad::zeros(3)).unwrap();
        }
        assert_eq!(theta, [0.5, -1.0, 2.0]);
        assert_eq!(s.t, 50);
    }

    #[test]
    fn quadratic_descends() {
        // Reference trajectory for θ² from θ = 1 computed with
        // torch.optim.Adam (float64, default settings).
        let mut s = AdamState::with_defaults(1);
        let mut theta = [1.0];
        let mut first_below = None;
        for k in 1..=2500 {
            let g = ParamGrad::from(vec![2.0 * theta[0]]);
            s.step(&mut theta, &g).unwrap();
            if k == 2000 {
                assert!((theta[0] - 0.020662311203242627).abs() < 1e-12, "{}", theta[0]);
            }
            if first_below.is_none() && theta[0].abs() < 1e-2 {
                first_below = Some(k);
            }
        }
        assert_eq!(first_below, Some(2203));
        assert!(s.v.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn nan_gradient_reports_step() {
        let mut s = AdamState::with_defaults(2);
        let mut theta = [0.0, 0.0];
        s.step(&mut theta, &ParamGrad::from(vec![1.0, 1.0])).unwrap();
        let before = (s.clone(), theta);
        let err = s.step(&mut theta, &ParamGrad::from(vec![f64::NAN, 0.0])).unwrap_err();
        assert!(matches!(err, EviError::Diverged { epoch: 2, .. }));
        assert_eq!((s, theta), before);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut s = AdamState::with_defaults(2);
        assert!(s.step(&mut [0.0], &ParamGrad::zeros(1)).is_err());
    }
}
