//! RMSProp and Adam.

use serde::{Deserialize, Serialize};

use super::network::Network;

pub const RMSPROP_RHO: f64 = 0.9;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Rmsprop,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rmsprop" => Ok(Self::Rmsprop),
            "adam" => Ok(Self::Adam),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

/// `s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/sqrt(s+eps)`.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], s: &mut [f64], lr: f64) {
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(s.iter_mut()) {
        *s = RMSPROP_RHO * *s + (1.0 - RMSPROP_RHO) * g * g;
        *p -= lr * g / (*s + EPSILON).sqrt();
    }
}

/// Bias-corrected Adam update; `t` is the 1-based step count.
pub fn adam_step(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64) {
    let c1 = 1.0 - ADAM_BETA1.powf(t as f64);
    let c2 = 1.0 - ADAM_BETA2.powf(t as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
}

/// Accumulators shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// RMSProp's `s`, or Adam's `m`.
    pub first: Vec<Vec<f64>>,
    /// Adam's `v`; unused by RMSProp.
    pub second: Vec<Vec<f64>>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            kind,
            learning_rate,
            first: zeros.clone(),
            second: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Network) {
        self.t += 1;
        let lr = self.learning_rate;
        for (i, (p, g)) in net.tensors_mut().into_iter().zip(grads.tensors()).enumerate() {
            match self.kind {
                OptimizerKind::Rmsprop => rmsprop_step(&mut p.data, &g.data, &mut self.first[i], lr),
                OptimizerKind::Adam => {
                    adam_step(&mut p.data, &g.data, &mut self.first[i], &mut self.second[i], self.t, lr)
                }
            }
        }
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut Network, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for t in grads.tensors_mut() {
            t.scale(k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsprop_first_step() {
        let mut p = [1.0, 1.0];
        let mut s = [0.0, 0.0];
        rmsprop_step(&mut p, &[1.0, 1.0], &mut s, 0.01);
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert!((1.0 - p[0] - 0.01 / (0.1f64 + 1e-8).sqrt()).abs() < 1e-15);
        assert!((1.0 - p[0] - 0.0316228).abs() < 1e-7);
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn rmsprop_zero_gradient_decays_state() {
        let mut p = [0.3];
        let mut s = [2.0];
        rmsprop_step(&mut p, &[0.0], &mut s, 0.1);
        assert_eq!(p, [0.3]);
        assert!((s[0] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step() {
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        let mut p = [0.0, 0.0];
        adam_step(&mut p, &[1.0, -3.0], &mut m, &mut v, 1, 0.001);
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!(p[0] < 0.0 && p[1] > 0.0);
        assert!((p[1] - 0.001).abs() < 1e-10);
    }

    #[test]
    fn adam_zero_gradients_never_move() {
        let (mut m, mut v) = ([0.0], [0.0]);
        let mut p = [0.7];
        for t in 1..=50 {
            adam_step(&mut p, &[0.0], &mut m, &mut v, t, 0.01);
        }
        assert_eq!(p, [0.7]);
    }
}
