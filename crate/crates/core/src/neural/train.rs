//! Mini-batch training with MSE loss.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Mode, Network};
use super::optim::{clip_global_norm, OptimizerState};
use super::{NetworkConfig, NeuralError};
use crate::seed::tagged_rng;
use crate::timeseries::{Window, WindowSet};

/// One training example: an input per time step and optional targets for
/// the head output at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Option<Vec<f64>>>,
}

impl Sample {
    /// A target only after the last step.
    pub fn last_step(inputs: Vec<Vec<f64>>, target: Vec<f64>) -> Self {
        let mut targets = vec![None; inputs.len()];
        *targets.last_mut().expect("non-empty inputs") = Some(target);
        Self { inputs, targets }
    }
}

/// Lays a window out for a network: a single step holding the lookback
/// newest-first when `input_size` equals the lookback, otherwise one scalar
/// per step, oldest first.
pub fn window_sample(config: &NetworkConfig, window: &Window) -> Result<Sample, NeuralError> {
    let lookback = window.input.len();
    if window.target.len() != config.output_size {
        return Err(NeuralError::Shape(format!(
            "window horizon {} does not match output size {}",
            window.target.len(),
            config.output_size
        )));
    }
    let inputs = if config.input_size == lookback {
        vec![window.input.iter().rev().copied().collect()]
    } else if config.input_size == 1 {
        window.input.iter().map(|&v| vec![v]).collect()
    } else {
        return Err(NeuralError::Shape(format!(
            "input size {} fits neither a flat lookback of {lookback} nor a scalar sequence",
            config.input_size
        )));
    };
    Ok(Sample::last_step(inputs, window.target.clone()))
}

/// Loss of one batch: `total` is the sum of `per_target`, each entry being
/// the batch-mean squared error of the k-th target slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub total: f64,
    pub per_target: Vec<f64>,
}

/// Forward, backward, clip and update on one batch. The reported loss is
/// from the forward pass before the update.
pub fn train_step(
    net: &mut Network,
    opt: &mut OptimizerState,
    batch: &[&Sample],
    dropout_rng: &mut ChaCha8Rng,
) -> Result<BatchLoss, NeuralError> {
    let b = batch.len() as f64;
    let mut grads = net.zeros_like();
    let mut per_target: Vec<f64> = Vec::new();
    for sample in batch {
        let trace = net.forward(&sample.inputs, Mode::Training, Some(&mut *dropout_rng))?;
        let mut d_out = Vec::with_capacity(sample.targets.len());
        let mut slot = 0;
        for (t, target) in sample.targets.iter().enumerate() {
            let Some(y) = target else {
                d_out.push(None);
                continue;
            };
            let yhat = &trace.outputs[t];
            let dims = y.len() as f64;
            let mut se = 0.0;
            let mut d = Vec::with_capacity(y.len());
            for (p, y) in yhat.iter().zip(y) {
                se += (p - y) * (p - y);
                d.push(2.0 * (p - y) / (dims * b));
            }
            if per_target.len() <= slot {
                per_target.push(0.0);
            }
            per_target[slot] += se / dims / b;
            slot += 1;
            d_out.push(Some(d));
        }
        net.backward(&trace, &d_out, &mut grads)?;
    }
    if let Some(max) = net.config.clip_norm {
        clip_global_norm(&mut grads, max);
    }
    opt.step(net, &grads);
    Ok(BatchLoss {
        total: per_target.iter().sum(),
        per_target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub network: Network,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

/// Trains a freshly initialized network on a window set.
pub fn train(config: &NetworkConfig, windows: &WindowSet) -> Result<Trained, NeuralError> {
    let samples = windows
        .pairs
        .iter()
        .map(|w| window_sample(config, w))
        .collect::<Result<Vec<_>, _>>()?;
    train_samples(Network::init(config)?, &samples)
}

/// Trains `network` (using its own config) on prepared samples.
pub fn train_samples(mut network: Network, samples: &[Sample]) -> Result<Trained, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyWindows);
    }
    network.validate()?;
    let config = network.config.clone();
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, &network);
    let mut shuffle_rng = tagged_rng(config.seed, "shuffle");
    let mut dropout_rng = tagged_rng(config.seed, "dropout");
    let batch_size = match config.batch_size {
        Some(b) if b > 0 => b.min(samples.len()),
        _ => samples.len(),
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let loss = train_step(&mut network, &mut opt, &batch, &mut dropout_rng)?;
            sum += loss.total * batch.len() as f64;
        }
        let loss = sum / samples.len() as f64;
        if !loss.is_finite() || !network.is_finite() {
            return Err(NeuralError::Diverged {
                epoch,
                last_finite: history.last().copied(),
            });
        }
        history.push(loss);
    }
    Ok(Trained { network, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{CellKind, OptimizerKind};
    use crate::timeseries::make_windows;

    fn config(cell: CellKind, input_size: usize) -> NetworkConfig {
        NetworkConfig {
            cell,
            layers: 1,
            hidden: 16,
            input_size,
            output_size: 1,
            dropout: 0.0,
            seed: 3,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: None,
            optimizer: OptimizerKind::Adam,
            clip_norm: Some(5.0),
        }
    }

    fn sine(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * i as f64 / 20.0).sin())
            .collect()
    }

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn learns_noiseless_sine() {
        let y = sine(120);
        let windows = make_windows(&y, 14, 1).unwrap();
        for cell in [CellKind::Lstm, CellKind::Gru] {
            let out = train(&config(cell, 14), &windows).unwrap();
            let last = *out.history.last().unwrap();
            assert!(last < 0.01 * variance(&y), "{cell:?}: {last} vs {}", variance(&y));
        }
    }

    #[test]
    fn zero_targets_with_zero_head_have_zero_loss() {
        let cfg = NetworkConfig {
            epochs: 1,
            ..config(CellKind::Lstm, 1)
        };
        let mut net = Network::init(&cfg).unwrap();
        net.w_out.data.fill(0.0);
        net.b_out.data.fill(0.0);
        let windows = make_windows(&[0.0; 10], 3, 1).unwrap();
        let samples: Vec<Sample> = windows.pairs.iter().map(|w| window_sample(&cfg, w).unwrap()).collect();
        let out = train_samples(net, &samples).unwrap();
        assert_eq!(out.history, vec![0.0]);
    }

    #[test]
    fn training_is_deterministic() {
        let y = sine(60);
        let windows = make_windows(&y, 14, 1).unwrap();
        let cfg = NetworkConfig {
            epochs: 5,
            dropout: 0.2,
            batch_size: Some(16),
            layers: 2,
            ..config(CellKind::Gru, 14)
        };
        assert_eq!(train(&cfg, &windows).unwrap(), train(&cfg, &windows).unwrap());
    }

    #[test]
    fn divergence_reports_epoch() {
        let windows = make_windows(&[1e300, -1e300, 1e300, -1e300, 1e300], 1, 1).unwrap();
        let cfg = NetworkConfig {
            epochs: 3,
            clip_norm: None,
            ..config(CellKind::Lstm, 1)
        };
        match train(&cfg, &windows) {
            Err(NeuralError::Diverged { epoch: 0, last_finite: None }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_windows_are_newest_first() {
        let w = Window {
            input: vec![1.0, 2.0, 3.0],
            target: vec![4.0],
        };
        let s = window_sample(&config(CellKind::Lstm, 3), &w).unwrap();
        assert_eq!(s.inputs, vec![vec![3.0, 2.0, 1.0]]);
        let s = window_sample(&config(CellKind::Lstm, 1), &w).unwrap();
        assert_eq!(s.inputs.len(), 3);
        assert_eq!(s.targets, vec![None, None, Some(vec![4.0])]);
        assert!(window_sample(&config(CellKind::Lstm, 2), &w).is_err());
    }
}
