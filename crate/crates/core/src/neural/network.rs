//! Stacked recurrent network with a dense output head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cells::{gru_backward, gru_forward, lstm_backward, lstm_forward, CellState, GruCache, GruLayerWeights, LstmCache, LstmLayerWeights};
use super::tensor::Tensor;
use super::{CellKind, NetworkConfig, NeuralError};
use crate::seed::tagged_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cell", rename_all = "snake_case")]
pub enum Layer {
    Lstm(LstmLayerWeights),
    Gru(GruLayerWeights),
}

impl Layer {
    fn tensors(&self) -> Vec<&Tensor> {
        match self {
            Layer::Lstm(w) => w.tensors().to_vec(),
            Layer::Gru(w) => w.tensors().to_vec(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Lstm(w) => w.tensors_mut().into_iter().collect(),
            Layer::Gru(w) => w.tensors_mut().into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone)]
enum StepCache {
    Lstm(LstmCache),
    Gru(GruCache),
}

/// Activations kept by a forward pass for [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `caches[t][l]`.
    caches: Vec<Vec<StepCache>>,
    /// `masks[t][l]`, empty when dropout is inactive.
    masks: Vec<Vec<Vec<f64>>>,
    /// Dropped-out top-layer output at each step, the input to the head.
    top: Vec<Vec<f64>>,
    /// Head output at each step.
    pub outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn last_output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub layers: Vec<Layer>,
    /// `(output_size, hidden)`.
    pub w_out: Tensor,
    pub b_out: Tensor,
}

impl Network {
    /// Seeded uniform `±1/sqrt(fan_in)` initialization.
    pub fn init(config: &NetworkConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = tagged_rng(config.seed, "init");
        let layers = (0..config.layers)
            .map(|l| {
                let input = if l == 0 { config.input_size } else { config.hidden };
                match config.cell {
                    CellKind::Lstm => Layer::Lstm(LstmLayerWeights::init(input, config.hidden, &mut rng)),
                    CellKind::Gru => Layer::Gru(GruLayerWeights::init(input, config.hidden, &mut rng)),
                }
            })
            .collect();
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let mut w_out = Tensor::zeros(&[config.output_size, config.hidden]);
        let mut b_out = Tensor::zeros(&[config.output_size]);
        for v in w_out.data.iter_mut().chain(b_out.data.iter_mut()) {
            *v = rng.random_range(-bound..bound);
        }
        Ok(Self {
            config: config.clone(),
            layers,
            w_out,
            b_out,
        })
    }

    /// Every parameter set to zero.
    pub fn zeros(config: &NetworkConfig) -> Result<Self, NeuralError> {
        let mut net = Self::init(config)?;
        net.for_each_tensor_mut(|t| t.data.fill(0.0));
        Ok(net)
    }

    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.for_each_tensor_mut(|t| t.data.fill(0.0));
        g
    }

    /// Parameters in a fixed order: layers bottom-up, then the head.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.layers.iter().flat_map(Layer::tensors).collect();
        out.push(&self.w_out);
        out.push(&self.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.layers.iter_mut().flat_map(Layer::tensors_mut).collect();
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut Tensor)) {
        for t in self.tensors_mut() {
            f(t);
        }
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Checks layer shapes against the config.
    pub fn validate(&self) -> Result<(), NeuralError> {
        let c = &self.config;
        c.validate()?;
        if self.layers.len() != c.layers {
            return Err(NeuralError::Shape(format!("{} layers, config says {}", self.layers.len(), c.layers)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { c.input_size } else { c.hidden };
            let (got_in, got_hidden) = match (layer, c.cell) {
                (Layer::Lstm(w), CellKind::Lstm) => {
                    w.validate()?;
                    (w.input(), w.hidden())
                }
                (Layer::Gru(w), CellKind::Gru) => {
                    w.validate()?;
                    (w.input(), w.hidden())
                }
                _ => return Err(NeuralError::Shape(format!("layer {l} cell does not match config"))),
            };
            if (got_in, got_hidden) != (input, c.hidden) {
                return Err(NeuralError::Shape(format!(
                    "layer {l} is {got_in}->{got_hidden}, expected {input}->{}",
                    c.hidden
                )));
            }
        }
        if self.w_out.shape != [c.output_size, c.hidden] || self.b_out.shape != [c.output_size] {
            return Err(NeuralError::Shape("output layer shape does not match config".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Vec<CellState> {
        let h = vec![0.0; self.config.hidden];
        let c = match self.config.cell {
            CellKind::Lstm => h.clone(),
            CellKind::Gru => Vec::new(),
        };
        vec![CellState { h, c }; self.layers.len()]
    }

    fn head(&self, top: &[f64]) -> Vec<f64> {
        let mut y = self.b_out.data.clone();
        self.w_out.matvec_acc(top, &mut y);
        y
    }

    /// Inference step on carried state; returns the head output.
    pub fn step(&self, states: &mut [CellState], x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if x.len() != self.config.input_size {
            return Err(NeuralError::Shape(format!(
                "input has length {}, expected {}",
                x.len(),
                self.config.input_size
            )));
        }
        let mut input = x.to_vec();
        for (layer, state) in self.layers.iter().zip(states.iter_mut()) {
            match layer {
                Layer::Lstm(w) => {
                    let (h, c, _) = lstm_forward(&input, &state.h, &state.c, w);
                    state.h = h;
                    state.c = c;
                }
                Layer::Gru(w) => state.h = gru_forward(&input, &state.h, w).0,
            }
            input.clone_from(&state.h);
        }
        Ok(self.head(&input))
    }

    /// Runs the stack over `inputs` (one vector per time step) from a zero
    /// state. Dropout is applied to every recurrent layer's output in
    /// training mode when `rng` is given and the rate is positive.
    pub fn forward<R: Rng>(&self, inputs: &[Vec<f64>], mode: Mode, mut rng: Option<&mut R>) -> Result<Trace, NeuralError> {
        if inputs.is_empty() {
            return Err(NeuralError::Shape("empty input sequence".into()));
        }
        let rate = self.config.dropout;
        let use_dropout = mode == Mode::Training && rate > 0.0 && rng.is_some();
        let mut states = self.initial_state();
        let mut trace = Trace {
            caches: Vec::with_capacity(inputs.len()),
            masks: Vec::with_capacity(inputs.len()),
            top: Vec::with_capacity(inputs.len()),
            outputs: Vec::with_capacity(inputs.len()),
        };
        for x in inputs {
            if x.len() != self.config.input_size {
                return Err(NeuralError::Shape(format!(
                    "input has length {}, expected {}",
                    x.len(),
                    self.config.input_size
                )));
            }
            let mut caches = Vec::with_capacity(self.layers.len());
            let mut masks = Vec::new();
            let mut input = x.clone();
            for (layer, state) in self.layers.iter().zip(states.iter_mut()) {
                match layer {
                    Layer::Lstm(w) => {
                        let (h, c, cache) = lstm_forward(&input, &state.h, &state.c, w);
                        state.h = h;
                        state.c = c;
                        caches.push(StepCache::Lstm(cache));
                    }
                    Layer::Gru(w) => {
                        let (h, cache) = gru_forward(&input, &state.h, w);
                        state.h = h;
                        caches.push(StepCache::Gru(cache));
                    }
                }
                input.clone_from(&state.h);
                if use_dropout {
                    let r = rng.as_deref_mut().expect("checked above");
                    let mask = dropout_mask(input.len(), rate, r);
                    input.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    masks.push(mask);
                }
            }
            trace.outputs.push(self.head(&input));
            trace.top.push(input);
            trace.caches.push(caches);
            trace.masks.push(masks);
        }
        Ok(trace)
    }

    /// Inference-mode prediction: the head output after the last step.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, NeuralError> {
        let trace = self.forward::<rand_chacha::ChaCha8Rng>(inputs, Mode::Inference, None)?;
        Ok(trace.last_output().to_vec())
    }

    /// Backpropagation through time. `d_outputs[t]` is the loss gradient with
    /// respect to the head output at step `t` (`None` where the loss does not
    /// look). Gradients are added into `grad`.
    pub fn backward(&self, trace: &Trace, d_outputs: &[Option<Vec<f64>>], grad: &mut Network) -> Result<(), NeuralError> {
        let steps = trace.caches.len();
        if d_outputs.len() != steps {
            return Err(NeuralError::Shape(format!(
                "{} output gradients for {steps} steps",
                d_outputs.len()
            )));
        }
        let hidden = self.config.hidden;
        let n_layers = self.layers.len();
        let mut dh_next = vec![vec![0.0; hidden]; n_layers];
        let mut dc_next = vec![vec![0.0; hidden]; n_layers];
        for t in (0..steps).rev() {
            let mut from_above = vec![0.0; hidden];
            if let Some(dy) = &d_outputs[t] {
                if dy.len() != self.config.output_size {
                    return Err(NeuralError::Shape(format!(
                        "output gradient has length {}, expected {}",
                        dy.len(),
                        self.config.output_size
                    )));
                }
                grad.w_out.add_outer(dy, &trace.top[t]);
                grad.b_out.add_assign(dy);
                self.w_out.matvec_t_acc(dy, &mut from_above);
            }
            for l in (0..n_layers).rev() {
                if let Some(mask) = trace.masks[t].get(l) {
                    from_above.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
                }
                let dh: Vec<f64> = from_above.iter().zip(&dh_next[l]).map(|(a, b)| a + b).collect();
                let dx = match (&self.layers[l], &mut grad.layers[l], &trace.caches[t][l]) {
                    (Layer::Lstm(w), Layer::Lstm(g), StepCache::Lstm(cache)) => {
                        let (dx, dh_prev, dc_prev) = lstm_backward(cache, &dh, &dc_next[l], w, g);
                        dh_next[l] = dh_prev;
                        dc_next[l] = dc_prev;
                        dx
                    }
                    (Layer::Gru(w), Layer::Gru(g), StepCache::Gru(cache)) => {
                        let (dx, dh_prev) = gru_backward(cache, &dh, w, g);
                        dh_next[l] = dh_prev;
                        dx
                    }
                    _ => return Err(NeuralError::Shape("gradient buffer does not match network".into())),
                };
                from_above = dx;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::OptimizerKind;
    use crate::seed::rng;

    fn config(cell: CellKind, dropout: f64) -> NetworkConfig {
        NetworkConfig {
            cell,
            layers: 2,
            hidden: 3,
            input_size: 2,
            output_size: 1,
            dropout,
            seed: 5,
            learning_rate: 0.01,
            epochs: 1,
            batch_size: None,
            optimizer: OptimizerKind::Adam,
            clip_norm: Some(5.0),
        }
    }

    fn seq() -> Vec<Vec<f64>> {
        vec![vec![0.1, -0.4], vec![0.7, 0.2], vec![-0.3, 0.9]]
    }

    #[test]
    fn zero_network_predicts_zero() {
        for cell in [CellKind::Lstm, CellKind::Gru] {
            let net = Network::zeros(&config(cell, 0.0)).unwrap();
            assert_eq!(net.predict(&seq()).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn dropout_zero_matches_inference() {
        let net = Network::init(&config(CellKind::Lstm, 0.0)).unwrap();
        let mut r = rng(1);
        let train = net.forward(&seq(), Mode::Training, Some(&mut r)).unwrap();
        assert_eq!(train.last_output(), net.predict(&seq()).unwrap().as_slice());
        assert_eq!(net.predict(&seq()).unwrap(), net.predict(&seq()).unwrap());
    }

    #[test]
    fn step_matches_forward() {
        let net = Network::init(&config(CellKind::Gru, 0.0)).unwrap();
        let mut states = net.initial_state();
        let mut last = Vec::new();
        for x in seq() {
            last = net.step(&mut states, &x).unwrap();
        }
        assert_eq!(last, net.predict(&seq()).unwrap());
    }

    #[test]
    fn gradients_are_linear_in_the_output_gradient() {
        let net = Network::init(&config(CellKind::Lstm, 0.3)).unwrap();
        let mut r = rng(3);
        let trace = net.forward(&seq(), Mode::Training, Some(&mut r)).unwrap();
        let mut zero = net.zeros_like();
        net.backward(&trace, &[None, Some(vec![0.0]), Some(vec![0.0])], &mut zero).unwrap();
        assert!(zero.tensors().iter().all(|t| t.data.iter().all(|v| *v == 0.0)));
        let mut g1 = net.zeros_like();
        let mut g2 = net.zeros_like();
        net.backward(&trace, &[None, None, Some(vec![0.75])], &mut g1).unwrap();
        net.backward(&trace, &[None, None, Some(vec![1.5])], &mut g2).unwrap();
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dropout_mask_preserves_expectation() {
        let mut r = rng(11);
        for rate in [0.2, 0.5] {
            let m = dropout_mask(100_000, rate, &mut r);
            let mean = m.iter().sum::<f64>() / m.len() as f64;
            assert!((mean - 1.0).abs() < 0.02, "rate {rate}: {mean}");
        }
    }

    #[test]
    fn rejects_bad_input_width() {
        let net = Network::init(&config(CellKind::Lstm, 0.0)).unwrap();
        assert!(net.predict(&[vec![1.0]]).is_err());
        assert!(net.predict(&[]).is_err());
    }
}
