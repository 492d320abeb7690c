//! Recurrent networks: LSTM and GRU cells, stacked layers with inverted
//! dropout, backpropagation through time, and RMSProp/Adam.
//!
//! LSTM step on `v = [h_{t-1}, x_t]`:
//!
//! ```text
//! i = sig(W_i v + b_i)   f = sig(W_f v + b_f)   o = sig(W_o v + b_o)
//! g = tanh(W_g v + b_g)  c_t = f*c + i*g        h_t = o*tanh(c_t)
//! ```
//!
//! GRU step:
//!
//! ```text
//! z = sig(W_z x + U_z h + b_z)   r = sig(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + U_h (r*h) + b_h)
//! h_t = (1 - z)*h + z*h~
//! ```

mod cells;
mod network;
mod optim;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};

pub use cells::{gru_step, lstm_step, sigmoid, CellState, GruLayerWeights, LstmLayerWeights};
pub use network::{dropout_mask, Layer, Mode, Network, Trace};
pub use optim::{adam_step, clip_global_norm, rmsprop_step, OptimizerKind, OptimizerState};
pub use tensor::Tensor;
pub use train::{train, train_samples, train_step, window_sample, BatchLoss, Sample, Trained};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("no training windows")]
    EmptyWindows,
    #[error("training diverged at epoch {epoch} (last finite loss {last_finite:?})")]
    Diverged { epoch: usize, last_finite: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lstm,
    Gru,
}

fn default_clip() -> Option<f64> {
    Some(5.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub cell: CellKind,
    pub layers: usize,
    pub hidden: usize,
    pub input_size: usize,
    pub output_size: usize,
    pub dropout: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm cap.
    #[serde(default = "default_clip")]
    pub clip_norm: Option<f64>,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let fail = |m: String| Err(NeuralError::Config(m));
        if self.layers == 0 || self.hidden == 0 || self.input_size == 0 || self.output_size == 0 {
            return fail(format!(
                "layers, hidden, input and output sizes must be positive: {}/{}/{}/{}",
                self.layers, self.hidden, self.input_size, self.output_size
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return fail(format!("clip norm {c} must be positive"));
            }
        }
        Ok(())
    }
}
