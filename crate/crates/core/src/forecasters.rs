//! The five forecaster kinds behind one fit/predict contract, plus the
//! bundled hyperparameter presets.
//!
//! Neural kinds train on min-max scaled values (scaler fit on the training
//! half) and predict on the original scale. SARIMA works on the original
//! scale directly and carries an identity scaler.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::Leaning;
use crate::neural::{self, CellKind, Network, NetworkConfig, NeuralError, OptimizerKind, Sample, Trained};
use crate::sarima::{self, FitOptions, GridSpec, OrderRange, SarimaError, SarimaFit, SarimaSpec};
use crate::seed::derive;
use crate::timeseries::{make_windows, ScalerState, SeriesError, SplitPair, Window, WindowSet};

pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error("{kind} needs at least {needed} points, got {got}")]
    TooShort { kind: ForecasterKind, needed: usize, got: usize },
    #[error("{kind} expects {expected} input values, got {got}")]
    InputLength { kind: ForecasterKind, expected: usize, got: usize },
    #[error("multistep training needs lookback 14 and horizon 5, got {lookback} and {horizon}")]
    Horizon { lookback: usize, horizon: usize },
    #[error("settings do not fit {kind}: {detail}")]
    Settings { kind: ForecasterKind, detail: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Sarima(#[from] SarimaError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

type Result<T, E = ForecastError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ForecasterKind {
    #[serde(rename = "sarima")]
    Sarima,
    #[serde(rename = "lstm_1day")]
    Lstm1Day,
    #[serde(rename = "lstm_14day")]
    Lstm14Day,
    #[serde(rename = "gru_14day")]
    Gru14Day,
    #[serde(rename = "multistep_14_5")]
    Multistep,
}

impl ForecasterKind {
    pub const ALL: [ForecasterKind; 5] = [Self::Sarima, Self::Lstm1Day, Self::Lstm14Day, Self::Gru14Day, Self::Multistep];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sarima => "sarima",
            Self::Lstm1Day => "lstm_1day",
            Self::Lstm14Day => "lstm_14day",
            Self::Gru14Day => "gru_14day",
            Self::Multistep => "multistep_14_5",
        }
    }

    /// Trailing days fed to the model; SARIMA uses the whole history.
    pub fn lookback(&self) -> Option<usize> {
        match self {
            Self::Sarima => None,
            Self::Lstm1Day => Some(1),
            Self::Lstm14Day | Self::Gru14Day | Self::Multistep => Some(14),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Self::Multistep => 5,
            _ => 1,
        }
    }

    fn cell(&self) -> CellKind {
        match self {
            Self::Gru14Day => CellKind::Gru,
            _ => CellKind::Lstm,
        }
    }
}

impl fmt::Display for ForecasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForecasterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown forecaster kind {s:?}"))
    }
}

/// A fixed SARIMA spec or a grid to search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SarimaSetting {
    Spec(SarimaSpec),
    Grid(GridSpec),
}

fn default_clip() -> Option<f64> {
    Some(5.0)
}

/// Hyperparameters of a neural kind; the cell and layer sizes at the edges
/// follow from the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralSettings {
    pub layers: usize,
    pub hidden: usize,
    #[serde(default)]
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub optimizer: OptimizerKind,
    /// Feed the 14-day lookback as 14 scalar steps instead of one flat vector.
    #[serde(default)]
    pub sequence_input: bool,
    #[serde(default = "default_clip")]
    pub clip_norm: Option<f64>,
}

impl NeuralSettings {
    pub fn network_config(&self, kind: ForecasterKind, seed: u64) -> Result<NetworkConfig> {
        let Some(lookback) = kind.lookback() else {
            return Err(ForecastError::Settings {
                kind,
                detail: "SARIMA has no network".into(),
            });
        };
        let (input_size, output_size) = match kind {
            ForecasterKind::Multistep => (1, 1),
            _ if self.sequence_input => (1, kind.horizon()),
            _ => (lookback, kind.horizon()),
        };
        let config = NetworkConfig {
            cell: kind.cell(),
            layers: self.layers,
            hidden: self.hidden,
            input_size,
            output_size,
            dropout: self.dropout,
            seed,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            clip_norm: self.clip_norm,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSettings {
    Sarima(SarimaSetting),
    Neural(NeuralSettings),
}

/// Named hyperparameter bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    /// Used for leanings without their own entry.
    pub sarima_default: SarimaSetting,
    #[serde(default)]
    pub sarima_by_leaning: BTreeMap<Leaning, SarimaSetting>,
    pub lstm: NeuralSettings,
    pub gru: NeuralSettings,
    pub multistep: NeuralSettings,
}

pub const PRESET_NAMES: [&str; 5] = ["default", "twitter-posts", "twitter-likes", "gab-posts", "gab-likes"];

fn spec(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize, s: usize) -> SarimaSetting {
    SarimaSetting::Spec(SarimaSpec::new(p, d, q, sp, sd, sq, s).expect("preset specs are valid"))
}

/// Small search used when no spec is given for a series.
pub fn fallback_grid() -> GridSpec {
    GridSpec {
        p: OrderRange::Interval([0, 2]),
        d: OrderRange::Interval([0, 1]),
        q: OrderRange::Interval([0, 1]),
        seasonal_p: OrderRange::Interval([0, 1]),
        seasonal_d: OrderRange::Interval([0, 1]),
        seasonal_q: OrderRange::Interval([0, 1]),
        s: OrderRange::Values { values: vec![0, 7] },
        ..GridSpec::default()
    }
}

fn lstm_settings(epochs: usize) -> NeuralSettings {
    NeuralSettings {
        layers: 4,
        hidden: 32,
        dropout: 0.0,
        learning_rate: 0.002,
        epochs,
        batch_size: None,
        optimizer: OptimizerKind::Rmsprop,
        sequence_input: false,
        clip_norm: Some(5.0),
    }
}

fn gru_settings() -> NeuralSettings {
    NeuralSettings {
        layers: 4,
        hidden: 32,
        dropout: 0.2,
        learning_rate: 0.001,
        epochs: 100,
        batch_size: Some(16),
        optimizer: OptimizerKind::Adam,
        sequence_input: false,
        clip_norm: Some(5.0),
    }
}

fn multistep_settings(epochs: usize) -> NeuralSettings {
    NeuralSettings {
        layers: 8,
        hidden: 8,
        dropout: 0.0,
        learning_rate: 0.003,
        epochs,
        batch_size: None,
        optimizer: OptimizerKind::Rmsprop,
        sequence_input: true,
        clip_norm: Some(5.0),
    }
}

/// Tuned on synthetic series: the published architectures and optimizers
/// with mini-batches of 16, no GRU dropout, and a 2 x 16 multistep decoder
/// (the 8 x 8 stack learns little more than the mean at this data size).
fn default_preset() -> Preset {
    Preset {
        name: "default".into(),
        sarima_default: SarimaSetting::Grid(fallback_grid()),
        sarima_by_leaning: BTreeMap::new(),
        lstm: NeuralSettings {
            learning_rate: 0.001,
            batch_size: Some(16),
            ..lstm_settings(100)
        },
        gru: NeuralSettings {
            dropout: 0.0,
            learning_rate: 0.003,
            ..gru_settings()
        },
        multistep: NeuralSettings {
            layers: 2,
            hidden: 16,
            batch_size: Some(16),
            ..multistep_settings(125)
        },
    }
}

impl Preset {
    pub fn named(name: &str) -> Result<Self> {
        let grid = SarimaSetting::Grid(fallback_grid());
        let by = |entries: Vec<(Leaning, SarimaSetting)>| entries.into_iter().collect::<BTreeMap<_, _>>();
        let preset = match name {
            "default" => default_preset(),
            "twitter-posts" => Preset {
                name: name.into(),
                sarima_default: spec(9, 0, 10, 2, 1, 1, 12),
                sarima_by_leaning: BTreeMap::new(),
                lstm: lstm_settings(100),
                gru: gru_settings(),
                multistep: multistep_settings(125),
            },
            "twitter-likes" => Preset {
                name: name.into(),
                sarima_default: spec(11, 1, 3, 3, 1, 3, 12),
                sarima_by_leaning: BTreeMap::new(),
                lstm: lstm_settings(100),
                gru: gru_settings(),
                multistep: multistep_settings(100),
            },
            "gab-posts" => Preset {
                name: name.into(),
                sarima_default: grid,
                sarima_by_leaning: by(vec![
                    (Leaning::Left, spec(7, 1, 10, 3, 1, 1, 14)),
                    (Leaning::Right, spec(6, 2, 10, 4, 1, 1, 11)),
                    (Leaning::Center, spec(11, 1, 10, 2, 1, 1, 14)),
                ]),
                lstm: lstm_settings(200),
                gru: gru_settings(),
                multistep: multistep_settings(150),
            },
            "gab-likes" => Preset {
                name: name.into(),
                sarima_default: grid,
                sarima_by_leaning: by(vec![
                    (Leaning::Left, spec(11, 1, 6, 3, 0, 4, 12)),
                    (Leaning::Right, spec(9, 1, 11, 1, 1, 3, 12)),
                    (Leaning::Center, spec(8, 1, 11, 4, 0, 0, 12)),
                ]),
                lstm: lstm_settings(200),
                gru: gru_settings(),
                multistep: multistep_settings(100),
            },
            other => return Err(ForecastError::UnknownPreset(other.to_string())),
        };
        Ok(preset)
    }

    pub fn sarima_for(&self, leaning: Leaning) -> &SarimaSetting {
        self.sarima_by_leaning.get(&leaning).unwrap_or(&self.sarima_default)
    }

    pub fn settings(&self, kind: ForecasterKind, leaning: Leaning) -> KindSettings {
        match kind {
            ForecasterKind::Sarima => KindSettings::Sarima(self.sarima_for(leaning).clone()),
            ForecasterKind::Lstm1Day | ForecasterKind::Lstm14Day => KindSettings::Neural(self.lstm.clone()),
            ForecasterKind::Gru14Day => KindSettings::Neural(self.gru.clone()),
            ForecasterKind::Multistep => KindSettings::Neural(self.multistep.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelPayload {
    Sarima(SarimaFit),
    Neural(Network),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub kind: ForecasterKind,
    pub scaler: ScalerState,
    pub model: ModelPayload,
    pub metadata: TrainingMetadata,
}

/// Minimum training length of a kind.
pub fn min_train_len(kind: ForecasterKind, settings: &KindSettings) -> usize {
    match (kind.lookback(), settings) {
        (Some(l), _) => l + kind.horizon(),
        (None, KindSettings::Sarima(SarimaSetting::Spec(s))) => s.diff_len() + s.min_differenced_len(),
        (None, _) => 1,
    }
}

/// Scaler fit on `train` and the kind's scaled window set.
pub fn prepare_windows(kind: ForecasterKind, train: &[f64]) -> Result<(ScalerState, WindowSet)> {
    let lookback = kind.lookback().ok_or(ForecastError::Settings {
        kind,
        detail: "SARIMA does not use windows".into(),
    })?;
    let needed = lookback + kind.horizon();
    if train.len() < needed {
        return Err(ForecastError::TooShort {
            kind,
            needed,
            got: train.len(),
        });
    }
    let scaler = ScalerState::fit(train);
    let windows = make_windows(&scaler.apply(train), lookback, kind.horizon())?;
    Ok((scaler, windows))
}

/// Fits `kind` on the training half of `split`. The model seed is derived
/// from `seed` and the kind name.
pub fn fit_forecaster(kind: ForecasterKind, split: &SplitPair, settings: &KindSettings, seed: u64) -> Result<TrainedForecaster> {
    let train = &split.train.values;
    let model_seed = derive(seed, kind.as_str());
    match (kind, settings) {
        (ForecasterKind::Sarima, KindSettings::Sarima(setting)) => {
            let opts = FitOptions {
                seed: model_seed,
                ..FitOptions::default()
            };
            let fit = match setting {
                SarimaSetting::Spec(spec) => {
                    let needed = spec.diff_len() + spec.min_differenced_len();
                    if train.len() < needed {
                        return Err(ForecastError::TooShort {
                            kind,
                            needed,
                            got: train.len(),
                        });
                    }
                    sarima::fit_with(train, spec, &opts)?
                }
                SarimaSetting::Grid(grid) => sarima::grid_search(train, grid, VALIDATION_FRACTION, &opts)?.fit,
            };
            Ok(TrainedForecaster {
                kind,
                scaler: ScalerState::identity(),
                model: ModelPayload::Sarima(fit),
                metadata: TrainingMetadata {
                    seed: model_seed,
                    epochs_run: 0,
                    final_loss: None,
                    loss_history: Vec::new(),
                },
            })
        }
        (ForecasterKind::Multistep, KindSettings::Neural(ns)) => {
            let (scaler, windows) = prepare_windows(kind, train)?;
            let trained = train_multistep_teacher_forced(ns, &windows, model_seed)?;
            Ok(neural_forecaster(kind, scaler, trained, model_seed))
        }
        (_, KindSettings::Neural(ns)) if kind != ForecasterKind::Sarima => {
            let (scaler, windows) = prepare_windows(kind, train)?;
            let config = ns.network_config(kind, model_seed)?;
            let trained = neural::train(&config, &windows)?;
            Ok(neural_forecaster(kind, scaler, trained, model_seed))
        }
        _ => Err(ForecastError::Settings {
            kind,
            detail: "SARIMA needs SARIMA settings and network kinds need neural settings".into(),
        }),
    }
}

fn neural_forecaster(kind: ForecasterKind, scaler: ScalerState, trained: Trained, seed: u64) -> TrainedForecaster {
    TrainedForecaster {
        kind,
        scaler,
        model: ModelPayload::Neural(trained.network),
        metadata: TrainingMetadata {
            seed,
            epochs_run: trained.history.len(),
            final_loss: trained.history.last().copied(),
            loss_history: trained.history,
        },
    }
}

fn network_inputs(net: &Network, scaled_lookback: &[f64]) -> Vec<Vec<f64>> {
    if net.config.input_size == scaled_lookback.len() {
        vec![scaled_lookback.iter().rev().copied().collect()]
    } else {
        scaled_lookback.iter().map(|&v| vec![v]).collect()
    }
}

/// The kind's full horizon of predictions after `history`, original scale.
pub fn predict(model: &TrainedForecaster, history: &[f64]) -> Result<Vec<f64>> {
    let kind = model.kind;
    match &model.model {
        ModelPayload::Sarima(fit) => Ok(sarima::forecast(fit, history, kind.horizon())?),
        ModelPayload::Neural(net) => {
            let lookback = kind.lookback().expect("neural kinds have a lookback");
            if history.len() < lookback {
                return Err(ForecastError::TooShort {
                    kind,
                    needed: lookback,
                    got: history.len(),
                });
            }
            let tail = &history[history.len() - lookback..];
            if kind == ForecasterKind::Multistep {
                return forecast_multistep(model, tail);
            }
            let scaled = model.scaler.apply(tail);
            let out = net.predict(&network_inputs(net, &scaled))?;
            Ok(model.scaler.invert(&out))
        }
    }
}

/// Next-day prediction after `history`, original scale.
pub fn predict_next(model: &TrainedForecaster, history: &[f64]) -> Result<f64> {
    Ok(predict(model, history)?[0])
}

/// Teacher-forced layout of a multistep window: the 14 lookback days,
/// then the first 4 target days as inputs, with targets on the last 5 steps.
/// Decoder step `k` (1-based) is input index `12 + k`.
pub fn teacher_forced_sample(window: &Window) -> Sample {
    let mut inputs: Vec<Vec<f64>> = window.input.iter().map(|&v| vec![v]).collect();
    let first_decoder = inputs.len() - 1;
    let horizon = window.target.len();
    inputs.extend(window.target[..horizon - 1].iter().map(|&v| vec![v]));
    let mut targets = vec![None; inputs.len()];
    for (k, &y) in window.target.iter().enumerate() {
        targets[first_decoder + k] = Some(vec![y]);
    }
    Sample { inputs, targets }
}

/// Values consumed by the 5 decoder steps of a sample.
pub fn decoder_inputs(sample: &Sample) -> Vec<f64> {
    let first = sample.targets.iter().position(Option::is_some).unwrap_or(0);
    sample.inputs[first..].iter().map(|v| v[0]).collect()
}

pub fn train_multistep_teacher_forced(settings: &NeuralSettings, windows: &WindowSet, seed: u64) -> Result<Trained> {
    if windows.lookback != 14 || windows.horizon != 5 {
        return Err(ForecastError::Horizon {
            lookback: windows.lookback,
            horizon: windows.horizon,
        });
    }
    let config = settings.network_config(ForecasterKind::Multistep, seed)?;
    let samples: Vec<Sample> = windows.pairs.iter().map(teacher_forced_sample).collect();
    Ok(neural::train_samples(Network::init(&config)?, &samples)?)
}

/// Free-running decode on scaled values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTrace {
    pub decoder_inputs: Vec<f64>,
    pub outputs: Vec<f64>,
}

/// Warms up on the lookback, then feeds each output back as the next input.
pub fn decode(net: &Network, scaled_lookback: &[f64], horizon: usize) -> Result<DecodeTrace> {
    let mut states = net.initial_state();
    let (warmup, last) = scaled_lookback.split_at(scaled_lookback.len().saturating_sub(1));
    for &v in warmup {
        net.step(&mut states, &[v])?;
    }
    let mut input = last.first().copied().unwrap_or(0.0);
    let mut trace = DecodeTrace {
        decoder_inputs: Vec::with_capacity(horizon),
        outputs: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        trace.decoder_inputs.push(input);
        let y = net.step(&mut states, &[input])?[0];
        trace.outputs.push(y);
        input = y;
    }
    Ok(trace)
}

/// Five-day forecast from exactly 14 values, original scale.
pub fn forecast_multistep(model: &TrainedForecaster, last14: &[f64]) -> Result<Vec<f64>> {
    let kind = ForecasterKind::Multistep;
    if last14.len() != 14 {
        return Err(ForecastError::InputLength {
            kind,
            expected: 14,
            got: last14.len(),
        });
    }
    let ModelPayload::Neural(net) = &model.model else {
        return Err(ForecastError::Settings {
            kind,
            detail: "model is not a network".into(),
        });
    };
    let trace = decode(net, &model.scaler.apply(last14), kind.horizon())?;
    Ok(model.scaler.invert(&trace.outputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sarima::SarimaParams;
    use crate::timeseries::{chronological_split, generate_synthetic, SyntheticKind};

    fn sine_split(n: usize) -> SplitPair {
        let s = generate_synthetic(
            &SyntheticKind::Sine {
                period: 20.0,
                amplitude: 10.0,
                noise_sigma: 0.0,
            },
            n,
            1,
        )
        .unwrap();
        chronological_split(&s, 0.7).unwrap()
    }

    fn quick(epochs: usize) -> NeuralSettings {
        NeuralSettings {
            layers: 1,
            hidden: 4,
            epochs,
            ..lstm_settings(epochs)
        }
    }

    #[test]
    fn window_counts_by_kind() {
        let train: Vec<f64> = (0..84).map(|i| i as f64).collect();
        assert_eq!(prepare_windows(ForecasterKind::Lstm1Day, &train).unwrap().1.len(), 83);
        assert_eq!(prepare_windows(ForecasterKind::Multistep, &train).unwrap().1.len(), 66);
        match prepare_windows(ForecasterKind::Multistep, &train[..18]) {
            Err(e @ ForecastError::TooShort { needed: 19, .. }) => assert!(e.to_string().contains("19")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presets_match_published_values() {
        let p = Preset::named("twitter-posts").unwrap();
        assert_eq!(*p.sarima_for(Leaning::Left), spec(9, 0, 10, 2, 1, 1, 12));
        assert_eq!((p.lstm.layers, p.lstm.epochs, p.lstm.optimizer), (4, 100, OptimizerKind::Rmsprop));
        assert_eq!((p.gru.dropout, p.gru.batch_size, p.gru.optimizer), (0.2, Some(16), OptimizerKind::Adam));
        assert_eq!((p.multistep.layers, p.multistep.hidden, p.multistep.epochs), (8, 8, 125));
        let g = Preset::named("gab-posts").unwrap();
        assert_eq!(*g.sarima_for(Leaning::Right), spec(6, 2, 10, 4, 1, 1, 11));
        assert!(matches!(g.sarima_for(Leaning::LeftLeaning), SarimaSetting::Grid(_)));
        assert_eq!((g.lstm.epochs, g.multistep.epochs), (200, 150));
        assert!(Preset::named("nope").is_err());
        for name in PRESET_NAMES {
            let p = Preset::named(name).unwrap();
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<Preset>(&json).unwrap(), p);
        }
    }

    #[test]
    fn zero_network_predicts_scaler_minimum() {
        let split = sine_split(60);
        let mut model = fit_forecaster(ForecasterKind::Lstm14Day, &split, &KindSettings::Neural(quick(1)), 0).unwrap();
        let ModelPayload::Neural(net) = &mut model.model else { panic!() };
        *net = Network::zeros(&net.config).unwrap();
        model.scaler = ScalerState { min: 0.0, max: 10.0 };
        assert_eq!(predict_next(&model, &[5.0; 20]).unwrap(), 0.0);
    }

    #[test]
    fn constant_sarima_predicts_constant() {
        let spec = SarimaSpec::new(0, 0, 0, 0, 0, 0, 0).unwrap();
        let params = SarimaParams {
            c: 2.0,
            ..SarimaParams::zeros(&spec)
        };
        let model = TrainedForecaster {
            kind: ForecasterKind::Sarima,
            scaler: ScalerState::identity(),
            model: ModelPayload::Sarima(SarimaFit::from_params(spec, params).unwrap()),
            metadata: TrainingMetadata {
                seed: 0,
                epochs_run: 0,
                final_loss: None,
                loss_history: vec![],
            },
        };
        assert_eq!(predict_next(&model, &[7.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn teacher_forcing_layout() {
        let w = Window {
            input: (0..14).map(f64::from).collect(),
            target: vec![100.0, 101.0, 102.0, 103.0, 104.0],
        };
        let s = teacher_forced_sample(&w);
        assert_eq!(s.inputs.len(), 18);
        assert_eq!(decoder_inputs(&s), vec![13.0, 100.0, 101.0, 102.0, 103.0]);
        let targets: Vec<f64> = s.targets.iter().flatten().map(|t| t[0]).collect();
        assert_eq!(targets, w.target);
        assert!(s.targets[..13].iter().all(Option::is_none));
    }

    #[test]
    fn multistep_outputs_five_values_and_zero_model_is_zero() {
        let split = sine_split(80);
        let mut model = fit_forecaster(
            ForecasterKind::Multistep,
            &split,
            &KindSettings::Neural(NeuralSettings {
                layers: 2,
                hidden: 3,
                ..multistep_settings(2)
            }),
            4,
        )
        .unwrap();
        let out = forecast_multistep(&model, &split.test.values[..14]).unwrap();
        assert_eq!(out.len(), 5);
        assert!(forecast_multistep(&model, &[1.0; 13]).is_err());
        let ModelPayload::Neural(net) = &mut model.model else { panic!() };
        *net = Network::zeros(&net.config).unwrap();
        model.scaler = ScalerState::identity();
        assert_eq!(forecast_multistep(&model, &[3.0; 14]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn decode_feeds_back_outputs() {
        let cfg = multistep_settings(1).network_config(ForecasterKind::Multistep, 2).unwrap();
        let net = Network::init(&cfg).unwrap();
        let trace = decode(&net, &[0.1; 14], 5).unwrap();
        assert_eq!(trace.decoder_inputs[0], 0.1);
        assert_eq!(&trace.decoder_inputs[1..], &trace.outputs[..4]);
    }

    #[test]
    fn wrong_settings_are_rejected() {
        let split = sine_split(60);
        let r = fit_forecaster(ForecasterKind::Sarima, &split, &KindSettings::Neural(quick(1)), 0);
        assert!(matches!(r, Err(ForecastError::Settings { .. })));
        let ws = make_windows(&[0.0; 30], 14, 1).unwrap();
        assert!(matches!(train_multistep_teacher_forced(&quick(1), &ws, 0), Err(ForecastError::Horizon { .. })));
    }

    #[test]
    fn fits_are_reproducible() {
        let split = sine_split(60);
        let s = KindSettings::Neural(quick(3));
        let a = fit_forecaster(ForecasterKind::Gru14Day, &split, &s, 8).unwrap();
        let b = fit_forecaster(ForecasterKind::Gru14Day, &split, &s, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ForecasterKind::ALL {
            assert_eq!(k.as_str().parse::<ForecasterKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }
}
