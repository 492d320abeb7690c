//! Forecasting daily political-leaning activity on social media.
//!
//! Posts are labeled with one of five leanings through the bias rating of the
//! news domain they share, aggregated into per-day series, and forecast with
//! four engines written from scratch:
//!
//! - [`sarima`]: seasonal ARIMA fitted by conditional sum of squares,
//! - [`neural`]: stacked LSTM / GRU networks trained with backpropagation
//!   through time,
//! - [`forecasters`]: the named model configurations (1-day and 14-day
//!   lookback LSTM, 14-day GRU, teacher-forced 14→5 multistep) behind one
//!   contract,
//! - [`eval`]: RMSE reports and SVG plots.
//!
//! ```
//! use biascast::timeseries::{generate_synthetic, SyntheticKind};
//! use biascast::sarima::{self, SarimaSpec};
//!
//! let series = generate_synthetic(&SyntheticKind::Ar1 { alpha: 0.8, sigma: 1.0 }, 300, 7).unwrap();
//! let fit = sarima::fit(&series.values, &SarimaSpec::new(1, 0, 0, 0, 0, 0, 0).unwrap()).unwrap();
//! let next = sarima::forecast(&fit, &series.values, 1).unwrap();
//! assert_eq!(next.len(), 1);
//! ```

pub mod cli;
pub mod eval;
pub mod forecasters;
pub mod ingest;
pub mod neural;
pub mod sarima;
pub mod seed;
pub mod timeseries;

pub use ingest::{Leaning, Platform};
pub use timeseries::{DailySeries, Metric};

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Series(#[from] timeseries::SeriesError),
    #[error(transparent)]
    Sarima(#[from] sarima::SarimaError),
    #[error(transparent)]
    Neural(#[from] neural::NeuralError),
    #[error(transparent)]
    Forecast(#[from] forecasters::ForecastError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Config(#[from] cli::ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
