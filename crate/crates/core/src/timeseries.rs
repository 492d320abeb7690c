//! Series container, chronological splitting, min-max scaling, lookback
//! windows and synthetic fixtures.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{Leaning, Platform};
use crate::sarima::{SarimaParams, SarimaSpec};
use crate::seed;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("{metric} series has a negative value at index {index}")]
    Negative { metric: Metric, index: usize },
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    Ratio(f64),
    #[error("series of length {len} is too short to split at ratio {ratio}")]
    TooShortToSplit { len: usize, ratio: f64 },
    #[error("lookback and horizon must be at least 1 (got {lookback}, {horizon})")]
    Window { lookback: usize, horizon: usize },
    #[error("invalid synthetic parameters: {0}")]
    Synthetic(String),
}

type Result<T, E = SeriesError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PostCount,
    LikesSum,
    SentimentMean,
    Synthetic,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::PostCount => "post_count",
            Metric::LikesSum => "likes_sum",
            Metric::SentimentMean => "sentiment_mean",
            Metric::Synthetic => "synthetic",
        }
    }

    fn is_nonnegative(self) -> bool {
        matches!(self, Metric::PostCount | Metric::LikesSum)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Metric::PostCount, Metric::LikesSum, Metric::SentimentMean, Metric::Synthetic]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// Contiguous one-value-per-day series for a (platform, leaning, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
    pub platform: Platform,
    pub leaning: Leaning,
    pub metric: Metric,
}

impl DailySeries {
    pub fn new(
        start_date: NaiveDate,
        values: Vec<f64>,
        platform: Platform,
        leaning: Leaning,
        metric: Metric,
    ) -> Result<Self> {
        let series = Self {
            start_date,
            values,
            platform,
            leaning,
            metric,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (index, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::NonFinite(index));
            }
            if self.metric.is_nonnegative() && *v < 0.0 {
                return Err(SeriesError::Negative { metric: self.metric, index });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start_date.iter_days().take(self.values.len())
    }

    fn with_values(&self, start_date: NaiveDate, values: Vec<f64>) -> Self {
        Self {
            start_date,
            values,
            platform: self.platform,
            leaning: self.leaning,
            metric: self.metric,
        }
    }

    /// Writes `date,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["date", "value"])?;
        for (date, v) in self.dates().zip(&self.values) {
            wtr.write_record([date.format("%Y-%m-%d").to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: DailySeries,
    pub test: DailySeries,
    pub ratio: f64,
}

/// Number of leading points that go to the training half.
pub fn train_len(n: usize, ratio: f64) -> usize {
    // the epsilon keeps e.g. 0.7 * 120 from landing on 83.999...
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// First `floor(ratio * n)` days train, the rest test.
pub fn chronological_split(series: &DailySeries, ratio: f64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SeriesError::Ratio(ratio));
    }
    let n = series.len();
    let k = train_len(n, ratio);
    if n < 2 || k == 0 || k >= n {
        return Err(SeriesError::TooShortToSplit { len: n, ratio });
    }
    let test_start = series.start_date + chrono::Days::new(k as u64);
    Ok(SplitPair {
        train: series.with_values(series.start_date, series.values[..k].to_vec()),
        test: series.with_values(test_start, series.values[k..].to_vec()),
        ratio,
    })
}

/// Min-max scaling onto [0, 1]. A constant series maps everything to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub min: f64,
    pub max: f64,
}

impl ScalerState {
    pub fn fit(values: &[f64]) -> Self {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if values.is_empty() {
            return Self::identity();
        }
        Self { min, max }
    }

    /// Maps 0 → 0 and 1 → 1.
    pub fn identity() -> Self {
        Self { min: 0.0, max: 1.0 }
    }

    fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn apply_one(&self, x: f64) -> f64 {
        if self.range() == 0.0 {
            0.0
        } else {
            (x - self.min) / self.range()
        }
    }

    pub fn invert_one(&self, x: f64) -> f64 {
        x * self.range() + self.min
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply_one(v)).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert_one(v)).collect()
    }
}

pub fn fit_scaler(series: &DailySeries) -> ScalerState {
    ScalerState::fit(&series.values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub lookback: usize,
    pub horizon: usize,
    pub pairs: Vec<Window>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// All `max(0, n - lookback - horizon + 1)` contiguous (input, target) pairs.
pub fn make_windows(values: &[f64], lookback: usize, horizon: usize) -> Result<WindowSet> {
    if lookback == 0 || horizon == 0 {
        return Err(SeriesError::Window { lookback, horizon });
    }
    let pairs = values
        .windows(lookback + horizon)
        .map(|w| Window {
            input: w[..lookback].to_vec(),
            target: w[lookback..].to_vec(),
        })
        .collect();
    Ok(WindowSet {
        lookback,
        horizon,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `y_t = alpha * y_{t-1} + e_t`, `e_t ~ N(0, sigma^2)`, `y_{-1} = 0`.
    Ar1 { alpha: f64, sigma: f64 },
    /// `amplitude * sin(2 pi t / period) + N(0, noise_sigma^2)`.
    Sine {
        period: f64,
        amplitude: f64,
        #[serde(default)]
        noise_sigma: f64,
    },
    /// Forward simulation of the seasonal model with innovations of variance
    /// `params.sigma2`.
    SeasonalSarima { spec: SarimaSpec, params: SarimaParams },
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| SeriesError::Synthetic(format!("sigma {sigma}: {e}")))
}

/// Deterministic for a fixed `(kind, n, seed)`.
pub fn generate_values(kind: &SyntheticKind, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SeriesError::Synthetic("n must be at least 1".into()));
    }
    let mut rng = seed::tagged_rng(seed, "synthetic");
    match kind {
        SyntheticKind::Ar1 { alpha, sigma } => {
            if !alpha.is_finite() {
                return Err(SeriesError::Synthetic(format!("alpha {alpha}")));
            }
            let noise = normal(*sigma)?;
            let mut prev = 0.0;
            Ok((0..n)
                .map(|_| {
                    prev = alpha * prev + noise.sample(&mut rng);
                    prev
                })
                .collect())
        }
        SyntheticKind::Sine {
            period,
            amplitude,
            noise_sigma,
        } => {
            if !(*period >= 2.0) {
                return Err(SeriesError::Synthetic(format!("period {period} must be at least 2")));
            }
            let noise = normal(*noise_sigma)?;
            Ok((0..n)
                .map(|t| {
                    let clean = amplitude * (std::f64::consts::TAU * t as f64 / period).sin();
                    if *noise_sigma == 0.0 {
                        clean
                    } else {
                        clean + noise.sample(&mut rng)
                    }
                })
                .collect())
        }
        SyntheticKind::SeasonalSarima { spec, params } => {
            params
                .check(spec)
                .map_err(|e| SeriesError::Synthetic(e.to_string()))?;
            let noise = normal(params.sigma2.sqrt())?;
            let innovations: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
            Ok(crate::sarima::simulate(spec, params, &innovations))
        }
    }
}

/// Synthetic series starting 2018-01-01, labeled `center` / `synthetic`.
pub fn generate_synthetic(kind: &SyntheticKind, n: usize, seed: u64) -> Result<DailySeries> {
    let values = generate_values(kind, n, seed)?;
    DailySeries::new(
        NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
        values,
        Platform::Twitter,
        Leaning::Center,
        Metric::Synthetic,
    )
}
