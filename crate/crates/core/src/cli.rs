//! Run configuration and the subcommands behind the `biascast` binary.
//!
//! Every command is a function of the config file and its inputs; all
//! randomness derives from `seed` through [`crate::seed::derive`] with a tag
//! naming the metric, leaning and model kind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{self, EvalRow, PlotSeries, ReportTable};
use crate::forecasters::{fit_forecaster, ForecasterKind, KindSettings, NeuralSettings, Preset, SarimaSetting, VALIDATION_FRACTION};
use crate::ingest::{self, BiasTable, DateWindow, IngestError, IngestSummary, Leaning, Platform};
use crate::sarima::{self, CandidateScore, FitOptions, GridSpec, SarimaSpec};
use crate::seed::derive;
use crate::timeseries::{chronological_split, generate_synthetic, DailySeries, Metric, SyntheticKind};
use crate::{Error, Result};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config must set exactly one of `input` and `synthetic`")]
    Source,
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    SplitRatio(f64),
    #[error("metric {0} cannot be forecast; use post_count or likes_sum")]
    Metric(Metric),
    #[error("no forecaster kinds requested")]
    NoKinds,
    #[error("{0} requires a synthetic generator in the config")]
    NeedsSynthetic(&'static str),
    #[error("cannot parse config {path}: {detail}")]
    Parse { path: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub posts: PathBuf,
    pub bias: PathBuf,
}

/// A generator and a length, e.g. `{"kind": "sine", "period": 20, "amplitude": 10, "n": 120}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInput {
    #[serde(flatten)]
    pub generator: SyntheticKind,
    pub n: usize,
}

fn default_split() -> f64 {
    0.7
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::PostCount]
}

fn default_kinds() -> Vec<ForecasterKind> {
    ForecasterKind::ALL.to_vec()
}

fn default_preset() -> String {
    "default".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<InputPaths>,
    #[serde(default)]
    pub synthetic: Option<SyntheticInput>,
    #[serde(default)]
    pub window: DateWindow,
    #[serde(default)]
    pub platform: Platform,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Restricts ingested runs to these leanings; all five when absent.
    #[serde(default)]
    pub leanings: Option<Vec<Leaning>>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<ForecasterKind>,
    #[serde(default = "default_preset")]
    pub preset: String,
    /// Replaces the preset's SARIMA setting for every leaning.
    #[serde(default)]
    pub sarima: Option<SarimaSetting>,
    /// Per-kind replacements for the preset's neural settings.
    #[serde(default)]
    pub neural: BTreeMap<ForecasterKind, NeuralSettings>,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; relative input paths are taken from the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if let (Some(input), Some(dir)) = (config.input.as_mut(), path.parent()) {
            input.posts = dir.join(&input.posts);
            input.bias = dir.join(&input.bias);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.input.is_some() == self.synthetic.is_some() {
            return Err(ConfigError::Source);
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(ConfigError::SplitRatio(self.split_ratio));
        }
        let countable = |m: &&Metric| matches!(m, Metric::PostCount | Metric::LikesSum);
        if let (Some(_), Some(m)) = (&self.input, self.metrics.iter().find(|m| !countable(m))) {
            return Err(ConfigError::Metric(*m));
        }
        if self.kinds.is_empty() {
            return Err(ConfigError::NoKinds);
        }
        Ok(())
    }

    pub fn preset(&self) -> Result<Preset> {
        Ok(Preset::named(&self.preset)?)
    }

    fn settings(&self, preset: &Preset, kind: ForecasterKind, leaning: Leaning) -> KindSettings {
        match (kind, &self.sarima, self.neural.get(&kind)) {
            (ForecasterKind::Sarima, Some(s), _) => KindSettings::Sarima(s.clone()),
            (_, _, Some(n)) if kind != ForecasterKind::Sarima => KindSettings::Neural(n.clone()),
            _ => preset.settings(kind, leaning),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Series keyed by metric, then leaning.
pub type SeriesSet = BTreeMap<Metric, BTreeMap<Leaning, DailySeries>>;

#[derive(Debug, Clone)]
pub struct Loaded {
    pub series: SeriesSet,
    pub summary: Option<IngestSummary>,
    pub sentiment: Option<BTreeMap<Leaning, ingest::SentimentSeries>>,
}

/// Reads and labels the configured posts, or generates the synthetic series.
pub fn load_series(config: &RunConfig) -> Result<Loaded> {
    if let Some(syn) = &config.synthetic {
        let s = generate_synthetic(&syn.generator, syn.n, config.seed)?;
        let series = BTreeMap::from([(s.metric, BTreeMap::from([(s.leaning, s)]))]);
        return Ok(Loaded {
            series,
            summary: None,
            sentiment: None,
        });
    }
    let input = config.input.as_ref().ok_or(ConfigError::Source)?;
    let bias = BiasTable::from_csv(fs::File::open(&input.bias).map_err(io_err(&input.bias))?)?;
    let posts = ingest::read_posts(fs::File::open(&input.posts).map_err(io_err(&input.posts))?)?;
    if posts.is_empty() {
        return Err(IngestError::NoPosts {
            path: input.posts.display().to_string(),
        }
        .into());
    }
    let ingested = ingest::label_posts(&posts, &bias, &config.window)?;
    let keep = |l: &Leaning| config.leanings.as_ref().is_none_or(|ls| ls.contains(l));
    let mut series = SeriesSet::new();
    for &metric in &config.metrics {
        let mut by_leaning = ingest::aggregate_daily(&ingested.labeled, metric, &config.window, config.platform)?;
        by_leaning.retain(|l, _| keep(l));
        series.insert(metric, by_leaning);
    }
    // the sentiment table is only written when every counted post is scored
    let sentiment = match ingest::daily_mean_sentiment(&ingested.labeled, &config.window, config.platform) {
        Ok(s) if s.values().any(|s| s.values.iter().any(Option::is_some)) => Some(s),
        Ok(_) | Err(IngestError::MissingSentiment(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Loaded {
        series,
        summary: Some(ingested.summary),
        sentiment,
    })
}

fn file_stem(platform: Platform, metric: Metric) -> String {
    format!("{platform}_{metric}")
}

/// Writes one series CSV per metric, the sentiment table when posts carry
/// scores, and `summary.json`. Nothing is written if ingestion fails.
pub fn cmd_ingest(config: &RunConfig) -> Result<IngestSummary> {
    if config.input.is_none() {
        return Err(ConfigError::Source.into());
    }
    let loaded = load_series(config)?;
    let summary = loaded.summary.clone().ok_or(ConfigError::Source)?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for (metric, by_leaning) in &loaded.series {
        let mut buf = Vec::new();
        ingest::write_series_csv(&mut buf, by_leaning)?;
        files.push((config.out_dir.join(format!("series_{}.csv", file_stem(config.platform, *metric))), buf));
    }
    if let Some(sentiment) = &loaded.sentiment {
        let mut buf = Vec::new();
        ingest::write_sentiment_csv(&mut buf, sentiment)?;
        files.push((config.out_dir.join(format!("sentiment_{}.csv", config.platform)), buf));
    }
    files.push((config.out_dir.join("summary.json"), to_json(&summary)?.into_bytes()));
    for (path, bytes) in files {
        write_file(&path, bytes)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: ForecasterKind,
    pub leaning: Leaning,
    pub metric: Metric,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub tables: Vec<ReportTable>,
    pub failures: Vec<Failure>,
    pub csv: String,
    pub text: String,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

fn series_seed(seed: u64, metric: Metric, leaning: Leaning) -> u64 {
    derive(seed, &format!("{metric}/{leaning}"))
}

/// Splits every series, fits and scores every requested kind, and writes
/// `report.csv`, `report.txt`, `models/*.json` and `plots/*.svg`. Failed
/// fits are listed in the report and in `failures.json`.
pub fn cmd_run(config: &RunConfig) -> Result<RunOutcome> {
    let preset = config.preset()?;
    let loaded = load_series(config)?;
    let mut jobs = Vec::new();
    for (metric, by_leaning) in &loaded.series {
        for (leaning, series) in by_leaning {
            for &kind in &config.kinds {
                jobs.push((*metric, *leaning, kind, series));
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(metric, leaning, kind, series)| {
            let outcome = (|| -> Result<_> {
                let split = chronological_split(series, config.split_ratio)?;
                let settings = config.settings(&preset, kind, leaning);
                let model = fit_forecaster(kind, &split, &settings, series_seed(config.seed, metric, leaning))?;
                let row = eval::evaluate(&model, &split)?;
                Ok((model, row))
            })();
            (metric, leaning, kind, outcome)
        })
        .collect();

    let mut rows: BTreeMap<Metric, Vec<EvalRow>> = BTreeMap::new();
    let mut failures = Vec::new();
    for (metric, leaning, kind, outcome) in results {
        match outcome {
            Ok((model, row)) => {
                let path = config
                    .out_dir
                    .join("models")
                    .join(format!("{}_{leaning}_{kind}.json", file_stem(config.platform, metric)));
                write_file(&path, to_json(&model)?)?;
                rows.entry(metric).or_default().push(row);
            }
            Err(e) => failures.push(Failure {
                kind,
                leaning,
                metric,
                error: e.to_string(),
            }),
        }
    }
    let tables = loaded
        .series
        .keys()
        .map(|&metric| ReportTable::new(config.platform, metric, rows.remove(&metric).unwrap_or_default()))
        .collect::<Result<Vec<_>, _>>()?;
    let (csv, mut text) = eval::render_report(&tables);
    if !failures.is_empty() {
        text.push_str("\nFailed fits:\n");
        for f in &failures {
            text.push_str(&format!("  {} / {} / {}: {}\n", f.metric, f.leaning, f.kind, f.error));
        }
    }
    write_file(&config.out_dir.join("report.csv"), &csv)?;
    write_file(&config.out_dir.join("report.txt"), &text)?;
    write_file(&config.out_dir.join("failures.json"), to_json(&failures)?)?;
    for (metric, by_leaning) in &loaded.series {
        let plot: Vec<PlotSeries> = by_leaning
            .iter()
            .map(|(l, s)| PlotSeries {
                label: l.to_string(),
                start_date: s.start_date,
                values: s.values.clone(),
            })
            .collect();
        let stem = file_stem(config.platform, *metric);
        let svg = eval::emit_plot(&format!("{} {}", config.platform, metric), &plot)?;
        write_file(&config.out_dir.join("plots").join(format!("{stem}.svg")), svg)?;
    }
    if let Some(summary) = &loaded.summary {
        write_file(&config.out_dir.join("summary.json"), to_json(summary)?)?;
    }
    Ok(RunOutcome {
        tables,
        failures,
        csv,
        text,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub metric: Metric,
    pub leaning: Leaning,
    pub winner: Option<SarimaSpec>,
    pub error: Option<String>,
    pub scores: Vec<CandidateScore>,
}

fn grid_for(config: &RunConfig, preset: &Preset, leaning: Leaning) -> GridSpec {
    match config.sarima.as_ref().unwrap_or_else(|| preset.sarima_for(leaning)) {
        SarimaSetting::Grid(g) => g.clone(),
        SarimaSetting::Spec(s) => GridSpec::singleton(*s),
    }
}

/// Grid search on the training half of every series; writes
/// `gridsearch.json` and one score table per series.
pub fn cmd_gridsearch(config: &RunConfig) -> Result<Vec<GridReport>> {
    let preset = config.preset()?;
    let loaded = load_series(config)?;
    let mut reports = Vec::new();
    for (metric, by_leaning) in &loaded.series {
        for (leaning, series) in by_leaning {
            let split = chronological_split(series, config.split_ratio)?;
            let opts = FitOptions {
                seed: derive(series_seed(config.seed, *metric, *leaning), ForecasterKind::Sarima.as_str()),
                ..FitOptions::default()
            };
            let grid = grid_for(config, &preset, *leaning);
            let report = match sarima::grid_search(&split.train.values, &grid, VALIDATION_FRACTION, &opts) {
                Ok(out) => GridReport {
                    metric: *metric,
                    leaning: *leaning,
                    winner: Some(out.best),
                    error: None,
                    scores: out.scores,
                },
                Err(e) => GridReport {
                    metric: *metric,
                    leaning: *leaning,
                    winner: None,
                    error: Some(e.to_string()),
                    scores: Vec::new(),
                },
            };
            let mut table = String::from("spec,score,error\n");
            for c in &report.scores {
                let score = c.score.map(|s| format!("{s}")).unwrap_or_default();
                let error = c.error.clone().unwrap_or_default().replace(',', ";");
                table.push_str(&format!("\"{}\",{score},{error}\n", c.spec));
            }
            let stem = file_stem(config.platform, *metric);
            write_file(&config.out_dir.join(format!("grid_{stem}_{leaning}.csv")), table)?;
            reports.push(report);
        }
    }
    write_file(&config.out_dir.join("gridsearch.json"), to_json(&reports)?)?;
    Ok(reports)
}

/// Writes the configured synthetic series as `synthetic.csv`.
pub fn cmd_simulate(config: &RunConfig) -> Result<DailySeries> {
    if config.synthetic.is_none() {
        return Err(ConfigError::NeedsSynthetic("simulate").into());
    }
    let loaded = load_series(config)?;
    let series = loaded
        .series
        .into_values()
        .flat_map(BTreeMap::into_values)
        .next()
        .ok_or(ConfigError::NeedsSynthetic("simulate"))?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    write_file(&config.out_dir.join("synthetic.csv"), buf)?;
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            other => Err(format!("unknown format {other:?}; use csv or text")),
        }
    }
}

/// Re-renders `report.csv` from an output directory.
pub fn cmd_report(out_dir: &Path, platform: Platform, format: ReportFormat) -> Result<String> {
    let path = out_dir.join("report.csv");
    let mut by_metric: BTreeMap<Metric, Vec<EvalRow>> = BTreeMap::new();
    for r in eval::parse_report_csv(&read_to_string(&path)?)? {
        by_metric.entry(r.metric).or_default().push(r);
    }
    let tables = by_metric
        .into_iter()
        .map(|(m, rows)| ReportTable::new(platform, m, rows))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match format {
        ReportFormat::Csv => eval::render_csv(&tables),
        ReportFormat::Text => eval::render_text(&tables),
    })
}
