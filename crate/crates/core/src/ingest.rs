//! Post labeling and daily aggregation.
//!
//! A post inherits the leaning of the news domain it shares. Labeled posts are
//! bucketed by UTC calendar day into one series per leaning.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::timeseries::{DailySeries, Metric};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot parse domain from {0:?}")]
    DomainParse(String),
    #[error("bias table is empty")]
    EmptyBiasTable,
    #[error("duplicate domain {0:?} in bias table")]
    DuplicateDomain(String),
    #[error("unknown leaning {0:?} (expected left, left_leaning, center, right_leaning or right)")]
    UnknownLeaning(String),
    #[error("unknown platform {0:?} (expected twitter or gab)")]
    UnknownPlatform(String),
    #[error("invalid timestamp {0:?}")]
    Timestamp(String),
    #[error("sentiment {value} for post {post_id} is outside [-1, 1]")]
    SentimentRange { post_id: String, value: f64 },
    #[error("posts missing a sentiment score: {}", .0.join(", "))]
    MissingSentiment(Vec<String>),
    #[error("window start {start} is after window end {end}")]
    EmptyWindow { start: NaiveDate, end: NaiveDate },
    #[error("metric {0} cannot be aggregated from post counts")]
    UnsupportedMetric(Metric),
    #[error("row {row}: invalid {field} {value:?}")]
    Field { row: String, field: &'static str, value: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error("{path}: no posts")]
    NoPosts { path: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaning {
    Left,
    LeftLeaning,
    Center,
    RightLeaning,
    Right,
}

impl Leaning {
    pub const ALL: [Leaning; 5] = [
        Leaning::Left,
        Leaning::LeftLeaning,
        Leaning::Center,
        Leaning::RightLeaning,
        Leaning::Right,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Leaning::Left => "left",
            Leaning::LeftLeaning => "left_leaning",
            Leaning::Center => "center",
            Leaning::RightLeaning => "right_leaning",
            Leaning::Right => "right",
        }
    }
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Leaning {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self> {
        Leaning::ALL
            .into_iter()
            .find(|l| l.as_str() == s.trim())
            .ok_or_else(|| IngestError::UnknownLeaning(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    #[default]
    Twitter,
    Gab,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Gab => "gab",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "twitter" => Ok(Platform::Twitter),
            "gab" => Ok(Platform::Gab),
            _ => Err(IngestError::UnknownPlatform(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub timestamp: DateTime<Utc>,
    pub platform: Platform,
    pub url_or_domain: String,
    pub likes: u64,
    pub sentiment: Option<f64>,
}

impl PostRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPost {
    pub record: PostRecord,
    pub leaning: Leaning,
}

/// Inclusive calendar-date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(IngestError::EmptyWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days().max(-1) as usize + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    fn index_of(&self, date: NaiveDate) -> usize {
        (date - self.start).num_days() as usize
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.start, self.end).map(|_| ())
    }
}

impl Default for DateWindow {
    /// January through April 2018.
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2018, 4, 30).expect("valid date"),
        }
    }
}

/// Lowercased registrable domain of a URL or bare hostname, without `www.`.
pub fn extract_domain(url_or_domain: &str) -> Result<String> {
    let err = || IngestError::DomainParse(url_or_domain.to_string());
    let trimmed = url_or_domain.trim();
    if trimmed.is_empty() {
        return Err(err());
    }
    let parsed = if trimmed.contains("://") {
        url::Url::parse(trimmed)
    } else {
        url::Url::parse(&format!("http://{trimmed}"))
    }
    .map_err(|_| err())?;
    let host = match parsed.host() {
        Some(url::Host::Domain(h)) => h.to_ascii_lowercase(),
        _ => return Err(err()),
    };
    let host = host.trim_end_matches('.');
    let host = host.strip_prefix("www.").unwrap_or(host);
    let registrable = psl::domain_str(host).ok_or_else(err)?;
    Ok(registrable.to_string())
}

/// Domain → leaning lookup keyed by registrable domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    entries: BTreeMap<String, Leaning>,
}

impl BiasTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, domain: &str, leaning: Leaning) -> Result<()> {
        let key = extract_domain(domain)?;
        if self.entries.contains_key(&key) {
            return Err(IngestError::DuplicateDomain(key));
        }
        self.entries.insert(key, leaning);
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Leaning)>) -> Result<Self> {
        let mut table = Self::new();
        for (domain, leaning) in pairs {
            table.insert(domain, leaning)?;
        }
        Ok(table)
    }

    pub fn get(&self, domain: &str) -> Option<Leaning> {
        self.entries.get(&domain.to_ascii_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a `domain,leaning` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        check_header(rdr.headers()?, &["domain", "leaning"])?;
        let mut table = Self::new();
        for row in rdr.records() {
            let row = row?;
            let leaning: Leaning = row.get(1).unwrap_or_default().parse()?;
            table.insert(row.get(0).unwrap_or_default(), leaning)?;
        }
        Ok(table)
    }
}

pub fn label_post(post: &PostRecord, table: &BiasTable) -> Result<Option<Leaning>> {
    if table.is_empty() {
        return Err(IngestError::EmptyBiasTable);
    }
    let domain = extract_domain(&post.url_or_domain)?;
    Ok(table.get(&domain))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub total_posts: usize,
    pub labeled_posts: usize,
    pub unlabeled_posts: usize,
    pub per_leaning_counts: BTreeMap<Leaning, usize>,
    /// First and last calendar dates seen across all posts.
    pub date_range: Option<(NaiveDate, NaiveDate)>,
    pub in_window_posts: usize,
    pub unlabeled_in_window: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub labeled: Vec<LabeledPost>,
    pub summary: IngestSummary,
}

/// Labels every post; unknown domains are counted in the summary and dropped.
pub fn label_posts(posts: &[PostRecord], table: &BiasTable, window: &DateWindow) -> Result<Ingested> {
    window.validate()?;
    let mut labeled = Vec::new();
    let mut per_leaning_counts: BTreeMap<Leaning, usize> = Leaning::ALL.iter().map(|&l| (l, 0)).collect();
    let mut unlabeled_posts = 0;
    let mut unlabeled_in_window = 0;
    let mut in_window_posts = 0;
    for post in posts {
        let in_window = window.contains(post.date());
        in_window_posts += usize::from(in_window);
        match label_post(post, table)? {
            Some(leaning) => {
                *per_leaning_counts.entry(leaning).or_default() += 1;
                labeled.push(LabeledPost { record: post.clone(), leaning });
            }
            None => {
                unlabeled_posts += 1;
                unlabeled_in_window += usize::from(in_window);
            }
        }
    }
    let date_range = posts
        .iter()
        .map(PostRecord::date)
        .fold(None, |acc: Option<(NaiveDate, NaiveDate)>, d| match acc {
            None => Some((d, d)),
            Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
        });
    let summary = IngestSummary {
        total_posts: posts.len(),
        labeled_posts: labeled.len(),
        unlabeled_posts,
        per_leaning_counts,
        date_range,
        in_window_posts,
        unlabeled_in_window,
    };
    Ok(Ingested { labeled, summary })
}

/// One zero-filled series per leaning over `window`, for posts on `platform`.
pub fn aggregate_daily(
    posts: &[LabeledPost],
    metric: Metric,
    window: &DateWindow,
    platform: Platform,
) -> Result<BTreeMap<Leaning, DailySeries>> {
    window.validate()?;
    if !matches!(metric, Metric::PostCount | Metric::LikesSum) {
        return Err(IngestError::UnsupportedMetric(metric));
    }
    let days = window.days();
    let mut buckets: BTreeMap<Leaning, Vec<f64>> = Leaning::ALL.iter().map(|&l| (l, vec![0.0; days])).collect();
    for post in posts {
        let date = post.record.date();
        if post.record.platform != platform || !window.contains(date) {
            continue;
        }
        let amount = match metric {
            Metric::PostCount => 1.0,
            _ => post.record.likes as f64,
        };
        buckets.get_mut(&post.leaning).expect("all leanings present")[window.index_of(date)] += amount;
    }
    Ok(buckets
        .into_iter()
        .map(|(leaning, values)| {
            let series = DailySeries {
                start_date: window.start,
                values,
                platform,
                leaning,
                metric,
            };
            (leaning, series)
        })
        .collect())
}

/// Per-day mean sentiment where days without posts are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentSeries {
    pub start_date: NaiveDate,
    pub platform: Platform,
    pub leaning: Leaning,
    pub values: Vec<Option<f64>>,
}

pub fn daily_mean_sentiment(
    posts: &[LabeledPost],
    window: &DateWindow,
    platform: Platform,
) -> Result<BTreeMap<Leaning, SentimentSeries>> {
    window.validate()?;
    let included: Vec<&LabeledPost> = posts
        .iter()
        .filter(|p| p.record.platform == platform && window.contains(p.record.date()))
        .collect();
    let missing: Vec<String> = included
        .iter()
        .filter(|p| p.record.sentiment.is_none())
        .map(|p| p.record.post_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingSentiment(missing));
    }
    let days = window.days();
    let mut sums: BTreeMap<Leaning, Vec<(f64, usize)>> =
        Leaning::ALL.iter().map(|&l| (l, vec![(0.0, 0); days])).collect();
    for post in included {
        let slot = &mut sums.get_mut(&post.leaning).expect("all leanings present")[window.index_of(post.record.date())];
        slot.0 += post.record.sentiment.unwrap_or_default();
        slot.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(leaning, slots)| {
            let values = slots
                .into_iter()
                .map(|(sum, n)| (n > 0).then(|| sum / n as f64))
                .collect();
            let series = SentimentSeries {
                start_date: window.start,
                platform,
                leaning,
                values,
            };
            (leaning, series)
        })
        .collect())
}

/// Mean lexicon value over matched lowercase tokens, clamped to [-1, 1].
pub fn score_sentiment_lexicon(text: &str, lexicon: &HashMap<String, f64>) -> f64 {
    let (sum, n) = text
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .filter_map(|t| lexicon.get(&t.to_lowercase()))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).clamp(-1.0, 1.0)
    }
}

pub const POSTS_HEADER: [&str; 6] = ["post_id", "timestamp", "platform", "url_or_domain", "likes", "sentiment"];
pub const SERIES_HEADER: [&str; 6] = ["date", "left", "left_leaning", "center", "right_leaning", "right"];

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(IngestError::Header {
            found: found.iter().collect::<Vec<_>>().join(","),
            expected: expected.join(","),
        });
    }
    Ok(())
}

pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Ok(ts.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc());
        }
    }
    Err(IngestError::Timestamp(raw.to_string()))
}

/// Reads the posts CSV. An empty sentiment cell means no score.
pub fn read_posts<R: Read>(reader: R) -> Result<Vec<PostRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &POSTS_HEADER)?;
    let mut posts = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let post_id = field(0).to_string();
        let likes = field(4).parse::<u64>().map_err(|_| IngestError::Field {
            row: post_id.clone(),
            field: "likes",
            value: field(4).to_string(),
        })?;
        let sentiment = match field(5) {
            "" => None,
            s => {
                let value: f64 = s.parse().map_err(|_| IngestError::Field {
                    row: post_id.clone(),
                    field: "sentiment",
                    value: s.to_string(),
                })?;
                if !(-1.0..=1.0).contains(&value) {
                    return Err(IngestError::SentimentRange { post_id, value });
                }
                Some(value)
            }
        };
        posts.push(PostRecord {
            timestamp: parse_timestamp(field(1))?,
            platform: field(2).parse()?,
            url_or_domain: field(3).to_string(),
            likes,
            sentiment,
            post_id,
        });
    }
    Ok(posts)
}

fn series_dates(start: NaiveDate, len: usize) -> impl Iterator<Item = NaiveDate> {
    start.iter_days().take(len)
}

/// Writes the per-leaning series as `date,left,...,right`.
pub fn write_series_csv<W: Write>(writer: W, series: &BTreeMap<Leaning, DailySeries>) -> Result<()> {
    let cells: BTreeMap<Leaning, Vec<Option<f64>>> = series
        .iter()
        .map(|(l, s)| (*l, s.values.iter().copied().map(Some).collect()))
        .collect();
    let start = series.values().next().map(|s| s.start_date);
    write_leaning_table(writer, start, &cells)
}

/// Sentiment variant; days without posts are empty cells.
pub fn write_sentiment_csv<W: Write>(writer: W, series: &BTreeMap<Leaning, SentimentSeries>) -> Result<()> {
    let cells: BTreeMap<Leaning, Vec<Option<f64>>> =
        series.iter().map(|(l, s)| (*l, s.values.clone())).collect();
    let start = series.values().next().map(|s| s.start_date);
    write_leaning_table(writer, start, &cells)
}

fn write_leaning_table<W: Write>(
    writer: W,
    start: Option<NaiveDate>,
    cells: &BTreeMap<Leaning, Vec<Option<f64>>>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SERIES_HEADER)?;
    let len = cells.values().map(Vec::len).max().unwrap_or(0);
    if let Some(start) = start {
        for (i, date) in series_dates(start, len).enumerate() {
            let mut record = vec![date.format("%Y-%m-%d").to_string()];
            for leaning in Leaning::ALL {
                let cell = cells.get(&leaning).and_then(|v| v.get(i).copied().flatten());
                record.push(cell.map(|v| v.to_string()).unwrap_or_default());
            }
            wtr.write_record(&record)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a series CSV back into per-leaning columns (`None` for empty cells).
pub fn read_series_csv<R: Read>(reader: R) -> Result<(Option<NaiveDate>, BTreeMap<Leaning, Vec<Option<f64>>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &SERIES_HEADER)?;
    let mut start = None;
    let mut columns: BTreeMap<Leaning, Vec<Option<f64>>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        if start.is_none() {
            let date = NaiveDate::parse_from_str(row.get(0).unwrap_or_default(), "%Y-%m-%d")
                .map_err(|_| IngestError::Timestamp(row.get(0).unwrap_or_default().to_string()))?;
            start = Some(date);
        }
        for (i, leaning) in Leaning::ALL.into_iter().enumerate() {
            let cell = row.get(i + 1).unwrap_or_default();
            let value = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| IngestError::Field {
                    row: row.get(0).unwrap_or_default().to_string(),
                    field: leaning.as_str(),
                    value: cell.to_string(),
                })?)
            };
            columns.entry(leaning).or_default().push(value);
        }
    }
    Ok((start, columns))
}
