//! RMSE scoring, train/test evaluation and report rendering.
//!
//! One-step kinds are scored rolling-origin: every test day is predicted from
//! the observed history up to the day before, never from earlier
//! predictions. The multistep kind slides 14-day windows over the test
//! period and scores each of the 5 steps separately.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::forecasters::{forecast_multistep, predict_next, ForecastError, ForecasterKind, ModelPayload, TrainedForecaster};
use crate::ingest::{Leaning, Platform};
use crate::timeseries::{Metric, SplitPair};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot score {predicted} predictions against {actual} values")]
    Length { predicted: usize, actual: usize },
    #[error("nothing to score")]
    Empty,
    #[error("{kind} needs a test series of at least {needed} points, got {got}")]
    ShortTest { kind: ForecasterKind, needed: usize, got: usize },
    #[error("duplicate row for {kind} / {leaning}")]
    DuplicateRow { kind: ForecasterKind, leaning: Leaning },
    #[error("report line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("plot needs at least one non-empty series")]
    EmptyPlot,
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

type Result<T, E = EvalError> = std::result::Result<T, E>;

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(EvalError::Length {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let sq: f64 = predicted.iter().zip(actual).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sq / predicted.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: ForecasterKind,
    pub leaning: Leaning,
    pub metric: Metric,
    pub train_rmse: Option<f64>,
    pub test_rmse: f64,
    /// Steps t+1 through t+5; multistep rows only.
    pub per_step_rmse: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub platform: Platform,
    pub metric: Metric,
    pub rows: Vec<EvalRow>,
}

impl ReportTable {
    /// Orders rows by (kind, leaning); a repeated cell is an error.
    pub fn new(platform: Platform, metric: Metric, mut rows: Vec<EvalRow>) -> Result<Self> {
        rows.sort_by_key(|r| (r.model, r.leaning));
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert((r.model, r.leaning)) {
                return Err(EvalError::DuplicateRow {
                    kind: r.model,
                    leaning: r.leaning,
                });
            }
        }
        Ok(Self { platform, metric, rows })
    }
}

/// Rolling one-step predictions for `values[start..]`, each from the
/// values before it.
fn rolling_predictions(model: &TrainedForecaster, values: &[f64], start: usize) -> Result<Vec<f64>> {
    (start..values.len())
        .map(|i| Ok(predict_next(model, &values[..i])?))
        .collect()
}

/// Pooled and per-step errors of 5-day forecasts from every 14-day window
/// of `values`.
fn multistep_errors(model: &TrainedForecaster, values: &[f64]) -> Result<(f64, [f64; 5])> {
    let mut per_step = [0.0; 5];
    let mut count = 0usize;
    for w in values.windows(19) {
        let pred = forecast_multistep(model, &w[..14])?;
        for k in 0..5 {
            per_step[k] += (pred[k] - w[14 + k]).powi(2);
        }
        count += 1;
    }
    if count == 0 {
        return Err(EvalError::Empty);
    }
    let pooled = (per_step.iter().sum::<f64>() / (5 * count) as f64).sqrt();
    Ok((pooled, per_step.map(|s| (s / count as f64).sqrt())))
}

/// Scores a model fit on `split.train`.
pub fn evaluate(model: &TrainedForecaster, split: &SplitPair) -> Result<EvalRow> {
    let kind = model.kind;
    let train = &split.train.values;
    let test = &split.test.values;
    let needed = kind.lookback().map_or(1, |l| l + kind.horizon());
    if test.len() < needed {
        return Err(EvalError::ShortTest {
            kind,
            needed,
            got: test.len(),
        });
    }
    let row = |train_rmse, test_rmse, per_step_rmse| EvalRow {
        model: kind,
        leaning: split.train.leaning,
        metric: split.train.metric,
        train_rmse,
        test_rmse,
        per_step_rmse,
    };
    if kind == ForecasterKind::Multistep {
        let (train_rmse, _) = multistep_errors(model, train)?;
        let (test_rmse, per_step) = multistep_errors(model, test)?;
        return Ok(row(Some(train_rmse), test_rmse, Some(per_step)));
    }
    let train_rmse = match (&model.model, kind.lookback()) {
        (ModelPayload::Sarima(fit), _) => Some(fit.train_rmse),
        (_, Some(l)) => Some(rmse(&rolling_predictions(model, train, l)?, &train[l..])?),
        _ => None,
    };
    let mut full = train.clone();
    full.extend_from_slice(test);
    let preds = rolling_predictions(model, &full, train.len())?;
    Ok(row(train_rmse, rmse(&preds, test)?, None))
}

pub const CSV_HEADER: &str = "model,leaning,metric,train_rmse,test_rmse,step1,step2,step3,step4,step5";

pub const PROTOCOL_NOTE: &str = "Test RMSE: rolling one-step forecasts, each conditioned on the observed history up to the previous day. \
Multistep rows slide a 14-day lookback with its 5 following days across the test period; step k scores the k-th day ahead.";

fn fmt2(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn csv_line(r: &EvalRow) -> String {
    let steps: Vec<String> = match r.per_step_rmse {
        Some(s) => s.iter().map(|v| format!("{v:.2}")).collect(),
        None => vec![String::new(); 5],
    };
    format!(
        "{},{},{},{},{:.2},{}",
        r.model,
        r.leaning,
        r.metric,
        fmt2(r.train_rmse),
        r.test_rmse,
        steps.join(",")
    )
}

/// CSV with two-decimal values, one line per row of every table.
pub fn render_csv(tables: &[ReportTable]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in tables.iter().flat_map(|t| &t.rows) {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

/// Aligned plain text, one block per table, with the protocol note.
pub fn render_text(tables: &[ReportTable]) -> String {
    let headers = ["model", "leaning", "train", "test", "t+1", "t+2", "t+3", "t+4", "t+5"];
    let mut out = String::new();
    for t in tables {
        let _ = writeln!(out, "{} / {}", t.platform, t.metric);
        let cells: Vec<Vec<String>> = t
            .rows
            .iter()
            .map(|r| {
                let mut c = vec![
                    r.model.to_string(),
                    r.leaning.to_string(),
                    fmt2(r.train_rmse),
                    format!("{:.2}", r.test_rmse),
                ];
                c.extend((0..5).map(|k| fmt2(r.per_step_rmse.map(|s| s[k]))));
                c
            })
            .collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|j| cells.iter().map(|c| c[j].len()).chain([headers[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |c: &[String]| {
            c.iter()
                .enumerate()
                .map(|(j, v)| if j < 2 { format!("{v:<w$}", w = widths[j]) } else { format!("{v:>w$}", w = widths[j]) })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let head: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(out, "{}", line(&head));
        for c in &cells {
            let _ = writeln!(out, "{}", line(c));
        }
        out.push('\n');
    }
    out.push_str(PROTOCOL_NOTE);
    out.push('\n');
    out
}

/// CSV and text renderings.
pub fn render_report(tables: &[ReportTable]) -> (String, String) {
    (render_csv(tables), render_text(tables))
}

/// Reads rows back from [`render_csv`] output.
pub fn parse_report_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(EvalError::Parse {
            line: 1,
            detail: format!("expected header {CSV_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let err = |detail: String| EvalError::Parse { line, detail };
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 10 {
            return Err(err(format!("{} fields, expected 10", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let steps = f[5..]
            .iter()
            .map(|s| opt(s))
            .collect::<Result<Vec<_>>>()?;
        let per_step_rmse = match steps.iter().filter(|s| s.is_some()).count() {
            0 => None,
            5 => Some(std::array::from_fn(|k| steps[k].expect("counted"))),
            _ => return Err(err("step columns must be all empty or all filled".into())),
        };
        rows.push(EvalRow {
            model: f[0].parse().map_err(err)?,
            leaning: f[1].parse().map_err(|e| err(format!("{e}")))?,
            metric: f[2].parse().map_err(err)?,
            train_rmse: opt(f[3])?,
            test_rmse: num(f[4])?,
            per_step_rmse,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart over a date axis, one polyline and legend entry per series.
pub fn emit_plot(title: &str, series: &[PlotSeries]) -> Result<String> {
    let series: Vec<&PlotSeries> = series.iter().filter(|s| !s.values.is_empty()).collect();
    if series.is_empty() {
        return Err(EvalError::EmptyPlot);
    }
    let (w, h) = (800.0, 400.0);
    let (left, right, top, bottom) = (60.0, 160.0, 30.0, 40.0);
    let first = series.iter().map(|s| s.start_date).min().expect("non-empty");
    let last = series
        .iter()
        .map(|s| s.start_date + Duration::days(s.values.len() as i64 - 1))
        .max()
        .expect("non-empty");
    let span = ((last - first).num_days().max(1)) as f64;
    let finite = series.iter().flat_map(|s| s.values.iter()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let x_of = |d: NaiveDate| left + (d - first).num_days() as f64 / span * plot_w;
    let y_of = |v: f64| top + (hi - v) / (hi - lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{left}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let (x0, x1, y0, y1) = (left, left + plot_w, top, top + plot_h);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2},{y0:.2} L{x0:.2},{y1:.2} L{x1:.2},{y1:.2}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.2}</text>"#,
            left - 5.0,
            y + 3.0
        );
    }
    for k in 0..=4 {
        let d = first + Duration::days((span * k as f64 / 4.0).round() as i64);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{d}</text>"#,
            x_of(d),
            y1 + 15.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(j, &v)| format!("{:.2},{:.2}", x_of(s.start_date + Duration::days(j as i64)), y_of(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 * i as f64 + 10.0;
        let lx = x1 + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 25.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(model: ForecasterKind, leaning: Leaning, train: Option<f64>, test: f64) -> EvalRow {
        EvalRow {
            model,
            leaning,
            metric: Metric::PostCount,
            train_rmse: train,
            test_rmse: test,
            per_step_rmse: None,
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355339).abs() < 1e-7);
        assert_eq!(rmse(&[1.0], &[4.0]).unwrap(), 3.0);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(EvalError::Length { .. })));
        assert!(matches!(rmse(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn csv_formatting() {
        let t = ReportTable::new(
            Platform::Twitter,
            Metric::PostCount,
            vec![row(ForecasterKind::Sarima, Leaning::Left, Some(10.5), 66.1)],
        )
        .unwrap();
        let csv = render_csv(&[t]);
        assert_eq!(csv, format!("{CSV_HEADER}\nsarima,left,post_count,10.50,66.10,,,,,\n"));
        assert_eq!(render_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn published_sarima_row_formats() {
        let published = [
            (Leaning::Left, 66.10),
            (Leaning::Right, 31.29),
            (Leaning::Center, 70.15),
            (Leaning::LeftLeaning, 155.72),
            (Leaning::RightLeaning, 13.07),
        ];
        let rows = published
            .iter()
            .map(|&(l, v)| row(ForecasterKind::Sarima, l, None, v))
            .collect();
        let t = ReportTable::new(Platform::Twitter, Metric::PostCount, rows).unwrap();
        let csv = render_csv(std::slice::from_ref(&t));
        for (l, v) in published {
            assert!(csv.contains(&format!("sarima,{l},post_count,,{v:.2},,,,,")));
        }
        let text = render_text(&[t]);
        assert!(text.contains("155.72") && text.contains(PROTOCOL_NOTE));
    }

    #[test]
    fn duplicate_cells_are_rejected() {
        let r = row(ForecasterKind::Lstm1Day, Leaning::Right, None, 1.0);
        assert!(ReportTable::new(Platform::Gab, Metric::LikesSum, vec![r.clone(), r]).is_err());
    }

    #[test]
    fn multistep_rows_carry_five_steps() {
        let mut r = row(ForecasterKind::Multistep, Leaning::Center, Some(1.0), 2.0);
        r.per_step_rmse = Some([1.0, 1.5, 2.0, 2.25, 3.0]);
        let t = ReportTable::new(Platform::Twitter, Metric::PostCount, vec![r.clone()]).unwrap();
        let csv = render_csv(&[t]);
        assert!(csv.ends_with("multistep_14_5,center,post_count,1.00,2.00,1.00,1.50,2.00,2.25,3.00\n"));
        assert_eq!(parse_report_csv(&csv).unwrap(), vec![r]);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_report_csv("nope\n").is_err());
        assert!(parse_report_csv(&format!("{CSV_HEADER}\nsarima,left,post_count,1.00,2.00,1.00,,,,\n")).is_err());
        assert!(parse_report_csv(&format!("{CSV_HEADER}\nsarima,left\n")).is_err());
    }

    fn series(label: &str, values: Vec<f64>) -> PlotSeries {
        PlotSeries {
            label: label.into(),
            start_date: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
            values,
        }
    }

    #[test]
    fn plot_structure() {
        let svg = emit_plot("t", &[series("left", vec![1.0, 3.0, 2.0])]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 3);
        let two = [series("left", vec![1.0, 2.0]), series("right & co", vec![2.0, 1.0, 0.0])];
        let svg = emit_plot("t", &two).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("class=\"legend\"").count(), 2);
        assert!(svg.contains("right &amp; co"));
        assert_eq!(svg, emit_plot("t", &two).unwrap());
        assert!(matches!(emit_plot("t", &[]), Err(EvalError::EmptyPlot)));
    }

    fn two_decimals() -> impl Strategy<Value = f64> {
        (0u32..10_000_000).prop_map(|c| c as f64 / 100.0)
    }

    proptest! {
        #[test]
        fn rmse_properties(p in prop::collection::vec(-1e3f64..1e3, 1..40), a in -10.0f64..10.0) {
            let y: Vec<f64> = p.iter().rev().copied().collect();
            prop_assert_eq!(rmse(&p, &p).unwrap(), 0.0);
            let r = rmse(&p, &y).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert_eq!(r, rmse(&y, &p).unwrap());
            let sp: Vec<f64> = p.iter().map(|v| a * v).collect();
            let sy: Vec<f64> = y.iter().map(|v| a * v).collect();
            prop_assert!((rmse(&sp, &sy).unwrap() - a.abs() * r).abs() <= 1e-9 * (1.0 + r * a.abs()));
        }

        #[test]
        fn csv_round_trip(
            cells in prop::collection::btree_map((0usize..5, 0usize..5), (prop::option::of(two_decimals()), two_decimals(), prop::array::uniform5(two_decimals())), 0..12)
        ) {
            let rows: Vec<EvalRow> = cells
                .into_iter()
                .map(|((k, l), (train, test, steps))| {
                    let model = ForecasterKind::ALL[k];
                    EvalRow {
                        model,
                        leaning: Leaning::ALL[l],
                        metric: Metric::LikesSum,
                        train_rmse: train,
                        test_rmse: test,
                        per_step_rmse: (model == ForecasterKind::Multistep).then_some(steps),
                    }
                })
                .collect();
            let t = ReportTable::new(Platform::Gab, Metric::LikesSum, rows).unwrap();
            prop_assert_eq!(parse_report_csv(&render_csv(std::slice::from_ref(&t))).unwrap(), t.rows);
        }
    }
}
