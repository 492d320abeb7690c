//! Exhaustive order search.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_with, rolling_test_rmse, FitOptions, Result, SarimaError, SarimaFit, SarimaSpec};
use crate::timeseries::train_len;

/// Candidate values for one order: `[lo, hi]` (inclusive) or `{"values": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderRange {
    Interval([usize; 2]),
    Values { values: Vec<usize> },
}

impl OrderRange {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OrderRange::Interval([lo, hi]) => (*lo..=*hi).collect(),
            OrderRange::Values { values } => values.clone(),
        }
    }
}

impl Default for OrderRange {
    fn default() -> Self {
        OrderRange::Interval([0, 0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    HoldoutRmse,
    Aic,
}

/// JSON keys are `p,d,q,P,D,Q,s`; missing keys default to `[0,0]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub p: OrderRange,
    #[serde(default)]
    pub d: OrderRange,
    #[serde(default)]
    pub q: OrderRange,
    #[serde(default, rename = "P")]
    pub seasonal_p: OrderRange,
    #[serde(default, rename = "D")]
    pub seasonal_d: OrderRange,
    #[serde(default, rename = "Q")]
    pub seasonal_q: OrderRange,
    #[serde(default)]
    pub s: OrderRange,
    #[serde(default)]
    pub selection: Selection,
}

impl GridSpec {
    pub fn singleton(spec: SarimaSpec) -> Self {
        let one = |v: usize| OrderRange::Values { values: vec![v] };
        Self {
            p: one(spec.p),
            d: one(spec.d),
            q: one(spec.q),
            seasonal_p: one(spec.seasonal_p),
            seasonal_d: one(spec.seasonal_d),
            seasonal_q: one(spec.seasonal_q),
            s: one(spec.period),
            selection: Selection::HoldoutRmse,
        }
    }

    /// Distinct valid specs of the Cartesian product, in lexicographic order.
    ///
    /// A period of 0 drops the seasonal orders; a spec with no seasonal
    /// orders has its period set to 0; period 1 with seasonal orders is
    /// skipped.
    pub fn candidates(&self) -> Result<Vec<SarimaSpec>> {
        let axes = [
            self.p.values(),
            self.d.values(),
            self.q.values(),
            self.seasonal_p.values(),
            self.seasonal_d.values(),
            self.seasonal_q.values(),
            self.s.values(),
        ];
        if axes.iter().any(Vec::is_empty) {
            return Err(SarimaError::EmptyGrid);
        }
        let mut out = BTreeSet::new();
        for &p in &axes[0] {
            for &d in &axes[1] {
                for &q in &axes[2] {
                    for &sp in &axes[3] {
                        for &sd in &axes[4] {
                            for &sq in &axes[5] {
                                for &s in &axes[6] {
                                    let (sp, sd, sq, s) = match (sp + sd + sq, s) {
                                        (_, 0) | (0, _) => (0, 0, 0, 0),
                                        (_, 1) => continue,
                                        _ => (sp, sd, sq, s),
                                    };
                                    out.insert(SarimaSpec {
                                        p,
                                        d,
                                        q,
                                        seasonal_p: sp,
                                        seasonal_d: sd,
                                        seasonal_q: sq,
                                        period: s,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub spec: SarimaSpec,
    /// Holdout RMSE or AIC; lower is better.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: SarimaSpec,
    pub fit: SarimaFit,
    pub selection: Selection,
    pub scores: Vec<CandidateScore>,
}

/// Lowest score, then smaller `p+q+P+Q`, then lexicographic order.
pub(crate) fn select_best(scores: &[CandidateScore]) -> Option<&CandidateScore> {
    scores
        .iter()
        .filter(|c| c.score.is_some())
        .min_by(|a, b| {
            let (sa, sb) = (a.score.unwrap_or(f64::INFINITY), b.score.unwrap_or(f64::INFINITY));
            sa.total_cmp(&sb)
                .then(a.spec.complexity().cmp(&b.spec.complexity()))
                .then(a.spec.as_tuple().cmp(&b.spec.as_tuple()))
        })
}

fn score_candidate(train: &[f64], spec: &SarimaSpec, selection: Selection, validation_fraction: f64, opts: &FitOptions) -> Result<f64> {
    let score = match selection {
        Selection::HoldoutRmse => {
            let cut = train_len(train.len(), 1.0 - validation_fraction);
            let (fit_part, holdout) = train.split_at(cut.min(train.len()));
            let fit = fit_with(fit_part, spec, opts)?;
            rolling_test_rmse(&fit, fit_part, holdout)?
        }
        Selection::Aic => {
            let fit = fit_with(train, spec, opts)?;
            let m = fit.residuals.len() as f64;
            2.0 * spec.n_params() as f64 + m * (fit.sse / m).ln()
        }
    };
    Ok(score)
}

/// Scores every candidate (in parallel; the winner does not depend on
/// evaluation order) and refits the winner on the full training series.
pub fn grid_search(
    train: &[f64],
    grid: &GridSpec,
    validation_fraction: f64,
    opts: &FitOptions,
) -> Result<GridOutcome> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) && grid.selection == Selection::HoldoutRmse {
        return Err(SarimaError::InvalidSpec(format!(
            "validation fraction {validation_fraction} must lie in (0, 1)"
        )));
    }
    let candidates = grid.candidates()?;
    if candidates.is_empty() {
        return Err(SarimaError::EmptyGrid);
    }
    let scores: Vec<CandidateScore> = candidates
        .par_iter()
        .map(|spec| match score_candidate(train, spec, grid.selection, validation_fraction, opts) {
            Ok(s) if !s.is_nan() && s != f64::INFINITY => CandidateScore {
                spec: *spec,
                score: Some(s),
                error: None,
            },
            Ok(s) => CandidateScore {
                spec: *spec,
                score: None,
                error: Some(format!("non-finite score {s}")),
            },
            Err(e) => CandidateScore {
                spec: *spec,
                score: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let Some(winner) = select_best(&scores) else {
        return Err(SarimaError::AllCandidatesFailed(
            scores
                .into_iter()
                .map(|c| (c.spec, c.error.unwrap_or_default()))
                .collect(),
        ));
    };
    let best = winner.spec;
    let fit = fit_with(train, &best, opts)?;
    Ok(GridOutcome {
        best,
        fit,
        selection: grid.selection,
        scores,
    })
}
