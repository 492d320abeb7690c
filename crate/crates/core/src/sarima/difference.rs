//! Ordinary and seasonal differencing with exact inversion.
//!
//! Differencing is applied as a chain of lag operators `(1 - B^k)`: `D` stages
//! of lag `s` followed by `d` stages of lag 1. Each stage keeps its first `k`
//! values so the chain can be rebuilt.

use serde::{Deserialize, Serialize};

use super::SarimaError;

/// The lag of each differencing stage, in application order.
pub fn stage_lags(d: usize, seasonal_d: usize, period: usize) -> Vec<usize> {
    std::iter::repeat_n(period, seasonal_d)
        .chain(std::iter::repeat_n(1, d))
        .collect()
}

/// Everything `invert` needs to undo `difference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffContext {
    pub lags: Vec<usize>,
    /// First `lags[j]` values of the series entering stage `j`.
    pub prefixes: Vec<Vec<f64>>,
}

/// Applies `(1 - B)^d (1 - B^s)^D`. Output length is `n - d - D*s`.
pub fn difference(
    values: &[f64],
    d: usize,
    seasonal_d: usize,
    period: usize,
) -> Result<(Vec<f64>, DiffContext), SarimaError> {
    if seasonal_d > 0 && period < 2 {
        return Err(SarimaError::InvalidSpec(format!(
            "seasonal differencing needs a period of at least 2, got {period}"
        )));
    }
    let consumed = d + seasonal_d * period;
    if values.len() <= consumed {
        return Err(SarimaError::TooShort {
            needed: consumed + 1,
            got: values.len(),
        });
    }
    let lags = stage_lags(d, seasonal_d, period);
    let mut current = values.to_vec();
    let mut prefixes = Vec::with_capacity(lags.len());
    for &lag in &lags {
        prefixes.push(current[..lag].to_vec());
        current = lag_difference(&current, lag);
    }
    Ok((current, DiffContext { lags, prefixes }))
}

fn lag_difference(values: &[f64], lag: usize) -> Vec<f64> {
    values.iter().skip(lag).zip(values).map(|(a, b)| a - b).collect()
}

/// Rebuilds the original series from its differences.
pub fn invert(differenced: &[f64], ctx: &DiffContext) -> Vec<f64> {
    let mut current = differenced.to_vec();
    for (lag, prefix) in ctx.lags.iter().rev().zip(ctx.prefixes.iter().rev()) {
        let mut rebuilt = Vec::with_capacity(current.len() + lag);
        rebuilt.extend_from_slice(prefix);
        for (i, w) in current.iter().enumerate() {
            let v = w + rebuilt[i];
            rebuilt.push(v);
        }
        current = rebuilt;
    }
    current
}

/// Intermediate series of the differencing chain, `stages[0]` being the input
/// and the last entry the fully differenced series. Used to extend forecasts
/// back to the original scale one value at a time.
#[derive(Debug, Clone)]
pub(crate) struct DiffStages {
    lags: Vec<usize>,
    stages: Vec<Vec<f64>>,
}

impl DiffStages {
    /// Requires `values.len() >= sum(lags)`; the differenced series may be empty.
    pub(crate) fn new(values: &[f64], lags: Vec<usize>) -> Option<Self> {
        if values.len() < lags.iter().sum::<usize>() {
            return None;
        }
        let mut stages = vec![values.to_vec()];
        for &lag in &lags {
            let next = lag_difference(stages.last().expect("non-empty"), lag);
            stages.push(next);
        }
        Some(Self { lags, stages })
    }

    pub(crate) fn differenced(&self) -> &[f64] {
        self.stages.last().expect("non-empty")
    }

    /// Appends a value to the differenced series and returns the matching
    /// value on the original scale.
    pub(crate) fn push_differenced(&mut self, value: f64) -> f64 {
        let last = self.stages.len() - 1;
        self.stages[last].push(value);
        let mut carried = value;
        for j in (0..last).rev() {
            let stage = &mut self.stages[j];
            carried += stage[stage.len() - self.lags[j]];
            stage.push(carried);
        }
        carried
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference() {
        let (w, _) = difference(&[1.0, 3.0, 6.0], 1, 0, 0).unwrap();
        assert_eq!(w, vec![2.0, 3.0]);
    }

    #[test]
    fn seasonal_difference() {
        let (w, _) = difference(&[1.0, 2.0, 3.0, 4.0], 0, 1, 2).unwrap();
        assert_eq!(w, vec![2.0, 2.0]);
    }

    #[test]
    fn too_short_and_bad_period() {
        assert!(matches!(difference(&[1.0, 2.0], 2, 0, 0), Err(SarimaError::TooShort { .. })));
        assert!(matches!(difference(&[1.0; 20], 0, 1, 1), Err(SarimaError::InvalidSpec(_))));
    }

    #[test]
    fn zero_order_is_identity() {
        let x = [0.3, -1.7, 2.25];
        let (w, ctx) = difference(&x, 0, 0, 0).unwrap();
        assert_eq!(w, x);
        assert_eq!(invert(&w, &ctx), x);
    }

    #[test]
    fn inverts_combined_orders() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7919) % 113) as f64).collect();
        let (w, ctx) = difference(&x, 2, 1, 7).unwrap();
        assert_eq!(w.len(), 40 - 2 - 7);
        assert_eq!(invert(&w, &ctx), x);
    }

    #[test]
    fn stages_extend_like_integration() {
        let x: Vec<f64> = (0..30).map(|i| ((i * 31) % 17) as f64).collect();
        let lags = stage_lags(1, 1, 4);
        let mut stages = DiffStages::new(&x[..25], lags).unwrap();
        let (full, _) = difference(&x, 1, 1, 4).unwrap();
        for (i, &target) in x[25..].iter().enumerate() {
            let w = full[25 - 5 + i];
            assert_eq!(stages.push_differenced(w), target);
        }
    }
}
