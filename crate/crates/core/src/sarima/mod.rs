//! Seasonal ARIMA with an additive seasonal structure, fitted by conditional
//! sum of squares.
//!
//! On the differenced series `y`, one-step predictions are
//!
//! ```text
//! y_t = c + sum_n alpha_n y_{t-n} + sum_n theta_n e_{t-n}
//!         + sum_n phi_n y_{t-s*n} + sum_n eta_n e_{t-s*n} + e_t
//! ```
//!
//! with residuals before the burn-in `max(p, s*P)` fixed at zero.

mod difference;
mod grid;
pub mod simplex;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use difference::{difference, invert, stage_lags, DiffContext};
pub use grid::{grid_search, CandidateScore, GridOutcome, GridSpec, OrderRange, Selection};

use difference::DiffStages;
use simplex::{minimize, SimplexOptions};

#[derive(Debug, thiserror::Error)]
pub enum SarimaError {
    #[error("invalid SARIMA spec: {0}")]
    InvalidSpec(String),
    #[error("parameter lengths do not match spec {spec}: {detail}")]
    ParamShape { spec: SarimaSpec, detail: String },
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("test series is empty")]
    EmptyTest,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("every grid candidate failed: {}", format_failures(.0))]
    AllCandidatesFailed(Vec<(SarimaSpec, String)>),
}

fn format_failures(failures: &[(SarimaSpec, String)]) -> String {
    failures
        .iter()
        .map(|(spec, why)| format!("{spec}: {why}"))
        .collect::<Vec<_>>()
        .join("; ")
}

type Result<T, E = SarimaError> = std::result::Result<T, E>;

/// Orders `(p,d,q)(P,D,Q,s)`. `s = 0` means no seasonal terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "SpecRepr", try_from = "SpecRepr")]
pub struct SarimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub period: usize,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    order: [usize; 3],
    seasonal: [usize; 4],
}

impl From<SarimaSpec> for SpecRepr {
    fn from(s: SarimaSpec) -> Self {
        Self {
            order: [s.p, s.d, s.q],
            seasonal: [s.seasonal_p, s.seasonal_d, s.seasonal_q, s.period],
        }
    }
}

impl TryFrom<SpecRepr> for SarimaSpec {
    type Error = SarimaError;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let [p, d, q] = r.order;
        let [sp, sd, sq, s] = r.seasonal;
        SarimaSpec::new(p, d, q, sp, sd, sq, s)
    }
}

impl SarimaSpec {
    pub fn new(
        p: usize,
        d: usize,
        q: usize,
        seasonal_p: usize,
        seasonal_d: usize,
        seasonal_q: usize,
        period: usize,
    ) -> Result<Self> {
        let spec = Self {
            p,
            d,
            q,
            seasonal_p,
            seasonal_d,
            seasonal_q,
            period,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.has_seasonal_terms() && self.period < 2 {
            return Err(SarimaError::InvalidSpec(format!(
                "{self}: seasonal orders need a period of at least 2"
            )));
        }
        Ok(())
    }

    fn has_seasonal_terms(&self) -> bool {
        self.seasonal_p + self.seasonal_d + self.seasonal_q > 0
    }

    /// `max(p, s*P)`: the first index whose prediction has all AR lags.
    pub fn burn_in(&self) -> usize {
        self.p.max(self.period * self.seasonal_p)
    }

    /// Values consumed by differencing, `d + D*s`.
    pub fn diff_len(&self) -> usize {
        self.d + self.seasonal_d * self.period
    }

    /// `p + q + P + Q`, the grid-search tie-break.
    pub fn complexity(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Constant plus every AR/MA coefficient.
    pub fn n_params(&self) -> usize {
        1 + self.complexity()
    }

    /// Minimum differenced length accepted by [`fit`].
    pub fn min_differenced_len(&self) -> usize {
        10 + self.p + self.q + self.period * (self.seasonal_p + self.seasonal_q)
    }

    fn as_tuple(&self) -> [usize; 7] {
        [self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period]
    }
}

impl fmt::Display for SarimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{},{})",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaParams {
    pub c: f64,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub eta: Vec<f64>,
    pub sigma2: f64,
}

impl SarimaParams {
    pub fn zeros(spec: &SarimaSpec) -> Self {
        Self {
            c: 0.0,
            alpha: vec![0.0; spec.p],
            theta: vec![0.0; spec.q],
            phi: vec![0.0; spec.seasonal_p],
            eta: vec![0.0; spec.seasonal_q],
            sigma2: 0.0,
        }
    }

    pub fn check(&self, spec: &SarimaSpec) -> Result<()> {
        let lens = [
            ("alpha", self.alpha.len(), spec.p),
            ("theta", self.theta.len(), spec.q),
            ("phi", self.phi.len(), spec.seasonal_p),
            ("eta", self.eta.len(), spec.seasonal_q),
        ];
        for (name, got, want) in lens {
            if got != want {
                return Err(SarimaError::ParamShape {
                    spec: *spec,
                    detail: format!("{name} has {got} coefficients, expected {want}"),
                });
            }
        }
        if !(self.sigma2 >= 0.0) {
            return Err(SarimaError::ParamShape {
                spec: *spec,
                detail: format!("sigma2 {} is negative", self.sigma2),
            });
        }
        Ok(())
    }

    /// Unpacks `[c, alpha.., theta.., phi.., eta..]`.
    fn from_vec(spec: &SarimaSpec, v: &[f64]) -> Self {
        let mut rest = &v[1..];
        let mut take = |k: usize| {
            let (head, tail) = rest.split_at(k);
            rest = tail;
            head.to_vec()
        };
        Self {
            c: v[0],
            alpha: take(spec.p),
            theta: take(spec.q),
            phi: take(spec.seasonal_p),
            eta: take(spec.seasonal_q),
            sigma2: 0.0,
        }
    }
}

/// Spec and coefficients as one JSON document:
/// `{"order":[..],"seasonal":[..],"c":..,"alpha":[..],..,"sigma2":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    #[serde(flatten)]
    pub spec: SarimaSpec,
    #[serde(flatten)]
    pub params: SarimaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub starts: usize,
    pub iterations: usize,
    pub zero_model_sse: f64,
    /// `sum |alpha| + sum |phi|`; at or above 1 the AR part may be explosive.
    pub ar_abs_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaFit {
    pub spec: SarimaSpec,
    pub params: SarimaParams,
    /// Residuals over the evaluated range of the differenced training series.
    pub residuals: Vec<f64>,
    pub sse: f64,
    pub converged: bool,
    pub train_rmse: f64,
    pub diagnostics: FitDiagnostics,
}

impl SarimaFit {
    pub fn model(&self) -> SarimaModel {
        SarimaModel {
            spec: self.spec,
            params: self.params.clone(),
        }
    }

    /// Wraps fixed parameters (no estimation) so they can be used for forecasting.
    pub fn from_params(spec: SarimaSpec, params: SarimaParams) -> Result<Self> {
        params.check(&spec)?;
        Ok(Self {
            spec,
            params,
            residuals: Vec::new(),
            sse: 0.0,
            converged: true,
            train_rmse: 0.0,
            diagnostics: FitDiagnostics {
                starts: 0,
                iterations: 0,
                zero_model_sse: 0.0,
                ar_abs_sum: 0.0,
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub seed: u64,
    /// Random restarts in addition to the zero start.
    pub restarts: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub coefficient_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 3,
            tolerance: 1e-8,
            max_iterations: 5000,
            coefficient_bound: 5.0,
        }
    }
}

fn one_step(y: &[f64], eps: &[f64], t: usize, spec: &SarimaSpec, params: &SarimaParams) -> f64 {
    let s = spec.period;
    let mut pred = params.c;
    for (k, a) in params.alpha.iter().enumerate() {
        pred += a * y[t - k - 1];
    }
    for (k, th) in params.theta.iter().enumerate() {
        if t > k {
            pred += th * eps[t - k - 1];
        }
    }
    for (k, ph) in params.phi.iter().enumerate() {
        pred += ph * y[t - s * (k + 1)];
    }
    for (k, et) in params.eta.iter().enumerate() {
        let lag = s * (k + 1);
        if t >= lag {
            pred += et * eps[t - lag];
        }
    }
    pred
}

/// Full-length residual vector (zeros before the burn-in) and the SSE over
/// the evaluated range. Caller guarantees `y.len() > burn_in`.
fn residuals_full(y: &[f64], spec: &SarimaSpec, params: &SarimaParams) -> (Vec<f64>, f64) {
    let mut eps = vec![0.0; y.len()];
    let mut sse = 0.0;
    for t in spec.burn_in()..y.len() {
        let e = y[t] - one_step(y, &eps, t, spec, params);
        eps[t] = e;
        sse += e * e;
    }
    (eps, sse)
}

/// Residuals for `t = burn_in..n` and their sum of squares.
pub fn css_residuals(differenced: &[f64], spec: &SarimaSpec, params: &SarimaParams) -> Result<(Vec<f64>, f64)> {
    params.check(spec)?;
    let burn_in = spec.burn_in();
    if differenced.len() <= burn_in {
        return Err(SarimaError::TooShort {
            needed: burn_in + 1,
            got: differenced.len(),
        });
    }
    let (eps, sse) = residuals_full(differenced, spec, params);
    Ok((eps[burn_in..].to_vec(), sse))
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SarimaError::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn fit(values: &[f64], spec: &SarimaSpec) -> Result<SarimaFit> {
    fit_with(values, spec, &FitOptions::default())
}

/// Minimizes the CSS from the zero parameter vector plus `restarts` seeded
/// perturbations of it, keeping the best.
pub fn fit_with(values: &[f64], spec: &SarimaSpec, opts: &FitOptions) -> Result<SarimaFit> {
    spec.validate()?;
    check_finite(values)?;
    let (y, _) = difference(values, spec.d, spec.seasonal_d, spec.period)?;
    let needed = spec.min_differenced_len();
    if y.len() < needed {
        return Err(SarimaError::TooShort {
            needed: needed + spec.diff_len(),
            got: values.len(),
        });
    }

    let evaluated = (y.len() - spec.burn_in()) as f64;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let scale = std.max(mean.abs()).max(1e-3);

    let k = spec.n_params();
    let bound = opts.coefficient_bound;
    let mut bounds = vec![(-bound, bound); k];
    bounds[0] = (f64::NEG_INFINITY, f64::INFINITY);
    let mut steps = vec![0.1; k];
    steps[0] = 0.5 * scale;

    let objective = |x: &[f64]| residuals_full(&y, spec, &SarimaParams::from_vec(spec, x)).1;
    let zero = vec![0.0; k];
    let zero_model_sse = objective(&zero);

    let simplex_opts = SimplexOptions {
        max_iterations: opts.max_iterations,
        tolerance: opts.tolerance,
    };
    let mut rng = crate::seed::tagged_rng(opts.seed, &format!("sarima-fit{spec}"));
    let mut starts = vec![zero];
    for _ in 0..opts.restarts {
        let mut x: Vec<f64> = (0..k).map(|_| rng.random_range(-0.3..0.3)).collect();
        x[0] = mean + rng.random_range(-0.5..0.5) * scale;
        starts.push(x);
    }

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut iterations = 0;
    for x0 in &starts {
        let first = minimize(objective, x0, &steps, &bounds, &simplex_opts);
        // restart once from the terminal point with a fresh simplex
        let small: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
        let polished = minimize(objective, &first.x, &small, &bounds, &simplex_opts);
        iterations += first.iterations + polished.iterations;
        let (x, f, conv) = if polished.f <= first.f {
            (polished.x, polished.f, polished.converged)
        } else {
            (first.x, first.f, first.converged)
        };
        if best.as_ref().is_none_or(|(_, bf, _)| f < *bf) {
            best = Some((x, f, conv));
        }
    }
    let (x, _, simplex_converged) = best.expect("at least the zero start");
    let mut params = SarimaParams::from_vec(spec, &x);
    let (eps, sse) = residuals_full(&y, spec, &params);
    params.sigma2 = sse / evaluated;
    let improved = sse < zero_model_sse || zero_model_sse == 0.0;
    let ar_abs_sum = params.alpha.iter().chain(&params.phi).map(|v| v.abs()).sum();
    Ok(SarimaFit {
        spec: *spec,
        residuals: eps[spec.burn_in()..].to_vec(),
        sse,
        converged: simplex_converged && improved,
        train_rmse: (sse / evaluated).sqrt(),
        params,
        diagnostics: FitDiagnostics {
            starts: starts.len(),
            iterations,
            zero_model_sse,
            ar_abs_sum,
        },
    })
}

/// `h` forecasts on the original scale, conditioning on `history` with
/// frozen parameters. Future innovations are zero.
pub fn forecast(fit: &SarimaFit, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let spec = &fit.spec;
    check_finite(history)?;
    let needed = spec.diff_len() + spec.burn_in();
    let lags = stage_lags(spec.d, spec.seasonal_d, spec.period);
    let mut stages = match DiffStages::new(history, lags) {
        Some(s) if history.len() >= needed => s,
        _ => {
            return Err(SarimaError::TooShort {
                needed,
                got: history.len(),
            })
        }
    };
    let mut y = stages.differenced().to_vec();
    let (mut eps, _) = if y.len() > spec.burn_in() {
        residuals_full(&y, spec, &fit.params)
    } else {
        (vec![0.0; y.len()], 0.0)
    };
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = y.len();
        let next = one_step(&y, &eps, t, spec, &fit.params);
        y.push(next);
        eps.push(0.0);
        out.push(stages.push_differenced(next));
    }
    Ok(out)
}

/// RMSE of one-step forecasts over `test`, each conditioning on
/// `train ++ test[..i]`.
pub fn rolling_test_rmse(fit: &SarimaFit, train: &[f64], test: &[f64]) -> Result<f64> {
    let preds = rolling_one_step(fit, train, test)?;
    let sq: f64 = preds.iter().zip(test).map(|(p, y)| (p - y).powi(2)).sum();
    Ok((sq / test.len() as f64).sqrt())
}

pub fn rolling_one_step(fit: &SarimaFit, train: &[f64], test: &[f64]) -> Result<Vec<f64>> {
    if test.is_empty() {
        return Err(SarimaError::EmptyTest);
    }
    let mut history = train.to_vec();
    let mut preds = Vec::with_capacity(test.len());
    for &actual in test {
        preds.push(forecast(fit, &history, 1)?[0]);
        history.push(actual);
    }
    Ok(preds)
}

/// Forward simulation driven by `innovations`, with pre-sample values and
/// innovations at zero, integrated back through any differencing.
pub fn simulate(spec: &SarimaSpec, params: &SarimaParams, innovations: &[f64]) -> Vec<f64> {
    let n = innovations.len();
    let s = spec.period;
    let mut y = vec![0.0; n];
    for t in 0..n {
        let mut v = params.c + innovations[t];
        for (k, a) in params.alpha.iter().enumerate() {
            if t > k {
                v += a * y[t - k - 1];
            }
        }
        for (k, th) in params.theta.iter().enumerate() {
            if t > k {
                v += th * innovations[t - k - 1];
            }
        }
        for (k, ph) in params.phi.iter().enumerate() {
            let lag = s * (k + 1);
            if t >= lag {
                v += ph * y[t - lag];
            }
        }
        for (k, et) in params.eta.iter().enumerate() {
            let lag = s * (k + 1);
            if t >= lag {
                v += et * innovations[t - lag];
            }
        }
        y[t] = v;
    }
    let ctx = DiffContext {
        lags: stage_lags(spec.d, spec.seasonal_d, spec.period),
        prefixes: stage_lags(spec.d, spec.seasonal_d, spec.period)
            .into_iter()
            .map(|lag| vec![0.0; lag])
            .collect(),
    };
    let integrated = invert(&y, &ctx);
    integrated[spec.diff_len()..].to_vec()
}
