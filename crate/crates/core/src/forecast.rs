//! ARIMA with exogenous regressors on annual data, estimated by conditional
//! least squares (CSS) with a Nelder-Mead search.
//!
//! Model on the d-times differenced series `z`:
//!
//! ```text
//! z_t = c + Σ phi_i z_{t-i} + Σ theta_j e_{t-j} + Σ beta_k x_{k,t} + e_t
//! ```
//!
//! Residuals before the first `p` observations are zero (the conditional part
//! of CSS). Seasonal terms are accepted only in their degenerate annual form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{self, SimplexOptions};
use crate::series::{AnnualSeries, SeriesError, Unit, Year};

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("seasonal order {0:?} unsupported on annual data; only (0,0,0,1) is accepted")]
    SeasonalUnsupported([u32; 4]),
    #[error("series too short: need {needed} observations, have {have}")]
    SeriesTooShort { needed: usize, have: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("model has {0} exogenous coefficients but no future regressor values were supplied")]
    MissingExog(usize),
    #[error("AR polynomial is not stationary (phi = {0:?})")]
    NonStationary(Vec<f64>),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self, ForecastError> {
        if d > 2 {
            return Err(ForecastError::InvalidOrder(format!("d = {d}, must be 0, 1 or 2")));
        }
        if p + q == 0 && d == 0 {
            return Err(ForecastError::InvalidOrder("(0,0,0) has no dynamics".into()));
        }
        Ok(Self { p, d, q })
    }
}

/// Accepts the seasonal part `(P, D, Q, s)` only when it is `(0, 0, 0, 1)`.
pub fn check_seasonal(seasonal: [u32; 4]) -> Result<(), ForecastError> {
    if seasonal == [0, 0, 0, 1] {
        Ok(())
    } else {
        Err(ForecastError::SeasonalUnsupported(seasonal))
    }
}

/// Exogenous regressors: one column per regressor, one value per year.
pub type Regressors = Vec<Vec<f64>>;

/// Output of [`difference`]: the differenced values plus the leading value of
/// every intermediate level, which is what integration needs to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct Differenced {
    pub start_year: Year,
    pub values: Vec<f64>,
    pub unit: Unit,
    heads: Vec<f64>,
}

impl Differenced {
    pub fn order(&self) -> usize {
        self.heads.len()
    }

    /// Cumulative-sum inversion back to the original series.
    pub fn integrate(&self) -> Result<AnnualSeries, SeriesError> {
        let mut level = self.values.clone();
        for &head in self.heads.iter().rev() {
            let mut up = Vec::with_capacity(level.len() + 1);
            up.push(head);
            let mut acc = head;
            for v in &level {
                acc += v;
                up.push(acc);
            }
            level = up;
        }
        AnnualSeries::new(self.start_year - self.heads.len() as Year, level, self.unit)
    }
}

fn diff_once(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn difference(series: &AnnualSeries, d: usize) -> Result<Differenced, ForecastError> {
    if series.len() <= d {
        return Err(ForecastError::SeriesTooShort {
            needed: d + 1,
            have: series.len(),
        });
    }
    let mut values = series.values().to_vec();
    let mut heads = Vec::with_capacity(d);
    for _ in 0..d {
        heads.push(values[0]);
        values = diff_once(&values);
    }
    Ok(Differenced {
        start_year: series.start_year() + d as Year,
        values,
        unit: series.unit(),
        heads,
    })
}

/// Candidate coefficients in model order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArimaParams {
    pub intercept: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ArimaParams {
    pub fn zeros(order: ArimaOrder, n_exog: usize) -> Self {
        Self {
            intercept: 0.0,
            phi: vec![0.0; order.p],
            theta: vec![0.0; order.q],
            beta: vec![0.0; n_exog],
        }
    }
}

/// One-step-ahead residuals of the differenced series under `params`.
pub fn css_residuals(
    params: &ArimaParams,
    series: &[f64],
    exog: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>, ForecastError> {
    let n = series.len();
    let n_exog = exog.map_or(0, |x| x.len());
    if n_exog != params.beta.len() {
        return Err(ForecastError::DimensionMismatch(format!(
            "{} beta coefficients but {} regressors",
            params.beta.len(),
            n_exog
        )));
    }
    if let Some(cols) = exog {
        if let Some(bad) = cols.iter().find(|c| c.len() != n) {
            return Err(ForecastError::DimensionMismatch(format!(
                "regressor has {} values, series has {n}",
                bad.len()
            )));
        }
    }
    let p = params.phi.len();
    let mut resid = vec![0.0; n];
    for t in p..n {
        let mut pred = params.intercept;
        for (i, phi) in params.phi.iter().enumerate() {
            pred += phi * series[t - 1 - i];
        }
        for (j, theta) in params.theta.iter().enumerate() {
            if t > j {
                pred += theta * resid[t - 1 - j];
            }
        }
        if let Some(cols) = exog {
            for (b, col) in params.beta.iter().zip(cols) {
                pred += b * col[t];
            }
        }
        resid[t] = series[t] - pred;
    }
    Ok(resid)
}

/// Conditional sum of squared one-step residuals.
pub fn css_loss(
    params: &ArimaParams,
    series: &[f64],
    exog: Option<&[Vec<f64>]>,
) -> Result<f64, ForecastError> {
    let p = params.phi.len();
    Ok(css_residuals(params, series, exog)?[p.min(series.len())..]
        .iter()
        .map(|e| e * e)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitWarning {
    /// Iteration cap reached with a simplex diameter above 1e-4.
    NonConvergence,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Estimate a constant term. `None` means: yes for d = 0, no for d >= 1
    /// (a constant on a differenced series is a deterministic drift).
    pub intercept: Option<bool>,
    /// Reject fits whose AR polynomial has a root on or inside the unit circle.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    pub training_span: (Year, Year),
    pub has_intercept: bool,
    pub css: f64,
    pub iterations: usize,
    pub stationary: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<FitWarning>,
}

impl ArimaModel {
    pub fn params(&self) -> ArimaParams {
        ArimaParams {
            intercept: self.intercept,
            phi: self.phi.clone(),
            theta: self.theta.clone(),
            beta: self.beta.clone(),
        }
    }

    /// MA(infinity) weights of the integrated process, psi_0 = 1.
    pub fn psi_weights(&self, count: usize) -> Vec<f64> {
        // a(B) = phi(B) (1 - B)^d, written as 1 - Σ a_i B^i.
        let mut poly = vec![1.0];
        poly.extend(self.phi.iter().map(|p| -p));
        for _ in 0..self.order.d {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c;
            }
            poly = next;
        }
        let a: Vec<f64> = poly[1..].iter().map(|c| -c).collect();
        let mut psi = Vec::with_capacity(count);
        for j in 0..count {
            let mut w = if j == 0 {
                1.0
            } else {
                self.theta.get(j - 1).copied().unwrap_or(0.0)
            };
            for (i, ai) in a.iter().enumerate() {
                if j > i {
                    w += ai * psi[j - 1 - i];
                }
            }
            psi.push(w);
        }
        psi
    }
}

/// Stationarity via the step-down (inverse Levinson) recursion: the AR
/// polynomial has all roots outside the unit circle iff every partial
/// autocorrelation has modulus below one.
pub fn is_stationary(phi: &[f64]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        a = (0..m - 1).map(|j| (a[j] + k * a[m - 2 - j]) / denom).collect();
    }
    true
}

fn exog_window(exog: Option<&[Vec<f64>]>, skip: usize) -> Option<Regressors> {
    exog.map(|cols| cols.iter().map(|c| c[skip..].to_vec()).collect())
}

fn check_exog_len(exog: Option<&[Vec<f64>]>, n: usize) -> Result<(), ForecastError> {
    if let Some(cols) = exog {
        if let Some(bad) = cols.iter().find(|c| c.len() != n) {
            return Err(ForecastError::DimensionMismatch(format!(
                "regressor has {} values, series has {n}",
                bad.len()
            )));
        }
    }
    Ok(())
}

/// Fits by minimizing [`css_loss`]. The starting point is every coefficient
/// at 0.1 with the intercept at the differenced-series mean.
pub fn fit_arima(
    series: &AnnualSeries,
    order: ArimaOrder,
    exog: Option<&[Vec<f64>]>,
    options: &FitOptions,
) -> Result<ArimaModel, ForecastError> {
    check_exog_len(exog, series.len())?;
    let diffed = difference(series, order.d)?;
    let z = &diffed.values;
    let needed = 3 * (order.p + order.q + 1);
    if z.len() < needed {
        return Err(ForecastError::SeriesTooShort {
            needed,
            have: z.len(),
        });
    }
    let x = exog_window(exog, order.d);
    let x_ref = x.as_deref();
    let n_exog = x.as_ref().map_or(0, |c| c.len());
    let with_intercept = options.intercept.unwrap_or(order.d == 0);
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let training_span = (series.start_year(), series.end_year());

    // A constant differenced series carries no information about dynamics.
    let spread = z.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    if spread <= 1e-12 * mean.abs().max(1.0) && n_exog == 0 {
        let mut params = ArimaParams::zeros(order, 0);
        if with_intercept {
            params.intercept = mean;
        }
        let css = css_loss(&params, z, None)?;
        let n_resid = z.len() - order.p;
        return Ok(ArimaModel {
            order,
            phi: params.phi,
            theta: params.theta,
            beta: params.beta,
            intercept: params.intercept,
            sigma2: css / n_resid as f64,
            training_span,
            has_intercept: with_intercept,
            css,
            iterations: 0,
            stationary: true,
            warning: None,
        });
    }

    let unpack = |v: &[f64]| -> ArimaParams {
        let mut it = v.iter().copied();
        let intercept = if with_intercept { it.next().unwrap() } else { 0.0 };
        let phi = it.by_ref().take(order.p).collect();
        let theta = it.by_ref().take(order.q).collect();
        let beta = it.by_ref().take(n_exog).collect();
        ArimaParams {
            intercept,
            phi,
            theta,
            beta,
        }
    };

    let mut start = Vec::new();
    let mut steps = Vec::new();
    if with_intercept {
        start.push(mean);
        steps.push((0.1 * mean.abs()).max(0.1));
    }
    for _ in 0..order.p + order.q + n_exog {
        start.push(0.1);
        steps.push(0.1);
    }

    let objective = |v: &[f64]| css_loss(&unpack(v), z, x_ref).unwrap_or(f64::INFINITY);
    let result = optim::minimize(objective, &start, &steps, &SimplexOptions::for_dim(start.len()));
    let params = unpack(&result.params);
    let css = css_loss(&params, z, x_ref)?;
    let n_resid = z.len() - order.p;
    let stationary = is_stationary(&params.phi);
    if options.strict && !stationary {
        return Err(ForecastError::NonStationary(params.phi));
    }
    let warning = (!result.converged && result.diameter > 1e-4).then_some(FitWarning::NonConvergence);
    Ok(ArimaModel {
        order,
        phi: params.phi,
        theta: params.theta,
        beta: params.beta,
        intercept: params.intercept,
        sigma2: css / n_resid as f64,
        training_span,
        has_intercept: with_intercept,
        css,
        iterations: result.iterations,
        stationary,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forecast {
    pub start_year: Year,
    pub mean: Vec<f64>,
    /// 95% interval half-widths, one per step.
    pub half_width: Vec<f64>,
    pub unit: Unit,
}

impl Forecast {
    pub fn mean_series(&self) -> Result<AnnualSeries, SeriesError> {
        AnnualSeries::new(self.start_year, self.mean.clone(), self.unit)
    }

    pub fn end_year(&self) -> Year {
        self.start_year + self.mean.len() as Year - 1
    }

    pub fn get(&self, year: Year) -> Option<(f64, f64)> {
        let idx = usize::try_from(year - self.start_year).ok()?;
        Some((*self.mean.get(idx)?, self.half_width[idx]))
    }
}

/// Iterated one-step forecasts from the end of `source` (the training series),
/// re-integrated through `d`.
pub fn forecast(
    model: &ArimaModel,
    source: &AnnualSeries,
    exog: Option<&[Vec<f64>]>,
    horizon: usize,
    exog_future: Option<&[Vec<f64>]>,
) -> Result<Forecast, ForecastError> {
    if horizon == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    let n_exog = model.beta.len();
    let future = match (n_exog, exog_future) {
        (0, _) => None,
        (k, None) => return Err(ForecastError::MissingExog(k)),
        (k, Some(cols)) => {
            if cols.len() != k || cols.iter().any(|c| c.len() < horizon) {
                return Err(ForecastError::DimensionMismatch(format!(
                    "need {k} future regressors with {horizon} values each"
                )));
            }
            Some(cols)
        }
    };
    check_exog_len(exog, source.len())?;
    let d = model.order.d;
    let diffed = difference(source, d)?;
    let x = exog_window(exog, d);
    let resid = css_residuals(&model.params(), &diffed.values, x.as_deref())?;

    let mut z = diffed.values.clone();
    let mut e = resid;
    let n = z.len();
    for h in 0..horizon {
        let t = n + h;
        let mut pred = model.intercept;
        for (i, phi) in model.phi.iter().enumerate() {
            if t > i {
                pred += phi * z[t - 1 - i];
            }
        }
        for (j, theta) in model.theta.iter().enumerate() {
            if t > j {
                pred += theta * e[t - 1 - j];
            }
        }
        if let Some(cols) = future {
            for (b, col) in model.beta.iter().zip(cols) {
                pred += b * col[h];
            }
        }
        z.push(pred);
        e.push(0.0);
    }

    // Re-integrate: the last observed value at each differencing level seeds
    // the cumulative sum of the level below.
    let mut levels = vec![source.values().to_vec()];
    for k in 0..d {
        let next = diff_once(&levels[k]);
        levels.push(next);
    }
    let mut path: Vec<f64> = z[n..].to_vec();
    for k in (0..d).rev() {
        let mut acc = *levels[k].last().expect("non-empty level");
        path = path
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
    }

    let psi = model.psi_weights(horizon);
    let mut cum = 0.0;
    let half_width = psi
        .iter()
        .map(|w| {
            cum += w * w;
            1.96 * (model.sigma2 * cum).sqrt()
        })
        .collect();

    Ok(Forecast {
        start_year: source.end_year() + 1,
        mean: path,
        half_width,
        unit: source.unit(),
    })
}
