//! Logistic market-penetration curves and the per-year share budget.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathway::PathwayId;
use crate::series::Year;

/// Shares below this are lifted before the logit transform.
pub const SHARE_FLOOR: f64 = 0.005;
/// Non-remainder total after rescaling an over-budget year.
pub const RESCALE_TARGET: f64 = 0.99;

#[derive(Debug, Error, PartialEq)]
pub enum AdoptionError {
    #[error("invalid logistic parameters: {0}")]
    InvalidParams(String),
    #[error("share {share} at {year} outside (0, {ceiling})")]
    ShareOutOfRange { year: Year, share: f64, ceiling: f64 },
    #[error("calibration needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate fit: logit slope {slope} is not positive")]
    DegenerateFit { slope: f64 },
    #[error("non-remainder shares sum to {total} in {year}, exceeding 1")]
    ShareBudgetExceeded { year: Year, total: f64 },
    #[error("pathway {0} has no adoption parameters")]
    MissingParams(PathwayId),
    #[error("remainder pathway {0} must not carry adoption parameters")]
    RemainderHasParams(PathwayId),
}

/// `S(t) = ceiling / (1 + exp(-rate (t - midpoint)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub ceiling: f64,
    pub rate: f64,
    pub midpoint: f64,
}

impl LogisticParams {
    pub fn new(ceiling: f64, rate: f64, midpoint: f64) -> Result<Self, AdoptionError> {
        let p = Self {
            ceiling,
            rate,
            midpoint,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AdoptionError> {
        if !(self.ceiling > 0.0 && self.ceiling <= 1.0) {
            return Err(AdoptionError::InvalidParams(format!(
                "ceiling {} must be in (0, 1]",
                self.ceiling
            )));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(AdoptionError::InvalidParams(format!(
                "rate {} must be positive",
                self.rate
            )));
        }
        if !self.midpoint.is_finite() {
            return Err(AdoptionError::InvalidParams("midpoint must be finite".into()));
        }
        Ok(())
    }

    pub fn share(&self, year: f64) -> f64 {
        self.ceiling / (1.0 + (-self.rate * (year - self.midpoint)).exp())
    }
}

pub fn logistic_share(params: &LogisticParams, year: Year) -> f64 {
    params.share(f64::from(year))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: LogisticParams,
    /// RMS residual on the logit scale.
    pub residual_rms: f64,
}

/// Least-squares line through `ln(S / (L - S))` against year.
///
/// Shares below [`SHARE_FLOOR`] are lifted to it first; anything still
/// outside `(0, L)` is rejected.
pub fn calibrate_logistic(points: &[(Year, f64)], ceiling: f64) -> Result<Calibration, AdoptionError> {
    if points.len() < 2 {
        return Err(AdoptionError::TooFewPoints(points.len()));
    }
    if !(ceiling > 0.0 && ceiling <= 1.0) {
        return Err(AdoptionError::InvalidParams(format!(
            "ceiling {ceiling} must be in (0, 1]"
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut zs = Vec::with_capacity(points.len());
    for &(year, share) in points {
        if !(share >= 0.0 && share < ceiling) {
            return Err(AdoptionError::ShareOutOfRange {
                year,
                share,
                ceiling,
            });
        }
        let s = share.max(SHARE_FLOOR);
        if s >= ceiling {
            return Err(AdoptionError::ShareOutOfRange {
                year,
                share,
                ceiling,
            });
        }
        xs.push(f64::from(year));
        zs.push((s / (ceiling - s)).ln());
    }
    // Centre the years so the normal equations stay well-conditioned at
    // calendar-year magnitudes.
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let z_mean = zs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxz: f64 = xs
        .iter()
        .zip(&zs)
        .map(|(x, z)| (x - x_mean) * (z - z_mean))
        .sum();
    let slope = if sxx > 0.0 { sxz / sxx } else { 0.0 };
    if !(slope > 0.0) {
        return Err(AdoptionError::DegenerateFit { slope });
    }
    // z = z_mean + slope (x - x_mean) crosses zero at the midpoint.
    let midpoint = x_mean - z_mean / slope;
    let residual_rms = (xs
        .iter()
        .zip(&zs)
        .map(|(x, z)| (z - (z_mean + slope * (x - x_mean))).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(Calibration {
        params: LogisticParams::new(ceiling, slope, midpoint)?,
        residual_rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMode {
    /// Over-budget years are scaled down to [`RESCALE_TARGET`].
    #[default]
    Rescale,
    /// Over-budget years are an error.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareRow {
    pub year: Year,
    /// Shares including the remainder pathway; sums to one.
    pub shares: BTreeMap<PathwayId, f64>,
    /// Non-remainder total before any rescaling.
    pub raw_total: f64,
    pub rescaled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareTable {
    pub remainder: PathwayId,
    pub rows: Vec<ShareRow>,
}

impl ShareTable {
    pub fn row(&self, year: Year) -> Option<&ShareRow> {
        self.rows.iter().find(|r| r.year == year)
    }

    pub fn rescaled_years(&self) -> Vec<Year> {
        self.rows.iter().filter(|r| r.rescaled).map(|r| r.year).collect()
    }
}

/// Evaluates every non-remainder curve per year and gives the remainder
/// pathway whatever share is left.
pub fn build_share_table(
    pathways: &[PathwayId],
    remainder: PathwayId,
    params: &BTreeMap<PathwayId, LogisticParams>,
    years: impl IntoIterator<Item = Year>,
    mode: ShareMode,
) -> Result<ShareTable, AdoptionError> {
    if params.contains_key(&remainder) {
        return Err(AdoptionError::RemainderHasParams(remainder));
    }
    for id in pathways.iter().filter(|&&id| id != remainder) {
        if !params.contains_key(id) {
            return Err(AdoptionError::MissingParams(*id));
        }
    }
    for p in params.values() {
        p.validate()?;
    }
    let mut rows = Vec::new();
    for year in years {
        let mut shares: BTreeMap<PathwayId, f64> = pathways
            .iter()
            .filter(|&&id| id != remainder)
            .map(|&id| (id, logistic_share(&params[&id], year)))
            .collect();
        let raw_total: f64 = shares.values().sum();
        let rescaled = raw_total > 1.0;
        if rescaled {
            match mode {
                ShareMode::Strict => {
                    return Err(AdoptionError::ShareBudgetExceeded {
                        year,
                        total: raw_total,
                    })
                }
                ShareMode::Rescale => {
                    let factor = RESCALE_TARGET / raw_total;
                    shares.values_mut().for_each(|s| *s *= factor);
                }
            }
        }
        let used: f64 = shares.values().sum();
        shares.insert(remainder, (1.0 - used).max(0.0));
        rows.push(ShareRow {
            year,
            shares,
            raw_total,
            rescaled,
        });
    }
    Ok(ShareTable { remainder, rows })
}
