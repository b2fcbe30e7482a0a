//! Incentive stack (RIN categories and the 45V credit), investor revenue, jobs,
//! indirect impact and consumer fuel cost.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathway::{Feedstock, PathwayId};
use crate::series::Year;

#[derive(Debug, Error, PartialEq)]
pub enum EconomicsError {
    #[error("no price for {0}")]
    MissingPrice(PathwayId),
    #[error("invalid incentive schedule: {0}")]
    InvalidSchedule(String),
    #[error("{what} must be non-negative, got {value}")]
    Negative { what: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RinCategory {
    D5,
    D6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RinMode {
    /// MSW ethanol earns D5, corn ethanol D6.
    #[default]
    Replication,
    /// D5 only with at least a 50% cut against the petroleum baseline.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncentiveSchedule {
    #[serde(default = "d6")]
    pub d6_usd_per_gal: f64,
    #[serde(default = "d5")]
    pub d5_usd_per_gal: f64,
    #[serde(default = "c45v")]
    pub cfpc45v_usd_per_gal: f64,
    /// Qualifying CI band for the 45V credit, gCO2e/MJ.
    #[serde(default = "band")]
    pub ci_band_45v: [f64; 2],
    #[serde(default)]
    pub enforce_ci_band: bool,
    /// First year of local MSW production, and of 45V eligibility.
    #[serde(default = "local_start")]
    pub local_start_year: Year,
    #[serde(default)]
    pub rin_mode: RinMode,
    #[serde(default = "baseline")]
    pub baseline_ci: f64,
}

fn d6() -> f64 {
    0.56
}
fn d5() -> f64 {
    0.75
}
fn c45v() -> f64 {
    0.75
}
fn band() -> [f64; 2] {
    [25.0, 50.0]
}
fn local_start() -> Year {
    2028
}
fn baseline() -> f64 {
    92.0
}

impl Default for IncentiveSchedule {
    fn default() -> Self {
        Self {
            d6_usd_per_gal: d6(),
            d5_usd_per_gal: d5(),
            cfpc45v_usd_per_gal: c45v(),
            ci_band_45v: band(),
            enforce_ci_band: false,
            local_start_year: local_start(),
            rin_mode: RinMode::default(),
            baseline_ci: baseline(),
        }
    }
}

impl IncentiveSchedule {
    pub fn validate(&self) -> Result<(), EconomicsError> {
        for (what, value) in [
            ("d6_usd_per_gal", self.d6_usd_per_gal),
            ("d5_usd_per_gal", self.d5_usd_per_gal),
            ("cfpc45v_usd_per_gal", self.cfpc45v_usd_per_gal),
        ] {
            if !(value >= 0.0) {
                return Err(EconomicsError::Negative { what, value });
            }
        }
        let [lo, hi] = self.ci_band_45v;
        if !(lo < hi) {
            return Err(EconomicsError::InvalidSchedule(format!(
                "ci_band_45v lower bound {lo} must be below upper bound {hi}"
            )));
        }
        if !(self.baseline_ci > 0.0) {
            return Err(EconomicsError::InvalidSchedule("baseline_ci must be positive".into()));
        }
        Ok(())
    }
}

pub fn rin_category(feedstock: Feedstock, ci: f64, schedule: &IncentiveSchedule) -> RinCategory {
    match (schedule.rin_mode, feedstock) {
        (_, Feedstock::Corn | Feedstock::Fossil) => RinCategory::D6,
        (RinMode::Replication, Feedstock::Msw) => RinCategory::D5,
        (RinMode::Strict, Feedstock::Msw) => {
            if ci <= 0.5 * schedule.baseline_ci {
                RinCategory::D5
            } else {
                RinCategory::D6
            }
        }
    }
}

/// Whether a gallon of `feedstock` ethanol at `ci` earns the 45V credit.
pub fn earns_45v(year: Year, feedstock: Feedstock, ci: f64, schedule: &IncentiveSchedule) -> bool {
    let [lo, hi] = schedule.ci_band_45v;
    feedstock == Feedstock::Msw
        && year >= schedule.local_start_year
        && (!schedule.enforce_ci_band || (lo..=hi).contains(&ci))
}

/// USD per gallon: the RIN price for the gallon's category, plus 45V when earned.
pub fn incentive_per_gallon(year: Year, feedstock: Feedstock, ci: f64, schedule: &IncentiveSchedule) -> f64 {
    let rin = match rin_category(feedstock, ci, schedule) {
        RinCategory::D5 => schedule.d5_usd_per_gal,
        RinCategory::D6 => schedule.d6_usd_per_gal,
    };
    let credit = if earns_45v(year, feedstock, ci, schedule) {
        schedule.cfpc45v_usd_per_gal
    } else {
        0.0
    };
    rin + credit
}

/// Gallons of one feedstock and the CI they were produced at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedstockVolume {
    pub feedstock: Feedstock,
    pub million_gallons: f64,
    pub ci: f64,
}

/// USD earned across the feedstock split.
pub fn investor_revenue(year: Year, split: &[FeedstockVolume], schedule: &IncentiveSchedule) -> Result<f64, EconomicsError> {
    let mut total = 0.0;
    for v in split {
        if !(v.million_gallons >= 0.0) {
            return Err(EconomicsError::Negative {
                what: "gallons",
                value: v.million_gallons,
            });
        }
        total += v.million_gallons * 1e6 * incentive_per_gallon(year, v.feedstock, v.ci, schedule);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconCoefficients {
    #[serde(default = "jobs_per")]
    pub jobs_per_million_gal: f64,
    #[serde(default = "indirect_per")]
    pub indirect_usd_per_gal: f64,
}

fn jobs_per() -> f64 {
    15.0
}
fn indirect_per() -> f64 {
    1.50
}

impl Default for EconCoefficients {
    fn default() -> Self {
        Self {
            jobs_per_million_gal: jobs_per(),
            indirect_usd_per_gal: indirect_per(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jobs {
    pub exact: f64,
    pub rounded: i64,
}

pub fn jobs_created(million_gallons: f64, coeffs: &EconCoefficients) -> Jobs {
    let exact = million_gallons * coeffs.jobs_per_million_gal;
    Jobs {
        exact,
        rounded: exact.round() as i64,
    }
}

/// USD of indirect activity.
pub fn indirect_impact(million_gallons: f64, coeffs: &EconCoefficients) -> f64 {
    million_gallons * 1e6 * coeffs.indirect_usd_per_gal
}

/// Static retail prices, USD/gal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlendPriceTable(pub BTreeMap<PathwayId, f64>);

impl Default for BlendPriceTable {
    fn default() -> Self {
        use PathwayId::*;
        Self(BTreeMap::from([
            (Gasoline, 3.50),
            (E10, 3.45),
            (E15, 3.40),
            (E30, 3.30),
            (E85, 2.90),
        ]))
    }
}

impl BlendPriceTable {
    pub fn get(&self, id: PathwayId) -> Result<f64, EconomicsError> {
        self.0.get(&id).copied().ok_or(EconomicsError::MissingPrice(id))
    }

    /// Prices fall strictly as the ethanol fraction rises.
    pub fn check_ordering(&self) -> Result<(), String> {
        let mut entries: Vec<_> = self.0.iter().collect();
        entries.sort_by(|a, b| {
            a.0.nominal_ethanol_fraction()
                .total_cmp(&b.0.nominal_ethanol_fraction())
        });
        for w in entries.windows(2) {
            if !(w[1].1 < w[0].1) {
                return Err(format!("{} price {} is not below {} price {}", w[1].0, w[1].1, w[0].0, w[0].1));
            }
        }
        Ok(())
    }
}

/// USD spent at the pump for the given million-gallon volumes.
pub fn consumer_fuel_cost(volumes: &[(PathwayId, f64)], prices: &BlendPriceTable) -> Result<f64, EconomicsError> {
    volumes
        .iter()
        .map(|&(id, v)| prices.get(id).map(|p| v * 1e6 * p))
        .sum()
}
