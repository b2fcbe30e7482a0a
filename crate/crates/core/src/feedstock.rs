//! MSW composition, per-component ethanol yields and the local capacity ramp.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::Year;

#[derive(Debug, Error, PartialEq)]
pub enum FeedstockError {
    #[error("unknown MSW component `{0}`")]
    UnknownComponent(String),
    #[error("unknown built-in MSW profile `{0}`")]
    UnknownProfile(String),
    #[error("yield point {0} outside [0, 1]")]
    YieldPoint(f64),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid capacity ramp: {0}")]
    InvalidRamp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suitability {
    Low,
    Moderate,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MswComponent {
    pub name: String,
    /// Share of total MSW mass.
    pub fraction: f64,
    /// Gallons of ethanol per dry ton.
    pub yield_lo: f64,
    pub yield_hi: f64,
    pub suitability: Suitability,
}

impl MswComponent {
    fn new(name: &str, fraction: f64, yield_lo: f64, yield_hi: f64, suitability: Suitability) -> Self {
        Self {
            name: name.to_string(),
            fraction,
            yield_lo,
            yield_hi,
            suitability,
        }
    }

    pub fn yield_at(&self, point: f64) -> f64 {
        self.yield_lo + point * (self.yield_hi - self.yield_lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MswProfile {
    pub total_tons_per_year: f64,
    pub components: Vec<MswComponent>,
}

pub const BUILTIN_PROFILES: &[&str] = &["nyc-2024"];

impl MswProfile {
    /// New York City organic fractions: 14 M t/yr total, inorganic remainder
    /// implicit.
    pub fn nyc_2024() -> Self {
        use Suitability::*;
        Self {
            total_tons_per_year: 14.0e6,
            components: vec![
                MswComponent::new("paper_cardboard", 0.27, 70.0, 85.0, High),
                MswComponent::new("food_waste", 0.23, 75.0, 90.0, High),
                MswComponent::new("yard_trimmings", 0.07, 65.0, 80.0, Moderate),
                MswComponent::new("wood_residues", 0.05, 60.0, 75.0, Moderate),
                MswComponent::new("textiles_rubber_leather", 0.06, 40.0, 60.0, Low),
            ],
        }
    }

    pub fn builtin(name: &str) -> Result<Self, FeedstockError> {
        match name {
            "nyc-2024" => Ok(Self::nyc_2024()),
            other => Err(FeedstockError::UnknownProfile(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), FeedstockError> {
        if !(self.total_tons_per_year >= 0.0 && self.total_tons_per_year.is_finite()) {
            return Err(FeedstockError::InvalidProfile(
                "total_tons_per_year must be non-negative".into(),
            ));
        }
        let mut sum = 0.0;
        for c in &self.components {
            if !(0.0..=1.0).contains(&c.fraction) {
                return Err(FeedstockError::InvalidProfile(format!(
                    "{}: fraction {} outside [0, 1]",
                    c.name, c.fraction
                )));
            }
            if !(c.yield_lo >= 0.0 && c.yield_lo <= c.yield_hi) {
                return Err(FeedstockError::InvalidProfile(format!(
                    "{}: need 0 <= yield_lo <= yield_hi, got {}..{}",
                    c.name, c.yield_lo, c.yield_hi
                )));
            }
            sum += c.fraction;
        }
        if sum > 1.0 + 1e-12 {
            return Err(FeedstockError::InvalidProfile(format!(
                "component fractions sum to {sum}, above 1"
            )));
        }
        Ok(())
    }
}

/// Knobs for turning a profile into ethanol volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldOptions {
    /// Interpolates each component's yield range, 0 = low end, 1 = high end.
    #[serde(default = "half")]
    pub yield_point: f64,
    /// Dry mass per ton as generated. 1.0 treats tonnage as dry.
    #[serde(default = "one")]
    pub moisture_factor: f64,
    /// Components below this suitability are left out of the total.
    #[serde(default = "moderate")]
    pub min_suitability: Suitability,
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn moderate() -> Suitability {
    Suitability::Moderate
}

impl Default for YieldOptions {
    fn default() -> Self {
        Self {
            yield_point: 0.5,
            moisture_factor: 1.0,
            min_suitability: Suitability::Moderate,
        }
    }
}

fn check_point(point: f64) -> Result<(), FeedstockError> {
    if (0.0..=1.0).contains(&point) {
        Ok(())
    } else {
        Err(FeedstockError::YieldPoint(point))
    }
}

fn component_mgal(profile: &MswProfile, c: &MswComponent, opts: &YieldOptions) -> f64 {
    profile.total_tons_per_year * opts.moisture_factor * c.fraction * c.yield_at(opts.yield_point) / 1e6
}

/// Million gallons per year from one named component.
pub fn component_ethanol(profile: &MswProfile, name: &str, opts: &YieldOptions) -> Result<f64, FeedstockError> {
    check_point(opts.yield_point)?;
    let c = profile
        .components
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| FeedstockError::UnknownComponent(name.to_string()))?;
    Ok(component_mgal(profile, c, opts))
}

/// Per-component potentials for every component at or above the threshold.
pub fn component_breakdown(profile: &MswProfile, opts: &YieldOptions) -> Result<Vec<(String, f64)>, FeedstockError> {
    check_point(opts.yield_point)?;
    Ok(profile
        .components
        .iter()
        .filter(|c| c.suitability >= opts.min_suitability)
        .map(|c| (c.name.clone(), component_mgal(profile, c, opts)))
        .collect())
}

/// Million gallons per year across eligible components.
pub fn total_potential(profile: &MswProfile, opts: &YieldOptions) -> Result<f64, FeedstockError> {
    Ok(component_breakdown(profile, opts)?.iter().map(|(_, v)| v).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityRamp {
    #[serde(default = "ramp_start_year")]
    pub start_year: Year,
    #[serde(default = "ramp_start_capacity")]
    pub start_capacity: f64,
    #[serde(default = "ramp_end_year")]
    pub end_year: Year,
    #[serde(default = "ramp_end_capacity")]
    pub end_capacity: f64,
}

fn ramp_start_year() -> Year {
    2028
}
fn ramp_start_capacity() -> f64 {
    200.0
}
fn ramp_end_year() -> Year {
    2035
}
fn ramp_end_capacity() -> f64 {
    300.0
}

impl Default for CapacityRamp {
    fn default() -> Self {
        Self {
            start_year: ramp_start_year(),
            start_capacity: ramp_start_capacity(),
            end_year: ramp_end_year(),
            end_capacity: ramp_end_capacity(),
        }
    }
}

impl CapacityRamp {
    pub fn validate(&self) -> Result<(), FeedstockError> {
        if self.end_year <= self.start_year {
            return Err(FeedstockError::InvalidRamp(format!(
                "end_year {} must follow start_year {}",
                self.end_year, self.start_year
            )));
        }
        if !(self.start_capacity >= 0.0 && self.end_capacity >= 0.0) {
            return Err(FeedstockError::InvalidRamp("capacities must be non-negative".into()));
        }
        Ok(())
    }
}

/// Million gallons per year of local MSW ethanol capacity.
pub fn capacity_at(ramp: &CapacityRamp, year: Year) -> f64 {
    if year < ramp.start_year {
        0.0
    } else if year >= ramp.end_year {
        ramp.end_capacity
    } else {
        let t = f64::from(year - ramp.start_year) / f64::from(ramp.end_year - ramp.start_year);
        ramp.start_capacity + t * (ramp.end_capacity - ramp.start_capacity)
    }
}
