//! Carbon intensity: quoted blend table, energy-weighted mixing, the
//! exponential-decay trajectory for MSW ethanol, and fleet emissions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathway::{Feedstock, PathwayId, LHV_ETHANOL, LHV_GASOLINE};
use crate::series::Year;

#[derive(Debug, Error, PartialEq)]
pub enum CarbonError {
    #[error("no CI table entry for {blend} from {feedstock}")]
    MissingTableEntry { blend: PathwayId, feedstock: Feedstock },
    #[error("year {year} precedes decay origin {t0}")]
    YearBeforeT0 { year: Year, t0: Year },
    #[error("anchor CI {ci} is not above the asymptote {ci_inf}")]
    AnchorBelowAsymptote { ci: f64, ci_inf: f64 },
    #[error("invalid decay anchors: {0}")]
    InvalidAnchors(String),
    #[error("invalid carbon parameters: {0}")]
    InvalidParams(String),
    #[error("emission inputs misaligned: {0}")]
    UnitMismatch(String),
}

/// How blend CIs are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMode {
    /// Quoted per-blend values from [`CiLookup`].
    #[default]
    Replication,
    /// Energy-weighted mixing of gasoline with the year's ethanol pool CI.
    Formula,
}

/// `CI(t) = ci_inf + (ci0 - ci_inf) exp(-lambda (t - t0))`.
///
/// `lambda` may be left out in config, in which case it is solved from the
/// origin and `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    #[serde(default = "default_ci0")]
    pub ci0: f64,
    #[serde(default = "default_ci_inf")]
    pub ci_inf: f64,
    #[serde(default = "default_t0")]
    pub t0: Year,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_target")]
    pub target: DecayTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayTarget {
    pub year: Year,
    pub ci: f64,
}

fn default_ci0() -> f64 {
    58.3
}
fn default_ci_inf() -> f64 {
    40.0
}
fn default_t0() -> Year {
    2024
}
fn default_target() -> DecayTarget {
    DecayTarget {
        year: 2035,
        ci: 45.0,
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            ci0: default_ci0(),
            ci_inf: default_ci_inf(),
            t0: default_t0(),
            lambda: None,
            target: default_target(),
        }
    }
}

impl DecayParams {
    /// The explicit rate, or the one fitted through the origin and target.
    pub fn resolved_lambda(&self) -> Result<f64, CarbonError> {
        let lambda = match self.lambda {
            Some(l) => l,
            None => fit_decay((self.t0, self.ci0), (self.target.year, self.target.ci), self.ci_inf)?,
        };
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(CarbonError::InvalidParams(format!("lambda {lambda} must be positive")));
        }
        Ok(lambda)
    }

    pub fn validate(&self) -> Result<(), CarbonError> {
        if !(self.ci_inf > 0.0) {
            return Err(CarbonError::InvalidParams("ci_inf must be positive".into()));
        }
        if !(self.ci_inf < self.ci0) {
            return Err(CarbonError::InvalidParams(format!(
                "ci_inf {} must lie below ci0 {}",
                self.ci_inf, self.ci0
            )));
        }
        self.resolved_lambda().map(|_| ())
    }
}

pub fn ci_decay(params: &DecayParams, year: Year) -> Result<f64, CarbonError> {
    if year < params.t0 {
        return Err(CarbonError::YearBeforeT0 {
            year,
            t0: params.t0,
        });
    }
    let lambda = params.resolved_lambda()?;
    Ok(decay_at(params.ci0, params.ci_inf, lambda, f64::from(year - params.t0)))
}

pub(crate) fn decay_at(ci0: f64, ci_inf: f64, lambda: f64, dt: f64) -> f64 {
    ci_inf + (ci0 - ci_inf) * (-lambda * dt).exp()
}

/// Closed-form rate through two anchors for a fixed asymptote.
pub fn fit_decay(early: (Year, f64), late: (Year, f64), ci_inf: f64) -> Result<f64, CarbonError> {
    for ci in [early.1, late.1] {
        if !(ci > ci_inf) {
            return Err(CarbonError::AnchorBelowAsymptote { ci, ci_inf });
        }
    }
    if early.0 >= late.0 {
        return Err(CarbonError::InvalidAnchors(format!(
            "years must increase, got {} then {}",
            early.0, late.0
        )));
    }
    let lambda = ((early.1 - ci_inf) / (late.1 - ci_inf)).ln() / f64::from(late.0 - early.0);
    if !(lambda > 0.0) {
        return Err(CarbonError::InvalidAnchors(format!(
            "CI must decline between anchors (lambda = {lambda})"
        )));
    }
    Ok(lambda)
}

/// Volumetric blend whose CI is the energy-weighted mix of its components.
pub fn blend_ci_energy(ci_gas: f64, ci_eth: f64, vol_frac_eth: f64, lhv_gas: f64, lhv_eth: f64) -> f64 {
    let eth_energy = vol_frac_eth * lhv_eth;
    let f = eth_energy / (eth_energy + (1.0 - vol_frac_eth) * lhv_gas);
    f * ci_eth + (1.0 - f) * ci_gas
}

/// Quoted blend CIs, gCO2e/MJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiLookup {
    pub gasoline: f64,
    pub corn: BTreeMap<PathwayId, f64>,
    pub msw: BTreeMap<PathwayId, f64>,
}

impl Default for CiLookup {
    fn default() -> Self {
        use PathwayId::*;
        Self {
            gasoline: 92.0,
            corn: BTreeMap::from([(E10, 89.0), (E15, 85.0), (E30, 75.0), (E85, 58.3)]),
            msw: BTreeMap::from([(E10, 88.0), (E15, 82.0), (E30, 70.0), (E85, 48.0)]),
        }
    }
}

impl CiLookup {
    pub fn get(&self, blend: PathwayId, feedstock: Feedstock) -> Result<f64, CarbonError> {
        let missing = CarbonError::MissingTableEntry { blend, feedstock };
        match (blend, feedstock) {
            (PathwayId::Gasoline, _) => Ok(self.gasoline),
            (_, Feedstock::Corn) => self.corn.get(&blend).copied().ok_or(missing),
            (_, Feedstock::Msw) => self.msw.get(&blend).copied().ok_or(missing),
            (_, Feedstock::Fossil) => Err(missing),
        }
    }

    /// Within each feedstock CI falls as the ethanol fraction rises; MSW beats
    /// corn blend-for-blend; every blend beats straight gasoline.
    pub fn check_ordering(&self) -> Result<(), String> {
        for (name, table) in [("corn", &self.corn), ("msw", &self.msw)] {
            let mut entries: Vec<_> = table.iter().collect();
            entries.sort_by(|a, b| {
                a.0.nominal_ethanol_fraction()
                    .total_cmp(&b.0.nominal_ethanol_fraction())
            });
            let mut prev = self.gasoline;
            for (id, ci) in entries {
                if !(*ci < prev) {
                    return Err(format!("{name} {id} CI {ci} does not decrease"));
                }
                prev = *ci;
            }
        }
        for (id, msw) in &self.msw {
            if let Some(corn) = self.corn.get(id) {
                if !(msw < corn) {
                    return Err(format!("msw {id} CI {msw} is not below corn {corn}"));
                }
            }
        }
        Ok(())
    }
}

pub fn blend_ci_lookup(table: &CiLookup, blend: PathwayId, feedstock: Feedstock) -> Result<f64, CarbonError> {
    table.get(blend, feedstock)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarbonParams {
    #[serde(default)]
    pub mode: CiMode,
    #[serde(default = "default_ci_gasoline")]
    pub ci_gasoline: f64,
    /// Pure corn ethanol.
    #[serde(default = "default_ci0")]
    pub ci_ethanol_corn: f64,
    #[serde(default)]
    pub decay: DecayParams,
    #[serde(default = "default_lhv_gasoline")]
    pub lhv_gasoline: f64,
    #[serde(default = "default_lhv_ethanol")]
    pub lhv_ethanol: f64,
    #[serde(default)]
    pub lookup_table: CiLookup,
}

fn default_ci_gasoline() -> f64 {
    92.0
}
fn default_lhv_gasoline() -> f64 {
    LHV_GASOLINE
}
fn default_lhv_ethanol() -> f64 {
    LHV_ETHANOL
}

impl Default for CarbonParams {
    fn default() -> Self {
        Self {
            mode: CiMode::default(),
            ci_gasoline: default_ci_gasoline(),
            ci_ethanol_corn: default_ci0(),
            decay: DecayParams::default(),
            lhv_gasoline: LHV_GASOLINE,
            lhv_ethanol: LHV_ETHANOL,
            lookup_table: CiLookup::default(),
        }
    }
}

/// Gallon-weighted CI of an ethanol pool mixing MSW and corn gallons.
/// An empty pool reports the corn CI.
pub fn pool_ci(msw_gal: f64, corn_gal: f64, ci_msw: f64, ci_corn: f64) -> f64 {
    let total = msw_gal + corn_gal;
    if total > 0.0 {
        (msw_gal * ci_msw + corn_gal * ci_corn) / total
    } else {
        ci_corn
    }
}

/// One liquid pathway's contribution to fleet emissions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionInput {
    pub million_gallons: f64,
    pub ci: f64,
    pub lhv: f64,
}

/// Tonnes CO2e. `million_gallons * 1e6 gal * lhv MJ/gal * ci g/MJ / 1e6 g/t`.
pub fn fleet_emissions(inputs: &[EmissionInput]) -> Result<f64, CarbonError> {
    let mut total = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        if !(x.million_gallons >= 0.0 && x.ci >= 0.0 && x.lhv > 0.0) {
            return Err(CarbonError::UnitMismatch(format!(
                "entry {i}: volume {} M gal, CI {}, LHV {} must be non-negative with positive LHV",
                x.million_gallons, x.ci, x.lhv
            )));
        }
        total += x.million_gallons * x.lhv * x.ci;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn blend_endpoints_exact() {
        assert_eq!(blend_ci_energy(92.0, 48.0, 0.0, 122.5, 80.5), 92.0);
        assert_eq!(blend_ci_energy(92.0, 48.0, 1.0, 122.5, 80.5), 48.0);
    }

    #[test]
    fn e85_energy_weighting_by_hand() {
        let f = 68.425 / 86.8;
        let expected = f * 48.0 + (1.0 - f) * 92.0;
        let ci = blend_ci_energy(92.0, 48.0, 0.85, 122.5, 80.5);
        assert!((ci - expected).abs() < 1e-12);
        assert!((ci - 57.31).abs() < 0.005);
    }

    #[test]
    fn lookup_values() {
        let t = CiLookup::default();
        assert_eq!(blend_ci_lookup(&t, PathwayId::E85, Feedstock::Corn).unwrap(), 58.3);
        assert_eq!(blend_ci_lookup(&t, PathwayId::E10, Feedstock::Msw).unwrap(), 88.0);
        assert_eq!(blend_ci_lookup(&t, PathwayId::Gasoline, Feedstock::Fossil).unwrap(), 92.0);
        assert!(matches!(
            blend_ci_lookup(&t, PathwayId::Ev, Feedstock::Corn),
            Err(CarbonError::MissingTableEntry { .. })
        ));
        assert!(matches!(
            blend_ci_lookup(&t, PathwayId::E15, Feedstock::Fossil),
            Err(CarbonError::MissingTableEntry { .. })
        ));
        t.check_ordering().unwrap();
    }

    #[test]
    fn ordering_check_catches_violation() {
        let mut t = CiLookup::default();
        t.msw.insert(PathwayId::E30, 90.0);
        assert!(t.check_ordering().is_err());
    }

    #[test]
    fn fit_decay_closed_form() {
        let lambda = fit_decay((2024, 58.3), (2035, 45.0), 40.0).unwrap();
        assert!((lambda - (18.3f64 / 5.0).ln() / 11.0).abs() < 1e-15);
        assert!((lambda - 0.11795).abs() < 1e-5);
        assert!(fit_decay((2024, 58.3), (2035, 58.3), 40.0).is_err());
        assert!(matches!(
            fit_decay((2024, 58.3), (2035, 39.0), 40.0),
            Err(CarbonError::AnchorBelowAsymptote { .. })
        ));
    }

    #[test]
    fn decay_defaults() {
        let p = DecayParams::default();
        assert_eq!(ci_decay(&p, 2024).unwrap(), 58.3);
        assert!((ci_decay(&p, 2035).unwrap() - 45.0).abs() < 1e-9);
        let far = ci_decay(&p, 3024).unwrap();
        assert!((far - 40.0).abs() < 1e-9);
        assert!(matches!(ci_decay(&p, 2023), Err(CarbonError::YearBeforeT0 { .. })));
    }

    #[test]
    fn decay_validation() {
        let p = DecayParams {
            ci_inf: 60.0,
            ..DecayParams::default()
        };
        assert!(p.validate().is_err());
        let p = DecayParams {
            lambda: Some(-0.1),
            ..DecayParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn one_million_gallons_gasoline() {
        let t = fleet_emissions(&[EmissionInput {
            million_gallons: 1.0,
            ci: 92.0,
            lhv: 122.5,
        }])
        .unwrap();
        assert!((t - 11_270.0).abs() < 1e-9);
        assert_eq!(fleet_emissions(&[]).unwrap(), 0.0);
        assert!(fleet_emissions(&[EmissionInput {
            million_gallons: -1.0,
            ci: 92.0,
            lhv: 122.5
        }])
        .is_err());
    }

    #[test]
    fn pool_ci_weighting() {
        assert_eq!(pool_ci(0.0, 0.0, 50.0, 58.3), 58.3);
        assert!((pool_ci(1.0, 3.0, 50.0, 60.0) - 57.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn blend_bounded_and_monotone(
            ci_gas in 50.0f64..120.0,
            delta in 0.1f64..50.0,
            f in 0.0f64..0.99,
            lhv_gas in 100.0f64..130.0,
            lhv_eth in 70.0f64..90.0,
        ) {
            let ci_eth = ci_gas - delta;
            let a = blend_ci_energy(ci_gas, ci_eth, f, lhv_gas, lhv_eth);
            let b = blend_ci_energy(ci_gas, ci_eth, f + 0.01, lhv_gas, lhv_eth);
            prop_assert!(b <= a);
            prop_assert!(a <= ci_gas + 1e-12 && a >= ci_eth - 1e-12);
        }

        #[test]
        fn decay_slope_matches_derivative(
            ci0 in 45.0f64..90.0,
            gap in 1.0f64..30.0,
            lambda in 0.01f64..0.5,
            dt in 0.0f64..40.0,
        ) {
            let ci_inf = ci0 - gap;
            let ci = decay_at(ci0, ci_inf, lambda, dt);
            prop_assert!(ci > ci_inf);
            let h = 1e-5;
            let fd = (decay_at(ci0, ci_inf, lambda, dt + h) - decay_at(ci0, ci_inf, lambda, dt - h)) / (2.0 * h);
            let analytic = -lambda * (ci - ci_inf);
            prop_assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-3));
        }

        #[test]
        fn emissions_linear(v in 0.0f64..1e4, k in 0.0f64..10.0, ci in 0.0f64..100.0) {
            let one = fleet_emissions(&[EmissionInput { million_gallons: v, ci, lhv: 118.3 }]).unwrap();
            let scaled = fleet_emissions(&[EmissionInput { million_gallons: v * k, ci, lhv: 118.3 }]).unwrap();
            prop_assert!((scaled - k * one).abs() <= 1e-9 * scaled.abs().max(1.0));
        }
    }
}
