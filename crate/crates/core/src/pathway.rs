//! Fuel pathways and ethanol feedstocks.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Default lower heating values, MJ per gallon.
pub const LHV_GASOLINE: f64 = 122.5;
pub const LHV_ETHANOL: f64 = 80.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathwayId {
    #[serde(rename = "GASOLINE")]
    Gasoline,
    E10,
    E15,
    E30,
    E85,
    #[serde(rename = "EV")]
    Ev,
    H2,
}

impl PathwayId {
    pub const ALL: [PathwayId; 7] = [
        PathwayId::Gasoline,
        PathwayId::E10,
        PathwayId::E15,
        PathwayId::E30,
        PathwayId::E85,
        PathwayId::Ev,
        PathwayId::H2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PathwayId::Gasoline => "GASOLINE",
            PathwayId::E10 => "E10",
            PathwayId::E15 => "E15",
            PathwayId::E30 => "E30",
            PathwayId::E85 => "E85",
            PathwayId::Ev => "EV",
            PathwayId::H2 => "H2",
        }
    }

    pub fn is_liquid(self) -> bool {
        !matches!(self, PathwayId::Ev | PathwayId::H2)
    }

    /// Nominal ethanol volume fraction for the named blends.
    pub fn nominal_ethanol_fraction(self) -> f64 {
        match self {
            PathwayId::E10 => 0.10,
            PathwayId::E15 => 0.15,
            PathwayId::E30 => 0.30,
            PathwayId::E85 => 0.85,
            PathwayId::Gasoline | PathwayId::Ev | PathwayId::H2 => 0.0,
        }
    }
}

impl fmt::Display for PathwayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PathwayId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PathwayId::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown pathway `{s}`"))
    }
}

/// Origin of the ethanol (or fossil base) in a fuel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedstock {
    Fossil,
    Corn,
    Msw,
}

impl fmt::Display for Feedstock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feedstock::Fossil => "fossil",
            Feedstock::Corn => "corn",
            Feedstock::Msw => "msw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathwaySpec {
    pub id: PathwayId,
    #[serde(default)]
    pub ethanol_vol_frac: Option<f64>,
    /// Explicit energy density. When absent, liquid pathways derive it from
    /// the carbon parameters' gasoline and ethanol LHVs.
    #[serde(default)]
    pub lhv_mj_per_gal: Option<f64>,
}

impl PathwaySpec {
    pub fn builtin(id: PathwayId) -> Self {
        Self {
            id,
            ethanol_vol_frac: None,
            lhv_mj_per_gal: None,
        }
    }

    pub fn ethanol_fraction(&self) -> f64 {
        self.ethanol_vol_frac
            .unwrap_or_else(|| self.id.nominal_ethanol_fraction())
    }

    pub fn is_liquid(&self) -> bool {
        self.id.is_liquid()
    }

    /// Volumetric LHV mix of the two components unless overridden.
    pub fn lhv(&self, lhv_gasoline: f64, lhv_ethanol: f64) -> f64 {
        self.lhv_mj_per_gal.unwrap_or_else(|| {
            let f = self.ethanol_fraction();
            f * lhv_ethanol + (1.0 - f) * lhv_gasoline
        })
    }
}

/// The standard pathway set: every blend plus EV and hydrogen. Straight
/// gasoline is available but not part of the default market.
pub fn default_pathways() -> Vec<PathwaySpec> {
    [
        PathwayId::E10,
        PathwayId::E15,
        PathwayId::E30,
        PathwayId::E85,
        PathwayId::Ev,
        PathwayId::H2,
    ]
    .into_iter()
    .map(PathwaySpec::builtin)
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_lhv_is_volumetric_mix() {
        let e85 = PathwaySpec::builtin(PathwayId::E85);
        let lhv = e85.lhv(LHV_GASOLINE, LHV_ETHANOL);
        assert!((lhv - 86.8).abs() < 1e-12);
        let e10 = PathwaySpec::builtin(PathwayId::E10);
        assert!((e10.lhv(LHV_GASOLINE, LHV_ETHANOL) - 118.3).abs() < 1e-12);
    }

    #[test]
    fn fractions_and_liquidity() {
        assert_eq!(PathwayId::Gasoline.nominal_ethanol_fraction(), 0.0);
        assert_eq!(PathwayId::E30.nominal_ethanol_fraction(), 0.30);
        assert!(!PathwayId::Ev.is_liquid());
        assert!(!PathwayId::H2.is_liquid());
        assert!(PathwayId::E85.is_liquid());
        assert_eq!("ev".parse::<PathwayId>().unwrap(), PathwayId::Ev);
    }
}
