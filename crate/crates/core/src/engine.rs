//! Year-by-year scenario orchestration into unit-tagged result tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::adoption::{build_share_table, AdoptionError, LogisticParams};
use crate::carbon::{blend_ci_energy, ci_decay, fleet_emissions, pool_ci, CarbonError, CiMode, EmissionInput};
use crate::economics::{
    consumer_fuel_cost, incentive_per_gallon, indirect_impact, investor_revenue, jobs_created, EconomicsError,
    FeedstockVolume,
};
use crate::feedstock::{capacity_at, total_potential, FeedstockError};
use crate::forecast::{fit_arima, forecast, FitOptions, ForecastError};
use crate::pathway::{Feedstock, PathwayId, PathwaySpec};
use crate::scenario::{ConfigError, DemandSpec, ModeFlags, Scenario};
use crate::series::{format_value, load_series, SeriesError, Unit, Year};

/// The eight stages of a run, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Demand,
    Shares,
    Volumes,
    EthanolDemand,
    Supply,
    Carbon,
    Emissions,
    Economics,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Step::Demand => "demand",
            Step::Shares => "shares",
            Step::Volumes => "volumes",
            Step::EthanolDemand => "ethanol demand",
            Step::Supply => "supply",
            Step::Carbon => "carbon",
            Step::Emissions => "emissions",
            Step::Economics => "economics",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Adoption(#[from] AdoptionError),
    #[error(transparent)]
    Carbon(#[from] CarbonError),
    #[error(transparent)]
    Feedstock(#[from] FeedstockError),
    #[error(transparent)]
    Economics(#[from] EconomicsError),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}{step} step failed: {source}", .year.map(|y| format!("year {y}: ")).unwrap_or_default())]
    Step {
        step: Step,
        year: Option<Year>,
        #[source]
        source: ModelError,
    },
    #[error("no `{table}.{column}` value for year {year}")]
    MissingValue {
        table: String,
        column: String,
        year: Year,
    },
}

fn at<E: Into<ModelError>>(step: Step, year: Option<Year>) -> impl FnOnce(E) -> EngineError {
    move |e| EngineError::Step {
        step,
        year,
        source: e.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: Unit,
    pub values: Vec<f64>,
}

/// Columns sharing one consecutive-year index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub start_year: Year,
    pub columns: Vec<Column>,
}

impl Table {
    fn new(name: &str, start_year: Year) -> Self {
        Self {
            name: name.to_string(),
            start_year,
            columns: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, unit: Unit, values: Vec<f64>) {
        self.columns.push(Column {
            name: name.into(),
            unit,
            values,
        });
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn get(&self, name: &str, year: Year) -> Option<f64> {
        let idx = usize::try_from(year - self.start_year).ok()?;
        self.column(name)?.values.get(idx).copied()
    }

    /// `year,<column>...` with shortest round-trip number formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&(self.start_year + i as Year).to_string());
            for c in &self.columns {
                out.push(',');
                out.push_str(&format_value(c.values[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn units(&self) -> BTreeMap<String, Unit> {
        self.columns.iter().map(|c| (c.name.clone(), c.unit)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub start_year: Year,
    pub end_year: Year,
    pub tables: Vec<Table>,
    pub modes: ModeFlags,
    /// Aggregate MSW ethanol potential, million gallons per year.
    pub msw_potential: f64,
    pub adoption: BTreeMap<PathwayId, LogisticParams>,
    pub rescaled_years: Vec<Year>,
}

impl ScenarioResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn value(&self, table: &str, column: &str, year: Year) -> Result<f64, EngineError> {
        self.table(table)
            .and_then(|t| t.get(column, year))
            .ok_or_else(|| EngineError::MissingValue {
                table: table.to_string(),
                column: column.to_string(),
                year,
            })
    }
}

/// Column name for a pathway: its identifier in lower case.
pub fn col(id: PathwayId) -> String {
    id.as_str().to_ascii_lowercase()
}

/// Baseline emissions minus scenario emissions for `year`, tonnes CO2e.
pub fn emissions_avoided(result: &ScenarioResult, year: Year) -> Result<f64, EngineError> {
    Ok(result.value("emissions", "baseline_emissions", year)? - result.value("emissions", "fleet_emissions", year)?)
}

/// Validates, then runs.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult, EngineError> {
    scenario.check(None)?;
    run_validated(scenario)
}

fn total_demand(sc: &Scenario) -> Result<Vec<f64>, EngineError> {
    let n = (sc.end_year - sc.start_year + 1) as usize;
    match &sc.demand {
        DemandSpec::Constant { million_gallons } => Ok(vec![*million_gallons; n]),
        DemandSpec::Forecast(f) => {
            let fail = |e: ModelError| EngineError::Step {
                step: Step::Demand,
                year: None,
                source: e,
            };
            let history = load_series(sc.resolve_path(&f.series), f.unit)
                .and_then(|s| s.to_million_gallons())
                .map_err(|e| fail(e.into()))?;
            let order = f.arima_order().map_err(|e| fail(e.into()))?;
            let ahead = sc.end_year - history.end_year();
            let fc = if ahead > 0 {
                let opts = FitOptions {
                    intercept: f.intercept,
                    strict: false,
                };
                let model = fit_arima(&history, order, None, &opts).map_err(|e| fail(e.into()))?;
                Some(forecast(&model, &history, None, ahead as usize, None).map_err(|e| fail(e.into()))?)
            } else {
                None
            };
            sc.years()
                .map(|y| {
                    if y <= history.end_year() {
                        history.get(y).map_err(at(Step::Demand, Some(y)))
                    } else {
                        Ok(fc.as_ref().and_then(|f| f.get(y)).map(|(m, _)| m.max(0.0)).unwrap_or(0.0))
                    }
                })
                .collect()
        }
    }
}

/// Runs without re-validating; callers guarantee a valid scenario.
pub(crate) fn run_validated(sc: &Scenario) -> Result<ScenarioResult, EngineError> {
    let years: Vec<Year> = sc.years().collect();
    let start = sc.start_year;
    let n = years.len();

    // (1) demand
    let demand = total_demand(sc)?;

    // (2) shares
    let adoption = sc.resolve_adoption().map_err(at(Step::Shares, None))?;
    let ids: Vec<PathwayId> = sc.pathways.iter().map(|p| p.id).collect();
    let shares = build_share_table(&ids, sc.remainder, &adoption, years.iter().copied(), sc.share_mode)
        .map_err(|e| {
            let year = match &e {
                AdoptionError::ShareBudgetExceeded { year, .. } => Some(*year),
                _ => None,
            };
            at(Step::Shares, year)(e)
        })?;

    let c = &sc.carbon;
    let liquids: Vec<&PathwaySpec> = sc.pathways.iter().filter(|p| p.is_liquid()).collect();
    let lhv: Vec<f64> = liquids.iter().map(|p| p.lhv(c.lhv_gasoline, c.lhv_ethanol)).collect();
    let e10_lhv = PathwaySpec::builtin(PathwayId::E10).lhv(c.lhv_gasoline, c.lhv_ethanol);
    let e10_ci = c
        .lookup_table
        .get(PathwayId::E10, Feedstock::Corn)
        .map_err(at(Step::Emissions, None))?;

    let profile = sc.feedstock.profile.resolve().map_err(at(Step::Supply, None))?;
    let potential = total_potential(&profile, &sc.feedstock.yields).map_err(at(Step::Supply, None))?;

    let mut share_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); ids.len()];
    let mut vol_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); liquids.len()];
    let mut ci_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); liquids.len()];
    let mut em_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); liquids.len()];
    let mut k = Kpis::with_capacity(n);

    for (i, &year) in years.iter().enumerate() {
        let row = shares.row(year).expect("share table covers the horizon");
        for (j, id) in ids.iter().enumerate() {
            share_cols[j].push(row.shares[id]);
        }

        // (3) volumes
        let total = demand[i];
        let volumes: Vec<f64> = liquids.iter().map(|p| total * row.shares[&p.id]).collect();
        let liquid_pool: f64 = volumes.iter().sum();

        // (4) ethanol demand
        let ethanol: f64 = liquids
            .iter()
            .zip(&volumes)
            .map(|(p, v)| v * p.ethanol_fraction())
            .sum();

        // (5) supply split
        let capacity = capacity_at(&sc.feedstock.ramp, year);
        let msw = capacity.min(potential).min(ethanol).max(0.0);
        let corn = ethanol - msw;

        // (6) carbon
        let ci_msw = ci_decay(&c.decay, year).map_err(at(Step::Carbon, Some(year)))?;
        let ci_pool = pool_ci(msw, corn, ci_msw, c.ci_ethanol_corn);
        let msw_frac = if ethanol > 0.0 { msw / ethanol } else { 0.0 };
        let mut inputs = Vec::with_capacity(liquids.len());
        for (j, p) in liquids.iter().enumerate() {
            let ci = blend_ci(sc, p, ci_pool, msw_frac).map_err(at(Step::Carbon, Some(year)))?;
            ci_cols[j].push(ci);
            vol_cols[j].push(volumes[j]);
            inputs.push(EmissionInput {
                million_gallons: volumes[j],
                ci,
                lhv: lhv[j],
            });
        }

        // (7) emissions
        for (j, x) in inputs.iter().enumerate() {
            let e = fleet_emissions(std::slice::from_ref(x)).map_err(at(Step::Emissions, Some(year)))?;
            em_cols[j].push(e);
        }
        let fleet = fleet_emissions(&inputs).map_err(at(Step::Emissions, Some(year)))?;
        let baseline = fleet_emissions(&[EmissionInput {
            million_gallons: total,
            ci: e10_ci,
            lhv: e10_lhv,
        }])
        .map_err(at(Step::Emissions, Some(year)))?;

        // (8) economics
        let inc = &sc.incentives;
        let split = [
            FeedstockVolume {
                feedstock: Feedstock::Msw,
                million_gallons: msw,
                ci: ci_msw,
            },
            FeedstockVolume {
                feedstock: Feedstock::Corn,
                million_gallons: corn,
                ci: c.ci_ethanol_corn,
            },
        ];
        let revenue = investor_revenue(year, &split, inc).map_err(at(Step::Economics, Some(year)))?;
        let priced: Vec<(PathwayId, f64)> = liquids.iter().map(|p| p.id).zip(volumes.iter().copied()).collect();
        let cost = consumer_fuel_cost(&priced, &sc.prices).map_err(at(Step::Economics, Some(year)))?;

        k.total.push(total);
        k.liquid.push(liquid_pool);
        k.ethanol.push(ethanol);
        k.capacity.push(capacity);
        k.msw.push(msw);
        k.corn.push(corn);
        k.ci_msw.push(ci_msw);
        k.ci_corn.push(c.ci_ethanol_corn);
        k.ci_pool.push(ci_pool);
        k.fleet.push(fleet);
        k.baseline.push(baseline);
        k.avoided.push(baseline - fleet);
        k.inc_msw.push(incentive_per_gallon(year, Feedstock::Msw, ci_msw, inc));
        k.inc_corn.push(incentive_per_gallon(year, Feedstock::Corn, c.ci_ethanol_corn, inc));
        k.inc_avg.push(if ethanol > 0.0 { revenue / (ethanol * 1e6) } else { 0.0 });
        k.revenue.push(revenue);
        k.jobs.push(jobs_created(msw, &sc.economics).exact);
        k.indirect.push(indirect_impact(msw, &sc.economics));
        k.cost.push(cost);
    }

    use Unit::*;
    let mut demand_t = Table::new("demand", start);
    demand_t.add("total_demand", MillionGallons, k.total);
    demand_t.add("liquid_pool", MillionGallons, k.liquid);
    demand_t.add("ethanol_demand", MillionGallons, k.ethanol.clone());

    let mut shares_t = Table::new("shares", start);
    for (id, v) in ids.iter().zip(share_cols) {
        shares_t.add(col(*id), ShareFraction, v);
    }

    let mut volumes_t = Table::new("volumes", start);
    for (p, v) in liquids.iter().zip(vol_cols) {
        volumes_t.add(col(p.id), MillionGallons, v);
    }
    volumes_t.add("ethanol_demand", MillionGallons, k.ethanol);
    volumes_t.add("msw_capacity", MillionGallons, k.capacity);
    volumes_t.add("msw_supply", MillionGallons, k.msw);
    volumes_t.add("corn_import", MillionGallons, k.corn);

    let mut carbon_t = Table::new("carbon", start);
    carbon_t.add("msw_ethanol_ci", Gco2ePerMj, k.ci_msw);
    carbon_t.add("corn_ethanol_ci", Gco2ePerMj, k.ci_corn);
    carbon_t.add("ethanol_pool_ci", Gco2ePerMj, k.ci_pool);
    for (p, v) in liquids.iter().zip(ci_cols) {
        carbon_t.add(format!("ci_{}", col(p.id)), Gco2ePerMj, v);
    }

    let mut emissions_t = Table::new("emissions", start);
    for (p, v) in liquids.iter().zip(em_cols) {
        emissions_t.add(format!("emissions_{}", col(p.id)), TonnesCo2e, v);
    }
    emissions_t.add("fleet_emissions", TonnesCo2e, k.fleet);
    emissions_t.add("baseline_emissions", TonnesCo2e, k.baseline);
    emissions_t.add("emissions_avoided", TonnesCo2e, k.avoided);

    let mut econ_t = Table::new("economics", start);
    econ_t.add("msw_incentive", UsdPerGallon, k.inc_msw);
    econ_t.add("corn_incentive", UsdPerGallon, k.inc_corn);
    econ_t.add("mean_incentive", UsdPerGallon, k.inc_avg);
    econ_t.add("investor_revenue", Usd, k.revenue);
    let rounded = k.jobs.iter().map(|j| j.round()).collect();
    econ_t.add("jobs", Jobs, k.jobs);
    econ_t.add("jobs_rounded", Jobs, rounded);
    econ_t.add("indirect_impact", Usd, k.indirect);
    econ_t.add("consumer_cost", Usd, k.cost);

    Ok(ScenarioResult {
        start_year: sc.start_year,
        end_year: sc.end_year,
        tables: vec![demand_t, shares_t, volumes_t, carbon_t, emissions_t, econ_t],
        modes: sc.mode_flags(),
        msw_potential: potential,
        adoption,
        rescaled_years: shares.rescaled_years(),
    })
}

/// Per-blend CI. The quoted table is mixed by the MSW gallon fraction of the
/// pool; the formula blends gasoline with the pool CI by energy.
fn blend_ci(sc: &Scenario, p: &PathwaySpec, ci_pool: f64, msw_frac: f64) -> Result<f64, CarbonError> {
    let c = &sc.carbon;
    if p.id == PathwayId::Gasoline {
        return Ok(match c.mode {
            CiMode::Replication => c.lookup_table.gasoline,
            CiMode::Formula => c.ci_gasoline,
        });
    }
    match c.mode {
        CiMode::Replication => {
            let corn = c.lookup_table.get(p.id, Feedstock::Corn)?;
            let msw = c.lookup_table.get(p.id, Feedstock::Msw)?;
            Ok(msw_frac * msw + (1.0 - msw_frac) * corn)
        }
        CiMode::Formula => Ok(blend_ci_energy(
            c.ci_gasoline,
            ci_pool,
            p.ethanol_fraction(),
            c.lhv_gasoline,
            c.lhv_ethanol,
        )),
    }
}

struct Kpis {
    total: Vec<f64>,
    liquid: Vec<f64>,
    ethanol: Vec<f64>,
    capacity: Vec<f64>,
    msw: Vec<f64>,
    corn: Vec<f64>,
    ci_msw: Vec<f64>,
    ci_corn: Vec<f64>,
    ci_pool: Vec<f64>,
    fleet: Vec<f64>,
    baseline: Vec<f64>,
    avoided: Vec<f64>,
    inc_msw: Vec<f64>,
    inc_corn: Vec<f64>,
    inc_avg: Vec<f64>,
    revenue: Vec<f64>,
    jobs: Vec<f64>,
    indirect: Vec<f64>,
    cost: Vec<f64>,
}

impl Kpis {
    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            total: v(),
            liquid: v(),
            ethanol: v(),
            capacity: v(),
            msw: v(),
            corn: v(),
            ci_msw: v(),
            ci_corn: v(),
            ci_pool: v(),
            fleet: v(),
            baseline: v(),
            avoided: v(),
            inc_msw: v(),
            inc_corn: v(),
            inc_avg: v(),
            revenue: v(),
            jobs: v(),
            indirect: v(),
            cost: v(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adoption::ShareMode;
    use crate::scenario::AdoptionSpec;

    fn default_run() -> ScenarioResult {
        run_scenario(&Scenario::default()).unwrap()
    }

    #[test]
    fn layout() {
        let r = default_run();
        let names: Vec<_> = r.tables.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["demand", "shares", "volumes", "carbon", "emissions", "economics"]);
        for t in &r.tables {
            assert_eq!(t.len(), 12);
            assert_eq!(t.start_year, 2024);
        }
        assert_eq!(r.rescaled_years.last(), Some(&2035));
    }

    #[test]
    fn year_2027_is_all_corn() {
        let r = default_run();
        assert_eq!(r.value("volumes", "msw_supply", 2027).unwrap(), 0.0);
        let eth = r.value("volumes", "ethanol_demand", 2027).unwrap();
        assert_eq!(r.value("volumes", "corn_import", 2027).unwrap(), eth);
        assert!((r.value("economics", "mean_incentive", 2027).unwrap() - 0.56).abs() < 1e-12);
    }

    #[test]
    fn year_2035_at_capacity() {
        let r = default_run();
        assert!(r.value("volumes", "ethanol_demand", 2035).unwrap() >= 300.0);
        assert_eq!(r.value("volumes", "msw_supply", 2035).unwrap(), 300.0);
    }

    #[test]
    fn strict_shares_fail_with_year() {
        let sc = Scenario {
            share_mode: ShareMode::Strict,
            ..Scenario::default()
        };
        let err = run_scenario(&sc).unwrap_err();
        match err {
            EngineError::Step { step, year, .. } => {
                assert_eq!(step, Step::Shares);
                assert!(year.is_some());
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn strict_band_2028() {
        let mut sc = Scenario::default();
        let r = run_scenario(&sc).unwrap();
        assert!((r.value("economics", "msw_incentive", 2028).unwrap() - 1.50).abs() < 1e-12);
        sc.apply_mode(crate::scenario::RunMode::StrictBand);
        let r = run_scenario(&sc).unwrap();
        assert!((r.value("economics", "msw_incentive", 2028).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrips() {
        let r = default_run();
        for t in &r.tables {
            let parsed = crate::series::parse_table(&t.to_csv(), &t.name).unwrap();
            assert_eq!(parsed.start_year, 2024);
            for c in &t.columns {
                assert_eq!(parsed.column(&c.name).unwrap(), &c.values[..]);
            }
        }
    }

    #[test]
    fn e10_only_without_msw_matches_baseline() {
        let mut sc = Scenario::default();
        sc.pathways.retain(|p| p.id == PathwayId::E10);
        sc.adoption.clear();
        sc.feedstock.ramp.start_capacity = 0.0;
        sc.feedstock.ramp.end_capacity = 0.0;
        let r = run_scenario(&sc).unwrap();
        for y in sc.years() {
            assert!((r.value("volumes", "ethanol_demand", y).unwrap() - 420.0).abs() < 1e-9);
            assert_eq!(emissions_avoided(&r, y).unwrap(), 0.0);
            assert_eq!(
                r.value("emissions", "fleet_emissions", y).unwrap(),
                r.value("emissions", "fleet_emissions", 2024).unwrap()
            );
        }
    }

    #[test]
    fn explicit_curve_runs() {
        let mut sc = Scenario::default();
        sc.adoption.insert(
            PathwayId::H2,
            AdoptionSpec::Explicit {
                ceiling: 0.05,
                rate: 0.4,
                midpoint: 2034.0,
            },
        );
        let r = run_scenario(&sc).unwrap();
        let h2 = r.value("shares", "h2", 2034).unwrap();
        assert!(h2 > 0.0 && h2 <= 0.025 + 1e-12);
    }
}
