//! Seeded Monte Carlo over scenario parameters with percentile bands.
//!
//! Each draw comes from a ChaCha8 stream keyed by the seed, with stream id
//! `(run_index << 16) | dist_index`, so a run's perturbations do not depend on
//! execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::engine::{run_validated, Column, EngineError, ScenarioResult, Table};
use crate::scenario::{DemandSpec, Scenario};
use crate::series::format_value;

pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng";
pub const MAX_REDRAWS: usize = 100;
/// Normal draws are rejected beyond this many standard deviations.
pub const NORMAL_TRUNCATION: f64 = 4.0;

#[derive(Debug, Error)]
pub enum McError {
    #[error("distribution target `{0}` does not resolve to a scenario field")]
    UnresolvedTarget(String),
    #[error("distribution target `{0}` is not a real-valued field")]
    NonNumericTarget(String),
    #[error("run {run_index}: no valid draw after {MAX_REDRAWS} attempts ({detail})")]
    InvariantViolation { run_index: usize, detail: String },
    #[error("invalid Monte Carlo spec: {0}")]
    InvalidSpec(String),
    #[error("run {run_index} failed: {source}")]
    Run {
        run_index: usize,
        #[source]
        source: Box<EngineError>,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    /// `x (1 + U(-spread, spread))`
    UniformRel,
    /// `x + U(-spread, spread)`
    UniformAbs,
    /// `x + N(0, spread^2)`, truncated.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    /// Dotted path into the scenario, e.g. `incentives.d5_usd_per_gal`.
    pub target: String,
    pub kind: DistKind,
    pub spread: f64,
}

impl DistSpec {
    pub fn new(target: &str, kind: DistKind, spread: f64) -> Self {
        Self {
            target: target.to_string(),
            kind,
            spread,
        }
    }

    fn draw(&self, base: f64, rng: &mut ChaCha8Rng) -> f64 {
        if self.spread == 0.0 {
            return base;
        }
        match self.kind {
            DistKind::UniformRel => base * (1.0 + rng.random_range(-self.spread..=self.spread)),
            DistKind::UniformAbs => base + rng.random_range(-self.spread..=self.spread),
            DistKind::Normal => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= NORMAL_TRUNCATION {
                    break base + self.spread * z;
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Empty means [`default_distributions`].
    #[serde(default)]
    pub distributions: Vec<DistSpec>,
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
}

fn default_runs() -> usize {
    1000
}
fn default_percentiles() -> Vec<f64> {
    vec![5.0, 50.0, 95.0]
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            n_runs: default_runs(),
            seed: 0,
            distributions: Vec::new(),
            percentiles: default_percentiles(),
        }
    }
}

/// Relative 5% on incentive prices and volumes and 10% on the CI decay rate.
/// Retail blend prices are left fixed: their quoted gaps are narrower than 5%
/// and independent draws would break the price ordering.
pub fn default_distributions(base: &Scenario) -> Vec<DistSpec> {
    use DistKind::UniformRel;
    let mut d = vec![
        DistSpec::new("incentives.d6_usd_per_gal", UniformRel, 0.05),
        DistSpec::new("incentives.d5_usd_per_gal", UniformRel, 0.05),
        DistSpec::new("incentives.cfpc45v_usd_per_gal", UniformRel, 0.05),
        DistSpec::new("feedstock.ramp.start_capacity", UniformRel, 0.05),
        DistSpec::new("feedstock.ramp.end_capacity", UniformRel, 0.05),
    ];
    if matches!(base.demand, DemandSpec::Constant { .. }) {
        d.push(DistSpec::new("demand.million_gallons", UniformRel, 0.05));
    }
    d.push(DistSpec::new("carbon.decay.lambda", UniformRel, 0.10));
    d
}

impl McSpec {
    pub fn effective_distributions(&self, base: &Scenario) -> Vec<DistSpec> {
        if self.distributions.is_empty() {
            default_distributions(base)
        } else {
            self.distributions.clone()
        }
    }

    fn check_shape(&self) -> Result<(), String> {
        if self.n_runs == 0 {
            return Err("n_runs must be at least 1".into());
        }
        if self.percentiles.is_empty() {
            return Err("percentiles must not be empty".into());
        }
        for w in self.percentiles.windows(2) {
            if !(w[0] < w[1]) {
                return Err(format!("percentiles must be strictly increasing ({} then {})", w[0], w[1]));
            }
        }
        if let Some(p) = self.percentiles.iter().find(|p| !(**p > 0.0 && **p < 100.0)) {
            return Err(format!("percentile {p} outside (0, 100)"));
        }
        Ok(())
    }

    /// Field-path diagnostics against `base`.
    pub fn validate_against(&self, base: &Scenario) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Err(e) = self.check_shape() {
            let field = if e.starts_with("n_runs") { "mc.n_runs" } else { "mc.percentiles" };
            out.push((field.to_string(), e));
        }
        let dists = self.effective_distributions(base);
        let json = match materialize(base, &dists) {
            Ok(j) => j,
            Err(e) => return vec![("mc.distributions".into(), e.to_string())],
        };
        for (i, d) in dists.iter().enumerate() {
            let path = format!("mc.distributions[{i}]");
            if !(d.spread >= 0.0 && d.spread.is_finite()) {
                out.push((format!("{path}.spread"), format!("must be non-negative, got {}", d.spread)));
            }
            if let Err(e) = target_value(&json, &d.target) {
                out.push((format!("{path}.target"), e.to_string()));
            }
        }
        out
    }
}

fn pointer(target: &str) -> String {
    format!("/{}", target.replace('.', "/"))
}

fn target_value(json: &Value, target: &str) -> Result<f64, McError> {
    let v = json
        .pointer(&pointer(target))
        .ok_or_else(|| McError::UnresolvedTarget(target.to_string()))?;
    match v {
        Value::Number(n) if n.is_f64() => Ok(n.as_f64().expect("f64 number")),
        _ => Err(McError::NonNumericTarget(target.to_string())),
    }
}

/// The scenario as JSON, with a fitted decay rate written out when a
/// distribution targets it.
fn materialize(base: &Scenario, dists: &[DistSpec]) -> Result<Value, McError> {
    let mut json = serde_json::to_value(base).map_err(|e| McError::InvalidSpec(e.to_string()))?;
    if dists.iter().any(|d| d.target == "carbon.decay.lambda") && base.carbon.decay.lambda.is_none() {
        let lambda = base
            .carbon
            .decay
            .resolved_lambda()
            .map_err(|e| McError::InvalidSpec(e.to_string()))?;
        if let Some(decay) = json.pointer_mut("/carbon/decay").and_then(Value::as_object_mut) {
            decay.insert("lambda".into(), Value::from(lambda));
        }
    }
    Ok(json)
}

fn stream_rng(seed: u64, run_index: usize, dist_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((run_index as u64) << 16) | dist_index as u64);
    rng
}

/// A perturbed copy of `base` for one run. Invalid draws are redrawn, each
/// from the continuation of its own stream.
pub fn sample_scenario(base: &Scenario, spec: &McSpec, run_index: usize) -> Result<Scenario, McError> {
    let dists = spec.effective_distributions(base);
    sample_with(base, &dists, spec.seed, run_index)
}

fn sample_with(base: &Scenario, dists: &[DistSpec], seed: u64, run_index: usize) -> Result<Scenario, McError> {
    let mut json = materialize(base, dists)?;
    let bases: Vec<f64> = dists
        .iter()
        .map(|d| target_value(&json, &d.target))
        .collect::<Result<_, _>>()?;
    let mut rngs: Vec<ChaCha8Rng> = (0..dists.len()).map(|i| stream_rng(seed, run_index, i)).collect();
    let mut last = String::new();
    for _ in 0..MAX_REDRAWS {
        for ((d, &x0), rng) in dists.iter().zip(&bases).zip(&mut rngs) {
            let x = d.draw(x0, rng);
            *json.pointer_mut(&pointer(&d.target)).expect("target resolved") = Value::from(x);
        }
        let mut sc: Scenario = match serde_json::from_value(json.clone()) {
            Ok(sc) => sc,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        sc.base_dir = base.base_dir.clone();
        let diags = sc.validate();
        if diags.is_empty() {
            return Ok(sc);
        }
        last = diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
    }
    Err(McError::InvariantViolation {
        run_index,
        detail: last,
    })
}

/// Linear interpolation between order statistics, `h = (n - 1) p / 100`.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], pct: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub n_runs: usize,
    pub seed: u64,
    pub percentiles: Vec<f64>,
    pub distributions: Vec<DistSpec>,
    /// One `<table>_bands` table per engine table, with `<column>_p<pct>`
    /// columns.
    pub bands: Vec<Table>,
}

impl McResult {
    pub fn band(&self, table: &str) -> Option<&Table> {
        let name = format!("{table}_bands");
        self.bands.iter().find(|t| t.name == name)
    }
}

pub fn band_column(column: &str, pct: f64) -> String {
    format!("{column}_p{}", format_value(pct))
}

fn flatten(r: &ScenarioResult) -> Vec<f64> {
    r.tables
        .iter()
        .flat_map(|t| t.columns.iter().flat_map(|c| c.values.iter().copied()))
        .collect()
}

/// Runs the engine on `spec.n_runs` perturbed scenarios. `jobs` caps worker
/// threads; results are identical for any value. The lowest failing run index
/// is reported.
pub fn run_mc(base: &Scenario, spec: &McSpec, jobs: Option<usize>) -> Result<McResult, McError> {
    spec.check_shape().map_err(McError::InvalidSpec)?;
    base.check(None).map_err(|e| McError::Run {
        run_index: 0,
        source: Box::new(e.into()),
    })?;
    let dists = spec.effective_distributions(base);
    for (i, d) in dists.iter().enumerate() {
        if !(d.spread >= 0.0 && d.spread.is_finite()) {
            return Err(McError::InvalidSpec(format!("distribution {i} spread {}", d.spread)));
        }
    }
    let template = run_validated(base).map_err(|e| McError::Run {
        run_index: 0,
        source: Box::new(e),
    })?;
    let width = flatten(&template).len();

    let one = |i: usize| -> Result<Vec<f64>, McError> {
        let sc = sample_with(base, &dists, spec.seed, i)?;
        let r = run_validated(&sc).map_err(|e| McError::Run {
            run_index: i,
            source: Box::new(e),
        })?;
        Ok(flatten(&r))
    };
    let runs: Vec<Result<Vec<f64>, McError>> = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| McError::ThreadPool(e.to_string()))?
            .install(|| (0..spec.n_runs).into_par_iter().map(one).collect()),
        None => (0..spec.n_runs).into_par_iter().map(one).collect(),
    };
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_, _>>()?;
    debug_assert!(runs.iter().all(|r| r.len() == width));

    // Cell-major quantiles.
    let cells: Vec<Vec<f64>> = (0..width)
        .into_par_iter()
        .map(|k| {
            let mut xs: Vec<f64> = runs.iter().map(|r| r[k]).collect();
            xs.sort_by(f64::total_cmp);
            spec.percentiles.iter().map(|&p| quantile(&xs, p)).collect()
        })
        .collect();

    let mut bands = Vec::with_capacity(template.tables.len());
    let mut k = 0;
    for t in &template.tables {
        let mut columns = Vec::new();
        for c in &t.columns {
            let n = c.values.len();
            for (pi, &p) in spec.percentiles.iter().enumerate() {
                columns.push(Column {
                    name: band_column(&c.name, p),
                    unit: c.unit,
                    values: (0..n).map(|y| cells[k + y][pi]).collect(),
                });
            }
            k += n;
        }
        bands.push(Table {
            name: format!("{}_bands", t.name),
            start_year: t.start_year,
            columns,
        });
    }
    Ok(McResult {
        n_runs: spec.n_runs,
        seed: spec.seed,
        percentiles: spec.percentiles.clone(),
        distributions: dists,
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(dists: Vec<DistSpec>, n: usize) -> McSpec {
        McSpec {
            n_runs: n,
            seed: 7,
            distributions: dists,
            ..McSpec::default()
        }
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 50.0), 2.5);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 100.0), 4.0);
        assert!((quantile(&xs, 5.0) - 1.15).abs() < 1e-12);
        assert_eq!(quantile(&[3.0], 95.0), 3.0);
    }

    #[test]
    fn zero_spread_is_identity() {
        let base = Scenario::default();
        let s = spec(vec![DistSpec::new("incentives.d5_usd_per_gal", DistKind::UniformRel, 0.0)], 1);
        assert_eq!(sample_scenario(&base, &s, 3).unwrap(), base);
    }

    #[test]
    fn uniform_rel_support() {
        let base = Scenario::default();
        let s = spec(vec![DistSpec::new("incentives.d5_usd_per_gal", DistKind::UniformRel, 0.05)], 1);
        for i in 0..200 {
            let x = sample_scenario(&base, &s, i).unwrap().incentives.d5_usd_per_gal;
            assert!((x / 0.75 - 1.0).abs() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let base = Scenario::default();
        let s = McSpec {
            seed: 42,
            ..McSpec::default()
        };
        assert_eq!(sample_scenario(&base, &s, 11).unwrap(), sample_scenario(&base, &s, 11).unwrap());
        assert_ne!(sample_scenario(&base, &s, 11).unwrap(), sample_scenario(&base, &s, 12).unwrap());
    }

    #[test]
    fn lambda_materialized_when_targeted() {
        let base = Scenario::default();
        let s = spec(vec![DistSpec::new("carbon.decay.lambda", DistKind::UniformRel, 0.1)], 1);
        let sc = sample_scenario(&base, &s, 0).unwrap();
        let l = sc.carbon.decay.lambda.unwrap();
        let l0 = base.carbon.decay.resolved_lambda().unwrap();
        assert!((l / l0 - 1.0).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn bad_targets() {
        let base = Scenario::default();
        let s = spec(vec![DistSpec::new("incentives.nope", DistKind::UniformRel, 0.1)], 1);
        assert!(matches!(sample_scenario(&base, &s, 0), Err(McError::UnresolvedTarget(_))));
        let s = spec(vec![DistSpec::new("start_year", DistKind::UniformAbs, 1.0)], 1);
        assert!(matches!(sample_scenario(&base, &s, 0), Err(McError::NonNumericTarget(_))));
        let diags = s.validate_against(&base);
        assert_eq!(diags[0].0, "mc.distributions[0].target");
    }

    #[test]
    fn impossible_draw_reports_run() {
        let base = Scenario::default();
        // Every draw pushes the price below zero.
        let s = spec(vec![DistSpec::new("incentives.d5_usd_per_gal", DistKind::UniformAbs, 0.0)], 1);
        let mut neg = base.clone();
        neg.incentives.d5_usd_per_gal = -1.0;
        let err = sample_scenario(&neg, &s, 5).unwrap_err();
        assert!(matches!(err, McError::InvariantViolation { run_index: 5, .. }));
    }

    #[test]
    fn single_run_bands_collapse() {
        let base = Scenario::default();
        let r = run_mc(&base, &spec(vec![], 1), Some(1)).unwrap();
        let b = r.band("economics").unwrap();
        let c5 = &b.column("investor_revenue_p5").unwrap().values;
        let c95 = &b.column("investor_revenue_p95").unwrap().values;
        assert_eq!(c5, c95);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let base = Scenario::default();
        let s = spec(vec![], 64);
        let a = run_mc(&base, &s, Some(1)).unwrap();
        let b = run_mc(&base, &s, Some(4)).unwrap();
        assert_eq!(a, b);
        let f = |r: &McResult| r.bands.iter().map(|t| t.to_csv()).collect::<String>();
        assert_eq!(f(&a), f(&b));
    }

    #[test]
    fn spec_shape_checked() {
        let base = Scenario::default();
        assert!(run_mc(&base, &McSpec { n_runs: 0, ..McSpec::default() }, None).is_err());
        let bad = McSpec {
            percentiles: vec![50.0, 5.0],
            ..McSpec::default()
        };
        assert!(matches!(run_mc(&base, &bad, None), Err(McError::InvalidSpec(_))));
    }

    fn width_at(spread: f64) -> f64 {
        let base = Scenario::default();
        let s = spec(vec![DistSpec::new("economics.indirect_usd_per_gal", DistKind::UniformRel, spread)], 200);
        let r = run_mc(&base, &s, None).unwrap();
        let b = r.band("economics").unwrap();
        b.get("indirect_impact_p95", 2030).unwrap() - b.get("indirect_impact_p5", 2030).unwrap()
    }

    #[test]
    fn band_width_grows_with_spread() {
        let w: Vec<f64> = [0.0, 0.01, 0.05].into_iter().map(width_at).collect();
        assert_eq!(w[0], 0.0);
        assert!(w[0] <= w[1] && w[1] <= w[2], "{w:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn normal_draws_truncated(seed in any::<u64>(), run in 0usize..1000) {
            let d = DistSpec::new("x", DistKind::Normal, 2.0);
            let mut rng = stream_rng(seed, run, 0);
            for _ in 0..50 {
                let x = d.draw(10.0, &mut rng);
                prop_assert!((x - 10.0).abs() <= 8.0);
            }
        }
    }
}
