use blendsim::engine::run_scenario;
use blendsim::scenario::Scenario;
use blendsim::uncertainty::{quantile, run_mc, sample_scenario, DistKind, DistSpec, McError, McSpec};

fn spec(n_runs: usize, seed: u64, distributions: Vec<DistSpec>) -> McSpec {
    McSpec {
        n_runs,
        seed,
        distributions,
        ..McSpec::default()
    }
}

#[test]
fn bands_are_percentiles_of_the_sampled_runs() {
    let base = Scenario::default();
    let sp = spec(41, 9, Vec::new());
    let mc = run_mc(&base, &sp, Some(2)).unwrap();
    let mut revenue: Vec<f64> = (0..41)
        .map(|i| {
            let sc = sample_scenario(&base, &sp, i).unwrap();
            run_scenario(&sc).unwrap().value("economics", "investor_revenue", 2030).unwrap()
        })
        .collect();
    revenue.sort_by(f64::total_cmp);
    let band = mc.band("economics").unwrap();
    for p in [5.0, 50.0, 95.0] {
        let got = band.get(&format!("investor_revenue_p{p}"), 2030).unwrap();
        assert_eq!(got, quantile(&revenue, p));
    }
}

#[test]
fn single_run_band_collapses() {
    let base = Scenario::default();
    let sp = spec(1, 4, Vec::new());
    let mc = run_mc(&base, &sp, None).unwrap();
    let point = run_scenario(&sample_scenario(&base, &sp, 0).unwrap()).unwrap();
    for t in &point.tables {
        let band = mc.band(&t.name).unwrap();
        for c in &t.columns {
            for y in 2024..=2035 {
                let want = t.get(&c.name, y).unwrap();
                for p in ["p5", "p50", "p95"] {
                    assert_eq!(band.get(&format!("{}_{p}", c.name), y).unwrap(), want);
                }
            }
        }
    }
}

#[test]
fn zero_spread_reproduces_the_point_run() {
    let base = Scenario::default();
    let sp = spec(5, 1, vec![DistSpec::new("demand.million_gallons", DistKind::UniformRel, 0.0)]);
    let mc = run_mc(&base, &sp, None).unwrap();
    let point = run_scenario(&base).unwrap();
    let band = mc.band("volumes").unwrap();
    for y in 2024..=2035 {
        let want = point.value("volumes", "msw_supply", y).unwrap();
        assert_eq!(band.get("msw_supply_p5", y).unwrap(), want);
        assert_eq!(band.get("msw_supply_p95", y).unwrap(), want);
    }
}

#[test]
fn unknown_target_is_rejected() {
    let sp = spec(3, 1, vec![DistSpec::new("carbon.nonsense", DistKind::Normal, 0.1)]);
    assert!(matches!(run_mc(&Scenario::default(), &sp, None), Err(McError::UnresolvedTarget(_))));
}

#[test]
fn seed_changes_samples() {
    let base = Scenario::default();
    let a = sample_scenario(&base, &spec(2, 1, Vec::new()), 0).unwrap();
    let b = sample_scenario(&base, &spec(2, 2, Vec::new()), 0).unwrap();
    let c = sample_scenario(&base, &spec(2, 1, Vec::new()), 0).unwrap();
    assert_ne!(a.incentives.d5_usd_per_gal, b.incentives.d5_usd_per_gal);
    assert_eq!(a.incentives.d5_usd_per_gal, c.incentives.d5_usd_per_gal);
}
