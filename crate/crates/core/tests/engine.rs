use blendsim::carbon::{blend_ci_lookup, fleet_emissions, CiLookup, CiMode, EmissionInput};
use blendsim::engine::{col, emissions_avoided, run_scenario, ScenarioResult};
use blendsim::pathway::{Feedstock, PathwayId, PathwaySpec, LHV_ETHANOL, LHV_GASOLINE};
use blendsim::scenario::{config_hash, AdoptionSpec, DemandSpec, Scenario};
use proptest::prelude::*;

const BLENDS: [PathwayId; 5] = [PathwayId::E15, PathwayId::E30, PathwayId::E85, PathwayId::Ev, PathwayId::H2];

fn explicit(ceiling: f64, rate: f64, midpoint: f64) -> AdoptionSpec {
    AdoptionSpec::Explicit { ceiling, rate, midpoint }
}

/// Five explicit curves with ceilings below 0.15 each, so the share budget
/// never binds and no year is rescaled.
fn scenario(demand: f64, curves: &[(f64, f64, f64); 5], caps: (f64, f64), formula: bool) -> Scenario {
    let mut sc = Scenario {
        demand: DemandSpec::Constant { million_gallons: demand },
        ..Scenario::default()
    };
    for (id, &(c, r, m)) in BLENDS.iter().zip(curves) {
        sc.adoption.insert(*id, explicit(c, r, m));
    }
    sc.feedstock.ramp.start_capacity = caps.0;
    sc.feedstock.ramp.end_capacity = caps.1;
    if formula {
        sc.carbon.mode = CiMode::Formula;
    }
    sc
}

fn curve() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.001..0.15f64, 0.05..2.0f64, 2024.0..2040.0f64)
}

fn v(r: &ScenarioResult, t: &str, c: &str, y: i32) -> f64 {
    r.value(t, c, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn volumes_and_emissions_conserve(
        demand in 1.0..100_000.0f64,
        curves in [curve(), curve(), curve(), curve(), curve()],
        caps in (0.0..2000.0f64, 0.0..2000.0f64),
        formula in any::<bool>(),
    ) {
        let sc = scenario(demand, &curves, caps, formula);
        let r = run_scenario(&sc).unwrap();
        prop_assert!(r.rescaled_years.is_empty());
        for y in sc.years() {
            let shares: f64 = sc.pathways.iter().map(|p| v(&r, "shares", &col(p.id), y)).sum();
            prop_assert!((shares - 1.0).abs() < 1e-12);
            let pool = v(&r, "demand", "liquid_pool", y);
            let liquid: f64 = sc.pathways.iter().filter(|p| p.is_liquid()).map(|p| v(&r, "volumes", &col(p.id), y)).sum();
            prop_assert!((liquid - pool).abs() <= 1e-9 * pool.max(1.0));
            let eth = v(&r, "volumes", "ethanol_demand", y);
            let msw = v(&r, "volumes", "msw_supply", y);
            prop_assert!((msw + v(&r, "volumes", "corn_import", y) - eth).abs() <= 1e-9 * eth.max(1.0));
            prop_assert!(msw <= v(&r, "volumes", "msw_capacity", y) + 1e-12);
            prop_assert!(msw <= r.msw_potential + 1e-12);
            let fleet = v(&r, "emissions", "fleet_emissions", y);
            let parts: f64 = sc.pathways.iter().filter(|p| p.is_liquid())
                .map(|p| v(&r, "emissions", &format!("emissions_{}", col(p.id)), y)).sum();
            prop_assert!((fleet - parts).abs() <= 1e-9 * fleet.max(1.0));
        }
    }

    /// Blend curves move gallons between liquid pathways without changing the
    /// liquid total, which depends only on the non-liquid shares.
    #[test]
    fn blend_mix_leaves_liquid_total(
        demand in 1.0..100_000.0f64,
        curves in [curve(), curve(), curve(), curve(), curve()],
        other in [curve(), curve(), curve()],
    ) {
        let a = run_scenario(&scenario(demand, &curves, (200.0, 300.0), false)).unwrap();
        let mut swapped = curves;
        swapped[..3].copy_from_slice(&other);
        let b = run_scenario(&scenario(demand, &swapped, (200.0, 300.0), false)).unwrap();
        for y in 2024..=2035 {
            let (pa, pb) = (v(&a, "demand", "liquid_pool", y), v(&b, "demand", "liquid_pool", y));
            prop_assert!((pa - pb).abs() <= 1e-9 * pa.max(1.0));
        }
    }

    #[test]
    fn rerun_is_identical(
        demand in 1.0..100_000.0f64,
        curves in [curve(), curve(), curve(), curve(), curve()],
    ) {
        let sc = scenario(demand, &curves, (200.0, 300.0), false);
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        for (x, y) in a.tables.iter().zip(&b.tables) {
            prop_assert_eq!(x.to_csv(), y.to_csv());
        }
    }
}

#[test]
fn swapping_a_gallon_to_msw_e85_avoids_the_ci_gap() {
    let t = CiLookup::default();
    let lhv = |id| PathwaySpec::builtin(id).lhv(LHV_GASOLINE, LHV_ETHANOL);
    let e10 = EmissionInput {
        million_gallons: 1.0,
        ci: blend_ci_lookup(&t, PathwayId::E10, Feedstock::Corn).unwrap(),
        lhv: lhv(PathwayId::E10),
    };
    let e85 = EmissionInput {
        million_gallons: 1.0,
        ci: blend_ci_lookup(&t, PathwayId::E85, Feedstock::Msw).unwrap(),
        lhv: lhv(PathwayId::E85),
    };
    let before = fleet_emissions(&[e10]).unwrap();
    let after = fleet_emissions(&[e85]).unwrap();
    assert!((before - after - 6362.3).abs() < 1e-9, "{}", before - after);
}

/// With no MSW capacity every blend uses corn ethanol, so raising the E85
/// share avoids `D * ds * (LHV_E10 * 89 - LHV_E85 * 58.3)` tonnes.
#[test]
fn corn_only_e85_swap_matches_closed_form() {
    let base = [(0.01, 0.5, 2030.0), (0.01, 0.5, 2030.0), (0.05, 0.5, 2030.0), (0.05, 0.5, 2030.0), (0.01, 0.5, 2030.0)];
    let mut more = base;
    more[2].0 = 0.12;
    let demand = 4200.0;
    let a = run_scenario(&scenario(demand, &base, (0.0, 0.0), false)).unwrap();
    let b = run_scenario(&scenario(demand, &more, (0.0, 0.0), false)).unwrap();
    let per_mgal = 118.3 * 89.0 - 86.8 * 58.3;
    for y in 2024..=2035 {
        let ds = v(&b, "shares", "e85", y) - v(&a, "shares", "e85", y);
        assert!(ds > 0.0);
        let gain = emissions_avoided(&b, y).unwrap() - emissions_avoided(&a, y).unwrap();
        let oracle = demand * ds * per_mgal;
        assert!((gain - oracle).abs() <= 1e-9 * oracle, "{y}: {gain} vs {oracle}");
    }
}

#[test]
fn avoided_emissions_rise_with_e85_share() {
    let mut last = [f64::NEG_INFINITY; 12];
    for step in 0..10 {
        let ceiling = 0.01 + 0.014 * f64::from(step);
        let curves = [(0.01, 0.5, 2030.0), (0.01, 0.5, 2030.0), (ceiling, 0.5, 2030.0), (0.05, 0.5, 2030.0), (0.01, 0.5, 2030.0)];
        let r = run_scenario(&scenario(4200.0, &curves, (200.0, 300.0), false)).unwrap();
        for (i, y) in (2024..=2035).enumerate() {
            let a = emissions_avoided(&r, y).unwrap();
            assert!(a > last[i], "{y} step {step}");
            last[i] = a;
        }
    }
}

#[test]
fn config_hash_ignores_key_order_and_layout() {
    let a = "name = \"x\"\nstart_year = 2024\n[demand]\nkind = \"constant\"\nmillion_gallons = 4200\n";
    let b = "start_year = 2024\nname = \"x\"\n\n[demand]\nmillion_gallons = 4200.0 # comment\nkind = \"constant\"\n";
    let c = "start_year = 2025\nname = \"x\"\n[demand]\nmillion_gallons = 4200\nkind = \"constant\"\n";
    assert_eq!(config_hash(a).unwrap(), config_hash(b).unwrap());
    assert_ne!(config_hash(a).unwrap(), config_hash(c).unwrap());
}

#[test]
fn bundled_scenarios_load_and_validate() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["paper-default", "strict", "national-gasoline"] {
        let path = dir.join(format!("{name}.toml"));
        let text = std::fs::read_to_string(&path).unwrap();
        let sc = Scenario::load(&path).unwrap();
        sc.check(Some(&text)).unwrap();
        assert_eq!(sc.name, name);
    }
}

#[test]
fn paper_default_file_matches_builtin_defaults() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let sc = Scenario::load(dir.join("paper-default.toml")).unwrap();
    let from_file = run_scenario(&sc).unwrap();
    let builtin = run_scenario(&Scenario::default()).unwrap();
    for (x, y) in from_file.tables.iter().zip(&builtin.tables) {
        assert_eq!(x.to_csv(), y.to_csv(), "{}", x.name);
    }
}
