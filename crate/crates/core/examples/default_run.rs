//! Prints every result table of the built-in default scenario as CSV.

use blendsim::engine::run_scenario;
use blendsim::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let result = run_scenario(&Scenario::default())?;
    println!("# msw potential: {:.2} M gal/yr", result.msw_potential);
    for table in &result.tables {
        println!("# {}", table.name);
        print!("{}", table.to_csv());
    }
    Ok(())
}
