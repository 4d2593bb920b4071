//! Memory 1 vs memory 2: letting a new node skip over its predecessor.
//! Max power on the 7-level radio, sum power on the 0.1 mW grid radio.
//!
//! cargo run --release --example memory_two

use relaywalk::config::{Objective, Scenario};
use relaywalk::sim::compare_memory;

fn main() -> relaywalk::Result<()> {
    let xis = [0.001, 0.01, 0.1, 1.0];
    for (scenario, objective) in [
        (Scenario::indoor_dbm(), Objective::Max),
        (Scenario::indoor_mw_grid(), Objective::Sum),
    ] {
        let model = scenario.link_model(2)?;
        let rows = compare_memory(&model, &scenario.deployment(objective, 1, 0.0), &xis, 0, 0)?;
        println!("{objective}:");
        for r in rows {
            println!(
                "  xi={:<6} J0(n=1)={:.5}  J0(n=2)={:.5}  gain {:.2}%",
                r.xi, r.j0_n1, r.j0_n2, r.gain_pct
            );
        }
    }
    Ok(())
}
