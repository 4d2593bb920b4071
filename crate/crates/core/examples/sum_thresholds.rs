//! Optimal sum-power policy for memory 1: the distance-dependent power
//! threshold below which a relay is placed, for several relay costs.
//!
//! cargo run --release --example sum_thresholds

use relaywalk::adjacent::solve_sum_adjacent;
use relaywalk::channel::fmt_dbm;
use relaywalk::config::{Objective, Scenario};

fn main() -> relaywalk::Result<()> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(1)?;
    let levels = scenario.levels()?;
    for xi in [0.001, 0.01, 0.1] {
        let cfg = scenario.deployment(Objective::Sum, 1, xi);
        let p = solve_sum_adjacent(&model, &cfg, 1e-10, 100_000)?;
        println!("xi = {xi} mW: J0 = {:.5} mW ({} iterations)", p.j0, p.iterations);
        for r in 1..=cfg.r_max_steps {
            let level = p.level_threshold(r, levels.levels())?;
            let shown = if level > 0.0 { fmt_dbm(level) } else { "never".into() };
            println!("  r = {r:2} steps  place at or below {shown:>6} dBm");
        }
    }
    Ok(())
}
