//! Optimal max-power policy for memory 1: the distance threshold r_th as a
//! function of the running maximum, and the power threshold at -20 dBm.
//!
//! cargo run --release --example max_thresholds

use relaywalk::adjacent::solve_max_adjacent;
use relaywalk::channel::{dbm_to_mw, fmt_dbm};
use relaywalk::config::{Objective, Scenario};

fn main() -> relaywalk::Result<()> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(1)?;
    for xi in [0.001, 0.01, 0.1] {
        let cfg = scenario.deployment(Objective::Max, 1, xi);
        let p = solve_max_adjacent(&model, &cfg, 1e-10, 100_000)?;
        println!("xi = {xi} mW: J0 = {:.5} mW", p.j0);
        for &g in &p.gamma_max_grid[1..] {
            println!("  gamma_max {:>6} dBm  r_th = {} steps", fmt_dbm(g), p.r_th(g)?);
        }
        let gm = dbm_to_mw(-20.0);
        let row: Vec<String> = (1..=p.r_max())
            .map(|r| p.gamma_th(r, gm).map(fmt_dbm))
            .collect::<relaywalk::Result<_>>()?;
        println!("  gamma_th(r, -20 dBm): {}", row.join(" "));
    }
    Ok(())
}
