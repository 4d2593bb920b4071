//! Outage probability, per-distance failure probability and the link-power
//! pmf for the bundled 7-level radio.
//!
//! cargo run --release --example channel_analytics

use relaywalk::channel::{fmt_dbm, outage_probability};
use relaywalk::config::Scenario;

fn main() -> relaywalk::Result<()> {
    let scenario = Scenario::indoor_dbm();
    let params = scenario.channel_params()?;
    println!(
        "outage probability at the target received power: {:.4}",
        outage_probability(params.psi_mw, params.p_rcv_min_mw)
    );

    let model = scenario.link_model(1)?;
    println!("\n r(m)  median req.  P(fail)");
    for r in 1..=model.max_steps() {
        println!(
            "{:5}  {:>8} dBm  {:.5}",
            r as f64 * params.step_m,
            fmt_dbm(params.median_power_at_steps(r)),
            model.fail_prob(r)?
        );
    }
    println!("\n{}", model.pmf_csv());
    Ok(())
}
