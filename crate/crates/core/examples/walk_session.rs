//! Drives a walk session by hand, the way the assistant service does for a
//! user in the field.
//!
//! cargo run --release --example walk_session

use relaywalk::assistant::{MeasurementInput, WalkSession};
use relaywalk::config::{Objective, Scenario};
use relaywalk::policy::Policy;

fn main() -> relaywalk::Result<()> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(2)?;
    let levels = scenario.levels()?;
    let policy = Policy::solve(&model, &scenario.deployment(Objective::Max, 2, 0.01))?;

    let mut session = WalkSession::new("demo", "max-n2", "-");
    let readings_dbm = [-25.0, -22.0, -18.0, -12.0, -9.0, -14.0, -4.0, -6.0, 1.0, -3.0];
    for g in readings_dbm {
        let y = session.state.y.clone();
        // Older nodes are farther away and need more power.
        let m: Vec<_> = (0..y.len())
            .map(|k| MeasurementInput::dbm(k, g + 3.0 * k as f64))
            .collect();
        let out = session.step(&policy, &levels, &m)?;
        println!(
            "y={y:?} measured {:?} dBm -> {:?} {:?}",
            m.iter().filter_map(|m| m.dbm).collect::<Vec<_>>(),
            out.decision,
            out.warnings
        );
    }
    let src: Vec<_> = (0..session.state.y.len())
        .map(|k| MeasurementInput::dbm(k, -10.0))
        .collect();
    let report = session.end(&policy, &levels, &src)?;
    println!(
        "\n{} relays at {:?}; path cost {:.5} mW, total {:.5} mW, failed: {}",
        report.relays, report.placements, report.path_cost_mw, report.total_mw, report.failed
    );
    Ok(())
}
