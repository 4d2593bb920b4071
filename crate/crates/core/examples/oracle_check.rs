//! Cross-checks the collapsed value-iteration solvers against brute-force
//! backward induction over full states on a capped line.
//!
//! cargo run --release --example oracle_check

use relaywalk::config::{Objective, Scenario};
use relaywalk::oracle::oracle_suite;

fn main() -> relaywalk::Result<()> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(1)?;
    for (theta, cap) in [(0.5, 10), (0.2, 15)] {
        let mut base = scenario.deployment(Objective::Sum, 1, 0.0);
        base.theta = theta;
        for c in oracle_suite(&model, &base, &[0.001, 0.1, 1.0], cap)? {
            println!(
                "{} theta={} cap={} xi={}: {:.10} vs {:.10} (deviation {:.1e})",
                c.objective, c.theta, c.l_cap, c.xi, c.oracle, c.solver, c.deviation
            );
        }
    }
    Ok(())
}
