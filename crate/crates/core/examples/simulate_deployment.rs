//! Monte Carlo deployments under the optimal policy, compared with the
//! solver's expected cost. Also prints one walk in detail.
//!
//! cargo run --release --example simulate_deployment

use relaywalk::config::{Objective, Scenario};
use relaywalk::policy::Policy;
use relaywalk::sim::{run_deployment, run_rng, simulate};

fn main() -> relaywalk::Result<()> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(1)?;
    let policy = Policy::solve(&model, &scenario.deployment(Objective::Sum, 1, 0.01))?;
    let eval = policy.evaluate(&model)?;

    let trace = run_deployment(&policy, &model, &mut run_rng(7, 0))?;
    println!("one walk of {} steps:", trace.line_length);
    for s in &trace.steps {
        let level = s.links.first().map(|l| l.level_mw).unwrap_or(0.0);
        println!("  x={:3} y={:?} gamma={level:.5} mW -> {:?}", s.position, s.y, s.decision);
    }
    println!("  path cost {:.5} mW with {} relays\n", trace.path_cost, trace.relays());

    let r = simulate(&policy, &model, 100_000, 7)?;
    println!("expected:  total {:.5}  E[N] {:.3}", eval.total, eval.mean_relays);
    println!(
        "simulated: total {:.5} ± {:.5}  E[N] {:.3} ± {:.3}  failures {:.4}%",
        r.total,
        r.total_hw,
        r.mean_n,
        r.mean_n_hw,
        100.0 * r.failure_prob
    );
    Ok(())
}
