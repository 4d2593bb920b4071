//! Starts the HTTP walk assistant with a sum and a max policy.
//!
//! ```text
//! cargo run --release --example assistant_server
//! curl localhost:8080/policies
//! curl -XPOST localhost:8080/sessions -H 'content-type: application/json' -d '{"policy_id":"<id>"}'
//! curl -XPOST localhost:8080/sessions/s1/step -H 'content-type: application/json' \
//!      -d '{"measurements":[{"node":0,"dbm":-20}]}'
//! ```

use std::sync::Arc;

use relaywalk::config::{Objective, Scenario};
use relaywalk::policy::Policy;
use relaywalk::service::{serve, AppState};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(1)?;
    let state = Arc::new(AppState::new());
    for objective in [Objective::Sum, Objective::Max] {
        let p = Policy::solve(&model, &scenario.deployment(objective, 1, 0.001))?;
        let label = p.label();
        println!("policy {}: {label}", state.add_policy(p, scenario.levels()?)?);
    }
    let addr = "127.0.0.1:8080".parse()?;
    println!("listening on http://{addr}");
    serve(state, addr).await?;
    Ok(())
}
