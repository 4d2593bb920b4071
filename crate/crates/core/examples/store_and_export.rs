//! Saves a policy artifact, loads it back, and exports figure CSVs.
//!
//! cargo run --release --example store_and_export

use relaywalk::config::{Objective, Scenario};
use relaywalk::policy::Policy;
use relaywalk::store::{
    self, export_figure_csv, fingerprint_of, Artifact, Figure, FigureInput, PolicyArtifact,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::indoor_dbm();
    let model = scenario.link_model(1)?;
    let policies: Vec<Policy> = [0.001, 0.01, 0.1]
        .iter()
        .map(|&xi| Policy::solve(&model, &scenario.deployment(Objective::Max, 1, xi)))
        .collect::<relaywalk::Result<_>>()?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("max_xi0.01.json");
    let art = Artifact::Policy(PolicyArtifact {
        channel_fingerprint: fingerprint_of(&model)?,
        policy: policies[1].clone(),
    });
    let fp = store::save(&art, &path)?;
    let (loaded_fp, loaded) = store::load_policy(&path)?;
    assert_eq!(fp, loaded_fp);
    assert_eq!(Artifact::Policy(loaded), art);
    println!("saved and reloaded {} ({})", path.display(), &fp[..12]);

    for fig in [Figure::Fig4, Figure::Fig5] {
        let csv = export_figure_csv(
            fig,
            FigureInput::Policies {
                policies: &policies,
                levels: model.levels(),
                step_m: model.params().step_m,
            },
        )?;
        println!("\n{fig:?}:\n{csv}");
    }
    Ok(())
}
