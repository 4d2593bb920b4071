use relaywalk::cli::{main_with_args, EXIT_ARTIFACT, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_USAGE};
use relaywalk::store;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("relaywalk").chain(args.iter().copied()))
}

#[test]
fn solve_then_simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("p.json");
    let report = dir.path().join("r.json");
    let trace = dir.path().join("runs.csv");
    let p = policy.to_str().unwrap();
    assert_eq!(run(&["solve", "--objective", "sum", "--n", "1", "--xi", "0.01", "--out", p]), EXIT_OK);
    let (_, art) = store::load_policy(&policy).unwrap();
    assert!((art.policy.j0() - 0.18584).abs() / 0.18584 < 0.02);

    let args = [
        "simulate",
        "--policy",
        p,
        "--runs",
        "3000",
        "--seed",
        "7",
        "--out",
        report.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ];
    assert_eq!(run(&args), EXIT_OK);
    let first = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(first.lines().count(), 3001);
    let (env, _) = store::load(&report).unwrap();
    assert_eq!(run(&args), EXIT_OK);
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), first);
    assert_eq!(store::load(&report).unwrap().0.fingerprint, env.fingerprint);

    // A policy solved on one radio cannot be simulated on another.
    let mismatch = ["simulate", "--policy", p, "--config", "indoor_mw_grid", "--runs", "10", "--out", report.to_str().unwrap()];
    assert_eq!(run(&mismatch), EXIT_CONFIG);
}

#[test]
fn several_relay_costs_give_several_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("max.json");
    let th = dir.path().join("max.csv");
    let code = run(&[
        "solve", "--objective", "max", "--xi", "0.01", "--xi", "0.1",
        "--out", out.to_str().unwrap(), "--thresholds", th.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    for xi in ["0.01", "0.1"] {
        assert!(dir.path().join(format!("max_xi{xi}.json")).exists());
        assert!(dir.path().join(format!("max_xi{xi}.csv")).exists());
    }
}

#[test]
fn oracle_and_exports() {
    assert_eq!(run(&["oracle", "--theta", "0.5", "--cap", "10"]), EXIT_OK);
    let dir = tempfile::tempdir().unwrap();
    for fig in ["fig2", "fig4", "fig5"] {
        let out = dir.path().join(format!("{fig}.csv"));
        assert_eq!(run(&["export", "--figure", fig, "--out", out.to_str().unwrap()]), EXIT_OK);
        let csv = std::fs::read_to_string(&out).unwrap();
        assert!(csv.lines().count() > 1, "{fig} is empty");
    }
    let out = dir.path().join("t1.csv");
    let args = ["export", "--figure", "table1", "--xi", "0.1", "--runs", "500", "--out", out.to_str().unwrap()];
    assert_eq!(run(&args), EXIT_OK);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
}

#[test]
fn errors_have_distinct_codes() {
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["solve", "--bogus"]), EXIT_USAGE);
    assert_eq!(run(&["export", "--figure", "fig9"]), EXIT_CONFIG);
    assert_eq!(run(&["solve", "--config", "/nonexistent/scenario.toml"]), EXIT_IO);
    assert_eq!(run(&["simulate", "--policy", "/nonexistent/p.json"]), EXIT_IO);
    // Sum power with memory 2 needs evenly spaced levels.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    assert_eq!(run(&["solve", "--n", "2", "--out", out.to_str().unwrap()]), EXIT_CONFIG);
    std::fs::write(&out, "{\"schema_version\": 1}").unwrap();
    assert_eq!(run(&["simulate", "--policy", out.to_str().unwrap()]), EXIT_ARTIFACT);
}
