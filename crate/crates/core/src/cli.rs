//! Command-line front end: `relaywalk <verb> [flags]`.
//!
//! Every verb is fully determined by its flags and the scenario file; none
//! prompts. Errors map to distinct exit codes, see [`exit_code`].

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::channel::LinkPowerModel;
use crate::config::{Objective, Scenario};
use crate::error::{Error, Result};
use crate::oracle::oracle_suite;
use crate::policy::Policy;
use crate::service::{serve, AppState};
use crate::sim::{compare_memory, runs_csv, simulate_runs, SimReport};
use crate::store::{
    self, export_figure_csv, fingerprint_of, Artifact, Figure, FigureInput, PolicyArtifact,
    ReportArtifact, TableEntry,
};

pub const EXIT_OK: i32 = 0;
/// Bad flags; clap's own exit code.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;
pub const EXIT_ARTIFACT: i32 = 6;
pub const EXIT_DOMAIN: i32 = 7;
/// The oracle disagreed with the solvers.
pub const EXIT_CHECK_FAILED: i32 = 8;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnsupportedFigure(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::VersionMismatch { .. } | Error::HashMismatch { .. } | Error::Malformed(_) => EXIT_ARTIFACT,
        Error::Domain(_) | Error::OutOfRange { .. } | Error::Session(_) => EXIT_DOMAIN,
    }
}

#[derive(Debug, Parser)]
#[command(name = "relaywalk", version, about = "As-you-go relay placement along a line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario TOML file, or a bundled preset: `indoor_dbm`, `indoor_mw_grid`.
    #[arg(long, default_value = "indoor_dbm")]
    pub config: String,
}

impl ScenarioArgs {
    pub fn scenario(&self) -> Result<Scenario> {
        match self.config.as_str() {
            "indoor_dbm" if !Path::new("indoor_dbm").exists() => Ok(Scenario::indoor_dbm()),
            "indoor_mw_grid" if !Path::new("indoor_mw_grid").exists() => Ok(Scenario::indoor_mw_grid()),
            path => Scenario::load(path),
        }
    }
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, default_value = "sum")]
    pub objective: Objective,
    /// Memory: how many previous nodes a new node may link to.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Relay cost in mW; repeat for several values.
    #[arg(long, default_values_t = [0.01])]
    pub xi: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the link-power pmf g(r, level) and failure probabilities.
    Channel {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Tabulate far enough for memory-`n` policies.
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also store the model as a channel artifact.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Solve for an optimal policy and store it.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Artifact path; with several `--xi` the value is appended to the stem.
        #[arg(long, default_value = "policy.json")]
        out: PathBuf,
        /// Also write the threshold table as CSV.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Monte Carlo deployments under a stored or freshly solved policy.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Stored policy; solved from the flags below when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        solve: PolicyArgs,
        #[arg(long, default_value_t = 200_000)]
        runs: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Per-run CSV dump.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Memory 1 vs memory 2 for a grid of relay costs.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "max")]
        objective: Objective,
        #[arg(long, default_values_t = [0.001, 0.01, 0.1, 1.0])]
        xi: Vec<f64>,
        /// Runs per simulated policy; 0 skips simulation.
        #[arg(long, default_value_t = 0)]
        runs: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the collapsed solvers against brute-force backward induction.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// End-of-line probability per step.
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Line-length cap in steps.
        #[arg(long, default_value_t = 10)]
        cap: u32,
        #[arg(long, default_values_t = [0.001, 0.01, 0.1, 1.0])]
        xi: Vec<f64>,
        /// Largest deviation (mW) still counted as agreement.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Export a figure or table as CSV.
    Export {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// fig2, fig4, fig5, table1, table2 or table3.
        #[arg(long)]
        figure: String,
        #[arg(long, default_values_t = [0.001, 0.01, 0.1])]
        xi: Vec<f64>,
        /// Runs per row for the tables.
        #[arg(long, default_value_t = 200_000)]
        runs: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the walk assistant over HTTP.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Stored policies to offer; repeatable.
        #[arg(long)]
        policy: Vec<PathBuf>,
        /// Solve and offer these policies as well.
        #[command(flatten)]
        solve: PolicyArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => store::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn numbered(path: &Path, xi: f64, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("policy");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("json");
    path.with_file_name(format!("{stem}_xi{xi}.{ext}"))
}

fn solve_all(scenario: &Scenario, args: &PolicyArgs) -> Result<(LinkPowerModel, Vec<Policy>)> {
    let model = scenario.link_model(args.n)?;
    let ps = args
        .xi
        .iter()
        .map(|&xi| Policy::solve(&model, &scenario.deployment(args.objective, args.n, xi)))
        .collect::<Result<Vec<_>>>()?;
    Ok((model, ps))
}

fn fmt_report(label: &str, j0: f64, r: &SimReport) -> String {
    format!(
        "{label}: J0={j0:.6} sim total={:.6}±{:.6} E[N]={:.4}±{:.4} relay={:.6} power={:.6} failure={:.4}% [{:.4}%, {:.4}%] ({} runs, seed {})",
        r.total,
        r.total_hw,
        r.mean_n,
        r.mean_n_hw,
        r.relay_cost,
        r.power_cost,
        100.0 * r.failure_prob,
        100.0 * r.failure_ci.0,
        100.0 * r.failure_ci.1,
        r.runs,
        r.seed
    )
}

/// Runs one command. Returns the exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Channel {
            scenario,
            n,
            out,
            save,
        } => {
            let model = scenario.scenario()?.link_model(n)?;
            emit(out.as_deref(), &model.pmf_csv())?;
            if let Some(p) = save {
                let fp = store::save(&Artifact::Channel(model), &p)?;
                eprintln!("channel {fp} -> {}", p.display());
            }
        }
        Command::Solve {
            scenario,
            policy,
            out,
            thresholds,
        } => {
            let s = scenario.scenario()?;
            let (model, ps) = solve_all(&s, &policy)?;
            let channel_fingerprint = fingerprint_of(&model)?;
            let many = ps.len() > 1;
            for p in ps {
                let xi = p.config().xi;
                let path = numbered(&out, xi, many);
                let art = Artifact::Policy(PolicyArtifact {
                    channel_fingerprint: channel_fingerprint.clone(),
                    policy: p.clone(),
                });
                let fp = store::save(&art, &path)?;
                println!(
                    "{}: J0={:.6} mW after {} iterations (residual {:.1e}) -> {} [{}]",
                    p.label(),
                    p.j0(),
                    p.iterations(),
                    p.residual(),
                    path.display(),
                    &fp[..12]
                );
                if let Some(t) = &thresholds {
                    let csv = match &p {
                        Policy::Memory(m) => m.threshold_csv(),
                        other => export_figure_csv(
                            if matches!(other, Policy::SumAdjacent(_)) {
                                Figure::Fig2
                            } else {
                                Figure::Fig4
                            },
                            FigureInput::Policies {
                                policies: std::slice::from_ref(other),
                                levels: model.levels(),
                                step_m: model.params().step_m,
                            },
                        )?,
                    };
                    store::write_text(numbered(t, xi, many), &csv)?;
                }
            }
        }
        Command::Simulate {
            scenario,
            policy,
            solve,
            runs,
            seed,
            out,
            trace,
        } => {
            let s = scenario.scenario()?;
            let (model, p) = match policy {
                Some(path) => {
                    let (_, art) = store::load_policy(&path)?;
                    let model = s.link_model(art.policy.config().memory_n)?;
                    if fingerprint_of(&model)? != art.channel_fingerprint {
                        return Err(Error::Config(format!(
                            "{} was solved on a different channel than --config {}",
                            path.display(),
                            scenario.config
                        )));
                    }
                    (model, art.policy)
                }
                None => {
                    if solve.xi.len() != 1 {
                        return Err(Error::Config("simulate takes a single --xi".into()));
                    }
                    let (m, mut ps) = solve_all(&s, &solve)?;
                    (m, ps.remove(0))
                }
            };
            let rs = simulate_runs(&p, &model, runs, seed)?;
            let report = SimReport::from_runs(&rs, p.config().xi, seed);
            if let Some(t) = trace {
                store::write_text(t, &runs_csv(&rs))?;
            }
            println!("{}", fmt_report(&p.label(), p.j0(), &report));
            store::save(
                &Artifact::Report(ReportArtifact {
                    policy_fingerprint: fingerprint_of(&p)?,
                    report,
                }),
                &out,
            )?;
        }
        Command::Compare {
            scenario,
            objective,
            xi,
            runs,
            seed,
            out,
        } => {
            let s = scenario.scenario()?;
            let model = s.link_model(2)?;
            let rows = compare_memory(&model, &s.deployment(objective, 1, 0.0), &xi, runs, seed)?;
            emit(
                out.as_deref(),
                &export_figure_csv(Figure::Table3, FigureInput::Comparison(&rows))?,
            )?;
            if let Some(bad) = rows.iter().find(|r| r.j0_n2 > r.j0_n1) {
                eprintln!("warning: memory 2 costs more than memory 1 at xi={}", bad.xi);
            }
        }
        Command::Oracle {
            scenario,
            theta,
            cap,
            xi,
            tol,
        } => {
            let s = scenario.scenario()?;
            let model = s.link_model(1)?;
            let mut base = s.deployment(Objective::Sum, 1, 0.0);
            base.theta = theta;
            let checks = oracle_suite(&model, &base, &xi, cap)?;
            let mut worst: f64 = 0.0;
            for c in &checks {
                println!(
                    "{} xi={} theta={} cap={}: oracle={:.12} solver={:.12} deviation={:.3e}",
                    c.objective, c.xi, c.theta, c.l_cap, c.oracle, c.solver, c.deviation
                );
                worst = worst.max(c.deviation);
            }
            println!("max deviation {worst:.3e} over {} configurations", checks.len());
            if worst >= tol {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Export {
            scenario,
            figure,
            xi,
            runs,
            seed,
            out,
        } => {
            let figure: Figure = figure.parse()?;
            let s = scenario.scenario()?;
            let objective = match figure {
                Figure::Fig2 | Figure::Table1 => Objective::Sum,
                _ => Objective::Max,
            };
            let csv = match figure {
                Figure::Fig2 | Figure::Fig4 | Figure::Fig5 => {
                    let args = PolicyArgs { objective, n: 1, xi };
                    let (model, ps) = solve_all(&s, &args)?;
                    export_figure_csv(
                        figure,
                        FigureInput::Policies {
                            policies: &ps,
                            levels: model.levels(),
                            step_m: model.params().step_m,
                        },
                    )?
                }
                Figure::Table1 | Figure::Table2 => {
                    let args = PolicyArgs { objective, n: 1, xi };
                    let (model, ps) = solve_all(&s, &args)?;
                    let rows = ps
                        .iter()
                        .map(|p| {
                            let rs = simulate_runs(p, &model, runs, seed)?;
                            Ok(TableEntry {
                                xi: p.config().xi,
                                j0: p.j0(),
                                report: SimReport::from_runs(&rs, p.config().xi, seed),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    export_figure_csv(figure, FigureInput::Tables(&rows))?
                }
                Figure::Table3 => {
                    let model = s.link_model(2)?;
                    let rows =
                        compare_memory(&model, &s.deployment(Objective::Max, 1, 0.0), &xi, 0, seed)?;
                    export_figure_csv(figure, FigureInput::Comparison(&rows))?
                }
            };
            emit(out.as_deref(), &csv)?;
        }
        Command::Serve {
            scenario,
            policy,
            solve,
            port,
            host,
        } => {
            let s = scenario.scenario()?;
            let levels = s.levels()?;
            let state = Arc::new(AppState::new());
            if policy.is_empty() {
                let (_, ps) = solve_all(&s, &solve)?;
                for p in ps {
                    let id = state.add_policy(p.clone(), levels.clone())?;
                    eprintln!("policy {id}: {}", p.label());
                }
            }
            for path in &policy {
                let (_, art) = store::load_policy(path)?;
                let label = art.policy.label();
                let id = state.add_policy(art.policy, levels.clone())?;
                eprintln!("policy {id}: {label} ({})", path.display());
            }
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Error::Config(format!("bad address {host}:{port}: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(serve(state, addr)).map_err(|e| Error::io(addr.to_string(), e))?;
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command,
/// printing errors to stderr. Returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
