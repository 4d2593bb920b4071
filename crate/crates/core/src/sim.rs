//! Monte Carlo deployments.
//!
//! Each run draws a line length `L` with `P(L = k) = theta (1 - theta)^(k-1)`,
//! walks steps `1..L`, measures a fresh link to every visible node at each
//! step, lets the policy decide, and places the source at `L`.
//!
//! Run `i` of a simulation seeded with `seed` uses
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so results do
//! not depend on how runs are scheduled across threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjacent::Decision;
use crate::channel::LinkPowerModel;
use crate::config::{DeploymentConfig, Objective};
use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::policy::Policy;

/// Events below which the failure interval is Clopper-Pearson instead of
/// the normal approximation.
pub const EXACT_CI_BELOW: u64 = 50;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// A forced placement where every visible link needs more than the
    /// maximum level.
    ForcedLink,
    /// Same, for the source at the end of the line.
    SourceLink,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub position: u32,
    pub kind: FailureKind,
}

/// One measured link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkMeasurement {
    /// Continuous requirement, mW.
    pub required_mw: f64,
    /// Quantized level, mW.
    pub level_mw: f64,
}

/// Everything observed at one step of the walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub position: u32,
    /// Distances to the visible nodes, newest first.
    pub y: Vec<u32>,
    /// One measurement per visible node, same order as `y`.
    pub links: Vec<LinkMeasurement>,
    /// `None` at the line end, where the source is placed.
    pub decision: Option<Decision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentTrace {
    pub line_length: u32,
    /// Positions of the relays followed by the source.
    pub placements: Vec<u32>,
    /// `node_links[i]`: quantized powers from placed node `i + 1` (relays,
    /// then source) to its visible predecessors, newest first.
    pub node_links: Vec<Vec<f64>>,
    pub steps: Vec<StepRecord>,
    pub failures: Vec<FailureEvent>,
    /// Shortest-path length of the source, tracked online.
    pub path_cost: f64,
}

impl DeploymentTrace {
    pub fn relays(&self) -> usize {
        self.placements.len() - 1
    }

    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

fn sample_line_length<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<u32> {
    if theta >= 1.0 {
        return Ok(1);
    }
    let g = Geometric::new(theta).map_err(|e| Error::Config(format!("theta: {e}")))?;
    Ok(u32::try_from(g.sample(rng)).unwrap_or(u32::MAX - 1) + 1)
}

fn measure<R: Rng + ?Sized>(
    model: &LinkPowerModel,
    y: &[u32],
    rng: &mut R,
) -> Result<(Vec<LinkMeasurement>, bool)> {
    let mut all_failed = true;
    let links = y
        .iter()
        .map(|&d| {
            let s = model.sample_required_power(d, rng)?;
            all_failed &= s.failed;
            Ok(LinkMeasurement {
                required_mw: s.required_mw,
                level_mw: s.level_mw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((links, all_failed))
}

/// One deployment walk driven by `policy`.
pub fn run_deployment<R: Rng + ?Sized>(
    policy: &Policy,
    model: &LinkPowerModel,
    rng: &mut R,
) -> Result<DeploymentTrace> {
    let cfg = *policy.config();
    let line_length = sample_line_length(cfg.theta, rng)?;
    let mut state = MemoryState::initial();
    let mut trace = DeploymentTrace {
        line_length,
        placements: Vec::new(),
        node_links: Vec::new(),
        steps: Vec::new(),
        failures: Vec::new(),
        path_cost: 0.0,
    };
    for x in 1..line_length {
        let (links, all_failed) = measure(model, &state.y, rng)?;
        state.gamma = links.iter().map(|l| l.level_mw).collect();
        let decision = policy.decide(&state)?;
        trace.steps.push(StepRecord {
            position: x,
            y: state.y.clone(),
            links,
            decision: Some(decision),
        });
        if decision.places() {
            if decision == Decision::ForcedPlace && all_failed {
                trace.failures.push(FailureEvent {
                    position: x,
                    kind: FailureKind::ForcedLink,
                });
            }
            trace.placements.push(x);
            trace.node_links.push(state.gamma.clone());
            state.place_and_advance(&cfg)?;
        } else {
            state.advance(&cfg);
        }
    }
    let (links, all_failed) = measure(model, &state.y, rng)?;
    state.gamma = links.iter().map(|l| l.level_mw).collect();
    if all_failed {
        trace.failures.push(FailureEvent {
            position: line_length,
            kind: FailureKind::SourceLink,
        });
    }
    trace.path_cost = state.statistic(cfg.objective)?;
    trace.placements.push(line_length);
    trace.node_links.push(state.gamma.clone());
    trace.steps.push(StepRecord {
        position: line_length,
        y: state.y.clone(),
        links,
        decision: None,
    });
    Ok(trace)
}

/// Shortest-path length from the source to the sink over the deployed
/// chain, where node `i` may link to any of its `memory_n` predecessors
/// through the link sampled when it was placed. Predecessors without a
/// sample were out of range.
pub fn path_cost(trace: &DeploymentTrace, objective: Objective, memory_n: u32) -> Result<f64> {
    path_cost_links(&trace.node_links, objective, memory_n)
}

/// [`path_cost`] on bare link samples: `node_links[i]` holds the links of
/// node `i + 1` to its predecessors, newest first.
pub fn path_cost_links(node_links: &[Vec<f64>], objective: Objective, memory_n: u32) -> Result<f64> {
    let n = memory_n as usize;
    let mut d = vec![0.0];
    for (i, links) in node_links.iter().enumerate() {
        let node = i + 1;
        let visible = n.min(node);
        if links.is_empty() || links.len() > visible {
            return Err(Error::Domain(format!(
                "node {node} has {} link samples, expected 1..={visible}",
                links.len()
            )));
        }
        let best = (1..=links.len())
            .map(|back| objective.combine(links[back - 1], d[node - back]))
            .fold(f64::INFINITY, f64::min);
        d.push(best);
    }
    Ok(*d.last().expect("nonempty"))
}

/// Per-run outcome, the row of a trace dump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: u64,
    pub line_length: u32,
    pub relays: u32,
    pub path_cost: f64,
    pub failed: bool,
}

/// Deterministic generator for run `run` of a simulation seeded with `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

pub fn simulate_runs(
    policy: &Policy,
    model: &LinkPowerModel,
    runs: u64,
    seed: u64,
) -> Result<Vec<RunSummary>> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let trace = run_deployment(policy, model, &mut run_rng(seed, run))?;
            Ok(RunSummary {
                run,
                line_length: trace.line_length,
                relays: trace.relays() as u32,
                path_cost: trace.path_cost,
                failed: trace.failed(),
            })
        })
        .collect()
}

/// `run,line_length,relays,path_cost_mW,failed`, one line per run.
pub fn runs_csv(runs: &[RunSummary]) -> String {
    let mut out = String::from("run,line_length,relays,path_cost_mW,failed\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.run, r.line_length, r.relays, r.path_cost, r.failed
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: u64,
    pub seed: u64,
    pub xi: f64,
    pub mean_line_length: f64,
    pub mean_n: f64,
    pub relay_cost: f64,
    pub power_cost: f64,
    pub total: f64,
    pub failure_events: u64,
    pub failure_prob: f64,
    /// 95% half-widths (normal approximation).
    pub mean_n_hw: f64,
    pub relay_cost_hw: f64,
    pub power_cost_hw: f64,
    pub total_hw: f64,
    /// 95% interval for `failure_prob`; Clopper-Pearson below
    /// [`EXACT_CI_BELOW`] events.
    pub failure_ci: (f64, f64),
}

fn mean_hw(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

impl SimReport {
    pub fn from_runs(runs: &[RunSummary], xi: f64, seed: u64) -> Self {
        let n = runs.len() as f64;
        let (mean_line_length, _) = mean_hw(runs.iter().map(|r| r.line_length as f64), n);
        let (mean_n, mean_n_hw) = mean_hw(runs.iter().map(|r| r.relays as f64), n);
        let (power_cost, power_cost_hw) = mean_hw(runs.iter().map(|r| r.path_cost), n);
        let (_, total_hw) = mean_hw(runs.iter().map(|r| xi * r.relays as f64 + r.path_cost), n);
        let failure_events = runs.iter().filter(|r| r.failed).count() as u64;
        let relay_cost = xi * mean_n;
        Self {
            runs: runs.len() as u64,
            seed,
            xi,
            mean_line_length,
            mean_n,
            relay_cost,
            power_cost,
            total: relay_cost + power_cost,
            failure_events,
            failure_prob: failure_events as f64 / n,
            mean_n_hw,
            relay_cost_hw: xi * mean_n_hw,
            power_cost_hw,
            total_hw,
            failure_ci: binomial_ci(failure_events, runs.len() as u64),
        }
    }

    /// Binomial standard error of `failure_prob`.
    pub fn failure_se(&self) -> f64 {
        let p = self.failure_prob;
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

pub fn simulate(policy: &Policy, model: &LinkPowerModel, runs: u64, seed: u64) -> Result<SimReport> {
    let rs = simulate_runs(policy, model, runs, seed)?;
    Ok(SimReport::from_runs(&rs, policy.config().xi, seed))
}

fn ln_binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    libm::lgamma(nf + 1.0) - libm::lgamma(kf + 1.0) - libm::lgamma(nf - kf + 1.0)
        + kf * p.ln()
        + (nf - kf) * (-p).ln_1p()
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`, summed in log space; meant for
/// small `k`.
fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    (0..=k.min(n)).map(|i| ln_binom_pmf(n, i, p).exp()).sum::<f64>().min(1.0)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    // f(lo) false, f(hi) true
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// 95% interval for a binomial proportion.
pub fn binomial_ci(events: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = events as f64 / n;
    if events >= EXACT_CI_BELOW && trials - events >= EXACT_CI_BELOW {
        let hw = Z95 * (p * (1.0 - p) / n).sqrt();
        return ((p - hw).max(0.0), (p + hw).min(1.0));
    }
    let alpha = 0.05;
    let lo = if events == 0 {
        0.0
    } else {
        // P(X >= k | p) = alpha / 2, increasing in p
        bisect(0.0, 1.0, |q| 1.0 - binom_cdf(events - 1, trials, q) >= alpha / 2.0)
    };
    let hi = if events == trials {
        1.0
    } else {
        // P(X <= k | p) = alpha / 2, decreasing in p
        bisect(0.0, 1.0, |q| binom_cdf(events, trials, q) <= alpha / 2.0)
    };
    (lo, hi)
}

/// One column of the memory comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub objective: Objective,
    pub xi: f64,
    pub j0_n1: f64,
    pub j0_n2: f64,
    /// `100 (J0(n=1) - J0(n=2)) / J0(n=1)`.
    pub gain_pct: f64,
    pub sim_total_n1: Option<f64>,
    pub sim_total_n2: Option<f64>,
}

/// Solves memory 1 and memory 2 for every `xi` and, when `runs > 0`,
/// simulates both. `model` must cover `2 r_max_steps` steps.
pub fn compare_memory(
    model: &LinkPowerModel,
    base: &DeploymentConfig,
    xis: &[f64],
    runs: u64,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    xis.iter()
        .map(|&xi| {
            let solve = |n: u32| {
                Policy::solve(
                    model,
                    &DeploymentConfig {
                        xi,
                        memory_n: n,
                        ..*base
                    },
                )
            };
            let (p1, p2) = (solve(1)?, solve(2)?);
            let sim = |p: &Policy| -> Result<Option<f64>> {
                if runs == 0 {
                    Ok(None)
                } else {
                    Ok(Some(simulate(p, model, runs, seed)?.total))
                }
            };
            Ok(ComparisonRow {
                objective: base.objective,
                xi,
                j0_n1: p1.j0(),
                j0_n2: p2.j0(),
                gain_pct: 100.0 * (p1.j0() - p2.j0()) / p1.j0(),
                sim_total_n1: sim(&p1)?,
                sim_total_n2: sim(&p2)?,
            })
        })
        .collect()
}

/// Re-derives the walk's decisions from the recorded measurements.
pub fn replay_decisions(policy: &Policy, trace: &DeploymentTrace) -> Result<Vec<Decision>> {
    let cfg = policy.config();
    let mut state = MemoryState::initial();
    let mut out = Vec::new();
    for step in &trace.steps {
        if step.decision.is_none() {
            break;
        }
        state.gamma = step.links.iter().map(|l| l.level_mw).collect();
        let d = policy.decide(&state)?;
        out.push(d);
        if d.places() {
            state.place_and_advance(&cfg)?;
        } else {
            state.advance(&cfg);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;

    fn policy(objective: Objective, n: u32, xi: f64) -> (Policy, LinkPowerModel) {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(n).unwrap();
        (Policy::solve(&m, &s.deployment(objective, n, xi)).unwrap(), m)
    }

    #[test]
    fn theta_one_is_a_single_link() {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(1).unwrap();
        let mut cfg = s.deployment(Objective::Sum, 1, 0.01);
        cfg.theta = 1.0;
        let p = Policy::solve(&m, &cfg).unwrap();
        for run in 0..50 {
            let t = run_deployment(&p, &m, &mut run_rng(1, run)).unwrap();
            assert_eq!(t.line_length, 1);
            assert_eq!(t.relays(), 0);
            assert_eq!(t.path_cost, t.node_links[0][0]);
        }
    }

    #[test]
    fn trace_invariants() {
        let (p, m) = policy(Objective::Sum, 1, 0.1);
        for run in 0..200 {
            let t = run_deployment(&p, &m, &mut run_rng(3, run)).unwrap();
            assert_eq!(*t.placements.last().unwrap(), t.line_length);
            let mut prev = 0;
            for &x in &t.placements {
                assert!(x > prev && x - prev <= 10);
                prev = x;
            }
            let dp = path_cost(&t, Objective::Sum, 1).unwrap();
            assert!((dp - t.path_cost).abs() < 1e-12);
            let chain: f64 = t.node_links.iter().map(|l| l[0]).sum();
            assert!((chain - t.path_cost).abs() < 1e-12);
        }
    }

    #[test]
    fn reproducible_and_schedule_independent() {
        let (p, m) = policy(Objective::Max, 1, 0.01);
        let a = simulate(&p, &m, 2000, 11).unwrap();
        let b = simulate(&p, &m, 2000, 11).unwrap();
        assert_eq!(a, b);
        let serial: Vec<RunSummary> = (0..2000)
            .map(|run| {
                let t = run_deployment(&p, &m, &mut run_rng(11, run)).unwrap();
                RunSummary {
                    run,
                    line_length: t.line_length,
                    relays: t.relays() as u32,
                    path_cost: t.path_cost,
                    failed: t.failed(),
                }
            })
            .collect();
        assert_eq!(SimReport::from_runs(&serial, 0.01, 11), a);
        let c = simulate(&p, &m, 2000, 12).unwrap();
        assert_ne!(a.total, c.total);
    }

    #[test]
    fn report_totals_add_up() {
        let (p, m) = policy(Objective::Sum, 1, 0.01);
        let r = simulate(&p, &m, 3000, 5).unwrap();
        assert!((r.total - (r.relay_cost + r.power_cost)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.failure_prob));
        assert!(r.failure_ci.0 <= r.failure_prob && r.failure_prob <= r.failure_ci.1);
    }

    #[test]
    fn path_cost_small_cases() {
        let t = DeploymentTrace {
            line_length: 3,
            placements: vec![1, 2, 3],
            node_links: vec![vec![0.5], vec![0.4, 0.6], vec![0.9, 0.1]],
            steps: vec![],
            failures: vec![],
            path_cost: f64::NAN,
        };
        // D1 = 0.5, D2 = min(0.4 + 0.5, 0.6) = 0.6, D3 = min(0.9 + 0.6, 0.1 + 0.5)
        assert!((path_cost(&t, Objective::Sum, 2).unwrap() - 0.6).abs() < 1e-15);
        let mut chain = t.clone();
        chain.node_links.iter_mut().for_each(|l| l.truncate(1));
        assert!((path_cost(&chain, Objective::Sum, 1).unwrap() - 1.8).abs() < 1e-15);
        assert!(path_cost(&t, Objective::Sum, 1).is_err());
        assert_eq!(path_cost(&t, Objective::Max, 2).unwrap(), 0.5);
        let mut missing = t.clone();
        missing.node_links[1].clear();
        assert!(path_cost(&missing, Objective::Sum, 2).is_err());
    }

    #[test]
    fn clopper_pearson_reference_values() {
        // Closed forms: k = 0 gives upper 1 - (alpha/2)^(1/n); k = n mirrors.
        let (lo, hi) = binomial_ci(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-12);
        // k = 1, n = 10: lower solves 1 - (1-p)^10 = 0.025.
        let (lo, _) = binomial_ci(1, 10);
        assert!((lo - (1.0 - 0.975f64.powf(0.1))).abs() < 1e-12);
        let (lo, hi) = binomial_ci(500, 1000);
        assert!((hi - lo - 2.0 * Z95 * (0.25f64 / 1000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn replay_matches_recorded_decisions() {
        let (p, m) = policy(Objective::Max, 2, 0.01);
        for run in 0..100 {
            let t = run_deployment(&p, &m, &mut run_rng(9, run)).unwrap();
            let recorded: Vec<Decision> = t.steps.iter().filter_map(|s| s.decision).collect();
            assert_eq!(replay_decisions(&p, &t).unwrap(), recorded);
            assert!((path_cost(&t, Objective::Max, 2).unwrap() - t.path_cost).abs() < 1e-15);
        }
    }
}
