//! Optimal placement when every relay forwards to the relay placed just
//! before it (memory 1).
//!
//! Both solvers run total-cost value iteration collapsed onto the expected
//! value functions `V(r) = E J(r, Gamma_r)` (sum objective) and
//! `V(r, gamma_max) = E J(r, Gamma_r, gamma_max)` (max objective), starting
//! from zero. Forced placement at `r_max_steps` is the only feasible action
//! there, which is the same as treating `V(r_max_steps + 1)` as infinite.

use serde::{Deserialize, Serialize};

use crate::channel::{LinkPowerModel, LEVEL_RTOL};
use crate::config::{DeploymentConfig, Objective};
use crate::error::{Error, Result};

/// Sup-norm residual (mW) at which value iteration stops.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Place,
    Skip,
    /// The gap to the previous node reached `r_max_steps`.
    ForcedPlace,
}

impl Decision {
    pub fn places(self) -> bool {
        !matches!(self, Decision::Skip)
    }
}

/// Expected-cost breakdown of a fixed policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    /// Total expected cost `xi * E(N) + power cost`.
    pub total: f64,
    pub mean_relays: f64,
    pub power_cost: f64,
}

fn check_model(model: &LinkPowerModel, cfg: &DeploymentConfig, objective: Objective) -> Result<()> {
    cfg.validate()?;
    if cfg.objective != objective {
        return Err(Error::Config(format!(
            "configuration objective is {}, solver expects {objective}",
            cfg.objective
        )));
    }
    if model.max_steps() < cfg.r_max_steps {
        return Err(Error::Config(format!(
            "link model covers {} steps, need at least r_max_steps = {}",
            model.max_steps(),
            cfg.r_max_steps
        )));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("tolerance must be positive, got {tol}")))
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Sum objective
// ---------------------------------------------------------------------------

/// Per-distance tables the sum backup reads.
struct SumTables<'a> {
    levels: &'a [f64],
    pmf: Vec<&'a [f64]>,
    /// `mean[r - 1] = E(Gamma_r)`.
    mean: Vec<f64>,
    r_max: usize,
    xi: f64,
}

impl<'a> SumTables<'a> {
    fn new(model: &'a LinkPowerModel, cfg: &DeploymentConfig) -> Result<Self> {
        let r_max = cfg.r_max_steps as usize;
        let pmf = (1..=cfg.r_max_steps)
            .map(|r| model.pmf(r))
            .collect::<Result<Vec<_>>>()?;
        let mean = (1..=cfg.r_max_steps)
            .map(|r| model.mean_level_power(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            levels: model.levels().levels(),
            pmf,
            mean,
            r_max,
            xi: cfg.xi,
        })
    }

    /// Cost of not placing at distance `r` when the line ends w.p. `hazard`
    /// at the next step.
    fn skip_cost(&self, hazard: f64, v_next: &[f64], r: usize) -> f64 {
        if r >= self.r_max {
            f64::INFINITY
        } else if hazard >= 1.0 {
            self.mean[r]
        } else {
            hazard * self.mean[r] + (1.0 - hazard) * v_next[r]
        }
    }

    /// Cost-to-go from a fresh start (state 0).
    fn regen_cost(&self, hazard: f64, v_next: &[f64]) -> f64 {
        if hazard >= 1.0 {
            self.mean[0]
        } else {
            hazard * self.mean[0] + (1.0 - hazard) * v_next[0]
        }
    }

    /// One application of the function iteration. `restart` is the value of
    /// state 0 used on the place branch.
    fn backup(&self, hazard: f64, v_next: &[f64], restart: f64, out: &mut [f64]) {
        for r in 1..=self.r_max {
            let cnp = self.skip_cost(hazard, v_next, r);
            out[r - 1] = self.pmf[r - 1]
                .iter()
                .zip(self.levels)
                .map(|(p, g)| p * (self.xi + g + restart).min(cnp))
                .sum();
        }
    }
}

/// Optimal policy for the sum-power objective with memory 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumAdjacentPolicy {
    pub config: DeploymentConfig,
    /// `v[r - 1] = V(r)`, `r = 1..=r_max_steps`.
    pub v: Vec<f64>,
    /// Optimal cost from the sink, `J(0)`.
    pub j0: f64,
    /// `gamma_th[r - 1]`, mW, clipped to `[0, max level]`. Zero means the
    /// policy never places at that distance.
    pub gamma_th: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_sum_adjacent(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    tol: f64,
    max_iters: usize,
) -> Result<SumAdjacentPolicy> {
    solve_sum_adjacent_observed(model, cfg, tol, max_iters, |_, _, _| {})
}

/// Like [`solve_sum_adjacent`], calling `observe(k, v, j0)` after every
/// iteration `k`.
pub fn solve_sum_adjacent_observed(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(usize, &[f64], f64),
) -> Result<SumAdjacentPolicy> {
    check_model(model, cfg, Objective::Sum)?;
    check_tol(tol)?;
    let t = SumTables::new(model, cfg)?;
    let mut v = vec![0.0; t.r_max];
    let mut next = vec![0.0; t.r_max];
    let mut j0 = 0.0;
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        t.backup(cfg.theta, &v, j0, &mut next);
        let j0_next = t.regen_cost(cfg.theta, &v);
        residual = sup_diff(&v, &next).max((j0_next - j0).abs());
        std::mem::swap(&mut v, &mut next);
        j0 = j0_next;
        observe(k, &v, j0);
        if residual < tol {
            let gamma_th = (1..=t.r_max)
                .map(|r| {
                    let cnp = t.skip_cost(cfg.theta, &v, r);
                    (cnp - cfg.xi - j0).clamp(0.0, model.levels().max())
                })
                .collect();
            return Ok(SumAdjacentPolicy {
                config: *cfg,
                v,
                j0,
                gamma_th,
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
    })
}

impl SumAdjacentPolicy {
    pub fn r_max(&self) -> u32 {
        self.config.r_max_steps
    }

    pub fn gamma_th(&self, r: u32) -> Result<f64> {
        self.check_r(r)?;
        Ok(self.gamma_th[r as usize - 1])
    }

    /// Largest level the policy would place at for distance `r`, or 0 when
    /// no level qualifies.
    pub fn level_threshold(&self, r: u32, levels: &[f64]) -> Result<f64> {
        let th = self.gamma_th(r)?;
        Ok(levels
            .iter()
            .rev()
            .copied()
            .find(|&l| l <= th * (1.0 + LEVEL_RTOL))
            .unwrap_or(0.0))
    }

    fn check_r(&self, r: u32) -> Result<()> {
        if r == 0 || r > self.r_max() {
            return Err(Error::OutOfRange {
                what: "distance (steps)",
                value: r.to_string(),
                valid: format!("1..={}", self.r_max()),
            });
        }
        Ok(())
    }

    /// Place iff `gamma <= gamma_th(r)`; always place at `r_max_steps`.
    pub fn decide(&self, r: u32, gamma: f64) -> Result<Decision> {
        self.check_r(r)?;
        if r == self.r_max() {
            return Ok(Decision::ForcedPlace);
        }
        Ok(if gamma <= self.gamma_th[r as usize - 1] {
            Decision::Place
        } else {
            Decision::Skip
        })
    }

    /// Exact expected cost, relay count and power cost of following this
    /// policy's decisions, by iterating the (min-free) policy equations.
    pub fn evaluate(&self, model: &LinkPowerModel) -> Result<PolicyEvaluation> {
        let cfg = self.config;
        let t = SumTables::new(model, &cfg)?;
        let r_max = t.r_max;
        let place: Vec<Vec<bool>> = (1..=cfg.r_max_steps)
            .map(|r| {
                t.levels
                    .iter()
                    .map(|&g| self.decide(r, g).map(Decision::places))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        // (relay weight, power weight)
        let run = |w_relay: f64, w_power: f64| -> Result<f64> {
            let mut v = vec![0.0; r_max];
            let mut z = 0.0;
            for _ in 0..DEFAULT_MAX_ITERS {
                let mut next = vec![0.0; r_max];
                for r in 1..=r_max {
                    let skip = if r < r_max {
                        cfg.theta * w_power * t.mean[r] + (1.0 - cfg.theta) * v[r]
                    } else {
                        f64::NAN
                    };
                    next[r - 1] = t.pmf[r - 1]
                        .iter()
                        .zip(t.levels)
                        .zip(&place[r - 1])
                        .map(|((p, g), &pl)| {
                            p * if pl { w_relay + w_power * g + z } else { skip }
                        })
                        .sum();
                }
                let z_next = cfg.theta * w_power * t.mean[0] + (1.0 - cfg.theta) * v[0];
                let res = sup_diff(&v, &next).max((z_next - z).abs());
                v = next;
                z = z_next;
                if res < 1e-14 * z.abs().max(1.0) {
                    return Ok(z);
                }
            }
            Err(Error::NotConverged {
                iterations: DEFAULT_MAX_ITERS,
                residual: f64::NAN,
            })
        };
        let mean_relays = run(1.0, 0.0)?;
        let power_cost = run(0.0, 1.0)?;
        Ok(PolicyEvaluation {
            total: cfg.xi * mean_relays + power_cost,
            mean_relays,
            power_cost,
        })
    }
}

// ---------------------------------------------------------------------------
// Max objective
// ---------------------------------------------------------------------------

struct MaxTables<'a> {
    pmf: Vec<&'a [f64]>,
    /// `{0} ∪ S`; index `i + 1` is level `i`.
    grid: Vec<f64>,
    /// `emax[r - 1][j] = E max{grid[j], Gamma_r}`.
    emax: Vec<Vec<f64>>,
    mean1: f64,
    r_max: usize,
    xi: f64,
}

impl<'a> MaxTables<'a> {
    fn new(model: &'a LinkPowerModel, cfg: &DeploymentConfig) -> Result<Self> {
        let mut grid = vec![0.0];
        grid.extend_from_slice(model.levels().levels());
        let pmf = (1..=cfg.r_max_steps)
            .map(|r| model.pmf(r))
            .collect::<Result<Vec<_>>>()?;
        let emax = (1..=cfg.r_max_steps)
            .map(|r| grid.iter().map(|&a| model.mean_max_with(r, a)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            pmf,
            mean1: model.mean_level_power(1)?,
            grid,
            emax,
            r_max: cfg.r_max_steps as usize,
            xi: cfg.xi,
        })
    }

    fn width(&self) -> usize {
        self.grid.len()
    }

    /// Place cost given the running maximum after placing, `m` (grid index).
    fn place_cost(&self, hazard: f64, v_next: &[Vec<f64>], m: usize) -> f64 {
        if hazard >= 1.0 {
            self.xi + self.emax[0][m]
        } else {
            self.xi + hazard * self.emax[0][m] + (1.0 - hazard) * v_next[0][m]
        }
    }

    fn skip_cost(&self, hazard: f64, v_next: &[Vec<f64>], r: usize, j: usize) -> f64 {
        if r >= self.r_max {
            f64::INFINITY
        } else if hazard >= 1.0 {
            self.emax[r][j]
        } else {
            hazard * self.emax[r][j] + (1.0 - hazard) * v_next[r][j]
        }
    }

    fn regen_cost(&self, hazard: f64, v_next: &[Vec<f64>]) -> f64 {
        if hazard >= 1.0 {
            self.mean1
        } else {
            hazard * self.mean1 + (1.0 - hazard) * v_next[0][0]
        }
    }

    fn backup(&self, hazard: f64, v_next: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let cp: Vec<f64> = (0..self.width())
            .map(|m| self.place_cost(hazard, v_next, m))
            .collect();
        for r in 1..=self.r_max {
            for j in 0..self.width() {
                let cnp = self.skip_cost(hazard, v_next, r, j);
                out[r - 1][j] = self.pmf[r - 1]
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p * cp[(i + 1).max(j)].min(cnp))
                    .sum();
            }
        }
    }
}

/// Optimal policy for the max-power objective with memory 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxAdjacentPolicy {
    pub config: DeploymentConfig,
    /// `{0} ∪ S` in mW; the running-maximum axis of the tables.
    pub gamma_max_grid: Vec<f64>,
    /// `v[r - 1][j] = V(r, gamma_max_grid[j])`.
    pub v: Vec<Vec<f64>>,
    pub j0: f64,
    /// `r_th[i]` for `gamma_max = S[i]`: place at any `gamma <= gamma_max`
    /// once `r >= r_th`.
    pub r_th: Vec<u32>,
    /// `gamma_th[r - 1][j]`: the largest level whose placement cost (with
    /// that level as the new maximum) does not exceed the cost of walking on,
    /// or 0 when there is none. It governs `gamma > gamma_max_grid[j]`; a
    /// value at or below `gamma_max` means no such `gamma` is placed.
    pub gamma_th: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_max_adjacent(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    tol: f64,
    max_iters: usize,
) -> Result<MaxAdjacentPolicy> {
    solve_max_adjacent_observed(model, cfg, tol, max_iters, |_, _, _| {})
}

pub fn solve_max_adjacent_observed(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(usize, &[Vec<f64>], f64),
) -> Result<MaxAdjacentPolicy> {
    check_model(model, cfg, Objective::Max)?;
    check_tol(tol)?;
    let t = MaxTables::new(model, cfg)?;
    let w = t.width();
    let mut v = vec![vec![0.0; w]; t.r_max];
    let mut next = v.clone();
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        t.backup(cfg.theta, &v, &mut next);
        residual = v
            .iter()
            .zip(&next)
            .map(|(a, b)| sup_diff(a, b))
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        let j0 = t.regen_cost(cfg.theta, &v);
        observe(k, &v, j0);
        if residual < tol {
            return Ok(max_policy_from_values(&t, cfg, v, j0, k, residual));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
    })
}

fn max_policy_from_values(
    t: &MaxTables<'_>,
    cfg: &DeploymentConfig,
    v: Vec<Vec<f64>>,
    j0: f64,
    iterations: usize,
    residual: f64,
) -> MaxAdjacentPolicy {
    let theta = cfg.theta;
    let w = t.width();
    let r_th = (1..w)
        .map(|j| {
            let cp = t.place_cost(theta, &v, j);
            (1..=t.r_max)
                .find(|&r| cp <= t.skip_cost(theta, &v, r, j))
                .unwrap_or(t.r_max) as u32
        })
        .collect();
    let gamma_th = (1..=t.r_max)
        .map(|r| {
            (0..w)
                .map(|j| {
                    let cnp = t.skip_cost(theta, &v, r, j);
                    (1..w)
                        .rev()
                        .find(|&m| t.place_cost(theta, &v, m) <= cnp)
                        .map_or(0.0, |m| t.grid[m])
                })
                .collect()
        })
        .collect();
    MaxAdjacentPolicy {
        config: *cfg,
        gamma_max_grid: t.grid.clone(),
        v,
        j0,
        r_th,
        gamma_th,
        iterations,
        residual,
    }
}

impl MaxAdjacentPolicy {
    pub fn r_max(&self) -> u32 {
        self.config.r_max_steps
    }

    /// Grid index of a running maximum (0 or a level).
    pub fn grid_index(&self, gamma_max: f64) -> Result<usize> {
        if gamma_max == 0.0 {
            return Ok(0);
        }
        self.gamma_max_grid
            .iter()
            .position(|&g| (g - gamma_max).abs() <= LEVEL_RTOL * g)
            .ok_or_else(|| Error::OutOfRange {
                what: "gamma_max",
                value: gamma_max.to_string(),
                valid: "0 or a power level".into(),
            })
    }

    /// `r_th(gamma_max)` for `gamma_max` in the level set.
    pub fn r_th(&self, gamma_max: f64) -> Result<u32> {
        match self.grid_index(gamma_max)? {
            0 => Err(Error::OutOfRange {
                what: "gamma_max",
                value: "0".into(),
                valid: "a power level".into(),
            }),
            j => Ok(self.r_th[j - 1]),
        }
    }

    pub fn gamma_th(&self, r: u32, gamma_max: f64) -> Result<f64> {
        self.check_r(r)?;
        let j = self.grid_index(gamma_max)?;
        Ok(self.gamma_th[r as usize - 1][j])
    }

    fn check_r(&self, r: u32) -> Result<()> {
        if r == 0 || r > self.r_max() {
            return Err(Error::OutOfRange {
                what: "distance (steps)",
                value: r.to_string(),
                valid: format!("1..={}", self.r_max()),
            });
        }
        Ok(())
    }

    /// Two-case threshold rule: at or below the running maximum, place once
    /// `r >= r_th(gamma_max)`; above it, place iff
    /// `gamma <= gamma_th(r, gamma_max)`.
    pub fn decide(&self, r: u32, gamma: f64, gamma_max: f64) -> Result<Decision> {
        self.check_r(r)?;
        let j = self.grid_index(gamma_max)?;
        if r == self.r_max() {
            return Ok(Decision::ForcedPlace);
        }
        let place = if j > 0 && gamma <= gamma_max * (1.0 + LEVEL_RTOL) {
            r >= self.r_th[j - 1]
        } else {
            gamma <= self.gamma_th[r as usize - 1][j] * (1.0 + LEVEL_RTOL)
        };
        Ok(if place { Decision::Place } else { Decision::Skip })
    }

    pub fn evaluate(&self, model: &LinkPowerModel) -> Result<PolicyEvaluation> {
        let cfg = self.config;
        let t = MaxTables::new(model, &cfg)?;
        let w = t.width();
        let levels = model.levels().levels();
        let mut place = vec![vec![vec![false; levels.len()]; w]; t.r_max];
        for r in 1..=t.r_max {
            for j in 0..w {
                for (i, &g) in levels.iter().enumerate() {
                    place[r - 1][j][i] = self.decide(r as u32, g, t.grid[j])?.places();
                }
            }
        }
        let run = |w_relay: f64, w_power: f64| -> Result<f64> {
            let mut v = vec![vec![0.0; w]; t.r_max];
            for _ in 0..DEFAULT_MAX_ITERS {
                let mut next = vec![vec![0.0; w]; t.r_max];
                for r in 1..=t.r_max {
                    for j in 0..w {
                        let skip = if r < t.r_max {
                            cfg.theta * w_power * t.emax[r][j] + (1.0 - cfg.theta) * v[r][j]
                        } else {
                            f64::NAN
                        };
                        next[r - 1][j] = t.pmf[r - 1]
                            .iter()
                            .enumerate()
                            .map(|(i, p)| {
                                let m = (i + 1).max(j);
                                p * if place[r - 1][j][i] {
                                    w_relay
                                        + cfg.theta * w_power * t.emax[0][m]
                                        + (1.0 - cfg.theta) * v[0][m]
                                } else {
                                    skip
                                }
                            })
                            .sum();
                    }
                }
                let res = v
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| sup_diff(a, b))
                    .fold(0.0, f64::max);
                v = next;
                if res < 1e-14 {
                    return Ok(cfg.theta * w_power * t.mean1 + (1.0 - cfg.theta) * v[0][0]);
                }
            }
            Err(Error::NotConverged {
                iterations: DEFAULT_MAX_ITERS,
                residual: f64::NAN,
            })
        };
        let mean_relays = run(1.0, 0.0)?;
        let power_cost = run(0.0, 1.0)?;
        Ok(PolicyEvaluation {
            total: cfg.xi * mean_relays + power_cost,
            mean_relays,
            power_cost,
        })
    }
}

// ---------------------------------------------------------------------------
// Truncated horizon
// ---------------------------------------------------------------------------

/// Probability that the line ends at position `x` given it reached `x - 1`,
/// when lengths beyond `l_cap` are folded onto `l_cap`.
pub fn truncated_hazard(theta: f64, x: u32, l_cap: u32) -> f64 {
    if x >= l_cap {
        1.0
    } else {
        theta
    }
}

/// Optimal `J(0)` when the line length is geometric but capped at `l_cap`
/// steps (the tail mass sits on `l_cap`). Uses the same one-step operators as
/// the stationary solvers, applied backwards over positions.
pub fn solve_adjacent_truncated(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    l_cap: u32,
) -> Result<f64> {
    check_model(model, cfg, cfg.objective)?;
    if cfg.memory_n != 1 {
        return Err(Error::Config("truncated solver handles memory 1 only".into()));
    }
    if l_cap == 0 {
        return Err(Error::Config("l_cap must be at least 1".into()));
    }
    match cfg.objective {
        Objective::Sum => {
            let t = SumTables::new(model, cfg)?;
            let mut v = vec![0.0; t.r_max];
            let mut cur = vec![0.0; t.r_max];
            // v holds V_{x+1}; walk x = l_cap - 1 down to 1.
            for x in (1..l_cap).rev() {
                let h = truncated_hazard(cfg.theta, x + 1, l_cap);
                let restart = t.regen_cost(h, &v);
                t.backup(h, &v, restart, &mut cur);
                std::mem::swap(&mut v, &mut cur);
            }
            Ok(t.regen_cost(truncated_hazard(cfg.theta, 1, l_cap), &v))
        }
        Objective::Max => {
            let t = MaxTables::new(model, cfg)?;
            let mut v = vec![vec![0.0; t.width()]; t.r_max];
            let mut cur = v.clone();
            for x in (1..l_cap).rev() {
                let h = truncated_hazard(cfg.theta, x + 1, l_cap);
                t.backup(h, &v, &mut cur);
                std::mem::swap(&mut v, &mut cur);
            }
            Ok(t.regen_cost(truncated_hazard(cfg.theta, 1, l_cap), &v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_pmf, dbm_to_mw, PowerLevelSet};
    use crate::config::Scenario;

    fn baseline(objective: Objective, xi: f64) -> (LinkPowerModel, DeploymentConfig) {
        let s = Scenario::indoor_dbm();
        (s.link_model(1).unwrap(), s.deployment(objective, 1, xi))
    }

    #[test]
    fn theta_one_costs_one_link() {
        let (m, cfg) = baseline(Objective::Sum, 0.01);
        let cfg = DeploymentConfig { theta: 1.0, ..cfg };
        let p = solve_sum_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!((p.j0 - m.mean_level_power(1).unwrap()).abs() < 1e-15);
        let cfg = DeploymentConfig { objective: Objective::Max, ..cfg };
        let p = solve_max_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!((p.j0 - m.mean_level_power(1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn sum_table_values() {
        for (xi, want_j0) in [(0.001, 0.09101), (0.01, 0.18584), (0.1, 0.72516)] {
            let (m, cfg) = baseline(Objective::Sum, xi);
            let p = solve_sum_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            assert!(((p.j0 - want_j0) / want_j0).abs() < 0.02, "xi={xi}: {}", p.j0);
        }
    }

    #[test]
    fn sum_threshold_spot_checks() {
        let (m, cfg) = baseline(Objective::Sum, 0.001);
        let p = solve_sum_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let levels = m.levels().levels();
        assert_eq!(p.level_threshold(4, levels).unwrap(), dbm_to_mw(-20.0));
        assert_eq!(p.level_threshold(1, levels).unwrap(), 0.0);
        assert_eq!(p.decide(4, dbm_to_mw(-20.0)).unwrap(), Decision::Place);
        assert_eq!(p.decide(4, dbm_to_mw(-15.0)).unwrap(), Decision::Skip);
        assert_eq!(p.decide(10, 2.0).unwrap(), Decision::ForcedPlace);
        assert!(p.decide(0, 1.0).is_err());
        assert!(p.decide(11, 1.0).is_err());
    }

    #[test]
    fn sum_tie_places() {
        let (m, cfg) = baseline(Objective::Sum, 0.001);
        let p = solve_sum_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let th = p.gamma_th(5).unwrap();
        assert!(th > 0.0);
        assert_eq!(p.decide(5, th).unwrap(), Decision::Place);
        assert_eq!(p.decide(5, th * 1.001).unwrap(), Decision::Skip);
    }

    #[test]
    fn max_table_values() {
        for (xi, want_j0) in [(0.001, 0.03336), (0.01, 0.13124), (0.1, 0.61693)] {
            let (m, cfg) = baseline(Objective::Max, xi);
            let p = solve_max_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            assert!(((p.j0 - want_j0) / want_j0).abs() < 0.02, "xi={xi}: {}", p.j0);
        }
    }

    #[test]
    fn max_single_level_matches_backward_induction() {
        // With one level every link costs g0 and placing early never helps,
        // so relays sit at multiples of r_max. J0 = g0 + xi * E(#multiples of
        // r_max strictly below L) = g0 + xi * q / (1 - q), q = (1-theta)^r_max.
        let s = Scenario::indoor_dbm();
        let levels = PowerLevelSet::new(vec![0.4]).unwrap();
        let m = build_pmf(s.channel_params().unwrap(), levels, 11).unwrap();
        let cfg = s.deployment(Objective::Max, 1, 0.05);
        let p = solve_max_adjacent(&m, &cfg, 1e-13, DEFAULT_MAX_ITERS).unwrap();
        let q = (1.0 - cfg.theta).powi(cfg.r_max_steps as i32);
        let expected = 0.4 + cfg.xi * q / (1.0 - q);
        assert!((p.j0 - expected).abs() < 1e-10, "{} vs {expected}", p.j0);
        for r in 1..cfg.r_max_steps {
            assert_eq!(p.decide(r, 0.4, 0.4).unwrap(), Decision::Skip);
        }
    }

    #[test]
    fn max_rule_matches_direct_comparison() {
        let (m, cfg) = baseline(Objective::Max, 0.01);
        let p = solve_max_adjacent(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let t = MaxTables::new(&m, &cfg).unwrap();
        for r in 1..cfg.r_max_steps {
            for j in 0..t.width() {
                let cnp = t.skip_cost(cfg.theta, &p.v, r as usize, j);
                for (i, &g) in m.levels().levels().iter().enumerate() {
                    let direct = t.place_cost(cfg.theta, &p.v, (i + 1).max(j)) <= cnp;
                    assert_eq!(
                        p.decide(r, g, t.grid[j]).unwrap().places(),
                        direct,
                        "r={r} j={j} i={i}"
                    );
                }
            }
        }
    }

    #[test]
    fn truncated_solver_approaches_stationary() {
        for objective in [Objective::Sum, Objective::Max] {
            let (m, cfg) = baseline(objective, 0.01);
            let cfg = DeploymentConfig { theta: 0.5, ..cfg };
            let stationary = match objective {
                Objective::Sum => solve_sum_adjacent(&m, &cfg, 1e-14, DEFAULT_MAX_ITERS).unwrap().j0,
                Objective::Max => solve_max_adjacent(&m, &cfg, 1e-14, DEFAULT_MAX_ITERS).unwrap().j0,
            };
            let truncated = solve_adjacent_truncated(&m, &cfg, 80).unwrap();
            assert!((stationary - truncated).abs() < 1e-12, "{objective}");
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let (m, cfg) = baseline(Objective::Sum, 0.01);
        match solve_sum_adjacent(&m, &cfg, 1e-12, 3) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn wrong_objective_rejected() {
        let (m, cfg) = baseline(Objective::Max, 0.01);
        assert!(solve_sum_adjacent(&m, &cfg, DEFAULT_TOL, 10).is_err());
    }
}
