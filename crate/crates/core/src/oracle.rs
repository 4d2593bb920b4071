//! Brute-force reference for memory-1 policies on a truncated line.
//!
//! The line length is geometric but folded onto `l_cap`: the line ends at
//! step `x < l_cap` with hazard `theta` and surely at `l_cap`. The optimal
//! cost is computed by backward induction over the full states
//! `(position, r, gamma)` (and `gamma_max` for the max objective), comparing
//! both actions explicitly at every reachable state. Nothing here is shared
//! with the collapsed solvers in [`crate::adjacent`], so agreement between
//! the two is a meaningful check.

use serde::{Deserialize, Serialize};

use crate::channel::LinkPowerModel;
use crate::config::{DeploymentConfig, Objective};
use crate::error::{Error, Result};

/// Optimal expected cost from the sink on the truncated line.
pub fn brute_force_truncated(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    l_cap: u32,
) -> Result<f64> {
    cfg.validate()?;
    if cfg.memory_n != 1 {
        return Err(Error::Config("brute-force oracle handles memory 1 only".into()));
    }
    if l_cap == 0 {
        return Err(Error::Config("l_cap must be at least 1".into()));
    }
    if model.max_steps() < cfg.r_max_steps {
        return Err(Error::Config("link model horizon shorter than r_max_steps".into()));
    }
    let levels = model.levels().levels().to_vec();
    let k = levels.len();
    let r_max = cfg.r_max_steps as usize;
    let g: Vec<Vec<f64>> = (1..=cfg.r_max_steps)
        .map(|r| model.pmf(r).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let hazard = |x: u32| if x >= l_cap { 1.0 } else { cfg.theta };

    match cfg.objective {
        Objective::Sum => {
            // j_next[r - 1][i] = J_{x+1}(r, levels[i]); None past the end.
            let mut j_next: Option<Vec<Vec<f64>>> = None;
            // Expected value, at position x + 1, of arriving with gap r.
            let arrive = |j_next: &Option<Vec<Vec<f64>>>, h: f64, r: usize| -> f64 {
                let end: f64 = (0..k).map(|i| g[r - 1][i] * levels[i]).sum();
                match j_next {
                    Some(j) if h < 1.0 => {
                        let cont: f64 = (0..k).map(|i| g[r - 1][i] * j[r - 1][i]).sum();
                        h * end + (1.0 - h) * cont
                    }
                    _ => end,
                }
            };
            for x in (1..l_cap).rev() {
                let h = hazard(x + 1);
                let restart = arrive(&j_next, h, 1);
                let reach = (x as usize).min(r_max);
                let mut j = vec![vec![f64::NAN; k]; r_max];
                for r in 1..=reach {
                    let skip = if r == r_max {
                        f64::INFINITY
                    } else {
                        arrive(&j_next, h, r + 1)
                    };
                    for i in 0..k {
                        let place = cfg.xi + levels[i] + restart;
                        j[r - 1][i] = if place <= skip { place } else { skip };
                    }
                }
                j_next = Some(j);
            }
            Ok(arrive(&j_next, hazard(1), 1))
        }
        Objective::Max => {
            let mut grid = vec![0.0];
            grid.extend_from_slice(&levels);
            let w = grid.len();
            // j_next[r - 1][i][m] = J_{x+1}(r, levels[i], grid[m]).
            let mut j_next: Option<Vec<Vec<Vec<f64>>>> = None;
            let arrive = |j_next: &Option<Vec<Vec<Vec<f64>>>>, h: f64, r: usize, m: usize| -> f64 {
                let end: f64 = (0..k).map(|i| g[r - 1][i] * levels[i].max(grid[m])).sum();
                match j_next {
                    Some(j) if h < 1.0 => {
                        let cont: f64 = (0..k).map(|i| g[r - 1][i] * j[r - 1][i][m]).sum();
                        h * end + (1.0 - h) * cont
                    }
                    _ => end,
                }
            };
            for x in (1..l_cap).rev() {
                let h = hazard(x + 1);
                let reach = (x as usize).min(r_max);
                let mut j = vec![vec![vec![f64::NAN; w]; k]; r_max];
                for r in 1..=reach {
                    for i in 0..k {
                        for m in 0..w {
                            let skip = if r == r_max {
                                f64::INFINITY
                            } else {
                                arrive(&j_next, h, r + 1, m)
                            };
                            let new_max = if levels[i] > grid[m] { i + 1 } else { m };
                            let place = cfg.xi + arrive(&j_next, h, 1, new_max);
                            j[r - 1][i][m] = if place <= skip { place } else { skip };
                        }
                    }
                }
                j_next = Some(j);
            }
            Ok(arrive(&j_next, hazard(1), 1, 0))
        }
    }
}

/// One oracle-versus-solver comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub objective: Objective,
    pub xi: f64,
    pub theta: f64,
    pub l_cap: u32,
    pub oracle: f64,
    pub solver: f64,
    pub deviation: f64,
}

/// Compares [`brute_force_truncated`] with
/// [`solve_adjacent_truncated`](crate::adjacent::solve_adjacent_truncated)
/// for both objectives and every `xi`.
pub fn oracle_suite(
    model: &LinkPowerModel,
    base: &DeploymentConfig,
    xis: &[f64],
    l_cap: u32,
) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for objective in [Objective::Sum, Objective::Max] {
        for &xi in xis {
            let cfg = DeploymentConfig {
                objective,
                xi,
                memory_n: 1,
                ..*base
            };
            let oracle = brute_force_truncated(model, &cfg, l_cap)?;
            let solver = crate::adjacent::solve_adjacent_truncated(model, &cfg, l_cap)?;
            out.push(OracleCheck {
                objective,
                xi,
                theta: cfg.theta,
                l_cap,
                oracle,
                solver,
                deviation: (oracle - solver).abs(),
            });
        }
    }
    Ok(out)
}
