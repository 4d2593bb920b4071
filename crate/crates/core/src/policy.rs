//! A solved policy of any kind behind one decision interface.

use serde::{Deserialize, Serialize};

use crate::adjacent::{
    solve_max_adjacent, solve_sum_adjacent, Decision, MaxAdjacentPolicy, PolicyEvaluation,
    SumAdjacentPolicy, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::channel::LinkPowerModel;
use crate::config::{DeploymentConfig, Objective};
use crate::error::{Error, Result};
use crate::memory::{solve_memory, MemoryPolicy, MemoryState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Policy {
    SumAdjacent(SumAdjacentPolicy),
    MaxAdjacent(MaxAdjacentPolicy),
    Memory(MemoryPolicy),
}

impl Policy {
    /// Memory 1 goes to the adjacent solvers, larger memory to the memory-n
    /// solver.
    pub fn solve(model: &LinkPowerModel, cfg: &DeploymentConfig) -> Result<Self> {
        Self::solve_with(model, cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS)
    }

    pub fn solve_with(
        model: &LinkPowerModel,
        cfg: &DeploymentConfig,
        tol: f64,
        max_iters: usize,
    ) -> Result<Self> {
        Ok(match (cfg.memory_n, cfg.objective) {
            (1, Objective::Sum) => Policy::SumAdjacent(solve_sum_adjacent(model, cfg, tol, max_iters)?),
            (1, Objective::Max) => Policy::MaxAdjacent(solve_max_adjacent(model, cfg, tol, max_iters)?),
            _ => Policy::Memory(solve_memory(model, cfg, tol, max_iters)?),
        })
    }

    pub fn config(&self) -> &DeploymentConfig {
        match self {
            Policy::SumAdjacent(p) => &p.config,
            Policy::MaxAdjacent(p) => &p.config,
            Policy::Memory(p) => &p.config,
        }
    }

    pub fn j0(&self) -> f64 {
        match self {
            Policy::SumAdjacent(p) => p.j0,
            Policy::MaxAdjacent(p) => p.j0,
            Policy::Memory(p) => p.j0,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            Policy::SumAdjacent(p) => p.iterations,
            Policy::MaxAdjacent(p) => p.iterations,
            Policy::Memory(p) => p.iterations,
        }
    }

    pub fn residual(&self) -> f64 {
        match self {
            Policy::SumAdjacent(p) => p.residual,
            Policy::MaxAdjacent(p) => p.residual,
            Policy::Memory(p) => p.residual,
        }
    }

    /// Decision at `state`, whose `gamma` holds one quantized measurement per
    /// visible node. For memory-1 policies the path length of the last node
    /// is only used by the max objective, where it is the running maximum.
    pub fn decide(&self, state: &MemoryState) -> Result<Decision> {
        let n = self.config().memory_n as usize;
        if state.y.is_empty() || state.y.len() > n || state.gamma.len() != state.y.len() {
            return Err(Error::Domain(format!(
                "memory {n} policy needs 1..={n} nodes with one measurement each, got {} nodes and {} measurements",
                state.y.len(),
                state.gamma.len()
            )));
        }
        match self {
            Policy::SumAdjacent(p) => p.decide(state.y[0], state.gamma[0]),
            Policy::MaxAdjacent(p) => p.decide(state.y[0], state.gamma[0], state.p[0]),
            Policy::Memory(p) => p.decide(state),
        }
    }

    pub fn evaluate(&self, model: &LinkPowerModel) -> Result<PolicyEvaluation> {
        match self {
            Policy::SumAdjacent(p) => p.evaluate(model),
            Policy::MaxAdjacent(p) => p.evaluate(model),
            Policy::Memory(p) => p.evaluate(model),
        }
    }

    pub fn label(&self) -> String {
        let c = self.config();
        format!("{}-n{}-xi{}", c.objective, c.memory_n, c.xi)
    }
}
