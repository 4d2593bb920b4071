//! Optimal placement when a link may reach back to any of the last `n` nodes
//! (memory `n`).
//!
//! At a candidate location the operative knows the distances `y_k` to the
//! last `l <= n` nodes and the shortest-path lengths `P_k` from those nodes to
//! the sink, and measures the link powers `gamma_k` to each of them. The
//! optimal rule places a relay iff the statistic
//! `s = min_k combine(gamma_k, P_k)` (the shortest-path length a relay placed
//! here would have) is at most a threshold `c(y, P)`.
//!
//! The solver runs function iteration on `W(y, P) = E J(y, P, Gamma)` over
//! the states reachable from the sink. Two reductions keep the state space
//! finite and small, both exact:
//!
//! * For the sum objective every cost shifts by `c` when all `P_k` shift by
//!   `c`, so path lengths are stored relative to the newest node, on the
//!   arithmetic grid of the power levels.
//! * A node whose cheapest possible route, `combine(min S, P_k)`, is no
//!   better than the dearest possible route through a newer node,
//!   `combine(max S, P_j)`, can never be on a strictly shorter path. It is
//!   marked [`DOMINATED`]; it still occupies a memory slot.
//!
//! Link powers are only defined up to `r_max_steps`, so a node farther away
//! than that is out of reach and leaves the window.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjacent::{Decision, PolicyEvaluation, DEFAULT_MAX_ITERS};
use crate::channel::{LinkPowerModel, LEVEL_RTOL};
use crate::config::{DeploymentConfig, Objective};
use crate::error::{Error, Result};

/// Path-length slot of a node that can never be on a strictly shorter path.
pub const DOMINATED: i64 = i64::MAX;

const PAR_THRESHOLD: usize = 2048;

/// Shortest-path length from a relay placed at the current location:
/// `min_k (gamma_k + P_k)` for sum, `min_k max(gamma_k, P_k)` for max.
pub fn new_shortest_path(objective: Objective, gamma: &[f64], p: &[f64]) -> Result<f64> {
    if gamma.is_empty() || gamma.len() != p.len() {
        return Err(Error::Domain(format!(
            "need one measurement per visible node ({} nodes, {} measurements)",
            p.len(),
            gamma.len()
        )));
    }
    Ok(gamma
        .iter()
        .zip(p)
        .map(|(&g, &pk)| objective.combine(g, pk))
        .fold(f64::INFINITY, f64::min))
}

/// What the operative knows at a candidate location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    /// Distances (steps) to the visible nodes, newest first.
    pub y: Vec<u32>,
    /// Shortest-path lengths (mW) from those nodes to the sink.
    pub p: Vec<f64>,
    /// Measured link powers (mW) to those nodes; empty until measured.
    pub gamma: Vec<f64>,
}

impl MemoryState {
    /// One step out from the sink.
    pub fn initial() -> Self {
        Self {
            y: vec![1],
            p: vec![0.0],
            gamma: Vec::new(),
        }
    }

    pub fn with_gamma(mut self, gamma: Vec<f64>) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn statistic(&self, objective: Objective) -> Result<f64> {
        new_shortest_path(objective, &self.gamma, &self.p)
    }

    /// Walk one step without placing.
    pub fn advance(&mut self, cfg: &DeploymentConfig) {
        self.y.iter_mut().for_each(|y| *y += 1);
        self.gamma.clear();
        self.drop_out_of_range(cfg.r_max_steps);
    }

    /// Place a relay here, keep the `memory_n` newest nodes and walk one step.
    /// Returns the new relay's shortest-path length.
    pub fn place_and_advance(&mut self, cfg: &DeploymentConfig) -> Result<f64> {
        let s = self.statistic(cfg.objective)?;
        let keep = (cfg.memory_n as usize - 1).min(self.y.len());
        let mut y = Vec::with_capacity(keep + 1);
        y.push(1);
        y.extend(self.y[..keep].iter().map(|v| v + 1));
        let mut p = Vec::with_capacity(keep + 1);
        p.push(s);
        p.extend_from_slice(&self.p[..keep]);
        self.y = y;
        self.p = p;
        self.gamma.clear();
        self.drop_out_of_range(cfg.r_max_steps);
        Ok(s)
    }

    /// Links longer than `r_max` steps cannot be used, and nodes only get
    /// farther away, so they leave the window for good.
    fn drop_out_of_range(&mut self, r_max: u32) {
        let keep = self.y.iter().take_while(|&&y| y <= r_max).count();
        self.y.truncate(keep);
        self.p.truncate(keep);
    }
}

/// How path lengths are stored in the state keys.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathEncoding {
    /// Sum objective with memory 1: only the distance matters.
    SumSingle,
    /// Sum objective: lengths relative to the newest node, in multiples of
    /// `pitch_mw`.
    SumRelative { pitch_mw: f64 },
    /// Max objective: indices into `{0} ∪ S`.
    MaxLevel,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey {
    /// Newest first; 0 in the slot of a dominated node.
    pub y: Vec<u32>,
    pub p: Vec<i64>,
}

/// Value and threshold at one tabulated state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryPolicyEntry {
    pub key: StateKey,
    /// `W(y, P)` in mW; for the sum objective relative to the newest node's
    /// path length.
    pub w: f64,
    /// `c(y, P)` in mW, on the same basis as `w`; `None` when no measurement
    /// makes placing optimal.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryPolicy {
    pub config: DeploymentConfig,
    pub encoding: PathEncoding,
    /// `{0} ∪ S` in mW (indexes `MaxLevel` keys).
    pub level_grid: Vec<f64>,
    pub j0: f64,
    /// Sorted by key.
    pub states: Vec<MemoryPolicyEntry>,
    pub iterations: usize,
    pub residual: f64,
}

struct Transition {
    /// Statistic value (working units).
    s: f64,
    prob: f64,
    /// Path length of the new relay relative to the current basis.
    shift: f64,
    next: usize,
}

struct StateTables {
    /// `E s` at the state, working units. This is also the terminal cost
    /// when the source lands here.
    mean_s: f64,
    place: Vec<Transition>,
    /// `None` under forced placement.
    skip: Option<usize>,
    /// Lower bound used as the first iterate.
    floor: f64,
}

/// Reachable state space with precomputed transitions. Everything is in
/// working units: grid units for `SumRelative`, mW otherwise.
struct Space {
    cfg: DeploymentConfig,
    encoding: PathEncoding,
    n: usize,
    levels_w: Vec<f64>,
    scale: f64,
    grid: Vec<f64>,
    pmf: Vec<Vec<f64>>,
    keys: Vec<StateKey>,
    tables: Vec<StateTables>,
}

impl Space {
    fn build(model: &LinkPowerModel, cfg: &DeploymentConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.memory_n as usize;
        let need = cfg.r_max_steps;
        if model.max_steps() < need {
            return Err(Error::Config(format!(
                "link model covers {} steps, need r_max_steps = {need}",
                model.max_steps()
            )));
        }
        let levels = model.levels().levels();
        let (encoding, scale) = match (cfg.objective, n) {
            (Objective::Sum, 1) => (PathEncoding::SumSingle, 1.0),
            (Objective::Sum, _) => {
                let q = model.levels().grid_pitch().ok_or_else(|| {
                    Error::Config(
                        "sum objective with memory > 1 needs power levels on an arithmetic grid"
                            .into(),
                    )
                })?;
                (PathEncoding::SumRelative { pitch_mw: q }, q)
            }
            (Objective::Max, _) => (PathEncoding::MaxLevel, 1.0),
        };
        let levels_w = levels.iter().map(|l| working(encoding, *l)).collect();
        let mut grid = vec![0.0];
        grid.extend_from_slice(levels);
        let pmf = (1..=need)
            .map(|r| model.pmf(r).map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let mut space = Self {
            cfg: *cfg,
            encoding,
            n,
            levels_w,
            scale,
            grid,
            pmf,
            keys: Vec::new(),
            tables: Vec::new(),
        };
        space.explore();
        Ok(space)
    }

    fn combine(&self, link: f64, p: f64) -> f64 {
        self.cfg.objective.combine(link, p)
    }

    fn pval(&self, pv: i64) -> f64 {
        match self.encoding {
            PathEncoding::SumSingle => 0.0,
            PathEncoding::SumRelative { .. } => pv as f64,
            PathEncoding::MaxLevel => self.grid[pv as usize],
        }
    }

    /// Distribution of the statistic at `key`, sorted by value, zero-mass
    /// values dropped.
    fn statistic_dist(&self, key: &StateKey) -> Vec<(f64, f64)> {
        let nodes: Vec<Vec<(f64, f64)>> = key
            .y
            .iter()
            .zip(&key.p)
            .filter(|(_, &p)| p != DOMINATED)
            .map(|(&d, &p)| {
                let pv = self.pval(p);
                self.levels_w
                    .iter()
                    .zip(&self.pmf[d as usize - 1])
                    .map(|(&l, &g)| (self.combine(l, pv), g))
                    .collect()
            })
            .collect();
        let mut values: Vec<f64> = nodes.iter().flatten().map(|(v, _)| *v).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut out = Vec::with_capacity(values.len());
        let mut prev = 1.0;
        for t in values {
            let surv: f64 = nodes
                .iter()
                .map(|d| d.iter().filter(|(v, _)| *v > t).map(|(_, g)| g).sum::<f64>())
                .product();
            let mass = prev - surv;
            if mass > 0.0 {
                out.push((t, mass));
            }
            prev = surv;
        }
        out
    }

    fn skip_key(&self, key: &StateKey) -> StateKey {
        let mut next = StateKey {
            y: key.y.iter().map(|&y| if y == 0 { 0 } else { y + 1 }).collect(),
            p: key.p.clone(),
        };
        self.canonicalize(&mut next);
        next
    }

    fn canonicalize(&self, key: &mut StateKey) {
        let lo = self.levels_w[0];
        let hi = *self.levels_w.last().expect("nonempty levels");
        canonicalize(self.cfg.objective, self.cfg.r_max_steps, lo, hi, key, |d| self.pval(d));
    }

    /// Next key and basis shift after placing with statistic `s`.
    fn place_key(&self, key: &StateKey, s: f64) -> (StateKey, f64) {
        let keep = (self.n - 1).min(key.y.len());
        let mut y = vec![1];
        y.extend(key.y[..keep].iter().map(|&v| if v == 0 { 0 } else { v + 1 }));
        let (head, shift, rebase): (i64, f64, i64) = match self.encoding {
            PathEncoding::SumSingle => (0, s, 0),
            PathEncoding::SumRelative { .. } => (0, s, s.round() as i64),
            PathEncoding::MaxLevel => {
                let idx = self
                    .grid
                    .iter()
                    .position(|&g| g == s)
                    .expect("max statistic is a grid value");
                (idx as i64, 0.0, 0)
            }
        };
        let mut p = vec![head];
        p.extend(key.p[..keep].iter().map(|&d| {
            if d == DOMINATED {
                DOMINATED
            } else {
                d - rebase
            }
        }));
        let mut next = StateKey { y, p };
        self.canonicalize(&mut next);
        (next, shift)
    }

    fn floor(&self, key: &StateKey) -> f64 {
        match self.encoding {
            PathEncoding::SumRelative { .. } => key
                .p
                .iter()
                .filter(|&&d| d != DOMINATED)
                .map(|&d| d as f64)
                .fold(0.0, f64::min),
            _ => 0.0,
        }
    }

    fn explore(&mut self) {
        let init = StateKey {
            y: vec![1],
            p: vec![0],
        };
        let mut index: HashMap<StateKey, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        index.insert(init.clone(), 0);
        self.keys.push(init);
        queue.push_back(0usize);
        let mut tables: Vec<Option<StateTables>> = vec![None];
        let mut intern = |k: StateKey,
                          keys: &mut Vec<StateKey>,
                          tables: &mut Vec<Option<StateTables>>,
                          queue: &mut VecDeque<usize>| {
            *index.entry(k.clone()).or_insert_with(|| {
                keys.push(k);
                tables.push(None);
                queue.push_back(keys.len() - 1);
                keys.len() - 1
            })
        };
        while let Some(i) = queue.pop_front() {
            let key = self.keys[i].clone();
            let dist = self.statistic_dist(&key);
            let mean_s = dist.iter().map(|(v, p)| v * p).sum();
            let skip = (key.y[0] < self.cfg.r_max_steps).then(|| {
                let k = self.skip_key(&key);
                intern(k, &mut self.keys, &mut tables, &mut queue)
            });
            let mut place = Vec::with_capacity(dist.len());
            for (s, prob) in dist {
                let (k, shift) = self.place_key(&key, s);
                let next = intern(k, &mut self.keys, &mut tables, &mut queue);
                place.push(Transition {
                    s,
                    prob,
                    shift,
                    next,
                });
            }
            tables[i] = Some(StateTables {
                mean_s,
                place,
                skip,
                floor: self.floor(&key),
            });
        }
        self.tables = tables.into_iter().map(|t| t.expect("explored")).collect();
    }

    /// `theta * E s + (1 - theta) * W` at each state: the cost of arriving
    /// there.
    fn arrival(&self, w: &[f64]) -> Vec<f64> {
        let th = self.cfg.theta;
        self.tables
            .iter()
            .zip(w)
            .map(|(t, &w)| th * t.mean_s + (1.0 - th) * w)
            .collect()
    }

    fn bellman(&self, w: &[f64]) -> Vec<f64> {
        let a = self.arrival(w);
        let xi = self.cfg.xi / self.scale;
        let backup = |t: &StateTables| -> f64 {
            let skip = t.skip.map_or(f64::INFINITY, |j| a[j]);
            t.place
                .iter()
                .map(|tr| tr.prob * (xi + tr.shift + a[tr.next]).min(skip))
                .sum()
        };
        if self.tables.len() >= PAR_THRESHOLD {
            self.tables.par_iter().map(backup).collect()
        } else {
            self.tables.iter().map(backup).collect()
        }
    }

    fn thresholds(&self, w: &[f64]) -> Vec<Option<f64>> {
        let a = self.arrival(w);
        let xi = self.cfg.xi / self.scale;
        self.tables
            .iter()
            .map(|t| {
                let skip = t.skip.map_or(f64::INFINITY, |j| a[j]);
                t.place
                    .iter()
                    .rev()
                    .find(|tr| xi + tr.shift + a[tr.next] <= skip)
                    .map(|tr| tr.s * self.scale)
            })
            .collect()
    }
}

/// Drops nodes beyond link range, marks dominated nodes and drops trailing
/// dominated slots (they can no longer hold back any usable node).
fn canonicalize(
    objective: Objective,
    r_max: u32,
    lo: f64,
    hi: f64,
    key: &mut StateKey,
    pval: impl Fn(i64) -> f64,
) {
    let keep = key.y.iter().take_while(|&&y| y <= r_max).count();
    key.y.truncate(keep);
    key.p.truncate(keep);
    let mut best_hi = f64::INFINITY;
    for k in 0..key.p.len() {
        if key.p[k] == DOMINATED {
            continue;
        }
        let pv = pval(key.p[k]);
        if k > 0 && objective.combine(lo, pv) >= best_hi {
            key.p[k] = DOMINATED;
            key.y[k] = 0;
            continue;
        }
        best_hi = best_hi.min(objective.combine(hi, pv));
    }
    while key.p.len() > 1 && key.p.last() == Some(&DOMINATED) {
        key.p.pop();
        key.y.pop();
    }
}

fn working(encoding: PathEncoding, mw: f64) -> f64 {
    match encoding {
        PathEncoding::SumRelative { pitch_mw } => (mw / pitch_mw).round(),
        _ => mw,
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn solve_memory(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    tol: f64,
    max_iters: usize,
) -> Result<MemoryPolicy> {
    solve_memory_observed(model, cfg, tol, max_iters, |_, _| {})
}

/// Like [`solve_memory`], calling `observe(k, w)` after iteration `k` with
/// the current iterate in working units, one entry per reachable state (in
/// discovery order, initial state first).
pub fn solve_memory_observed(
    model: &LinkPowerModel,
    cfg: &DeploymentConfig,
    tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<MemoryPolicy> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let space = Space::build(model, cfg)?;
    let mut w: Vec<f64> = space.tables.iter().map(|t| t.floor).collect();
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        let next = space.bellman(&w);
        residual = sup_diff(&w, &next) * space.scale;
        w = next;
        observe(k, &w);
        if residual < tol {
            let th = space.thresholds(&w);
            let a0 = space.arrival(&w)[0];
            let mut states: Vec<MemoryPolicyEntry> = space
                .keys
                .iter()
                .zip(&w)
                .zip(th)
                .map(|((key, &w), threshold)| MemoryPolicyEntry {
                    key: key.clone(),
                    w: w * space.scale,
                    threshold,
                })
                .collect();
            states.sort_by(|a, b| a.key.cmp(&b.key));
            return Ok(MemoryPolicy {
                config: *cfg,
                encoding: space.encoding,
                level_grid: space.grid.clone(),
                j0: a0 * space.scale,
                states,
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

impl MemoryPolicy {
    pub fn objective(&self) -> Objective {
        self.config.objective
    }

    pub fn memory_n(&self) -> u32 {
        self.config.memory_n
    }

    fn entry(&self, key: &StateKey) -> Option<&MemoryPolicyEntry> {
        self.states
            .binary_search_by(|e| e.key.cmp(key))
            .ok()
            .map(|i| &self.states[i])
    }

    fn out_of_domain(what: &str) -> Error {
        Error::OutOfRange {
            what: "memory state",
            value: what.to_string(),
            valid: "a state reachable under forced placement".into(),
        }
    }

    /// Maps an operative-side state onto the tabulated key, returning the
    /// key and the basis (mW) that relative values are measured from.
    pub fn encode(&self, state: &MemoryState) -> Result<(StateKey, f64)> {
        let n = self.config.memory_n as usize;
        let r_max = self.config.r_max_steps;
        let l = state.y.len();
        if l == 0 || l > n || state.p.len() != l {
            return Err(Self::out_of_domain(&format!(
                "{l} distances and {} path lengths with memory {n}",
                state.p.len()
            )));
        }
        if state.y[0] == 0 || state.y[0] > r_max {
            return Err(Self::out_of_domain(&format!("y_1 = {}", state.y[0])));
        }
        for w in state.y.windows(2) {
            if w[1] <= w[0] || w[1] > r_max {
                return Err(Self::out_of_domain(&format!("distances {:?}", state.y)));
            }
        }
        let base = match self.encoding {
            PathEncoding::MaxLevel => 0.0,
            _ => state.p[0],
        };
        let p = state
            .p
            .iter()
            .map(|&pk| match self.encoding {
                PathEncoding::SumSingle => Ok(0),
                PathEncoding::SumRelative { pitch_mw } => {
                    let u = (pk - base) / pitch_mw;
                    if (u - u.round()).abs() > 1e-6 {
                        Err(Self::out_of_domain(&format!("path length {pk} mW off the grid")))
                    } else {
                        Ok(u.round() as i64)
                    }
                }
                PathEncoding::MaxLevel => self
                    .level_grid
                    .iter()
                    .position(|&g| {
                        if g == 0.0 {
                            pk == 0.0
                        } else {
                            (g - pk).abs() <= LEVEL_RTOL * g
                        }
                    })
                    .map(|i| i as i64)
                    .ok_or_else(|| Self::out_of_domain(&format!("path length {pk} mW not a level"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut key = StateKey {
            y: state.y.clone(),
            p,
        };
        self.canonicalize(&mut key);
        Ok((key, base))
    }

    fn canonicalize(&self, key: &mut StateKey) {
        let lo = working(self.encoding, self.level_grid[1]);
        let hi = working(self.encoding, *self.level_grid.last().expect("nonempty grid"));
        let pval = |d: i64| match self.encoding {
            PathEncoding::SumSingle => 0.0,
            PathEncoding::SumRelative { .. } => d as f64,
            PathEncoding::MaxLevel => self.level_grid[d as usize],
        };
        canonicalize(self.objective(), self.config.r_max_steps, lo, hi, key, pval);
    }

    /// `c(y, P)` in mW (absolute), or `None` when placing is never optimal.
    pub fn threshold(&self, state: &MemoryState) -> Result<Option<f64>> {
        let (key, base) = self.encode(state)?;
        let e = self
            .entry(&key)
            .ok_or_else(|| Self::out_of_domain(&format!("{key:?} not reachable")))?;
        Ok(e.threshold.map(|c| c + base))
    }

    /// `W(y, P)` in mW (absolute).
    pub fn value(&self, state: &MemoryState) -> Result<f64> {
        let (key, base) = self.encode(state)?;
        let e = self
            .entry(&key)
            .ok_or_else(|| Self::out_of_domain(&format!("{key:?} not reachable")))?;
        Ok(e.w + base)
    }

    /// Place iff the new relay's shortest-path length is at most
    /// `c(y, P)`; always place at `y_1 = r_max_steps`.
    pub fn decide(&self, state: &MemoryState) -> Result<Decision> {
        if state.gamma.len() != state.y.len() {
            return Err(Error::Domain(format!(
                "need {} measurements, got {}",
                state.y.len(),
                state.gamma.len()
            )));
        }
        let c = self.threshold(state)?;
        if state.y[0] == self.config.r_max_steps {
            return Ok(Decision::ForcedPlace);
        }
        let s = state.statistic(self.objective())?;
        Ok(match c {
            Some(c) if s <= c + LEVEL_RTOL * c.abs().max(self.level_grid[1]) => Decision::Place,
            _ => Decision::Skip,
        })
    }

    /// Thresholds and values per tabulated state:
    /// `y_1..y_n, p_1_mW..p_n_mW, w_mW, c_mW`. Path lengths for the sum
    /// objective are relative to the newest node; dominated slots read
    /// `dominated`, a missing threshold is empty.
    pub fn threshold_csv(&self) -> String {
        let n = self.config.memory_n as usize;
        let mut out = String::new();
        for k in 1..=n {
            let _ = write!(out, "y{k},");
        }
        for k in 1..=n {
            let _ = write!(out, "p{k}_mW,");
        }
        out.push_str("w_mW,c_mW\n");
        for e in &self.states {
            for k in 0..n {
                match e.key.y.get(k) {
                    Some(&y) if e.key.p[k] != DOMINATED => {
                        let _ = write!(out, "{y},");
                    }
                    Some(_) => out.push_str("dominated,"),
                    None => out.push(','),
                }
            }
            for k in 0..n {
                match e.key.p.get(k) {
                    Some(&DOMINATED) => out.push_str("dominated,"),
                    Some(&d) => {
                        let v = match self.encoding {
                            PathEncoding::SumSingle => 0.0,
                            PathEncoding::SumRelative { pitch_mw } => d as f64 * pitch_mw,
                            PathEncoding::MaxLevel => self.level_grid[d as usize],
                        };
                        let _ = write!(out, "{v},");
                    }
                    None => out.push(','),
                }
            }
            let _ = write!(out, "{},", e.w);
            if let Some(c) = e.threshold {
                let _ = write!(out, "{c}");
            }
            out.push('\n');
        }
        out
    }

    /// Exact expected cost, relay count and power cost of following this
    /// policy's threshold decisions.
    pub fn evaluate(&self, model: &LinkPowerModel) -> Result<PolicyEvaluation> {
        let space = Space::build(model, &self.config)?;
        let th = self.config.theta;
        let place: Vec<Vec<bool>> = space
            .keys
            .iter()
            .zip(&space.tables)
            .map(|(key, t)| {
                let e = self
                    .entry(key)
                    .ok_or_else(|| Error::Config("policy does not match the link model".into()))?;
                Ok(t.place
                    .iter()
                    .map(|tr| {
                        t.skip.is_none()
                            || e.threshold.is_some_and(|c| {
                                tr.s * space.scale <= c + LEVEL_RTOL * c.abs().max(1e-300)
                            })
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let run = |relay: f64, power: f64| -> Result<f64> {
            let mut v = vec![0.0; space.tables.len()];
            for _ in 0..DEFAULT_MAX_ITERS {
                let a: Vec<f64> = space
                    .tables
                    .iter()
                    .zip(&v)
                    .map(|(t, &x)| th * power * t.mean_s + (1.0 - th) * x)
                    .collect();
                let next: Vec<f64> = space
                    .tables
                    .iter()
                    .zip(&place)
                    .map(|(t, pl)| {
                        t.place
                            .iter()
                            .zip(pl)
                            .map(|(tr, &p)| {
                                tr.prob
                                    * if p {
                                        relay + power * tr.shift + a[tr.next]
                                    } else {
                                        a[t.skip.expect("skip allowed")]
                                    }
                            })
                            .sum()
                    })
                    .collect();
                let res = sup_diff(&v, &next);
                v = next;
                if res < 1e-14 * v[0].abs().max(1.0) {
                    return Ok(th * power * space.tables[0].mean_s + (1.0 - th) * v[0]);
                }
            }
            Err(Error::NotConverged {
                iterations: DEFAULT_MAX_ITERS,
                residual: f64::NAN,
            })
        };
        let mean_relays = run(1.0, 0.0)?;
        let power_cost = run(0.0, 1.0)? * space.scale;
        Ok(PolicyEvaluation {
            total: self.config.xi * mean_relays + power_cost,
            mean_relays,
            power_cost,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacent::{solve_max_adjacent, solve_sum_adjacent, DEFAULT_TOL};
    use crate::config::Scenario;

    const TIGHT: f64 = 1e-13;

    #[test]
    fn new_shortest_path_examples() {
        assert_eq!(new_shortest_path(Objective::Sum, &[0.3], &[0.0]).unwrap(), 0.3);
        let sum = new_shortest_path(Objective::Sum, &[0.2, 0.5], &[0.3, 0.1]).unwrap();
        assert!((sum - 0.5).abs() < 1e-15);
        assert_eq!(new_shortest_path(Objective::Max, &[0.2, 0.5], &[0.3, 0.1]).unwrap(), 0.3);
        assert!(new_shortest_path(Objective::Max, &[], &[]).is_err());
        assert!(new_shortest_path(Objective::Max, &[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn state_window_moves() {
        let cfg = Scenario::indoor_mw_grid().deployment(Objective::Sum, 2, 0.01);
        let mut s = MemoryState::initial().with_gamma(vec![0.4]);
        let p = s.place_and_advance(&cfg).unwrap();
        assert_eq!(p, 0.4);
        assert_eq!(s.y, vec![1, 2]);
        assert_eq!(s.p, vec![0.4, 0.0]);
        s.advance(&cfg);
        s.gamma = vec![0.1, 0.9];
        s.place_and_advance(&cfg).unwrap();
        assert_eq!(s.y, vec![1, 3]);
        assert!((s.p[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.p[1], 0.4);
        for _ in 0..7 {
            s.advance(&cfg);
        }
        assert_eq!(s.y, vec![8, 10]);
        s.advance(&cfg);
        assert_eq!(s.y, vec![9]);
        assert_eq!(s.p.len(), 1);
    }

    #[test]
    fn memory_one_matches_adjacent() {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(1).unwrap();
        for xi in [0.001, 0.1] {
            let cfg = s.deployment(Objective::Sum, 1, xi);
            let a = solve_sum_adjacent(&m, &cfg, TIGHT, DEFAULT_MAX_ITERS).unwrap();
            let p = solve_memory(&m, &cfg, TIGHT, DEFAULT_MAX_ITERS).unwrap();
            assert!((a.j0 - p.j0).abs() < 1e-9, "{} vs {}", a.j0, p.j0);
            let cfg = s.deployment(Objective::Max, 1, xi);
            let a = solve_max_adjacent(&m, &cfg, TIGHT, DEFAULT_MAX_ITERS).unwrap();
            let p = solve_memory(&m, &cfg, TIGHT, DEFAULT_MAX_ITERS).unwrap();
            assert!((a.j0 - p.j0).abs() < 1e-9, "{} vs {}", a.j0, p.j0);
        }
    }

    #[test]
    fn sum_memory_two_needs_grid() {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(2).unwrap();
        let cfg = s.deployment(Objective::Sum, 2, 0.01);
        assert!(matches!(
            solve_memory(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn short_horizon_rejected() {
        let s = Scenario::indoor_dbm();
        let p = s.channel_params().unwrap();
        let m = crate::channel::build_pmf(p, s.levels().unwrap(), 9).unwrap();
        let cfg = s.deployment(Objective::Max, 2, 0.01);
        assert!(solve_memory(&m, &cfg, DEFAULT_TOL, DEFAULT_MAX_ITERS).is_err());
    }

    #[test]
    fn forced_and_out_of_domain() {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(2).unwrap();
        let cfg = s.deployment(Objective::Max, 2, 0.01);
        let p = solve_memory(&m, &cfg, 1e-9, DEFAULT_MAX_ITERS).unwrap();
        let st = MemoryState {
            y: vec![10],
            p: vec![0.1],
            gamma: vec![2.0],
        };
        assert_eq!(p.decide(&st).unwrap(), Decision::ForcedPlace);
        let far = MemoryState {
            y: vec![4, 12],
            p: vec![0.1, 0.0],
            gamma: vec![2.0, 2.0],
        };
        assert!(p.decide(&far).is_err());
        let bad = MemoryState {
            y: vec![11],
            p: vec![0.0],
            gamma: vec![0.01],
        };
        assert!(p.decide(&bad).is_err());
        let missing = MemoryState {
            y: vec![2],
            p: vec![0.0],
            gamma: vec![],
        };
        assert!(p.decide(&missing).is_err());
    }

    #[test]
    fn threshold_csv_shape() {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(2).unwrap();
        let cfg = s.deployment(Objective::Max, 2, 0.1);
        let p = solve_memory(&m, &cfg, 1e-9, DEFAULT_MAX_ITERS).unwrap();
        let csv = p.threshold_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "y1,y2,p1_mW,p2_mW,w_mW,c_mW");
        assert_eq!(lines.count(), p.states.len());
    }
}
