//! Live deployment walks: the state machine behind the assistant service.
//!
//! A [`WalkSession`] mirrors [`run_deployment`](crate::sim::run_deployment)
//! step for step, except that the link measurements come from the operative
//! instead of a random number generator.

use serde::{Deserialize, Serialize};

use crate::adjacent::Decision;
use crate::channel::{dbm_to_mw, quantize_power, PowerLevelSet};
use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::policy::Policy;
use crate::sim::{path_cost_links, FailureEvent, FailureKind};

/// One reported link power. Exactly one of `mw` and `dbm` must be given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementInput {
    /// Index of the visible node, 0 being the newest.
    pub node: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbm: Option<f64>,
}

impl MeasurementInput {
    pub fn mw(node: usize, mw: f64) -> Self {
        Self {
            node,
            mw: Some(mw),
            dbm: None,
        }
    }

    pub fn dbm(node: usize, dbm: f64) -> Self {
        Self {
            node,
            mw: None,
            dbm: Some(dbm),
        }
    }

    fn raw_mw(&self) -> Result<f64> {
        let mw = match (self.mw, self.dbm) {
            (Some(mw), None) => mw,
            (None, Some(dbm)) => dbm_to_mw(dbm),
            _ => {
                return Err(Error::Domain(format!(
                    "measurement for node {} needs exactly one of `mw` and `dbm`",
                    self.node
                )))
            }
        };
        if !mw.is_finite() || mw < 0.0 {
            return Err(Error::Domain(format!(
                "measurement for node {} is not a nonnegative power: {mw}",
                self.node
            )));
        }
        Ok(mw)
    }
}

/// A measurement after server-side quantization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMeasurement {
    pub node: usize,
    pub distance_steps: u32,
    pub raw_mw: f64,
    pub level_mw: f64,
    pub exceeds_max: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The next location is `r_max` steps from the newest node, so a relay
    /// will be placed there whatever is measured.
    ForcedPlacementNext { distance_steps: u32 },
    /// The link to `node` needs more than the maximum power level.
    AboveMaxLevel { node: usize, raw_mw: f64, max_mw: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Walking,
    Ended,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    /// Location (steps from the sink) of this step.
    pub position: u32,
    pub y: Vec<u32>,
    pub p: Vec<f64>,
    pub measurements: Vec<QuantizedMeasurement>,
    pub decision: Decision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub decision: Decision,
    pub measurements: Vec<QuantizedMeasurement>,
    pub warnings: Vec<Warning>,
    pub session: SessionView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndReport {
    /// Number of relays placed.
    pub relays: usize,
    /// Relay locations followed by the source location.
    pub placements: Vec<u32>,
    pub path_cost_mw: f64,
    pub relay_cost_mw: f64,
    pub total_mw: f64,
    pub failures: Vec<FailureEvent>,
    pub failed: bool,
    pub measurements: Vec<QuantizedMeasurement>,
}

/// Read-only snapshot of a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub policy_id: String,
    pub policy_fingerprint: String,
    pub status: SessionStatus,
    /// Steps taken so far.
    pub step: u32,
    /// Location of the next measurement.
    pub position: u32,
    /// Distances (steps) to the visible nodes, newest first.
    pub y: Vec<u32>,
    /// Shortest-path lengths (mW) of the visible nodes.
    pub p: Vec<f64>,
    pub placements: Vec<u32>,
    pub failures: Vec<FailureEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EndReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSession {
    pub id: String,
    pub policy_id: String,
    pub policy_fingerprint: String,
    pub status: SessionStatus,
    pub state: MemoryState,
    pub position: u32,
    pub placements: Vec<u32>,
    /// Quantized link powers of each placed node to its visible predecessors.
    pub node_links: Vec<Vec<f64>>,
    pub failures: Vec<FailureEvent>,
    pub log: Vec<StepLog>,
    pub report: Option<EndReport>,
}

impl WalkSession {
    pub fn new(id: impl Into<String>, policy_id: impl Into<String>, fingerprint: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            policy_id: policy_id.into(),
            policy_fingerprint: fingerprint.into(),
            status: SessionStatus::Walking,
            state: MemoryState::initial(),
            position: 1,
            placements: Vec::new(),
            node_links: Vec::new(),
            failures: Vec::new(),
            log: Vec::new(),
            report: None,
        }
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            policy_id: self.policy_id.clone(),
            policy_fingerprint: self.policy_fingerprint.clone(),
            status: self.status,
            step: self.log.len() as u32,
            position: self.position,
            y: self.state.y.clone(),
            p: self.state.p.clone(),
            placements: self.placements.clone(),
            failures: self.failures.clone(),
            report: self.report.clone(),
        }
    }

    fn ensure_walking(&self) -> Result<()> {
        match self.status {
            SessionStatus::Walking => Ok(()),
            s => Err(Error::Session(format!("session {} is not walking ({s:?})", self.id))),
        }
    }

    fn quantize(
        &self,
        measurements: &[MeasurementInput],
        levels: &PowerLevelSet,
    ) -> Result<Vec<QuantizedMeasurement>> {
        let visible = self.state.y.len();
        if measurements.len() != visible {
            return Err(Error::Domain(format!(
                "expected {visible} measurement(s), one per visible node, got {}",
                measurements.len()
            )));
        }
        let mut out: Vec<Option<QuantizedMeasurement>> = vec![None; visible];
        for m in measurements {
            let slot = out.get_mut(m.node).ok_or_else(|| {
                Error::Domain(format!("node index {} out of range 0..{visible}", m.node))
            })?;
            if slot.is_some() {
                return Err(Error::Domain(format!("node {} measured twice", m.node)));
            }
            let raw = m.raw_mw()?;
            *slot = Some(QuantizedMeasurement {
                node: m.node,
                distance_steps: self.state.y[m.node],
                raw_mw: raw,
                level_mw: quantize_power(raw, levels),
                exceeds_max: levels.exceeds_max(raw),
            });
        }
        Ok(out.into_iter().map(|m| m.expect("every slot filled")).collect())
    }

    fn max_warnings(q: &[QuantizedMeasurement], levels: &PowerLevelSet) -> Vec<Warning> {
        q.iter()
            .filter(|m| m.exceeds_max)
            .map(|m| Warning::AboveMaxLevel {
                node: m.node,
                raw_mw: m.raw_mw,
                max_mw: levels.max(),
            })
            .collect()
    }

    /// Applies `policy` to the measurements taken at the current location.
    pub fn step(
        &mut self,
        policy: &Policy,
        levels: &PowerLevelSet,
        measurements: &[MeasurementInput],
    ) -> Result<StepOutcome> {
        self.ensure_walking()?;
        let cfg = *policy.config();
        let q = self.quantize(measurements, levels)?;
        let mut state = self.state.clone();
        state.gamma = q.iter().map(|m| m.level_mw).collect();
        let decision = policy.decide(&state)?;
        let mut warnings = Self::max_warnings(&q, levels);
        self.log.push(StepLog {
            position: self.position,
            y: state.y.clone(),
            p: state.p.clone(),
            measurements: q.clone(),
            decision,
        });
        if decision.places() {
            if decision == Decision::ForcedPlace && q.iter().all(|m| m.exceeds_max) {
                self.failures.push(FailureEvent {
                    position: self.position,
                    kind: FailureKind::ForcedLink,
                });
            }
            self.placements.push(self.position);
            self.node_links.push(state.gamma.clone());
            state.place_and_advance(&cfg)?;
        } else {
            if state.y[0] + 1 == cfg.r_max_steps {
                warnings.push(Warning::ForcedPlacementNext {
                    distance_steps: cfg.r_max_steps,
                });
            }
            state.advance(&cfg);
        }
        self.state = state;
        self.position += 1;
        Ok(StepOutcome {
            decision,
            measurements: q,
            warnings,
            session: self.view(),
        })
    }

    /// Places the source at the current location and closes the walk.
    pub fn end(
        &mut self,
        policy: &Policy,
        levels: &PowerLevelSet,
        source_measurements: &[MeasurementInput],
    ) -> Result<EndReport> {
        self.ensure_walking()?;
        let cfg = *policy.config();
        let q = self.quantize(source_measurements, levels)?;
        if q.iter().all(|m| m.exceeds_max) {
            self.failures.push(FailureEvent {
                position: self.position,
                kind: FailureKind::SourceLink,
            });
        }
        let mut node_links = self.node_links.clone();
        node_links.push(q.iter().map(|m| m.level_mw).collect());
        let path_cost_mw = path_cost_links(&node_links, cfg.objective, cfg.memory_n)?;
        let mut placements = self.placements.clone();
        placements.push(self.position);
        let relays = self.placements.len();
        let relay_cost_mw = cfg.xi * relays as f64;
        let report = EndReport {
            relays,
            placements: placements.clone(),
            path_cost_mw,
            relay_cost_mw,
            total_mw: path_cost_mw + relay_cost_mw,
            failures: self.failures.clone(),
            failed: !self.failures.is_empty(),
            measurements: q,
        };
        self.node_links = node_links;
        self.placements = placements;
        self.status = if report.failed {
            SessionStatus::Failed
        } else {
            SessionStatus::Ended
        };
        self.report = Some(report.clone());
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Objective, Scenario};

    fn setup(objective: Objective, xi: f64) -> (Policy, PowerLevelSet) {
        let s = Scenario::indoor_dbm();
        let model = s.link_model(1).unwrap();
        let policy = Policy::solve(&model, &s.deployment(objective, 1, xi)).unwrap();
        (policy, s.levels().unwrap())
    }

    #[test]
    fn fresh_session() {
        let s = WalkSession::new("a", "p", "abc");
        let v = s.view();
        assert_eq!(v.step, 0);
        assert!(v.placements.is_empty());
        assert_eq!(v.y, vec![1]);
        assert_eq!(v.policy_fingerprint, "abc");
    }

    #[test]
    fn places_at_minus_20_dbm_four_steps_out() {
        let (policy, levels) = setup(Objective::Sum, 0.001);
        let mut s = WalkSession::new("a", "p", "f");
        for _ in 0..3 {
            let out = s.step(&policy, &levels, &[MeasurementInput::dbm(0, 3.0)]).unwrap();
            assert_eq!(out.decision, Decision::Skip);
        }
        assert_eq!(s.state.y, vec![4]);
        let out = s.step(&policy, &levels, &[MeasurementInput::dbm(0, -20.0)]).unwrap();
        assert_eq!(out.decision, Decision::Place);
        assert_eq!(s.placements, vec![4]);
    }

    #[test]
    fn forced_placement_with_warning_before() {
        let (policy, levels) = setup(Objective::Sum, 0.001);
        let mut s = WalkSession::new("a", "p", "f");
        let big = MeasurementInput::mw(0, 50.0);
        for k in 1..10 {
            let out = s.step(&policy, &levels, &[big]).unwrap();
            assert_eq!(out.decision, Decision::Skip);
            let forced_warning = out
                .warnings
                .iter()
                .any(|w| matches!(w, Warning::ForcedPlacementNext { .. }));
            assert_eq!(forced_warning, k == 9);
            assert!(out.warnings.iter().any(|w| matches!(w, Warning::AboveMaxLevel { .. })));
        }
        let out = s.step(&policy, &levels, &[big]).unwrap();
        assert_eq!(out.decision, Decision::ForcedPlace);
        assert_eq!(s.failures.len(), 1);
        assert_eq!(s.failures[0].kind, FailureKind::ForcedLink);
    }

    #[test]
    fn end_at_first_step() {
        let (policy, levels) = setup(Objective::Sum, 0.01);
        let mut s = WalkSession::new("a", "p", "f");
        let r = s.end(&policy, &levels, &[MeasurementInput::mw(0, 0.004)]).unwrap();
        assert_eq!(r.relays, 0);
        assert_eq!(r.placements, vec![1]);
        assert!((r.path_cost_mw - dbm_to_mw(-20.0)).abs() < 1e-15);
        assert!(!r.failed);
        assert_eq!(s.status, SessionStatus::Ended);
        assert!(matches!(
            s.end(&policy, &levels, &[MeasurementInput::mw(0, 0.004)]),
            Err(Error::Session(_))
        ));
        assert!(matches!(
            s.step(&policy, &levels, &[MeasurementInput::mw(0, 0.004)]),
            Err(Error::Session(_))
        ));
    }

    #[test]
    fn source_above_max_fails() {
        let (policy, levels) = setup(Objective::Max, 0.01);
        let mut s = WalkSession::new("a", "p", "f");
        let r = s.end(&policy, &levels, &[MeasurementInput::dbm(0, 5.0)]).unwrap();
        assert!(r.failed);
        assert_eq!(s.status, SessionStatus::Failed);
    }

    #[test]
    fn measurement_validation() {
        let (policy, levels) = setup(Objective::Sum, 0.01);
        let mut s = WalkSession::new("a", "p", "f");
        assert!(s.step(&policy, &levels, &[]).is_err());
        assert!(s.step(&policy, &levels, &[MeasurementInput::mw(1, 0.1)]).is_err());
        let both = MeasurementInput {
            node: 0,
            mw: Some(0.1),
            dbm: Some(-10.0),
        };
        assert!(s.step(&policy, &levels, &[both]).is_err());
        assert!(s.step(&policy, &levels, &[MeasurementInput::mw(0, -1.0)]).is_err());
        assert_eq!(s.view().step, 0);
    }
}
