//! Versioned JSON artifacts and CSV exports of the figures and tables.
//!
//! An artifact file is a JSON envelope
//!
//! ```json
//! {"schema_version": 1, "kind": "policy", "fingerprint": "<sha256>",
//!  "created_at": "<RFC 3339>", "payload": {...}}
//! ```
//!
//! The fingerprint is the SHA-256 of the payload rendered as compact JSON
//! with object keys sorted, so it does not depend on field order or
//! whitespace. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::channel::{dbm_to_mw, fmt_dbm, LinkPowerModel, PowerLevelSet};
use crate::config::Objective;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::sim::{ComparisonRow, SimReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Channel,
    Policy,
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyArtifact {
    pub channel_fingerprint: String,
    pub policy: Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub policy_fingerprint: String,
    pub report: SimReport,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Channel(LinkPowerModel),
    Policy(PolicyArtifact),
    Report(ReportArtifact),
}

impl Artifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Artifact::Channel(_) => ArtifactKind::Channel,
            Artifact::Policy(_) => ArtifactKind::Policy,
            Artifact::Report(_) => ArtifactKind::Report,
        }
    }

    fn payload(&self) -> Result<Value> {
        let v = match self {
            Artifact::Channel(m) => serde_json::to_value(m),
            Artifact::Policy(p) => serde_json::to_value(p),
            Artifact::Report(r) => serde_json::to_value(r),
        };
        v.map_err(|e| Error::Malformed(format!("cannot serialize payload: {e}")))
    }

    pub fn fingerprint(&self) -> Result<String> {
        Ok(fingerprint_value(&self.payload()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub kind: ArtifactKind,
    pub fingerprint: String,
    pub created_at: String,
    pub payload: Value,
}

/// SHA-256 (hex) of the compact, key-sorted rendering of `v`.
pub fn fingerprint_value(v: &Value) -> String {
    let bytes = serde_json::to_vec(v).expect("Value always serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Fingerprint of any serializable value, computed the same way as artifact
/// fingerprints.
pub fn fingerprint_of<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(fingerprint_value(&v))
}

pub fn envelope(artifact: &Artifact, created_at: &str) -> Result<Envelope> {
    let payload = artifact.payload()?;
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        kind: artifact.kind(),
        fingerprint: fingerprint_value(&payload),
        created_at: created_at.to_string(),
        payload,
    };
    // Non-finite floats would not survive JSON; refuse to write them.
    if open_envelope(env.clone())? != *artifact {
        return Err(Error::Malformed(
            "payload does not survive a JSON round trip (non-finite value?)".into(),
        ));
    }
    Ok(env)
}

pub fn to_json(artifact: &Artifact, created_at: &str) -> Result<String> {
    let env = envelope(artifact, created_at)?;
    serde_json::to_string_pretty(&env).map_err(|e| Error::Malformed(e.to_string()))
}

/// Writes `artifact` to `path` atomically and returns its fingerprint.
pub fn save(artifact: &Artifact, path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let text = to_json(artifact, &chrono::Utc::now().to_rfc3339())?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(text.as_bytes())
        .and_then(|_| tmp.write_all(b"\n"))
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    artifact.fingerprint()
}

pub fn from_json(text: &str) -> Result<(Envelope, Artifact)> {
    let raw: Value =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("not JSON: {e}")))?;
    let version = raw
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Malformed("missing schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let env: Envelope =
        serde_json::from_value(raw).map_err(|e| Error::Malformed(format!("envelope: {e}")))?;
    let computed = fingerprint_value(&env.payload);
    if computed != env.fingerprint {
        return Err(Error::HashMismatch {
            stored: env.fingerprint,
            computed,
        });
    }
    let artifact = open_envelope(env.clone())?;
    Ok((env, artifact))
}

fn open_envelope(env: Envelope) -> Result<Artifact> {
    fn typed<T: DeserializeOwned>(v: Value) -> Result<T> {
        serde_json::from_value(v).map_err(|e| Error::Malformed(format!("payload: {e}")))
    }
    Ok(match env.kind {
        ArtifactKind::Channel => Artifact::Channel(typed(env.payload)?),
        ArtifactKind::Policy => Artifact::Policy(typed(env.payload)?),
        ArtifactKind::Report => Artifact::Report(typed(env.payload)?),
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<(Envelope, Artifact)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<(String, PolicyArtifact)> {
    match load(path)? {
        (env, Artifact::Policy(p)) => Ok((env.fingerprint, p)),
        (env, _) => Err(Error::Malformed(format!(
            "expected a policy artifact, found {:?}",
            env.kind
        ))),
    }
}

/// Writes `text` to `path` atomically.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// `gamma_th(r)` vs `r`, one series per `xi` (sum, memory 1).
    Fig2,
    /// `r_th(gamma_max)` vs `gamma_max` (max, memory 1).
    Fig4,
    /// `gamma_th(r, gamma_max)` vs `r` at `gamma_max = -20 dBm`.
    Fig5,
    /// Cost break-up, sum objective.
    Table1,
    /// Cost break-up, max objective.
    Table2,
    /// Memory 1 vs memory 2.
    Table3,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig2" => Figure::Fig2,
            "fig4" => Figure::Fig4,
            "fig5" => Figure::Fig5,
            "table1" => Figure::Table1,
            "table2" => Figure::Table2,
            "table3" => Figure::Table3,
            other => return Err(Error::UnsupportedFigure(other.to_string())),
        })
    }
}

/// Running maximum at which the fig5 slice is taken.
pub const FIG5_GAMMA_MAX_DBM: f64 = -20.0;

/// One row of a cost break-up table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub xi: f64,
    pub j0: f64,
    pub report: SimReport,
}

pub enum FigureInput<'a> {
    /// Solved policies, one per `xi`, plus the level set they were solved on
    /// and the step length in metres.
    Policies {
        policies: &'a [Policy],
        levels: &'a PowerLevelSet,
        step_m: f64,
    },
    Tables(&'a [TableEntry]),
    Comparison(&'a [ComparisonRow]),
}

fn dbm_cell(mw: f64) -> String {
    if mw > 0.0 {
        fmt_dbm(mw)
    } else {
        "-inf".to_string()
    }
}

pub fn export_figure_csv(figure: Figure, input: FigureInput<'_>) -> Result<String> {
    let mismatch = || Error::Config(format!("{figure:?} cannot be drawn from this input"));
    let mut out = String::new();
    match (figure, input) {
        (
            Figure::Fig2,
            FigureInput::Policies {
                policies,
                levels,
                step_m,
            },
        ) => {
            out.push_str("r_m,xi,gamma_th_dBm,gamma_th_unquantized_dBm\n");
            for p in policies {
                let Policy::SumAdjacent(p) = p else {
                    return Err(mismatch());
                };
                for r in 1..=p.config.r_max_steps {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        r as f64 * step_m,
                        p.config.xi,
                        dbm_cell(p.level_threshold(r, levels.levels())?),
                        dbm_cell(p.gamma_th[r as usize - 1])
                    );
                }
            }
        }
        (Figure::Fig4, FigureInput::Policies { policies, step_m, .. }) => {
            out.push_str("xi,gamma_max_dBm,r_th_steps,r_th_m\n");
            for p in policies {
                let Policy::MaxAdjacent(p) = p else {
                    return Err(mismatch());
                };
                for (j, &g) in p.gamma_max_grid[1..].iter().enumerate() {
                    let r = p.r_th[j];
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        p.config.xi,
                        fmt_dbm(g),
                        r,
                        r as f64 * step_m
                    );
                }
            }
        }
        (Figure::Fig5, FigureInput::Policies { policies, step_m, .. }) => {
            out.push_str("xi,gamma_max_dBm,r_steps,r_m,gamma_th_dBm\n");
            for p in policies {
                let Policy::MaxAdjacent(p) = p else {
                    return Err(mismatch());
                };
                let gm = dbm_to_mw(FIG5_GAMMA_MAX_DBM);
                for r in 1..=p.config.r_max_steps {
                    let th = p.gamma_th(r, gm)?;
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        p.config.xi,
                        FIG5_GAMMA_MAX_DBM,
                        r,
                        r as f64 * step_m,
                        dbm_cell(th)
                    );
                }
            }
        }
        (Figure::Table1 | Figure::Table2, FigureInput::Tables(rows)) => {
            out.push_str(
                "xi,j0_mW,mean_n,mean_n_hw,relay_cost_mW,power_cost_mW,power_cost_hw,total_mW,total_hw,\
                 failure_prob,failure_ci_lo,failure_ci_hi,runs,seed\n",
            );
            for e in rows {
                let r = &e.report;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    e.xi,
                    e.j0,
                    r.mean_n,
                    r.mean_n_hw,
                    r.relay_cost,
                    r.power_cost,
                    r.power_cost_hw,
                    r.total,
                    r.total_hw,
                    r.failure_prob,
                    r.failure_ci.0,
                    r.failure_ci.1,
                    r.runs,
                    r.seed
                );
            }
        }
        (Figure::Table3, FigureInput::Comparison(rows)) => {
            out.push_str("objective,xi,j0_n1_mW,j0_n2_mW,gain_pct,sim_total_n1_mW,sim_total_n2_mW\n");
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.objective,
                    r.xi,
                    r.j0_n1,
                    r.j0_n2,
                    r.gain_pct,
                    opt(r.sim_total_n1),
                    opt(r.sim_total_n2)
                );
            }
        }
        _ => return Err(mismatch()),
    }
    Ok(out)
}

/// Threshold tables of a policy in a UI-friendly shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdTables {
    Sum {
        xi: f64,
        r_steps: Vec<u32>,
        gamma_th_mw: Vec<f64>,
        gamma_th_dbm: Vec<String>,
    },
    Max {
        xi: f64,
        gamma_max_mw: Vec<f64>,
        r_th_steps: Vec<u32>,
        /// `gamma_th_mw[r - 1][j]` for `gamma_max_mw[j]` (first entry 0).
        gamma_th_mw: Vec<Vec<f64>>,
    },
    Memory {
        xi: f64,
        objective: Objective,
        memory_n: u32,
        csv: String,
    },
}

pub fn threshold_tables(policy: &Policy) -> ThresholdTables {
    match policy {
        Policy::SumAdjacent(p) => ThresholdTables::Sum {
            xi: p.config.xi,
            r_steps: (1..=p.config.r_max_steps).collect(),
            gamma_th_mw: p.gamma_th.clone(),
            gamma_th_dbm: p.gamma_th.iter().map(|&g| dbm_cell(g)).collect(),
        },
        Policy::MaxAdjacent(p) => ThresholdTables::Max {
            xi: p.config.xi,
            gamma_max_mw: p.gamma_max_grid.clone(),
            r_th_steps: p.r_th.clone(),
            gamma_th_mw: p.gamma_th.clone(),
        },
        Policy::Memory(p) => ThresholdTables::Memory {
            xi: p.config.xi,
            objective: p.config.objective,
            memory_n: p.config.memory_n,
            csv: p.threshold_csv(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;

    fn sum_policy() -> (Policy, LinkPowerModel) {
        let s = Scenario::indoor_dbm();
        let m = s.link_model(1).unwrap();
        (Policy::solve(&m, &s.deployment(Objective::Sum, 1, 0.01)).unwrap(), m)
    }

    fn policy_artifact() -> Artifact {
        let (p, m) = sum_policy();
        Artifact::Policy(PolicyArtifact {
            channel_fingerprint: fingerprint_of(&m).unwrap(),
            policy: p,
        })
    }

    #[test]
    fn round_trip_is_exact() {
        let a = policy_artifact();
        let text = to_json(&a, "2020-01-01T00:00:00Z").unwrap();
        let (env, back) = from_json(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(env.fingerprint, a.fingerprint().unwrap());
        assert_eq!(to_json(&back, "2020-01-01T00:00:00Z").unwrap(), text);
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let a = policy_artifact();
        let fp = save(&a, &path).unwrap();
        let (got_fp, p) = load_policy(&path).unwrap();
        assert_eq!(fp, got_fp);
        assert_eq!(Artifact::Policy(p), a);
    }

    #[test]
    fn distinct_load_errors() {
        let text = to_json(&policy_artifact(), "t").unwrap();
        let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(from_json(&bumped), Err(Error::VersionMismatch { found: 2, .. })));
        let tampered = text.replacen("\"xi\": 0.01", "\"xi\": 0.02", 1);
        assert_ne!(tampered, text);
        assert!(matches!(from_json(&tampered), Err(Error::HashMismatch { .. })));
        assert!(matches!(from_json("{not json"), Err(Error::Malformed(_))));
        assert!(matches!(from_json("{\"schema_version\": 1}"), Err(Error::Malformed(_))));
    }

    #[test]
    fn unknown_figure() {
        assert!(matches!("fig9".parse::<Figure>(), Err(Error::UnsupportedFigure(_))));
        assert_eq!("table3".parse::<Figure>().unwrap(), Figure::Table3);
    }

    #[test]
    fn fig2_rows() {
        let (p, m) = sum_policy();
        let csv = export_figure_csv(
            Figure::Fig2,
            FigureInput::Policies {
                policies: &[p.clone()],
                levels: m.levels(),
                step_m: 2.0,
            },
        )
        .unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("r_m,xi,gamma_th_dBm"));
        let fig4 = export_figure_csv(
            Figure::Fig4,
            FigureInput::Policies {
                policies: &[p],
                levels: m.levels(),
                step_m: 2.0,
            },
        );
        assert!(matches!(fig4, Err(Error::Config(_))));
    }
}
