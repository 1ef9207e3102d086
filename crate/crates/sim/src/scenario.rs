//! Scenario files: an initial world plus a timed script of actions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use corec_core::context::{DriverApplication, ReportClaim, ReportSubject};
use corec_core::domain::{validate_world, Availability, PriorityWeights, Role, TransportMode, WorldState};
use corec_core::store::{Audience, Verdict};
use corec_core::travel::RoutingConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_speeds: Option<BTreeMap<TransportMode, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PriorityWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_response_s: Option<u64>,
}

impl ScenarioConfig {
    pub fn routing(&self) -> RoutingConfig {
        let mut cfg = RoutingConfig::default();
        if let Some(speeds) = &self.mode_speeds {
            cfg.mode_speeds = speeds.clone();
        }
        if let Some(max) = self.max_response_s {
            cfg.max_response_s = max;
        }
        cfg
    }

    pub fn weights(&self) -> PriorityWeights {
        self.weights.unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Register(DriverApplication),
    Vet {
        by: String,
        unit_id: String,
        verdict: Verdict,
    },
    Report {
        author: String,
        subject: ReportSubject,
        claim: ReportClaim,
    },
    Propose {
        by: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point_ids: Option<BTreeSet<String>>,
    },
    /// Dispatches units of a plan: the current plan and all of its
    /// undispatched units unless narrowed.
    Dispatch {
        by: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plan_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit_ids: Option<Vec<String>>,
    },
    Clear {
        by: String,
        point_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evacuated: Option<u32>,
    },
    Status {
        author: String,
        unit_id: String,
        availability: Availability,
    },
    Feedback {
        author: String,
        rating: i64,
        #[serde(default)]
        text: String,
    },
    Bulletin {
        by: String,
        audience: Audience,
        text: String,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Register(_) => "register",
            Action::Vet { .. } => "vet",
            Action::Report { .. } => "report",
            Action::Propose { .. } => "propose",
            Action::Dispatch { .. } => "dispatch",
            Action::Clear { .. } => "clear",
            Action::Status { .. } => "status",
            Action::Feedback { .. } => "feedback",
            Action::Bulletin { .. } => "bulletin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub at: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub initial: WorldState,
    #[serde(default)]
    pub script: Vec<Step>,
    #[serde(default)]
    pub config: ScenarioConfig,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Where in the scenario a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based line and column in the file.
    Text { line: usize, column: usize },
    /// A field path such as `script[3].unit_id`.
    Field(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Text { line, column } => write!(f, "line {line}, column {column}"),
            Location::Field(path) => f.write_str(path),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("{}", .problems.iter().map(|p| format!("{}: {}", p.0, p.1)).collect::<Vec<_>>().join("\n"))]
    Invalid { problems: Vec<(Location, String)> },
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        let path = e.path().to_string();
        let location = if inner.is_syntax() || inner.is_eof() || path == "." {
            Location::Text { line: inner.line(), column: inner.column() }
        } else {
            Location::Field(path)
        };
        ScenarioError::Parse { location, message: inner.to_string() }
    })?;
    let problems = validate_scenario(&scenario);
    if problems.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid { problems })
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

/// Static checks: schema version, world invariants, non-decreasing times,
/// and that every id a step names exists by the time the step runs.
pub fn validate_scenario(s: &Scenario) -> Vec<(Location, String)> {
    let mut problems = Vec::new();
    let mut fail = |loc: String, msg: String| problems.push((Location::Field(loc), msg));

    if s.schema != SCHEMA_VERSION {
        fail("schema".into(), format!("unsupported schema version {} (expected {SCHEMA_VERSION})", s.schema));
    }
    for v in validate_world(&s.initial) {
        fail(format!("initial.{}", v.entity), v.invariant);
    }
    if s.config.weights.is_some_and(|w| !w.is_valid()) {
        fail("config.weights".into(), "weights must be positive and strictly increasing".into());
    }
    if let Err(e) = s.config.routing().validate() {
        fail("config".into(), e.to_string());
    }
    for mode in TransportMode::ALL {
        if s.config.routing().speed(mode).is_ok_and(|v| !(v.is_finite() && v > 0.0)) {
            fail(format!("config.mode_speeds.{mode}"), "speed must be positive".into());
        }
    }

    let mut units: BTreeSet<String> = s.initial.units.iter().map(|u| u.id.clone()).collect();
    let mut points: BTreeSet<String> = s.initial.rescue_points.iter().map(|p| p.id.clone()).collect();
    let mut people: BTreeMap<String, Role> = s.initial.participants.iter().map(|p| (p.id.clone(), p.role)).collect();
    let mut last_at = 0;

    for (i, step) in s.script.iter().enumerate() {
        let at = |field: &str| format!("script[{i}].{field}");
        if step.at < last_at {
            fail(at("at"), format!("time {} is before the previous step's {last_at}", step.at));
        }
        last_at = step.at;
        let mut need_unit = |field: &str, id: &str, units: &BTreeSet<String>| {
            if !units.contains(id) {
                fail(at(field), format!("unknown unit '{id}'"));
            }
        };
        match &step.action {
            Action::Register(app) => {
                let id = app.unit_id.clone().unwrap_or_else(|| {
                    (units.len() + 1..)
                        .map(|n| format!("unit-{n:03}"))
                        .find(|id| !units.contains(id) && !people.contains_key(id))
                        .expect("unbounded search")
                });
                units.insert(id.clone());
                people.insert(id, Role::Driver);
            }
            Action::Vet { unit_id, .. } | Action::Status { unit_id, .. } => need_unit("unit_id", unit_id, &units),
            Action::Dispatch { unit_ids: Some(ids), .. } => {
                for id in ids {
                    need_unit("unit_ids", id, &units);
                }
            }
            Action::Report { subject: ReportSubject::Point { point_id, location, .. }, .. } => {
                if location.is_some() {
                    points.insert(point_id.clone());
                }
            }
            _ => {}
        }
        let point_refs: Vec<&String> = match &step.action {
            Action::Report { subject: ReportSubject::Point { point_id, .. }, .. } => vec![point_id],
            Action::Report { subject: ReportSubject::Closure { closure }, .. } => vec![&closure.point_id],
            Action::Clear { point_id, .. } => vec![point_id],
            Action::Propose { point_ids: Some(ids), .. } => ids.iter().collect(),
            _ => vec![],
        };
        for id in point_refs {
            if !points.contains(id) {
                fail(at("point_id"), format!("unknown point '{id}'"));
            }
        }
        if let Action::Report { subject: ReportSubject::Closure { closure }, .. } = &step.action {
            if let Some(u) = &closure.unit_id {
                if !units.contains(u) {
                    fail(at("subject.closure.unit_id"), format!("unknown unit '{u}'"));
                }
            }
        }
        let (field, who, role) = match &step.action {
            Action::Vet { by, .. }
            | Action::Propose { by, .. }
            | Action::Dispatch { by, .. }
            | Action::Clear { by, .. }
            | Action::Bulletin { by, .. } => ("by", by, Some(Role::DecisionMaker)),
            Action::Report { author, .. } | Action::Status { author, .. } | Action::Feedback { author, .. } => {
                ("author", author, None)
            }
            Action::Register(_) => continue,
        };
        match (people.get(who), role) {
            (None, _) => fail(at(field), format!("unknown participant '{who}'")),
            (Some(r), Some(need)) if *r != need => fail(at(field), format!("'{who}' is not a {need}")),
            _ => {}
        }
    }
    problems
}
