//! Deterministic, single-threaded scenario execution.

use corec_core::context::{should_replan, FieldReport, ReportOutcome};
use corec_core::store::{Author, EventLog};
use corec_core::travel::{Router, RoutingConfig, RoutingError};
use corec_core::{CoordError, Coordinator};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{emit_metrics, RunMetrics};
use crate::scenario::{Action, Scenario};

/// A script step the platform refused; the run carries on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRejection {
    pub step: usize,
    pub at: u64,
    pub action: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct RunOutput {
    pub log: EventLog,
    pub metrics: RunMetrics,
    pub rejections: Vec<StepRejection>,
    pub replans: usize,
}

impl RunOutput {
    pub fn log_ndjson(&self) -> String {
        self.log.to_ndjson()
    }

    pub fn log_digest(&self) -> String {
        hex::encode(Sha256::digest(self.log_ndjson().as_bytes()))
    }
}

/// Runs with the offline travel-time estimate.
pub fn run(scenario: &Scenario) -> Result<RunOutput, CoordError> {
    run_with(scenario, scenario.config.routing())
}

/// Runs with the given routing configuration; speeds and the response
/// limit from the scenario still apply.
pub fn run_with(scenario: &Scenario, mut routing: RoutingConfig) -> Result<RunOutput, CoordError> {
    let base = scenario.config.routing();
    routing.mode_speeds = base.mode_speeds;
    routing.max_response_s = base.max_response_s;
    let router = Router::new(routing).map_err(|e: RoutingError| CoordError::Validation(e.to_string()))?;
    let mut c = Coordinator::new(scenario.initial.clone(), EventLog::in_memory(), router, scenario.config.weights())?;
    let mut rejections = Vec::new();
    let mut replans = 0;

    for (i, step) in scenario.script.iter().enumerate() {
        let before = c.log().len();
        if let Err(reason) = execute(&mut c, step.at, &step.action) {
            rejections.push(StepRejection { step: i, at: step.at, action: step.action.name().into(), reason });
        }
        if c.log().events()[before..].iter().any(should_replan) {
            if let Some(_out) = c.replan_current(step.at)? {
                replans += 1;
            }
        }
    }

    let metrics = emit_metrics(c.initial(), c.log().events());
    Ok(RunOutput { log: c.into_log(), metrics, rejections, replans })
}

fn execute(c: &mut Coordinator, at: u64, action: &Action) -> Result<(), String> {
    let err = |e: CoordError| e.to_string();
    match action {
        Action::Register(app) => c.register_driver(at, app.clone()).map(drop).map_err(err),
        Action::Vet { by, unit_id, verdict } => c.vet_registration(at, by, unit_id, *verdict).map(drop).map_err(err),
        Action::Report { author, subject, claim } => {
            let report = FieldReport { author: author.clone(), at, subject: subject.clone(), claim: claim.clone() };
            match c.submit_report(&report).0 {
                ReportOutcome::Accepted { .. } => Ok(()),
                ReportOutcome::Rejected { reason, detail } => Err(format!("{reason}: {detail}")),
            }
        }
        Action::Propose { by, point_ids } => c.propose_plan(at, by, point_ids.as_ref(), false).map(drop).map_err(err),
        Action::Dispatch { by, plan_id, unit_ids } => {
            let plan = match plan_id {
                Some(id) => c.plan(id),
                None => c.world().current_plan(),
            }
            .ok_or_else(|| "no plan to dispatch".to_string())?;
            let id = plan.id.clone();
            let units = match unit_ids {
                Some(ids) => ids.clone(),
                None => plan.assignments.iter().filter(|(_, a)| !a.dispatched).map(|(u, _)| u.clone()).collect(),
            };
            if units.is_empty() {
                return Ok(());
            }
            c.dispatch(at, by, &id, &units).map(drop).map_err(err)
        }
        Action::Clear { by, point_id, evacuated } => c.clear_point(at, by, point_id, *evacuated).map(drop).map_err(err),
        Action::Status { author, unit_id, availability } => {
            c.set_unit_status(at, author, unit_id, *availability).map(drop).map_err(err)
        }
        Action::Feedback { author, rating, text } => c.submit_feedback(at, author, *rating, text).map(drop).map_err(err),
        Action::Bulletin { by, audience, text } => {
            let author = Author::new(by.clone(), corec_core::domain::Role::DecisionMaker);
            c.publish_bulletin(at, author, *audience, text).map(drop).map_err(err)
        }
    }
}
