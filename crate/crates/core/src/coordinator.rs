//! The platform facade: every workflow (registration, vetting, reports,
//! planning, dispatch, re-planning, feedback, bulletins) goes through here
//! and ends in exactly its documented events on the log.
//!
//! Both the HTTP service and the scenario runner drive a `Coordinator`; it
//! keeps no state besides the log and the snapshot derived from it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{
    build_synthesis, report_body, Applicant, Bulletin, BulletinSink, DriverApplication, FieldReport, NoBulletins,
    Registration, ReportOutcome, SynthesisReport,
};
use crate::domain::{
    validate_world, Availability, GeoPoint, PriorityWeights, Qualification, Role, WorldState,
};
use crate::error::{StoreError, TransitionError, ValidationError};
use crate::plan::AssignmentPlan;
use crate::recommend::{self, AssignmentInstance, EXACT_MAX_POINTS, EXACT_MAX_UNITS};
use crate::store::{
    apply, replay, Application, Audience, Author, ContextEvent, Dispatch, EventBody, EventLog, NewEvent, Verdict,
};
use crate::travel::{Router, RoutingError};

#[derive(Debug, Error)]
pub enum CoordError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    State(String),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

impl CoordError {
    pub fn code(&self) -> &'static str {
        match self {
            CoordError::Validation(_) => "validation",
            CoordError::Forbidden(_) => "forbidden",
            CoordError::NotFound(_) => "not_found",
            CoordError::State(_) => "state",
            CoordError::Store(_) => "storage",
            CoordError::Routing(_) => "routing",
        }
    }
}

impl From<StoreError> for CoordError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Validation(v) => CoordError::Validation(v.to_string()),
            other => CoordError::Store(other),
        }
    }
}

impl From<ValidationError> for CoordError {
    fn from(e: ValidationError) -> Self {
        CoordError::Validation(e.to_string())
    }
}

/// What a dispatched driver is told: where to go and how long it should take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverNotice {
    pub unit_id: String,
    pub point_id: String,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub travel_time_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchOutcome {
    pub seqs: Vec<u64>,
    pub notices: Vec<DriverNotice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanOutcome {
    pub plan: AssignmentPlan,
    pub released: Vec<String>,
    pub seqs: Vec<u64>,
}

const REGISTRATION_DESK: &str = "registration-desk";
const PLANNER: &str = "planner";

pub struct Coordinator {
    initial: WorldState,
    log: EventLog,
    world: WorldState,
    router: Router,
    weights: PriorityWeights,
    bulletins: Box<dyn BulletinSink>,
}

impl std::fmt::Debug for Coordinator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Coordinator").field("log", &self.log).field("router", &self.router).finish_non_exhaustive()
    }
}

impl Coordinator {
    /// Rebuilds the snapshot from `log` on top of `initial`.
    pub fn new(initial: WorldState, log: EventLog, router: Router, weights: PriorityWeights) -> Result<Self, CoordError> {
        let violations = validate_world(&initial);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(CoordError::Validation(format!("initial world: {}", list.join("; "))));
        }
        if !weights.is_valid() {
            return Err(CoordError::Validation("priority weights must be positive and increasing".into()));
        }
        let world = replay(&initial, log.events()).world;
        Ok(Self { initial, log, world, router, weights, bulletins: Box::new(NoBulletins) })
    }

    pub fn in_memory(initial: WorldState) -> Result<Self, CoordError> {
        Self::new(initial, EventLog::in_memory(), Router::offline(), PriorityWeights::default())
    }

    pub fn with_bulletins(mut self, sink: Box<dyn BulletinSink>) -> Self {
        self.bulletins = sink;
        self
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn initial(&self) -> &WorldState {
        &self.initial
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn weights(&self) -> PriorityWeights {
        self.weights
    }

    /// Checks the transition on a scratch copy, appends, then adopts it.
    fn commit(&mut self, at: u64, author: Author, body: EventBody) -> Result<ContextEvent, CommitError> {
        body.validate()?;
        let mut next = self.world.clone();
        let probe = ContextEvent { seq: self.log.last_seq() + 1, at, author: author.clone(), body: body.clone() };
        apply(&mut next, &probe)?;
        let seq = self.log.append(NewEvent::new(at, author, body))?;
        self.world = next;
        Ok(self.log.events()[seq as usize - 1].clone())
    }

    fn require_role(&self, id: &str, role: Role) -> Result<Author, CoordError> {
        if self.world.is_registered(id, role) {
            Ok(Author::new(id, role))
        } else {
            Err(CoordError::Forbidden(format!("{id} is not a registered {role}")))
        }
    }

    fn author_of(&self, id: &str) -> Result<Author, CoordError> {
        match self.world.participant(id) {
            Some(p) if self.world.is_registered(id, p.role) => Ok(Author::new(id, p.role)),
            _ => Err(CoordError::Forbidden(format!("{id} is not registered"))),
        }
    }

    fn next_unit_id(&self) -> String {
        (self.world.units.len() + 1..)
            .map(|n| format!("unit-{n:03}"))
            .find(|id| self.world.unit(id).is_none() && self.world.participant(id).is_none())
            .expect("unbounded search")
    }

    /// Records a pending registration. The unit is not eligible for plans
    /// until a decision-maker approves it.
    pub fn register_driver(&mut self, at: u64, app: DriverApplication) -> Result<Registration, CoordError> {
        let unit_id = app.unit_id.clone().unwrap_or_else(|| self.next_unit_id());
        let body = EventBody::DriverRegistered(Application {
            unit_id: unit_id.clone(),
            driver_name: app.driver_name,
            contact: app.contact,
            location: app.location,
            vehicle: app.vehicle,
            experience_note: app.experience_note,
        });
        self.commit(at, Author::system(REGISTRATION_DESK), body).map_err(CommitError::into_state)?;
        Ok(self.registration(&unit_id).expect("just registered"))
    }

    pub fn vet_registration(
        &mut self,
        at: u64,
        decider: &str,
        unit_id: &str,
        verdict: Verdict,
    ) -> Result<Registration, CoordError> {
        let author = self.require_role(decider, Role::DecisionMaker)?;
        let unit = self.world.unit(unit_id).ok_or_else(|| CoordError::NotFound(format!("no registration {unit_id}")))?;
        if unit.qualification != Qualification::Pending {
            return Err(CoordError::State(format!("registration {unit_id} already decided")));
        }
        self.commit(at, author, EventBody::RegistrationVetted { unit_id: unit_id.into(), verdict })
            .map_err(CommitError::into_state)?;
        Ok(self.registration(unit_id).expect("exists"))
    }

    /// Reconstructs a registration record from the log.
    pub fn registration(&self, unit_id: &str) -> Option<Registration> {
        let mut reg: Option<Registration> = None;
        for ev in self.log.events() {
            match &ev.body {
                EventBody::DriverRegistered(app) if app.unit_id == unit_id => {
                    reg = Some(Registration {
                        unit_id: app.unit_id.clone(),
                        applicant: Applicant { name: app.driver_name.clone(), contact: app.contact.clone() },
                        vehicle: app.vehicle.clone(),
                        experience_note: app.experience_note.clone(),
                        status: Qualification::Pending,
                        decided_by: None,
                    });
                }
                EventBody::RegistrationVetted { unit_id: u, .. } if u == unit_id => {
                    if let Some(r) = reg.as_mut() {
                        r.decided_by = Some(ev.author.id.clone());
                    }
                }
                _ => {}
            }
        }
        let mut reg = reg?;
        reg.status = self.world.unit(unit_id)?.qualification;
        Some(reg)
    }

    /// Accepts a report from a registered participant, or rejects it without
    /// touching the log.
    pub fn submit_report(&mut self, report: &FieldReport) -> (ReportOutcome, Option<ContextEvent>) {
        let Ok(author) = self.author_of(&report.author) else {
            return (ReportOutcome::unregistered(&report.author), None);
        };
        let body = match report_body(&self.world, author.role, report) {
            Ok(b) => b,
            Err(e) => return (ReportOutcome::invalid(e), None),
        };
        match self.commit(report.at, author, body) {
            Ok(ev) => (ReportOutcome::Accepted { seq: ev.seq }, Some(ev)),
            Err(CommitError::Store(e)) if e.is_retriable() => {
                (ReportOutcome::Rejected { reason: "storage".into(), detail: e.to_string() }, None)
            }
            Err(e) => (ReportOutcome::invalid(e.to_string()), None),
        }
    }

    pub fn submit_feedback(&mut self, at: u64, author: &str, rating: i64, text: &str) -> Result<u64, CoordError> {
        let author = self.author_of(author)?;
        let ev = self
            .commit(at, author, EventBody::FeedbackSubmitted { rating, text: text.into() })
            .map_err(CommitError::into_validation)?;
        Ok(ev.seq)
    }

    /// Logs a bulletin; public ones also go to the outbound sink.
    pub fn publish_bulletin(&mut self, at: u64, author: Author, audience: Audience, text: &str) -> Result<u64, CoordError> {
        if author.role != Role::System {
            self.require_role(&author.id, Role::DecisionMaker)?;
        }
        let ev = self
            .commit(at, author, EventBody::BulletinPublished { audience, text: text.into() })
            .map_err(CommitError::into_validation)?;
        if audience == Audience::Public {
            self.bulletins
                .publish(&Bulletin { seq: ev.seq, at, audience, text: text.into() })
                .map_err(|e| CoordError::Store(StoreError::Io(e)))?;
        }
        Ok(ev.seq)
    }

    pub fn set_unit_status(
        &mut self,
        at: u64,
        author: &str,
        unit_id: &str,
        availability: Availability,
    ) -> Result<ContextEvent, CoordError> {
        let author = self.author_of(author)?;
        if self.world.unit(unit_id).is_none() {
            return Err(CoordError::NotFound(format!("no unit {unit_id}")));
        }
        self.commit(at, author, EventBody::UnitStatusChanged { unit_id: unit_id.into(), availability, note: None })
            .map_err(CommitError::into_state)
    }

    /// Marks a point evacuated. `evacuated` defaults to its current demand.
    pub fn clear_point(&mut self, at: u64, decider: &str, point_id: &str, evacuated: Option<u32>) -> Result<u64, CoordError> {
        let author = self.require_role(decider, Role::DecisionMaker)?;
        let point = self.world.point(point_id).ok_or_else(|| CoordError::NotFound(format!("no point {point_id}")))?;
        let evacuated = i64::from(evacuated.unwrap_or(point.demand));
        let ev = self
            .commit(at, author, EventBody::PointCleared { point_id: point_id.into(), evacuated })
            .map_err(CommitError::into_state)?;
        Ok(ev.seq)
    }

    fn note_degraded(&mut self, at: u64, degraded: &[String]) -> Result<(), CoordError> {
        if degraded.is_empty() {
            return Ok(());
        }
        let text = format!("routing degraded to offline estimates for {} pairs: {}", degraded.len(), degraded[0]);
        self.publish_bulletin(at, Author::system(PLANNER), Audience::DecisionMakers, &text)?;
        Ok(())
    }

    fn instance(
        &mut self,
        at: u64,
        only_points: Option<&BTreeSet<String>>,
        also_units: &BTreeSet<String>,
        record_degraded: bool,
    ) -> Result<AssignmentInstance, CoordError> {
        let (inst, degraded) = AssignmentInstance::from_world(&self.world, only_points, also_units, &self.router, self.weights)?;
        if record_degraded {
            self.note_degraded(at, &degraded)?;
        }
        Ok(inst)
    }

    /// Current assignment instance, without recording anything.
    pub fn current_instance(&self) -> Result<AssignmentInstance, CoordError> {
        Ok(AssignmentInstance::from_world(&self.world, None, &BTreeSet::new(), &self.router, self.weights)?.0)
    }

    fn next_plan_id(&self) -> String {
        (self.world.plans.len() + 1..)
            .map(|n| format!("plan-{n}"))
            .find(|id| !self.world.plans.contains_key(id))
            .expect("unbounded search")
    }

    /// Recommends a plan over the open points (or just `only_points`). The
    /// exact solver is used when the instance fits its size guard. A dry run
    /// returns the plan without logging anything.
    pub fn propose_plan(
        &mut self,
        at: u64,
        decider: &str,
        only_points: Option<&BTreeSet<String>>,
        dry_run: bool,
    ) -> Result<AssignmentPlan, CoordError> {
        let author = self.require_role(decider, Role::DecisionMaker)?;
        if let Some(ids) = only_points {
            if let Some(missing) = ids.iter().find(|id| self.world.point(id).is_none()) {
                return Err(CoordError::Validation(format!("unknown point {missing}")));
            }
        }
        let inst = self.instance(at, only_points, &BTreeSet::new(), !dry_run)?;
        let mut plan = if inst.units.len() <= EXACT_MAX_UNITS && inst.points.len() <= EXACT_MAX_POINTS {
            recommend::solve_exact(&inst).expect("within guard")
        } else {
            recommend::solve_greedy(&inst)
        };
        if dry_run {
            plan.id = "dry-run".into();
            return Ok(plan);
        }
        plan.id = self.next_plan_id();
        plan.supersedes = self.world.current_plan.clone();
        self.commit(at, author, EventBody::PlanProposed { plan: plan.clone() })
            .map_err(CommitError::into_state)?;
        Ok(plan)
    }

    pub fn plan(&self, plan_id: &str) -> Option<&AssignmentPlan> {
        self.world.plans.get(plan_id)
    }

    /// Dispatches the listed units of a proposed plan: one `PlanDispatched`
    /// then one `UnitStatusChanged` per unit.
    pub fn dispatch(&mut self, at: u64, decider: &str, plan_id: &str, unit_ids: &[String]) -> Result<DispatchOutcome, CoordError> {
        let author = self.require_role(decider, Role::DecisionMaker)?;
        let plan = self.world.plans.get(plan_id).ok_or_else(|| CoordError::NotFound(format!("no plan {plan_id}")))?;
        if unit_ids.is_empty() {
            return Err(CoordError::Validation("no units to dispatch".into()));
        }
        if BTreeSet::from_iter(unit_ids).len() != unit_ids.len() {
            return Err(CoordError::Validation("unit listed twice".into()));
        }
        let mut dispatches = Vec::with_capacity(unit_ids.len());
        let mut notices = Vec::with_capacity(unit_ids.len());
        for unit_id in unit_ids {
            let a = plan
                .assignments
                .get(unit_id)
                .ok_or_else(|| CoordError::Validation(format!("unit {unit_id} is not in plan {plan_id}")))?;
            if a.dispatched {
                return Err(CoordError::State(format!("unit {unit_id} already dispatched")));
            }
            let unit = self.world.unit(unit_id).expect("planned units exist");
            if !unit.is_eligible() {
                return Err(CoordError::State(format!("unit {unit_id} is not available")));
            }
            let point = self
                .world
                .point(&a.point_id)
                .ok_or_else(|| CoordError::State(format!("point {} is gone", a.point_id)))?;
            dispatches.push(Dispatch {
                unit_id: unit_id.clone(),
                point_id: a.point_id.clone(),
                travel_time_s: a.travel_time_s,
                seats: a.seats,
            });
            notices.push(DriverNotice {
                unit_id: unit_id.clone(),
                point_id: a.point_id.clone(),
                origin: unit.location,
                destination: point.location,
                travel_time_s: a.travel_time_s,
            });
        }
        let mut seqs = Vec::new();
        let ev = self
            .commit(at, author.clone(), EventBody::PlanDispatched { plan_id: plan_id.into(), dispatches })
            .map_err(CommitError::into_state)?;
        seqs.push(ev.seq);
        for unit_id in unit_ids {
            let ev = self
                .commit(
                    at,
                    author.clone(),
                    EventBody::UnitStatusChanged {
                        unit_id: unit_id.clone(),
                        availability: Availability::Dispatched,
                        note: Some(format!("dispatched under {plan_id}")),
                    },
                )
                .map_err(CommitError::into_state)?;
            seqs.push(ev.seq);
        }
        Ok(DispatchOutcome { seqs, notices })
    }

    /// Re-plans the current plan against the present world. Returns `None`
    /// when there is no plan or nothing changes. Released units are made
    /// available again before the new plan is logged.
    pub fn replan_current(&mut self, at: u64) -> Result<Option<ReplanOutcome>, CoordError> {
        let Some(current) = self.world.current_plan().cloned() else {
            return Ok(None);
        };
        let dispatched: BTreeSet<String> = current
            .assignments
            .iter()
            .filter(|(u, a)| {
                a.dispatched && self.world.unit(u).is_some_and(|u| u.availability == Availability::Dispatched)
            })
            .map(|(u, _)| u.clone())
            .collect();
        let inst = self.instance(at, None, &dispatched, true)?;
        let mut plan = recommend::replan(&current, &inst);
        if plan.id == current.id {
            return Ok(None);
        }

        let mut seqs = Vec::new();
        for unit_id in &plan.released {
            if self.world.unit(unit_id).is_some_and(|u| u.availability == Availability::Dispatched) {
                let ev = self
                    .commit(
                        at,
                        Author::system(PLANNER),
                        EventBody::UnitStatusChanged {
                            unit_id: unit_id.clone(),
                            availability: Availability::Available,
                            note: Some(format!("released from {}: approach unreachable", current.id)),
                        },
                    )
                    .map_err(CommitError::into_state)?;
                seqs.push(ev.seq);
            }
        }
        plan.id = self.next_plan_id();
        let ev = self
            .commit(at, Author::system(PLANNER), EventBody::PlanProposed { plan: plan.clone() })
            .map_err(CommitError::into_state)?;
        seqs.push(ev.seq);
        let released = plan.released.clone();
        Ok(Some(ReplanOutcome { plan, released, seqs }))
    }

    /// Synthesis over `from..=to` (inclusive sequence numbers).
    pub fn synthesis(&self, from: u64, to: u64) -> SynthesisReport {
        build_synthesis(self.log.window(from, to))
    }
}

#[derive(Debug, Error)]
enum CommitError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Rejected(#[from] TransitionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl CommitError {
    /// Refused transitions are conflicts with the current state.
    fn into_state(self) -> CoordError {
        match self {
            CommitError::Invalid(v) => CoordError::Validation(v.to_string()),
            CommitError::Rejected(r) => CoordError::State(r.0),
            CommitError::Store(s) => s.into(),
        }
    }

    /// Refused transitions are malformed requests.
    fn into_validation(self) -> CoordError {
        match self {
            CommitError::Invalid(v) => CoordError::Validation(v.to_string()),
            CommitError::Rejected(r) => CoordError::Validation(r.0),
            CommitError::Store(s) => s.into(),
        }
    }
}
