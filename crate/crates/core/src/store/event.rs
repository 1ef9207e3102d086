//! Context events: the only way the world changes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Availability, GeoPoint, Priority, Role, RoadClosure, TransportMode, Vehicle};
use crate::error::ValidationError;
use crate::plan::AssignmentPlan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub id: String,
    pub role: Role,
}

impl Author {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        Self { id: id.into(), role }
    }

    pub fn system(id: impl Into<String>) -> Self {
        Self::new(id, Role::System)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    DriverRegistered,
    RegistrationVetted,
    PointReported,
    DemandUpdated,
    RoadClosed,
    RoadReopened,
    UnitStatusChanged,
    PlanProposed,
    PlanDispatched,
    PointCleared,
    FeedbackSubmitted,
    BulletinPublished,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::DriverRegistered,
        EventKind::RegistrationVetted,
        EventKind::PointReported,
        EventKind::DemandUpdated,
        EventKind::RoadClosed,
        EventKind::RoadReopened,
        EventKind::UnitStatusChanged,
        EventKind::PlanProposed,
        EventKind::PlanDispatched,
        EventKind::PointCleared,
        EventKind::FeedbackSubmitted,
        EventKind::BulletinPublished,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DriverRegistered => "DriverRegistered",
            EventKind::RegistrationVetted => "RegistrationVetted",
            EventKind::PointReported => "PointReported",
            EventKind::DemandUpdated => "DemandUpdated",
            EventKind::RoadClosed => "RoadClosed",
            EventKind::RoadReopened => "RoadReopened",
            EventKind::UnitStatusChanged => "UnitStatusChanged",
            EventKind::PlanProposed => "PlanProposed",
            EventKind::PlanDispatched => "PlanDispatched",
            EventKind::PointCleared => "PointCleared",
            EventKind::FeedbackSubmitted => "FeedbackSubmitted",
            EventKind::BulletinPublished => "BulletinPublished",
        }
    }

    /// Kinds that change the world state (everything except feedback and
    /// bulletins, which are recorded but leave the world untouched).
    pub fn mutates_world(self) -> bool {
        !matches!(self, EventKind::FeedbackSubmitted | EventKind::BulletinPublished)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeedTag {
    Medical,
    Food,
    Water,
    Shelter,
}

impl NeedTag {
    pub fn as_str(self) -> &'static str {
        match self {
            NeedTag::Medical => "medical",
            NeedTag::Food => "food",
            NeedTag::Water => "water",
            NeedTag::Shelter => "shelter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Public,
    DecisionMakers,
}

/// A driver's application, as recorded at registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub unit_id: String,
    pub driver_name: String,
    pub contact: String,
    pub location: GeoPoint,
    pub vehicle: Vehicle,
    #[serde(default)]
    pub experience_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PointClaim {
    DemandUpdate { demand: i64, special_needs: i64 },
    NeedNote { text: String, tags: BTreeSet<NeedTag> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    pub unit_id: String,
    pub point_id: String,
    pub travel_time_s: u64,
    pub seats: u32,
}

/// Kind tag plus kind-specific payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    DriverRegistered(Application),
    RegistrationVetted {
        unit_id: String,
        verdict: Verdict,
    },
    PointReported {
        point_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<GeoPoint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        priority: Option<Priority>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accessible_modes: Option<BTreeSet<TransportMode>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        claim: Option<PointClaim>,
    },
    DemandUpdated {
        point_id: String,
        demand: i64,
        special_needs: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        priority: Option<Priority>,
    },
    RoadClosed {
        closure: RoadClosure,
    },
    RoadReopened {
        closure: RoadClosure,
    },
    UnitStatusChanged {
        unit_id: String,
        availability: Availability,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    PlanProposed {
        plan: AssignmentPlan,
    },
    PlanDispatched {
        plan_id: String,
        dispatches: Vec<Dispatch>,
    },
    PointCleared {
        point_id: String,
        evacuated: i64,
    },
    FeedbackSubmitted {
        rating: i64,
        #[serde(default)]
        text: String,
    },
    BulletinPublished {
        audience: Audience,
        text: String,
    },
}

fn non_negative(field: &str, v: i64) -> Result<(), ValidationError> {
    if v < 0 {
        Err(ValidationError::new(field, format!("must be non-negative, got {v}")))
    } else if v > i64::from(u32::MAX) {
        Err(ValidationError::new(field, format!("too large: {v}")))
    } else {
        Ok(())
    }
}

fn non_empty(field: &str, v: &str) -> Result<(), ValidationError> {
    if v.trim().is_empty() {
        Err(ValidationError::new(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn demand_pair(demand: i64, special_needs: i64) -> Result<(), ValidationError> {
    non_negative("demand", demand)?;
    non_negative("special_needs", special_needs)?;
    if special_needs > demand {
        return Err(ValidationError::new("special_needs", "exceeds demand"));
    }
    Ok(())
}

pub(crate) fn validate_vehicle(v: &Vehicle) -> Result<(), ValidationError> {
    non_empty("vehicle.id", &v.id)?;
    if v.capacity < 1 {
        return Err(ValidationError::new("vehicle.capacity", "must be at least 1"));
    }
    Ok(())
}

fn validate_location(field: &str, p: &GeoPoint) -> Result<(), ValidationError> {
    if p.is_valid() {
        Ok(())
    } else {
        Err(ValidationError::new(field, "coordinates out of range"))
    }
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::DriverRegistered(_) => EventKind::DriverRegistered,
            EventBody::RegistrationVetted { .. } => EventKind::RegistrationVetted,
            EventBody::PointReported { .. } => EventKind::PointReported,
            EventBody::DemandUpdated { .. } => EventKind::DemandUpdated,
            EventBody::RoadClosed { .. } => EventKind::RoadClosed,
            EventBody::RoadReopened { .. } => EventKind::RoadReopened,
            EventBody::UnitStatusChanged { .. } => EventKind::UnitStatusChanged,
            EventBody::PlanProposed { .. } => EventKind::PlanProposed,
            EventBody::PlanDispatched { .. } => EventKind::PlanDispatched,
            EventBody::PointCleared { .. } => EventKind::PointCleared,
            EventBody::FeedbackSubmitted { .. } => EventKind::FeedbackSubmitted,
            EventBody::BulletinPublished { .. } => EventKind::BulletinPublished,
        }
    }

    /// Schema check of the payload alone, without looking at the world.
    pub fn validate(&self) -> Result<(), ValidationError> {
        match self {
            EventBody::DriverRegistered(app) => {
                non_empty("unit_id", &app.unit_id)?;
                non_empty("driver_name", &app.driver_name)?;
                non_empty("contact", &app.contact)?;
                validate_location("location", &app.location)?;
                validate_vehicle(&app.vehicle)
            }
            EventBody::RegistrationVetted { unit_id, .. } => non_empty("unit_id", unit_id),
            EventBody::PointReported { point_id, location, claim, accessible_modes, .. } => {
                non_empty("point_id", point_id)?;
                if let Some(loc) = location {
                    validate_location("location", loc)?;
                }
                if accessible_modes.as_ref().is_some_and(BTreeSet::is_empty) {
                    return Err(ValidationError::new("accessible_modes", "must not be empty"));
                }
                match claim {
                    Some(PointClaim::DemandUpdate { demand, special_needs }) => {
                        demand_pair(*demand, *special_needs)
                    }
                    Some(PointClaim::NeedNote { text, .. }) => non_empty("claim.text", text),
                    None => Ok(()),
                }
            }
            EventBody::DemandUpdated { point_id, demand, special_needs, .. } => {
                non_empty("point_id", point_id)?;
                demand_pair(*demand, *special_needs)
            }
            EventBody::RoadClosed { closure } | EventBody::RoadReopened { closure } => {
                non_empty("closure.point_id", &closure.point_id)?;
                if let Some(u) = &closure.unit_id {
                    non_empty("closure.unit_id", u)?;
                }
                Ok(())
            }
            EventBody::UnitStatusChanged { unit_id, .. } => non_empty("unit_id", unit_id),
            EventBody::PlanProposed { plan } => {
                non_empty("plan.id", &plan.id)?;
                let mut seen = BTreeSet::new();
                for (unit, a) in &plan.assignments {
                    if !seen.insert(unit) {
                        return Err(ValidationError::new("plan.assignments", "unit repeated"));
                    }
                    non_empty("plan.assignments.point_id", &a.point_id)?;
                }
                Ok(())
            }
            EventBody::PlanDispatched { plan_id, dispatches } => {
                non_empty("plan_id", plan_id)?;
                if dispatches.is_empty() {
                    return Err(ValidationError::new("dispatches", "must not be empty"));
                }
                let mut seen = BTreeSet::new();
                for d in dispatches {
                    if !seen.insert(&d.unit_id) {
                        return Err(ValidationError::new("dispatches", "unit repeated"));
                    }
                }
                Ok(())
            }
            EventBody::PointCleared { point_id, evacuated } => {
                non_empty("point_id", point_id)?;
                non_negative("evacuated", *evacuated)
            }
            EventBody::FeedbackSubmitted { rating, .. } => {
                if (1..=5).contains(rating) {
                    Ok(())
                } else {
                    Err(ValidationError::new("rating", format!("must be 1..5, got {rating}")))
                }
            }
            EventBody::BulletinPublished { text, .. } => non_empty("text", text),
        }
    }
}

/// An event as handed to the store, before it has a sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewEvent {
    pub at: u64,
    pub author: Author,
    #[serde(flatten)]
    pub body: EventBody,
}

impl NewEvent {
    pub fn new(at: u64, author: Author, body: EventBody) -> Self {
        Self { at, author, body }
    }

    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

/// An appended, immutable event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEvent {
    pub seq: u64,
    pub at: u64,
    pub author: Author,
    #[serde(flatten)]
    pub body: EventBody,
}

impl ContextEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    pub fn with_seq(seq: u64, ev: NewEvent) -> Self {
        Self { seq, at: ev.at, author: ev.author, body: ev.body }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}
