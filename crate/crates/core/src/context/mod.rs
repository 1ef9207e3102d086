//! The participant-facing side: who may report what, and what they hear back.

pub mod roles;
pub mod synthesis;

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{GeoPoint, Priority, Qualification, Role, RoadClosure, TransportMode, Vehicle, WorldState};
use crate::store::{apply, Audience, ContextEvent, EventBody, EventKind, NeedTag, PointClaim};

pub use roles::{can_author, notifications_for, receives, Notification, NotificationFilter, Viewer};
pub use synthesis::{build_synthesis, SynthesisReport};

/// What a would-be volunteer driver submits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverApplication {
    /// Requested unit id; assigned by the platform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_id: Option<String>,
    pub driver_name: String,
    pub contact: String,
    pub location: GeoPoint,
    pub vehicle: Vehicle,
    #[serde(default)]
    pub experience_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applicant {
    pub name: String,
    pub contact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub unit_id: String,
    pub applicant: Applicant,
    pub vehicle: Vehicle,
    pub experience_note: String,
    pub status: Qualification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportSubject {
    Point {
        point_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<GeoPoint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        priority: Option<Priority>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accessible_modes: Option<BTreeSet<TransportMode>>,
    },
    Closure {
        closure: RoadClosure,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportClaim {
    DemandUpdate { demand: i64, special_needs: i64 },
    Closure,
    Reopening,
    NeedNote { text: String, #[serde(default)] tags: BTreeSet<NeedTag> },
}

/// A field report from a registered participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldReport {
    pub author: String,
    pub at: u64,
    pub subject: ReportSubject,
    pub claim: ReportClaim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ReportOutcome {
    Accepted { seq: u64 },
    Rejected { reason: String, detail: String },
}

impl ReportOutcome {
    pub fn unregistered(who: &str) -> Self {
        ReportOutcome::Rejected { reason: "unregistered".into(), detail: format!("unknown author {who}") }
    }

    pub fn invalid(detail: impl Into<String>) -> Self {
        ReportOutcome::Rejected { reason: "invalid".into(), detail: detail.into() }
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            ReportOutcome::Accepted { seq } => Some(*seq),
            ReportOutcome::Rejected { .. } => None,
        }
    }
}

/// Maps a report to the event body it produces, or explains why it is
/// malformed. Decision-makers' demand updates on known points become
/// `DemandUpdated`; everyone else's become `PointReported`.
pub fn report_body(world: &WorldState, role: Role, report: &FieldReport) -> Result<EventBody, String> {
    match (&report.subject, &report.claim) {
        (ReportSubject::Point { point_id, location, priority, accessible_modes }, claim) => {
            let claim = match claim {
                ReportClaim::DemandUpdate { demand, special_needs } => {
                    PointClaim::DemandUpdate { demand: *demand, special_needs: *special_needs }
                }
                ReportClaim::NeedNote { text, tags } => PointClaim::NeedNote { text: text.clone(), tags: tags.clone() },
                ReportClaim::Closure | ReportClaim::Reopening => {
                    return Err("closure claims need a closure subject".into());
                }
            };
            let known = world.point(point_id).is_some();
            match claim {
                PointClaim::DemandUpdate { demand, special_needs }
                    if known && role == Role::DecisionMaker && location.is_none() && accessible_modes.is_none() =>
                {
                    Ok(EventBody::DemandUpdated { point_id: point_id.clone(), demand, special_needs, priority: *priority })
                }
                claim => Ok(EventBody::PointReported {
                    point_id: point_id.clone(),
                    location: *location,
                    priority: *priority,
                    accessible_modes: accessible_modes.clone(),
                    claim: Some(claim),
                }),
            }
        }
        (ReportSubject::Closure { closure }, ReportClaim::Closure) => {
            Ok(EventBody::RoadClosed { closure: closure.clone() })
        }
        (ReportSubject::Closure { closure }, ReportClaim::Reopening) => {
            Ok(EventBody::RoadReopened { closure: closure.clone() })
        }
        (ReportSubject::Closure { .. }, _) => Err("closure subjects take closure or reopening claims".into()),
    }
}

/// Whether an event should trigger re-planning.
pub fn should_replan(ev: &ContextEvent) -> bool {
    match &ev.body {
        EventBody::PointReported { claim, .. } => matches!(claim, Some(PointClaim::DemandUpdate { .. })),
        b => matches!(
            b.kind(),
            EventKind::DemandUpdated | EventKind::RoadClosed | EventKind::RoadReopened | EventKind::UnitStatusChanged
        ),
    }
}

/// Sequence numbers of events whose non-system author was not a registered
/// participant at the moment the event was logged.
pub fn restriction_violations(initial: &WorldState, events: &[ContextEvent]) -> Vec<u64> {
    let mut world = initial.clone();
    let mut bad = Vec::new();
    for ev in events {
        if ev.author.role != Role::System && !world.is_registered(&ev.author.id, ev.author.role) {
            bad.push(ev.seq);
        }
        let _ = apply(&mut world, ev);
    }
    bad
}

/// An outbound public bulletin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bulletin {
    pub seq: u64,
    pub at: u64,
    pub audience: Audience,
    pub text: String,
}

/// Where public bulletins are published.
pub trait BulletinSink: Send + Sync {
    fn publish(&mut self, bulletin: &Bulletin) -> io::Result<()>;
}

/// Discards bulletins.
#[derive(Debug, Default)]
pub struct NoBulletins;

impl BulletinSink for NoBulletins {
    fn publish(&mut self, _: &Bulletin) -> io::Result<()> {
        Ok(())
    }
}

/// Appends bulletins to a newline-delimited JSON file.
#[derive(Debug)]
pub struct BulletinFile {
    file: File,
}

impl BulletinFile {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self { file: OpenOptions::new().create(true).append(true).open(path)? })
    }
}

impl BulletinSink for BulletinFile {
    fn publish(&mut self, bulletin: &Bulletin) -> io::Result<()> {
        let line = serde_json::to_string(bulletin).map_err(io::Error::other)?;
        writeln!(self.file, "{line}")?;
        self.file.flush()
    }
}
