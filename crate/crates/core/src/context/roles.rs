//! Who may author which event kinds, and who hears about them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::Role;
use crate::store::{Audience, ContextEvent, EventBody, EventKind};

/// Whether `role` may author events of `kind`.
pub fn can_author(role: Role, kind: EventKind) -> bool {
    use EventKind::*;
    match role {
        Role::System => true,
        Role::DecisionMaker => kind != DriverRegistered,
        Role::Driver => matches!(kind, PointReported | RoadClosed | RoadReopened | UnitStatusChanged | FeedbackSubmitted),
        Role::Affected => matches!(kind, PointReported | RoadClosed | FeedbackSubmitted),
    }
}

/// Whether `role` can ever receive a notification of `kind`.
pub fn receives(role: Role, kind: EventKind) -> bool {
    use EventKind::*;
    match role {
        Role::DecisionMaker => true,
        Role::Driver => matches!(kind, RegistrationVetted | PlanDispatched | UnitStatusChanged | BulletinPublished),
        Role::Affected => matches!(kind, PointReported | DemandUpdated | PointCleared | PlanDispatched | BulletinPublished),
        Role::System => false,
    }
}

/// A role-filtered projection of one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Notification {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewer {
    pub id: String,
    pub role: Role,
}

/// Stateful per-viewer filter. Feed it every event in seq order; it
/// remembers which points an affected person reported so later updates on
/// those points reach them.
#[derive(Debug, Clone)]
pub struct NotificationFilter {
    viewer: Viewer,
    reported_points: BTreeSet<String>,
}

impl NotificationFilter {
    pub fn new(viewer: Viewer) -> Self {
        Self { viewer, reported_points: BTreeSet::new() }
    }

    pub fn viewer(&self) -> &Viewer {
        &self.viewer
    }

    pub fn reported_points(&self) -> &BTreeSet<String> {
        &self.reported_points
    }

    pub fn observe(&mut self, ev: &ContextEvent) -> Option<Notification> {
        let body = self.project(ev)?;
        debug_assert!(receives(self.viewer.role, body.kind()));
        Some(Notification { seq: ev.seq, at: ev.at, body })
    }

    fn project(&mut self, ev: &ContextEvent) -> Option<EventBody> {
        let me = self.viewer.id.as_str();
        match self.viewer.role {
            Role::DecisionMaker => Some(ev.body.clone()),
            Role::System => None,
            Role::Driver => match &ev.body {
                EventBody::RegistrationVetted { unit_id, .. } | EventBody::UnitStatusChanged { unit_id, .. }
                    if unit_id == me =>
                {
                    Some(ev.body.clone())
                }
                EventBody::PlanDispatched { plan_id, dispatches } => {
                    let mine: Vec<_> = dispatches.iter().filter(|d| d.unit_id == me).cloned().collect();
                    (!mine.is_empty()).then(|| EventBody::PlanDispatched { plan_id: plan_id.clone(), dispatches: mine })
                }
                EventBody::BulletinPublished { audience: Audience::Public, .. } => Some(ev.body.clone()),
                _ => None,
            },
            Role::Affected => match &ev.body {
                EventBody::PointReported { point_id, .. } => {
                    if ev.author.id == me && ev.author.role == Role::Affected {
                        self.reported_points.insert(point_id.clone());
                    }
                    self.reported_points.contains(point_id).then(|| ev.body.clone())
                }
                EventBody::DemandUpdated { point_id, .. } | EventBody::PointCleared { point_id, .. } => {
                    self.reported_points.contains(point_id).then(|| ev.body.clone())
                }
                EventBody::PlanDispatched { plan_id, dispatches } => {
                    let mine: Vec<_> = dispatches
                        .iter()
                        .filter(|d| self.reported_points.contains(&d.point_id))
                        .cloned()
                        .collect();
                    (!mine.is_empty()).then(|| EventBody::PlanDispatched { plan_id: plan_id.clone(), dispatches: mine })
                }
                EventBody::BulletinPublished { audience: Audience::Public, .. } => Some(ev.body.clone()),
                _ => None,
            },
        }
    }
}

/// Notifications for `viewer` with `seq >= from`, computed over the full
/// history so that earlier reports still scope what the viewer sees.
pub fn notifications_for(viewer: &Viewer, events: &[ContextEvent], from: u64) -> Vec<Notification> {
    let mut filter = NotificationFilter::new(viewer.clone());
    events
        .iter()
        .filter_map(|ev| filter.observe(ev).filter(|_| ev.seq >= from))
        .collect()
}
