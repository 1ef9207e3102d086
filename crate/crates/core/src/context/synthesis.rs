//! Post-crisis synthesis report, a pure function of a log slice.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::store::{ContextEvent, EventBody, EventKind, PointClaim};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub people_evacuated: u64,
    pub points_cleared: u64,
    pub units_dispatched: u64,
    /// Mean estimated travel time of dispatched units; `None` without dispatches.
    pub mean_response_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDigest {
    pub seq: u64,
    pub at: u64,
    pub kind: EventKind,
    pub author: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeedbackDigest {
    pub count: u64,
    /// rating -> number of submissions
    pub histogram: BTreeMap<u8, u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthesisReport {
    /// `[seq_from, seq_to]` of the slice, `[0, 0]` when empty.
    pub window: [u64; 2],
    pub totals: Totals,
    pub timeline: Vec<EventDigest>,
    pub feedback_digest: FeedbackDigest,
}

fn summarize(body: &EventBody) -> String {
    match body {
        EventBody::DriverRegistered(app) => format!(
            "{} registered {} ({} seats)",
            app.driver_name,
            app.unit_id,
            app.vehicle.capacity.saturating_sub(1)
        ),
        EventBody::RegistrationVetted { unit_id, verdict } => format!("{unit_id} {verdict:?}").to_lowercase(),
        EventBody::PointReported { point_id, claim, .. } => match claim {
            Some(PointClaim::DemandUpdate { demand, special_needs }) => {
                format!("{point_id} reports {demand} people ({special_needs} special needs)")
            }
            Some(PointClaim::NeedNote { tags, .. }) => {
                let tags: Vec<&str> = tags.iter().map(|t| t.as_str()).collect();
                format!("{point_id} needs [{}]", tags.join(","))
            }
            None => format!("{point_id} reported"),
        },
        EventBody::DemandUpdated { point_id, demand, special_needs, .. } => {
            format!("{point_id} demand set to {demand} ({special_needs} special needs)")
        }
        EventBody::RoadClosed { closure } => format!("approach to {} closed for {}", closure.point_id, closure.mode),
        EventBody::RoadReopened { closure } => format!("approach to {} reopened for {}", closure.point_id, closure.mode),
        EventBody::UnitStatusChanged { unit_id, availability, .. } => {
            format!("{unit_id} now {availability:?}").to_lowercase()
        }
        EventBody::PlanProposed { plan } => format!("{} proposes {} assignments", plan.id, plan.assignments.len()),
        EventBody::PlanDispatched { plan_id, dispatches } => {
            format!("{plan_id} dispatched {} units", dispatches.len())
        }
        EventBody::PointCleared { point_id, evacuated } => format!("{point_id} cleared, {evacuated} evacuated"),
        EventBody::FeedbackSubmitted { rating, .. } => format!("feedback rated {rating}"),
        EventBody::BulletinPublished { text, .. } => format!("bulletin: {text}"),
    }
}

pub fn build_synthesis(events: &[ContextEvent]) -> SynthesisReport {
    let mut units = BTreeSet::new();
    let mut cleared = BTreeSet::new();
    let mut evacuated = 0u64;
    let mut response = Vec::new();
    let mut feedback = FeedbackDigest::default();

    for ev in events {
        match &ev.body {
            EventBody::PlanDispatched { dispatches, .. } => {
                for d in dispatches {
                    units.insert(d.unit_id.as_str());
                    response.push(d.travel_time_s);
                }
            }
            EventBody::PointCleared { point_id, evacuated: n } => {
                if cleared.insert(point_id.as_str()) {
                    evacuated += u64::try_from(*n).unwrap_or(0);
                }
            }
            EventBody::FeedbackSubmitted { rating, .. } => {
                feedback.count += 1;
                if let Ok(r) = u8::try_from(*rating) {
                    *feedback.histogram.entry(r).or_default() += 1;
                }
            }
            _ => {}
        }
    }

    let mean_response_s =
        (!response.is_empty()).then(|| response.iter().sum::<u64>() as f64 / response.len() as f64);

    SynthesisReport {
        window: match (events.first(), events.last()) {
            (Some(a), Some(b)) => [a.seq, b.seq],
            _ => [0, 0],
        },
        totals: Totals {
            people_evacuated: evacuated,
            points_cleared: cleared.len() as u64,
            units_dispatched: units.len() as u64,
            mean_response_s,
        },
        timeline: events
            .iter()
            .map(|ev| EventDigest {
                seq: ev.seq,
                at: ev.at,
                kind: ev.kind(),
                author: ev.author.id.clone(),
                summary: summarize(&ev.body),
            })
            .collect(),
        feedback_digest: feedback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Role;
    use crate::store::{Author, Dispatch};

    fn ev(seq: u64, body: EventBody) -> ContextEvent {
        ContextEvent { seq, at: seq * 10, author: Author::new("dm", Role::DecisionMaker), body }
    }

    fn dispatch(unit: &str, point: &str, seats: u32, t: u64) -> Dispatch {
        Dispatch { unit_id: unit.into(), point_id: point.into(), travel_time_s: t, seats }
    }

    #[test]
    fn empty_slice_is_all_zero() {
        let r = build_synthesis(&[]);
        assert_eq!(r.totals, Totals::default());
        assert_eq!(r.window, [0, 0]);
        assert!(r.timeline.is_empty());
        assert_eq!(r.feedback_digest.count, 0);
    }

    #[test]
    fn counts_distinct_units_and_cleared_points() {
        let events = [
            ev(1, EventBody::PlanDispatched { plan_id: "p1".into(), dispatches: vec![dispatch("U1", "R1", 8, 300)] }),
            ev(2, EventBody::PlanDispatched { plan_id: "p1".into(), dispatches: vec![dispatch("U2", "R2", 5, 500)] }),
            ev(3, EventBody::PointCleared { point_id: "R1".into(), evacuated: 8 }),
            ev(4, EventBody::PointCleared { point_id: "R2".into(), evacuated: 5 }),
        ];
        let r = build_synthesis(&events);
        assert_eq!(r.totals.units_dispatched, 2);
        assert_eq!(r.totals.points_cleared, 2);
        assert_eq!(r.totals.people_evacuated, 13);
        assert_eq!(r.totals.mean_response_s, Some(400.0));
        assert_eq!(r.window, [1, 4]);
        assert_eq!(r.timeline.len(), 4);
    }

    #[test]
    fn feedback_histogram() {
        let fb = |seq, rating| ev(seq, EventBody::FeedbackSubmitted { rating, text: "ok".into() });
        let r = build_synthesis(&[fb(1, 3), fb(2, 3), fb(3, 5)]);
        assert_eq!(r.feedback_digest.count, 3);
        assert_eq!(r.feedback_digest.histogram, BTreeMap::from([(3, 2), (5, 1)]));
        assert_eq!(build_synthesis(&[fb(1, 5)]).feedback_digest.histogram[&5], 1);
    }

    #[test]
    fn is_pure() {
        let events = [ev(1, EventBody::PointCleared { point_id: "R1".into(), evacuated: 2 })];
        let a = serde_json::to_string(&build_synthesis(&events)).unwrap();
        let b = serde_json::to_string(&build_synthesis(&events)).unwrap();
        assert_eq!(a, b);
    }
}
