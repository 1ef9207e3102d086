//! Random operation sessions driven through the coordinator, for
//! event-sourcing and restriction checks.

use std::collections::BTreeSet;

use corec_core::context::{DriverApplication, FieldReport, ReportClaim, ReportSubject};
use corec_core::domain::{
    Availability, GeoPoint, Participant, Priority, RoadClosure, Role, Shelter, TransportMode, Vehicle, WorldState,
};
use corec_core::store::{Audience, Author, NeedTag, Verdict};
use corec_core::Coordinator;
use rand::Rng;

use super::gen;

pub const DM: &str = "dm-1";
pub const AFFECTED: [&str; 2] = ["aff-1", "aff-2"];

pub fn initial_world() -> WorldState {
    let mut w = WorldState::default();
    let base = GeoPoint::new(49.4179, 2.8261);
    for (i, pr) in [Priority::High, Priority::Medium, Priority::Low].into_iter().enumerate() {
        let loc = GeoPoint::new(base.lat + 0.01 * i as f64, base.lon - 0.008 * i as f64);
        let mut p = gen::point(&format!("R{}", i + 1), pr, 4 + 3 * i as u32, (i == 0) as u32, loc);
        if i == 2 {
            p.accessible_modes.insert(TransportMode::Water);
        }
        w.rescue_points.push(p);
    }
    w.shelters.push(Shelter {
        id: "S1".into(),
        location: GeoPoint::new(49.41, 2.84),
        capacity: 200,
        occupancy: 0,
        attributes: Default::default(),
    });
    w.participants.push(Participant { id: DM.into(), role: Role::DecisionMaker, name: "duty officer".into() });
    for a in AFFECTED {
        w.participants.push(Participant { id: a.into(), role: Role::Affected, name: a.into() });
    }
    w
}

fn pick<'a, T>(r: &mut impl Rng, items: &'a [T]) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[r.random_range(0..items.len())])
}

/// Applies `steps` random operations. Failures are expected and ignored;
/// only what the coordinator accepts reaches the log.
pub fn drive(c: &mut Coordinator, r: &mut impl Rng, steps: usize) {
    let mut at = c.world().clock;
    for _ in 0..steps {
        at += r.random_range(0..120);
        let units: Vec<String> = c.world().units.iter().map(|u| u.id.clone()).collect();
        let points: Vec<String> = c.world().rescue_points.iter().map(|p| p.id.clone()).collect();
        let mut speakers: Vec<String> = AFFECTED.iter().map(|s| s.to_string()).collect();
        speakers.extend(units.iter().cloned());
        speakers.push(DM.into());
        speakers.push("stranger".into());
        match r.random_range(0..14) {
            0 | 1 => {
                let mode = if r.random_bool(0.2) { TransportMode::Water } else { TransportMode::Road };
                let app = DriverApplication {
                    unit_id: None,
                    driver_name: "volunteer".into(),
                    contact: "06 00 00 00 00".into(),
                    location: GeoPoint::new(49.40 + r.random_range(0.0..0.05), 2.80 + r.random_range(0.0..0.05)),
                    vehicle: Vehicle {
                        id: format!("veh-{}", units.len() + 1),
                        mode,
                        capacity: r.random_range(1..=9),
                        special_needs_capable: r.random_bool(0.3),
                    },
                    experience_note: String::new(),
                };
                let _ = c.register_driver(at, app);
            }
            2 | 3 => {
                if let Some(u) = pick(r, &units) {
                    let verdict = if r.random_bool(0.85) { Verdict::Approved } else { Verdict::Rejected };
                    let _ = c.vet_registration(at, DM, u, verdict);
                }
            }
            4 | 5 => {
                let author = if r.random_bool(0.25) { DM.to_string() } else { pick(r, &speakers).unwrap().clone() };
                let fresh = r.random_bool(0.15);
                let point_id = if fresh { format!("R{}", points.len() + 1) } else { pick(r, &points).unwrap().clone() };
                let claim = if r.random_bool(0.7) {
                    let demand = r.random_range(-1..15);
                    ReportClaim::DemandUpdate { demand, special_needs: r.random_range(0..3) }
                } else {
                    ReportClaim::NeedNote { text: "needs water".into(), tags: BTreeSet::from([NeedTag::Water]) }
                };
                let report = FieldReport {
                    author,
                    at,
                    subject: ReportSubject::Point {
                        point_id,
                        location: fresh.then(|| GeoPoint::new(49.42, 2.83)),
                        priority: r.random_bool(0.2).then(|| gen::priority(r)),
                        accessible_modes: None,
                    },
                    claim,
                };
                let _ = c.submit_report(&report);
            }
            6 => {
                let author = pick(r, &speakers).unwrap().clone();
                let existing: Vec<RoadClosure> = c.world().closures.iter().cloned().collect();
                let reopen = r.random_bool(0.4) && !existing.is_empty();
                let closure = if reopen {
                    pick(r, &existing).unwrap().clone()
                } else {
                    RoadClosure {
                        point_id: pick(r, &points).unwrap().clone(),
                        unit_id: if r.random_bool(0.5) { pick(r, &units).cloned() } else { None },
                        mode: TransportMode::Road,
                    }
                };
                let report = FieldReport {
                    author,
                    at,
                    subject: ReportSubject::Closure { closure },
                    claim: if reopen { ReportClaim::Reopening } else { ReportClaim::Closure },
                };
                let _ = c.submit_report(&report);
            }
            7 | 8 => {
                let _ = c.propose_plan(at, DM, None, r.random_bool(0.2));
            }
            9 => {
                if let Some(plan) = c.world().current_plan().cloned() {
                    let ids: Vec<String> = plan
                        .assignments
                        .iter()
                        .filter(|(_, a)| !a.dispatched && r.random_bool(0.7))
                        .map(|(u, _)| u.clone())
                        .collect();
                    let _ = c.dispatch(at, DM, &plan.id, &ids);
                }
            }
            10 => {
                if let Some(u) = pick(r, &units) {
                    let status = [Availability::Available, Availability::Unavailable][r.random_range(0..2)];
                    let who = if r.random_bool(0.5) { u.clone() } else { DM.to_string() };
                    let _ = c.set_unit_status(at, &who, u, status);
                }
            }
            11 => {
                if let Some(p) = pick(r, &points).filter(|_| r.random_bool(0.3)) {
                    let _ = c.clear_point(at, DM, p, None);
                }
            }
            12 => {
                let author = pick(r, &speakers).unwrap().clone();
                let _ = c.submit_feedback(at, &author, r.random_range(0..=6), "thanks");
            }
            _ => {
                if r.random_bool(0.5) {
                    let _ = c.replan_current(at);
                } else {
                    let _ = c.publish_bulletin(at, Author::new(DM, Role::DecisionMaker), Audience::Public, "stay indoors");
                }
            }
        }
    }
}
