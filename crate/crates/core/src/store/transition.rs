//! Deterministic state transition for one event.

use std::collections::BTreeSet;

use crate::context::roles::can_author;
use crate::domain::{
    Availability, PointStatus, Priority, Qualification, RescuePoint, Role, TransportMode,
    VolunteerUnit, WorldState,
};
use crate::error::TransitionError;
use crate::plan::PlanStatus;
use crate::store::event::{Author, ContextEvent, EventBody, PointClaim, Verdict};

fn reject<T>(msg: impl Into<String>) -> Result<T, TransitionError> {
    Err(TransitionError::new(msg))
}

fn check_author(world: &WorldState, author: &Author, body: &EventBody) -> Result<(), TransitionError> {
    if author.role == Role::System {
        return Ok(());
    }
    if !world.is_registered(&author.id, author.role) {
        return reject(format!("unregistered author {}", author.id));
    }
    if !can_author(author.role, body.kind()) {
        return reject(format!("{} may not author {}", author.role, body.kind()));
    }
    if let EventBody::UnitStatusChanged { unit_id, availability, .. } = body {
        if author.role == Role::Driver
            && (unit_id != &author.id
                || !matches!(availability, Availability::Available | Availability::Unavailable))
        {
            return reject("drivers may only mark their own unit available or unavailable");
        }
    }
    Ok(())
}

fn to_count(v: i64) -> u32 {
    u32::try_from(v).expect("validated payload counts fit in u32")
}

/// Applies `ev` to `world`, or leaves it untouched and explains why not.
pub fn apply(world: &mut WorldState, ev: &ContextEvent) -> Result<(), TransitionError> {
    ev.body.validate()?;
    check_author(world, &ev.author, &ev.body)?;
    let is_dm = matches!(ev.author.role, Role::DecisionMaker | Role::System);

    match &ev.body {
        EventBody::DriverRegistered(app) => {
            if world.unit(&app.unit_id).is_some() || world.participant(&app.unit_id).is_some() {
                return reject(format!("id {} already registered", app.unit_id));
            }
            if world.units.iter().any(|u| u.vehicle.id == app.vehicle.id) {
                return reject(format!("vehicle {} already registered", app.vehicle.id));
            }
            world.units.push(VolunteerUnit {
                id: app.unit_id.clone(),
                driver_name: app.driver_name.clone(),
                location: app.location,
                vehicle: app.vehicle.clone(),
                qualification: Qualification::Pending,
                availability: Availability::Unavailable,
                attributes: Default::default(),
            });
            world.participants.push(crate::domain::Participant {
                id: app.unit_id.clone(),
                role: Role::Driver,
                name: app.driver_name.clone(),
            });
        }
        EventBody::RegistrationVetted { unit_id, verdict } => {
            let Some(unit) = world.unit_mut(unit_id) else {
                return reject(format!("unknown unit {unit_id}"));
            };
            if unit.qualification != Qualification::Pending {
                return reject(format!("registration {unit_id} already decided"));
            }
            match verdict {
                Verdict::Approved => {
                    unit.qualification = Qualification::Approved;
                    unit.availability = Availability::Available;
                }
                Verdict::Rejected => {
                    unit.qualification = Qualification::Rejected;
                    unit.availability = Availability::Unavailable;
                }
            }
        }
        EventBody::PointReported { point_id, location, priority, accessible_modes, claim } => {
            if !is_dm && (priority.is_some() || accessible_modes.is_some()) {
                return reject("only decision-makers set priority or accessibility");
            }
            let (demand, special) = match claim {
                Some(PointClaim::DemandUpdate { demand, special_needs }) => {
                    (Some(to_count(*demand)), to_count(*special_needs))
                }
                _ => (None, 0),
            };
            let tags: BTreeSet<&'static str> = match claim {
                Some(PointClaim::NeedNote { tags, .. }) => tags.iter().map(|t| t.as_str()).collect(),
                _ => BTreeSet::new(),
            };
            match world.point_mut(point_id) {
                Some(p) => {
                    if p.status == PointStatus::Cleared && demand.is_some_and(|d| d > 0) {
                        return reject(format!("point {point_id} already cleared"));
                    }
                    if let Some(d) = demand {
                        p.demand = d;
                        p.special_needs = special;
                    }
                    if is_dm {
                        if let Some(loc) = location {
                            p.location = *loc;
                        }
                        if let Some(pr) = priority {
                            p.priority = *pr;
                        }
                        if let Some(m) = accessible_modes {
                            p.accessible_modes = m.clone();
                        }
                    }
                    merge_needs(p, &tags);
                }
                None => {
                    let Some(loc) = location else {
                        return reject(format!("new point {point_id} needs a location"));
                    };
                    let mut p = RescuePoint {
                        id: point_id.clone(),
                        location: *loc,
                        demand: demand.unwrap_or(0),
                        special_needs: special,
                        priority: priority.unwrap_or(Priority::Medium),
                        accessible_modes: accessible_modes
                            .clone()
                            .unwrap_or_else(|| [TransportMode::Road].into()),
                        status: PointStatus::Open,
                        attributes: Default::default(),
                    };
                    merge_needs(&mut p, &tags);
                    world.rescue_points.push(p);
                }
            }
        }
        EventBody::DemandUpdated { point_id, demand, special_needs, priority } => {
            let Some(p) = world.point_mut(point_id) else {
                return reject(format!("unknown point {point_id}"));
            };
            if p.status == PointStatus::Cleared {
                return reject(format!("point {point_id} already cleared"));
            }
            p.demand = to_count(*demand);
            p.special_needs = to_count(*special_needs);
            if let Some(pr) = priority {
                p.priority = *pr;
            }
        }
        EventBody::RoadClosed { closure } => {
            if world.point(&closure.point_id).is_none() {
                return reject(format!("unknown point {}", closure.point_id));
            }
            if let Some(u) = &closure.unit_id {
                if world.unit(u).is_none() {
                    return reject(format!("unknown unit {u}"));
                }
            }
            if !world.closures.insert(closure.clone()) {
                return reject("closure already in effect");
            }
        }
        EventBody::RoadReopened { closure } => {
            if !world.closures.remove(closure) {
                return reject("closure not in effect");
            }
        }
        EventBody::UnitStatusChanged { unit_id, availability, .. } => {
            let Some(unit) = world.unit_mut(unit_id) else {
                return reject(format!("unknown unit {unit_id}"));
            };
            if *availability != Availability::Unavailable
                && unit.qualification != Qualification::Approved
            {
                return reject(format!("unit {unit_id} is not approved"));
            }
            unit.availability = *availability;
        }
        EventBody::PlanProposed { plan } => {
            if world.plans.contains_key(&plan.id) {
                return reject(format!("plan {} already exists", plan.id));
            }
            for (unit_id, a) in &plan.assignments {
                match world.unit(unit_id) {
                    Some(u) if u.qualification == Qualification::Approved => {}
                    Some(_) => return reject(format!("unit {unit_id} is not approved")),
                    None => return reject(format!("unknown unit {unit_id}")),
                }
                if world.point(&a.point_id).is_none() {
                    return reject(format!("unknown point {}", a.point_id));
                }
            }
            world.plans.insert(plan.id.clone(), plan.clone());
            world.current_plan = Some(plan.id.clone());
        }
        EventBody::PlanDispatched { plan_id, dispatches } => {
            let Some(plan) = world.plans.get(plan_id) else {
                return reject(format!("unknown plan {plan_id}"));
            };
            for d in dispatches {
                let Some(a) = plan.assignments.get(&d.unit_id) else {
                    return reject(format!("unit {} not in plan {plan_id}", d.unit_id));
                };
                if a.point_id != d.point_id {
                    return reject(format!("unit {} is assigned to {}", d.unit_id, a.point_id));
                }
                if a.dispatched {
                    return reject(format!("unit {} already dispatched", d.unit_id));
                }
                match world.unit(&d.unit_id) {
                    Some(u) if u.is_eligible() => {}
                    _ => return reject(format!("unit {} is not available", d.unit_id)),
                }
                if world.point(&d.point_id).is_none_or(|p| p.status == PointStatus::Cleared) {
                    return reject(format!("point {} is not open", d.point_id));
                }
            }
            let plan = world.plans.get_mut(plan_id).expect("checked above");
            plan.status = PlanStatus::Dispatched;
            for d in dispatches {
                plan.assignments.get_mut(&d.unit_id).expect("checked above").dispatched = true;
            }
            for d in dispatches {
                let p = world.point_mut(&d.point_id).expect("checked above");
                if p.status == PointStatus::Open {
                    p.status = PointStatus::Evacuating;
                }
            }
        }
        EventBody::PointCleared { point_id, evacuated } => {
            let Some(p) = world.point_mut(point_id) else {
                return reject(format!("unknown point {point_id}"));
            };
            if p.status == PointStatus::Cleared {
                return reject(format!("point {point_id} already cleared"));
            }
            if to_count(*evacuated) < p.demand {
                return reject(format!(
                    "clearing {point_id} would leave demand {} > 0",
                    p.demand - to_count(*evacuated)
                ));
            }
            p.demand = 0;
            p.special_needs = 0;
            p.status = PointStatus::Cleared;
        }
        EventBody::FeedbackSubmitted { .. } | EventBody::BulletinPublished { .. } => {}
    }

    world.clock = world.clock.max(ev.at);
    Ok(())
}

fn merge_needs(p: &mut RescuePoint, tags: &BTreeSet<&'static str>) {
    if tags.is_empty() {
        return;
    }
    let mut all: BTreeSet<String> = p
        .attributes
        .get("needs")
        .map(|s| s.split(',').filter(|t| !t.is_empty()).map(str::to_owned).collect())
        .unwrap_or_default();
    all.extend(tags.iter().map(|t| t.to_string()));
    p.attributes.insert("needs".into(), all.into_iter().collect::<Vec<_>>().join(","));
}
