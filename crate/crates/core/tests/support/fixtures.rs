//! Small hand-built worlds.

use corec_core::domain::{GeoPoint, Participant, Priority, Role, WorldState};

use super::gen;

/// One High point and two approved road units: `near` is closer than `far`,
/// and either alone covers the demand.
pub fn closure_world() -> WorldState {
    let mut w = WorldState::default();
    w.rescue_points.push(gen::point("R1", Priority::High, 4, 0, GeoPoint::new(49.4179, 2.8261)));
    w.rescue_points.push(gen::point("R2", Priority::Low, 3, 0, GeoPoint::new(49.4400, 2.8000)));
    w.units.push(gen::unit("near", 5, false, GeoPoint::new(49.4200, 2.8261)));
    w.units.push(gen::unit("far", 5, false, GeoPoint::new(49.4000, 2.8261)));
    w.participants.push(Participant { id: "dm-1".into(), role: Role::DecisionMaker, name: "officer".into() });
    w.participants.push(Participant { id: "aff-1".into(), role: Role::Affected, name: "resident".into() });
    for id in ["near", "far"] {
        w.participants.push(Participant { id: id.into(), role: Role::Driver, name: format!("driver {id}") });
    }
    w
}
