//! Seeded random instances and worlds for property and acceptance tests.

use std::collections::{BTreeMap, BTreeSet};

use corec_core::domain::{
    Availability, GeoPoint, PointStatus, Priority, PriorityWeights, Qualification, RescuePoint, TransportMode,
    Vehicle, VolunteerUnit,
};
use corec_core::recommend::AssignmentInstance;
use corec_core::travel::TimeMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(id: &str, capacity: u32, capable: bool, location: GeoPoint) -> VolunteerUnit {
    VolunteerUnit {
        id: id.into(),
        driver_name: format!("driver {id}"),
        location,
        vehicle: Vehicle { id: format!("v-{id}"), mode: TransportMode::Road, capacity, special_needs_capable: capable },
        qualification: Qualification::Approved,
        availability: Availability::Available,
        attributes: BTreeMap::new(),
    }
}

pub fn point(id: &str, priority: Priority, demand: u32, special_needs: u32, location: GeoPoint) -> RescuePoint {
    RescuePoint {
        id: id.into(),
        location,
        demand,
        special_needs,
        priority,
        accessible_modes: BTreeSet::from([TransportMode::Road]),
        status: PointStatus::Open,
        attributes: BTreeMap::new(),
    }
}

pub fn priority(r: &mut impl Rng) -> Priority {
    Priority::ALL[r.random_range(0..3)]
}

/// A random instance with up to `max_units` units and `max_points` points.
/// Roughly a fifth of the cells are unreachable.
pub fn instance(r: &mut impl Rng, max_units: usize, max_points: usize) -> AssignmentInstance {
    let nu = r.random_range(1..=max_units);
    let np = r.random_range(1..=max_points);
    let here = GeoPoint::new(49.4179, 2.8261);
    let units: Vec<_> = (0..nu)
        .map(|i| unit(&format!("U{i}"), r.random_range(1..=9), r.random_bool(0.3), here))
        .collect();
    let points: Vec<_> = (0..np)
        .map(|i| {
            let demand = r.random_range(0..=14);
            let special = if r.random_bool(0.4) { r.random_range(0..=demand.min(4)) } else { 0 };
            point(&format!("R{i}"), priority(r), demand, special, here)
        })
        .collect();
    let mut matrix = TimeMatrix::new(
        units.iter().map(|u| u.id.clone()).collect(),
        points.iter().map(|p| p.id.clone()).collect(),
    );
    for row in matrix.cells.iter_mut() {
        for cell in row.iter_mut() {
            *cell = (!r.random_bool(0.2)).then(|| r.random_range(30..=3600));
        }
    }
    AssignmentInstance::new(points, units, matrix, PriorityWeights::default()).expect("well formed")
}
