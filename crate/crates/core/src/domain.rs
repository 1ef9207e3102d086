//! Crisis-domain records shared by every other module.
//!
//! All types are plain values with a canonical JSON form (snake_case fields,
//! ordered collections) so that the same bytes come out of the scenario
//! files, the HTTP API and the event log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::plan::AssignmentPlan;

/// Free-form extension attributes. Never read by the solver.
pub type Attributes = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Low,
    Medium,
    High,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::Low, Priority::Medium, Priority::High];
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Priority::Low => "low",
            Priority::Medium => "medium",
            Priority::High => "high",
        })
    }
}

/// Coverage weight per priority level.
///
/// The defaults are 1/2/4; scenarios may override them as long as the
/// mapping stays strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityWeights {
    pub low: u64,
    pub medium: u64,
    pub high: u64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        Self { low: 1, medium: 2, high: 4 }
    }
}

impl PriorityWeights {
    pub fn weight(&self, p: Priority) -> u64 {
        match p {
            Priority::Low => self.low,
            Priority::Medium => self.medium,
            Priority::High => self.high,
        }
    }

    pub fn is_valid(&self) -> bool {
        0 < self.low && self.low < self.medium && self.medium < self.high
    }
}

/// Default coverage weight of a priority level: Low 1, Medium 2, High 4.
pub fn priority_weight(p: Priority) -> u64 {
    PriorityWeights::default().weight(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    Road,
    Water,
}

impl TransportMode {
    pub const ALL: [TransportMode; 2] = [TransportMode::Road, TransportMode::Water];
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportMode::Road => "road",
            TransportMode::Water => "water",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Open,
    Evacuating,
    Cleared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescuePoint {
    pub id: String,
    pub location: GeoPoint,
    pub demand: u32,
    pub special_needs: u32,
    pub priority: Priority,
    pub accessible_modes: BTreeSet<TransportMode>,
    pub status: PointStatus,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: String,
    pub mode: TransportMode,
    /// Total seats, driver included.
    pub capacity: u32,
    pub special_needs_capable: bool,
}

/// Seats left for evacuees once the driver is seated.
///
/// A minivan rated for 9 carries 8 evacuees, a 6-seat boat carries 5.
pub fn available_seats(vehicle: &Vehicle) -> u32 {
    vehicle.capacity.saturating_sub(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualification {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    Available,
    Assigned,
    Dispatched,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolunteerUnit {
    pub id: String,
    pub driver_name: String,
    pub location: GeoPoint,
    pub vehicle: Vehicle,
    pub qualification: Qualification,
    pub availability: Availability,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: Attributes,
}

impl VolunteerUnit {
    pub fn seats(&self) -> u32 {
        available_seats(&self.vehicle)
    }

    pub fn is_eligible(&self) -> bool {
        self.qualification == Qualification::Approved
            && self.availability == Availability::Available
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shelter {
    pub id: String,
    pub location: GeoPoint,
    pub capacity: u32,
    pub occupancy: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: Attributes,
}

/// A blocked approach to a rescue point for one transport mode.
///
/// With `unit_id` unset the closure blocks every unit of that mode from the
/// point; with it set only that unit/point pair is blocked.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoadClosure {
    pub point_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_id: Option<String>,
    pub mode: TransportMode,
}

impl RoadClosure {
    pub fn blocks(&self, unit: &VolunteerUnit, point: &RescuePoint) -> bool {
        self.point_id == point.id
            && self.mode == unit.vehicle.mode
            && self.unit_id.as_deref().is_none_or(|u| u == unit.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    DecisionMaker,
    Driver,
    Affected,
    System,
}

impl Role {
    pub const PEOPLE: [Role; 3] = [Role::DecisionMaker, Role::Driver, Role::Affected];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::DecisionMaker => "decision_maker",
            Role::Driver => "driver",
            Role::Affected => "affected",
            Role::System => "system",
        })
    }
}

/// A registered person allowed to author events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldState {
    #[serde(default)]
    pub rescue_points: Vec<RescuePoint>,
    #[serde(default)]
    pub units: Vec<VolunteerUnit>,
    #[serde(default)]
    pub shelters: Vec<Shelter>,
    #[serde(default)]
    pub closures: BTreeSet<RoadClosure>,
    #[serde(default)]
    pub participants: Vec<Participant>,
    #[serde(default)]
    pub plans: BTreeMap<String, AssignmentPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_plan: Option<String>,
    /// Scenario time in seconds.
    #[serde(default)]
    pub clock: u64,
}

impl WorldState {
    pub fn point(&self, id: &str) -> Option<&RescuePoint> {
        self.rescue_points.iter().find(|p| p.id == id)
    }

    pub fn point_mut(&mut self, id: &str) -> Option<&mut RescuePoint> {
        self.rescue_points.iter_mut().find(|p| p.id == id)
    }

    pub fn unit(&self, id: &str) -> Option<&VolunteerUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn unit_mut(&mut self, id: &str) -> Option<&mut VolunteerUnit> {
        self.units.iter_mut().find(|u| u.id == id)
    }

    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn current_plan(&self) -> Option<&AssignmentPlan> {
        self.current_plan.as_ref().and_then(|id| self.plans.get(id))
    }

    /// Whether `id` may author events as `role`.
    ///
    /// Drivers whose registration was rejected lose that right.
    pub fn is_registered(&self, id: &str, role: Role) -> bool {
        match self.participant(id) {
            Some(p) if p.role == role => match role {
                Role::Driver => self
                    .unit(id)
                    .is_none_or(|u| u.qualification != Qualification::Rejected),
                _ => true,
            },
            _ => false,
        }
    }

    /// Canonical JSON form. Identical worlds produce identical bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("world state always serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// One broken invariant, named by entity id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub invariant: String,
}

impl Violation {
    fn new(entity: impl Into<String>, invariant: impl Into<String>) -> Self {
        Self { entity: entity.into(), invariant: invariant.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.invariant)
    }
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dups.insert(id);
        }
    }
    dups.into_iter().collect()
}

/// Checks every record invariant. An empty result means the world is sound.
pub fn validate_world(w: &WorldState) -> Vec<Violation> {
    let mut out = Vec::new();

    for id in duplicates(w.rescue_points.iter().map(|p| p.id.as_str())) {
        out.push(Violation::new(id, "duplicate rescue point id"));
    }
    for id in duplicates(w.units.iter().map(|u| u.id.as_str())) {
        out.push(Violation::new(id, "duplicate unit id"));
    }
    for id in duplicates(w.units.iter().map(|u| u.vehicle.id.as_str())) {
        out.push(Violation::new(id, "duplicate vehicle id"));
    }
    for id in duplicates(w.shelters.iter().map(|s| s.id.as_str())) {
        out.push(Violation::new(id, "duplicate shelter id"));
    }
    for id in duplicates(w.participants.iter().map(|p| p.id.as_str())) {
        out.push(Violation::new(id, "duplicate participant id"));
    }

    for p in &w.rescue_points {
        if !p.location.is_valid() {
            out.push(Violation::new(&p.id, "location out of range"));
        }
        if p.special_needs > p.demand {
            out.push(Violation::new(&p.id, "special_needs exceeds demand"));
        }
        if p.status == PointStatus::Cleared && p.demand != 0 {
            out.push(Violation::new(&p.id, "cleared point with non-zero demand"));
        }
    }

    for u in &w.units {
        if !u.location.is_valid() {
            out.push(Violation::new(&u.id, "location out of range"));
        }
        if u.vehicle.capacity < 1 {
            out.push(Violation::new(&u.id, "vehicle capacity below 1"));
        }
        if matches!(u.availability, Availability::Assigned | Availability::Dispatched)
            && u.qualification != Qualification::Approved
        {
            out.push(Violation::new(&u.id, "unapproved unit assigned or dispatched"));
        }
    }

    for s in &w.shelters {
        if !s.location.is_valid() {
            out.push(Violation::new(&s.id, "location out of range"));
        }
        if s.occupancy > s.capacity {
            out.push(Violation::new(&s.id, "occupancy exceeds capacity"));
        }
    }

    for c in &w.closures {
        if w.point(&c.point_id).is_none() {
            out.push(Violation::new(&c.point_id, "closure references unknown point"));
        }
        if let Some(u) = &c.unit_id {
            if w.unit(u).is_none() {
                out.push(Violation::new(u, "closure references unknown unit"));
            }
        }
    }

    if let Some(id) = &w.current_plan {
        if !w.plans.contains_key(id) {
            out.push(Violation::new(id, "current plan missing"));
        }
    }

    out
}
