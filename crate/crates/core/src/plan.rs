//! Assignment plan records.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Proposed,
    Dispatched,
}

/// Lexicographic objective: more weighted coverage first, then a smaller
/// sum of per-point makespans, then a smaller total travel time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ScoreTuple {
    pub weighted_coverage: u64,
    pub total_makespan: u64,
    pub total_time: u64,
}

impl ScoreTuple {
    pub const fn new(weighted_coverage: u64, total_makespan: u64, total_time: u64) -> Self {
        Self { weighted_coverage, total_makespan, total_time }
    }
}

impl Ord for ScoreTuple {
    /// `a > b` means `a` is the better plan.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weighted_coverage
            .cmp(&other.weighted_coverage)
            .then(other.total_makespan.cmp(&self.total_makespan))
            .then(other.total_time.cmp(&self.total_time))
    }
}

impl PartialOrd for ScoreTuple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub point_id: String,
    pub travel_time_s: u64,
    pub seats: u32,
    #[serde(default)]
    pub dispatched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointCoverage {
    pub demand: u32,
    pub special_needs: u32,
    /// Raw seats of every unit assigned to the point.
    pub covered: u32,
    /// People actually carried once special-needs seating is respected.
    pub effective: u32,
    pub shortfall: u32,
    pub makespan_s: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    #[serde(default)]
    pub id: String,
    /// unit id -> assignment. Unassigned units are absent.
    pub assignments: BTreeMap<String, Assignment>,
    pub per_point: BTreeMap<String, PointCoverage>,
    pub score: ScoreTuple,
    pub status: PlanStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<String>,
    /// Dispatched units released because their approach became unreachable.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub released: Vec<String>,
}

impl AssignmentPlan {
    /// The bare unit -> point mapping, ordered by unit id.
    pub fn mapping(&self) -> Vec<(&str, &str)> {
        self.assignments
            .iter()
            .map(|(u, a)| (u.as_str(), a.point_id.as_str()))
            .collect()
    }

    pub fn units_for<'a>(&'a self, point_id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.assignments
            .iter()
            .filter(move |(_, a)| a.point_id == point_id)
            .map(|(u, _)| u.as_str())
    }

    pub fn covered(&self, point_id: &str) -> u32 {
        self.per_point.get(point_id).map_or(0, |c| c.covered)
    }
}
