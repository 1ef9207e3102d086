//! Volunteer-to-rescue-point recommendation.
//!
//! Plans are scored lexicographically by [`ScoreTuple`]: priority-weighted
//! coverage first, then the sum of per-point makespans, then total travel
//! time. Special-needs evacuees only count as covered by seats in
//! special-needs-capable vehicles; spare capable seats also carry everyone
//! else.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{PointStatus, PriorityWeights, RescuePoint, VolunteerUnit, WorldState};
use crate::plan::{Assignment, AssignmentPlan, PlanStatus, PointCoverage, ScoreTuple};
use crate::travel::{build_time_matrix, Router, RoutingError, TimeMatrix};

pub const EXACT_MAX_UNITS: usize = 10;
pub const EXACT_MAX_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("instance too large for the exact solver ({units} units, {points} points); use solve_greedy")]
    TooLarge { units: usize, points: usize },
    #[error("malformed instance: {0}")]
    Instance(String),
}

/// Everything a solver needs: open points, eligible units and their
/// filtered travel times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInstance {
    pub points: Vec<RescuePoint>,
    pub units: Vec<VolunteerUnit>,
    pub matrix: TimeMatrix,
    pub weights: PriorityWeights,
}

impl AssignmentInstance {
    pub fn new(
        points: Vec<RescuePoint>,
        units: Vec<VolunteerUnit>,
        matrix: TimeMatrix,
        weights: PriorityWeights,
    ) -> Result<Self, PlanError> {
        let rows: Vec<&str> = units.iter().map(|u| u.id.as_str()).collect();
        let cols: Vec<&str> = points.iter().map(|p| p.id.as_str()).collect();
        if matrix.rows != rows || matrix.cols != cols {
            return Err(PlanError::Instance("matrix does not cover units x points".into()));
        }
        if matrix.cells.len() != rows.len() || matrix.cells.iter().any(|r| r.len() != cols.len()) {
            return Err(PlanError::Instance("matrix shape mismatch".into()));
        }
        if BTreeSet::from_iter(&rows).len() != rows.len() || BTreeSet::from_iter(&cols).len() != cols.len() {
            return Err(PlanError::Instance("duplicate ids".into()));
        }
        if !weights.is_valid() {
            return Err(PlanError::Instance("priority weights must be positive and increasing".into()));
        }
        Ok(Self { points, units, matrix, weights })
    }

    /// Builds an instance from the current world.
    ///
    /// Points are every non-cleared point (restricted to `only_points` when
    /// given); units are every approved, available unit plus any approved
    /// unit named in `also_units` (dispatched units a re-plan must see).
    /// Returns the instance and any routing degradations.
    pub fn from_world(
        world: &WorldState,
        only_points: Option<&BTreeSet<String>>,
        also_units: &BTreeSet<String>,
        router: &Router,
        weights: PriorityWeights,
    ) -> Result<(Self, Vec<String>), RoutingError> {
        let points: Vec<RescuePoint> = world
            .rescue_points
            .iter()
            .filter(|p| p.status != PointStatus::Cleared)
            .filter(|p| only_points.is_none_or(|s| s.contains(&p.id)))
            .cloned()
            .collect();
        let units: Vec<VolunteerUnit> = world
            .units
            .iter()
            .filter(|u| {
                u.is_eligible()
                    || (also_units.contains(&u.id)
                        && u.qualification == crate::domain::Qualification::Approved)
            })
            .cloned()
            .collect();
        let build = build_time_matrix(&units, &points, &world.closures, router.config().max_response_s, router)?;
        let inst = Self::new(points, units, build.matrix, weights)
            .expect("world-derived instance is well formed");
        Ok((inst, build.degraded))
    }

    fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    fn point_index(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }

    fn time(&self, u: usize, p: usize) -> Option<u64> {
        self.matrix.cells[u][p]
    }
}

/// People a point can actually load given capable and ordinary seats.
pub fn effective_coverage(demand: u32, special_needs: u32, capable_seats: u32, general_seats: u32) -> u32 {
    let special = special_needs.min(demand);
    let special_covered = capable_seats.min(special);
    let spare = capable_seats - special_covered;
    special_covered + (demand - special).min(general_seats.saturating_add(spare))
}

/// Running per-point load while a solver builds a plan.
#[derive(Debug, Clone, Copy, Default)]
struct Load {
    capable: u32,
    general: u32,
    makespan: u64,
    time: u64,
}

impl Load {
    fn add(&mut self, seats: u32, capable: bool, t: u64) {
        if capable {
            self.capable += seats;
        } else {
            self.general += seats;
        }
        self.makespan = self.makespan.max(t);
        self.time += t;
    }

    fn effective(&self, p: &RescuePoint) -> u32 {
        effective_coverage(p.demand, p.special_needs, self.capable, self.general)
    }
}

fn score_loads(inst: &AssignmentInstance, loads: &[Load]) -> ScoreTuple {
    let mut s = ScoreTuple::default();
    for (p, l) in inst.points.iter().zip(loads) {
        s.weighted_coverage += inst.weights.weight(p.priority) * u64::from(l.effective(p));
        s.total_makespan += l.makespan;
        s.total_time += l.time;
    }
    s
}

/// Materializes a plan from a unit -> point mapping.
fn evaluate(
    inst: &AssignmentInstance,
    mapping: &BTreeMap<String, String>,
    dispatched: &BTreeSet<String>,
) -> Result<AssignmentPlan, PlanError> {
    let mut loads = vec![Load::default(); inst.points.len()];
    let mut raw = vec![0u32; inst.points.len()];
    let mut assignments = BTreeMap::new();
    for (unit_id, point_id) in mapping {
        let u = inst
            .unit_index(unit_id)
            .ok_or_else(|| PlanError::InvalidPlan(format!("unit {unit_id} not in instance")))?;
        let p = inst
            .point_index(point_id)
            .ok_or_else(|| PlanError::InvalidPlan(format!("point {point_id} not in instance")))?;
        let t = inst
            .time(u, p)
            .ok_or_else(|| PlanError::InvalidPlan(format!("{unit_id} -> {point_id} is unreachable")))?;
        let unit = &inst.units[u];
        loads[p].add(unit.seats(), unit.vehicle.special_needs_capable, t);
        raw[p] += unit.seats();
        assignments.insert(
            unit_id.clone(),
            Assignment {
                point_id: point_id.clone(),
                travel_time_s: t,
                seats: unit.seats(),
                dispatched: dispatched.contains(unit_id),
            },
        );
    }
    let per_point = inst
        .points
        .iter()
        .zip(&loads)
        .zip(&raw)
        .map(|((p, l), &covered)| {
            let effective = l.effective(p);
            (
                p.id.clone(),
                PointCoverage {
                    demand: p.demand,
                    special_needs: p.special_needs,
                    covered,
                    effective,
                    shortfall: p.demand - effective,
                    makespan_s: l.makespan,
                },
            )
        })
        .collect();
    let status = if !assignments.is_empty() && assignments.values().all(|a: &Assignment| a.dispatched) {
        PlanStatus::Dispatched
    } else {
        PlanStatus::Proposed
    };
    Ok(AssignmentPlan {
        id: String::new(),
        assignments,
        per_point,
        score: score_loads(inst, &loads),
        status,
        supersedes: None,
        released: Vec::new(),
    })
}

/// Scores `plan` against `inst`. Fails if the plan names an unknown unit or
/// point, or an unreachable pair.
pub fn plan_score(plan: &AssignmentPlan, inst: &AssignmentInstance) -> Result<ScoreTuple, PlanError> {
    let mapping = plan
        .assignments
        .iter()
        .map(|(u, a)| (u.clone(), a.point_id.clone()))
        .collect();
    Ok(evaluate(inst, &mapping, &BTreeSet::new())?.score)
}

struct ExactSearch<'a> {
    inst: &'a AssignmentInstance,
    /// unit indices sorted by id
    order: Vec<usize>,
    /// per unit (in `order`), reachable points sorted by travel time
    options: Vec<Vec<(usize, u64)>>,
    /// suffix sums of reachable capable / general seats per point
    rest_capable: Vec<Vec<u32>>,
    rest_general: Vec<Vec<u32>>,
    choice: Vec<Option<usize>>,
    best: Option<(ScoreTuple, Vec<(String, String)>)>,
}

impl ExactSearch<'_> {
    fn bound(&self, depth: usize, loads: &[Load]) -> ScoreTuple {
        let mut s = ScoreTuple::default();
        for (pi, (p, l)) in self.inst.points.iter().zip(loads).enumerate() {
            let eff = effective_coverage(
                p.demand,
                p.special_needs,
                l.capable + self.rest_capable[depth][pi],
                l.general + self.rest_general[depth][pi],
            );
            s.weighted_coverage += self.inst.weights.weight(p.priority) * u64::from(eff);
            s.total_makespan += l.makespan;
            s.total_time += l.time;
        }
        s
    }

    fn mapping(&self) -> Vec<(String, String)> {
        self.order
            .iter()
            .zip(&self.choice)
            .filter_map(|(&u, c)| c.map(|p| (self.inst.units[u].id.clone(), self.inst.points[p].id.clone())))
            .collect()
    }

    fn search(&mut self, depth: usize, loads: &mut Vec<Load>) {
        if let Some((best, _)) = &self.best {
            if self.bound(depth, loads) < *best {
                return;
            }
        }
        if depth == self.order.len() {
            let score = score_loads(self.inst, loads);
            let better = match &self.best {
                None => true,
                Some((b, m)) => score > *b || (score == *b && self.mapping() < *m),
            };
            if better {
                self.best = Some((score, self.mapping()));
            }
            return;
        }
        let unit = &self.inst.units[self.order[depth]];
        for k in 0..self.options[depth].len() {
            let (p, t) = self.options[depth][k];
            let saved = loads[p];
            loads[p].add(unit.seats(), unit.vehicle.special_needs_capable, t);
            self.choice[depth] = Some(p);
            self.search(depth + 1, loads);
            loads[p] = saved;
        }
        self.choice[depth] = None;
        self.search(depth + 1, loads);
    }
}

/// Optimal plan by exhaustive branch-and-bound.
///
/// Ties in score go to the lexicographically smallest unit -> point mapping.
pub fn solve_exact(inst: &AssignmentInstance) -> Result<AssignmentPlan, PlanError> {
    if inst.units.len() > EXACT_MAX_UNITS || inst.points.len() > EXACT_MAX_POINTS {
        return Err(PlanError::TooLarge { units: inst.units.len(), points: inst.points.len() });
    }
    let mut order: Vec<usize> = (0..inst.units.len()).collect();
    order.sort_by(|&a, &b| inst.units[a].id.cmp(&inst.units[b].id));

    let options: Vec<Vec<(usize, u64)>> = order
        .iter()
        .map(|&u| {
            let mut opts: Vec<(usize, u64)> =
                (0..inst.points.len()).filter_map(|p| inst.time(u, p).map(|t| (p, t))).collect();
            opts.sort_by_key(|&(p, t)| (t, p));
            opts
        })
        .collect();

    let np = inst.points.len();
    let mut rest_capable = vec![vec![0u32; np]; order.len() + 1];
    let mut rest_general = vec![vec![0u32; np]; order.len() + 1];
    for d in (0..order.len()).rev() {
        let unit = &inst.units[order[d]];
        rest_capable[d] = rest_capable[d + 1].clone();
        rest_general[d] = rest_general[d + 1].clone();
        for &(p, _) in &options[d] {
            if unit.vehicle.special_needs_capable {
                rest_capable[d][p] += unit.seats();
            } else {
                rest_general[d][p] += unit.seats();
            }
        }
    }

    let mut search = ExactSearch {
        inst,
        choice: vec![None; order.len()],
        order,
        options,
        rest_capable,
        rest_general,
        best: None,
    };
    search.search(0, &mut vec![Load::default(); np]);
    let (_, mapping) = search.best.expect("the empty plan is always a candidate");
    evaluate(inst, &mapping.into_iter().collect(), &BTreeSet::new())
}

fn greedy_mapping(inst: &AssignmentInstance, pins: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut loads = vec![Load::default(); inst.points.len()];
    let mut taken = vec![false; inst.units.len()];
    let mut mapping = BTreeMap::new();
    for (unit_id, point_id) in pins {
        let (u, p) = (inst.unit_index(unit_id).expect("pinned unit"), inst.point_index(point_id).expect("pinned point"));
        let unit = &inst.units[u];
        loads[p].add(unit.seats(), unit.vehicle.special_needs_capable, inst.time(u, p).expect("pinned pair"));
        taken[u] = true;
        mapping.insert(unit_id.clone(), point_id.clone());
    }

    let mut order: Vec<usize> = (0..inst.points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&inst.points[a], &inst.points[b]);
        (Reverse(pa.priority), Reverse(pa.demand), &pa.id).cmp(&(Reverse(pb.priority), Reverse(pb.demand), &pb.id))
    });

    for p in order {
        let point = &inst.points[p];
        while loads[p].effective(point) < point.demand {
            let pick = (0..inst.units.len())
                .filter(|&u| !taken[u])
                .filter_map(|u| inst.time(u, p).map(|t| (u, t)))
                .min_by(|&(ua, ta), &(ub, tb)| {
                    let (a, b) = (&inst.units[ua], &inst.units[ub]);
                    (ta, Reverse(a.seats()), &a.id).cmp(&(tb, Reverse(b.seats()), &b.id))
                });
            let Some((u, t)) = pick else { break };
            let unit = &inst.units[u];
            loads[p].add(unit.seats(), unit.vehicle.special_needs_capable, t);
            taken[u] = true;
            mapping.insert(unit.id.clone(), point.id.clone());
        }
    }
    mapping
}

/// Priority-ordered greedy: points by (priority desc, demand desc, id asc),
/// each filled with the nearest free unit (ties: more seats, then smaller
/// id) until covered or no reachable unit remains.
pub fn solve_greedy(inst: &AssignmentInstance) -> AssignmentPlan {
    evaluate(inst, &greedy_mapping(inst, &BTreeMap::new()), &BTreeSet::new())
        .expect("greedy only picks reachable pairs")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedUnit {
    pub unit_id: String,
    pub travel_time_s: u64,
    pub seats: u32,
}

/// Top-k units for one point by (travel time asc, seats desc, id asc).
pub fn rank_units(point_id: &str, inst: &AssignmentInstance, k: usize) -> Vec<RankedUnit> {
    let Some(p) = inst.point_index(point_id) else {
        return Vec::new();
    };
    let mut ranked: Vec<RankedUnit> = inst
        .units
        .iter()
        .enumerate()
        .filter_map(|(u, unit)| {
            inst.time(u, p).map(|t| RankedUnit { unit_id: unit.id.clone(), travel_time_s: t, seats: unit.seats() })
        })
        .collect();
    ranked.sort_by(|a, b| {
        (a.travel_time_s, Reverse(a.seats), &a.unit_id).cmp(&(b.travel_time_s, Reverse(b.seats), &b.unit_id))
    });
    ranked.truncate(k);
    ranked
}

/// Re-plans after the world changed.
///
/// Dispatched assignments that are still reachable are pinned; dispatched
/// assignments whose pair became unreachable are released and listed in
/// `released`. Dispatched units missing from the instance have been
/// withdrawn by their driver and are dropped, as are trips to points that
/// left the instance. Everything else is re-solved greedily around the pins. The
/// current plan is kept when it is still feasible, nothing was released and
/// it scores at least as well as the re-solve.
pub fn replan(current: &AssignmentPlan, inst: &AssignmentInstance) -> AssignmentPlan {
    let mut pins = BTreeMap::new();
    let mut released = Vec::new();
    for (unit_id, a) in current.assignments.iter().filter(|(_, a)| a.dispatched) {
        let Some(p) = inst.point_index(&a.point_id) else {
            // point cleared or out of scope: the trip is over
            continue;
        };
        let Some(u) = inst.unit_index(unit_id) else {
            continue;
        };
        match inst.time(u, p) {
            Some(_) => {
                pins.insert(unit_id.clone(), a.point_id.clone());
            }
            None => released.push(unit_id.clone()),
        }
    }
    let dispatched: BTreeSet<String> = pins.keys().cloned().collect();

    let resolved = evaluate(inst, &greedy_mapping(inst, &pins), &dispatched).expect("greedy only picks reachable pairs");

    if released.is_empty() {
        let still: BTreeMap<String, String> = current
            .assignments
            .iter()
            .filter(|(u, a)| !a.dispatched || pins.contains_key(*u))
            .map(|(u, a)| (u.clone(), a.point_id.clone()))
            .collect();
        // fails when a proposed pair is gone or unreachable
        if let Ok(kept) = evaluate(inst, &still, &dispatched) {
            if kept.score >= resolved.score {
                if kept.assignments == current.assignments {
                    return AssignmentPlan { per_point: kept.per_point, score: kept.score, ..current.clone() };
                }
                return AssignmentPlan { supersedes: Some(current.id.clone()), ..kept };
            }
        }
    }

    AssignmentPlan { supersedes: Some(current.id.clone()), released, ..resolved }
}
