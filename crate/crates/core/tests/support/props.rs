//! Plan properties checked against instances.

use std::collections::BTreeSet;

use corec_core::plan::AssignmentPlan;
use corec_core::recommend::AssignmentInstance;

/// Each unit at most once, only reachable cells, only instance entities.
pub fn feasible(plan: &AssignmentPlan, inst: &AssignmentInstance) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for (unit_id, a) in &plan.assignments {
        if !seen.insert(unit_id) {
            return Err(format!("{unit_id} used twice"));
        }
        let Some(t) = inst.matrix.get(unit_id, &a.point_id) else {
            return Err(format!("{unit_id} -> {} is unreachable or unknown", a.point_id));
        };
        if t != a.travel_time_s {
            return Err(format!("{unit_id} travel time {} != matrix {t}", a.travel_time_s));
        }
    }
    Ok(())
}

/// No higher-priority point is short while a lower-priority point holds a
/// unit that could have reached the higher one. Returns the offending
/// (high point, low point, unit) triples.
pub fn priority_violations(plan: &AssignmentPlan, inst: &AssignmentInstance) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for hi in &inst.points {
        if plan.per_point[&hi.id].shortfall == 0 {
            continue;
        }
        for lo in inst.points.iter().filter(|lo| lo.priority < hi.priority) {
            for unit_id in plan.units_for(&lo.id) {
                if inst.matrix.get(unit_id, &hi.id).is_some() {
                    out.push((hi.id.clone(), lo.id.clone(), unit_id.to_string()));
                }
            }
        }
    }
    out
}
