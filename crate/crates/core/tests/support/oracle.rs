//! Exhaustive reference solver. Shares no code with the library solvers:
//! it enumerates every placement of every unit (each point or unassigned)
//! and scores each one from first principles.

use corec_core::domain::Priority;
use corec_core::recommend::AssignmentInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Score {
    pub weighted_coverage: u64,
    pub total_makespan: u64,
    pub total_time: u64,
}

fn weight(inst: &AssignmentInstance, p: Priority) -> u64 {
    match p {
        Priority::Low => inst.weights.low,
        Priority::Medium => inst.weights.medium,
        Priority::High => inst.weights.high,
    }
}

/// Scores a placement (`placement[u]` is a point index or `None`), or `None`
/// when a placement uses an unreachable pair.
pub fn score(inst: &AssignmentInstance, placement: &[Option<usize>]) -> Option<Score> {
    let mut s = Score { weighted_coverage: 0, total_makespan: 0, total_time: 0 };
    for (p, point) in inst.points.iter().enumerate() {
        let mut capable = 0u64;
        let mut general = 0u64;
        let mut makespan = 0u64;
        for (u, unit) in inst.units.iter().enumerate() {
            if placement[u] != Some(p) {
                continue;
            }
            let t = inst.matrix.cells[u][p]?;
            let seats = u64::from(unit.vehicle.capacity) - 1;
            if unit.vehicle.special_needs_capable {
                capable += seats;
            } else {
                general += seats;
            }
            makespan = makespan.max(t);
            s.total_time += t;
        }
        let demand = u64::from(point.demand);
        let special = u64::from(point.special_needs).min(demand);
        // special-needs people ride only in capable seats; leftover capable
        // seats take anyone
        let special_loaded = special.min(capable);
        let others_loaded = (demand - special).min(general + capable - special_loaded);
        s.weighted_coverage += weight(inst, point.priority) * (special_loaded + others_loaded);
        s.total_makespan += makespan;
    }
    Some(s)
}

/// `a` strictly better than `b`.
pub fn better(a: Score, b: Score) -> bool {
    if a.weighted_coverage != b.weighted_coverage {
        return a.weighted_coverage > b.weighted_coverage;
    }
    if a.total_makespan != b.total_makespan {
        return a.total_makespan < b.total_makespan;
    }
    a.total_time < b.total_time
}

fn mapping_of(inst: &AssignmentInstance, placement: &[Option<usize>]) -> Vec<(String, String)> {
    let mut m: Vec<(String, String)> = placement
        .iter()
        .enumerate()
        .filter_map(|(u, p)| p.map(|p| (inst.units[u].id.clone(), inst.points[p].id.clone())))
        .collect();
    m.sort();
    m
}

/// Optimal score and the lexicographically smallest optimal mapping.
pub fn brute_force(inst: &AssignmentInstance) -> (Score, Vec<(String, String)>) {
    let nu = inst.units.len();
    let base = inst.points.len() + 1;
    let total = base.pow(nu as u32);
    let mut best: Option<(Score, Vec<(String, String)>)> = None;
    let mut placement = vec![None; nu];
    for code in 0..total {
        let mut c = code;
        for slot in placement.iter_mut() {
            let digit = c % base;
            c /= base;
            *slot = (digit > 0).then(|| digit - 1);
        }
        let Some(s) = score(inst, &placement) else { continue };
        let replace = match &best {
            None => true,
            Some((b, m)) => better(s, *b) || (s == *b && mapping_of(inst, &placement) < *m),
        };
        if replace {
            best = Some((s, mapping_of(inst, &placement)));
        }
    }
    best.expect("the empty placement is always feasible")
}
