//! Evacuation metrics, recomputed from an event log.

use std::collections::BTreeMap;
use std::fmt;

use corec_core::domain::{Availability, Priority, WorldState};
use corec_core::store::{apply, ContextEvent, EventBody};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorityMetrics {
    pub demanded: u64,
    pub evacuated: u64,
    /// `None` when nothing was demanded at this level.
    pub coverage_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub events_processed: u64,
    pub events_rejected: u64,
    pub people_evacuated: u64,
    pub points_cleared: u64,
    pub units_dispatched: u64,
    pub by_priority: BTreeMap<Priority, PriorityMetrics>,
    /// Dispatch to arrival estimate, over dispatches that were not cancelled.
    pub mean_response_s: Option<f64>,
    pub max_response_s: Option<u64>,
    /// Final demand not matched by dispatched seats, per point.
    pub shortfall: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Copy)]
struct Trip {
    point: usize,
    seats: u32,
    travel_time_s: u64,
}

/// Metrics for a run. A dispatch counts until its unit leaves `Dispatched`
/// before the point is cleared; a cleared point evacuated the smaller of
/// its demand at clearing and the seats dispatched to it.
pub fn emit_metrics(initial: &WorldState, events: &[ContextEvent]) -> RunMetrics {
    let mut world = initial.clone();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut final_demand: Vec<u32> = Vec::new();
    let mut evacuated: Vec<u64> = Vec::new();
    let mut trips: BTreeMap<String, Trip> = BTreeMap::new();
    let mut m = RunMetrics::default();

    let sync = |world: &WorldState, index: &mut BTreeMap<String, usize>, final_demand: &mut Vec<u32>, evacuated: &mut Vec<u64>| {
        for p in &world.rescue_points {
            let i = *index.entry(p.id.clone()).or_insert_with(|| {
                final_demand.push(0);
                evacuated.push(0);
                final_demand.len() - 1
            });
            if p.status != corec_core::domain::PointStatus::Cleared {
                final_demand[i] = p.demand;
            }
        }
    };
    sync(&world, &mut index, &mut final_demand, &mut evacuated);

    for ev in events {
        m.events_processed += 1;
        let before = world.clone();
        if apply(&mut world, ev).is_err() {
            m.events_rejected += 1;
            continue;
        }
        match &ev.body {
            EventBody::PlanDispatched { dispatches, .. } => {
                for d in dispatches {
                    let point = index[&d.point_id];
                    trips.insert(d.unit_id.clone(), Trip { point, seats: d.seats, travel_time_s: d.travel_time_s });
                }
            }
            EventBody::UnitStatusChanged { unit_id, availability, .. } if *availability != Availability::Dispatched => {
                if let Some(t) = trips.get(unit_id) {
                    let cleared = world.rescue_points.iter().any(|p| {
                        index[&p.id] == t.point && p.status == corec_core::domain::PointStatus::Cleared
                    });
                    if !cleared {
                        trips.remove(unit_id);
                    }
                }
            }
            EventBody::PointCleared { point_id, .. } => {
                let i = index[point_id];
                let demand = before.point(point_id).map_or(0, |p| p.demand);
                let seats: u64 = trips.values().filter(|t| t.point == i).map(|t| u64::from(t.seats)).sum();
                evacuated[i] = u64::from(demand).min(seats);
                m.points_cleared += 1;
            }
            _ => {}
        }
        sync(&world, &mut index, &mut final_demand, &mut evacuated);
    }

    let mut dispatched_seats = vec![0u64; final_demand.len()];
    for t in trips.values() {
        dispatched_seats[t.point] += u64::from(t.seats);
    }
    for p in &world.rescue_points {
        let i = index[&p.id];
        let entry = m.by_priority.entry(p.priority).or_default();
        entry.demanded += u64::from(final_demand[i]);
        entry.evacuated += evacuated[i];
        let short = u64::from(final_demand[i]).saturating_sub(dispatched_seats[i]);
        if short > 0 {
            m.shortfall.insert(p.id.clone(), short as u32);
        }
    }
    for level in Priority::ALL {
        let entry = m.by_priority.entry(level).or_default();
        entry.coverage_pct = (entry.demanded > 0).then(|| round2(100.0 * entry.evacuated as f64 / entry.demanded as f64));
    }
    m.people_evacuated = evacuated.iter().sum();
    m.units_dispatched = trips.len() as u64;
    if !trips.is_empty() {
        let total: u64 = trips.values().map(|t| t.travel_time_s).sum();
        m.mean_response_s = Some(round2(total as f64 / trips.len() as f64));
        m.max_response_s = trips.values().map(|t| t.travel_time_s).max();
    }
    m
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl fmt::Display for RunMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        writeln!(f, "events processed   {}", self.events_processed)?;
        writeln!(f, "events rejected    {}", self.events_rejected)?;
        writeln!(f, "people evacuated   {}", self.people_evacuated)?;
        writeln!(f, "points cleared     {}", self.points_cleared)?;
        writeln!(f, "units dispatched   {}", self.units_dispatched)?;
        writeln!(f, "mean response (s)  {}", opt(self.mean_response_s))?;
        writeln!(f, "max response (s)   {}", self.max_response_s.map_or("n/a".into(), |v| v.to_string()))?;
        writeln!(f, "priority  demanded  evacuated  coverage%")?;
        for (p, pm) in self.by_priority.iter().rev() {
            writeln!(f, "{:<8}  {:>8}  {:>9}  {:>9}", format!("{p:?}").to_lowercase(), pm.demanded, pm.evacuated, opt(pm.coverage_pct))?;
        }
        if self.shortfall.is_empty() {
            writeln!(f, "shortfall          none")?;
        } else {
            for (p, s) in &self.shortfall {
                writeln!(f, "shortfall {p:<10} {s}")?;
            }
        }
        Ok(())
    }
}
