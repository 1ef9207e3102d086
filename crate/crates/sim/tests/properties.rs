use corec_core::domain::{
    Availability, GeoPoint, Participant, PointStatus, Priority, Qualification, RescuePoint, Role, TransportMode, Vehicle,
    VolunteerUnit, WorldState,
};
use corec_sim::{emit_metrics, run, Action, Scenario, Step};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Shape {
    demands: Vec<(u32, u8)>,
    seats: Vec<u32>,
    cleared: Vec<bool>,
    withdrawn: Option<usize>,
}

fn shape() -> impl Strategy<Value = Shape> {
    (
        prop::collection::vec((0u32..15, 0u8..3), 1..5),
        prop::collection::vec(1u32..9, 0..8),
        prop::collection::vec(any::<bool>(), 4),
        prop::option::of(0usize..8),
    )
        .prop_map(|(demands, seats, cleared, withdrawn)| Shape { demands, seats, cleared, withdrawn })
}

fn scenario(s: &Shape) -> Scenario {
    let mut w = WorldState::default();
    for (i, (demand, pr)) in s.demands.iter().enumerate() {
        w.rescue_points.push(RescuePoint {
            id: format!("R{i}"),
            location: GeoPoint::new(49.41 + 0.01 * i as f64, 2.82),
            demand: *demand,
            special_needs: 0,
            priority: Priority::ALL[*pr as usize],
            accessible_modes: [TransportMode::Road].into(),
            status: PointStatus::Open,
            attributes: Default::default(),
        });
    }
    for (i, seats) in s.seats.iter().enumerate() {
        let id = format!("U{i}");
        w.units.push(VolunteerUnit {
            id: id.clone(),
            driver_name: id.clone(),
            location: GeoPoint::new(49.40, 2.80 + 0.01 * i as f64),
            vehicle: Vehicle { id: format!("v{i}"), mode: TransportMode::Road, capacity: seats + 1, special_needs_capable: false },
            qualification: Qualification::Approved,
            availability: Availability::Available,
            attributes: Default::default(),
        });
        w.participants.push(Participant { id, role: Role::Driver, name: String::new() });
    }
    w.participants.push(Participant { id: "dm".into(), role: Role::DecisionMaker, name: String::new() });

    let mut script = vec![
        Step { at: 0, action: Action::Propose { by: "dm".into(), point_ids: None } },
        Step { at: 10, action: Action::Dispatch { by: "dm".into(), plan_id: None, unit_ids: None } },
    ];
    if let Some(u) = s.withdrawn.filter(|u| *u < s.seats.len()) {
        let id = format!("U{u}");
        script.push(Step { at: 20, action: Action::Status { author: id.clone(), unit_id: id, availability: Availability::Unavailable } });
    }
    for (i, _) in s.demands.iter().enumerate().filter(|(i, _)| s.cleared[*i]) {
        script.push(Step { at: 100 + i as u64, action: Action::Clear { by: "dm".into(), point_id: format!("R{i}"), evacuated: None } });
    }
    Scenario {
        schema: 1,
        name: "prop".into(),
        description: String::new(),
        initial: w,
        script,
        config: Default::default(),
        rng_seed: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_are_bounded_and_reproducible(s in shape()) {
        let sc = scenario(&s);
        let out = run(&sc).unwrap();
        let m = &out.metrics;
        let mut evacuated = 0;
        for level in m.by_priority.values() {
            prop_assert!(level.evacuated <= level.demanded);
            if let Some(pct) = level.coverage_pct {
                prop_assert!((0.0..=100.0).contains(&pct));
            }
            evacuated += level.evacuated;
        }
        prop_assert_eq!(evacuated, m.people_evacuated);
        prop_assert!(m.units_dispatched as usize <= s.seats.len());
        prop_assert_eq!(m.events_processed as usize, out.log.len());
        prop_assert_eq!(&emit_metrics(&sc.initial, out.log.events()), m);
        prop_assert_eq!(run(&sc).unwrap().log_ndjson(), out.log_ndjson());
    }
}
