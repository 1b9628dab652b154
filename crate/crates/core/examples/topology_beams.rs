//! Backbone topology for a handful of ESs and beam/slot allocation for the
//! RNs around one of them.

use rdrn::domain::{Callsign, GeoPosition, SimTime, SwitchPositionTable, UserPositionTable};
use rdrn::topology::{allocate_beams, nearest_neighbor_topology, solve_topology, BeamConstraints};

fn cs(s: &str) -> Callsign {
    Callsign::new(s).unwrap()
}

fn main() {
    let es: SwitchPositionTable = [
        (0.0, 0.0),
        (600.0, 0.0),
        (300.0, 500.0),
        (900.0, 450.0),
        (-200.0, 700.0),
    ]
    .iter()
    .enumerate()
    .map(|(i, (x, y))| {
        (
            cs(&format!("ES{}", i + 1)),
            GeoPosition::new(*x, *y),
            SimTime::ZERO,
        )
    })
    .collect();
    let c = BeamConstraints {
        rlink: 800.0,
        fmax: 2,
        imult: 1.0,
        twidth: 30.0,
        rwidth: 30.0,
    };

    let (solution, stats) = solve_topology(&es, &c).unwrap();
    println!(
        "search: {} candidate links, {} labeling steps",
        stats.candidates, stats.steps
    );
    print!("{}", solution.dump());
    match solution.validate(&c) {
        Ok(()) => println!("interference-free"),
        Err(v) => println!("violation: {v:?}"),
    }
    let nn = nearest_neighbor_topology(&es, &c).unwrap();
    println!(
        "nearest-neighbor shortcut: {} links, valid: {}",
        nn.links.len(),
        nn.validate(&c).is_ok()
    );

    let rns: UserPositionTable = [
        (100.0, 10.0),
        (120.0, 30.0),
        (-50.0, 80.0),
        (0.0, -90.0),
        (10.0, -100.0),
        (-80.0, -60.0),
    ]
    .iter()
    .enumerate()
    .map(|(i, (x, y))| {
        (
            cs(&format!("RN{}", i + 1)),
            GeoPosition::new(*x, *y),
            SimTime::ZERO,
        )
    })
    .collect();
    let plan = allocate_beams(GeoPosition::ORIGIN, &rns, &c, 4, 2).unwrap();
    println!("{} beams for {} RNs", plan.beams.len(), plan.rn_count());
    for (b, beam) in plan.beams.iter().enumerate() {
        let users: Vec<String> = beam
            .slots
            .iter()
            .map(|(s, rn)| format!("{rn}@slot{}", s.0))
            .collect();
        println!(
            "  beam {b}: center {:6.1} deg, width {:.0}, f{}: {}",
            beam.center,
            beam.width,
            beam.frequency.0,
            users.join(" ")
        );
    }
}
