//! Mobile PNNI handoff: a virtual circuit is re-rooted inside the smallest
//! peer group holding both the old and new switch, with a pre-established
//! branch, VCI re-mapping and in-order cell replay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdrn::domain::{Callsign, SimTime, Vci};
use rdrn::pnni::{
    is_strictly_increasing, prepare_handoff, random_hierarchy, replay_cells, ActiveVc,
    CellSchedule, NodePath, RandomHierarchy, VcTree, VciUsage,
};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tree = random_hierarchy(&mut rng, &RandomHierarchy::default());
    let nodes: Vec<NodePath> = tree.nodes().cloned().collect();
    let (origin, old, new) = (
        &nodes[0],
        &nodes[nodes.len() / 2],
        &nodes[nodes.len() / 2 + 1],
    );
    let root: NodePath = "A".parse().unwrap();
    let path = tree.shortest_path(origin, old, &root).unwrap();
    let active = ActiveVc {
        rn: Callsign::new("RN1").unwrap(),
        path,
        vcis: vec![Vci(40), Vci(41)],
    };

    // The new switch already uses VCI 41, so that one must be replaced.
    let mut usage = VciUsage::default();
    usage.reserve(new, Vci(41));
    let plan = prepare_handoff(&active, new, &tree, &usage).unwrap();
    println!("handoff {old} -> {new}, scope {}", plan.scope);
    println!(
        "  old branch: {:?}",
        plan.old
            .path
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
    );
    println!(
        "  new branch: {:?}",
        plan.new
            .path
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
    );
    for r in &plan.replacements {
        println!("  VCI {} replaced by {}", r.original.0, r.replacement.0);
    }

    let mut vt = VcTree::begin(&plan);
    println!("  live branches while switching: {}", vt.live_branches());
    for s in vt.complete().unwrap() {
        println!("  signal: {s:?}");
    }
    println!("  live branches after: {}", vt.live_branches());

    let sched = CellSchedule {
        interval: SimTime::from_millis(1),
        count: 20,
        unit_delay: SimTime::from_millis(10),
    };
    let cells = replay_cells(&plan.old, &plan.new, SimTime::from_millis(5), &sched);
    println!(
        "  cells delivered in order: {}",
        is_strictly_increasing(&cells)
    );
}
