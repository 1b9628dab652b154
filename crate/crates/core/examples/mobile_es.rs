//! Reconfiguration churn with moving ESs: a position tolerance suppresses
//! reconfigurations triggered by small moves.

use rdrn::scenario::{load_config, run_scenario, ScenarioConfig};

fn main() {
    let base = load_config(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/configs/mobile_es.cfg"
    ))
    .unwrap();
    println!(
        "{:>5} {:>10} {:>10} {:>12}",
        "eps", "reconfigs", "overlaps", "link absent"
    );
    for eps in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let (mut r, mut o, mut a) = (0, 0, 0);
        for seed in 1..=5 {
            let m = run_scenario(&ScenarioConfig {
                tolerance: eps,
                ..base.with_seed(seed)
            })
            .unwrap()
            .metrics;
            r += m.reconfigurations();
            o += m.overlapping_reconfigs;
            a += m.link_absent;
        }
        println!("{eps:>5.1} {r:>10} {o:>10} {a:>12}");
    }
}
