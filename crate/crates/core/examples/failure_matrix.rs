//! Fault-injection matrix: drop probabilities on one packet kind, with and
//! without the protocol fixes, over a batch of seeds.

use rdrn::domain::PacketKind;
use rdrn::scenario::{parse_config, run_batch, RunOutput};

const BASE: &str = "
[mobility]
NumES = 3
NumRN = 3
RNspd = 1
RNdir = 90
[time]
EndTime = 6000
";

fn batch(kind: PacketKind, p: f64, fixes: bool, seeds: u64) -> Vec<RunOutput> {
    let mut cfg = parse_config(BASE).expect("base config");
    cfg.drops.set(kind, p).expect("probability");
    cfg.fixes = fixes;
    let seeds: Vec<u64> = (1..=seeds).collect();
    run_batch(&cfg, &seeds).expect("valid config")
}

fn main() {
    let seeds = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    println!(
        "{:<10} {:>4} {:>6} {:>9} {:>9} {:>10} {:>9}",
        "drop", "p", "fixes", "complete", "deadlock", "partition", "deprived"
    );
    for (kind, p, fixes) in [
        (PacketKind::MyCall, 0.5, false),
        (PacketKind::NewSwitch, 1.0, false),
        (PacketKind::NewSwitch, 0.5, true),
        (PacketKind::Topology, 1.0, false),
        (PacketKind::Topology, 1.0, true),
        (PacketKind::Topology, 0.5, true),
    ] {
        let runs = batch(kind, p, fixes, seeds);
        let count = |f: &dyn Fn(&RunOutput) -> bool| runs.iter().filter(|r| f(r)).count();
        println!(
            "{:<10} {:>4} {:>6} {:>9} {:>9} {:>10} {:>9}",
            kind.to_string(),
            p,
            fixes,
            count(&|r| r.metrics.config_complete.is_some()),
            count(&|r| r.metrics.deadlock),
            count(&|r| r.metrics.partition),
            count(&|r| r.metrics.deprived_associations > 0),
        );
    }
}
