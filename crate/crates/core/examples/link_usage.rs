//! Link and (beam, slot) usage for mobile RNs around two ESs, at 4 and 7
//! RNs.

use rdrn::scenario::{load_config, run_batch, RunMetrics, ScenarioConfig};

fn main() {
    let base = load_config(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/configs/link_usage.cfg"
    ))
    .unwrap();
    let seeds: Vec<u64> = (1..=5).collect();
    for n in [4, 7] {
        let cfg = ScenarioConfig {
            num_rn: n,
            ..base.clone()
        };
        let runs = run_batch(&cfg, &seeds).unwrap();
        let m = RunMetrics::merge(runs.iter().map(|r| &r.metrics));
        println!(
            "{n} RNs, {} runs: {} handoffs, {} link-absent samples",
            m.runs,
            m.handoffs(),
            m.link_absent
        );
        println!("  links in use -> cumulative fraction of samples");
        for (k, p) in m.link_usage_cdf() {
            println!("    {k:2} {p:.3}");
        }
        let busiest: Vec<String> = m
            .beam_slot_usage
            .iter()
            .take(8)
            .map(|((b, s), c)| format!("b{b}s{s}={c}"))
            .collect();
        println!("  (beam, slot) samples: {}", busiest.join(" "));
    }
}
