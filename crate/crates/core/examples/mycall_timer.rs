//! Phase I study: configuration time against the number of ESs, simulated
//! and from the closed-form model.

use rdrn::perf::{phase1_time, TimingConstants};
use rdrn::scenario::{load_config, run_batch, ScenarioConfig};

fn main() {
    let base = load_config(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/configs/mycall_timer.cfg"
    ))
    .unwrap();
    let tc = TimingConstants::default().with_k_top(base.k_top);
    let seeds: Vec<u64> = (1..=20).collect();
    println!(
        "{:>4} {:>10} {:>10} {:>12} {:>10}",
        "ESs", "model s", "sim s", "MYCALLs s", "complete"
    );
    for n in 2..=6u32 {
        let cfg = ScenarioConfig {
            num_es: n,
            ..base.clone()
        };
        let runs = run_batch(&cfg, &seeds).unwrap();
        let done: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.metrics.config_complete)
            .collect();
        let heard: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.metrics.all_mycall_heard)
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let n64 = u64::from(n);
        let model = phase1_time(
            n64,
            cfg.mycall_timer,
            u64::from(cfg.fmax),
            n64 * (n64 - 1) / 2,
            &tc,
        )
        .unwrap();
        println!(
            "{n:>4} {model:>10.3} {:>10.3} {:>12.3} {:>7}/{}",
            mean(&done),
            mean(&heard),
            done.len(),
            runs.len()
        );
    }
}
