//! A single failure-study run: dropped orderwire packets, the resulting
//! diagnosis and the log tail that shows where configuration stalled.

use rdrn::scenario::{load_config, run_scenario};

fn main() {
    let cfg = load_config(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/configs/comm_failures.cfg"
    ))
    .unwrap();
    let out = run_scenario(&cfg).unwrap();
    print!("{}", out.summary());
    println!("exit code {}", out.exit_code());
    println!("last transitions:");
    for line in out.log.iter().rev().take(8).rev() {
        println!("  {line}");
    }
}
