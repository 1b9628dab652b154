//! Predictive configuration for a moving RN: with look-ahead the handoff is
//! prepared before the RN crosses the boundary; without it the RN waits out
//! the whole handoff exchange. A biased heading forces rollbacks but the
//! real outcome is unchanged.

use rdrn::vnc::{run_handoff_scenario, HandoffReport, HandoffScenario};

fn show(name: &str, r: &HandoffReport) {
    println!("{name}:");
    for h in &r.handoffs {
        println!(
            "  {:7.3} s {} -> {}: interruption {:.3} s, prepared {}",
            h.time.as_secs_f64(),
            h.from,
            h.to,
            h.interruption,
            h.prepared
        );
    }
    println!(
        "  rollbacks {}, aborted preparations {}, final serving {}",
        r.rollbacks.len(),
        r.aborted_preparations,
        r.final_serving
    );
}

fn main() {
    let base = HandoffScenario::default();
    show("with look-ahead", &run_handoff_scenario(&base).unwrap());
    show(
        "without",
        &run_handoff_scenario(&HandoffScenario {
            vnc: false,
            ..base.clone()
        })
        .unwrap(),
    );
    show(
        "heading off by 30 deg",
        &run_handoff_scenario(&HandoffScenario {
            heading_bias: 30.0,
            ..base
        })
        .unwrap(),
    );
}
