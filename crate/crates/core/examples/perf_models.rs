//! Closed-form timing and capacity models: configuration time per phase and
//! the maximum position-update rate the shared orderwire sustains.

use rdrn::perf::{
    aloha_max_update_rate, phase1_time, phase2_time, phase3_time, vnc_load_factor, AlohaModel,
    TimingConstants,
};

fn main() {
    let tc = TimingConstants::default();
    println!("phase I (T = 20 s, L = 3, fully meshed)");
    for n in 2..=6u64 {
        println!(
            "  {n} ESs: {:8.3} s",
            phase1_time(n, 20.0, 3, n * (n - 1) / 2, &tc).unwrap()
        );
    }
    println!("phase II / III by users already at the switch");
    for u in [0, 1, 5, 10] {
        println!(
            "  u={u:2}: join {:7.3} s, handoff {:7.3} s",
            phase2_time(u, &tc).unwrap(),
            phase3_time(u, &tc).unwrap()
        );
    }
    println!("max updates per RN per minute");
    let plain = AlohaModel::default();
    let vnc = AlohaModel {
        vnc_enabled: true,
        ..plain
    };
    for n in [5, 10, 20, 30] {
        println!(
            "  {n:2} RNs: {:8.2} plain, {:8.2} with VNC, {:8.2} with one handoff per update",
            aloha_max_update_rate(n, &plain, 0.0).unwrap(),
            aloha_max_update_rate(n, &vnc, 0.0).unwrap(),
            aloha_max_update_rate(n, &plain, 1.0).unwrap(),
        );
    }
    println!(
        "VNC load factor at {} bits: {:.3}",
        plain.packet_bits,
        vnc_load_factor(plain.packet_bits)
    );
}
