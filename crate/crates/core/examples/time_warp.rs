//! Optimistic execution with rollback: a straggler arriving in an LP's past
//! undoes its speculative work, cancels what it sent, and the run still
//! converges to the sequential result.

use rdrn::domain::SimTime;
use rdrn::vnc::{Emit, LpId, Model, TimeWarp};

/// Each LP appends what it sees and forwards a decremented counter to the
/// next LP, 5 ms later.
struct Ring;

impl Model for Ring {
    type State = Vec<(u64, u32)>;
    type Payload = u32;

    fn handle(&self, lp: LpId, now: SimTime, s: &mut Self::State, p: &u32) -> Vec<Emit<u32>> {
        s.push((now.as_millis(), *p));
        if *p == 0 {
            return Vec::new();
        }
        vec![Emit {
            dst: Some(LpId((lp.0 + 1) % 3)),
            delay: SimTime::from_millis(5),
            payload: p - 1,
        }]
    }
}

fn main() {
    let mut tw = TimeWarp::new(Ring, vec![Vec::new(); 3]);
    tw.inject(LpId(1), SimTime::from_millis(40), 3);
    tw.run_until(SimTime::from_millis(100)).unwrap();
    println!("before the straggler:");
    for lp in tw.lps() {
        println!(
            "  lp{} lvt={} saw {:?}",
            lp.id().0,
            lp.lvt().as_millis(),
            lp.state()
        );
    }

    // Arrives at LP0 at 10 ms and reaches LP1 at 15 ms, in LP1's past.
    tw.inject(LpId(0), SimTime::from_millis(10), 2);
    tw.run_until(SimTime::from_millis(100)).unwrap();
    println!("rollbacks:");
    for r in tw.rollbacks() {
        println!("  {r}");
    }
    println!("after:");
    for lp in tw.lps() {
        println!("  lp{} saw {:?}", lp.id().0, lp.state());
    }
    let gvt = tw.update_gvt(SimTime::from_millis(100));
    let gvt = if gvt == SimTime::MAX {
        "none pending".to_string()
    } else {
        format!("{} ms", gvt.as_millis())
    };
    println!(
        "gvt: {gvt}, quiescent: {}, unmatched antimessages: {}",
        tw.is_quiescent(),
        tw.unmatched_antimessages()
    );
}
