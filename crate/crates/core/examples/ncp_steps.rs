//! Driving the protocol state machines by hand: two ESs elect a master and
//! exchange positions and topology without any simulator.

use rdrn::domain::{Callsign, GeoPosition, Payload, SimTime};
use rdrn::ncp::{step_es, Action, Ctx, EsEvent, EsState, NcpParams, TimerKind, Via};

fn broadcast(actions: &[Action]) -> Payload {
    actions
        .iter()
        .find_map(|x| {
            if let Action::Broadcast(p) = x {
                Some(p.clone())
            } else {
                None
            }
        })
        .expect("boot announces itself")
}

fn main() {
    let params = NcpParams::default();
    let ctx = |ms| Ctx {
        now: SimTime::from_millis(ms),
        params: &params,
    };
    let (a, b) = (Callsign::new("ES1").unwrap(), Callsign::new("ES2").unwrap());
    let window = SimTime::from_secs(20);

    let (es1, out1) = step_es(
        EsState::new(a.clone(), window),
        &EsEvent::Boot {
            position: GeoPosition::ORIGIN,
        },
        &ctx(0),
    );
    let (es2, out2) = step_es(
        EsState::new(b.clone(), window),
        &EsEvent::Boot {
            position: GeoPosition::new(20.0, 0.0),
        },
        &ctx(1000),
    );
    let rx = |from: &Callsign, payload| EsEvent::Received {
        from: from.clone(),
        via: Via::Broadcast,
        payload,
    };
    let (es2, _) = step_es(es2, &rx(&a, broadcast(&out1)), &ctx(1300));
    let (es1, _) = step_es(es1, &rx(&b, broadcast(&out2)), &ctx(1400));

    // The older ES's discovery window closes first.
    let (mut es1, out) = step_es(es1, &EsEvent::Timer(TimerKind::MyCall), &ctx(20_000));
    let mut es2 = es2;
    println!("ES1 after its MYCALL window: {:?}", es1.phase);
    let mut inbox: Vec<(Callsign, Action)> = out.into_iter().map(|x| (a.clone(), x)).collect();
    let mut now = 20_000;
    while !inbox.is_empty() {
        let (from, action) = inbox.remove(0);
        let (to, payload) = match action {
            Action::Send { to, payload } => (to, payload),
            other => {
                println!("  {from}: {other:?}");
                continue;
            }
        };
        now += 300;
        println!("  {from} -> {to}: {}", payload.kind());
        let ev = EsEvent::Received {
            from: from.clone(),
            via: Via::P2p,
            payload,
        };
        let out = if to == a {
            let (s, o) = step_es(es1, &ev, &ctx(now));
            es1 = s;
            o
        } else {
            let (s, o) = step_es(es2, &ev, &ctx(now));
            es2 = s;
            o
        };
        inbox.extend(out.into_iter().map(|x| (to.clone(), x)));
    }
    println!("final: ES1 {:?}, ES2 {:?}", es1.phase, es2.phase);
}
