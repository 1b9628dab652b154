mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdrn::domain::{
    packet_size_bits, Callsign, GeoPosition, OrderwirePacket, Payload, SimTime, Vci,
};
use rdrn::ncp::{
    parse_transition, step_es, step_rn, Action, Ctx, EsEvent, EsPhase, EsState, NcpParams, RnEvent,
    RnPhase, RnState, Via,
};
use rdrn::pnni::{
    prepare_handoff, random_hierarchy, ActiveVc, NodePath, RandomHierarchy, VciUsage,
};
use rdrn::scenario::{
    load_config, parse_config, run_scenario, run_with_layout, Layout, ScenarioConfig,
};
use rdrn::vnc::{vnc_packet_stream, LpId, StreamItem, TimeWarp, VncStreamConfig};

fn config(name: &str) -> ScenarioConfig {
    load_config(format!("{}/configs/{name}.cfg", env!("CARGO_MANIFEST_DIR")))
        .expect("shipped config parses")
}

fn cs(s: &str) -> Callsign {
    Callsign::new(s).unwrap()
}

const SHIPPED: [&str; 4] = ["mycall_timer", "link_usage", "mobile_es", "comm_failures"];

const EVENTS: [&str; 5] = [
    "boot",
    "gps",
    "master_failed",
    "link_failed",
    "fault:master_fail",
];
const TIMERS: [&str; 7] = [
    "MYCALL",
    "BEACON",
    "NEWSWITCH_RETRY/",
    "TOPOLOGY_WAIT",
    "TOPOLOGY_DONE",
    "RN_RETRY",
    "POS_UPDATE",
];
const KINDS: [&str; 7] = [
    "MYCALL",
    "NEWSWITCH",
    "SWITCHPOS",
    "TOPOLOGY",
    "USER_POS",
    "HANDOFF",
    "GVT_UPDATE",
];
const OTHER_LINES: [&str; 7] = [
    "ROLLBACK",
    "CALL_SETUP",
    "SCOPED_CALL_ABORT",
    "RELEASE",
    "PNNI_REROUTE",
    "FAULT",
    "DIAGNOSIS",
];

fn known_event(e: &str) -> bool {
    EVENTS.contains(&e)
        || e.strip_prefix("timer:").is_some_and(|t| {
            TIMERS
                .iter()
                .any(|k| t == *k || (k.ends_with('/') && t.starts_with(k)))
        })
        || e.strip_prefix("rx:").is_some_and(|k| KINDS.contains(&k))
}

#[test]
fn every_logged_transition_uses_the_declared_alphabets() {
    let mut rich = config("link_usage");
    rich.vnc = true;
    rich.pnni = true;
    rich.master_fail_at = Some(100.0);
    rich.end_time = 2400;
    let mut cfgs: Vec<ScenarioConfig> = SHIPPED.iter().map(|n| config(n)).collect();
    cfgs.push(rich);
    for cfg in cfgs {
        for seed in 1..=3 {
            let out = run_scenario(&cfg.with_seed(seed)).unwrap();
            for line in &out.log {
                match parse_transition(line) {
                    Ok(t) => assert!(known_event(&t.event), "unknown event in {line}"),
                    Err(_) => {
                        let tag = line.split_whitespace().nth(1).unwrap_or("");
                        assert!(OTHER_LINES.contains(&tag), "unparseable line {line}");
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn same_seed_same_bytes(seed in any::<u64>(), which in 0usize..4) {
        let cfg = ScenarioConfig { end_time: 1200, ..config(SHIPPED[which]).with_seed(seed) };
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        prop_assert_eq!(a.transitions_log(), b.transitions_log());
        prop_assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    }

    /// Loss-free election with arbitrary startup times, ties included.
    #[test]
    fn oldest_es_is_the_only_master(boots in prop::collection::vec(0u64..4000, 1..=5), seed in any::<u64>()) {
        let n = boots.len();
        let cfg = parse_config(&format!("[mobility]\nNumES = {n}\nNumRN = 0\n[time]\nEndTime = 1500\n[flags]\nCollisions = false\n")).unwrap();
        let mut layout = Layout::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        layout.es_boot = boots.iter().map(|b| SimTime::from_millis(*b)).collect();
        let out = run_with_layout(&cfg, layout).unwrap();
        let masters: Vec<usize> = (0..n).filter(|&i| out.final_es[i].phase == EsPhase::Master).collect();
        // ties fall to the smaller callsign, which is the smaller index
        let oldest = (0..n).min_by_key(|&i| (boots[i], i)).unwrap();
        prop_assert_eq!(masters, vec![oldest]);
    }
}

fn stream(kinds: &[u8]) -> Vec<StreamItem> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let t = SimTime::from_millis(i as u64 * 250);
            let payload = match k % 6 {
                0 => Payload::MyCall {
                    callsign: cs("ES1"),
                    startup: t,
                },
                1 => Payload::NewSwitch,
                2 => Payload::SwitchPos {
                    time: t,
                    position: GeoPosition::new(3.0, 4.0),
                },
                3 => Payload::Topology {
                    nodes: vec![
                        (cs("ES1"), GeoPosition::ORIGIN),
                        (cs("ES2"), GeoPosition::new(20.0, 0.0)),
                    ],
                    links: Vec::new(),
                },
                4 => Payload::UserPos {
                    callsign: cs("RN1"),
                    time: t,
                    position: GeoPosition::new(1.0, 1.0),
                },
                _ => Payload::Handoff(rdrn::domain::HandoffPayload::Redirect {
                    callsign: cs("ES2"),
                }),
            };
            StreamItem {
                time: t,
                source: cs("ES1"),
                packet: OrderwirePacket::real(payload),
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Virtual twins alone more than double the bit load of any mix.
    #[test]
    fn vnc_more_than_doubles_orderwire_bits(kinds in prop::collection::vec(0u8..6, 1..40)) {
        let real = stream(&kinds);
        let cfg = VncStreamConfig { lookahead: SimTime::from_secs(10), gvt_interval: SimTime::ZERO, reporters: Vec::new(), end: SimTime::ZERO };
        let bits = |s: &[StreamItem]| s.iter().map(|i| packet_size_bits(&i.packet)).sum::<usize>();
        let with = vnc_packet_stream(&real, Some(&cfg));
        prop_assert_eq!(with.len(), 2 * real.len());
        prop_assert!(bits(&with) > 2 * bits(&real));
        prop_assert_eq!(bits(&with) - 2 * bits(&real), 65 * real.len());
    }

    /// After any GVT computation every LP can still roll back to any time
    /// at or above GVT.
    #[test]
    fn rollback_at_or_above_gvt_always_succeeds(
        inj in prop::collection::vec((0u32..3, 0u64..20, 0u8..8, 0u8..3), 1..5),
        steps in prop::collection::vec(1u64..15, 1..6),
        probe in 0u64..40,
    ) {
        let mut tw = TimeWarp::new(common::Relay, vec![common::RelayState::new(); 3]);
        for (lp, t, tag, left) in &inj {
            tw.inject(LpId(*lp), SimTime::from_millis(*t), common::Hop { tag: *tag, left: *left });
        }
        let mut limit = SimTime::ZERO;
        for s in steps {
            limit += SimTime::from_millis(s);
            tw.run_until(limit).unwrap();
            let gvt = tw.update_gvt(SimTime::ZERO);
            if gvt == SimTime::MAX {
                break;
            }
            for l in tw.lps() {
                let target = gvt + SimTime::from_millis(probe);
                prop_assert!(l.clone().rollback(target).is_ok(), "rollback to {:?} failed at GVT {:?}", target, gvt);
                prop_assert!(l.clone().rollback(gvt).is_ok());
            }
        }
    }

    /// After a handoff the RN sends on its original VCI or on the
    /// announced replacement, never a third value.
    #[test]
    fn sending_vci_is_original_or_announced(seed in any::<u64>(), taken in prop::collection::vec(32u16..48, 0..12)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_hierarchy(&mut rng, &RandomHierarchy::default());
        let nodes: Vec<NodePath> = tree.nodes().cloned().collect();
        let pick: Vec<&NodePath> = nodes.choose_multiple(&mut rng, 2).collect();
        let root: NodePath = "A".parse().unwrap();
        let path = tree.shortest_path(&nodes[0], pick[0], &root).unwrap();
        let vcis = vec![Vci(40), Vci(42), Vci(44)];
        let active = ActiveVc { rn: cs("RN1"), path, vcis: vcis.clone() };
        let mut usage = VciUsage::default();
        for v in &taken {
            usage.reserve(pick[1], Vci(*v));
        }
        if let Ok(plan) = prepare_handoff(&active, pick[1], &tree, &usage) {
            let announced: BTreeMap<Vci, Vci> = plan.replacements.iter().map(|r| (r.original, r.replacement)).collect();
            let mut used = BTreeSet::new();
            for v in &vcis {
                let sent = plan.new.vci_map[v];
                prop_assert!(sent == *v || announced.get(v) == Some(&sent));
                prop_assert!(!usage.in_use(pick[1], sent));
                prop_assert!(used.insert(sent));
            }
        }
    }
}

/// A node of the reordering harness.
#[derive(Debug, Clone, PartialEq)]
enum Node {
    Es(EsState),
    Rn(RnState),
}

impl Node {
    fn callsign(&self) -> &Callsign {
        match self {
            Node::Es(s) => &s.callsign,
            Node::Rn(s) => &s.callsign,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct World {
    nodes: Vec<Node>,
    /// Broadcast copies, deliverable in any order.
    loose: Vec<(Callsign, Callsign, Payload)>,
    /// Point-to-point links, FIFO.
    links: BTreeMap<(Callsign, Callsign), VecDeque<Payload>>,
}

impl World {
    fn emit(&mut self, from: &Callsign, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::Broadcast(p) => {
                    for n in &self.nodes {
                        if n.callsign() != from {
                            self.loose
                                .push((from.clone(), n.callsign().clone(), p.clone()));
                        }
                    }
                }
                Action::Send { to, payload } => self
                    .links
                    .entry((from.clone(), to))
                    .or_default()
                    .push_back(payload),
                _ => {}
            }
        }
    }

    fn deliver(
        &mut self,
        from: Callsign,
        to: &Callsign,
        via: Via,
        payload: Payload,
        ctx: &Ctx<'_>,
    ) {
        let i = self
            .nodes
            .iter()
            .position(|n| n.callsign() == to)
            .expect("known node");
        let (node, actions) = match self.nodes[i].clone() {
            Node::Es(s) => {
                let (s, a) = step_es(s, &EsEvent::Received { from, via, payload }, ctx);
                (Node::Es(s), a)
            }
            Node::Rn(s) => {
                let (s, a) = step_rn(s, &RnEvent::Received { from, via, payload }, ctx);
                (Node::Rn(s), a)
            }
        };
        self.nodes[i] = node;
        self.emit(&to.clone(), actions);
    }

    fn key(&self) -> String {
        let mut loose: Vec<String> = self.loose.iter().map(|x| format!("{x:?}")).collect();
        loose.sort();
        let links: Vec<_> = self.links.iter().filter(|(_, q)| !q.is_empty()).collect();
        format!("{:?}#{loose:?}#{links:?}", self.nodes)
    }

    fn associations(&self) -> Vec<(Callsign, RnPhase, Option<Callsign>)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Rn(s) => Some((s.callsign.clone(), s.phase, s.associated_es.clone())),
                Node::Es(_) => None,
            })
            .collect()
    }
}

fn explore(w: World, ctx: &Ctx<'_>, seen: &mut HashSet<String>, finals: &mut BTreeSet<String>) {
    if !seen.insert(w.key()) {
        return;
    }
    let heads: Vec<(Callsign, Callsign)> = w
        .links
        .iter()
        .filter(|(_, q)| !q.is_empty())
        .map(|(k, _)| k.clone())
        .collect();
    if w.loose.is_empty() && heads.is_empty() {
        finals.insert(format!("{:?}", w.associations()));
        return;
    }
    for i in 0..w.loose.len() {
        let mut next = w.clone();
        let (from, to, p) = next.loose.remove(i);
        next.deliver(from, &to, Via::Broadcast, p, ctx);
        explore(next, ctx, seen, finals);
    }
    for (from, to) in heads {
        let mut next = w.clone();
        let p = next
            .links
            .get_mut(&(from.clone(), to.clone()))
            .unwrap()
            .pop_front()
            .unwrap();
        next.deliver(from, &to, Via::P2p, p, ctx);
        explore(next, ctx, seen, finals);
    }
}

/// Three configured ESs and two booting RNs; every admissible delivery
/// order of the resulting packets ends in the same association map.
#[test]
fn association_map_is_independent_of_delivery_order() {
    let mut cfg = parse_config(
        "[mobility]\nNumES = 3\nNumRN = 0\n[time]\nEndTime = 600\n[flags]\nCollisions = false\n",
    )
    .unwrap();
    for fixes in [false, true] {
        cfg.fixes = fixes;
        let out = run_scenario(&cfg).unwrap();
        assert!(out.diagnosis.is_none(), "phase I must complete first");
        let params = NcpParams {
            fixes,
            ..cfg.ncp_params()
        };
        let ctx = Ctx {
            now: cfg.end() + SimTime::from_secs(1),
            params: &params,
        };
        let es = &out.layout.es_position;
        let placements = [
            [es[0].offset(45.0, 3.0), es[1].offset(200.0, 4.0)],
            [es[0].offset(90.0, 9.9), es[0].offset(180.0, 2.0)],
            [es[2].offset(10.0, 1.0), es[1].offset(300.0, 12.0)],
        ];
        for rns in placements {
            let mut w = World {
                nodes: out.final_es.iter().cloned().map(Node::Es).collect(),
                loose: Vec::new(),
                links: BTreeMap::new(),
            };
            for (k, pos) in rns.iter().enumerate() {
                let name = cs(&format!("RN{}", k + 1));
                let (s, a) = step_rn(
                    RnState::new(name.clone()),
                    &RnEvent::Boot { position: *pos },
                    &ctx,
                );
                w.nodes.push(Node::Rn(s));
                w.emit(&name, a);
            }
            let (mut seen, mut finals) = (HashSet::new(), BTreeSet::new());
            explore(w, &ctx, &mut seen, &mut finals);
            assert!(seen.len() > 100, "too few interleavings explored");
            assert_eq!(finals.len(), 1, "orders disagree: {finals:?}");
            assert!(
                finals.iter().next().unwrap().contains("Connected"),
                "{finals:?}"
            );
        }
    }
}
