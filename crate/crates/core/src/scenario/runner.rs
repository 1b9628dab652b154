use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::ScenarioConfig;
use super::metrics::RunMetrics;
use crate::domain::{
    packet_size_bits, Callsign, GeoPosition, OrderwirePacket, PacketKind, Payload, SimTime, Vci,
    VNC_HEADER_BITS,
};
use crate::ncp::{
    step_es, step_rn, Action, Ctx, EsEvent, EsPhase, EsState, FsmTransition, NcpParams, Note,
    RnEvent, RnPhase, RnState, Role, TimerKind, Via,
};
use crate::pnni::{
    prepare_handoff, ActiveVc, NodePath, PeerGroupTree, SignalRecord, VcTree, VciUsage,
    FIRST_DYNAMIC_VCI,
};
use crate::sim::{
    mobility_step, resample, AreaBounds, BroadcastChannel, EventQueue, MobilityState, NodeId,
    P2pNetwork, PoissonCallSource, RngStreams, Substream, TrafficModel, TxId,
};
use crate::vnc::{
    LpId, MobilityPredictor, PositionTolerance, PredictorMsg, PredictorState, TimeWarp,
    Verification,
};

/// Gap between packets leaving one radio on point-to-point links.
pub const P2P_SPACING: SimTime = SimTime::from_millis(100);
/// Upper bound of the random delay before a broadcast goes on air.
pub const MAX_TX_JITTER_MS: u64 = 100;
/// Transmissions that ended this long ago can no longer overlap anything
/// still undelivered.
const CHANNEL_MEMORY: SimTime = SimTime::from_secs(30);
const GLOBAL: NodeId = NodeId(u32::MAX);

#[derive(Debug, Error, PartialEq)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Why a run ended without a complete configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnosis {
    NoMaster,
    /// The master still waits for SWITCHPOS from these ESs.
    Deadlock {
        master: Callsign,
        awaiting: Vec<Callsign>,
    },
    /// The master finished, but these ESs never got its TOPOLOGY.
    Partition {
        master: Callsign,
        missing: Vec<Callsign>,
    },
    SplitBrain {
        masters: Vec<Callsign>,
    },
}

impl Diagnosis {
    pub fn is_partition(&self) -> bool {
        matches!(
            self,
            Diagnosis::Partition { .. } | Diagnosis::SplitBrain { .. }
        )
    }

    pub fn is_deadlock(&self) -> bool {
        matches!(self, Diagnosis::Deadlock { .. } | Diagnosis::NoMaster)
    }
}

fn joined(v: &[Callsign]) -> String {
    v.iter().map(Callsign::as_str).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnosis::NoMaster => f.write_str("deadlock: no master elected"),
            Diagnosis::Deadlock { master, awaiting } => {
                write!(
                    f,
                    "deadlock: master {master} still awaits SWITCHPOS from {}",
                    joined(awaiting)
                )
            }
            Diagnosis::Partition { master, missing } => {
                write!(
                    f,
                    "partition: {} never received TOPOLOGY from master {master}",
                    joined(missing)
                )
            }
            Diagnosis::SplitBrain { masters } => {
                write!(f, "partition: several masters {}", joined(masters))
            }
        }
    }
}

/// One packet handed to a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub kind: PacketKind,
    pub via: Via,
    pub from: Callsign,
    pub to: Callsign,
    /// When the protocol issued the packet.
    pub sent: SimTime,
    /// When it went on air.
    pub departure: SimTime,
    pub delivered: SimTime,
}

/// Startup times and initial positions of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub es_boot: Vec<SimTime>,
    pub es_position: Vec<GeoPosition>,
    pub rn_boot: Vec<SimTime>,
    pub rn_position: Vec<GeoPosition>,
}

impl Layout {
    /// ESs on a row-major grid `ceil(sqrt(n))` columns wide, booting one
    /// stagger apart; RNs boot after them at uniform positions in the ES
    /// area.
    pub fn generate<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Layout {
        let n = cfg.num_es as usize;
        let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
        let es_position: Vec<GeoPosition> = (0..n)
            .map(|i| {
                GeoPosition::new(
                    (i % cols) as f64 * cfg.es_dist,
                    (i / cols) as f64 * cfg.es_dist,
                )
            })
            .collect();
        let stagger = |k: usize| SimTime::from_secs_f64(cfg.stagger * k as f64);
        let es_boot = (0..n).map(stagger).collect();
        let area = area_for(cfg, &es_position);
        let rn_boot = (0..cfg.num_rn as usize).map(|j| stagger(n + j)).collect();
        let rn_position = (0..cfg.num_rn)
            .map(|_| {
                GeoPosition::new(
                    rng.random_range(area.min.x..=area.max.x),
                    rng.random_range(area.min.y..=area.max.y),
                )
            })
            .collect();
        Layout {
            es_boot,
            es_position,
            rn_boot,
            rn_position,
        }
    }
}

fn area_for(cfg: &ScenarioConfig, es: &[GeoPosition]) -> AreaBounds {
    AreaBounds::around(es.iter().copied(), cfg.es_dist / 2.0).unwrap_or(AreaBounds {
        min: GeoPosition::ORIGIN,
        max: GeoPosition::ORIGIN,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    /// Lines of `transitions.log`.
    pub log: Vec<String>,
    pub deliveries: Vec<Delivery>,
    pub diagnosis: Option<Diagnosis>,
    pub layout: Layout,
    pub final_es: Vec<EsState>,
    pub final_rn: Vec<RnState>,
}

impl RunOutput {
    pub fn transitions_log(&self) -> String {
        let mut s = self.log.join("\n");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut s = self.metrics.summary();
        match &self.diagnosis {
            Some(d) => s.push_str(&format!("diagnosis             {d}\n")),
            None => s.push_str("diagnosis             none\n"),
        }
        s
    }

    /// 0 on success, 2 when a deadlock or partition was diagnosed.
    pub fn exit_code(&self) -> i32 {
        if self.diagnosis.is_some() {
            2
        } else {
            0
        }
    }

    /// Writes `transitions.log`, `metrics.csv` and `summary.txt`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("transitions.log"), self.transitions_log())?;
        std::fs::write(dir.join("metrics.csv"), self.metrics.to_csv())?;
        std::fs::write(dir.join("summary.txt"), self.summary())
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let streams = RngStreams::new(cfg.seed);
    let mut mobility = streams.stream(Substream::Mobility);
    let layout = Layout::generate(cfg, &mut mobility);
    Sim::new(cfg, layout, mobility)?.run()
}

/// Runs with explicit startup times and positions.
pub fn run_with_layout(cfg: &ScenarioConfig, layout: Layout) -> Result<RunOutput, RunError> {
    if layout.es_boot.len() != cfg.num_es as usize
        || layout.es_position.len() != cfg.num_es as usize
        || layout.rn_boot.len() != cfg.num_rn as usize
        || layout.rn_position.len() != cfg.num_rn as usize
    {
        return Err(RunError::Invalid(
            "layout does not match NumES/NumRN".into(),
        ));
    }
    let mobility = RngStreams::new(cfg.seed).stream(Substream::Mobility);
    Sim::new(cfg, layout, mobility)?.run()
}

/// Runs one scenario per seed on scoped threads; results keep seed order.
pub fn run_batch(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<RunOutput>, RunError> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<RunOutput>, RunError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| run_scenario(&cfg.with_seed(*s)))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ev {
    BootEs,
    BootRn,
    Timer {
        kind: TimerKind,
        gen: u64,
    },
    Rx {
        from: Callsign,
        via: Via,
        payload: Payload,
        tx: Option<TxId>,
        sent: SimTime,
        departure: SimTime,
    },
    LinkFailed(Callsign),
    MasterFailed(Callsign),
    CallSetup(u64),
    CallEnd(u64),
    Gps,
    GvtTick,
    FailMaster,
}

struct EsNode {
    state: EsState,
    mob: MobilityState,
    booted: bool,
    dead: bool,
}

impl EsNode {
    fn alive(&self) -> bool {
        self.booted && !self.dead
    }
}

struct RnNode {
    state: RnState,
    mob: MobilityState,
    booted: bool,
    /// When the RN last lost its ES.
    left_at: Option<SimTime>,
    calls: BTreeSet<u64>,
    vc: Option<ActiveVc>,
}

struct Pnni {
    tree: PeerGroupTree,
    home: NodePath,
    ln: Vec<NodePath>,
    usage: VciUsage,
}

impl Pnni {
    /// ES `i` becomes LN `A.(i/2+1).(i%2+1)`: pairs of ESs form peer groups
    /// chained border to border, and the far end of every call sits at
    /// `A.0.1`.
    fn new(num_es: usize) -> Result<Pnni, RunError> {
        let name = |i: usize| format!("A.{}.{}", i / 2 + 1, i % 2 + 1);
        let home = "A.0.1".to_string();
        let mut names = vec![home.clone()];
        names.extend((0..num_es).map(name));
        let mut links = vec![(home.clone(), name(0))];
        for i in 1..num_es {
            links.push((name(i - 1), name(i)));
            if i % 2 == 0 && i >= 2 {
                // second member of the previous group to the next group too
                links.push((name(i - 2), name(i)));
            }
        }
        let n: Vec<&str> = names.iter().map(String::as_str).collect();
        let l: Vec<(&str, &str)> = links
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let tree =
            PeerGroupTree::from_names(&n, &l).map_err(|e| RunError::Invalid(e.to_string()))?;
        let parse = |s: &str| {
            s.parse::<NodePath>()
                .map_err(|e| RunError::Invalid(e.to_string()))
        };
        Ok(Pnni {
            tree,
            home: parse(&home)?,
            ln: (0..num_es)
                .map(|i| parse(&name(i)))
                .collect::<Result<_, _>>()?,
            usage: VciUsage::default(),
        })
    }

    fn free_vci(&self, ln: &NodePath) -> Vci {
        (FIRST_DYNAMIC_VCI..=u16::MAX)
            .map(Vci)
            .find(|v| !self.usage.in_use(ln, *v))
            .unwrap_or(Vci(u16::MAX))
    }

    fn route(&self, to: &NodePath) -> Vec<NodePath> {
        let top: NodePath = "A".parse().expect("valid name");
        self.tree
            .shortest_path(&self.home, to, &top)
            .unwrap_or_else(|| vec![self.home.clone(), to.clone()])
    }
}

struct Vnc {
    tw: TimeWarp<MobilityPredictor>,
    tolerance: PositionTolerance,
    lookahead: SimTime,
}

fn predicted_position(p: &PredictorMsg) -> Option<GeoPosition> {
    match p {
        PredictorMsg::Predicted(x) => Some(x.position),
        _ => None,
    }
}

fn callsign(prefix: &str, i: usize) -> Result<Callsign, RunError> {
    Callsign::new(format!("{prefix}{}", i + 1)).map_err(|e| RunError::Invalid(e.to_string()))
}

fn secs(t: SimTime) -> f64 {
    t.as_secs_f64()
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    params: NcpParams,
    q: EventQueue<Ev>,
    chan: BroadcastChannel,
    p2p: P2pNetwork,
    es: Vec<EsNode>,
    rn: Vec<RnNode>,
    ids: BTreeMap<Callsign, NodeId>,
    timers: BTreeMap<(NodeId, TimerKind), u64>,
    next_gen: u64,
    mob_rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    chan_rng: ChaCha8Rng,
    fault_rng: ChaCha8Rng,
    area: AreaBounds,
    layout: Layout,
    log: Vec<String>,
    m: RunMetrics,
    deliveries: Vec<Delivery>,
    unresolved: Vec<(TxId, SimTime)>,
    complete: bool,
    vnc: Option<Vnc>,
    pnni: Option<Pnni>,
    call_owner: BTreeMap<u64, usize>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, layout: Layout, mob_rng: ChaCha8Rng) -> Result<Self, RunError> {
        cfg.constraints()
            .validate()
            .map_err(|e| RunError::Invalid(e.to_string()))?;
        let streams = RngStreams::new(cfg.seed);
        let params = cfg.ncp_params();
        let mut ids = BTreeMap::new();
        let mut es = Vec::new();
        for i in 0..cfg.num_es as usize {
            let c = callsign("ES", i)?;
            ids.insert(c.clone(), NodeId(i as u32));
            let mob = MobilityState {
                position: layout.es_position[i],
                speed: cfg.es_speed,
                direction: cfg.es_dir,
                max_speed: cfg.es_speed,
            };
            es.push(EsNode {
                state: EsState::new(c, params.mycall_timer),
                mob,
                booted: false,
                dead: false,
            });
        }
        let mut rn = Vec::new();
        for j in 0..cfg.num_rn as usize {
            let c = callsign("RN", j)?;
            ids.insert(c.clone(), NodeId((es.len() + j) as u32));
            let mob = MobilityState {
                position: layout.rn_position[j],
                speed: cfg.rn_speed,
                direction: cfg.rn_dir,
                max_speed: cfg.max_v,
            };
            rn.push(RnNode {
                state: RnState::new(c),
                mob,
                booted: false,
                left_at: None,
                calls: BTreeSet::new(),
                vc: None,
            });
        }
        let vnc = cfg.vnc.then(|| {
            let switches = es
                .iter()
                .map(|n| (n.state.callsign.clone(), n.mob.position, SimTime::ZERO))
                .collect();
            let model = MobilityPredictor {
                interval: SimTime::from_secs_f64(cfg.gps_interval),
                switches,
                epsilon: cfg.tolerance,
                heading_bias: 0.0,
            };
            let states = rn.iter().map(|r| PredictorState {
                mobility: r.mob,
                as_of: SimTime::ZERO,
                serving: None,
            });
            Vnc {
                tw: TimeWarp::new(model, states),
                tolerance: PositionTolerance(cfg.predict_tolerance),
                lookahead: SimTime::from_secs_f64(cfg.lookahead),
            }
        });
        let pnni = if cfg.pnni && !es.is_empty() {
            Some(Pnni::new(es.len())?)
        } else {
            None
        };
        Ok(Sim {
            cfg,
            params,
            q: EventQueue::new(),
            chan: BroadcastChannel::new(cfg.channel_model()),
            p2p: P2pNetwork::new(P2P_SPACING, cfg.drops),
            area: area_for(cfg, &layout.es_position),
            es,
            rn,
            ids,
            timers: BTreeMap::new(),
            next_gen: 0,
            mob_rng,
            loss_rng: streams.stream(Substream::Loss),
            chan_rng: streams.stream(Substream::Channel),
            fault_rng: streams.stream(Substream::Faults),
            layout,
            log: Vec::new(),
            m: RunMetrics {
                seed: cfg.seed,
                runs: 1,
                ..RunMetrics::default()
            },
            deliveries: Vec::new(),
            unresolved: Vec::new(),
            complete: false,
            vnc,
            pnni,
            call_owner: BTreeMap::new(),
        })
    }

    fn now(&self) -> SimTime {
        self.q.now()
    }

    fn es_count(&self) -> usize {
        self.es.len()
    }

    fn schedule(&mut self, at: SimTime, target: NodeId, ev: Ev) {
        if at < self.cfg.end() || at == self.cfg.end() {
            self.q
                .schedule(at, target, ev)
                .expect("never schedules into the past");
        }
    }

    fn run(mut self) -> Result<RunOutput, RunError> {
        let end = self.cfg.end();
        for i in 0..self.es.len() {
            self.schedule(self.layout.es_boot[i], NodeId(i as u32), Ev::BootEs);
        }
        let traffic = TrafficModel::new(self.cfg.vc_call_time, self.cfg.vc_call_duration)
            .map_err(|e| RunError::Invalid(e.to_string()))?;
        let mut traffic_rng = RngStreams::new(self.cfg.seed).stream(Substream::Traffic);
        let mut next_call = 0;
        for j in 0..self.rn.len() {
            let id = NodeId((self.es_count() + j) as u32);
            let boot = self.layout.rn_boot[j];
            self.schedule(boot, id, Ev::BootRn);
            for call in PoissonCallSource::new(traffic, boot, &mut traffic_rng)
                .take_while(|c| c.setup < end)
            {
                self.call_owner.insert(next_call, j);
                self.schedule(call.setup, id, Ev::CallSetup(next_call));
                self.schedule(call.teardown, id, Ev::CallEnd(next_call));
                next_call += 1;
            }
        }
        let gps = SimTime::from_secs_f64(self.cfg.gps_interval);
        self.schedule(gps, GLOBAL, Ev::Gps);
        if self.vnc.is_some() {
            self.schedule(
                SimTime::from_secs_f64(self.cfg.gvt_interval),
                GLOBAL,
                Ev::GvtTick,
            );
        }
        if let Some(t) = self.cfg.master_fail_at {
            self.schedule(SimTime::from_secs_f64(t), GLOBAL, Ev::FailMaster);
        }
        while let Some(e) = self.q.pop_until(end) {
            self.dispatch(e.target, e.action);
        }
        self.resolve_collisions(SimTime::MAX);
        Ok(self.finish())
    }

    fn dispatch(&mut self, target: NodeId, ev: Ev) {
        let n = self.es_count();
        if target == GLOBAL {
            match ev {
                Ev::Gps => self.gps_tick(),
                Ev::GvtTick => self.gvt_tick(),
                Ev::FailMaster => self.fail_master(),
                _ => unreachable!("only global events target GLOBAL"),
            }
            return;
        }
        let idx = target.0 as usize;
        if idx < n {
            let alive = self.es[idx].alive();
            let ev = match ev {
                Ev::BootEs => {
                    self.es[idx].booted = true;
                    EsEvent::Boot {
                        position: self.es[idx].mob.position,
                    }
                }
                _ if !alive => return,
                Ev::Timer { kind, gen } => {
                    if self.timers.get(&(target, kind.clone())) != Some(&gen) {
                        return;
                    }
                    self.timers.remove(&(target, kind.clone()));
                    EsEvent::Timer(kind)
                }
                Ev::Rx {
                    from,
                    via,
                    payload,
                    tx,
                    sent,
                    departure,
                } => {
                    if !self.accept_rx(target, &from, via, &payload, tx, sent, departure) {
                        return;
                    }
                    EsEvent::Received { from, via, payload }
                }
                Ev::MasterFailed(m) => EsEvent::MasterFailed(m),
                _ => return,
            };
            self.step_es_node(idx, ev);
        } else {
            let j = idx - n;
            let ev = match ev {
                Ev::BootRn => {
                    self.rn[j].booted = true;
                    self.start_predictor(j);
                    RnEvent::Boot {
                        position: self.rn[j].mob.position,
                    }
                }
                Ev::CallSetup(id) => {
                    self.m.calls_offered += 1;
                    if self.rn[j].booted && self.rn[j].state.phase == RnPhase::Connected {
                        self.m.calls_accepted += 1;
                        self.rn[j].calls.insert(id);
                    } else {
                        self.m.calls_blocked += 1;
                    }
                    return;
                }
                Ev::CallEnd(id) => {
                    self.rn[j].calls.remove(&id);
                    return;
                }
                _ if !self.rn[j].booted => return,
                Ev::Timer { kind, gen } => {
                    if self.timers.get(&(target, kind.clone())) != Some(&gen) {
                        return;
                    }
                    self.timers.remove(&(target, kind.clone()));
                    RnEvent::Timer(kind)
                }
                Ev::Rx {
                    from,
                    via,
                    payload,
                    tx,
                    sent,
                    departure,
                } => {
                    if !self.accept_rx(target, &from, via, &payload, tx, sent, departure) {
                        return;
                    }
                    RnEvent::Received { from, via, payload }
                }
                Ev::LinkFailed(es) => RnEvent::LinkFailed(es),
                _ => return,
            };
            self.step_rn_node(j, ev);
        }
    }

    fn callsign_of(&self, id: NodeId) -> &Callsign {
        let i = id.0 as usize;
        if i < self.es_count() {
            &self.es[i].state.callsign
        } else {
            &self.rn[i - self.es_count()].state.callsign
        }
    }

    fn is_alive(&self, id: NodeId) -> bool {
        let i = id.0 as usize;
        if i < self.es_count() {
            self.es[i].alive()
        } else {
            self.rn.get(i - self.es_count()).is_some_and(|r| r.booted)
        }
    }

    /// Records a delivery unless the broadcast collided.
    #[allow(clippy::too_many_arguments)]
    fn accept_rx(
        &mut self,
        to: NodeId,
        from: &Callsign,
        via: Via,
        payload: &Payload,
        tx: Option<TxId>,
        sent: SimTime,
        departure: SimTime,
    ) -> bool {
        if let Some(tx) = tx {
            if self.chan.collided(tx) {
                return false;
            }
        }
        self.deliveries.push(Delivery {
            kind: payload.kind(),
            via,
            from: from.clone(),
            to: self.callsign_of(to).clone(),
            sent,
            departure,
            delivered: self.now(),
        });
        true
    }

    fn step_es_node(&mut self, i: usize, ev: EsEvent) {
        let now = self.now();
        let node = &mut self.es[i];
        let placeholder = EsState::new(node.state.callsign.clone(), SimTime::ZERO);
        let before = std::mem::replace(&mut node.state, placeholder);
        let from = before.phase;
        let ctx = Ctx {
            now,
            params: &self.params,
        };
        let (after, actions) = step_es(before, &ev, &ctx);
        let to = after.phase;
        node.state = after;
        if from != to || !actions.is_empty() {
            let t = FsmTransition::new(
                now,
                &node.state.callsign,
                Role::Es,
                from.name(),
                ev.name(),
                to.name(),
                &actions,
            );
            self.log.push(t.to_string());
        }
        if let (
            EsEvent::Received {
                payload: Payload::MyCall { .. },
                ..
            },
            None,
        ) = (&ev, self.m.all_mycall_heard)
        {
            let n = self.es_count();
            if n > 1 && self.es[i].state.mycall_seen.len() + 1 >= n {
                self.m.all_mycall_heard = Some(secs(now));
            }
        }
        self.apply(NodeId(i as u32), actions);
        self.check_complete();
    }

    fn step_rn_node(&mut self, j: usize, ev: RnEvent) {
        let now = self.now();
        let node = &mut self.rn[j];
        let placeholder = RnState::new(node.state.callsign.clone());
        let before = std::mem::replace(&mut node.state, placeholder);
        let from = before.phase;
        let ctx = Ctx {
            now,
            params: &self.params,
        };
        let (after, actions) = step_rn(before, &ev, &ctx);
        let to = after.phase;
        node.state = after;
        if from == RnPhase::Connected && to != RnPhase::Connected {
            node.left_at = Some(now);
        }
        if from != to || !actions.is_empty() {
            let t = FsmTransition::new(
                now,
                &node.state.callsign,
                Role::Rn,
                from.name(),
                ev.name(),
                to.name(),
                &actions,
            );
            self.log.push(t.to_string());
        }
        let id = NodeId((self.es_count() + j) as u32);
        self.apply(id, actions);
        if to == RnPhase::Connected {
            self.rn[j].left_at = None;
        }
    }

    fn apply(&mut self, src: NodeId, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::Broadcast(p) => self.broadcast(src, p),
                Action::Send { to, payload } => self.send_p2p(src, &to, payload, false),
                Action::OpenLink(c) => {
                    if let Some(&dst) = self.ids.get(&c) {
                        if self.is_alive(dst) {
                            self.p2p.open(src, dst);
                        }
                    }
                }
                Action::Arm { timer, after } => {
                    self.next_gen += 1;
                    let gen = self.next_gen;
                    self.timers.insert((src, timer.clone()), gen);
                    let at = self.now() + after;
                    self.schedule(at, src, Ev::Timer { kind: timer, gen });
                }
                Action::Cancel(t) => {
                    self.timers.remove(&(src, t));
                }
                Action::Note(n) => self.note(src, n),
            }
        }
    }

    fn note(&mut self, src: NodeId, n: Note) {
        let now = self.now();
        match n {
            Note::ReconfigStart { overlapping, .. } => {
                self.m.reconfig_starts.push(secs(now));
                self.m.overlapping_reconfigs += u64::from(overlapping);
            }
            Note::Associated {
                has_topology: false,
                ..
            } => self.m.deprived_associations += 1,
            Note::Refused { .. } => self.m.refused_associations += 1,
            Note::Connected { es } => {
                let j = src.0 as usize - self.es_count();
                if self.rn[j].vc.is_none() {
                    self.establish_vc(j, &es);
                }
            }
            Note::HandoffComplete { from, to } => {
                let j = src.0 as usize - self.es_count();
                if let Some(left) = self.rn[j].left_at {
                    self.m.handoff_latencies.push(secs(now - left));
                }
                let m = resample(&self.rn[j].mob, &mut self.mob_rng);
                self.rn[j].mob = m;
                self.pnni_handoff(j, &from, &to);
            }
            _ => {}
        }
    }

    fn bits(payload: &Payload) -> usize {
        packet_size_bits(&OrderwirePacket::real(payload.clone()))
    }

    fn broadcast(&mut self, src: NodeId, p: Payload) {
        let now = self.now();
        let kind = p.kind();
        let bits = Self::bits(&p);
        let jitter = SimTime::from_millis(self.chan_rng.random_range(0..=MAX_TX_JITTER_MS));
        let start = now + jitter;
        let latency = SimTime::from_millis(kind.measured_latency_ms());
        let listeners: Vec<NodeId> = (0..(self.es.len() + self.rn.len()) as u32)
            .map(NodeId)
            .filter(|&id| id != src && self.is_alive(id))
            .collect();
        let out = self.chan.transmit(
            src,
            start,
            bits,
            kind,
            latency,
            &listeners,
            &mut self.loss_rng,
        );
        self.m.dropped_packets += (listeners.len() - out.receivers.len()) as u64;
        *self.m.packets_sent.entry(kind).or_default() += 1;
        self.m.orderwire_bits += bits as u64;
        self.m.transmissions += 1;
        self.unresolved.push((out.tx, out.end));
        if self.vnc.is_some() {
            // the virtual twin follows the real packet on the same radio
            let twin = bits + VNC_HEADER_BITS;
            self.chan.occupy(out.end, twin);
            self.m.vnc_bits += twin as u64;
        }
        let from = self.callsign_of(src).clone();
        for r in out.receivers {
            let ev = Ev::Rx {
                from: from.clone(),
                via: Via::Broadcast,
                payload: p.clone(),
                tx: Some(out.tx),
                sent: now,
                departure: start,
            };
            self.schedule(out.delivery, r, ev);
        }
    }

    fn send_p2p(&mut self, src: NodeId, to: &Callsign, p: Payload, virtual_only: bool) {
        let now = self.now();
        let Some(&dst) = self.ids.get(to) else {
            self.m.link_absent += 1;
            return;
        };
        let kind = p.kind();
        let bits = Self::bits(&p);
        let latency = SimTime::from_millis(kind.measured_latency_ms());
        *self.m.packets_sent.entry(kind).or_default() += 1;
        if virtual_only {
            self.m.vnc_bits += bits as u64;
        } else {
            self.m.orderwire_bits += bits as u64;
            if self.vnc.is_some() {
                self.m.vnc_bits += (bits + VNC_HEADER_BITS) as u64;
            }
        }
        match self
            .p2p
            .send(now, src, dst, kind, latency, &mut self.loss_rng)
        {
            Ok(s) => match s.delivery {
                Some(at) => {
                    let from = self.callsign_of(src).clone();
                    let ev = Ev::Rx {
                        from,
                        via: Via::P2p,
                        payload: p,
                        tx: None,
                        sent: now,
                        departure: s.departure,
                    };
                    self.schedule(at, dst, ev);
                }
                None => self.m.dropped_packets += 1,
            },
            Err(_) => self.m.link_absent += 1,
        }
    }

    fn resolve_collisions(&mut self, upto: SimTime) {
        let (done, keep): (Vec<_>, Vec<_>) =
            self.unresolved.drain(..).partition(|(_, end)| *end <= upto);
        self.unresolved = keep;
        for (tx, _) in done {
            if self.chan.collided(tx) {
                self.m.collisions += 1;
            }
        }
    }

    fn gps_tick(&mut self) {
        let now = self.now();
        let dt = self.cfg.gps_interval;
        for i in 0..self.es.len() {
            if self.es[i].alive() {
                let m = mobility_step(&self.es[i].mob, dt);
                self.es[i].mob = m;
                self.step_es_node(i, EsEvent::PositionFix(m.position));
            }
        }
        for j in 0..self.rn.len() {
            if self.rn[j].booted {
                let (m, _) = self.area.reflect(&mobility_step(&self.rn[j].mob, dt));
                self.rn[j].mob = m;
                self.step_rn_node(j, RnEvent::PositionFix(m.position));
            }
        }
        self.sample_links();
        self.verify_predictions();
        self.resolve_collisions(now);
        self.chan.prune(now.saturating_sub(CHANNEL_MEMORY));
        self.schedule(now + SimTime::from_secs_f64(dt), GLOBAL, Ev::Gps);
    }

    fn sample_links(&mut self) {
        if self.rn.is_empty() {
            return;
        }
        let mut links = 0;
        for e in self.es.iter().filter(|e| e.alive()) {
            let Some(plan) = &e.state.beam_plan else {
                continue;
            };
            for (beam, slot, rn) in plan.links() {
                let Some(&id) = self.ids.get(rn) else {
                    continue;
                };
                let r = &self.rn[id.0 as usize - self.es.len()].state;
                if r.phase == RnPhase::Connected
                    && r.associated_es.as_ref() == Some(&e.state.callsign)
                {
                    links += 1;
                    *self.m.beam_slot_usage.entry((beam, slot.0)).or_default() += 1;
                }
            }
        }
        *self.m.link_samples.entry(links).or_default() += 1;
    }

    fn start_predictor(&mut self, j: usize) {
        let now = self.now();
        let mob = self.rn[j].mob;
        if let Some(v) = &mut self.vnc {
            v.tw.inject(
                LpId(j as u32),
                now,
                PredictorMsg::Fix {
                    mobility: mob,
                    at: now,
                    serving: None,
                },
            );
            v.tw.inject(
                LpId(j as u32),
                now + SimTime::from_millis(1),
                PredictorMsg::Tick,
            );
        }
    }

    /// Checks every RN predictor against the real position and runs them
    /// ahead to the lookahead bound.
    fn verify_predictions(&mut self) {
        let now = self.now();
        let Some(v) = &mut self.vnc else { return };
        for (j, r) in self.rn.iter().enumerate() {
            if !r.booted {
                continue;
            }
            let lp = LpId(j as u32);
            if let Ok(Verification::RolledBack(rec)) =
                v.tw.verify_real(lp, now, &v.tolerance, &r.mob.position, predicted_position)
            {
                self.m
                    .rollback_depths
                    .push(secs(rec.from_lvt.saturating_sub(rec.to)));
                self.log.push(format!("{} {rec}", now.as_millis()));
                let fix = PredictorMsg::Fix {
                    mobility: r.mob,
                    at: now,
                    serving: r.state.associated_es.clone(),
                };
                v.tw.inject(lp, now - SimTime::from_millis(1), fix);
            }
        }
        let _ = v.tw.run_until(now + v.lookahead);
        v.tw.update_gvt(now);
    }

    /// Every live slave reports its LVT to the master.
    fn gvt_tick(&mut self) {
        let now = self.now();
        let lvt = self.vnc.as_ref().map(|v| v.tw.gvt().gvt).unwrap_or(now);
        let reports: Vec<(NodeId, Callsign, Callsign)> = self
            .es
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.alive() && matches!(e.state.phase, EsPhase::Slave | EsPhase::Configured)
            })
            .filter_map(|(i, e)| {
                e.state
                    .master
                    .clone()
                    .map(|m| (NodeId(i as u32), e.state.callsign.clone(), m))
            })
            .collect();
        for (id, me, master) in reports {
            self.send_p2p(id, &master, Payload::GvtUpdate { reporter: me, lvt }, true);
        }
        self.schedule(
            now + SimTime::from_secs_f64(self.cfg.gvt_interval),
            GLOBAL,
            Ev::GvtTick,
        );
    }

    fn fail_master(&mut self) {
        let now = self.now();
        let Some(i) = self
            .es
            .iter()
            .position(|e| e.alive() && e.state.phase == EsPhase::Master)
        else {
            self.log
                .push(format!("{} FAULT master_fail none", now.as_millis()));
            return;
        };
        let id = NodeId(i as u32);
        let cs = self.es[i].state.callsign.clone();
        let t = FsmTransition::new(
            now,
            &cs,
            Role::Es,
            self.es[i].state.phase.name(),
            "fault:master_fail".into(),
            "Dead",
            &[],
        );
        self.log.push(t.to_string());
        self.es[i].dead = true;
        self.p2p.detach(id);
        self.timers.retain(|(n, _), _| *n != id);
        for j in 0..self.rn.len() {
            if self.rn[j].state.associated_es.as_ref() == Some(&cs) {
                let rid = NodeId((self.es.len() + j) as u32);
                self.schedule(now, rid, Ev::LinkFailed(cs.clone()));
            }
        }
        for k in 0..self.es.len() {
            if self.es[k].alive() {
                // survivors notice the silence after a random detection delay
                let d = SimTime::from_millis(self.fault_rng.random_range(500..=2000));
                self.schedule(now + d, NodeId(k as u32), Ev::MasterFailed(cs.clone()));
            }
        }
        self.check_complete();
    }

    fn establish_vc(&mut self, j: usize, es: &Callsign) {
        let now = self.now();
        let Some(p) = &mut self.pnni else { return };
        let Some(&id) = self.ids.get(es) else { return };
        let ln = p.ln[id.0 as usize].clone();
        let vci = p.free_vci(&ln);
        p.usage.reserve(&ln, vci);
        let path = p.route(&ln);
        let rec = SignalRecord::CallSetup {
            root: p.home.clone(),
            to: ln,
            hops: path.len() - 1,
        };
        self.log.push(format!("{} {rec}", now.as_millis()));
        self.m.pnni_signals += 1;
        self.rn[j].vc = Some(ActiveVc {
            rn: self.rn[j].state.callsign.clone(),
            path,
            vcis: vec![vci],
        });
    }

    fn pnni_handoff(&mut self, j: usize, from: &Callsign, to: &Callsign) {
        let now = self.now();
        let Some(p) = &mut self.pnni else { return };
        let (Some(&fid), Some(&tid)) = (self.ids.get(from), self.ids.get(to)) else {
            return;
        };
        let (old_ln, new_ln) = (p.ln[fid.0 as usize].clone(), p.ln[tid.0 as usize].clone());
        let Some(vc) = self.rn[j].vc.clone() else {
            self.establish_vc(j, to);
            return;
        };
        let mut lines = Vec::new();
        let planned = if vc.path.last() == Some(&old_ln) {
            prepare_handoff(&vc, &new_ln, &p.tree, &p.usage)
        } else {
            Err(crate::pnni::PnniError::UnknownNode(old_ln.clone()))
        };
        for v in &vc.vcis {
            if let Some(last) = vc.path.last() {
                p.usage.release(last, *v);
            }
        }
        let next = match planned {
            Ok(plan) => {
                lines.extend(plan.signals());
                let mut tree = VcTree::begin(&plan);
                if let Ok(released) = tree.complete() {
                    lines.extend(released);
                }
                let cut = vc
                    .path
                    .iter()
                    .position(|n| *n == plan.new.root)
                    .unwrap_or(0);
                let mut path = vc.path[..cut].to_vec();
                path.extend(plan.new.path.iter().cloned());
                let vcis = vc
                    .vcis
                    .iter()
                    .map(|v| plan.new.vci_map.get(v).copied().unwrap_or(*v))
                    .collect();
                ActiveVc {
                    rn: vc.rn.clone(),
                    path,
                    vcis,
                }
            }
            Err(e) => {
                self.log.push(format!(
                    "{} PNNI_REROUTE {} {}",
                    now.as_millis(),
                    vc.rn,
                    e.to_string().replace(' ', "_")
                ));
                self.m.pnni_reroutes += 1;
                let path = p.route(&new_ln);
                let vci = p.free_vci(&new_ln);
                lines.push(SignalRecord::CallSetup {
                    root: p.home.clone(),
                    to: new_ln.clone(),
                    hops: path.len() - 1,
                });
                ActiveVc {
                    rn: vc.rn.clone(),
                    path,
                    vcis: vec![vci],
                }
            }
        };
        for v in &next.vcis {
            p.usage.reserve(&new_ln, *v);
        }
        self.m.pnni_signals += lines.len() as u64;
        for l in lines {
            self.log.push(format!("{} {l}", now.as_millis()));
        }
        self.rn[j].vc = Some(next);
    }

    fn is_configured(&self) -> bool {
        let alive: Vec<&EsState> = self
            .es
            .iter()
            .filter(|e| e.alive())
            .map(|e| &e.state)
            .collect();
        let masters: Vec<&&EsState> = alive
            .iter()
            .filter(|e| e.phase == EsPhase::Master)
            .collect();
        let [m] = masters.as_slice() else {
            return false;
        };
        let Some(topo) = &m.topology else {
            return false;
        };
        if m.reconfiguring {
            return false;
        }
        alive.iter().all(|e| {
            e.callsign == m.callsign
                || (e.phase == EsPhase::Configured
                    && e.master.as_ref() == Some(&m.callsign)
                    && e.topology.as_ref() == Some(topo))
        })
    }

    fn check_complete(&mut self) {
        let done = self.is_configured();
        if done && !self.complete {
            let t = secs(self.now());
            self.m.config_completions.push(t);
            self.m.config_complete.get_or_insert(t);
        }
        self.complete = done;
    }

    fn diagnose(&self) -> Option<Diagnosis> {
        if self.complete {
            return None;
        }
        let alive: Vec<&EsState> = self
            .es
            .iter()
            .filter(|e| e.alive())
            .map(|e| &e.state)
            .collect();
        if alive.is_empty() {
            return None;
        }
        let masters: Vec<&EsState> = alive
            .iter()
            .copied()
            .filter(|e| e.phase == EsPhase::Master)
            .collect();
        match masters.as_slice() {
            [] => {
                let last_boot = self
                    .layout
                    .es_boot
                    .iter()
                    .copied()
                    .max()
                    .unwrap_or(SimTime::ZERO);
                let settle = last_boot + self.params.mycall_timer * 2;
                (self.cfg.end() >= settle).then_some(Diagnosis::NoMaster)
            }
            [m] => {
                if !m.awaiting.is_empty() {
                    return Some(Diagnosis::Deadlock {
                        master: m.callsign.clone(),
                        awaiting: m.awaiting.iter().cloned().collect(),
                    });
                }
                let topo = m.topology.as_ref()?;
                if m.reconfiguring {
                    return None;
                }
                let missing: Vec<Callsign> = alive
                    .iter()
                    .filter(|e| e.callsign != m.callsign && e.topology.as_ref() != Some(topo))
                    .map(|e| e.callsign.clone())
                    .collect();
                (!missing.is_empty()).then(|| Diagnosis::Partition {
                    master: m.callsign.clone(),
                    missing,
                })
            }
            many => Some(Diagnosis::SplitBrain {
                masters: many.iter().map(|m| m.callsign.clone()).collect(),
            }),
        }
    }

    fn finish(mut self) -> RunOutput {
        let diagnosis = self.diagnose();
        if let Some(d) = &diagnosis {
            self.m.partition = d.is_partition();
            self.m.deadlock = d.is_deadlock();
            self.m.diagnosed_runs = 1;
            self.log.push(format!(
                "{} DIAGNOSIS {}",
                self.cfg.end().as_millis(),
                d.to_string().replace(' ', "_")
            ));
        }
        self.m.completed_runs = u32::from(self.m.config_complete.is_some());
        RunOutput {
            metrics: self.m,
            log: self.log,
            deliveries: self.deliveries,
            diagnosis,
            layout: self.layout,
            final_es: self.es.into_iter().map(|e| e.state).collect(),
            final_rn: self.rn.into_iter().map(|r| r.state).collect(),
        }
    }
}
