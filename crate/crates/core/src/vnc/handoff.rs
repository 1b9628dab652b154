use std::collections::BTreeMap;

use super::lp::LpId;
use super::predictor::{MobilityPredictor, PredictorMsg, PredictorState};
use super::system::{RollbackRecord, TimeWarp, Verification};
use super::tolerance::{Categorical, PositionTolerance};
use crate::domain::{Callsign, GeoPosition, SimTime, SwitchPositionTable};
use crate::perf::{phase3_time, PerfError, TimingConstants};
use crate::sim::{mobility_step, MobilityState};

/// Constant-velocity segment of a scripted trajectory, in force until
/// `until`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub until: SimTime,
    pub speed: f64,
    pub direction: f64,
}

/// One RN moving among fixed ESs, handed off with or without predictive
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoffScenario {
    pub switches: Vec<(Callsign, GeoPosition)>,
    pub start: GeoPosition,
    pub legs: Vec<Leg>,
    pub end: SimTime,
    pub gps_interval: SimTime,
    pub lookahead: SimTime,
    pub epsilon: f64,
    pub position_tolerance: f64,
    /// RNs already served by the target ES.
    pub users_at_target: u64,
    pub timing: TimingConstants,
    pub vnc: bool,
    pub heading_bias: f64,
}

impl Default for HandoffScenario {
    fn default() -> Self {
        let cs = |s: &str| Callsign::new(s).expect("valid");
        HandoffScenario {
            switches: vec![
                (cs("ES1"), GeoPosition::new(0.0, 0.0)),
                (cs("ES2"), GeoPosition::new(200.0, 0.0)),
            ],
            start: GeoPosition::new(20.0, 0.0),
            legs: vec![Leg {
                until: SimTime::from_secs(60),
                speed: 5.0,
                direction: 90.0,
            }],
            end: SimTime::from_secs(60),
            gps_interval: SimTime::from_secs(1),
            lookahead: SimTime::from_secs(10),
            epsilon: 5.0,
            position_tolerance: 1.0,
            users_at_target: 0,
            timing: TimingConstants::default(),
            vnc: true,
            heading_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffRecord {
    pub time: SimTime,
    pub from: Callsign,
    pub to: Callsign,
    /// Seconds without a usable link.
    pub interruption: f64,
    /// Whether a pre-established configuration was used.
    pub prepared: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffReport {
    pub handoffs: Vec<HandoffRecord>,
    pub rollbacks: Vec<RollbackRecord>,
    pub final_serving: Callsign,
    pub final_position: GeoPosition,
    /// Preparations abandoned because their prediction was withdrawn.
    pub aborted_preparations: usize,
    pub max_lookahead: SimTime,
    pub gvt_regressions: u32,
}

impl HandoffScenario {
    /// True motion state at `t`.
    pub fn truth(&self, t: SimTime) -> MobilityState {
        let mut m = MobilityState::stationary(self.start);
        let mut from = SimTime::ZERO;
        for leg in &self.legs {
            m.speed = leg.speed;
            m.direction = leg.direction;
            m.max_speed = m.max_speed.max(leg.speed);
            let upto = leg.until.min(t);
            if upto > from {
                m = mobility_step(&m, (upto - from).as_secs_f64());
                from = upto;
            }
            if leg.until >= t {
                return m;
            }
        }
        if let Some(last) = self.legs.last() {
            if t > from {
                m.speed = last.speed;
                m.direction = last.direction;
                m = mobility_step(&m, (t - from).as_secs_f64());
            }
        }
        m
    }
}

/// Runs the scenario. The handoff itself is triggered by the true
/// position at each GPS fix; prediction only decides whether the new
/// configuration was ready in time.
pub fn run_handoff_scenario(sc: &HandoffScenario) -> Result<HandoffReport, PerfError> {
    let switches: SwitchPositionTable = sc
        .switches
        .iter()
        .map(|(c, p)| (c.clone(), *p, SimTime::ZERO))
        .collect();
    let predictor = MobilityPredictor {
        interval: sc.gps_interval,
        switches: switches.clone(),
        epsilon: sc.epsilon,
        heading_bias: sc.heading_bias,
    };
    let cost = SimTime::from_secs_f64(phase3_time(sc.users_at_target, &sc.timing)?);
    let first = sc.truth(SimTime::ZERO);
    let mut serving = predictor
        .next_serving(None, first.position)
        .expect("at least one ES");
    let init = PredictorState {
        mobility: first,
        as_of: SimTime::ZERO,
        serving: Some(serving.clone()),
    };
    let mut tw = TimeWarp::new(predictor, [init]);
    let lp = LpId(0);
    if sc.vnc {
        tw.inject(lp, SimTime::ZERO, PredictorMsg::Tick);
    }
    let tol = (PositionTolerance(sc.position_tolerance), Categorical);
    let extract = |p: &PredictorMsg| match p {
        PredictorMsg::Predicted(x) => Some((x.position, x.serving.clone())),
        _ => None,
    };

    let mut handoffs = Vec::new();
    // target ES → real time its configuration is ready
    let mut preps: BTreeMap<Callsign, SimTime> = BTreeMap::new();
    let mut aborted = 0;
    let mut max_lookahead = SimTime::ZERO;
    let mut t = SimTime::ZERO;
    let mut position = first.position;
    while t <= sc.end {
        let truth = sc.truth(t);
        position = truth.position;
        let next = tw
            .model()
            .next_serving(Some(&serving), position)
            .expect("at least one ES");
        if sc.vnc && t > SimTime::ZERO {
            let actual = (position, Some(next.clone()));
            let v = tw
                .verify_real(lp, t, &tol, &actual, extract)
                .expect("history retained");
            if let Verification::RolledBack(_) = v {
                let fix = PredictorMsg::Fix {
                    mobility: truth,
                    at: t,
                    serving: Some(next.clone()),
                };
                tw.inject(lp, t - SimTime::from_millis(1), fix);
            }
        }
        if next != serving {
            let (interruption, prepared) = match preps.remove(&next) {
                Some(ready) if ready <= t => (0.0, true),
                Some(ready) => ((ready - t).as_secs_f64(), true),
                None => (cost.as_secs_f64(), false),
            };
            handoffs.push(HandoffRecord {
                time: t,
                from: serving.clone(),
                to: next.clone(),
                interruption,
                prepared,
            });
            serving = next;
        }
        if sc.vnc {
            tw.run_until(t + sc.lookahead).expect("history retained");
            let wanted: Vec<Callsign> = tw
                .lp(lp)
                .outputs()
                .filter(|o| o.dst.is_none() && o.recv_time > t)
                .filter_map(|o| match &o.payload {
                    PredictorMsg::Predicted(p) => p.serving.clone(),
                    _ => None,
                })
                .filter(|c| *c != serving)
                .collect();
            let before = preps.len();
            preps.retain(|c, _| wanted.contains(c));
            aborted += before - preps.len();
            for c in wanted {
                preps.entry(c).or_insert(t + cost);
            }
            tw.update_gvt(t);
            max_lookahead = max_lookahead.max(tw.gvt().lookahead());
        }
        t += sc.gps_interval;
    }
    Ok(HandoffReport {
        handoffs,
        rollbacks: tw.rollbacks().to_vec(),
        final_serving: serving,
        final_position: position,
        aborted_preparations: aborted,
        max_lookahead,
        gvt_regressions: tw.gvt().regressions,
    })
}
