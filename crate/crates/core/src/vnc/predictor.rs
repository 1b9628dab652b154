use super::lp::{Emit, LpId, Model};
use crate::domain::{Callsign, GeoPosition, SimTime, SwitchPositionTable};
use crate::ncp::handoff_check;
use crate::sim::{mobility_step, MobilityState};

/// Predicted RN position and serving ES at `at`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub at: SimTime,
    pub position: GeoPosition,
    pub serving: Option<Callsign>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorMsg {
    /// Observed state, valid at `at`.
    Fix {
        mobility: MobilityState,
        at: SimTime,
        serving: Option<Callsign>,
    },
    Tick,
    Predicted(Prediction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    pub mobility: MobilityState,
    pub as_of: SimTime,
    /// Serving ES at the time of the next tick.
    pub serving: Option<Callsign>,
}

/// Dead-reckoning predictor: every `interval` it extrapolates the current
/// speed and direction one interval ahead and emits the result as an
/// external output.
#[derive(Debug, Clone)]
pub struct MobilityPredictor {
    pub interval: SimTime,
    pub switches: SwitchPositionTable,
    pub epsilon: f64,
    /// Added to the heading used for extrapolation.
    pub heading_bias: f64,
}

impl MobilityPredictor {
    /// Serving ES after moving to `pos`: the nearest one initially, then
    /// only a handoff that clears the hysteresis.
    pub fn next_serving(&self, current: Option<&Callsign>, pos: GeoPosition) -> Option<Callsign> {
        match current {
            Some(c) if self.switches.contains(c) => Some(
                handoff_check(c, &self.switches, pos, self.epsilon).unwrap_or_else(|| c.clone()),
            ),
            _ => self
                .switches
                .by_distance_from(pos)
                .into_iter()
                .next()
                .map(|(c, _)| c),
        }
    }
}

impl Model for MobilityPredictor {
    type State = PredictorState;
    type Payload = PredictorMsg;

    fn handle(
        &self,
        lp: LpId,
        now: SimTime,
        s: &mut PredictorState,
        p: &PredictorMsg,
    ) -> Vec<Emit<PredictorMsg>> {
        match p {
            PredictorMsg::Fix {
                mobility,
                at,
                serving,
            } => {
                s.mobility = *mobility;
                s.as_of = *at;
                s.serving = serving.clone();
                Vec::new()
            }
            PredictorMsg::Tick => {
                if now > s.as_of {
                    s.mobility = mobility_step(&s.mobility, (now - s.as_of).as_secs_f64());
                    s.as_of = now;
                }
                let at = s.as_of + self.interval;
                let biased = MobilityState {
                    direction: s.mobility.direction + self.heading_bias,
                    ..s.mobility
                };
                let dt = (at - s.as_of).as_secs_f64();
                let position = mobility_step(&biased, dt).position;
                s.serving = self.next_serving(s.serving.as_ref(), position);
                let pred = Prediction {
                    at,
                    position,
                    serving: s.serving.clone(),
                };
                let delay = at - now;
                vec![
                    Emit {
                        dst: None,
                        delay,
                        payload: PredictorMsg::Predicted(pred),
                    },
                    Emit {
                        dst: Some(lp),
                        delay,
                        payload: PredictorMsg::Tick,
                    },
                ]
            }
            PredictorMsg::Predicted(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vnc::{PositionTolerance, TimeWarp, Verification};

    fn cs(s: &str) -> Callsign {
        Callsign::new(s).unwrap()
    }

    fn predictor() -> MobilityPredictor {
        let switches = [
            (cs("A"), GeoPosition::new(0.0, 0.0), SimTime::ZERO),
            (cs("B"), GeoPosition::new(100.0, 0.0), SimTime::ZERO),
        ]
        .into_iter()
        .collect();
        MobilityPredictor {
            interval: SimTime::from_secs(1),
            switches,
            epsilon: 0.0,
            heading_bias: 0.0,
        }
    }

    fn extract(p: &PredictorMsg) -> Option<GeoPosition> {
        match p {
            PredictorMsg::Predicted(x) => Some(x.position),
            _ => None,
        }
    }

    #[test]
    fn runs_ahead_and_predicts_a_crossing() {
        let m = predictor();
        let mob = MobilityState {
            position: GeoPosition::new(40.0, 0.0),
            speed: 5.0,
            direction: 90.0,
            max_speed: 5.0,
        };
        let init = PredictorState {
            mobility: mob,
            as_of: SimTime::ZERO,
            serving: Some(cs("A")),
        };
        let mut tw = TimeWarp::new(m, [init]);
        tw.inject(LpId(0), SimTime::ZERO, PredictorMsg::Tick);
        tw.run_until(SimTime::from_secs(5)).unwrap();
        let preds: Vec<_> = tw
            .lp(LpId(0))
            .outputs()
            .filter_map(|o| match &o.payload {
                PredictorMsg::Predicted(p) => Some(p.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(preds.len(), 6);
        assert_eq!(preds[1].serving, Some(cs("A")));
        assert_eq!(preds[2].serving, Some(cs("B")));
        assert_eq!(preds[0].serving, Some(cs("A")));
        let ok = tw.verify_real(
            LpId(0),
            SimTime::from_secs(1),
            &PositionTolerance(0.5),
            &GeoPosition::new(45.0, 0.0),
            extract,
        );
        assert_eq!(ok, Ok(Verification::Confirmed));
        let bad = tw.verify_real(
            LpId(0),
            SimTime::from_secs(2),
            &PositionTolerance(0.5),
            &GeoPosition::new(45.0, 0.0),
            extract,
        );
        match bad {
            Ok(Verification::RolledBack(r)) => {
                assert_eq!(r.to, SimTime::from_secs(1));
                assert!(r.antimessages > 0);
            }
            other => panic!("{other:?}"),
        }
    }
}
