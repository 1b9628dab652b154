use super::{Action, Ctx, Note, TimerKind, Via};
use crate::domain::{Callsign, FrequencyId, GeoPosition, HandoffPayload, Payload, SlotId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RnPhase {
    Booting,
    AwaitingHandoff,
    Connected,
}

impl RnPhase {
    pub fn name(self) -> &'static str {
        match self {
            RnPhase::Booting => "Booting",
            RnPhase::AwaitingHandoff => "AwaitingHandoff",
            RnPhase::Connected => "Connected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RnEvent {
    Boot {
        position: GeoPosition,
    },
    Timer(TimerKind),
    Received {
        from: Callsign,
        via: Via,
        payload: Payload,
    },
    PositionFix(GeoPosition),
    /// The point-to-point link to this ES went down.
    LinkFailed(Callsign),
}

impl RnEvent {
    pub fn name(&self) -> String {
        match self {
            RnEvent::Boot { .. } => "boot".into(),
            RnEvent::Timer(t) => format!("timer:{t}"),
            RnEvent::Received { payload, .. } => format!("rx:{}", payload.kind()),
            RnEvent::PositionFix(_) => "gps".into(),
            RnEvent::LinkFailed(_) => "link_failed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnState {
    pub callsign: Callsign,
    pub phase: RnPhase,
    pub position: GeoPosition,
    pub associated_es: Option<Callsign>,
    pub previous_es: Option<Callsign>,
    pub assigned: Option<(FrequencyId, SlotId)>,
    pub es_position: Option<GeoPosition>,
    pub retry_count: u32,
    /// ESs already tried through redirects since the last broadcast.
    pub tried: Vec<Callsign>,
}

impl RnState {
    pub fn new(callsign: Callsign) -> Self {
        RnState {
            callsign,
            phase: RnPhase::Booting,
            position: GeoPosition::ORIGIN,
            associated_es: None,
            previous_es: None,
            assigned: None,
            es_position: None,
            retry_count: 0,
            tried: Vec::new(),
        }
    }

    fn user_pos(&self, ctx: &Ctx<'_>) -> Payload {
        Payload::UserPos {
            callsign: self.callsign.clone(),
            time: ctx.now,
            position: self.position,
        }
    }
}

/// Advances one RN by one event.
pub fn step_rn(mut s: RnState, ev: &RnEvent, ctx: &Ctx<'_>) -> (RnState, Vec<Action>) {
    let mut out = Vec::new();
    let p = ctx.params;
    match ev {
        RnEvent::Boot { position } => {
            if s.phase == RnPhase::Booting {
                s.position = *position;
                s.phase = RnPhase::AwaitingHandoff;
                out.push(Action::Broadcast(s.user_pos(ctx)));
                out.push(Action::Arm {
                    timer: TimerKind::RnRetry,
                    after: p.rn_retry,
                });
            }
        }
        RnEvent::Timer(TimerKind::RnRetry) => {
            if s.phase == RnPhase::AwaitingHandoff {
                s.retry_count += 1;
                s.tried.clear();
                out.push(Action::Broadcast(s.user_pos(ctx)));
                out.push(Action::Arm {
                    timer: TimerKind::RnRetry,
                    after: p.rn_retry,
                });
            }
        }
        RnEvent::Timer(TimerKind::PosUpdate) => {
            if let (RnPhase::Connected, Some(es)) = (s.phase, s.associated_es.clone()) {
                out.push(Action::Send {
                    to: es,
                    payload: s.user_pos(ctx),
                });
                out.push(Action::Arm {
                    timer: TimerKind::PosUpdate,
                    after: p.pos_update,
                });
            }
        }
        RnEvent::Timer(_) => {}
        RnEvent::PositionFix(pos) => s.position = *pos,
        RnEvent::Received {
            from,
            payload: Payload::Handoff(h),
            ..
        } => match h {
            HandoffPayload::Assign {
                frequency,
                slot,
                es_position,
                ..
            } => {
                let same = s.associated_es.as_ref() == Some(from);
                if s.phase == RnPhase::Connected && !same {
                    out.push(Action::Note(Note::Ignored("assign_from_other_es")));
                } else {
                    let fresh = s.phase != RnPhase::Connected;
                    s.phase = RnPhase::Connected;
                    s.associated_es = Some(from.clone());
                    s.assigned = Some((*frequency, *slot));
                    s.es_position = Some(*es_position);
                    s.tried.clear();
                    if fresh {
                        out.push(Action::Cancel(TimerKind::RnRetry));
                        out.push(Action::Arm {
                            timer: TimerKind::PosUpdate,
                            after: p.pos_update,
                        });
                        out.push(Action::Note(Note::Connected { es: from.clone() }));
                        if let Some(prev) = s.previous_es.clone().filter(|prev| prev != from) {
                            out.push(Action::Note(Note::HandoffComplete {
                                from: prev,
                                to: from.clone(),
                            }));
                        }
                        s.previous_es = Some(from.clone());
                    }
                }
            }
            HandoffPayload::Redirect { callsign: target } => {
                let stale = s.phase == RnPhase::Connected && s.associated_es.as_ref() != Some(from);
                if stale {
                    out.push(Action::Note(Note::Ignored("stale_redirect")));
                } else {
                    let was_connected = s.phase == RnPhase::Connected;
                    s.phase = RnPhase::AwaitingHandoff;
                    s.associated_es = None;
                    s.assigned = None;
                    if was_connected {
                        out.push(Action::Cancel(TimerKind::PosUpdate));
                    }
                    if *target != *from && !s.tried.contains(target) {
                        s.tried.push(from.clone());
                        s.tried.push(target.clone());
                        out.push(Action::OpenLink(target.clone()));
                        out.push(Action::Send {
                            to: target.clone(),
                            payload: s.user_pos(ctx),
                        });
                    }
                    out.push(Action::Arm {
                        timer: TimerKind::RnRetry,
                        after: p.rn_retry,
                    });
                }
            }
        },
        RnEvent::Received { .. } => {}
        RnEvent::LinkFailed(es) => {
            if s.associated_es.as_ref() == Some(es) {
                s.phase = RnPhase::AwaitingHandoff;
                s.associated_es = None;
                s.assigned = None;
                s.tried.clear();
                out.push(Action::Cancel(TimerKind::PosUpdate));
                out.push(Action::Broadcast(s.user_pos(ctx)));
                out.push(Action::Arm {
                    timer: TimerKind::RnRetry,
                    after: p.rn_retry,
                });
            }
        }
    }
    (s, out)
}
