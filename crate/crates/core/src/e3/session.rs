//! E3 session state machine, shared by both endpoints.
//!
//! Transitions depend on the message, not on its direction: the dApp *sends*
//! the SetupRequest that the gNB *receives*, and both sides walk
//! `Idle -> SetupPending -> Established -> Subscribed` in lockstep.

use super::{E3Message, ErrorCode, SetupRequest, STREAM_SENSING_IQ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Phase {
    #[default]
    Idle,
    SetupPending,
    Established,
    Subscribed,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Idle, Phase::SetupPending, Phase::Established, Phase::Subscribed];
}

/// Grid parameters carried by the SetupRequest.
pub type SetupParams = SetupRequest;

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Sent(E3Message),
    Received(E3Message),
    TransportClosed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionAction {
    /// Pass the message on: to the transport for sent messages, to the
    /// application for received ones.
    Deliver(E3Message),
    /// Refuse the message; for received messages, answer with this code.
    Reject(ErrorCode),
    Close,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Session {
    phase: Phase,
    params: Option<SetupParams>,
    pending_period: Option<u16>,
    period_frames: Option<u16>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn params(&self) -> Option<&SetupParams> {
        self.params.as_ref()
    }

    /// Active subscription period, once subscribed.
    pub fn period_frames(&self) -> Option<u16> {
        match self.phase() {
            Phase::Subscribed => self.period_frames,
            _ => None,
        }
    }

    pub fn is_subscribed(&self) -> bool {
        self.phase() == Phase::Subscribed
    }

    pub fn step(&mut self, event: SessionEvent) -> Vec<SessionAction> {
        let msg = match event {
            SessionEvent::TransportClosed => {
                *self = Session::new();
                return vec![SessionAction::Close];
            }
            SessionEvent::Sent(m) | SessionEvent::Received(m) => m,
        };
        match self.check(&msg) {
            Ok(()) => {
                self.advance(&msg);
                vec![SessionAction::Deliver(msg)]
            }
            Err(code) => vec![SessionAction::Reject(code)],
        }
    }

    fn check(&self, msg: &E3Message) -> Result<(), ErrorCode> {
        use Phase::*;
        let phase = self.phase();
        let unexpected = Err(ErrorCode::UNEXPECTED);
        match msg {
            E3Message::Error { .. } => Ok(()),
            E3Message::SetupRequest(_) if phase == Idle => Ok(()),
            E3Message::SetupResponse { .. } if phase == SetupPending => Ok(()),
            E3Message::Subscribe { stream_id, period_frames } if matches!(phase, Established | Subscribed) => {
                if *stream_id != STREAM_SENSING_IQ {
                    Err(ErrorCode::UNSUPPORTED_STREAM)
                } else if *period_frames == 0 {
                    Err(ErrorCode::MALFORMED)
                } else {
                    Ok(())
                }
            }
            E3Message::SubscribeAck { stream_id }
                if matches!(phase, Established | Subscribed)
                    && self.pending_period.is_some()
                    && *stream_id == STREAM_SENSING_IQ =>
            {
                Ok(())
            }
            E3Message::IqReport(r) if phase == Subscribed => {
                let expected = self.params.map(|p| usize::from(p.fft_size));
                if expected == Some(r.n_samples()) {
                    Ok(())
                } else {
                    Err(ErrorCode::MALFORMED)
                }
            }
            E3Message::ControlAction(a) if matches!(phase, Established | Subscribed) => {
                let expected = self.params.map(|p| usize::from(p.n_prb));
                if expected == Some(a.n_prb()) {
                    Ok(())
                } else {
                    Err(ErrorCode::BAD_ACTION)
                }
            }
            _ => unexpected,
        }
    }

    fn advance(&mut self, msg: &E3Message) {
        match msg {
            E3Message::SetupRequest(p) => {
                self.params = Some(*p);
                self.phase = Phase::SetupPending;
            }
            E3Message::SetupResponse { accepted: true } => self.phase = Phase::Established,
            E3Message::SetupResponse { accepted: false } => *self = Session::new(),
            E3Message::Subscribe { period_frames, .. } => self.pending_period = Some(*period_frames),
            E3Message::SubscribeAck { .. } => {
                self.period_frames = self.pending_period.take();
                self.phase = Phase::Subscribed;
            }
            _ => {}
        }
    }
}

pub fn session_step(state: Session, event: SessionEvent) -> (Session, Vec<SessionAction>) {
    let mut next = state;
    let actions = next.step(event);
    (next, actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::e3::{ControlAction, IqReport};
    use crate::mask::PrbMask;
    use num_complex::Complex32;

    fn setup() -> E3Message {
        E3Message::SetupRequest(SetupRequest { ran_id: 1, n_prb: 4, fft_size: 64, mu: 1 })
    }

    fn report(n: usize) -> E3Message {
        E3Message::IqReport(IqReport { frame: 0, slot: 8, symbol: 13, iq: vec![Complex32::default(); n] })
    }

    fn action(n: usize) -> E3Message {
        E3Message::ControlAction(ControlAction { frame: 0, barred: PrbMask::empty(n) })
    }

    fn handshake() -> Session {
        let mut s = Session::new();
        s.step(SessionEvent::Sent(setup()));
        assert_eq!(s.phase(), Phase::SetupPending);
        s.step(SessionEvent::Received(E3Message::SetupResponse { accepted: true }));
        assert_eq!(s.phase(), Phase::Established);
        s.step(SessionEvent::Sent(E3Message::Subscribe { stream_id: 1, period_frames: 2 }));
        assert_eq!(s.phase(), Phase::Established);
        s.step(SessionEvent::Received(E3Message::SubscribeAck { stream_id: 1 }));
        s
    }

    /// One representative event per message kind, plus transport close.
    fn all_events() -> Vec<SessionEvent> {
        let msgs = [setup(),
            E3Message::SetupResponse { accepted: true },
            E3Message::SetupResponse { accepted: false },
            E3Message::Subscribe { stream_id: 1, period_frames: 1 },
            E3Message::SubscribeAck { stream_id: 1 },
            report(64),
            action(4),
            E3Message::Error { code: ErrorCode::UNEXPECTED }];
        let mut events: Vec<SessionEvent> = msgs
            .iter()
            .flat_map(|m| [SessionEvent::Sent(m.clone()), SessionEvent::Received(m.clone())])
            .collect();
        events.push(SessionEvent::TransportClosed);
        events
    }

    fn session_in(phase: Phase) -> Session {
        let mut s = Session::new();
        let steps: &[E3Message] = match phase {
            Phase::Idle => &[],
            Phase::SetupPending => &[setup()][..],
            Phase::Established => &[setup(), E3Message::SetupResponse { accepted: true }][..],
            Phase::Subscribed => return handshake(),
        };
        for m in steps {
            s.step(SessionEvent::Sent(m.clone()));
        }
        assert_eq!(s.phase(), phase);
        s
    }

    #[test]
    fn full_handshake_reaches_subscribed() {
        let s = handshake();
        assert_eq!(s.phase(), Phase::Subscribed);
        assert_eq!(s.period_frames(), Some(2));
    }

    #[test]
    fn iq_report_in_idle_is_rejected() {
        let (s, actions) = session_step(Session::new(), SessionEvent::Received(report(64)));
        assert_eq!(s.phase(), Phase::Idle);
        assert_eq!(actions, vec![SessionAction::Reject(ErrorCode::UNEXPECTED)]);
    }

    #[test]
    fn transport_close_resets() {
        let (s, actions) = session_step(handshake(), SessionEvent::TransportClosed);
        assert_eq!(s.phase(), Phase::Idle);
        assert_eq!(actions, vec![SessionAction::Close]);
    }

    #[test]
    fn payload_checks() {
        let mut s = handshake();
        assert_eq!(s.step(SessionEvent::Received(report(63))), vec![SessionAction::Reject(ErrorCode::MALFORMED)]);
        assert_eq!(s.step(SessionEvent::Received(action(5))), vec![SessionAction::Reject(ErrorCode::BAD_ACTION)]);
        assert!(matches!(s.step(SessionEvent::Received(action(4)))[..], [SessionAction::Deliver(_)]));

        let mut e = session_in(Phase::Established);
        assert_eq!(
            e.step(SessionEvent::Received(E3Message::Subscribe { stream_id: 9, period_frames: 1 })),
            vec![SessionAction::Reject(ErrorCode::UNSUPPORTED_STREAM)]
        );
        assert_eq!(
            e.step(SessionEvent::Received(E3Message::Subscribe { stream_id: 1, period_frames: 0 })),
            vec![SessionAction::Reject(ErrorCode::MALFORMED)]
        );
        // an ack without a pending subscribe is a protocol violation
        assert_eq!(
            e.step(SessionEvent::Received(E3Message::SubscribeAck { stream_id: 1 })),
            vec![SessionAction::Reject(ErrorCode::UNEXPECTED)]
        );
    }

    #[test]
    fn control_action_needs_established_session() {
        for phase in [Phase::Idle, Phase::SetupPending] {
            let mut s = session_in(phase);
            assert_eq!(s.step(SessionEvent::Received(action(4))), vec![SessionAction::Reject(ErrorCode::UNEXPECTED)]);
            assert_eq!(s.phase(), phase);
        }
    }

    #[test]
    fn rejected_setup_returns_to_idle() {
        let mut s = session_in(Phase::SetupPending);
        s.step(SessionEvent::Received(E3Message::SetupResponse { accepted: false }));
        assert_eq!(s.phase(), Phase::Idle);
        assert!(s.params().is_none());
    }

    #[test]
    fn transition_table_is_total() {
        for phase in Phase::ALL {
            for event in all_events() {
                let before = session_in(phase);
                let (after, actions) = session_step(before.clone(), event.clone());
                assert_eq!(actions.len(), 1, "{phase:?} {event:?}");
                match &actions[0] {
                    SessionAction::Reject(_) => assert_eq!(after, before, "reject must not change state"),
                    SessionAction::Close => assert_eq!(after.phase(), Phase::Idle),
                    SessionAction::Deliver(m) => {
                        assert!(matches!(&event, SessionEvent::Sent(x) | SessionEvent::Received(x) if x == m));
                    }
                }
                // reports are only ever delivered while subscribed
                if let SessionEvent::Received(E3Message::IqReport(_)) = event {
                    let delivered = matches!(actions[0], SessionAction::Deliver(_));
                    assert_eq!(delivered, phase == Phase::Subscribed);
                }
            }
        }
    }
}
