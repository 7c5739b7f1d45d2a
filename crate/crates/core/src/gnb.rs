//! Simulated gNB: round-robin TDD scheduler with a barred-PRB mask,
//! sensing-symbol reservation, Shannon-rate throughput and the E3 agent.

use num_complex::Complex32;
use thiserror::Error;

use crate::airspace::IqSymbol;
use crate::e3::{
    ControlAction, E3Message, ErrorCode, IqReport, Session, SessionAction, SessionEvent,
    SetupRequest,
};
use crate::grid::{PrbGrid, SensingSchedule, SlotKind, TddPattern, SUBCARRIERS_PER_PRB, SYMBOLS_PER_SLOT};
use crate::mask::PrbMask;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GnbError {
    #[error("control action covers {got} PRBs, grid has {expected}")]
    MaskLength { expected: usize, got: usize },
}

impl GnbError {
    pub fn code(&self) -> ErrorCode {
        ErrorCode::BAD_ACTION
    }
}

pub type UeId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeContext {
    pub id: UeId,
    /// Per-PRB SNR without incumbent interference.
    pub snr_db: f64,
    pub full_buffer: bool,
}

impl UeContext {
    pub fn full_buffer(id: UeId, snr_db: f64) -> Self {
        Self { id, snr_db, full_buffer: true }
    }
}

/// Outcome of scheduling one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub slot: u64,
    pub kind: SlotKind,
    /// Owner of each PRB in the data symbols of this slot.
    pub assignment: Vec<Option<UeId>>,
    /// Symbols withheld from every UE for sensing.
    pub sensing_symbols: Vec<usize>,
    /// A pending barred mask took effect at the start of this slot.
    pub mask_activated: bool,
}

impl Allocation {
    pub fn n_data_symbols(&self) -> usize {
        SYMBOLS_PER_SLOT - self.sensing_symbols.len()
    }

    /// Symbols in which assigned PRBs carry UE data.
    pub fn data_symbols(&self) -> impl Iterator<Item = usize> + '_ {
        (0..SYMBOLS_PER_SLOT).filter(|s| !self.sensing_symbols.contains(s))
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn prbs_of(&self, ue: UeId) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, a)| **a == Some(ue)).map(|(p, _)| p)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PendingMask {
    mask: PrbMask,
    activation_slot: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    barred: PrbMask,
    pending: Option<PendingMask>,
    rr_cursor: usize,
    ues: Vec<UeContext>,
}

impl Scheduler {
    pub fn new(n_prb: usize, ues: Vec<UeContext>) -> Self {
        Self { barred: PrbMask::empty(n_prb), pending: None, rr_cursor: 0, ues }
    }

    pub fn n_prb(&self) -> usize {
        self.barred.len()
    }

    pub fn barred(&self) -> &PrbMask {
        &self.barred
    }

    pub fn pending(&self) -> Option<(&PrbMask, u64)> {
        self.pending.as_ref().map(|p| (&p.mask, p.activation_slot))
    }

    pub fn ues(&self) -> &[UeContext] {
        &self.ues
    }

    pub fn rr_cursor(&self) -> usize {
        self.rr_cursor
    }

    /// Queues `barred` to take effect from `current_slot + 1`. A later action
    /// in the same slot replaces an earlier one.
    pub fn apply_control_action(&mut self, barred: PrbMask, current_slot: u64) -> Result<(), GnbError> {
        if barred.len() != self.n_prb() {
            return Err(GnbError::MaskLength { expected: self.n_prb(), got: barred.len() });
        }
        self.pending = Some(PendingMask { mask: barred, activation_slot: current_slot + 1 });
        Ok(())
    }

    pub fn schedule_slot(&mut self, slot: u64, kind: SlotKind, sensing_here: &[usize]) -> Allocation {
        let mut mask_activated = false;
        if self.pending.as_ref().is_some_and(|p| p.activation_slot <= slot) {
            let p = self.pending.take().expect("checked above");
            self.barred = p.mask;
            mask_activated = true;
        }

        let mut assignment = vec![None; self.n_prb()];
        if kind != SlotKind::Special && !self.ues.is_empty() {
            let n_ue = self.ues.len();
            let free = (0..self.n_prb()).filter(|p| !self.barred.get(*p));
            let mut given = 0;
            for (i, prb) in free.enumerate() {
                assignment[prb] = Some(self.ues[(self.rr_cursor + i) % n_ue].id);
                given += 1;
            }
            self.rr_cursor = (self.rr_cursor + given) % n_ue;
        }
        let mut sensing_symbols = sensing_here.to_vec();
        sensing_symbols.sort_unstable();
        sensing_symbols.dedup();
        Allocation { slot, kind, assignment, sensing_symbols, mask_activated }
    }
}

/// Bits each UE receives in one slot under a Shannon-rate link model.
///
/// `sinr = snr / (1 + I)` per PRB; every assigned PRB carries
/// `12 * scs * log2(1 + sinr) * slot_duration * n_data / 14` bits.
pub fn slot_throughput_bits(
    alloc: &Allocation,
    grid: &PrbGrid,
    ues: &[UeContext],
    interference: &[f64],
) -> Vec<(UeId, f64)> {
    assert_eq!(interference.len(), grid.n_prb(), "interference vector length");
    let per_prb_scale = SUBCARRIERS_PER_PRB as f64
        * grid.scs_hz()
        * grid.numerology().slot_duration_s()
        * (alloc.n_data_symbols() as f64 / SYMBOLS_PER_SLOT as f64);
    ues.iter()
        .map(|ue| {
            let snr = 10f64.powf(ue.snr_db / 10.0);
            let bits: f64 = alloc
                .prbs_of(ue.id)
                .map(|p| (1.0 + snr / (1.0 + interference[p])).log2() * per_prb_scale)
                .sum();
            (ue.id, bits)
        })
        .collect()
}

/// The gNB side of the E3 interface.
#[derive(Debug, Clone)]
pub struct E3Agent {
    session: Session,
    setup: SetupRequest,
    dropped_reports: u64,
    rejected: u64,
}

/// What the agent wants done after handling one inbound message.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentOutput {
    pub replies: Vec<E3Message>,
    pub control: Option<ControlAction>,
    pub closed: bool,
}

impl E3Agent {
    pub fn new(ran_id: u32, grid: &PrbGrid) -> Self {
        Self {
            session: Session::new(),
            setup: SetupRequest {
                ran_id,
                n_prb: grid.n_prb() as u16,
                fft_size: grid.fft_size() as u16,
                mu: grid.numerology().mu(),
            },
            dropped_reports: 0,
            rejected: 0,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn dropped_reports(&self) -> u64 {
        self.dropped_reports
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn handle(&mut self, msg: E3Message) -> AgentOutput {
        let mut out = AgentOutput::default();
        for action in self.session.step(SessionEvent::Received(msg)) {
            match action {
                SessionAction::Deliver(msg) => self.on_delivered(msg, &mut out),
                SessionAction::Reject(code) => {
                    self.rejected += 1;
                    out.replies.push(E3Message::Error { code });
                }
                SessionAction::Close => out.closed = true,
            }
        }
        out
    }

    pub fn transport_closed(&mut self) {
        self.session.step(SessionEvent::TransportClosed);
    }

    fn on_delivered(&mut self, msg: E3Message, out: &mut AgentOutput) {
        let reply = match msg {
            E3Message::SetupRequest(req) => E3Message::SetupResponse {
                accepted: req.n_prb == self.setup.n_prb
                    && req.fft_size == self.setup.fft_size
                    && req.mu == self.setup.mu,
            },
            E3Message::Subscribe { stream_id, .. } => E3Message::SubscribeAck { stream_id },
            E3Message::ControlAction(action) => {
                out.control = Some(action);
                return;
            }
            _ => return,
        };
        self.send(reply, out);
    }

    fn send(&mut self, msg: E3Message, out: &mut AgentOutput) {
        for action in self.session.step(SessionEvent::Sent(msg)) {
            if let SessionAction::Deliver(m) = action {
                out.replies.push(m);
            }
        }
    }

    /// Publishes a sensing symbol to the subscriber, honouring the
    /// subscription period. Without a subscription the symbol is dropped.
    pub fn poll<T: Real>(&mut self, sym: &IqSymbol<T>) -> Vec<E3Message> {
        let Some(period) = self.session.period_frames() else {
            self.dropped_reports += 1;
            return Vec::new();
        };
        if !sym.frame.is_multiple_of(u64::from(period)) {
            return Vec::new();
        }
        let report = E3Message::IqReport(IqReport {
            frame: sym.frame as u32,
            slot: sym.slot as u8,
            symbol: sym.symbol as u8,
            iq: sym.samples.iter().map(|s| Complex32::new(s.re.widen() as f32, s.im.widen() as f32)).collect(),
        });
        let mut out = AgentOutput::default();
        self.send(report, &mut out);
        out.replies
    }
}

pub fn agent_poll<T: Real>(agent: &mut E3Agent, sym: &IqSymbol<T>) -> Vec<E3Message> {
    agent.poll(sym)
}

/// The gNB actor: frame structure, scheduler and E3 agent together.
#[derive(Debug, Clone)]
pub struct Gnb {
    grid: PrbGrid,
    pattern: TddPattern,
    schedule: SensingSchedule,
    scheduler: Scheduler,
    agent: E3Agent,
    bad_actions: u64,
}

impl Gnb {
    pub fn new(
        grid: PrbGrid,
        pattern: TddPattern,
        schedule: SensingSchedule,
        ues: Vec<UeContext>,
        ran_id: u32,
    ) -> Self {
        Self {
            scheduler: Scheduler::new(grid.n_prb(), ues),
            agent: E3Agent::new(ran_id, &grid),
            grid,
            pattern,
            schedule,
            bad_actions: 0,
        }
    }

    pub fn grid(&self) -> &PrbGrid {
        &self.grid
    }

    pub fn pattern(&self) -> &TddPattern {
        &self.pattern
    }

    pub fn sensing_schedule(&self) -> &SensingSchedule {
        &self.schedule
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn agent(&self) -> &E3Agent {
        &self.agent
    }

    pub fn bad_actions(&self) -> u64 {
        self.bad_actions
    }

    pub fn schedule_slot(&mut self, slot: u64) -> Allocation {
        let kind = self.pattern.slot_kind(slot);
        let sensing = self.schedule.symbols_in_slot(slot, self.grid.numerology());
        self.scheduler.schedule_slot(slot, kind, &sensing)
    }

    /// Handles one inbound E3 message during `current_slot`; returns replies.
    pub fn on_message(&mut self, msg: E3Message, current_slot: u64) -> Vec<E3Message> {
        let mut out = self.agent.handle(msg);
        if let Some(action) = out.control.take() {
            if let Err(e) = self.scheduler.apply_control_action(action.barred, current_slot) {
                self.bad_actions += 1;
                out.replies.push(E3Message::Error { code: e.code() });
            }
        }
        out.replies
    }

    pub fn on_transport_closed(&mut self) {
        self.agent.transport_closed();
    }

    pub fn publish<T: Real>(&mut self, sym: &IqSymbol<T>) -> Vec<E3Message> {
        self.agent.poll(sym)
    }
}
