//! Symbol-granularity event loop: clock → gNB → E3 → dApp → gNB.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{Ipv4Addr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use num_complex::Complex32;
use num_rational::Ratio;
use thiserror::Error;

use super::metrics::{MetricsLog, MetricsRecord, UeBits};
use super::scenario::{Scenario, Transport};
use crate::airspace::{active_footprint, interference_per_prb, Synthesizer};
use crate::dapp::DApp;
use crate::e3::{decode, encode, DecodeError, E3Message, EncodeError, FrameDecoder};
use crate::gnb::{slot_throughput_bits, Allocation, Gnb};
use crate::grid::SlotKind;
use crate::mask::PrbMask;

/// How long the gNB waits for the dApp after sending it something over TCP.
const TCP_REPLY_WAIT: Duration = Duration::from_millis(10);
const TCP_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("transport closed by peer")]
    Closed,
    #[error("undecodable frame from peer: {0}")]
    Decode(#[from] DecodeError),
    #[error("cannot encode frame: {0}")]
    Encode(#[from] EncodeError),
    #[error("dApp setup failed: {0}")]
    Dapp(String),
    #[error("E3 handshake did not complete within {0:?}")]
    HandshakeTimeout(Duration),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, Error)]
#[error("run aborted at {at_ms} ms: {source}")]
pub struct RunError {
    pub at_ms: f64,
    #[source]
    pub source: LinkError,
    pub partial: MetricsLog,
}

/// The gNB's view of the connection to its dApp.
trait Link {
    fn send(&mut self, msg: &E3Message, tick: u64) -> Result<(), LinkError>;
    /// Messages that have reached the gNB by `tick`. `expect_reply` hints
    /// that something was just sent and an answer may be on its way.
    fn recv(&mut self, tick: u64, expect_reply: bool) -> Result<Vec<E3Message>, LinkError>;
    fn finish(self: Box<Self>) -> Result<(), LinkError>;
}

/// Same-thread dApp. Every message still crosses the wire codec.
struct InprocLink {
    dapp: DApp<f64>,
    delay: u64,
    inbox: VecDeque<(u64, Vec<u8>)>,
}

impl InprocLink {
    fn new(scenario: &Scenario) -> Result<Self, LinkError> {
        let mut dapp = DApp::new(scenario.grid, scenario.detector, scenario.subscription_period_frames)
            .map_err(|e| LinkError::Dapp(e.to_string()))?;
        let opening = dapp.start();
        let mut link = Self { dapp, delay: u64::from(scenario.processing_delay_symbols), inbox: VecDeque::new() };
        link.queue(opening, 0)?;
        Ok(link)
    }

    fn queue(&mut self, msgs: Vec<E3Message>, tick: u64) -> Result<(), LinkError> {
        for m in msgs {
            self.inbox.push_back((tick + self.delay, encode(&m)?));
        }
        Ok(())
    }
}

impl Link for InprocLink {
    fn send(&mut self, msg: &E3Message, tick: u64) -> Result<(), LinkError> {
        let bytes = encode(msg)?;
        let (decoded, _) = decode(&bytes)?;
        let replies = self.dapp.step(decoded);
        self.queue(replies, tick)
    }

    fn recv(&mut self, tick: u64, _expect_reply: bool) -> Result<Vec<E3Message>, LinkError> {
        let mut out = Vec::new();
        while self.inbox.front().is_some_and(|(due, _)| *due <= tick) {
            let (_, bytes) = self.inbox.pop_front().expect("checked above");
            out.push(decode(&bytes)?.0);
        }
        Ok(out)
    }

    fn finish(self: Box<Self>) -> Result<(), LinkError> {
        Ok(())
    }
}

/// dApp in its own thread behind a loopback TCP connection.
struct TcpLink {
    stream: TcpStream,
    decoder: FrameDecoder,
    dapp_thread: Option<JoinHandle<Result<(), String>>>,
}

impl TcpLink {
    fn new(scenario: &Scenario, port: u16) -> Result<Self, LinkError> {
        let dapp = DApp::<f64>::new(scenario.grid, scenario.detector, scenario.subscription_period_frames)
            .map_err(|e| LinkError::Dapp(e.to_string()))?;
        let listener = TcpListener::bind((Ipv4Addr::LOCALHOST, port))?;
        let addr = listener.local_addr()?;
        let dapp_thread = thread::spawn(move || run_tcp_dapp(dapp, addr).map_err(|e| e.to_string()));
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, decoder: FrameDecoder::new(), dapp_thread: Some(dapp_thread) })
    }

    fn read_some(&mut self, wait: Option<Duration>) -> Result<(), LinkError> {
        match wait {
            Some(d) => {
                self.stream.set_nonblocking(false)?;
                self.stream.set_read_timeout(Some(d))?;
            }
            None => self.stream.set_nonblocking(true)?,
        }
        let mut buf = [0u8; 65536];
        match self.stream.read(&mut buf) {
            Ok(0) => Err(LinkError::Closed),
            Ok(n) => {
                self.decoder.push(&buf[..n]);
                Ok(())
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }
}

impl Link for TcpLink {
    fn send(&mut self, msg: &E3Message, _tick: u64) -> Result<(), LinkError> {
        self.stream.set_nonblocking(false)?;
        self.stream.write_all(&encode(msg)?)?;
        Ok(())
    }

    fn recv(&mut self, _tick: u64, expect_reply: bool) -> Result<Vec<E3Message>, LinkError> {
        self.read_some(expect_reply.then_some(TCP_REPLY_WAIT))?;
        let mut out = Vec::new();
        while let Some(m) = self.decoder.next_message()? {
            out.push(m);
        }
        Ok(out)
    }

    fn finish(mut self: Box<Self>) -> Result<(), LinkError> {
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
        match self.dapp_thread.take().map(JoinHandle::join) {
            Some(Ok(Err(e))) => Err(LinkError::Dapp(e)),
            Some(Err(_)) => Err(LinkError::Dapp("dApp thread panicked".into())),
            _ => Ok(()),
        }
    }
}

fn run_tcp_dapp(mut dapp: DApp<f64>, addr: std::net::SocketAddr) -> Result<(), LinkError> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    for m in dapp.start() {
        stream.write_all(&encode(&m)?)?;
    }
    let mut decoder = FrameDecoder::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) if matches!(e.kind(), io::ErrorKind::ConnectionReset | io::ErrorKind::ConnectionAborted) => break,
            Err(e) => return Err(e.into()),
        };
        decoder.push(&buf[..n]);
        while let Some(msg) = decoder.next_message()? {
            for reply in dapp.step(msg) {
                if stream.write_all(&encode(&reply)?).is_err() {
                    dapp.transport_closed();
                    return Ok(());
                }
            }
        }
    }
    dapp.transport_closed();
    Ok(())
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<MetricsLog, RunError> {
    run_with_capture(scenario, None)
}

/// As [`run`], additionally collecting every synthesized sensing symbol.
pub fn run_with_capture(
    scenario: &Scenario,
    capture: Option<&mut Vec<Vec<Complex32>>>,
) -> Result<MetricsLog, RunError> {
    let mut sim = Simulation::new(scenario, capture);
    let link: Result<Box<dyn Link>, LinkError> = match scenario.transport {
        Transport::Inproc => InprocLink::new(scenario).map(|l| Box::new(l) as Box<dyn Link>),
        Transport::Tcp { port } => TcpLink::new(scenario, port).map(|l| Box::new(l) as Box<dyn Link>),
    };
    let mut link = match link {
        Ok(l) => l,
        Err(source) => return Err(RunError { at_ms: 0.0, source, partial: sim.log }),
    };
    if matches!(scenario.transport, Transport::Tcp { .. }) {
        if let Err(source) = sim.tcp_handshake(link.as_mut()) {
            let _ = link.finish();
            return Err(RunError { at_ms: 0.0, source, partial: sim.log });
        }
    }
    let outcome = sim.drive(link.as_mut());
    let finished = link.finish();
    match outcome.and(finished) {
        Ok(()) => Ok(sim.log),
        Err(source) => Err(RunError { at_ms: sim.now_ms, source, partial: sim.log }),
    }
}

struct Simulation<'a> {
    scenario: &'a Scenario,
    gnb: Gnb,
    synth: Synthesizer<f64>,
    log: MetricsLog,
    capture: Option<&'a mut Vec<Vec<Complex32>>>,
    msgs_in: u64,
    msgs_out: u64,
    current_barred: PrbMask,
    now_ms: f64,
}

impl<'a> Simulation<'a> {
    fn new(scenario: &'a Scenario, capture: Option<&'a mut Vec<Vec<Complex32>>>) -> Self {
        let gnb = Gnb::new(
            scenario.grid,
            scenario.pattern.clone(),
            scenario.sensing.clone(),
            scenario.ues.clone(),
            scenario.ran_id,
        );
        Self {
            scenario,
            gnb,
            synth: Synthesizer::new(scenario.grid, scenario.noise),
            log: MetricsLog::default(),
            capture,
            msgs_in: 0,
            msgs_out: 0,
            current_barred: PrbMask::empty(scenario.grid.n_prb()),
            now_ms: 0.0,
        }
    }

    fn tcp_handshake(&mut self, link: &mut dyn Link) -> Result<(), LinkError> {
        let deadline = Instant::now() + TCP_HANDSHAKE_TIMEOUT;
        while !self.gnb.agent().session().is_subscribed() {
            if Instant::now() >= deadline {
                return Err(LinkError::HandshakeTimeout(TCP_HANDSHAKE_TIMEOUT));
            }
            self.deliver(link, 0, 0, true)?;
        }
        Ok(())
    }

    /// Hands every message due at `tick` to the gNB, sending its replies,
    /// until nothing more arrives.
    fn deliver(&mut self, link: &mut dyn Link, tick: u64, slot: u64, mut expect: bool) -> Result<(), LinkError> {
        loop {
            let msgs = link.recv(tick, expect)?;
            if msgs.is_empty() {
                return Ok(());
            }
            expect = false;
            for msg in msgs {
                self.msgs_in += 1;
                if matches!(msg, E3Message::ControlAction(_)) {
                    self.log.control_actions += 1;
                }
                for reply in self.gnb.on_message(msg, slot) {
                    if matches!(reply, E3Message::Error { .. }) {
                        self.log.errors_sent += 1;
                    }
                    self.send(link, &reply, tick)?;
                    expect = true;
                }
            }
        }
    }

    fn send(&mut self, link: &mut dyn Link, msg: &E3Message, tick: u64) -> Result<(), LinkError> {
        self.msgs_out += 1;
        link.send(msg, tick)
    }

    fn drive(&mut self, link: &mut dyn Link) -> Result<(), LinkError> {
        let scenario = self.scenario;
        let numerology = scenario.grid.numerology();
        let slots_per_frame = numerology.slots_per_frame() as u64;
        let symbols_per_slot = numerology.symbols_per_slot() as u64;
        let duration = scenario.duration_ms;
        let mut slot = 0u64;
        while ratio_to_f64(numerology.slot_time_ms(slot)) < duration {
            let mut sensing = Vec::new();
            for symbol in 0..symbols_per_slot {
                let tick = slot * symbols_per_slot + symbol;
                let t = numerology.symbol_time_ms(tick);
                self.now_ms = ratio_to_f64(t);
                if self.now_ms >= duration {
                    break;
                }
                self.deliver(link, tick, slot, false)?;
                if symbol == 0 {
                    let alloc = self.gnb.schedule_slot(slot);
                    self.record_slot(&alloc);
                    sensing = alloc.sensing_symbols;
                }
                if sensing.contains(&(symbol as usize)) {
                    let coords = (slot / slots_per_frame, (slot % slots_per_frame) as usize, symbol as usize);
                    let iq = self.synth.synthesize(&scenario.incumbents, self.now_ms, tick, coords);
                    if let Some(cap) = self.capture.as_deref_mut() {
                        cap.push(iq.samples.iter().map(|s| Complex32::new(s.re as f32, s.im as f32)).collect());
                    }
                    let reports = self.gnb.publish(&iq);
                    for report in &reports {
                        self.log.report_times_ms.push(t);
                        self.send(link, report, tick)?;
                    }
                    self.deliver(link, tick, slot, !reports.is_empty())?;
                }
            }
            slot += 1;
        }
        self.log.dropped_reports = self.gnb.agent().dropped_reports();
        Ok(())
    }

    fn record_slot(&mut self, alloc: &Allocation) {
        let scenario = self.scenario;
        let grid = &scenario.grid;
        let t_ms = self.now_ms;
        let interference = interference_per_prb(&scenario.incumbents, grid, t_ms);
        let bits = slot_throughput_bits(alloc, grid, &scenario.ues, &interference);
        let ue_bits = bits
            .into_iter()
            .map(|(ue_id, b)| match alloc.kind {
                SlotKind::Downlink => UeBits { ue_id, dl_bits: b, ul_bits: 0.0 },
                SlotKind::Uplink => UeBits { ue_id, dl_bits: 0.0, ul_bits: b },
                SlotKind::Special => UeBits { ue_id, dl_bits: 0.0, ul_bits: 0.0 },
            })
            .collect();
        let barred = self.gnb.scheduler().barred().clone();
        let detect_latency_ms = if alloc.mask_activated && barred != self.current_barred {
            latest_toggle(scenario, t_ms).map(|toggle| t_ms - toggle)
        } else {
            None
        };
        self.current_barred = barred.clone();
        self.log.records.push(MetricsRecord {
            t_ms,
            slot: alloc.slot,
            barred_count: barred.count(),
            barred_bitmap_hex: barred.to_hex(),
            ue_bits,
            incumbent_truth: active_footprint(&scenario.incumbents, grid, t_ms).count(),
            detect_latency_ms,
            e3_msgs_in: self.msgs_in,
            e3_msgs_out: self.msgs_out,
        });
    }
}

/// Time of the most recent incumbent toggle at or before `t_ms`.
fn latest_toggle(scenario: &Scenario, t_ms: f64) -> Option<f64> {
    scenario
        .incumbents
        .iter()
        .flat_map(|i| i.timeline.iter())
        .map(|e| e.t_ms)
        .filter(|&t| t <= t_ms)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
}
