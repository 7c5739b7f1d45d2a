//! E3: the publish/subscribe interface between the gNB agent and dApps.
//!
//! Every frame is
//!
//! ```text
//! 0x45 0x33 | version 0x01 | type | u32 LE payload length | payload
//! ```
//!
//! with payload fields packed in declaration order, fixed width, little
//! endian and unpadded.

mod codec;
mod session;

pub use codec::{decode, encode, DecodeError, EncodeError, FrameDecoder, HEADER_LEN, MAX_PAYLOAD};
pub use session::{session_step, Phase, Session, SessionAction, SessionEvent, SetupParams};

use std::fmt;

use num_complex::Complex32;

use crate::mask::PrbMask;

pub const MAGIC: [u8; 2] = [0x45, 0x33];
pub const VERSION: u8 = 0x01;
/// Default TCP port of the gNB's E3 endpoint.
pub const DEFAULT_PORT: u16 = 36422;

/// The only stream currently published: I/Q of sensing symbols.
pub const STREAM_SENSING_IQ: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    SetupRequest = 0x01,
    SetupResponse = 0x02,
    Subscribe = 0x03,
    SubscribeAck = 0x04,
    IqReport = 0x05,
    ControlAction = 0x06,
    Error = 0x7F,
}

impl MessageType {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => Self::SetupRequest,
            0x02 => Self::SetupResponse,
            0x03 => Self::Subscribe,
            0x04 => Self::SubscribeAck,
            0x05 => Self::IqReport,
            0x06 => Self::ControlAction,
            0x7F => Self::Error,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ErrorCode(pub u8);

impl ErrorCode {
    pub const MALFORMED: ErrorCode = ErrorCode(0x01);
    pub const UNEXPECTED: ErrorCode = ErrorCode(0x02);
    pub const BAD_ACTION: ErrorCode = ErrorCode(0x03);
    pub const UNSUPPORTED_STREAM: ErrorCode = ErrorCode(0x04);
    pub const SETUP_MISMATCH: ErrorCode = ErrorCode(0x05);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetupRequest {
    pub ran_id: u32,
    pub n_prb: u16,
    pub fft_size: u16,
    pub mu: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqReport {
    pub frame: u32,
    pub slot: u8,
    pub symbol: u8,
    pub iq: Vec<Complex32>,
}

impl IqReport {
    pub fn n_samples(&self) -> usize {
        self.iq.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlAction {
    pub frame: u32,
    pub barred: PrbMask,
}

impl ControlAction {
    pub fn n_prb(&self) -> usize {
        self.barred.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum E3Message {
    SetupRequest(SetupRequest),
    SetupResponse { accepted: bool },
    Subscribe { stream_id: u8, period_frames: u16 },
    SubscribeAck { stream_id: u8 },
    IqReport(IqReport),
    ControlAction(ControlAction),
    Error { code: ErrorCode },
}

impl E3Message {
    pub fn message_type(&self) -> MessageType {
        match self {
            E3Message::SetupRequest(_) => MessageType::SetupRequest,
            E3Message::SetupResponse { .. } => MessageType::SetupResponse,
            E3Message::Subscribe { .. } => MessageType::Subscribe,
            E3Message::SubscribeAck { .. } => MessageType::SubscribeAck,
            E3Message::IqReport(_) => MessageType::IqReport,
            E3Message::ControlAction(_) => MessageType::ControlAction,
            E3Message::Error { .. } => MessageType::Error,
        }
    }
}

impl fmt::Display for E3Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E3Message::SetupRequest(r) => write!(
                f,
                "SetupRequest ran_id={} n_prb={} fft_size={} mu={}",
                r.ran_id, r.n_prb, r.fft_size, r.mu
            ),
            E3Message::SetupResponse { accepted } => write!(f, "SetupResponse accepted={accepted}"),
            E3Message::Subscribe { stream_id, period_frames } => {
                write!(f, "Subscribe stream={stream_id} period_frames={period_frames}")
            }
            E3Message::SubscribeAck { stream_id } => write!(f, "SubscribeAck stream={stream_id}"),
            E3Message::IqReport(r) => write!(
                f,
                "IqReport frame={} slot={} symbol={} n_samples={}",
                r.frame,
                r.slot,
                r.symbol,
                r.iq.len()
            ),
            E3Message::ControlAction(a) => {
                let barred: Vec<String> = a.barred.iter_set().map(|p| p.to_string()).collect();
                write!(f, "ControlAction frame={} n_prb={} barred=[{}]", a.frame, a.n_prb(), barred.join(","))
            }
            E3Message::Error { code } => write!(f, "Error code=0x{:02x}", code.0),
        }
    }
}
