use num_complex::Complex32;
use thiserror::Error;

use super::{
    ControlAction, E3Message, ErrorCode, IqReport, MessageType, SetupRequest, MAGIC, VERSION,
};
use crate::mask::{bitmap_len, PrbMask};

pub const HEADER_LEN: usize = 8;
/// Largest payload accepted by the decoder.
pub const MAX_PAYLOAD: usize = 1 << 24;

const IQ_REPORT_FIXED: usize = 4 + 1 + 1 + 2;
const CONTROL_ACTION_FIXED: usize = 4 + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("IqReport with {0} samples exceeds the 16-bit sample count")]
    TooManySamples(usize),
    #[error("ControlAction over {0} PRBs exceeds the 16-bit PRB count")]
    TooManyPrbs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("need {needed} more bytes")]
    NeedMoreBytes { needed: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("declared payload length {declared} does not match structural length {structural}")]
    LengthMismatch { declared: usize, structural: usize },
    #[error("payload length {0} exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLarge(usize),
    #[error("bitmap has bits set beyond the last PRB")]
    TrailingBitmapBitsSet,
    #[error("boolean field holds {0}, expected 0 or 1")]
    BadBool(u8),
}

pub fn encode(msg: &E3Message) -> Result<Vec<u8>, EncodeError> {
    let mut payload = Vec::new();
    match msg {
        E3Message::SetupRequest(r) => {
            payload.extend_from_slice(&r.ran_id.to_le_bytes());
            payload.extend_from_slice(&r.n_prb.to_le_bytes());
            payload.extend_from_slice(&r.fft_size.to_le_bytes());
            payload.push(r.mu);
        }
        E3Message::SetupResponse { accepted } => payload.push(u8::from(*accepted)),
        E3Message::Subscribe { stream_id, period_frames } => {
            payload.push(*stream_id);
            payload.extend_from_slice(&period_frames.to_le_bytes());
        }
        E3Message::SubscribeAck { stream_id } => payload.push(*stream_id),
        E3Message::IqReport(r) => {
            let n = u16::try_from(r.iq.len()).map_err(|_| EncodeError::TooManySamples(r.iq.len()))?;
            payload.reserve(IQ_REPORT_FIXED + 8 * r.iq.len());
            payload.extend_from_slice(&r.frame.to_le_bytes());
            payload.push(r.slot);
            payload.push(r.symbol);
            payload.extend_from_slice(&n.to_le_bytes());
            for s in &r.iq {
                payload.extend_from_slice(&s.re.to_le_bytes());
                payload.extend_from_slice(&s.im.to_le_bytes());
            }
        }
        E3Message::ControlAction(a) => {
            let n = u16::try_from(a.n_prb()).map_err(|_| EncodeError::TooManyPrbs(a.n_prb()))?;
            payload.extend_from_slice(&a.frame.to_le_bytes());
            payload.extend_from_slice(&n.to_le_bytes());
            payload.extend_from_slice(&a.barred.to_bitmap());
        }
        E3Message::Error { code } => payload.push(code.0),
    }
    let mut frame = Vec::with_capacity(HEADER_LEN + payload.len());
    frame.extend_from_slice(&MAGIC);
    frame.push(VERSION);
    frame.push(msg.message_type() as u8);
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

/// Payload size of fixed-layout message types.
fn fixed_payload_len(ty: MessageType) -> Option<usize> {
    match ty {
        MessageType::SetupRequest => Some(9),
        MessageType::SetupResponse | MessageType::SubscribeAck | MessageType::Error => Some(1),
        MessageType::Subscribe => Some(3),
        MessageType::IqReport | MessageType::ControlAction => None,
    }
}

/// Decodes one frame from the front of `bytes`, returning the message and
/// the number of bytes it occupied. Truncated input yields
/// [`DecodeError::NeedMoreBytes`] and nothing is consumed.
pub fn decode(bytes: &[u8]) -> Result<(E3Message, usize), DecodeError> {
    // Reject garbage as early as the available prefix allows.
    for (i, m) in MAGIC.iter().enumerate() {
        if bytes.get(i).is_some_and(|b| b != m) {
            return Err(DecodeError::BadMagic);
        }
    }
    if let Some(&v) = bytes.get(2) {
        if v != VERSION {
            return Err(DecodeError::BadVersion(v));
        }
    }
    let ty = match bytes.get(3) {
        Some(&t) => MessageType::from_byte(t).ok_or(DecodeError::UnknownType(t))?,
        None => return Err(DecodeError::NeedMoreBytes { needed: HEADER_LEN - bytes.len() }),
    };
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::NeedMoreBytes { needed: HEADER_LEN - bytes.len() });
    }
    let declared = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if declared > MAX_PAYLOAD {
        return Err(DecodeError::PayloadTooLarge(declared));
    }
    if let Some(structural) = fixed_payload_len(ty) {
        if declared != structural {
            return Err(DecodeError::LengthMismatch { declared, structural });
        }
    }
    let total = HEADER_LEN + declared;
    if bytes.len() < total {
        return Err(DecodeError::NeedMoreBytes { needed: total - bytes.len() });
    }
    let msg = decode_payload(ty, &bytes[HEADER_LEN..total])?;
    Ok((msg, total))
}

fn decode_payload(ty: MessageType, payload: &[u8]) -> Result<E3Message, DecodeError> {
    let mut r = Reader { buf: payload, pos: 0 };
    let msg = match ty {
        MessageType::SetupRequest => E3Message::SetupRequest(SetupRequest {
            ran_id: r.u32()?,
            n_prb: r.u16()?,
            fft_size: r.u16()?,
            mu: r.u8()?,
        }),
        MessageType::SetupResponse => E3Message::SetupResponse {
            accepted: match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(DecodeError::BadBool(other)),
            },
        },
        MessageType::Subscribe => E3Message::Subscribe { stream_id: r.u8()?, period_frames: r.u16()? },
        MessageType::SubscribeAck => E3Message::SubscribeAck { stream_id: r.u8()? },
        MessageType::IqReport => {
            let mismatch = |declared: usize, structural: usize| DecodeError::LengthMismatch { declared, structural };
            if payload.len() < IQ_REPORT_FIXED {
                return Err(mismatch(payload.len(), IQ_REPORT_FIXED));
            }
            let frame = r.u32()?;
            let slot = r.u8()?;
            let symbol = r.u8()?;
            let n = usize::from(r.u16()?);
            let structural = IQ_REPORT_FIXED + 8 * n;
            if payload.len() != structural {
                return Err(mismatch(payload.len(), structural));
            }
            let mut iq = Vec::with_capacity(n);
            for _ in 0..n {
                iq.push(Complex32::new(r.f32()?, r.f32()?));
            }
            E3Message::IqReport(IqReport { frame, slot, symbol, iq })
        }
        MessageType::ControlAction => {
            if payload.len() < CONTROL_ACTION_FIXED {
                return Err(DecodeError::LengthMismatch {
                    declared: payload.len(),
                    structural: CONTROL_ACTION_FIXED,
                });
            }
            let frame = r.u32()?;
            let n_prb = usize::from(r.u16()?);
            let structural = CONTROL_ACTION_FIXED + bitmap_len(n_prb);
            if payload.len() != structural {
                return Err(DecodeError::LengthMismatch { declared: payload.len(), structural });
            }
            let barred = PrbMask::from_bitmap(n_prb, r.take(bitmap_len(n_prb))?)
                .ok_or(DecodeError::TrailingBitmapBitsSet)?;
            E3Message::ControlAction(ControlAction { frame, barred })
        }
        MessageType::Error => E3Message::Error { code: ErrorCode(r.u8()?) },
    };
    Ok(msg)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).filter(|end| *end <= self.buf.len()).ok_or(
            DecodeError::LengthMismatch { declared: self.buf.len(), structural: self.pos + n },
        )?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("take returns N bytes"))
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32, DecodeError> {
        Ok(f32::from_le_bytes(self.array()?))
    }
}

/// Reassembles frames from an arbitrarily chunked byte stream.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete message, `Ok(None)` if more bytes are needed. A decode
    /// error leaves the stream unsynchronised; the caller should drop it.
    pub fn next_message(&mut self) -> Result<Option<E3Message>, DecodeError> {
        match decode(&self.buf) {
            Ok((msg, used)) => {
                self.buf.drain(..used);
                Ok(Some(msg))
            }
            Err(DecodeError::NeedMoreBytes { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}
