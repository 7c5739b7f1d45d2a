//! `IQS1` capture files.
//!
//! ```text
//! 0   "IQS1"
//! 4   u32 LE  fft_size
//! 8   u32 LE  symbol count
//! 12  u32 LE  reserved (0)
//! 16  symbols, each fft_size samples of (f32 LE I, f32 LE Q)
//! ```

use std::io::{self, Read, Write};

use num_complex::Complex32;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"IQS1";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("not an IQS1 capture (bad magic)")]
    BadMagic,
    #[error("reserved header field is {0}, expected 0")]
    Reserved(u32),
    #[error("capture has fft_size 0")]
    ZeroFftSize,
    #[error("symbol {index} has {got} samples, capture fft_size is {expected}")]
    SymbolLength { index: usize, got: usize, expected: usize },
    #[error("capture truncated: expected {expected} symbols")]
    Truncated { expected: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub fft_size: usize,
    pub symbols: Vec<Vec<Complex32>>,
}

pub fn write_capture<W: Write>(mut out: W, fft_size: usize, symbols: &[Vec<Complex32>]) -> Result<(), CaptureError> {
    if fft_size == 0 {
        return Err(CaptureError::ZeroFftSize);
    }
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&(fft_size as u32).to_le_bytes());
    header.extend_from_slice(&(symbols.len() as u32).to_le_bytes());
    header.extend_from_slice(&0u32.to_le_bytes());
    out.write_all(&header)?;
    for (index, sym) in symbols.iter().enumerate() {
        if sym.len() != fft_size {
            return Err(CaptureError::SymbolLength { index, got: sym.len(), expected: fft_size });
        }
        let mut body = Vec::with_capacity(8 * fft_size);
        for s in sym {
            body.extend_from_slice(&s.re.to_le_bytes());
            body.extend_from_slice(&s.im.to_le_bytes());
        }
        out.write_all(&body)?;
    }
    Ok(())
}

pub fn read_capture<R: Read>(mut input: R) -> Result<Capture, CaptureError> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => CaptureError::BadMagic,
        _ => CaptureError::Io(e),
    })?;
    if &header[..4] != MAGIC {
        return Err(CaptureError::BadMagic);
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    let (fft_size, count, reserved) = (word(4) as usize, word(8), word(12));
    if reserved != 0 {
        return Err(CaptureError::Reserved(reserved));
    }
    if fft_size == 0 {
        return Err(CaptureError::ZeroFftSize);
    }
    let mut symbols = Vec::new();
    let mut buf = vec![0u8; 8 * fft_size];
    for _ in 0..count {
        input.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => CaptureError::Truncated { expected: count },
            _ => CaptureError::Io(e),
        })?;
        let sym = buf
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                    f32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
                )
            })
            .collect();
        symbols.push(sym);
    }
    Ok(Capture { fft_size, symbols })
}
