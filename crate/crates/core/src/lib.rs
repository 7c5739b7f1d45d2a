//! Deterministic simulator of a gNB that reserves sensing symbols, streams
//! their I/Q to a spectrum-sensing dApp over E3, and bars the PRBs the dApp
//! reports as occupied by an incumbent.
//!
//! The signal path (synthesis, DFT, detector) is generic over [`Real`];
//! the aliases below fix it to `f64` (and `f32` where useful).

pub mod airspace;
pub mod capture;
pub mod dapp;
pub mod dsp;
pub mod e3;
pub mod gnb;
pub mod grid;
pub mod harness;
pub mod mask;
pub mod scalar;

pub use grid::{make_grid, Numerology, PrbGrid, SensingEntry, SensingSchedule, SlotKind, TddPattern};
pub use mask::PrbMask;
pub use scalar::Real;

pub type IqSymbol = airspace::IqSymbol<f64>;
pub type IqSymbol32 = airspace::IqSymbol<f32>;
pub type Synthesizer = airspace::Synthesizer<f64>;
pub type Synthesizer32 = airspace::Synthesizer<f32>;
pub type Detector = dapp::Detector<f64>;
pub type Detector32 = dapp::Detector<f32>;
pub type DetectorState = dapp::DetectorState<f64>;
pub type DApp = dapp::DApp<f64>;
pub type DApp32 = dapp::DApp<f32>;
pub type UnitaryDft = dsp::UnitaryDft<f64>;
