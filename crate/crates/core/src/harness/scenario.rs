//! Scenario documents.
//!
//! A scenario is a strict JSON object; unknown keys are rejected. Only
//! `duration_ms` is required:
//!
//! ```json
//! {
//!   "duration_ms": 3000,
//!   "mu": 1,
//!   "n_prb": 106,
//!   "tdd": "DDDDDDDSUU",
//!   "sensing": { "entries": [{ "slot": 8, "symbol": 13 }], "period_frames": 1 },
//!   "subscription_period_frames": 1,
//!   "noise": { "seed": 1, "variance": 1.0 },
//!   "ues": [{ "id": 0, "snr_db": 20.0 }],
//!   "incumbents": [{
//!     "id": "radar", "center_offset_hz": 0, "bandwidth_hz": 7.2e6, "inr_db": 20,
//!     "timeline": [{ "t_ms": 1000, "active": true }, { "t_ms": 2000, "active": false }]
//!   }],
//!   "detector": { "margin_db": 6.0, "k_on": 1, "k_off": 3, "floor_mode": "median" },
//!   "transport": "inproc",
//!   "processing_delay_symbols": 0
//! }
//! ```
//!
//! `floor_mode` may also be `{"ewma": {"alpha": 0.1}}` and `transport`
//! may be `{"tcp": {"port": 36422}}`.

use serde::Deserialize;
use thiserror::Error;

use crate::airspace::{IncumbentProfile, NoiseModel};
use crate::dapp::{DappError, DetectorParams};
use crate::e3::DEFAULT_PORT;
use crate::gnb::UeContext;
use crate::grid::{GridError, Numerology, PrbGrid, SensingEntry, SensingSchedule, TddPattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

impl ScenarioError {
    fn field(field: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Field { field: field.into(), message: message.to_string() }
    }

    /// Name of the offending field for semantic errors.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            ScenarioError::Field { field, .. } => Some(field),
            ScenarioError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    #[default]
    Inproc,
    Tcp {
        #[serde(default = "default_port")]
        port: u16,
    },
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    duration_ms: f64,
    #[serde(default = "default_mu")]
    mu: u8,
    #[serde(default = "default_n_prb")]
    n_prb: usize,
    #[serde(default)]
    tdd: Option<String>,
    #[serde(default)]
    sensing: Option<SensingDoc>,
    #[serde(default = "one")]
    subscription_period_frames: u16,
    #[serde(default)]
    noise: NoiseDoc,
    #[serde(default = "default_ues")]
    ues: Vec<UeDoc>,
    #[serde(default)]
    incumbents: Vec<IncumbentProfile>,
    #[serde(default)]
    detector: DetectorParams,
    #[serde(default)]
    transport: Transport,
    #[serde(default)]
    processing_delay_symbols: u32,
    #[serde(default)]
    ran_id: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensingDoc {
    entries: Vec<SensingEntry>,
    #[serde(default = "one_u32")]
    period_frames: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NoiseDoc {
    seed: u64,
    variance: f64,
}

impl Default for NoiseDoc {
    fn default() -> Self {
        Self { seed: 1, variance: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeDoc {
    id: u32,
    snr_db: f64,
}

fn default_mu() -> u8 {
    1
}

fn default_n_prb() -> usize {
    106
}

fn one() -> u16 {
    1
}

fn one_u32() -> u32 {
    1
}

fn default_ues() -> Vec<UeDoc> {
    vec![UeDoc { id: 0, snr_db: 20.0 }]
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub duration_ms: f64,
    pub grid: PrbGrid,
    pub pattern: TddPattern,
    pub sensing: SensingSchedule,
    pub subscription_period_frames: u16,
    pub noise: NoiseModel,
    pub ues: Vec<UeContext>,
    pub incumbents: Vec<IncumbentProfile>,
    pub detector: DetectorParams,
    pub transport: Transport,
    pub processing_delay_symbols: u32,
    pub ran_id: u32,
}

impl Scenario {
    /// Defaults for everything but the duration.
    pub fn with_duration(duration_ms: f64) -> Result<Self, ScenarioError> {
        load_scenario(&format!("{{\"duration_ms\": {duration_ms}}}"))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise = self.noise.with_seed(seed);
        self
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.validate()
}

impl ScenarioDoc {
    fn validate(self) -> Result<Scenario, ScenarioError> {
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(ScenarioError::field("duration_ms", "must be a positive number of milliseconds"));
        }
        let numerology = Numerology::new(self.mu).map_err(|e| ScenarioError::field("mu", e))?;
        let grid = PrbGrid::new(numerology, self.n_prb).map_err(|e| ScenarioError::field("n_prb", e))?;
        let pattern = match &self.tdd {
            Some(text) => TddPattern::parse(text, numerology).map_err(|e| ScenarioError::field("tdd", e))?,
            None => TddPattern::default(),
        };
        if numerology.slots_per_frame() % pattern.period_slots() != 0 {
            return Err(ScenarioError::field("tdd", "pattern period does not divide the frame"));
        }
        let sensing = match self.sensing {
            Some(doc) => SensingSchedule::new(doc.entries, doc.period_frames, &pattern, numerology)
                .map_err(sensing_error)?,
            None => SensingSchedule::default_for(&pattern, numerology).map_err(sensing_error)?,
        };
        if self.subscription_period_frames == 0 {
            return Err(ScenarioError::field("subscription_period_frames", "must be at least 1"));
        }
        let noise = NoiseModel::new(self.noise.variance, self.noise.seed)
            .map_err(|e| ScenarioError::field("noise.variance", e))?;
        let mut ues = Vec::with_capacity(self.ues.len());
        for (i, ue) in self.ues.iter().enumerate() {
            if !ue.snr_db.is_finite() {
                return Err(ScenarioError::field(format!("ues[{i}].snr_db"), "must be finite"));
            }
            if self.ues[..i].iter().any(|u| u.id == ue.id) {
                return Err(ScenarioError::field(format!("ues[{i}].id"), "duplicate UE id"));
            }
            ues.push(UeContext::full_buffer(ue.id, ue.snr_db));
        }
        for (i, inc) in self.incumbents.iter().enumerate() {
            inc.validate().map_err(|e| ScenarioError::field(format!("incumbents[{i}]"), e))?;
        }
        self.detector.validate().map_err(|e| ScenarioError::field(detector_field(&e), e))?;
        Ok(Scenario {
            duration_ms: self.duration_ms,
            grid,
            pattern,
            sensing,
            subscription_period_frames: self.subscription_period_frames,
            noise,
            ues,
            incumbents: self.incumbents,
            detector: self.detector,
            transport: self.transport,
            processing_delay_symbols: self.processing_delay_symbols,
            ran_id: self.ran_id,
        })
    }
}

fn sensing_error(e: GridError) -> ScenarioError {
    let field = match &e {
        GridError::SensingSlotOutOfRange { index, .. }
        | GridError::SensingSymbolOutOfRange { index, .. }
        | GridError::SensingNotUplink { index, .. }
        | GridError::DuplicateSensingEntry { index, .. } => format!("sensing.entries[{index}]"),
        GridError::ZeroSensingPeriod => "sensing.period_frames".to_string(),
        _ => "sensing".to_string(),
    };
    ScenarioError::field(field, e)
}

fn detector_field(e: &DappError) -> &'static str {
    match e {
        DappError::BadMargin(_) => "detector.margin_db",
        DappError::BadHysteresis => "detector.k_on",
        DappError::BadAlpha(_) => "detector.floor_mode",
        DappError::SampleCount { .. } => "detector",
    }
}
