//! Scenario loading, the simulation loop, metrics export and offline
//! detection over capture files.

mod metrics;
mod scenario;
mod sim;

pub use metrics::{export_metrics, format_number, ExportFormat, MetricsLog, MetricsRecord, UeBits, CSV_HEADER};
pub use scenario::{load_scenario, Scenario, ScenarioError, Transport};
pub use sim::{ratio_to_f64, run, run_with_capture, LinkError, RunError};

use num_complex::Complex;

use crate::capture::Capture;
use crate::dapp::{DappError, DetectionRecord, Detector, DetectorParams};
use crate::grid::{PrbGrid, SensingSchedule, TddPattern};

/// Runs the detector over every symbol of a capture, in order.
///
/// Captures carry no timing, so symbol `i` is reported as frame `i` at the
/// default sensing position.
pub fn detect_offline(
    capture: &Capture,
    grid: PrbGrid,
    params: DetectorParams,
) -> Result<Vec<DetectionRecord>, DappError> {
    let numerology = grid.numerology();
    let position = SensingSchedule::default_for(&TddPattern::default(), numerology)
        .ok()
        .and_then(|s| s.entries().first().copied())
        .map_or((0, 0), |e| (e.slot, e.symbol));
    let mut detector = Detector::<f64>::new(grid, params)?;
    capture
        .symbols
        .iter()
        .enumerate()
        .map(|(i, sym)| {
            let samples: Vec<Complex<f64>> =
                sym.iter().map(|s| Complex::new(f64::from(s.re), f64::from(s.im))).collect();
            let d = detector.process(&samples)?;
            Ok(DetectionRecord::new(i as u64, position.0, position.1, &d))
        })
        .collect()
}
