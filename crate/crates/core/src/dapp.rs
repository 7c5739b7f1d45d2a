//! Spectrum-sensing dApp.
//!
//! Each sensing report goes through the same pipeline: unitary DFT, mean
//! bin energy per PRB, a noise-floor estimate, a fixed dB margin above that
//! floor, then per-PRB hysteresis. A barred-PRB control action is sent to
//! the gNB only when the debounced set changes.

use std::cmp::Ordering;

use num_complex::{Complex, Complex32};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::UnitaryDft;
use crate::e3::{
    ControlAction, E3Message, IqReport, Session, SessionAction, SessionEvent, SetupRequest,
    STREAM_SENSING_IQ,
};
use crate::grid::{PrbGrid, SUBCARRIERS_PER_PRB};
use crate::mask::PrbMask;
use crate::scalar::Real;

/// Threshold used when the floor estimate is exactly zero.
pub const ZERO_FLOOR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DappError {
    #[error("report carries {got} samples, grid FFT size is {expected}")]
    SampleCount { expected: usize, got: usize },
    #[error("margin_db must be positive, got {0}")]
    BadMargin(f64),
    #[error("k_on and k_off must be at least 1")]
    BadHysteresis,
    #[error("EWMA alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FloorMode {
    Median,
    Ewma { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub margin_db: f64,
    pub k_on: u32,
    pub k_off: u32,
    pub floor_mode: FloorMode,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { margin_db: 6.0, k_on: 1, k_off: 3, floor_mode: FloorMode::Median }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DappError> {
        if self.margin_db.is_nan() || self.margin_db <= 0.0 {
            return Err(DappError::BadMargin(self.margin_db));
        }
        if self.k_on == 0 || self.k_off == 0 {
            return Err(DappError::BadHysteresis);
        }
        if let FloorMode::Ewma { alpha } = self.floor_mode {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(DappError::BadAlpha(alpha));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState<T: Real> {
    on: Vec<u32>,
    off: Vec<u32>,
    barred: PrbMask,
    last_reported: PrbMask,
    ewma_floor: Option<T>,
}

impl<T: Real> DetectorState<T> {
    pub fn new(n_prb: usize) -> Self {
        Self {
            on: vec![0; n_prb],
            off: vec![0; n_prb],
            barred: PrbMask::empty(n_prb),
            last_reported: PrbMask::empty(n_prb),
            ewma_floor: None,
        }
    }

    pub fn barred(&self) -> &PrbMask {
        &self.barred
    }

    pub fn last_reported(&self) -> &PrbMask {
        &self.last_reported
    }

    pub fn on_counter(&self, prb: usize) -> u32 {
        self.on[prb]
    }

    pub fn off_counter(&self, prb: usize) -> u32 {
        self.off[prb]
    }

    pub fn ewma_floor(&self) -> Option<T> {
        self.ewma_floor
    }
}

/// Mean per-bin energy of each PRB after a unitary DFT of `samples`.
pub fn prb_energies<T: Real>(
    samples: &[Complex<T>],
    grid: &PrbGrid,
    dft: &UnitaryDft<T>,
) -> Result<Vec<T>, DappError> {
    if samples.len() != grid.fft_size() || dft.size() != grid.fft_size() {
        return Err(DappError::SampleCount { expected: grid.fft_size(), got: samples.len() });
    }
    let mut spectrum = samples.to_vec();
    dft.forward(&mut spectrum);
    let twelve = T::of(SUBCARRIERS_PER_PRB as f64);
    Ok((0..grid.n_prb())
        .map(|p| {
            let bins = grid.prb_bins(p).expect("prb in range");
            bins.iter().fold(T::zero(), |acc, b| acc + spectrum[*b].norm_sqr()) / twelve
        })
        .collect())
}

/// Lower median: the `(n-1)/2`-th order statistic.
pub fn lower_median<T: Real>(values: &[T]) -> T {
    assert!(!values.is_empty(), "median of an empty vector");
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    sorted[(sorted.len() - 1) / 2]
}

pub fn estimate_floor<T: Real>(energies: &[T], state: &mut DetectorState<T>, params: &DetectorParams) -> T {
    let median = lower_median(energies);
    match params.floor_mode {
        FloorMode::Median => median,
        FloorMode::Ewma { alpha } => {
            let alpha = T::of(alpha);
            let floor = match state.ewma_floor {
                None => median,
                Some(prev) => alpha * median + (T::one() - alpha) * prev,
            };
            state.ewma_floor = Some(floor);
            floor
        }
    }
}

/// PRBs whose energy strictly exceeds `floor * 10^(margin_db/10)`.
pub fn detect_raw<T: Real>(energies: &[T], floor: T, margin_db: f64) -> PrbMask {
    let threshold = if floor > T::zero() {
        floor * T::of(10f64.powf(margin_db / 10.0))
    } else {
        T::of(ZERO_FLOOR_THRESHOLD)
    };
    PrbMask::from_bools(energies.iter().map(|e| *e > threshold).collect())
}

/// Debounces a raw detection into the barred set. Returns whether the
/// barred set differs from the last one reported; if so it becomes the
/// reported set.
pub fn hysteresis_update<T: Real>(state: &mut DetectorState<T>, raw: &PrbMask, params: &DetectorParams) -> bool {
    assert_eq!(raw.len(), state.barred.len(), "raw mask length");
    let cap = params.k_on.max(params.k_off);
    for p in 0..raw.len() {
        if raw.get(p) {
            state.on[p] = (state.on[p] + 1).min(cap);
            state.off[p] = 0;
            if state.on[p] >= params.k_on {
                state.barred.set(p, true);
            }
        } else {
            state.off[p] = (state.off[p] + 1).min(cap);
            state.on[p] = 0;
            if state.off[p] >= params.k_off {
                state.barred.set(p, false);
            }
        }
    }
    let changed = state.barred != state.last_reported;
    if changed {
        state.last_reported = state.barred.clone();
    }
    changed
}

/// Everything the detector computed for one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T: Real> {
    pub energies: Vec<T>,
    pub floor: T,
    pub raw: PrbMask,
    pub barred: PrbMask,
    pub changed: bool,
}

/// Stateful energy detector bound to one grid.
#[derive(Debug, Clone)]
pub struct Detector<T: Real> {
    grid: PrbGrid,
    params: DetectorParams,
    dft: UnitaryDft<T>,
    state: DetectorState<T>,
}

impl<T: Real> Detector<T> {
    pub fn new(grid: PrbGrid, params: DetectorParams) -> Result<Self, DappError> {
        params.validate()?;
        Ok(Self {
            dft: UnitaryDft::new(grid.fft_size()),
            state: DetectorState::new(grid.n_prb()),
            grid,
            params,
        })
    }

    pub fn grid(&self) -> &PrbGrid {
        &self.grid
    }

    pub fn params(&self) -> &DetectorParams {
        &self.params
    }

    pub fn state(&self) -> &DetectorState<T> {
        &self.state
    }

    pub fn energies(&self, samples: &[Complex<T>]) -> Result<Vec<T>, DappError> {
        prb_energies(samples, &self.grid, &self.dft)
    }

    pub fn process(&mut self, samples: &[Complex<T>]) -> Result<Detection<T>, DappError> {
        let energies = self.energies(samples)?;
        let floor = estimate_floor(&energies, &mut self.state, &self.params);
        let raw = detect_raw(&energies, floor, self.params.margin_db);
        let changed = hysteresis_update(&mut self.state, &raw, &self.params);
        Ok(Detection { barred: self.state.barred.clone(), energies, floor, raw, changed })
    }
}

/// One line of the detection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: u64,
    pub slot: usize,
    pub symbol: usize,
    pub energies: Vec<f64>,
    pub floor: f64,
    pub raw: Vec<usize>,
    pub barred: Vec<usize>,
}

impl DetectionRecord {
    pub fn new<T: Real>(frame: u64, slot: usize, symbol: usize, d: &Detection<T>) -> Self {
        Self {
            frame,
            slot,
            symbol,
            energies: d.energies.iter().map(|e| e.widen()).collect(),
            floor: d.floor.widen(),
            raw: d.raw.iter_set().collect(),
            barred: d.barred.iter_set().collect(),
        }
    }
}

/// The dApp actor: E3 client session plus detector.
#[derive(Debug, Clone)]
pub struct DApp<T: Real> {
    session: Session,
    detector: Detector<T>,
    ran_id: u32,
    period_frames: u16,
    errors: u64,
    reports: u64,
    keep_records: bool,
    records: Vec<DetectionRecord>,
}

impl<T: Real> DApp<T> {
    pub fn new(grid: PrbGrid, params: DetectorParams, period_frames: u16) -> Result<Self, DappError> {
        Ok(Self {
            session: Session::new(),
            detector: Detector::new(grid, params)?,
            ran_id: 0,
            period_frames: period_frames.max(1),
            errors: 0,
            reports: 0,
            keep_records: false,
            records: Vec::new(),
        })
    }

    /// Keep a [`DetectionRecord`] for every processed report.
    pub fn with_records(mut self) -> Self {
        self.keep_records = true;
        self
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn detector(&self) -> &Detector<T> {
        &self.detector
    }

    pub fn errors(&self) -> u64 {
        self.errors
    }

    pub fn reports(&self) -> u64 {
        self.reports
    }

    pub fn records(&self) -> &[DetectionRecord] {
        &self.records
    }

    /// Opening message of the handshake.
    pub fn start(&mut self) -> Vec<E3Message> {
        let grid = self.detector.grid;
        let req = SetupRequest {
            ran_id: self.ran_id,
            n_prb: grid.n_prb() as u16,
            fft_size: grid.fft_size() as u16,
            mu: grid.numerology().mu(),
        };
        self.send(E3Message::SetupRequest(req))
    }

    pub fn transport_closed(&mut self) {
        self.session.step(SessionEvent::TransportClosed);
    }

    /// Handles one inbound message and returns the messages to send back.
    pub fn step(&mut self, msg: E3Message) -> Vec<E3Message> {
        let mut out = Vec::new();
        for action in self.session.step(SessionEvent::Received(msg)) {
            match action {
                SessionAction::Deliver(msg) => out.extend(self.on_delivered(msg)),
                // malformed or out-of-phase input is dropped and counted
                SessionAction::Reject(_) => self.errors += 1,
                SessionAction::Close => {}
            }
        }
        out
    }

    fn on_delivered(&mut self, msg: E3Message) -> Vec<E3Message> {
        match msg {
            E3Message::SetupResponse { accepted: true } => self.send(E3Message::Subscribe {
                stream_id: STREAM_SENSING_IQ,
                period_frames: self.period_frames,
            }),
            E3Message::IqReport(report) => self.on_report(report),
            _ => Vec::new(),
        }
    }

    fn on_report(&mut self, report: IqReport) -> Vec<E3Message> {
        let samples: Vec<Complex<T>> = report.iq.iter().map(|s| widen(*s)).collect();
        let detection = match self.detector.process(&samples) {
            Ok(d) => d,
            Err(_) => {
                self.errors += 1;
                return Vec::new();
            }
        };
        self.reports += 1;
        if self.keep_records {
            self.records.push(DetectionRecord::new(
                u64::from(report.frame),
                usize::from(report.slot),
                usize::from(report.symbol),
                &detection,
            ));
        }
        if !detection.changed {
            return Vec::new();
        }
        self.send(E3Message::ControlAction(ControlAction { frame: report.frame, barred: detection.barred }))
    }

    fn send(&mut self, msg: E3Message) -> Vec<E3Message> {
        self.session
            .step(SessionEvent::Sent(msg))
            .into_iter()
            .filter_map(|a| match a {
                SessionAction::Deliver(m) => Some(m),
                _ => None,
            })
            .collect()
    }
}

pub fn dapp_step<T: Real>(dapp: &mut DApp<T>, msg: E3Message) -> Vec<E3Message> {
    dapp.step(msg)
}

fn widen<T: Real>(s: Complex32) -> Complex<T> {
    Complex::new(T::of(f64::from(s.re)), T::of(f64::from(s.im)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::{IncumbentProfile, NoiseModel, Synthesizer, ToggleEvent};
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn params(k_on: u32, k_off: u32) -> DetectorParams {
        DetectorParams { k_on, k_off, ..DetectorParams::default() }
    }

    /// Quadratic-time unitary DFT, independent of rustfft.
    fn direct_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = x.len();
        let norm = (n as f64).sqrt();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let phase = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                        v * Complex::from_polar(1.0, phase)
                    })
                    .sum::<Complex<f64>>()
                    / norm
            })
            .collect()
    }

    #[test]
    fn zero_input_zero_energy() {
        let g = make_grid(1, 4).unwrap();
        let dft = UnitaryDft::new(g.fft_size());
        let e = prb_energies(&vec![Complex::new(0.0f64, 0.0); 64], &g, &dft).unwrap();
        assert_eq!(e, vec![0.0; 4]);
        assert_eq!(
            prb_energies(&vec![Complex::new(0.0f64, 0.0); 63], &g, &dft),
            Err(DappError::SampleCount { expected: 64, got: 63 })
        );
    }

    #[test]
    fn single_tone_lands_in_one_prb() {
        let g = make_grid(1, 16).unwrap();
        let n = g.fft_size();
        let bin = g.prb_bins(7).unwrap()[3];
        let tone: Vec<Complex<f64>> = (0..n)
            .map(|t| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * (bin * t) as f64 / n as f64))
            .collect();
        let e = prb_energies(&tone, &g, &UnitaryDft::new(n)).unwrap();
        // |X|^2 = N under the unitary convention, divided over 12 bins
        for (p, v) in e.iter().enumerate() {
            if p == 7 {
                assert!((v - n as f64 / 12.0).abs() < 1e-9 * n as f64, "{v}");
            } else {
                assert!(v.abs() < 1e-12, "prb {p}: {v}");
            }
        }
        let oracle = direct_dft(&tone);
        assert!((oracle[bin].norm_sqr() - n as f64).abs() < 1e-6);
    }

    #[test]
    fn floor_examples() {
        let mut st = DetectorState::<f64>::new(4);
        assert_eq!(estimate_floor(&[2.5; 4], &mut st, &DetectorParams::default()), 2.5);

        let mut energies = vec![1.0; 86];
        energies.extend(vec![101.0; 20]);
        let mut st = DetectorState::<f64>::new(106);
        assert_eq!(estimate_floor(&energies, &mut st, &DetectorParams::default()), 1.0);

        let ewma = DetectorParams { floor_mode: FloorMode::Ewma { alpha: 0.1 }, ..DetectorParams::default() };
        let mut st = DetectorState::<f64>::new(3);
        assert_eq!(estimate_floor(&[1.0, 1.0, 1.0], &mut st, &ewma), 1.0);
        let f = estimate_floor(&[2.0, 2.0, 2.0], &mut st, &ewma);
        assert!((f - 1.1).abs() < 1e-12);
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
    }

    #[test]
    fn threshold_examples() {
        assert!(detect_raw(&[1.0, 1.0, 1.0], 1.0, 6.0).none());
        let hit = detect_raw(&[10f64.powf(0.7), 1.0], 1.0, 6.0);
        assert_eq!(hit.iter_set().collect::<Vec<_>>(), vec![0]);
        assert!(detect_raw(&[1e300, 5.0], 1.0, f64::INFINITY).none());
        // zero floor falls back to an absolute threshold
        assert_eq!(detect_raw(&[0.0, 1e-11], 0.0, 6.0).iter_set().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn hysteresis_trace() {
        let p = params(1, 3);
        let mut st = DetectorState::<f64>::new(8);
        let five = PrbMask::from_indices(8, [5]);
        let none = PrbMask::empty(8);
        assert!(hysteresis_update(&mut st, &five, &p));
        assert_eq!(st.barred(), &five);
        assert!(!hysteresis_update(&mut st, &five, &p));
        assert!(!hysteresis_update(&mut st, &none, &p));
        assert!(!hysteresis_update(&mut st, &none, &p));
        assert_eq!(st.barred(), &five);
        assert!(hysteresis_update(&mut st, &none, &p));
        assert!(st.barred().none());

        let slow = params(2, 1);
        let mut st = DetectorState::<f64>::new(8);
        assert!(!hysteresis_update(&mut st, &five, &slow));
        assert!(hysteresis_update(&mut st, &five, &slow));
        assert!(st.on_counter(5) <= 2);
    }

    #[test]
    fn params_validation() {
        assert!(DetectorParams::default().validate().is_ok());
        assert!(params(0, 1).validate().is_err());
        assert!(DetectorParams { margin_db: 0.0, ..DetectorParams::default() }.validate().is_err());
        let bad = DetectorParams { floor_mode: FloorMode::Ewma { alpha: 1.5 }, ..DetectorParams::default() };
        assert_eq!(bad.validate(), Err(DappError::BadAlpha(1.5)));
    }

    fn incumbent(inr_db: f64) -> IncumbentProfile {
        IncumbentProfile {
            id: "radar".into(),
            center_offset_hz: 0.0,
            bandwidth_hz: 7.2e6,
            inr_db,
            timeline: vec![ToggleEvent { t_ms: 0.0, active: true }],
        }
    }

    fn report(sym: &crate::airspace::IqSymbol<f64>) -> E3Message {
        E3Message::IqReport(IqReport {
            frame: sym.frame as u32,
            slot: 8,
            symbol: 13,
            iq: sym.samples.iter().map(|s| Complex32::new(s.re as f32, s.im as f32)).collect(),
        })
    }

    fn subscribed_dapp(grid: PrbGrid) -> DApp<f64> {
        let mut d = DApp::<f64>::new(grid, DetectorParams::default(), 1).unwrap();
        assert!(matches!(d.start()[..], [E3Message::SetupRequest(_)]));
        let sub = d.step(E3Message::SetupResponse { accepted: true });
        assert_eq!(sub, vec![E3Message::Subscribe { stream_id: 1, period_frames: 1 }]);
        assert!(d.step(E3Message::SubscribeAck { stream_id: 1 }).is_empty());
        assert!(d.session().is_subscribed());
        d
    }

    #[test]
    fn end_to_end_bar_and_release() {
        let g = make_grid(1, 106).unwrap();
        let synth = Synthesizer::<f64>::new(g, NoiseModel::new(1.0, 2024).unwrap());
        let mut d = subscribed_dapp(g);
        let inc = [incumbent(20.0)];

        let on = synth.synthesize(&inc, 1.0, 0, (0, 8, 13));
        let out = d.step(report(&on));
        let truth = inc[0].footprint(&g);
        assert_eq!(truth.count(), 20);
        assert_eq!(out, vec![E3Message::ControlAction(ControlAction { frame: 0, barred: truth.clone() })]);

        let again = synth.synthesize(&inc, 1.0, 1, (1, 8, 13));
        assert!(d.step(report(&again)).is_empty());

        let mut last = Vec::new();
        for i in 0..3 {
            let quiet = synth.synthesize(&[], 1.0, 10 + i, (2 + i, 8, 13));
            last = d.step(report(&quiet));
            if i < 2 {
                assert!(last.is_empty());
            }
        }
        assert_eq!(last.len(), 1);
        match &last[0] {
            E3Message::ControlAction(a) => assert!(a.barred.none()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_report_is_dropped_and_counted() {
        let g = make_grid(1, 4).unwrap();
        let mut d = subscribed_dapp(g);
        let bad = E3Message::IqReport(IqReport { frame: 0, slot: 8, symbol: 13, iq: vec![Complex32::default(); 3] });
        assert!(d.step(bad).is_empty());
        assert_eq!(d.errors(), 1);
        let mut idle = DApp::<f64>::new(g, DetectorParams::default(), 1).unwrap();
        assert!(idle.step(E3Message::SubscribeAck { stream_id: 1 }).is_empty());
        assert_eq!(idle.errors(), 1);
    }

    #[test]
    fn energies_match_direct_dft_in_both_precisions() {
        let g = make_grid(1, 3).unwrap();
        let synth = Synthesizer::<f64>::new(g, NoiseModel::new(1.0, 5).unwrap());
        let sym = synth.synthesize(&[], 0.0, 0, (0, 0, 0));
        let spectrum = direct_dft(&sym.samples);
        let oracle: Vec<f64> = (0..3)
            .map(|p| g.prb_bins(p).unwrap().iter().map(|b| spectrum[*b].norm_sqr()).sum::<f64>() / 12.0)
            .collect();
        let e64 = prb_energies(&sym.samples, &g, &UnitaryDft::new(64)).unwrap();
        let s32: Vec<Complex<f32>> = sym.samples.iter().map(|s| Complex::new(s.re as f32, s.im as f32)).collect();
        let e32 = prb_energies(&s32, &g, &UnitaryDft::new(64)).unwrap();
        for p in 0..3 {
            assert!((e64[p] - oracle[p]).abs() <= 1e-9 * oracle[p]);
            assert!((f64::from(e32[p]) - oracle[p]).abs() <= 1e-4 * oracle[p]);
        }
    }

    proptest! {
        #[test]
        fn median_detection_is_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3) {
            let g = make_grid(1, 24).unwrap();
            let synth = Synthesizer::<f64>::new(g, NoiseModel::new(1.0, seed).unwrap());
            let sym = synth.synthesize(&[IncumbentProfile { bandwidth_hz: 2e6, ..incumbent(8.0) }], 0.0, 0, (0, 0, 0));
            let dft = UnitaryDft::new(g.fft_size());
            let raw_of = |samples: &[Complex<f64>]| {
                let e = prb_energies(samples, &g, &dft).unwrap();
                let mut st = DetectorState::new(24);
                let f = estimate_floor(&e, &mut st, &DetectorParams::default());
                detect_raw(&e, f, 6.0)
            };
            let scaled: Vec<Complex<f64>> = sym.samples.iter().map(|s| s * c).collect();
            prop_assert_eq!(raw_of(&sym.samples), raw_of(&scaled));
        }

        #[test]
        fn stronger_incumbent_never_hides_prbs(seed in any::<u64>(), inr in 0.0f64..30.0, extra in 0.0f64..20.0) {
            let g = make_grid(1, 52).unwrap();
            let synth = Synthesizer::<f64>::new(g, NoiseModel::new(1.0, seed).unwrap());
            let dft = UnitaryDft::new(g.fft_size());
            let raw_at = |inr_db: f64| {
                let sym = synth.synthesize(&[IncumbentProfile { bandwidth_hz: 3.6e6, ..incumbent(inr_db) }], 0.0, 0, (0, 0, 0));
                let e = prb_energies(&sym.samples, &g, &dft).unwrap();
                let mut st = DetectorState::new(52);
                let f = estimate_floor(&e, &mut st, &DetectorParams::default());
                detect_raw(&e, f, 6.0)
            };
            prop_assert!(raw_at(inr).is_subset_of(&raw_at(inr + extra)));
        }

        #[test]
        fn hysteresis_release_bounds(
            k_off in 1u32..5,
            raws in proptest::collection::vec(any::<bool>(), 1..60),
        ) {
            let p = params(1, k_off);
            let mut st = DetectorState::<f64>::new(1);
            let mut last_detect: Option<usize> = None;
            for (t, r) in raws.iter().enumerate() {
                let was = st.barred().get(0);
                hysteresis_update(&mut st, &PrbMask::from_bools(vec![*r]), &p);
                if *r {
                    last_detect = Some(t);
                    prop_assert!(st.barred().get(0));
                }
                if was && !st.barred().get(0) {
                    // released exactly k_off clear reports after the last detection
                    prop_assert_eq!(t - last_detect.unwrap(), k_off as usize);
                }
                if let Some(ld) = last_detect {
                    if t - ld < k_off as usize {
                        prop_assert!(st.barred().get(0));
                    }
                }
            }
        }
    }
}
