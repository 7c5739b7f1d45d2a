//! Synthetic RF environment: AWGN floor plus scripted incumbents.
//!
//! Sensing symbols are built in the frequency domain and brought to the time
//! domain with the unitary inverse DFT; the cyclic prefix is not modelled.
//!
//! Randomness comes from ChaCha8 seeded with the scenario seed via
//! `seed_from_u64`; each synthesized symbol uses its own ChaCha stream
//! (`set_stream(draw_index)`), so any symbol can be regenerated in isolation.
//! Gaussian variates come from the `rand_distr` ziggurat `StandardNormal`.
//! The draw order is: every occupied bin (lowest logical subcarrier first),
//! then each active incumbent in declaration order over its footprint bins.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::UnitaryDft;
use crate::grid::PrbGrid;
use crate::mask::PrbMask;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirspaceError {
    #[error("incumbent {id:?}: bandwidth_hz must be finite and non-negative")]
    BadBandwidth { id: String },
    #[error("incumbent {id:?}: {field} must be finite")]
    NotFinite { id: String, field: &'static str },
    #[error("incumbent {id:?}: timeline[{index}] is not strictly after the previous event")]
    TimelineOrder { id: String, index: usize },
    #[error("noise variance must be finite and positive")]
    BadNoiseVariance,
}

/// One toggle of an incumbent's activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToggleEvent {
    pub t_ms: f64,
    pub active: bool,
}

/// A band-limited Gaussian incumbent with a scripted on/off timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncumbentProfile {
    pub id: String,
    #[serde(default)]
    pub center_offset_hz: f64,
    pub bandwidth_hz: f64,
    /// Incumbent PSD over noise PSD on the bins it occupies.
    pub inr_db: f64,
    #[serde(default)]
    pub timeline: Vec<ToggleEvent>,
}

impl IncumbentProfile {
    pub fn validate(&self) -> Result<(), AirspaceError> {
        let id = || self.id.clone();
        if !self.bandwidth_hz.is_finite() || self.bandwidth_hz < 0.0 {
            return Err(AirspaceError::BadBandwidth { id: id() });
        }
        if !self.center_offset_hz.is_finite() {
            return Err(AirspaceError::NotFinite { id: id(), field: "center_offset_hz" });
        }
        if !self.inr_db.is_finite() {
            return Err(AirspaceError::NotFinite { id: id(), field: "inr_db" });
        }
        for (index, ev) in self.timeline.iter().enumerate() {
            if !ev.t_ms.is_finite() {
                return Err(AirspaceError::NotFinite { id: id(), field: "timeline.t_ms" });
            }
            if index > 0 && ev.t_ms <= self.timeline[index - 1].t_ms {
                return Err(AirspaceError::TimelineOrder { id: id(), index });
            }
        }
        Ok(())
    }

    pub fn active_at(&self, t_ms: f64) -> bool {
        active_at(self, t_ms)
    }

    pub fn inr_linear(&self) -> f64 {
        10f64.powf(self.inr_db / 10.0)
    }

    pub fn footprint(&self, grid: &PrbGrid) -> PrbMask {
        incumbent_footprint(self, grid)
    }
}

/// PRBs with at least one subcarrier centre inside the incumbent band
/// `[center - bw/2, center + bw/2)`.
pub fn incumbent_footprint(profile: &IncumbentProfile, grid: &PrbGrid) -> PrbMask {
    let lo = profile.center_offset_hz - profile.bandwidth_hz / 2.0;
    let hi = profile.center_offset_hz + profile.bandwidth_hz / 2.0;
    let mut mask = PrbMask::empty(grid.n_prb());
    for prb in 0..grid.n_prb() {
        let hit = grid
            .prb_to_subcarriers(prb)
            .expect("prb in range")
            .map(|k| grid.subcarrier_offset_hz(k))
            .any(|f| f >= lo && f < hi);
        mask.set(prb, hit);
    }
    mask
}

/// State of the latest toggle at or before `t_ms`; inactive before the first.
pub fn active_at(profile: &IncumbentProfile, t_ms: f64) -> bool {
    profile
        .timeline
        .iter()
        .take_while(|ev| ev.t_ms <= t_ms)
        .last()
        .is_some_and(|ev| ev.active)
}

/// Per-PRB interference over noise (linear) from incumbents active at `t_ms`.
pub fn interference_per_prb(incumbents: &[IncumbentProfile], grid: &PrbGrid, t_ms: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_prb()];
    for inc in incumbents.iter().filter(|i| i.active_at(t_ms)) {
        let inr = inc.inr_linear();
        for p in inc.footprint(grid).iter_set() {
            out[p] += inr;
        }
    }
    out
}

/// Union of footprints of incumbents active at `t_ms`.
pub fn active_footprint(incumbents: &[IncumbentProfile], grid: &PrbGrid, t_ms: f64) -> PrbMask {
    let mut mask = PrbMask::empty(grid.n_prb());
    for inc in incumbents.iter().filter(|i| i.active_at(t_ms)) {
        for p in inc.footprint(grid).iter_set() {
            mask.set(p, true);
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
    seed: u64,
}

impl NoiseModel {
    /// `variance` is the complex noise power per occupied bin.
    pub fn new(variance: f64, seed: u64) -> Result<Self, AirspaceError> {
        if !variance.is_finite() || variance <= 0.0 {
            return Err(AirspaceError::BadNoiseVariance);
        }
        Ok(Self { variance, seed })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn stream(&self, draw_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(draw_index);
        rng
    }
}

/// Time-domain samples of one sensing symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSymbol<T: Real> {
    pub frame: u64,
    pub slot: usize,
    pub symbol: usize,
    pub samples: Vec<Complex<T>>,
}

/// Builds sensing symbols for a fixed grid and noise model, reusing one DFT
/// plan.
#[derive(Debug, Clone)]
pub struct Synthesizer<T: Real> {
    grid: PrbGrid,
    noise: NoiseModel,
    dft: UnitaryDft<T>,
}

impl<T: Real> Synthesizer<T> {
    pub fn new(grid: PrbGrid, noise: NoiseModel) -> Self {
        Self { dft: UnitaryDft::new(grid.fft_size()), grid, noise }
    }

    pub fn grid(&self) -> &PrbGrid {
        &self.grid
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Frequency-domain content of a symbol before the inverse DFT.
    pub fn spectrum(&self, incumbents: &[IncumbentProfile], t_ms: f64, draw_index: u64) -> Vec<Complex<f64>> {
        let grid = &self.grid;
        let mut rng = self.noise.stream(draw_index);
        let mut spectrum = vec![Complex::new(0.0, 0.0); grid.fft_size()];
        let noise_scale = (self.noise.variance / 2.0).sqrt();
        for k in grid.occupied_range() {
            spectrum[grid.bin_of(k)] += gaussian(&mut rng) * noise_scale;
        }
        for inc in incumbents.iter().filter(|i| i.active_at(t_ms)) {
            let scale = (self.noise.variance * inc.inr_linear() / 2.0).sqrt();
            for prb in inc.footprint(grid).iter_set() {
                for bin in grid.prb_bins(prb).expect("footprint PRB in range") {
                    spectrum[bin] += gaussian(&mut rng) * scale;
                }
            }
        }
        spectrum
    }

    pub fn synthesize(
        &self,
        incumbents: &[IncumbentProfile],
        t_ms: f64,
        draw_index: u64,
        coords: (u64, usize, usize),
    ) -> IqSymbol<T> {
        let mut samples: Vec<Complex<T>> = self
            .spectrum(incumbents, t_ms, draw_index)
            .into_iter()
            .map(|x| Complex::new(T::of(x.re), T::of(x.im)))
            .collect();
        self.dft.inverse(&mut samples);
        let (frame, slot, symbol) = coords;
        IqSymbol { frame, slot, symbol, samples }
    }
}

/// One-shot synthesis; prefer [`Synthesizer`] in loops.
pub fn synthesize_sensing_iq<T: Real>(
    grid: &PrbGrid,
    noise: &NoiseModel,
    incumbents: &[IncumbentProfile],
    t_ms: f64,
    draw_index: u64,
) -> IqSymbol<T> {
    Synthesizer::new(*grid, *noise).synthesize(incumbents, t_ms, draw_index, (0, 0, 0))
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex<f64> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re, im)
}
