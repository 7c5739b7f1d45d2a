//! NR-like numerology, TDD frame structure, PRB geometry and the
//! sensing-symbol schedule.
//!
//! Frequency layout is DC-centred: logical subcarrier 0 is the DC bin, the
//! `12 * n_prb` occupied subcarriers run from `-6 * n_prb` to
//! `6 * n_prb - 1`, and negative subcarriers wrap to the top of the FFT.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Subcarriers in one physical resource block.
pub const SUBCARRIERS_PER_PRB: usize = 12;
/// OFDM symbols per slot (normal cyclic prefix).
pub const SYMBOLS_PER_SLOT: usize = 14;
/// Radio frame length in milliseconds, independent of numerology.
pub const FRAME_MS: u64 = 10;
/// Highest supported numerology index.
pub const MAX_MU: u8 = 3;
/// Largest FFT that still fits the 16-bit size fields of the E3 framing.
pub const MAX_FFT_SIZE: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("numerology mu={0} outside 0..={MAX_MU}")]
    BadNumerology(u8),
    #[error("grid must contain at least one PRB")]
    EmptyGrid,
    #[error("{n_prb} PRBs need an FFT larger than {MAX_FFT_SIZE}")]
    GridTooLarge { n_prb: usize },
    #[error("PRB {prb} out of range for a {n_prb}-PRB grid")]
    PrbOutOfRange { prb: usize, n_prb: usize },
    #[error("TDD pattern is empty")]
    EmptyPattern,
    #[error("TDD period of {period} slots does not divide {slots_per_frame} slots per frame")]
    PeriodMismatch { period: usize, slots_per_frame: usize },
    #[error("TDD pattern has no uplink slot")]
    NoUplinkSlot,
    #[error("unknown slot kind {0:?} (expected D, U or S)")]
    BadSlotKind(char),
    #[error("sensing schedule has no entries")]
    EmptySchedule,
    #[error("sensing period must be at least one frame")]
    ZeroSensingPeriod,
    #[error("entries[{index}]: slot {slot} is outside the {slots_per_frame}-slot frame")]
    SensingSlotOutOfRange { index: usize, slot: usize, slots_per_frame: usize },
    #[error("entries[{index}]: symbol {symbol} is outside the 14-symbol slot")]
    SensingSymbolOutOfRange { index: usize, symbol: usize },
    #[error("entries[{index}]: slot {slot} is {kind}, sensing symbols must sit in UL slots")]
    SensingNotUplink { index: usize, slot: usize, kind: SlotKind },
    #[error("entries[{index}]: duplicate sensing symbol (slot {slot}, symbol {symbol})")]
    DuplicateSensingEntry { index: usize, slot: usize, symbol: usize },
}

/// Subcarrier-spacing index `mu`; spacing is `15 kHz * 2^mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Numerology {
    mu: u8,
}

impl Numerology {
    pub fn new(mu: u8) -> Result<Self, GridError> {
        if mu > MAX_MU {
            return Err(GridError::BadNumerology(mu));
        }
        Ok(Self { mu })
    }

    pub fn mu(self) -> u8 {
        self.mu
    }

    pub fn scs_hz(self) -> f64 {
        15_000.0 * f64::from(1u32 << self.mu)
    }

    pub fn slots_per_frame(self) -> usize {
        10 << self.mu
    }

    pub fn symbols_per_slot(self) -> usize {
        SYMBOLS_PER_SLOT
    }

    pub fn symbols_per_frame(self) -> usize {
        symbols_per_frame(self)
    }

    pub fn slot_duration_s(self) -> f64 {
        0.001 / f64::from(1u32 << self.mu)
    }

    /// Slot length in milliseconds, exact.
    pub fn slot_ms(self) -> Ratio<u64> {
        Ratio::new(1, 1u64 << self.mu)
    }

    /// Start time of an absolute symbol index, in milliseconds, exact.
    pub fn symbol_time_ms(self, absolute_symbol: u64) -> Ratio<u64> {
        Ratio::new(absolute_symbol * FRAME_MS, self.symbols_per_frame() as u64)
    }

    /// Start time of an absolute slot index, in milliseconds, exact.
    pub fn slot_time_ms(self, absolute_slot: u64) -> Ratio<u64> {
        self.symbol_time_ms(absolute_slot * SYMBOLS_PER_SLOT as u64)
    }
}

impl Default for Numerology {
    fn default() -> Self {
        Self { mu: 1 }
    }
}

/// OFDM symbols in one 10 ms frame: `14 * 10 * 2^mu`.
pub fn symbols_per_frame(numerology: Numerology) -> usize {
    SYMBOLS_PER_SLOT * numerology.slots_per_frame()
}

/// Band geometry every other module indexes into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrbGrid {
    numerology: Numerology,
    n_prb: usize,
    fft_size: usize,
    sample_rate_hz: f64,
}

/// Builds the smallest power-of-two FFT grid holding `n_prb` PRBs.
pub fn make_grid(mu: u8, n_prb: usize) -> Result<PrbGrid, GridError> {
    PrbGrid::new(Numerology::new(mu)?, n_prb)
}

impl PrbGrid {
    pub fn new(numerology: Numerology, n_prb: usize) -> Result<Self, GridError> {
        if n_prb == 0 {
            return Err(GridError::EmptyGrid);
        }
        let occupied = n_prb
            .checked_mul(SUBCARRIERS_PER_PRB)
            .ok_or(GridError::GridTooLarge { n_prb })?;
        let fft_size = occupied.next_power_of_two();
        if fft_size > MAX_FFT_SIZE {
            return Err(GridError::GridTooLarge { n_prb });
        }
        Ok(Self {
            numerology,
            n_prb,
            fft_size,
            sample_rate_hz: fft_size as f64 * numerology.scs_hz(),
        })
    }

    pub fn numerology(&self) -> Numerology {
        self.numerology
    }

    pub fn n_prb(&self) -> usize {
        self.n_prb
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn scs_hz(&self) -> f64 {
        self.numerology.scs_hz()
    }

    pub fn occupied_subcarriers(&self) -> usize {
        self.n_prb * SUBCARRIERS_PER_PRB
    }

    /// Logical (signed, DC = 0) subcarrier indices of one PRB.
    pub fn prb_to_subcarriers(&self, prb: usize) -> Result<Range<i64>, GridError> {
        if prb >= self.n_prb {
            return Err(GridError::PrbOutOfRange { prb, n_prb: self.n_prb });
        }
        let start = self.lowest_subcarrier() + (prb * SUBCARRIERS_PER_PRB) as i64;
        Ok(start..start + SUBCARRIERS_PER_PRB as i64)
    }

    /// FFT bin indices of one PRB, in increasing logical-subcarrier order.
    pub fn prb_bins(&self, prb: usize) -> Result<[usize; SUBCARRIERS_PER_PRB], GridError> {
        let subcarriers = self.prb_to_subcarriers(prb)?;
        let mut bins = [0; SUBCARRIERS_PER_PRB];
        for (bin, k) in bins.iter_mut().zip(subcarriers) {
            *bin = self.bin_of(k);
        }
        Ok(bins)
    }

    /// FFT bin of a logical subcarrier.
    pub fn bin_of(&self, subcarrier: i64) -> usize {
        subcarrier.rem_euclid(self.fft_size as i64) as usize
    }

    /// Centre frequency of a logical subcarrier relative to the carrier.
    pub fn subcarrier_offset_hz(&self, subcarrier: i64) -> f64 {
        subcarrier as f64 * self.scs_hz()
    }

    pub fn lowest_subcarrier(&self) -> i64 {
        -((self.n_prb * SUBCARRIERS_PER_PRB / 2) as i64)
    }

    /// Every occupied logical subcarrier, lowest first.
    pub fn occupied_range(&self) -> Range<i64> {
        let lo = self.lowest_subcarrier();
        lo..lo + self.occupied_subcarriers() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    #[serde(rename = "D")]
    Downlink,
    #[serde(rename = "U")]
    Uplink,
    #[serde(rename = "S")]
    Special,
}

impl SlotKind {
    pub fn symbol(self) -> char {
        match self {
            SlotKind::Downlink => 'D',
            SlotKind::Uplink => 'U',
            SlotKind::Special => 'S',
        }
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotKind::Downlink => "DL",
            SlotKind::Uplink => "UL",
            SlotKind::Special => "SPECIAL",
        })
    }
}

/// Cyclic TDD slot pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TddPattern {
    slots: Vec<SlotKind>,
}

impl TddPattern {
    pub fn new(slots: Vec<SlotKind>, numerology: Numerology) -> Result<Self, GridError> {
        if slots.is_empty() {
            return Err(GridError::EmptyPattern);
        }
        let slots_per_frame = numerology.slots_per_frame();
        if !slots_per_frame.is_multiple_of(slots.len()) {
            return Err(GridError::PeriodMismatch { period: slots.len(), slots_per_frame });
        }
        if !slots.contains(&SlotKind::Uplink) {
            return Err(GridError::NoUplinkSlot);
        }
        Ok(Self { slots })
    }

    /// Parses the compact `"DDDDDDDSUU"` notation.
    pub fn parse(text: &str, numerology: Numerology) -> Result<Self, GridError> {
        let slots = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c.to_ascii_uppercase() {
                'D' => Ok(SlotKind::Downlink),
                'U' => Ok(SlotKind::Uplink),
                'S' => Ok(SlotKind::Special),
                other => Err(GridError::BadSlotKind(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(slots, numerology)
    }

    pub fn slots(&self) -> &[SlotKind] {
        &self.slots
    }

    pub fn period_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_kind(&self, absolute_slot: u64) -> SlotKind {
        slot_kind(self, absolute_slot)
    }
}

impl Default for TddPattern {
    /// `DDDDDDDSUU`
    fn default() -> Self {
        let mut slots = vec![SlotKind::Downlink; 7];
        slots.extend([SlotKind::Special, SlotKind::Uplink, SlotKind::Uplink]);
        Self { slots }
    }
}

impl fmt::Display for TddPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.slots.iter().try_for_each(|kind| write!(f, "{}", kind.symbol()))
    }
}

impl FromStr for SlotKind {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" | "DL" => Ok(SlotKind::Downlink),
            "U" | "UL" => Ok(SlotKind::Uplink),
            "S" | "SPECIAL" => Ok(SlotKind::Special),
            _ => Err(GridError::BadSlotKind(s.chars().next().unwrap_or(' '))),
        }
    }
}

pub fn slot_kind(pattern: &TddPattern, absolute_slot: u64) -> SlotKind {
    pattern.slots[(absolute_slot % pattern.slots.len() as u64) as usize]
}

/// One reserved sensing symbol, located within the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SensingEntry {
    pub slot: usize,
    pub symbol: usize,
}

/// Which symbols the gNB reserves for sensing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingSchedule {
    entries: Vec<SensingEntry>,
    period_frames: u32,
}

impl SensingSchedule {
    pub fn new(
        entries: Vec<SensingEntry>,
        period_frames: u32,
        pattern: &TddPattern,
        numerology: Numerology,
    ) -> Result<Self, GridError> {
        if entries.is_empty() {
            return Err(GridError::EmptySchedule);
        }
        if period_frames == 0 {
            return Err(GridError::ZeroSensingPeriod);
        }
        let slots_per_frame = numerology.slots_per_frame();
        for (index, entry) in entries.iter().enumerate() {
            if entry.slot >= slots_per_frame {
                return Err(GridError::SensingSlotOutOfRange {
                    index,
                    slot: entry.slot,
                    slots_per_frame,
                });
            }
            if entry.symbol >= SYMBOLS_PER_SLOT {
                return Err(GridError::SensingSymbolOutOfRange { index, symbol: entry.symbol });
            }
            let kind = pattern.slot_kind(entry.slot as u64);
            if kind != SlotKind::Uplink {
                return Err(GridError::SensingNotUplink { index, slot: entry.slot, kind });
            }
            if entries[..index].contains(entry) {
                return Err(GridError::DuplicateSensingEntry {
                    index,
                    slot: entry.slot,
                    symbol: entry.symbol,
                });
            }
        }
        let mut entries = entries;
        entries.sort();
        Ok(Self { entries, period_frames })
    }

    /// Last symbol of the first UL slot, every frame.
    pub fn default_for(pattern: &TddPattern, numerology: Numerology) -> Result<Self, GridError> {
        let slot = pattern
            .slots()
            .iter()
            .position(|k| *k == SlotKind::Uplink)
            .ok_or(GridError::NoUplinkSlot)?;
        Self::new(
            vec![SensingEntry { slot, symbol: SYMBOLS_PER_SLOT - 1 }],
            1,
            pattern,
            numerology,
        )
    }

    pub fn entries(&self) -> &[SensingEntry] {
        &self.entries
    }

    pub fn period_frames(&self) -> u32 {
        self.period_frames
    }

    /// Fraction of all symbols reserved for sensing, exact.
    pub fn overhead_fraction(&self, numerology: Numerology) -> Ratio<u64> {
        Ratio::new(
            self.entries.len() as u64,
            u64::from(self.period_frames) * numerology.symbols_per_frame() as u64,
        )
    }

    pub fn sensing_symbols_in_frame(&self, frame: u64) -> &[SensingEntry] {
        if frame.is_multiple_of(u64::from(self.period_frames)) {
            &self.entries
        } else {
            &[]
        }
    }

    /// Sensing symbol indices inside one absolute slot.
    pub fn symbols_in_slot(&self, absolute_slot: u64, numerology: Numerology) -> Vec<usize> {
        let per_frame = numerology.slots_per_frame() as u64;
        let frame = absolute_slot / per_frame;
        let slot = (absolute_slot % per_frame) as usize;
        self.sensing_symbols_in_frame(frame)
            .iter()
            .filter(|e| e.slot == slot)
            .map(|e| e.symbol)
            .collect()
    }
}

pub fn sensing_symbols_in_frame(schedule: &SensingSchedule, frame: u64) -> Vec<SensingEntry> {
    schedule.sensing_symbols_in_frame(frame).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn mu1() -> Numerology {
        Numerology::new(1).unwrap()
    }

    #[test]
    fn symbols_per_frame_for_every_numerology() {
        let expected = [140, 280, 560, 1120];
        for mu in 0..=MAX_MU {
            let n = Numerology::new(mu).unwrap();
            assert_eq!(symbols_per_frame(n), 14 * 10 * (1 << mu));
            assert_eq!(symbols_per_frame(n), expected[mu as usize]);
            assert_eq!(n.scs_hz(), 15_000.0 * f64::from(1u32 << mu));
        }
        assert_eq!(Numerology::new(4), Err(GridError::BadNumerology(4)));
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(1, 106).unwrap();
        assert_eq!(g.fft_size(), 2048);
        assert_eq!(g.sample_rate_hz(), 61.44e6);

        let g = make_grid(1, 1).unwrap();
        assert_eq!(g.fft_size(), 16);
        assert_eq!(g.sample_rate_hz(), 480e3);

        assert_eq!(make_grid(1, 0), Err(GridError::EmptyGrid));
        assert_eq!(make_grid(7, 4), Err(GridError::BadNumerology(7)));
        assert!(matches!(make_grid(1, 3000), Err(GridError::GridTooLarge { .. })));
    }

    #[test]
    fn prb_subcarrier_mapping() {
        let g = make_grid(1, 2).unwrap();
        assert_eq!(g.prb_to_subcarriers(0).unwrap(), -12..0);
        assert_eq!(g.prb_to_subcarriers(1).unwrap(), 0..12);
        assert_eq!(
            g.prb_to_subcarriers(2),
            Err(GridError::PrbOutOfRange { prb: 2, n_prb: 2 })
        );
        // fft 32: negative subcarriers land at the top of the FFT.
        assert_eq!(g.prb_bins(0).unwrap()[0], 20);
        assert_eq!(g.prb_bins(0).unwrap()[11], 31);
        assert_eq!(g.prb_bins(1).unwrap()[0], 0);
    }

    #[test]
    fn slot_kind_examples() {
        let p = TddPattern::default();
        assert_eq!(p.to_string(), "DDDDDDDSUU");
        assert_eq!(slot_kind(&p, 8), SlotKind::Uplink);
        assert_eq!(slot_kind(&p, 0), SlotKind::Downlink);
        assert_eq!(slot_kind(&p, 17), SlotKind::Special);
    }

    #[test]
    fn pattern_validation() {
        assert_eq!(TddPattern::parse("DDD", mu1()), Err(GridError::PeriodMismatch {
            period: 3,
            slots_per_frame: 20
        }));
        assert_eq!(TddPattern::parse("DDDDS", mu1()), Err(GridError::NoUplinkSlot));
        assert_eq!(TddPattern::parse("DX", mu1()), Err(GridError::BadSlotKind('X')));
        assert_eq!(TddPattern::parse("", mu1()), Err(GridError::EmptyPattern));
        assert_eq!(TddPattern::parse("DDDDDDDSUU", mu1()).unwrap(), TddPattern::default());
    }

    #[test]
    fn default_schedule_and_overhead() {
        let n = mu1();
        let p = TddPattern::default();
        let s = SensingSchedule::default_for(&p, n).unwrap();
        assert_eq!(s.entries(), &[SensingEntry { slot: 8, symbol: 13 }]);
        assert_eq!(s.overhead_fraction(n), Ratio::new(1, 280));
        assert_eq!(
            sensing_symbols_in_frame(&s, 5),
            vec![SensingEntry { slot: 8, symbol: 13 }]
        );
        // consecutive sensing symbols are exactly one frame apart
        let t0 = n.symbol_time_ms(8 * 14 + 13);
        let t1 = n.symbol_time_ms(280 + 8 * 14 + 13);
        assert_eq!(t1 - t0, Ratio::from_integer(10));
    }

    #[test]
    fn schedule_periods_and_multiple_entries() {
        let n = mu1();
        let p = TddPattern::default();
        let every_other = SensingSchedule::new(vec![SensingEntry { slot: 8, symbol: 13 }], 2, &p, n)
            .unwrap();
        assert!(sensing_symbols_in_frame(&every_other, 1).is_empty());
        assert_eq!(sensing_symbols_in_frame(&every_other, 2).len(), 1);

        let two = SensingSchedule::new(
            vec![SensingEntry { slot: 8, symbol: 13 }, SensingEntry { slot: 9, symbol: 0 }],
            1,
            &p,
            n,
        )
        .unwrap();
        assert_eq!(sensing_symbols_in_frame(&two, 0).len(), 2);
        assert_eq!(two.overhead_fraction(n), Ratio::new(2, 280));
        assert_eq!(two.symbols_in_slot(20 + 9, n), vec![0]);
        assert!(two.symbols_in_slot(20 + 7, n).is_empty());
    }

    #[test]
    fn schedule_rejects_non_uplink_and_bad_entries() {
        let n = mu1();
        let p = TddPattern::default();
        let err = SensingSchedule::new(vec![SensingEntry { slot: 0, symbol: 13 }], 1, &p, n);
        assert_eq!(
            err,
            Err(GridError::SensingNotUplink { index: 0, slot: 0, kind: SlotKind::Downlink })
        );
        assert!(SensingSchedule::new(vec![SensingEntry { slot: 8, symbol: 14 }], 1, &p, n).is_err());
        assert!(SensingSchedule::new(vec![SensingEntry { slot: 20, symbol: 1 }], 1, &p, n).is_err());
        assert!(SensingSchedule::new(vec![SensingEntry { slot: 8, symbol: 1 }], 0, &p, n).is_err());
        assert!(SensingSchedule::new(vec![], 1, &p, n).is_err());
        let dup = vec![SensingEntry { slot: 8, symbol: 1 }, SensingEntry { slot: 8, symbol: 1 }];
        assert!(matches!(
            SensingSchedule::new(dup, 1, &p, n),
            Err(GridError::DuplicateSensingEntry { index: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn prb_bins_are_disjoint_and_complete(mu in 0u8..=3, n_prb in 1usize..=300) {
            let g = make_grid(mu, n_prb).unwrap();
            prop_assert!(g.fft_size().is_power_of_two());
            prop_assert!(g.fft_size() >= 12 * n_prb);
            let mut seen = HashSet::new();
            for prb in 0..n_prb {
                for bin in g.prb_bins(prb).unwrap() {
                    prop_assert!(bin < g.fft_size());
                    prop_assert!(seen.insert(bin));
                }
            }
            prop_assert_eq!(seen.len(), 12 * n_prb);
        }

        #[test]
        fn sensing_entries_always_in_uplink_slots(
            kinds in proptest::collection::vec(0u8..3, 10),
            picks in proptest::collection::vec((0usize..20, 0usize..14), 1..4),
        ) {
            let n = mu1();
            let slots: Vec<SlotKind> = kinds
                .iter()
                .map(|k| [SlotKind::Downlink, SlotKind::Uplink, SlotKind::Special][*k as usize])
                .collect();
            if let Ok(pattern) = TddPattern::new(slots, n) {
                let entries: Vec<SensingEntry> =
                    picks.iter().map(|&(slot, symbol)| SensingEntry { slot, symbol }).collect();
                if let Ok(schedule) = SensingSchedule::new(entries, 1, &pattern, n) {
                    for e in schedule.entries() {
                        prop_assert_eq!(pattern.slot_kind(e.slot as u64), SlotKind::Uplink);
                    }
                }
            }
        }
    }
}
