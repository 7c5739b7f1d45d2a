//! Fixed-length PRB bitset.

use std::fmt;

/// One bit per PRB. Bit `p` lives in byte `p / 8` at position `p % 8`
/// (least significant bit first) when packed.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct PrbMask {
    bits: Vec<bool>,
}

impl PrbMask {
    pub fn empty(n_prb: usize) -> Self {
        Self { bits: vec![false; n_prb] }
    }

    pub fn full(n_prb: usize) -> Self {
        Self { bits: vec![true; n_prb] }
    }

    pub fn from_indices(n_prb: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = Self::empty(n_prb);
        for p in indices {
            mask.set(p, true);
        }
        mask
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Unpacks `n_prb` bits; `None` if the buffer is short or has bits set
    /// past `n_prb - 1`.
    pub fn from_bitmap(n_prb: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != bitmap_len(n_prb) {
            return None;
        }
        let bits = (0..bytes.len() * 8)
            .map(|p| bytes[p / 8] >> (p % 8) & 1 == 1)
            .collect::<Vec<_>>();
        if bits[n_prb..].iter().any(|b| *b) {
            return None;
        }
        Some(Self { bits: bits[..n_prb].to_vec() })
    }

    pub fn to_bitmap(&self) -> Vec<u8> {
        let mut out = vec![0u8; bitmap_len(self.len())];
        for p in self.iter_set() {
            out[p / 8] |= 1 << (p % 8);
        }
        out
    }

    /// Lowercase hex of the packed bitmap.
    pub fn to_hex(&self) -> String {
        self.to_bitmap().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, prb: usize) -> bool {
        self.bits[prb]
    }

    pub fn set(&mut self, prb: usize, value: bool) {
        self.bits[prb] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn none(&self) -> bool {
        self.count() == 0
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(p, _)| p)
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_subset_of(&self, other: &PrbMask) -> bool {
        self.len() == other.len() && self.iter_set().all(|p| other.get(p))
    }
}

pub fn bitmap_len(n_prb: usize) -> usize {
    n_prb.div_ceil(8)
}

impl fmt::Debug for PrbMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrbMask({}/{} {:?})", self.count(), self.len(), self.iter_set().collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packs_lsb_first() {
        let m = PrbMask::from_indices(16, [0, 1]);
        assert_eq!(m.to_bitmap(), vec![0x03, 0x00]);
        assert_eq!(m.to_hex(), "0300");
        let m = PrbMask::from_indices(10, [9]);
        assert_eq!(m.to_bitmap(), vec![0x00, 0x02]);
    }

    #[test]
    fn rejects_trailing_bits() {
        assert!(PrbMask::from_bitmap(10, &[0x00, 0x04]).is_none());
        assert!(PrbMask::from_bitmap(10, &[0x00]).is_none());
        assert_eq!(PrbMask::from_bitmap(10, &[0x00, 0x02]).unwrap(), PrbMask::from_indices(10, [9]));
    }

    proptest! {
        #[test]
        fn bitmap_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..300)) {
            let m = PrbMask::from_bools(bits.clone());
            let back = PrbMask::from_bitmap(bits.len(), &m.to_bitmap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
