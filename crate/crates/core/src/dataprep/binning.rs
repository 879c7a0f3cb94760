use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_BARGES: u32 = 42;

#[derive(Debug, Error, PartialEq)]
pub enum BinError {
    #[error("barge count {0} is outside [1, {MAX_BARGES}]")]
    OutOfRange(u32),
    #[error("bins must be ascending, disjoint and contiguous over [1, {MAX_BARGES}]: {0}")]
    InvalidBins(String),
}

/// Inclusive barge-count ranges, one per quantity class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BargeClassMap {
    bins: Vec<(u32, u32)>,
}

impl Default for BargeClassMap {
    fn default() -> Self {
        Self {
            bins: vec![(1, 1), (2, 4), (5, 12), (13, 20), (21, 29), (30, 42)],
        }
    }
}

impl BargeClassMap {
    pub fn new(bins: Vec<(u32, u32)>) -> Result<Self, BinError> {
        let mut expected = 1;
        for &(lo, hi) in &bins {
            if lo != expected || hi < lo {
                return Err(BinError::InvalidBins(format!("{bins:?}")));
            }
            expected = hi + 1;
        }
        if expected != MAX_BARGES + 1 {
            return Err(BinError::InvalidBins(format!("{bins:?}")));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[(u32, u32)] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin(&self, count: u32) -> Result<usize, BinError> {
        self.bins
            .iter()
            .position(|&(lo, hi)| (lo..=hi).contains(&count))
            .ok_or(BinError::OutOfRange(count))
    }

    pub fn class_names(&self) -> Vec<String> {
        self.bins
            .iter()
            .map(|&(lo, hi)| match (lo, hi) {
                (1, 1) => "1 barge".to_string(),
                (lo, hi) if lo == hi => format!("{lo} barges"),
                (lo, hi) => format!("{lo}-{hi} barges"),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bins() {
        let m = BargeClassMap::default();
        for (count, class) in [(1, 0), (4, 1), (5, 2), (12, 2), (13, 3), (20, 3), (21, 4), (29, 4), (30, 5), (42, 5)] {
            assert_eq!(m.bin(count).unwrap(), class, "count {count}");
        }
        assert_eq!(m.bin(0), Err(BinError::OutOfRange(0)));
        assert_eq!(m.bin(43), Err(BinError::OutOfRange(43)));
        assert_eq!(m.class_names()[2], "5-12 barges");
        assert_eq!(BargeClassMap::new(m.bins().to_vec()).unwrap(), m);
    }

    #[test]
    fn rejects_gaps_and_overlaps() {
        assert!(BargeClassMap::new(vec![(1, 3), (5, 42)]).is_err());
        assert!(BargeClassMap::new(vec![(1, 5), (5, 42)]).is_err());
        assert!(BargeClassMap::new(vec![(1, 20)]).is_err());
        assert!(BargeClassMap::new(vec![(1, 42)]).is_ok());
    }
}
