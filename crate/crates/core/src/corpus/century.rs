use serde::{Deserialize, Serialize};
use std::fmt;

use super::CorpusError;

pub const FIRST_CENTURY: u8 = 11;
pub const LAST_CENTURY: u8 = 20;

/// Century index, 11 through 20 (years 1000..=1999).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Century(u8);

impl Century {
    pub fn new(t: u8) -> Result<Self, CorpusError> {
        if (FIRST_CENTURY..=LAST_CENTURY).contains(&t) {
            Ok(Century(t))
        } else {
            Err(CorpusError::CenturyOutOfRange(t as i64))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn previous(self) -> Option<Century> {
        Century::new(self.0.checked_sub(1)?).ok()
    }

    pub fn next(self) -> Option<Century> {
        Century::new(self.0 + 1).ok()
    }

    /// Row or column sums at or below this value are dropped before binarization.
    pub fn sparse_cutoff(self) -> u64 {
        if self.0 <= 15 {
            3
        } else {
            5
        }
    }

    pub fn all() -> impl Iterator<Item = Century> {
        (FIRST_CENTURY..=LAST_CENTURY).map(Century)
    }

    /// Index into a 0-based array of the ten centuries.
    pub fn offset(self) -> usize {
        (self.0 - FIRST_CENTURY) as usize
    }
}

impl fmt::Display for Century {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps a birth year to its century: `floor(year / 100) + 1`.
pub fn assign_century(birth_year: i32) -> Result<Century, CorpusError> {
    if !(1000..=1999).contains(&birth_year) {
        return Err(CorpusError::YearOutOfRange(birth_year));
    }
    Ok(Century((birth_year / 100 + 1) as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundaries() {
        assert_eq!(assign_century(1600).unwrap().get(), 17);
        assert_eq!(assign_century(1699).unwrap().get(), 17);
        assert_eq!(assign_century(1000).unwrap().get(), 11);
        assert_eq!(assign_century(1999).unwrap().get(), 20);
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(assign_century(999), Err(CorpusError::YearOutOfRange(999))));
        assert!(assign_century(2000).is_err());
        assert!(Century::new(10).is_err());
    }

    #[test]
    fn cutoffs() {
        assert_eq!(Century::new(15).unwrap().sparse_cutoff(), 3);
        assert_eq!(Century::new(16).unwrap().sparse_cutoff(), 5);
    }

    proptest! {
        #[test]
        fn ten_fibers_of_width_100(year in 1000i32..2000) {
            let t = assign_century(year).unwrap().get() as i32;
            prop_assert!((t - 1) * 100 <= year && year < t * 100);
        }
    }
}
