//! Year-quarter and year-month keys with base-4 / base-12 arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// A calendar year-quarter. Ordered lexicographically by `(year, quarter)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearQuarter {
    year: i32,
    quarter: u8,
}

impl YearQuarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self, CorpusError> {
        if !(1..=4).contains(&quarter) {
            return Err(CorpusError::InvalidQuarter(quarter.into()));
        }
        Ok(Self { year, quarter })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 4 + i64::from(self.quarter - 1)
    }

    fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(4);
        let quarter = ordinal.rem_euclid(4) as u8 + 1;
        Self {
            year: year as i32,
            quarter,
        }
    }

    /// Advances by `k` quarters (negative `k` moves back).
    pub fn shift_quarters(self, k: i64) -> Self {
        Self::from_ordinal(self.ordinal() + k)
    }

    /// Signed number of quarters from `other` to `self`.
    pub fn quarters_since(self, other: Self) -> i64 {
        self.ordinal() - other.ordinal()
    }

    /// The month in which the call for this quarter is dated: the quarter's
    /// final calendar month (Q1 -> March).
    pub fn call_month(self) -> YearMonth {
        YearMonth {
            year: self.year,
            month: self.quarter * 3,
        }
    }
}

/// Free-function form of [`YearQuarter::shift_quarters`].
pub fn shift_quarters(t: YearQuarter, k: i64) -> YearQuarter {
    t.shift_quarters(k)
}

impl fmt::Display for YearQuarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for YearQuarter {
    type Err = CorpusError;

    /// Parses `2024Q3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidPeriod(s.to_string());
        let (y, q) = s.split_once(['Q', 'q']).ok_or_else(bad)?;
        let year = y.trim().parse().map_err(|_| bad())?;
        let quarter = q.trim().parse().map_err(|_| bad())?;
        Self::new(year, quarter)
    }
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

impl YearMonth {
    pub const MIN: YearMonth = YearMonth {
        year: i32::MIN,
        month: 1,
    };

    pub fn new(year: i32, month: u8) -> Result<Self, CorpusError> {
        if !(1..=12).contains(&month) {
            return Err(CorpusError::InvalidMonth(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month - 1)
    }

    pub fn shift_months(self, k: i64) -> Self {
        let o = self.ordinal() + k;
        Self {
            year: o.div_euclid(12) as i32,
            month: o.rem_euclid(12) as u8 + 1,
        }
    }

    pub fn next(self) -> Self {
        self.shift_months(1)
    }

    pub fn prev(self) -> Self {
        self.shift_months(-1)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(self, other: Self) -> i64 {
        self.ordinal() - other.ordinal()
    }

    /// Inclusive range of months `from..=to`; empty when `to < from`.
    pub fn range_inclusive(from: Self, to: Self) -> impl Iterator<Item = YearMonth> {
        let n = (to.months_since(from) + 1).max(0);
        (0..n).map(move |k| from.shift_months(k))
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = CorpusError;

    /// Parses `YYYY-MM`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidMonth(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}
