//! Return-predictability tests for Moving Targets scores.
//!
//! Each scored call is sorted into a quintile against the prior year's pooled
//! score distribution and held from the month after the call until the
//! firm's next call. Equal-weighted quintile portfolios are evaluated by
//! excess return and factor alphas; firm-level predictability is checked with
//! Fama-MacBeth regressions.

mod alpha;
mod fama_macbeth;
mod ols;
mod portfolio;
mod quintiles;
mod report;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::YearMonth;

pub use alpha::{factor_alpha, AlphaEstimate, FactorModel, SeriesKind};
pub use fama_macbeth::{fama_macbeth, DroppedMonth, FamaMacbethResult, FmTerm, FM_TERMS};
pub use ols::{design_with_intercept, mean_t_stat, ols, ols_with, Covariance, MeanEstimate, OlsFit, DEGENERATE_TOLERANCE};
pub use portfolio::{assign_quintiles, calendar_time_returns, long_short_spread, Assignments, QuintileAssignment, QuintilePortfolios};
pub use quintiles::{assign_quintile, percentile, quintile_breakpoints, MIN_BREAKPOINT_OBS};
pub use report::{
    plot_data_csv, run_backtest, significance_stars, tab3_csv, tab3_text, tab4_csv, two_sided_p, AlphaTable, MethodBacktest,
};

/// Minimum months for alphas and Fama-MacBeth averages.
pub const DEFAULT_MIN_MONTHS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BacktestError {
    #[error("insufficient history: {n} prior-year observations, need at least {MIN_BREAKPOINT_OBS}")]
    InsufficientHistory { n: usize },
    #[error("insufficient overlap: {months} months, need at least {required}")]
    InsufficientOverlap { months: usize, required: usize },
    #[error("series have no months in common")]
    EmptyOverlap,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("insufficient observations: {n} rows for {k} regressors")]
    InsufficientObservations { n: usize, k: usize },
    #[error("design has {rows} rows but response has {len}")]
    ShapeMismatch { rows: usize, len: usize },
    #[error("every cross-section was dropped ({dropped} months)")]
    AllMonthsDropped { dropped: usize },
    #[error("duplicate month {0} in series")]
    DuplicateMonth(YearMonth),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestOptions {
    pub min_months: usize,
    /// Newey-West lags for t-statistics; `None` uses classical errors.
    pub newey_west_lags: Option<usize>,
}

impl Default for BacktestOptions {
    fn default() -> Self {
        Self {
            min_months: DEFAULT_MIN_MONTHS,
            newey_west_lags: None,
        }
    }
}

/// Monthly observations with unique, ascending months.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonthlySeries(BTreeMap<YearMonth, f64>);

impl MonthlySeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (YearMonth, f64)>) -> Result<Self, BacktestError> {
        let mut map = BTreeMap::new();
        for (m, v) in pairs {
            if map.insert(m, v).is_some() {
                return Err(BacktestError::DuplicateMonth(m));
            }
        }
        Ok(Self(map))
    }

    pub(crate) fn insert(&mut self, month: YearMonth, value: f64) {
        self.0.insert(month, value);
    }

    pub fn get(&self, month: YearMonth) -> Option<f64> {
        self.0.get(&month).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        self.0.iter().map(|(m, v)| (*m, *v))
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.values().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
