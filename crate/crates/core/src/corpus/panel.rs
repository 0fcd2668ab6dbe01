//! Holding windows and the firm-month panel used by the econometrics.

use std::collections::{BTreeMap, BTreeSet};

use super::{FactorSeries, FirmId, ReturnsTable, YearMonth, YearQuarter};
use crate::score::MovingTargetsScore;

/// Months held when a firm has no later call.
pub const DEFAULT_HOLD_MONTHS: i64 = 3;

/// Months a firm-quarter's score stays in force: from the month after the
/// call through the month of the firm's next call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoldingWindow {
    pub entry: YearMonth,
    pub exit: YearMonth,
}

impl HoldingWindow {
    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        YearMonth::range_inclusive(self.entry, self.exit)
    }

    pub fn len(&self) -> usize {
        (self.exit.months_since(self.entry) + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, month: YearMonth) -> bool {
        self.entry <= month && month <= self.exit
    }
}

/// Computes the holding window of every call in `calls`. The next call is the
/// firm's next listed period, whether or not it was scoreable.
pub fn holding_windows<'a>(
    calls: impl IntoIterator<Item = (&'a FirmId, YearQuarter)>,
) -> BTreeMap<(FirmId, YearQuarter), HoldingWindow> {
    let mut by_firm: BTreeMap<&FirmId, BTreeSet<YearQuarter>> = BTreeMap::new();
    for (firm, period) in calls {
        by_firm.entry(firm).or_default().insert(period);
    }
    let mut out = BTreeMap::new();
    for (firm, periods) in by_firm {
        let periods: Vec<YearQuarter> = periods.into_iter().collect();
        for (i, &period) in periods.iter().enumerate() {
            let call = period.call_month();
            let exit = match periods.get(i + 1) {
                Some(next) => next.call_month(),
                None => call.shift_months(DEFAULT_HOLD_MONTHS),
            };
            out.insert(
                (firm.clone(), period),
                HoldingWindow {
                    entry: call.next(),
                    exit,
                },
            );
        }
    }
    out
}

/// Return-predictor controls. `None` marks missing inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Controls {
    pub log_size: Option<f64>,
    pub log_bm: Option<f64>,
    /// Prior month's return.
    pub ret_1_0: Option<f64>,
    /// Compounded return over months -12..-1.
    pub ret_12_1: Option<f64>,
}

impl Controls {
    pub fn is_complete(&self) -> bool {
        self.log_size.is_some() && self.log_bm.is_some() && self.ret_1_0.is_some() && self.ret_12_1.is_some()
    }
}

/// One firm-month: the month's return with the score in force and controls.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation {
    pub firm: FirmId,
    pub month: YearMonth,
    pub score_period: YearQuarter,
    pub ret: f64,
    /// Return minus the risk-free rate, when factor data covers the month.
    pub excess_ret: Option<f64>,
    pub mt: f64,
    pub controls: Controls,
}

impl PanelObservation {
    /// `[MT, Log(Size), Log(BM), Ret(-1,0), Ret(-12,-1)]` when all are present.
    pub fn regressors(&self) -> Option<[f64; 5]> {
        let c = &self.controls;
        Some([self.mt, c.log_size?, c.log_bm?, c.ret_1_0?, c.ret_12_1?])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PanelDiagnostics {
    /// Sum of holding-window lengths over scored firm-quarters.
    pub expected_rows: usize,
    pub emitted_rows: usize,
    pub skipped_missing_return: usize,
    /// Emitted rows with at least one missing control.
    pub incomplete_controls: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    pub rows: Vec<PanelObservation>,
    pub diagnostics: PanelDiagnostics,
}

/// Compounded return over `from..=to`, or `None` if any month is missing.
pub fn compounded_return(returns: &ReturnsTable, firm: &FirmId, from: YearMonth, to: YearMonth) -> Option<f64> {
    YearMonth::range_inclusive(from, to)
        .try_fold(1.0, |acc, m| returns.ret(firm, m).map(|r| acc * (1.0 + r)))
        .map(|g| g - 1.0)
}

fn controls_for(returns: &ReturnsTable, firm: &FirmId, call_month: YearMonth, month: YearMonth) -> Controls {
    Controls {
        log_size: returns
            .latest_at_or_before(firm, call_month, |r| r.market_cap)
            .map(f64::ln),
        log_bm: returns
            .latest_at_or_before(firm, call_month, |r| r.book_to_market)
            .map(f64::ln),
        ret_1_0: returns.ret(firm, month.prev()),
        ret_12_1: compounded_return(returns, firm, month.shift_months(-12), month.prev()),
    }
}

/// Joins scores with returns into firm-month rows. `scores` should hold a
/// single scoring method; records without a value only delimit windows.
pub fn build_panel(scores: &[MovingTargetsScore], returns: &ReturnsTable, factors: &FactorSeries) -> Panel {
    let windows = holding_windows(scores.iter().map(|s| (&s.firm, s.period)));
    let mut panel = Panel::default();
    let mut scored: Vec<&MovingTargetsScore> = scores.iter().filter(|s| s.value.is_some()).collect();
    scored.sort_by(|a, b| (&a.firm, a.period).cmp(&(&b.firm, b.period)));

    for score in scored {
        let mt = score.value.expect("filtered");
        let window = windows[&(score.firm.clone(), score.period)];
        let call_month = score.period.call_month();
        for month in window.months() {
            panel.diagnostics.expected_rows += 1;
            let Some(ret) = returns.ret(&score.firm, month) else {
                panel.diagnostics.skipped_missing_return += 1;
                continue;
            };
            let controls = controls_for(returns, &score.firm, call_month, month);
            if !controls.is_complete() {
                panel.diagnostics.incomplete_controls += 1;
            }
            panel.rows.push(PanelObservation {
                firm: score.firm.clone(),
                month,
                score_period: score.period,
                ret,
                excess_ret: factors.get(month).map(|f| ret - f.rf),
                mt,
                controls,
            });
            panel.diagnostics.emitted_rows += 1;
        }
    }
    panel
}
