use std::collections::BTreeMap;

use super::{assign_quintile, quintile_breakpoints, BacktestError, MonthlySeries};
use crate::corpus::{holding_windows, FirmId, ReturnsTable, YearMonth, YearQuarter};
use crate::score::MovingTargetsScore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuintileAssignment {
    pub firm: FirmId,
    pub period: YearQuarter,
    pub quintile: u8,
    pub entry: YearMonth,
    pub exit: YearMonth,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignments {
    pub assignments: Vec<QuintileAssignment>,
    /// Scored calls without a full prior year or with too few prior scores.
    pub unassignable: Vec<(FirmId, YearQuarter)>,
    /// Cutoffs used per call period.
    pub breakpoints: BTreeMap<YearQuarter, [f64; 4]>,
}

/// Sorts each scored call into a quintile using cutoffs from all scores in
/// the four preceding quarters. Scores are used as given, so orient them
/// first. Calls within a year of the first scored quarter are unassignable.
pub fn assign_quintiles(scores: &[MovingTargetsScore]) -> Assignments {
    let windows = holding_windows(scores.iter().map(|s| (&s.firm, s.period)));
    let mut by_period: BTreeMap<YearQuarter, Vec<f64>> = BTreeMap::new();
    for s in scores {
        if let Some(v) = s.value {
            by_period.entry(s.period).or_default().push(v);
        }
    }
    let Some(&first) = by_period.keys().next() else {
        return Assignments::default();
    };

    let mut out = Assignments::default();
    for (&period, _) in by_period.iter().filter(|(p, _)| p.quarters_since(first) >= 4) {
        let pool: Vec<f64> = by_period
            .range(period.shift_quarters(-4)..period)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        if let Ok(c) = quintile_breakpoints(&pool) {
            out.breakpoints.insert(period, c);
        }
    }

    let mut scored: Vec<&MovingTargetsScore> = scores.iter().filter(|s| s.value.is_some()).collect();
    scored.sort_by(|a, b| (&a.firm, a.period).cmp(&(&b.firm, b.period)));
    for s in scored {
        let value = s.value.expect("filtered");
        match out.breakpoints.get(&s.period) {
            Some(c) => {
                let w = windows[&(s.firm.clone(), s.period)];
                out.assignments.push(QuintileAssignment {
                    firm: s.firm.clone(),
                    period: s.period,
                    quintile: assign_quintile(value, c),
                    entry: w.entry,
                    exit: w.exit,
                });
            }
            None => out.unassignable.push((s.firm.clone(), s.period)),
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuintilePortfolios {
    /// Index 0 is Q1.
    pub series: [MonthlySeries; 5],
    /// Members with a return, per month and quintile.
    pub members: BTreeMap<YearMonth, [usize; 5]>,
    /// Held firm-months dropped for lack of a return.
    pub missing_returns: usize,
}

impl QuintilePortfolios {
    pub fn quintile(&self, q: u8) -> &MonthlySeries {
        &self.series[usize::from(q) - 1]
    }
}

/// Equal-weighted monthly quintile returns. A firm with overlapping windows
/// is held once per month under its most recent call.
pub fn calendar_time_returns(assignments: &[QuintileAssignment], returns: &ReturnsTable) -> QuintilePortfolios {
    let mut holdings: BTreeMap<(&FirmId, YearMonth), &QuintileAssignment> = BTreeMap::new();
    for a in assignments {
        for m in YearMonth::range_inclusive(a.entry, a.exit) {
            holdings
                .entry((&a.firm, m))
                .and_modify(|cur| {
                    if a.period > cur.period {
                        *cur = a;
                    }
                })
                .or_insert(a);
        }
    }

    let mut sums: BTreeMap<YearMonth, [(f64, usize); 5]> = BTreeMap::new();
    let mut out = QuintilePortfolios::default();
    for ((firm, month), a) in holdings {
        let Some(r) = returns.ret(firm, month) else {
            out.missing_returns += 1;
            continue;
        };
        let cell = &mut sums.entry(month).or_default()[usize::from(a.quintile) - 1];
        cell.0 += r;
        cell.1 += 1;
    }
    for (month, cells) in sums {
        let counts = cells.map(|(_, n)| n);
        for (q, (sum, n)) in cells.into_iter().enumerate() {
            if n > 0 {
                out.series[q].insert(month, sum / n as f64);
            }
        }
        out.members.insert(month, counts);
    }
    out
}

/// `q5 - q1` on common months.
pub fn long_short_spread(q5: &MonthlySeries, q1: &MonthlySeries) -> Result<MonthlySeries, BacktestError> {
    let spread = MonthlySeries::from_pairs(q5.iter().filter_map(|(m, v)| q1.get(m).map(|w| (m, v - w))))?;
    if spread.is_empty() {
        return Err(BacktestError::EmptyOverlap);
    }
    Ok(spread)
}
