use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{mean_t_stat, ols, BacktestError, BacktestOptions};
use crate::corpus::{PanelObservation, YearMonth};

/// Reported terms, in table order. The intercept is last.
pub const FM_TERMS: [&str; 6] = ["MT", "Log(Size)", "Log(BM)", "Ret(-1,0)", "Ret(-12,-1)", "Constant"];

#[derive(Debug, Clone, PartialEq)]
pub struct FmTerm {
    pub name: &'static str,
    pub coefficient: f64,
    pub t_stat: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedMonth {
    pub month: YearMonth,
    pub reason: BacktestError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamaMacbethResult {
    pub terms: Vec<FmTerm>,
    pub avg_r_squared: f64,
    /// Firm-months across the cross-sections used.
    pub n_obs: usize,
    pub months_used: usize,
    pub dropped: Vec<DroppedMonth>,
    /// Rows excluded for missing controls.
    pub incomplete_rows: usize,
}

impl FamaMacbethResult {
    pub fn term(&self, name: &str) -> Option<&FmTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

struct CrossSection {
    coefficients: Vec<f64>,
    r_squared: f64,
    n: usize,
}

/// Monthly cross-sectional OLS of raw returns on MT and controls, averaged
/// over months. Months that cannot be estimated are dropped and listed.
pub fn fama_macbeth(
    panel: &[PanelObservation],
    options: &BacktestOptions,
) -> Result<FamaMacbethResult, BacktestError> {
    let mut by_month: BTreeMap<YearMonth, Vec<([f64; 5], f64)>> = BTreeMap::new();
    let mut incomplete_rows = 0;
    for obs in panel {
        match obs.regressors() {
            Some(x) => by_month.entry(obs.month).or_default().push((x, obs.ret)),
            None => incomplete_rows += 1,
        }
    }

    let fits: Vec<(YearMonth, Result<CrossSection, BacktestError>)> = by_month
        .into_par_iter()
        .map(|(month, rows)| {
            let y: Vec<f64> = rows.iter().map(|(_, r)| *r).collect();
            // Regressors first, intercept in the last column.
            let x = DMatrix::from_fn(rows.len(), 6, |i, j| if j < 5 { rows[i].0[j] } else { 1.0 });
            let fit = ols(&y, &x).map(|f| CrossSection {
                coefficients: f.coefficients,
                r_squared: f.r_squared,
                n: f.n_obs,
            });
            (month, fit)
        })
        .collect();

    let mut used = Vec::new();
    let mut dropped = Vec::new();
    for (month, fit) in fits {
        match fit {
            Ok(cs) => used.push(cs),
            Err(reason) => {
                log::debug!("fama-macbeth: dropping {month}: {reason}");
                dropped.push(DroppedMonth { month, reason });
            }
        }
    }
    if used.is_empty() {
        return Err(BacktestError::AllMonthsDropped { dropped: dropped.len() });
    }
    if used.len() < options.min_months {
        return Err(BacktestError::InsufficientOverlap {
            months: used.len(),
            required: options.min_months,
        });
    }

    let terms = FM_TERMS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let series: Vec<f64> = used.iter().map(|cs| cs.coefficients[j]).collect();
            let m = mean_t_stat(&series, options.newey_west_lags);
            FmTerm {
                name,
                coefficient: m.mean,
                t_stat: m.t_stat,
                degenerate: m.degenerate,
            }
        })
        .collect();
    Ok(FamaMacbethResult {
        terms,
        avg_r_squared: used.iter().map(|cs| cs.r_squared).sum::<f64>() / used.len() as f64,
        n_obs: used.iter().map(|cs| cs.n).sum(),
        months_used: used.len(),
        dropped,
        incomplete_rows,
    })
}
