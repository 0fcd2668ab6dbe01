use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{mean_t_stat, ols_with, BacktestError, BacktestOptions, Covariance, MonthlySeries};
use crate::corpus::{FactorRow, FactorSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorModel {
    /// Mean excess return.
    Excess,
    /// Market, size, value.
    ThreeFactor,
    /// Adds momentum and liquidity.
    FiveFactor,
}

impl FactorModel {
    pub const ALL: [FactorModel; 3] = [FactorModel::Excess, FactorModel::ThreeFactor, FactorModel::FiveFactor];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorModel::Excess => "excess",
            FactorModel::ThreeFactor => "ff3",
            FactorModel::FiveFactor => "five_factor",
        }
    }

    fn loadings(self, f: &FactorRow) -> Vec<f64> {
        match self {
            FactorModel::Excess => vec![],
            FactorModel::ThreeFactor => vec![f.mkt_rf, f.smb, f.hml],
            FactorModel::FiveFactor => vec![f.mkt_rf, f.smb, f.hml, f.mom, f.liq],
        }
    }
}

impl fmt::Display for FactorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown factor model `{s}`"))
    }
}

/// Whether the risk-free rate is subtracted before testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// A long portfolio: tested on `return - rf`.
    LongOnly,
    /// A self-financing spread: tested as is.
    ZeroCost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub model: FactorModel,
    /// Mean excess return for `Excess`, regression intercept otherwise.
    pub alpha: f64,
    pub t_stat: f64,
    pub n_months: usize,
    /// Residual degrees of freedom, for p-values.
    pub dof: usize,
    /// Zero residual variance: `t_stat` reported as 0.
    pub degenerate: bool,
}

/// Mean excess return or factor-model alpha over months covered by both
/// `series` and `factors`.
pub fn factor_alpha(
    series: &MonthlySeries,
    factors: &FactorSeries,
    model: FactorModel,
    kind: SeriesKind,
    options: &BacktestOptions,
) -> Result<AlphaEstimate, BacktestError> {
    let mut y = Vec::new();
    let mut x: Vec<Vec<f64>> = Vec::new();
    for (m, r) in series.iter() {
        let Some(f) = factors.get(m) else { continue };
        y.push(match kind {
            SeriesKind::LongOnly => r - f.rf,
            SeriesKind::ZeroCost => r,
        });
        x.push(model.loadings(f));
    }
    let n = y.len();
    if n < options.min_months {
        return Err(BacktestError::InsufficientOverlap {
            months: n,
            required: options.min_months,
        });
    }
    if model == FactorModel::Excess {
        let m = mean_t_stat(&y, options.newey_west_lags);
        return Ok(AlphaEstimate {
            model,
            alpha: m.mean,
            t_stat: m.t_stat,
            n_months: n,
            dof: n - 1,
            degenerate: m.degenerate,
        });
    }
    let k = x[0].len() + 1;
    let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let covariance = match options.newey_west_lags {
        Some(lags) => Covariance::NeweyWest { lags },
        None => Covariance::Classical,
    };
    let fit = ols_with(&y, &design, covariance)?;
    Ok(AlphaEstimate {
        model,
        alpha: fit.coefficients[0],
        t_stat: fit.t_stats[0],
        n_months: n,
        dof: n - k,
        degenerate: fit.degenerate,
    })
}
