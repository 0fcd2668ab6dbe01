//! Least squares via Householder QR with classical or Newey-West standard
//! errors.

use nalgebra::{DMatrix, DVector};

use super::BacktestError;

/// Pivots below this fraction of the largest `|R_kk|` count as rank loss.
const RANK_TOLERANCE: f64 = 1e-10;

/// Residual RMS below this fraction of the response RMS is treated as an
/// exact fit; t-statistics are then reported as 0 and flagged.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Covariance {
    #[default]
    Classical,
    /// Bartlett-kernel HAC with the given number of lags.
    NeweyWest { lags: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    /// Exact fit: standard errors vanish and t-statistics are set to 0.
    pub degenerate: bool,
}

/// Prepends a column of ones to `columns` (each a regressor series).
pub fn design_with_intercept(columns: &[&[f64]]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}

/// Regresses `y` on the columns of `x`. `x` must already contain the
/// intercept column if one is wanted; R-squared is centered.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit, BacktestError> {
    ols_with(y, x, Covariance::Classical)
}

pub fn ols_with(y: &[f64], x: &DMatrix<f64>, covariance: Covariance) -> Result<OlsFit, BacktestError> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(BacktestError::ShapeMismatch { rows: n, len: y.len() });
    }
    if n <= k {
        return Err(BacktestError::InsufficientObservations { n, k });
    }
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let max_pivot = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * max_pivot) || max_pivot == 0.0 {
        return Err(BacktestError::RankDeficient);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(BacktestError::RankDeficient)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(BacktestError::RankDeficient)?;
    // (X'X)^-1 = R^-1 R^-T
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &yv - x * &beta;
    let ssr = resid.norm_squared();
    let mean = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };

    let cov = match covariance {
        Covariance::Classical => &xtx_inv * (ssr / (n - k) as f64),
        Covariance::NeweyWest { lags } => {
            let mut meat = DMatrix::zeros(k, k);
            for t in 0..n {
                let xt = x.row(t).transpose();
                meat += &xt * xt.transpose() * resid[t].powi(2);
            }
            for l in 1..=lags.min(n - 1) {
                let w = 1.0 - l as f64 / (lags + 1) as f64;
                for t in l..n {
                    let xt = x.row(t).transpose();
                    let xl = x.row(t - l).transpose();
                    let cross = &xt * xl.transpose() * (resid[t] * resid[t - l]);
                    meat += (&cross + cross.transpose()) * w;
                }
            }
            // Small-sample scaling n / (n - k).
            &xtx_inv * meat * &xtx_inv * (n as f64 / (n - k) as f64)
        }
    };

    let y_rms = (yv.norm_squared() / n as f64).sqrt();
    let resid_rms = (ssr / n as f64).sqrt();
    let degenerate = resid_rms <= DEGENERATE_TOLERANCE * y_rms;
    let std_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let t_stats = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if degenerate || *se <= 0.0 { 0.0 } else { b / se })
        .collect();
    Ok(OlsFit {
        coefficients,
        std_errors,
        t_stats,
        r_squared,
        n_obs: n,
        degenerate,
    })
}

/// Mean and its t-statistic. Zero variance gives `t = 0` with the
/// degenerate flag set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub t_stat: f64,
    pub n: usize,
    pub degenerate: bool,
}

/// `t = mean / (sd / sqrt(T))`, with an optional Newey-West long-run
/// variance in place of the sample variance.
pub fn mean_t_stat(values: &[f64], newey_west_lags: Option<usize>) -> MeanEstimate {
    let n = values.len();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    if n < 2 {
        return MeanEstimate {
            mean,
            t_stat: 0.0,
            n,
            degenerate: true,
        };
    }
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = match newey_west_lags {
        None => dev.iter().map(|d| d * d).sum::<f64>() / (nf - 1.0),
        Some(lags) => {
            let gamma = |l: usize| dev[l..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / nf;
            let mut lrv = gamma(0);
            for l in 1..=lags.min(n - 1) {
                lrv += 2.0 * (1.0 - l as f64 / (lags + 1) as f64) * gamma(l);
            }
            lrv * nf / (nf - 1.0)
        }
    };
    let sd = var.max(0.0).sqrt();
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    let degenerate = sd <= DEGENERATE_TOLERANCE * rms;
    MeanEstimate {
        mean,
        t_stat: if degenerate { 0.0 } else { mean / (sd / nf.sqrt()) },
        n,
        degenerate,
    }
}
