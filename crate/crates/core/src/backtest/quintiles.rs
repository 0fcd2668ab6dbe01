use super::BacktestError;

pub const MIN_BREAKPOINT_OBS: usize = 5;

/// Percentile `p` in `[0, 100]` of ascending `sorted`, interpolating linearly
/// between order statistics at rank `p/100 * (n - 1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "percentile of empty sample");
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// 20th/40th/60th/80th percentiles of the pooled prior-year scores.
pub fn quintile_breakpoints(prior_scores: &[f64]) -> Result<[f64; 4], BacktestError> {
    if prior_scores.len() < MIN_BREAKPOINT_OBS {
        return Err(BacktestError::InsufficientHistory { n: prior_scores.len() });
    }
    let mut sorted = prior_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok([20.0, 40.0, 60.0, 80.0].map(|p| percentile(&sorted, p)))
}

/// Smallest quintile `q` with `score <= cutoffs[q-1]`, else 5.
pub fn assign_quintile(score: f64, cutoffs: &[f64; 4]) -> u8 {
    cutoffs
        .iter()
        .position(|c| score <= *c)
        .map_or(5, |i| i as u8 + 1)
}
