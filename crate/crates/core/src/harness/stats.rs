use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};

/// Sample mean and standard error of the mean, summed in input order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Slope of `log R` against `log T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
    /// Horizons whose regret was not positive and so could not be logged.
    pub dropped: Vec<f64>,
}

/// Least-squares fit on log-log axes. The interval is slope ± 2 standard
/// errors; with exactly collinear points it collapses to the slope.
pub fn fit_growth_exponent(pairs: &[(f64, f64)]) -> Result<GrowthFit> {
    let (kept, dropped): (Vec<(f64, f64)>, Vec<(f64, f64)>) = pairs.iter().copied().partition(|(t, r)| *t > 0.0 && *r > 0.0);
    let dropped: Vec<f64> = dropped.into_iter().map(|(t, _)| t).collect();
    if kept.len() < 3 {
        return Err(MorError::Fit(format!(
            "{} usable points after dropping non-positive regrets at T = {dropped:?}; need 3",
            kept.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, r)| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(MorError::Fit("all horizons are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(GrowthFit {
        exponent: slope,
        stderr,
        ci_low: slope - 2.0 * stderr,
        ci_high: slope + 2.0 * stderr,
        points: kept.len(),
        dropped,
    })
}
