use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::stats::mean_stderr;
use crate::error::{MorError, Result};

/// Closed-form regret and mistake bounds, evaluated from named parameters.
///
/// Parameter names: `T` horizon, `beta`, `M` loss bound, `N` expert count,
/// `Y` label-set size, `image` image size, `c` subadditivity constant,
/// `Rbar` realizable regret majorant at `T^beta`, `K` output dimension,
/// `L` Lipschitz constant, `d` dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFormula {
    /// `M sqrt(2 T ln N)`
    Rewa,
    /// `K M sqrt(2 T ln N)`, one REWA per coordinate.
    RewaSum,
    /// `e M sqrt(2 T |Y| ln N)`
    Exp4,
    /// `(c T / T^beta) Rbar + M sqrt(2 T^(1+beta) ln |im|)`
    Conversion,
    /// `(c T / T^beta) Rbar + e M sqrt(2 T^(1+beta) |Y| ln |Y|)`
    BanditConversion,
    /// `1 + (T / T^beta) Rbar + sqrt(4 T^(beta+1) K ln(K T L))`
    Regression,
    /// `1 + (T / T^beta) Rbar + K sqrt(2 T^(beta+1) K ln(4 K T))`
    LpOnline,
    /// `d`
    Mistakes,
}

impl BoundFormula {
    pub fn required(self) -> &'static [&'static str] {
        match self {
            BoundFormula::Rewa => &["M", "T", "N"],
            BoundFormula::RewaSum => &["K", "M", "T", "N"],
            BoundFormula::Exp4 => &["M", "T", "Y", "N"],
            BoundFormula::Conversion => &["c", "T", "beta", "Rbar", "M", "image"],
            BoundFormula::BanditConversion => &["c", "T", "beta", "Rbar", "M", "Y"],
            BoundFormula::Regression => &["T", "beta", "Rbar", "K", "L"],
            BoundFormula::LpOnline => &["T", "beta", "Rbar", "K"],
            BoundFormula::Mistakes => &["d"],
        }
    }

    pub fn evaluate(self, params: &BTreeMap<String, f64>) -> Result<f64> {
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| MorError::ReportSchema(format!("bound {self:?} needs parameter `{k}`")))
        };
        let v = match self {
            BoundFormula::Rewa => get("M")? * (2.0 * get("T")? * get("N")?.ln()).sqrt(),
            BoundFormula::RewaSum => get("K")? * get("M")? * (2.0 * get("T")? * get("N")?.ln()).sqrt(),
            BoundFormula::Exp4 => E * get("M")? * (2.0 * get("T")? * get("Y")? * get("N")?.ln()).sqrt(),
            BoundFormula::Conversion => {
                let (t, b) = (get("T")?, get("beta")?);
                get("c")? * t / t.powf(b) * get("Rbar")? + get("M")? * (2.0 * t.powf(1.0 + b) * get("image")?.ln()).sqrt()
            }
            BoundFormula::BanditConversion => {
                let (t, b, y) = (get("T")?, get("beta")?, get("Y")?);
                get("c")? * t / t.powf(b) * get("Rbar")? + E * get("M")? * (2.0 * t.powf(1.0 + b) * y * y.ln()).sqrt()
            }
            BoundFormula::Regression => {
                let (t, b, k) = (get("T")?, get("beta")?, get("K")?);
                1.0 + t / t.powf(b) * get("Rbar")? + (4.0 * t.powf(b + 1.0) * k * (k * t * get("L")?).ln()).sqrt()
            }
            BoundFormula::LpOnline => {
                let (t, b, k) = (get("T")?, get("beta")?, get("K")?);
                1.0 + t / t.powf(b) * get("Rbar")? + k * (2.0 * t.powf(b + 1.0) * k * (4.0 * k * t).ln()).sqrt()
            }
            BoundFormula::Mistakes => get("d")?,
        };
        Ok(v)
    }
}

/// Outcome of comparing `mean + 2 stderr` against a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `mean + 2 stderr <= bound + tolerance` over per-seed values.
pub fn verify_bound(
    name: &str,
    values: &[f64],
    formula: BoundFormula,
    params: &BTreeMap<String, f64>,
    tolerance: f64,
) -> Result<BoundCheck> {
    let bound = formula.evaluate(params)?;
    if values.is_empty() {
        return Err(MorError::ReportSchema(format!("check `{name}` has no values")));
    }
    let (mean, stderr) = mean_stderr(values);
    Ok(BoundCheck {
        name: name.to_string(),
        mean,
        stderr,
        bound,
        tolerance,
        passed: mean + 2.0 * stderr <= bound + tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn hand_evaluations() {
        let rewa = BoundFormula::Rewa.evaluate(&p(&[("M", 1.0), ("T", 64.0), ("N", 2.0)])).unwrap();
        assert!((rewa - 9.41928).abs() < 1e-5);
        let exp4 = BoundFormula::Exp4.evaluate(&p(&[("M", 1.0), ("T", 64.0), ("Y", 2.0), ("N", 2.0)])).unwrap();
        assert!((exp4 - 36.2099).abs() < 1e-4, "{exp4}");
        // T = 16, beta = 0.5: T / T^beta = 4, T^1.5 = 64
        let conv = p(&[("c", 1.0), ("T", 16.0), ("beta", 0.5), ("Rbar", 1.0), ("M", 1.0), ("image", 2.0), ("Y", 2.0)]);
        let v = BoundFormula::Conversion.evaluate(&conv).unwrap();
        assert!((v - (4.0 + (128.0 * 2f64.ln()).sqrt())).abs() < 1e-12);
        let v = BoundFormula::BanditConversion.evaluate(&conv).unwrap();
        assert!((v - (4.0 + E * (256.0 * 2f64.ln()).sqrt())).abs() < 1e-12);
        let reg = p(&[("T", 16.0), ("beta", 0.5), ("Rbar", 2.0), ("K", 2.0), ("L", 1.0)]);
        let v = BoundFormula::Regression.evaluate(&reg).unwrap();
        assert!((v - (9.0 + (512.0 * 32f64.ln()).sqrt())).abs() < 1e-12);
        let v = BoundFormula::LpOnline.evaluate(&reg).unwrap();
        assert!((v - (9.0 + 2.0 * (256.0 * 128f64.ln()).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn missing_parameter() {
        let err = BoundFormula::Rewa.evaluate(&p(&[("M", 1.0), ("T", 64.0)])).unwrap_err();
        assert!(matches!(err, MorError::ReportSchema(m) if m.contains('N')));
    }

    #[test]
    fn pass_and_fail() {
        let params = p(&[("d", 9.42)]);
        assert!(verify_bound("a", &[5.0; 4], BoundFormula::Mistakes, &params, 0.0).unwrap().passed);
        let s = (4.0f64 / 3.0 / 4.0).sqrt();
        let m = 9.42 + 3.0 * s;
        let c = verify_bound("b", &[m - 1.0, m + 1.0, m - 1.0, m + 1.0], BoundFormula::Mistakes, &params, 0.0).unwrap();
        assert!((c.stderr - s).abs() < 1e-12);
        assert!(!c.passed);
    }
}
