use rand::Rng;
use serde::Serialize;

use crate::domain::{Example, FiniteDistribution, FunctionClass};
use crate::error::{MorError, Result};
use crate::losses::LossSpec;
use crate::rng::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    pub stderr: f64,
}

fn loss_matrix(class: &FunctionClass, sample: &[Example], loss: &LossSpec) -> Result<Vec<Vec<f64>>> {
    (0..class.len())
        .map(|f| sample.iter().map(|e| loss.evaluate(class.value(f, e.x)?, &e.y)).collect())
        .collect()
}

fn sup_correlation(losses: &[Vec<f64>], sigma: &[f64]) -> f64 {
    let n = sigma.len() as f64;
    losses
        .iter()
        .map(|row| row.iter().zip(sigma).map(|(l, s)| l * s).sum::<f64>() / n)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Monte-Carlo mean of `sup_f (1/n) sum sigma_i loss(f(x_i), y_i)` over fresh
/// samples and sign vectors.
pub fn rademacher_estimate(
    class: &FunctionClass,
    dist: &FiniteDistribution,
    loss: &LossSpec,
    n: usize,
    trials: usize,
    seed: &SeedSpec,
) -> Result<RademacherEstimate> {
    if trials == 0 || n == 0 {
        return Err(MorError::Parameter("rademacher estimate needs n >= 1 and trials >= 1".into()));
    }
    let mut vals = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = seed.child("rademacher").child(t).rng();
        let sample = dist.sample(n, &mut rng);
        let sigma: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        vals.push(sup_correlation(&loss_matrix(class, &sample, loss)?, &sigma));
    }
    let mean = vals.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(RademacherEstimate { mean, stderr: (var / trials as f64).sqrt() })
}

/// Empirical Rademacher complexity of the loss class on a fixed sample by
/// enumerating every sign vector. Limited to `n <= 20`.
pub fn empirical_rademacher_exact(class: &FunctionClass, sample: &[Example], loss: &LossSpec) -> Result<f64> {
    let n = sample.len();
    if n == 0 || n > 20 {
        return Err(MorError::Parameter(format!("exact enumeration needs 1 <= n <= 20, got {n}")));
    }
    let m = loss_matrix(class, sample, loss)?;
    let mut total = 0.0;
    let mut sigma = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (i, s) in sigma.iter_mut().enumerate() {
            *s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        total += sup_correlation(&m, &sigma);
    }
    Ok(total / (1u64 << n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LabelKind;

    #[test]
    fn singleton_class_near_zero() {
        let c = FunctionClass::from_fn("one", vec![0, 1], LabelKind::Binary, 1, |_, x| vec![if x == 0 { 1. } else { -1. }]).unwrap();
        let d = FiniteDistribution::uniform(vec![Example::new(0, vec![-1.]), Example::new(1, vec![-1.])]).unwrap();
        let e = rademacher_estimate(&c, &d, &LossSpec::zero_one(), 10, 4000, &SeedSpec::new(3)).unwrap();
        assert!(e.mean.abs() < 4.0 * e.stderr + 1e-3, "{e:?}");
        assert!(e.mean >= -1.0 && e.mean <= 1.0);
    }

    #[test]
    fn two_functions_one_point_closed_form() {
        let c = FunctionClass::from_fn("two", vec![0], LabelKind::Real, 2, |f, _| vec![[0.2, 0.9][f]]).unwrap();
        let loss = LossSpec::d1();
        for n in 1..=10usize {
            let sample = vec![Example::new(0, vec![0.0]); n];
            let exact = empirical_rademacher_exact(&c, &sample, &loss).unwrap();
            // E|mean of n signs| by binomial counting
            let mut e_abs = 0.0;
            let mut binom = 1.0f64;
            for k in 0..=n {
                if k > 0 {
                    binom = binom * (n - k + 1) as f64 / k as f64;
                }
                e_abs += binom * ((2 * k) as f64 - n as f64).abs() / n as f64;
            }
            e_abs /= 2f64.powi(n as i32);
            let closed = e_abs * 0.7 / 2.0;
            assert!((exact - closed).abs() < 1e-12, "n={n} {exact} {closed}");
        }
    }
}
