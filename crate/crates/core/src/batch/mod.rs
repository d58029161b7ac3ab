//! Batch learners and reductions between them.

mod reductions;

pub use reductions::*;

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::{Domain, Example, FunctionClass, Predictor};
use crate::error::{MorError, Result};
use crate::losses::LossSpec;

/// A batch learning rule: labeled sample in, total predictor out.
pub trait BatchLearner: Send + Sync {
    fn fit(&self, sample: &[Example]) -> Result<Predictor>;

    fn domain(&self) -> &Arc<Domain>;

    fn output_dim(&self) -> usize;

    /// Declared `m(eps, delta)`, or `None` for empirical mode.
    fn sample_complexity(&self, _eps: f64, _delta: f64) -> Option<usize> {
        None
    }

    fn is_proper(&self) -> bool {
        false
    }
}

/// Collapse repeated examples into counts, keeping first-occurrence order.
pub fn aggregate(sample: &[Example]) -> Vec<(&Example, usize)> {
    let mut pos: HashMap<&Example, usize> = HashMap::new();
    let mut out: Vec<(&Example, usize)> = Vec::new();
    for e in sample {
        match pos.get(e) {
            Some(i) => out[*i].1 += 1,
            None => {
                pos.insert(e, out.len());
                out.push((e, 1));
            }
        }
    }
    out
}

/// Index of the predictor with the smallest summed loss on `sample`;
/// ties go to the lowest index.
pub fn select_erm(preds: &[Predictor], sample: &[Example], loss: &LossSpec) -> Result<usize> {
    if preds.is_empty() {
        return Err(MorError::Parameter("no candidates to select from".into()));
    }
    let agg = aggregate(sample);
    let mut best = (f64::INFINITY, 0);
    for (i, p) in preds.iter().enumerate() {
        let mut s = 0.0;
        for (e, c) in &agg {
            s += *c as f64 * loss.evaluate(p.predict(e.x)?, &e.y)?;
        }
        if s < best.0 {
            best = (s, i);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErmMode {
    /// Sample complexity `ceil(M/eps * ln(|F|/delta))`, valid on realizable data
    /// for losses with identity of indiscernibles.
    Realizable,
    /// Hoeffding plus union bound, `ceil(2 M^2/eps^2 * ln(2|F|/delta))`.
    Agnostic,
}

/// Empirical risk minimization over a finite class.
#[derive(Clone, Debug)]
pub struct Erm {
    class: Arc<FunctionClass>,
    loss: LossSpec,
    mode: ErmMode,
}

impl Erm {
    pub fn new(class: Arc<FunctionClass>, loss: LossSpec) -> Self {
        Erm { class, loss, mode: ErmMode::Realizable }
    }

    pub fn agnostic(class: Arc<FunctionClass>, loss: LossSpec) -> Self {
        Erm { class, loss, mode: ErmMode::Agnostic }
    }

    pub fn class(&self) -> &Arc<FunctionClass> {
        &self.class
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn mode(&self) -> ErmMode {
        self.mode
    }

    /// Index of the empirical minimizer; the lowest index on an empty sample.
    pub fn fit_index(&self, sample: &[Example]) -> Result<usize> {
        let agg = aggregate(sample);
        let idx: Vec<usize> =
            agg.iter().map(|(e, _)| self.class.domain().index_of(e.x)).collect::<Result<_>>()?;
        let mut best = (f64::INFINITY, 0);
        for f in 0..self.class.len() {
            let mut s = 0.0;
            for ((e, c), i) in agg.iter().zip(&idx) {
                s += *c as f64 * self.loss.evaluate(self.class.at(f, *i), &e.y)?;
            }
            if s < best.0 {
                best = (s, f);
            }
        }
        Ok(best.1)
    }
}

impl BatchLearner for Erm {
    fn fit(&self, sample: &[Example]) -> Result<Predictor> {
        Ok(self.class.predictor(self.fit_index(sample)?))
    }

    fn domain(&self) -> &Arc<Domain> {
        self.class.domain()
    }

    fn output_dim(&self) -> usize {
        self.class.k()
    }

    fn sample_complexity(&self, eps: f64, delta: f64) -> Option<usize> {
        let m = self.loss.bound(self.class.k(), self.class.kind());
        let n = self.class.behavior_count() as f64;
        Some(match self.mode {
            ErmMode::Realizable => (m / eps * (n / delta).ln()).ceil().max(1.0) as usize,
            ErmMode::Agnostic => (2.0 * m * m / (eps * eps) * (2.0 * n / delta).ln()).ceil() as usize,
        })
    }

    fn is_proper(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LabelKind;

    fn class() -> Arc<FunctionClass> {
        let rows = [[1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [-1.0, -1.0, -1.0]];
        Arc::new(FunctionClass::from_fn("c", vec![0, 1, 2], LabelKind::Binary, 3, |f, x| vec![rows[f][x as usize]]).unwrap())
    }

    #[test]
    fn realizable_sample_gets_zero_loss() {
        let c = class();
        let erm = Erm::new(c.clone(), LossSpec::zero_one());
        let sample: Vec<Example> = [0u64, 1, 2].iter().map(|x| Example { x: *x, y: c.value(1, *x).unwrap().clone() }).collect();
        assert_eq!(erm.fit_index(&sample).unwrap(), 1);
    }

    #[test]
    fn strict_margin_and_ties() {
        let c = class();
        let erm = Erm::new(c, LossSpec::zero_one());
        assert_eq!(erm.fit_index(&[]).unwrap(), 0);
        // f1 and f2 agree on x=1,2; x=0 labeled -1 twice favors f2
        let s = vec![Example::new(0, vec![-1.0]), Example::new(0, vec![-1.0]), Example::new(1, vec![-1.0])];
        assert_eq!(erm.fit_index(&s).unwrap(), 2);
        // tie between f0 and f1 on x=0 goes to f0
        assert_eq!(erm.fit_index(&[Example::new(0, vec![1.0])]).unwrap(), 0);
    }

    #[test]
    fn sample_complexities() {
        let erm = Erm::new(class(), LossSpec::zero_one());
        assert_eq!(erm.sample_complexity(0.1, 0.1), Some((10.0 * 30f64.ln()).ceil() as usize));
        let agn = Erm::agnostic(class(), LossSpec::zero_one());
        assert_eq!(agn.sample_complexity(0.1, 0.1), Some((200.0 * 60f64.ln()).ceil() as usize));
    }
}
