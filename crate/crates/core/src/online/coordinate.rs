use rand::Rng as _;

use super::OnlineLearner;
use crate::domain::{InstanceId, LabelVec};
use crate::error::{MorError, Result};
use crate::rng::SeedSpec;

/// Coordinate-wise concatenation of scalar learners.
pub struct ConcatOnline {
    parts: Vec<Box<dyn OnlineLearner>>,
}

pub fn concat_online(parts: Vec<Box<dyn OnlineLearner>>) -> Result<ConcatOnline> {
    if parts.is_empty() {
        return Err(MorError::Parameter("concatenation of no learners".into()));
    }
    Ok(ConcatOnline { parts })
}

impl OnlineLearner for ConcatOnline {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        let mut out = Vec::with_capacity(self.parts.len());
        for p in &mut self.parts {
            let y = p.predict(x)?;
            if y.len() != 1 {
                return Err(MorError::Arity { expected: 1, found: y.len() });
            }
            out.push(y.get(0));
        }
        Ok(LabelVec::new(out))
    }

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()> {
        if y.len() != self.parts.len() {
            return Err(MorError::Arity { expected: self.parts.len(), found: y.len() });
        }
        for (k, p) in self.parts.iter_mut().enumerate() {
            p.update_full(x, &LabelVec::scalar(y.get(k)))?;
        }
        Ok(())
    }

    fn update_bandit(&mut self, _x: InstanceId, _loss: f64) -> Result<()> {
        Err(MorError::UnsupportedFeedback("concatenation needs per-coordinate labels".into()))
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        for (k, p) in self.parts.iter_mut().enumerate() {
            p.reset(&seed.child("coordinate").child(k))?;
        }
        Ok(())
    }
}

/// Scalar binary learner for coordinate `k` of a multilabel learner. The other
/// coordinates of each update are fresh uniform signs.
pub struct ExtractClsOnline {
    multi: Box<dyn OnlineLearner>,
    k: usize,
    dim: usize,
    seed: SeedSpec,
    t: usize,
}

impl ExtractClsOnline {
    pub fn new(multi: Box<dyn OnlineLearner>, k: usize, dim: usize, seed: SeedSpec) -> Result<Self> {
        if k >= dim {
            return Err(MorError::CoordinateRange { k, dim });
        }
        Ok(ExtractClsOnline { multi, k, dim, seed, t: 0 })
    }

    /// Signs used for the other coordinates at round `t` (`dim - 1` values).
    pub fn fill(&self, t: usize) -> Vec<f64> {
        (0..self.dim)
            .filter(|j| *j != self.k)
            .map(|j| {
                let mut rng = self.seed.child("fill").child(t).child(j).rng();
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    fn augmented(&self, y: f64) -> LabelVec {
        LabelVec::new(self.fill(self.t)).with_inserted(self.k, y)
    }
}

impl OnlineLearner for ExtractClsOnline {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        Ok(LabelVec::scalar(self.multi.predict(x)?.get(self.k)))
    }

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()> {
        let full = self.augmented(y.get(0));
        self.multi.update_full(x, &full)?;
        self.t += 1;
        Ok(())
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        self.seed = seed.clone();
        self.t = 0;
        self.multi.reset(&seed.child("multi"))
    }

    fn prediction_distribution(&mut self, x: InstanceId) -> Result<Option<Vec<(LabelVec, f64)>>> {
        let Some(dist) = self.multi.prediction_distribution(x)? else {
            return Ok(None);
        };
        let mut out: Vec<(LabelVec, f64)> = Vec::new();
        for (y, p) in dist {
            let s = LabelVec::scalar(y.get(self.k));
            match out.iter_mut().find(|(z, _)| *z == s) {
                Some(slot) => slot.1 += p,
                None => out.push((s, p)),
            }
        }
        Ok(Some(out))
    }
}
