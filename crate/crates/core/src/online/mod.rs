//! Online learning: the game protocol, expert algorithms, the standard
//! optimal algorithm and the subsampled-expert conversions.

mod adversary;
mod conversion;
mod coordinate;
mod experts;
mod majorant;
mod mcsoa;

pub use adversary::{shattered_tree_adversary, tree_paths, TreePath};
pub use conversion::{
    bandit_conversion, extract_coordinate_online_regression, lp_online, lp_online_default_alpha,
    lp_reverse_alpha, realizable_to_agnostic_online, regression_default_alpha, sample_subset,
    threshold_online, Conversion, SubsampleOptions, SubsampledExpert, DEFAULT_EXPERT_CAP,
};
pub use coordinate::{concat_online, ConcatOnline, ExtractClsOnline};
pub use experts::{importance_weighted, Exp4, Expert, Rewa};
pub use majorant::ConcaveMajorant;
pub use mcsoa::{cover_size, mcsoa_expert_cover, CoverExpert, Mcsoa, McsoaTable};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{FunctionClass, InstanceId, LabelVec, Predictor, Stream};
use crate::error::{MorError, Result};
use crate::losses::LossSpec;
use crate::rng::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Full,
    Bandit,
}

/// Predict/update contract of an online learner.
///
/// `predict` is called once per round before the matching update. Predictions
/// may use the learner's own randomness but never its own past predictions.
pub trait OnlineLearner: Send {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec>;

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()>;

    /// Bandit update with only the incurred loss revealed.
    fn update_bandit(&mut self, _x: InstanceId, _loss: f64) -> Result<()> {
        Err(MorError::UnsupportedFeedback("this learner needs full feedback".into()))
    }

    /// Restart from scratch with fresh randomness.
    fn reset(&mut self, seed: &SeedSpec) -> Result<()>;

    /// Exact distribution of the next prediction, when the learner can report it.
    /// Must be followed by an update for the same round, without `predict`.
    fn prediction_distribution(&mut self, _x: InstanceId) -> Result<Option<Vec<(LabelVec, f64)>>> {
        Ok(None)
    }
}

/// Builds a fresh learner from a seed.
pub type LearnerFactory = Arc<dyn Fn(&SeedSpec) -> Result<Box<dyn OnlineLearner>> + Send + Sync>;

/// Always predicts a fixed function. Ignores feedback.
#[derive(Clone, Debug)]
pub struct FixedFunction {
    pred: Predictor,
}

impl FixedFunction {
    pub fn new(pred: Predictor) -> Self {
        FixedFunction { pred }
    }

    pub fn from_class(class: &FunctionClass, f: usize) -> Self {
        FixedFunction { pred: class.predictor(f) }
    }
}

impl OnlineLearner for FixedFunction {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        Ok(self.pred.predict(x)?.clone())
    }

    fn update_full(&mut self, _x: InstanceId, _y: &LabelVec) -> Result<()> {
        Ok(())
    }

    fn update_bandit(&mut self, _x: InstanceId, _loss: f64) -> Result<()> {
        Ok(())
    }

    fn reset(&mut self, _seed: &SeedSpec) -> Result<()> {
        Ok(())
    }
}

impl Expert for FixedFunction {
    fn advise(&mut self, _t: usize, x: InstanceId) -> Result<LabelVec> {
        self.predict(x)
    }

    fn observe(&mut self, _t: usize, _x: InstanceId, _y: Option<&LabelVec>) -> Result<()> {
        Ok(())
    }

    fn reset(&mut self, _seed: &SeedSpec) -> Result<()> {
        Ok(())
    }
}

/// One `FixedFunction` expert per class member.
pub fn class_experts(class: &FunctionClass) -> Vec<Box<dyn Expert>> {
    (0..class.len()).map(|f| Box::new(FixedFunction::from_class(class, f)) as Box<dyn Expert>).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub x: InstanceId,
    pub yhat: LabelVec,
    pub y: LabelVec,
    /// False when the label was withheld from the learner.
    pub revealed: bool,
    pub loss: f64,
    pub cum_loss: f64,
    pub best_in_hindsight: f64,
    pub regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameTrace {
    pub feedback: Feedback,
    pub rows: Vec<TraceRow>,
    pub cum_loss: f64,
    pub best_in_hindsight: f64,
    pub best_function: usize,
    pub regret: f64,
}

impl GameTrace {
    /// Regret after each round, `R(1..=T)`.
    pub fn regret_curve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.regret).collect()
    }

    /// Recompute every loss, running total and comparator value from the rows
    /// and check they match bit for bit.
    pub fn replay(&self, class: &FunctionClass, loss: &LossSpec) -> Result<()> {
        let mut cum = 0.0;
        let mut fcum = vec![0.0; class.len()];
        for r in &self.rows {
            let l = loss.evaluate(&r.yhat, &r.y)?;
            cum += l;
            for (f, c) in fcum.iter_mut().enumerate() {
                *c += loss.evaluate(class.value(f, r.x)?, &r.y)?;
            }
            let best = fcum.iter().copied().fold(f64::INFINITY, f64::min);
            if l != r.loss || cum != r.cum_loss || best != r.best_in_hindsight || cum - best != r.regret {
                return Err(MorError::Protocol(format!("trace row {} does not replay", r.t)));
            }
        }
        Ok(())
    }
}

/// Play `learner` against a fixed stream and score it against `class`.
pub fn run_game(
    learner: &mut dyn OnlineLearner,
    stream: &Stream,
    class: &FunctionClass,
    loss: &LossSpec,
    feedback: Feedback,
) -> Result<GameTrace> {
    stream.check_domain(class.domain())?;
    let mut rows = Vec::with_capacity(stream.horizon());
    let mut cum = 0.0;
    let mut fcum = vec![0.0; class.len()];
    for (t, e) in stream.rounds.iter().enumerate() {
        let yhat = learner.predict(e.x)?;
        if let Err(err) = yhat.check(class.k(), class.kind()) {
            return Err(MorError::Protocol(format!("round {t}: prediction {yhat} is not a valid label ({err})")));
        }
        let l = loss.evaluate(&yhat, &e.y)?;
        match feedback {
            Feedback::Full => learner.update_full(e.x, &e.y)?,
            Feedback::Bandit => learner.update_bandit(e.x, l)?,
        }
        cum += l;
        for (f, c) in fcum.iter_mut().enumerate() {
            *c += loss.evaluate(class.value(f, e.x)?, &e.y)?;
        }
        let best = fcum.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(TraceRow {
            t: t + 1,
            x: e.x,
            yhat,
            y: e.y.clone(),
            revealed: feedback == Feedback::Full,
            loss: l,
            cum_loss: cum,
            best_in_hindsight: best,
            regret: cum - best,
        });
    }
    let (best, best_function) = fcum
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |acc, (f, c)| if *c < acc.0 { (*c, f) } else { acc });
    let best = if rows.is_empty() { 0.0 } else { best };
    Ok(GameTrace { feedback, rows, cum_loss: cum, best_in_hindsight: best, best_function, regret: cum - best })
}

/// Expected cumulative loss under the learner's own randomness, computed from
/// its reported prediction distributions (or its single prediction when it
/// reports none), with full-feedback updates.
pub fn expected_cumulative_loss(learner: &mut dyn OnlineLearner, stream: &Stream, loss: &LossSpec) -> Result<f64> {
    let mut total = 0.0;
    for e in &stream.rounds {
        match learner.prediction_distribution(e.x)? {
            Some(dist) => {
                for (y, p) in dist {
                    total += p * loss.evaluate(&y, &e.y)?;
                }
            }
            None => total += loss.evaluate(&learner.predict(e.x)?, &e.y)?,
        }
        learner.update_full(e.x, &e.y)?;
    }
    Ok(total)
}

/// For each prefix length `t = 1..=T`, the largest mean regret over `streams`,
/// averaging over `seeds` fresh learners per stream.
pub fn measured_regret_curve(
    factory: &LearnerFactory,
    class: &FunctionClass,
    loss: &LossSpec,
    streams: &[Stream],
    seeds: usize,
    seed: &SeedSpec,
) -> Result<Vec<(f64, f64)>> {
    let horizon = streams.iter().map(Stream::horizon).max().unwrap_or(0);
    let mut worst = vec![f64::NEG_INFINITY; horizon];
    for (i, s) in streams.iter().enumerate() {
        let mut sum = vec![0.0; s.horizon()];
        for j in 0..seeds.max(1) {
            let mut learner = factory(&seed.child("curve").child(i).child(j))?;
            let trace = run_game(learner.as_mut(), s, class, loss, Feedback::Full)?;
            for (a, r) in sum.iter_mut().zip(trace.regret_curve()) {
                *a += r;
            }
        }
        for (w, a) in worst.iter_mut().zip(&sum) {
            *w = w.max(a / seeds.max(1) as f64);
        }
    }
    Ok(worst.into_iter().enumerate().map(|(t, r)| ((t + 1) as f64, r.max(0.0))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Example, LabelKind};

    fn class() -> FunctionClass {
        FunctionClass::from_fn("c", vec![0, 1], LabelKind::Binary, 2, |f, x| {
            vec![if (f as u64) == x { 1.0 } else { -1.0 }]
        })
        .unwrap()
    }

    fn stream() -> Stream {
        Stream::new(vec![
            Example::new(0, vec![1.0]),
            Example::new(1, vec![-1.0]),
            Example::new(0, vec![1.0]),
            Example::new(1, vec![1.0]),
        ])
    }

    #[test]
    fn perfect_function_has_zero_regret() {
        let c = class();
        let s = Stream::new(vec![Example::new(0, vec![1.0]), Example::new(1, vec![-1.0])]);
        let mut l = FixedFunction::from_class(&c, 0);
        let tr = run_game(&mut l, &s, &c, &LossSpec::zero_one(), Feedback::Full).unwrap();
        assert_eq!(tr.regret, 0.0);
        tr.replay(&c, &LossSpec::zero_one()).unwrap();
    }

    #[test]
    fn singleton_comparator_regret() {
        let c = class().subclass(&[1]).unwrap();
        let mut l = FixedFunction::from_class(&class(), 0);
        let tr = run_game(&mut l, &stream(), &c, &LossSpec::zero_one(), Feedback::Full).unwrap();
        // f0 errs on round 4; f1 errs on rounds 1, 2, 3
        assert_eq!(tr.cum_loss, 1.0);
        assert_eq!(tr.best_in_hindsight, 3.0);
        assert_eq!(tr.regret, -2.0);
        tr.replay(&c, &LossSpec::zero_one()).unwrap();
    }

    struct Bad;
    impl OnlineLearner for Bad {
        fn predict(&mut self, _x: InstanceId) -> Result<LabelVec> {
            Ok(LabelVec::scalar(0.5))
        }
        fn update_full(&mut self, _x: InstanceId, _y: &LabelVec) -> Result<()> {
            Ok(())
        }
        fn reset(&mut self, _seed: &SeedSpec) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn invalid_prediction_is_protocol_error() {
        let err = run_game(&mut Bad, &stream(), &class(), &LossSpec::zero_one(), Feedback::Full).unwrap_err();
        assert!(matches!(err, MorError::Protocol(_)));
    }

    #[test]
    fn bandit_rows_are_withheld() {
        let c = class();
        let mut l = FixedFunction::from_class(&c, 0);
        let tr = run_game(&mut l, &stream(), &c, &LossSpec::zero_one(), Feedback::Bandit).unwrap();
        assert!(tr.rows.iter().all(|r| !r.revealed));
    }
}
