use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;

use super::OnlineLearner;
use crate::domain::{InstanceId, LabelVec};
use crate::error::{MorError, Result};
use crate::losses::LossSpec;
use crate::rng::{Rng, SeedSpec};

/// Above this many experts, advice and observation run on the thread pool.
const PARALLEL_EXPERTS: usize = 64;

/// An expert: gives advice at round `t` and sees the round's outcome. `y` is
/// `None` under bandit feedback. Repeated `advise` calls with the same
/// `(t, x)` return the same label.
pub trait Expert: Send {
    fn advise(&mut self, t: usize, x: InstanceId) -> Result<LabelVec>;

    fn observe(&mut self, t: usize, x: InstanceId, y: Option<&LabelVec>) -> Result<()>;

    fn reset(&mut self, seed: &SeedSpec) -> Result<()>;
}

fn collect_advice(experts: &mut [Box<dyn Expert>], t: usize, x: InstanceId) -> Result<Vec<LabelVec>> {
    if experts.len() > PARALLEL_EXPERTS {
        experts.par_iter_mut().map(|e| e.advise(t, x)).collect()
    } else {
        experts.iter_mut().map(|e| e.advise(t, x)).collect()
    }
}

fn observe_all(experts: &mut [Box<dyn Expert>], t: usize, x: InstanceId, y: Option<&LabelVec>) -> Result<()> {
    if experts.len() > PARALLEL_EXPERTS {
        experts.par_iter_mut().try_for_each(|e| e.observe(t, x, y))
    } else {
        experts.iter_mut().try_for_each(|e| e.observe(t, x, y))
    }
}

fn reset_all(experts: &mut [Box<dyn Expert>], seed: &SeedSpec) -> Result<()> {
    experts.iter_mut().enumerate().try_for_each(|(i, e)| e.reset(&seed.child("expert").child(i)))
}

/// `w_i ∝ exp(-eta * cum_i)`, normalized.
fn exp_weights(cum: &[f64], eta: f64) -> Vec<f64> {
    let lo = cum.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = cum.iter().map(|c| (-eta * (c - lo)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn check_experts(n: usize, scale: f64, horizon: usize) -> Result<()> {
    if n == 0 {
        return Err(MorError::Parameter("expert set is empty".into()));
    }
    if !(scale > 0.0) {
        return Err(MorError::Parameter(format!("loss scale must be positive, got {scale}")));
    }
    if horizon == 0 {
        return Err(MorError::Parameter("horizon must be positive".into()));
    }
    Ok(())
}

struct Round {
    t: usize,
    x: InstanceId,
    advice: Vec<LabelVec>,
}

/// Randomized exponential weights over a finite expert set, losses scaled by
/// `1/M`, learning rate `sqrt(8 ln N / T)`.
pub struct Rewa {
    experts: Vec<Box<dyn Expert>>,
    loss: LossSpec,
    scale: f64,
    eta: f64,
    cum: Vec<f64>,
    t: usize,
    round: Option<Round>,
    seed: SeedSpec,
    rng: Rng,
}

impl Rewa {
    pub fn new(experts: Vec<Box<dyn Expert>>, loss: LossSpec, scale: f64, horizon: usize, seed: &SeedSpec) -> Result<Self> {
        check_experts(experts.len(), scale, horizon)?;
        let n = experts.len();
        let eta = (8.0 * (n as f64).ln() / horizon as f64).sqrt();
        Ok(Rewa {
            experts,
            loss,
            scale,
            eta,
            cum: vec![0.0; n],
            t: 0,
            round: None,
            seed: seed.clone(),
            rng: seed.child("rewa").rng(),
        })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Scaled cumulative loss of each expert.
    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cum
    }

    pub fn weights(&self) -> Vec<f64> {
        exp_weights(&self.cum, self.eta)
    }

    fn advice(&mut self, x: InstanceId) -> Result<&[LabelVec]> {
        match &self.round {
            Some(r) if r.t == self.t && r.x == x => {}
            _ => {
                let advice = collect_advice(&mut self.experts, self.t, x)?;
                self.round = Some(Round { t: self.t, x, advice });
            }
        }
        Ok(&self.round.as_ref().expect("round just set").advice)
    }
}

impl OnlineLearner for Rewa {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        let w = self.weights();
        self.advice(x)?;
        let i = WeightedIndex::new(&w).map_err(|e| MorError::Parameter(e.to_string()))?.sample(&mut self.rng);
        Ok(self.round.as_ref().expect("advice collected").advice[i].clone())
    }

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()> {
        self.advice(x)?;
        let advice = &self.round.as_ref().expect("advice collected").advice;
        for (c, a) in self.cum.iter_mut().zip(advice) {
            *c += self.loss.evaluate(a, y)? / self.scale;
        }
        observe_all(&mut self.experts, self.t, x, Some(y))?;
        self.t += 1;
        self.round = None;
        Ok(())
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        reset_all(&mut self.experts, seed)?;
        self.cum.iter_mut().for_each(|c| *c = 0.0);
        self.t = 0;
        self.round = None;
        self.seed = seed.clone();
        self.rng = seed.child("rewa").rng();
        Ok(())
    }

    fn prediction_distribution(&mut self, x: InstanceId) -> Result<Option<Vec<(LabelVec, f64)>>> {
        let w = self.weights();
        let advice = self.advice(x)?;
        let mut out: Vec<(LabelVec, f64)> = Vec::new();
        for (a, p) in advice.iter().zip(w) {
            match out.iter_mut().find(|(y, _)| y == a) {
                Some(slot) => slot.1 += p,
                None => out.push((a.clone(), p)),
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Some(out))
    }
}

/// Importance-weighted loss estimates for every action when action `played`
/// was drawn with probabilities `p` and incurred `loss`.
pub fn importance_weighted(p: &[f64], played: usize, loss: f64) -> Vec<f64> {
    (0..p.len()).map(|a| if a == played { loss / p[a] } else { 0.0 }).collect()
}

struct Played {
    t: usize,
    action: usize,
    probs: Vec<f64>,
}

/// EXP4 over expert advice on a finite label set, with optional uniform
/// exploration `gamma` (0 by default).
pub struct Exp4 {
    experts: Vec<Box<dyn Expert>>,
    labels: Vec<LabelVec>,
    loss: LossSpec,
    scale: f64,
    eta: f64,
    gamma: f64,
    cum: Vec<f64>,
    t: usize,
    advice: Vec<usize>,
    played: Option<Played>,
    rng: Rng,
}

impl Exp4 {
    pub fn new(
        experts: Vec<Box<dyn Expert>>,
        labels: Vec<LabelVec>,
        loss: LossSpec,
        scale: f64,
        horizon: usize,
        seed: &SeedSpec,
    ) -> Result<Self> {
        check_experts(experts.len(), scale, horizon)?;
        if labels.is_empty() {
            return Err(MorError::Parameter("label set is empty".into()));
        }
        let mut labels = labels;
        labels.sort();
        labels.dedup();
        let n = experts.len();
        let eta = (2.0 * (n as f64).ln() / (horizon as f64 * labels.len() as f64)).sqrt();
        Ok(Exp4 {
            experts,
            labels,
            loss,
            scale,
            eta,
            gamma: 0.0,
            cum: vec![0.0; n],
            t: 0,
            advice: Vec::new(),
            played: None,
            rng: seed.child("exp4").rng(),
        })
    }

    pub fn with_exploration(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(MorError::Parameter(format!("exploration {gamma} is outside [0,1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn labels(&self) -> &[LabelVec] {
        &self.labels
    }

    pub fn weights(&self) -> Vec<f64> {
        exp_weights(&self.cum, self.eta)
    }

    /// Action probabilities given the current advice (label indices).
    pub fn action_probabilities(&self, advice: &[usize]) -> Vec<f64> {
        let q = self.weights();
        let mut p = vec![0.0; self.labels.len()];
        for (a, w) in advice.iter().zip(q) {
            p[*a] += w;
        }
        let u = self.gamma / self.labels.len() as f64;
        p.iter().map(|v| (1.0 - self.gamma) * v + u).collect()
    }

    fn label_index(&self, y: &LabelVec) -> Result<usize> {
        self.labels
            .binary_search(y)
            .map_err(|_| MorError::Protocol(format!("label {y} is not in the declared label set")))
    }
}

impl OnlineLearner for Exp4 {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        let raw = collect_advice(&mut self.experts, self.t, x)?;
        self.advice = raw.iter().map(|y| self.label_index(y)).collect::<Result<_>>()?;
        let probs = self.action_probabilities(&self.advice);
        let action =
            WeightedIndex::new(&probs).map_err(|e| MorError::Parameter(e.to_string()))?.sample(&mut self.rng);
        self.played = Some(Played { t: self.t, action, probs });
        Ok(self.labels[action].clone())
    }

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()> {
        let a = match &self.played {
            Some(p) if p.t == self.t => p.action,
            _ => return Err(MorError::Protocol("update before predict".into())),
        };
        let l = self.loss.evaluate(&self.labels[a], y)?;
        self.update_bandit(x, l)
    }

    fn update_bandit(&mut self, x: InstanceId, loss: f64) -> Result<()> {
        let played = match self.played.take() {
            Some(p) if p.t == self.t => p,
            _ => return Err(MorError::Protocol("update before predict".into())),
        };
        let est = importance_weighted(&played.probs, played.action, loss / self.scale);
        for (c, a) in self.cum.iter_mut().zip(&self.advice) {
            *c += est[*a];
        }
        observe_all(&mut self.experts, self.t, x, None)?;
        self.t += 1;
        Ok(())
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        reset_all(&mut self.experts, seed)?;
        self.cum.iter_mut().for_each(|c| *c = 0.0);
        self.t = 0;
        self.played = None;
        self.rng = seed.child("exp4").rng();
        Ok(())
    }
}
