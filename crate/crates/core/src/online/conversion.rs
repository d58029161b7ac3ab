//! Subsampled-expert conversions: a realizable (or coordinate-wise) online
//! learner is copied into experts that are updated only on a random subset of
//! rounds with hypothesized labels, and exponential weights runs over them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Exp4, Expert, LearnerFactory, OnlineLearner, Rewa};
use crate::domain::{Example, FunctionClass, InstanceId, LabelKind, LabelVec};
use crate::error::{MorError, Result};
use crate::losses::{subadditivity_constant, LossKind, LossSpec, PNorm, Psi};
use crate::rng::SeedSpec;

pub const DEFAULT_EXPERT_CAP: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleOptions {
    pub horizon: usize,
    pub beta: f64,
    #[serde(default = "default_cap")]
    pub expert_cap: usize,
    /// Uniform exploration mixed into EXP4 (bandit conversion only).
    #[serde(default)]
    pub exploration: f64,
}

fn default_cap() -> usize {
    DEFAULT_EXPERT_CAP
}

impl SubsampleOptions {
    pub fn new(horizon: usize, beta: f64) -> Self {
        SubsampleOptions { horizon, beta, expert_cap: DEFAULT_EXPERT_CAP, exploration: 0.0 }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.expert_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(MorError::Parameter("horizon must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(MorError::Parameter(format!("beta = {} is outside (0,1)", self.beta)));
        }
        Ok(())
    }
}

/// `B_t ~ Bernoulli(T^beta / T)` independently for `t < T`.
pub fn sample_subset<R: rand::Rng + ?Sized>(horizon: usize, beta: f64, rng: &mut R) -> Vec<bool> {
    let p = (horizon as f64).powf(beta) / horizon as f64;
    (0..horizon).map(|_| rng.gen_bool(p.min(1.0))).collect()
}

#[derive(Clone, Debug)]
enum Rule {
    /// Update with `phi(t)`, predict the learner's output.
    Label,
    /// Update with `phi(t)` with `y_t` inserted at `k`, predict coordinate `k`.
    Regression { k: usize },
    /// Update with `phi(t)`, predict `2 * 1{A(x) >= r_t} - 1`.
    Threshold { r: Arc<Vec<f64>> },
}

/// Expert `E_{b, phi}`: a private copy of the wrapped learner, updated only at
/// rounds with `b_t = 1`.
pub struct SubsampledExpert {
    learner: Box<dyn OnlineLearner>,
    subset: Arc<Vec<bool>>,
    phi: Vec<LabelVec>,
    rule: Rule,
    used: usize,
    log: Vec<Example>,
    current: Option<(usize, InstanceId, LabelVec)>,
}

impl SubsampledExpert {
    pub fn plain(learner: Box<dyn OnlineLearner>, subset: Arc<Vec<bool>>, phi: Vec<LabelVec>) -> Self {
        Self::with_rule(learner, subset, phi, Rule::Label)
    }

    pub fn regression(learner: Box<dyn OnlineLearner>, subset: Arc<Vec<bool>>, phi: Vec<LabelVec>, k: usize) -> Self {
        Self::with_rule(learner, subset, phi, Rule::Regression { k })
    }

    pub fn threshold(
        learner: Box<dyn OnlineLearner>,
        subset: Arc<Vec<bool>>,
        phi: Vec<LabelVec>,
        r: Arc<Vec<f64>>,
    ) -> Self {
        Self::with_rule(learner, subset, phi, Rule::Threshold { r })
    }

    fn with_rule(learner: Box<dyn OnlineLearner>, subset: Arc<Vec<bool>>, phi: Vec<LabelVec>, rule: Rule) -> Self {
        SubsampledExpert { learner, subset, phi, rule, used: 0, log: Vec::new(), current: None }
    }

    /// Updates passed to the wrapped learner so far, in order.
    pub fn update_log(&self) -> &[Example] {
        &self.log
    }
}

impl Expert for SubsampledExpert {
    fn advise(&mut self, t: usize, x: InstanceId) -> Result<LabelVec> {
        if let Some((s, z, y)) = &self.current {
            if *s == t && *z == x {
                return Ok(y.clone());
            }
        }
        let p = self.learner.predict(x)?;
        let y = match &self.rule {
            Rule::Label => p,
            Rule::Regression { k } => LabelVec::scalar(p.get(*k)),
            Rule::Threshold { r } => {
                let rt = *r.get(t).ok_or_else(|| MorError::Parameter(format!("no threshold for round {t}")))?;
                LabelVec::scalar(if p.get(0) >= rt { 1.0 } else { -1.0 })
            }
        };
        self.current = Some((t, x, y.clone()));
        Ok(y)
    }

    fn observe(&mut self, t: usize, x: InstanceId, y: Option<&LabelVec>) -> Result<()> {
        self.advise(t, x)?;
        self.current = None;
        if !self.subset.get(t).copied().unwrap_or(false) {
            return Ok(());
        }
        let phi = self
            .phi
            .get(self.used)
            .ok_or_else(|| MorError::Parameter("augmentation map is shorter than the subset".into()))?;
        let label = match &self.rule {
            Rule::Regression { k } => {
                let y = y.ok_or_else(|| {
                    MorError::UnsupportedFeedback("regression experts need the revealed label".into())
                })?;
                phi.with_inserted(*k, y.get(0))
            }
            _ => phi.clone(),
        };
        self.learner.update_full(x, &label)?;
        self.log.push(Example { x, y: label });
        self.used += 1;
        Ok(())
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        self.learner.reset(seed)?;
        self.used = 0;
        self.log.clear();
        self.current = None;
        Ok(())
    }
}

#[derive(Clone)]
enum Aggregator {
    Rewa,
    Exp4 { labels: Vec<LabelVec> },
}

#[derive(Clone)]
struct Spec {
    factory: LearnerFactory,
    /// Augmentation labels `phi(t)` range over.
    labels: Vec<LabelVec>,
    rule: Rule,
    loss: LossSpec,
    scale: f64,
    opts: SubsampleOptions,
    aggregator: Aggregator,
    c: f64,
}

/// A converted learner: the sampled subset, the expert set `E_B` and the
/// aggregating algorithm running over it.
pub struct Conversion {
    spec: Arc<Spec>,
    subset: Arc<Vec<bool>>,
    experts: usize,
    inner: Box<dyn OnlineLearner>,
}

impl Conversion {
    fn build(spec: Arc<Spec>, seed: &SeedSpec) -> Result<Self> {
        spec.opts.validate()?;
        let subset = Arc::new(sample_subset(spec.opts.horizon, spec.opts.beta, &mut seed.child("subset").rng()));
        let b = subset.iter().filter(|v| **v).count();
        let m = spec.labels.len();
        let maps = (m as f64).powi(b as i32);
        if maps + 1.0 > spec.opts.expert_cap as f64 {
            return Err(MorError::ExpertCap {
                requested: format!("{m}^{b} + 1"),
                cap: spec.opts.expert_cap,
            });
        }
        // with |B| = 0 the single empty map updates nothing, same as E_0
        let maps = if b == 0 { 0 } else { maps as usize };
        let never = Arc::new(vec![false; spec.opts.horizon]);
        let mut experts: Vec<Box<dyn Expert>> = Vec::with_capacity(maps + 1);
        for i in 0..=maps {
            let learner = (spec.factory)(&seed.child("expert").child(i))?;
            let (sub, phi) = if i == 0 {
                (never.clone(), Vec::new())
            } else {
                let code = i - 1;
                let phi = (0..b).map(|p| spec.labels[code / m.pow(p as u32) % m].clone()).collect();
                (subset.clone(), phi)
            };
            experts.push(Box::new(SubsampledExpert::with_rule(learner, sub, phi, spec.rule.clone())));
        }
        let n = experts.len();
        let weights_seed = seed.child("weights");
        let inner: Box<dyn OnlineLearner> = match &spec.aggregator {
            Aggregator::Rewa => {
                Box::new(Rewa::new(experts, spec.loss.clone(), spec.scale, spec.opts.horizon, &weights_seed)?)
            }
            Aggregator::Exp4 { labels } => Box::new(
                Exp4::new(experts, labels.clone(), spec.loss.clone(), spec.scale, spec.opts.horizon, &weights_seed)?
                    .with_exploration(spec.opts.exploration)?,
            ),
        };
        Ok(Conversion { spec, subset, experts: n, inner })
    }

    pub fn subset(&self) -> &[bool] {
        &self.subset
    }

    pub fn subset_size(&self) -> usize {
        self.subset.iter().filter(|v| **v).count()
    }

    /// `|E_B|`, counting `E_0`.
    pub fn expert_count(&self) -> usize {
        self.experts
    }

    /// Subadditivity constant of the loss on the augmentation labels.
    pub fn subadditivity(&self) -> f64 {
        self.spec.c
    }

    /// Loss scale `M` handed to the aggregator.
    pub fn scale(&self) -> f64 {
        self.spec.scale
    }

    /// Augmentation label set.
    pub fn labels(&self) -> &[LabelVec] {
        &self.spec.labels
    }
}

impl OnlineLearner for Conversion {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        self.inner.predict(x)
    }

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()> {
        self.inner.update_full(x, y)
    }

    fn update_bandit(&mut self, x: InstanceId, loss: f64) -> Result<()> {
        self.inner.update_bandit(x, loss)
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        *self = Conversion::build(self.spec.clone(), seed)?;
        Ok(())
    }

    fn prediction_distribution(&mut self, x: InstanceId) -> Result<Option<Vec<(LabelVec, f64)>>> {
        self.inner.prediction_distribution(x)
    }
}

fn subadditivity_on(loss: &LossSpec, labels: &[LabelVec]) -> Result<f64> {
    if labels.len() < 2 {
        return Ok(1.0);
    }
    subadditivity_constant(loss, labels)
}

/// Realizable-to-agnostic conversion with full feedback: `E_B` over
/// `im(F)^{|B|}` plus `E_0`, aggregated by REWA with loss `l/M`.
pub fn realizable_to_agnostic_online(
    factory: LearnerFactory,
    class: &FunctionClass,
    loss: LossSpec,
    opts: SubsampleOptions,
    seed: &SeedSpec,
) -> Result<Conversion> {
    loss.validate()?;
    let labels = class.image();
    let c = subadditivity_on(&loss, &labels)?;
    let scale = loss.bound(class.k(), class.kind());
    let spec = Spec { factory, labels, rule: Rule::Label, loss, scale, opts, aggregator: Aggregator::Rewa, c };
    Conversion::build(Arc::new(spec), seed)
}

/// The same expert construction under bandit feedback, aggregated by EXP4
/// over the label set `y_labels`.
pub fn bandit_conversion(
    factory: LearnerFactory,
    class: &FunctionClass,
    y_labels: Vec<LabelVec>,
    loss: LossSpec,
    opts: SubsampleOptions,
    seed: &SeedSpec,
) -> Result<Conversion> {
    loss.validate()?;
    let labels = class.image();
    let c = subadditivity_on(&loss, &labels)?;
    let scale = loss.bound(class.k(), class.kind());
    let aggregator = Aggregator::Exp4 { labels: y_labels };
    let spec = Spec { factory, labels, rule: Rule::Label, loss, scale, opts, aggregator, c };
    Conversion::build(Arc::new(spec), seed)
}

/// `1 / (K T L)`.
pub fn regression_default_alpha(k: usize, horizon: usize, lipschitz: f64) -> f64 {
    1.0 / (k as f64 * horizon as f64 * lipschitz)
}

/// `1 / (2 K T)`.
pub fn lp_online_default_alpha(k: usize, horizon: usize) -> f64 {
    1.0 / (2.0 * k as f64 * horizon as f64)
}

/// `1 / ((K + K^2) T)`, used when an l_p learner is turned into an l_1 learner.
pub fn lp_reverse_alpha(k: usize, horizon: usize) -> f64 {
    let k = k as f64;
    1.0 / ((k + k * k) * horizon as f64)
}

/// Scalar learner for coordinate `k` from a multioutput learner: experts feed
/// `(x_t, (y_t, phi(t)))` with `phi` over the discretized other coordinates,
/// and REWA runs on `psi o d_1`.
pub fn extract_coordinate_online_regression(
    multi: LearnerFactory,
    class: &FunctionClass,
    k: usize,
    alpha: f64,
    psi: Psi,
    opts: SubsampleOptions,
    seed: &SeedSpec,
) -> Result<Conversion> {
    if class.kind() != LabelKind::Real {
        return Err(MorError::KindMismatch("regression extraction needs a real class".into()));
    }
    psi.validate()?;
    let labels = match class.discretize(alpha)?.drop_coordinate(k)? {
        Some(rest) => rest.image(),
        None => vec![LabelVec::new(Vec::new())],
    };
    let loss = LossSpec::psi_d1(psi);
    let scale = loss.bound(1, LabelKind::Real);
    let spec = Spec { factory: multi, labels, rule: Rule::Regression { k }, loss, scale, opts, aggregator: Aggregator::Rewa, c: 1.0 };
    Conversion::build(Arc::new(spec), seed)
}

/// l_p learner from an l_1 learner: the l_1 learner is used as a realizable
/// learner for the discretized class under l_p.
pub fn lp_online(
    agnostic_l1: LearnerFactory,
    class: &FunctionClass,
    p: PNorm,
    alpha: f64,
    opts: SubsampleOptions,
    seed: &SeedSpec,
) -> Result<Conversion> {
    let disc = class.discretize(alpha)?;
    realizable_to_agnostic_online(agnostic_l1, &disc, LossSpec::new(LossKind::Lp { p }), opts, seed)
}

/// Binary learner from a real-valued learner for `g`: experts threshold the
/// wrapped learner's output at `r_t` and are updated with discretized labels;
/// REWA runs on the 0-1 loss.
pub fn threshold_online(
    psi_learner: LearnerFactory,
    class_g: &FunctionClass,
    thresholds: Vec<f64>,
    alpha: f64,
    opts: SubsampleOptions,
    seed: &SeedSpec,
) -> Result<Conversion> {
    if thresholds.len() < opts.horizon {
        return Err(MorError::Parameter(format!(
            "{} thresholds for horizon {}",
            thresholds.len(),
            opts.horizon
        )));
    }
    let labels = class_g.discretize(alpha)?.image();
    let loss = LossSpec::zero_one();
    let spec = Spec {
        factory: psi_learner,
        labels,
        rule: Rule::Threshold { r: Arc::new(thresholds) },
        loss,
        scale: 1.0,
        opts,
        aggregator: Aggregator::Rewa,
        c: 1.0,
    };
    Conversion::build(Arc::new(spec), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Stream;
    use crate::online::{run_game, Feedback, Mcsoa, McsoaTable};

    fn class3() -> FunctionClass {
        let rows = [[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]];
        FunctionClass::from_fn("c3", vec![0, 1], LabelKind::Binary, 3, |f, x| vec![rows[f][x as usize]]).unwrap()
    }

    fn soa_factory(class: &FunctionClass) -> LearnerFactory {
        let table = McsoaTable::new(class).unwrap();
        Arc::new(move |_s: &SeedSpec| Ok(Box::new(Mcsoa::new(table.clone())) as Box<dyn OnlineLearner>))
    }

    #[test]
    fn expert_count_matches_subset() {
        let c = class3();
        for s in 0..20 {
            let conv = realizable_to_agnostic_online(
                soa_factory(&c),
                &c,
                LossSpec::zero_one(),
                SubsampleOptions::new(16, 0.5),
                &SeedSpec::new(s),
            )
            .unwrap();
            let b = conv.subset_size();
            assert_eq!(conv.expert_count(), if b == 0 { 1 } else { (1usize << b) + 1 });
        }
    }

    #[test]
    fn empty_subset_keeps_only_e0() {
        let c = class3();
        let seed = (0..200u64)
            .map(SeedSpec::new)
            .find(|s| sample_subset(8, 0.3, &mut s.child("subset").rng()).iter().all(|b| !b))
            .expect("some seed gives an empty subset");
        let mut conv =
            realizable_to_agnostic_online(soa_factory(&c), &c, LossSpec::zero_one(), SubsampleOptions::new(8, 0.3), &seed)
                .unwrap();
        assert_eq!(conv.expert_count(), 1);
        let mut soa = soa_factory(&c)(&seed).unwrap();
        for x in [0u64, 1, 1, 0] {
            assert_eq!(conv.predict(x).unwrap(), soa.predict(x).unwrap());
            conv.update_full(x, &LabelVec::scalar(-1.0)).unwrap();
        }
    }

    #[test]
    fn cap_is_enforced() {
        let c = class3();
        let err = realizable_to_agnostic_online(
            soa_factory(&c),
            &c,
            LossSpec::zero_one(),
            SubsampleOptions::new(64, 0.9).with_cap(50),
            &SeedSpec::new(0),
        );
        assert!(matches!(err, Err(MorError::ExpertCap { .. })));
    }

    #[test]
    fn update_log_follows_subset() {
        let c = class3();
        let subset = Arc::new(vec![false, true, false, true]);
        let phi = vec![LabelVec::scalar(1.0), LabelVec::scalar(-1.0)];
        let mut e = SubsampledExpert::plain(soa_factory(&c)(&SeedSpec::new(0)).unwrap(), subset, phi);
        let xs = [0u64, 1, 0, 0];
        for (t, x) in xs.iter().enumerate() {
            e.advise(t, *x).unwrap();
            e.observe(t, *x, Some(&LabelVec::scalar(1.0))).unwrap();
        }
        assert_eq!(e.update_log(), &[Example::new(1, vec![1.0]), Example::new(0, vec![-1.0])]);
    }

    #[test]
    fn bandit_conversion_runs() {
        let c = class3();
        let labels = c.image();
        let mut conv = bandit_conversion(
            soa_factory(&c),
            &c,
            labels,
            LossSpec::zero_one(),
            SubsampleOptions::new(16, 0.5),
            &SeedSpec::new(4),
        )
        .unwrap();
        let s = Stream::new((0..16).map(|t| Example::new(t % 2, vec![1.0])).collect());
        let tr = run_game(&mut conv, &s, &c, &LossSpec::zero_one(), Feedback::Bandit).unwrap();
        tr.replay(&c, &LossSpec::zero_one()).unwrap();
    }

    #[test]
    fn default_alphas() {
        assert_eq!(regression_default_alpha(2, 32, 1.0), 1.0 / 64.0);
        assert_eq!(lp_online_default_alpha(2, 32), 1.0 / 128.0);
        assert_eq!(lp_reverse_alpha(2, 32), 1.0 / 192.0);
    }
}
