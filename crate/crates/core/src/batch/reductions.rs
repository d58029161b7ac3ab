use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{select_erm, BatchLearner};
use crate::domain::{Domain, Example, FiniteDistribution, FunctionClass, InstanceId, LabelKind, LabelVec, Predictor};
use crate::error::{MorError, Result};
use crate::losses::{check_identity_of_indiscernibles, subadditivity_constant, LossSpec, PNorm};
use crate::rng::SeedSpec;
use rand::Rng;

fn dedup_predictors(preds: Vec<Predictor>) -> Vec<Predictor> {
    let mut out: Vec<Predictor> = Vec::new();
    for p in preds {
        if !out.iter().any(|q| q.values() == p.values()) {
            out.push(p);
        }
    }
    out
}

/// Candidates built from the distinct labelings of `s_u` and the one chosen on `s_l`.
#[derive(Clone, Debug)]
pub struct CandidateChoice {
    pub predictor: Predictor,
    pub candidates: Vec<Predictor>,
    pub chosen: usize,
}

/// Realizable-to-agnostic conversion: fit the realizable learner on every
/// distinct labeling of the unlabeled sample by the class, then pick the
/// candidate with the lowest empirical loss on the labeled sample.
#[derive(Clone)]
pub struct Alg1 {
    realizable: Arc<dyn BatchLearner>,
    class: Arc<FunctionClass>,
    loss: LossSpec,
    c: f64,
    unlabeled: usize,
}

impl Alg1 {
    /// Fails with a degenerate-loss error unless the loss has identity of
    /// indiscernibles on the image of the class.
    pub fn new(realizable: Arc<dyn BatchLearner>, class: Arc<FunctionClass>, loss: LossSpec) -> Result<Self> {
        let image = class.image();
        if !check_identity_of_indiscernibles(&loss, &image)? {
            return Err(MorError::DegenerateLoss(
                "identity of indiscernibles fails on the image of the class".into(),
            ));
        }
        let c = subadditivity_constant(&loss, &image)?;
        Ok(Alg1 { realizable, class, loss, c, unlabeled: 0 })
    }

    /// How many leading examples `fit` treats as unlabeled.
    pub fn with_unlabeled(mut self, n: usize) -> Self {
        self.unlabeled = n;
        self
    }

    pub fn subadditivity(&self) -> f64 {
        self.c
    }

    pub fn class(&self) -> &Arc<FunctionClass> {
        &self.class
    }

    pub fn candidates(&self, s_u: &[InstanceId]) -> Result<Vec<Predictor>> {
        let behaviors = self.class.behaviors(s_u)?;
        let fits = behaviors
            .iter()
            .map(|b| {
                let s: Vec<Example> =
                    s_u.iter().zip(&b.labels).map(|(x, y)| Example { x: *x, y: y.clone() }).collect();
                self.realizable.fit(&s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(dedup_predictors(fits))
    }

    pub fn run(&self, s_u: &[InstanceId], s_l: &[Example]) -> Result<CandidateChoice> {
        let candidates = self.candidates(s_u)?;
        let chosen = select_erm(&candidates, s_l, &self.loss)?;
        Ok(CandidateChoice { predictor: candidates[chosen].clone(), candidates, chosen })
    }

    /// `m_A(eps/2c, delta/2)` from the wrapped learner.
    pub fn unlabeled_size(&self, eps: f64, delta: f64) -> Option<usize> {
        self.realizable.sample_complexity(eps / (2.0 * self.c), delta / 2.0)
    }
}

impl BatchLearner for Alg1 {
    fn fit(&self, sample: &[Example]) -> Result<Predictor> {
        let split = self.unlabeled.min(sample.len());
        let s_u: Vec<InstanceId> = sample[..split].iter().map(|e| e.x).collect();
        Ok(self.run(&s_u, &sample[split..])?.predictor)
    }

    fn domain(&self) -> &Arc<Domain> {
        self.class.domain()
    }

    fn output_dim(&self) -> usize {
        self.class.k()
    }

    fn sample_complexity(&self, eps: f64, delta: f64) -> Option<usize> {
        let m_u = self.unlabeled_size(eps, delta)?;
        let b = self.loss.bound(self.class.k(), self.class.kind());
        Some(alg1_sample_bound(m_u, b, self.class.image().len(), eps, delta).ceil() as usize)
    }
}

/// Labeled-sample size for the selection step: `8 b^2/eps^2 ln(2|C|/delta)`.
pub fn alg1_labeled_size(b: f64, eps: f64, delta: f64, candidates: usize) -> usize {
    (8.0 * b * b / (eps * eps) * (2.0 * candidates as f64 / delta).ln()).ceil() as usize
}

/// `m_u + 8 b^2/eps^2 (m_u ln|im| + ln(2/delta))`.
pub fn alg1_sample_bound(m_u: usize, b: f64, image: usize, eps: f64, delta: f64) -> f64 {
    m_u as f64 + 8.0 * b * b / (eps * eps) * (m_u as f64 * (image as f64).ln() + (2.0 / delta).ln())
}

/// Runs one scalar learner per coordinate and concatenates the predictors.
#[derive(Clone)]
pub struct Concat {
    learners: Vec<Arc<dyn BatchLearner>>,
}

impl Concat {
    pub fn new(learners: Vec<Arc<dyn BatchLearner>>) -> Result<Self> {
        let first = learners.first().ok_or_else(|| MorError::Parameter("no coordinate learners".into()))?;
        for l in &learners {
            if l.domain() != first.domain() {
                return Err(MorError::InvalidClass("coordinate learners use different domains".into()));
            }
        }
        Ok(Concat { learners })
    }
}

impl BatchLearner for Concat {
    fn fit(&self, sample: &[Example]) -> Result<Predictor> {
        let parts = self
            .learners
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let s: Vec<Example> = sample
                    .iter()
                    .map(|e| {
                        if k >= e.y.len() {
                            return Err(MorError::CoordinateRange { k, dim: e.y.len() });
                        }
                        Ok(Example { x: e.x, y: LabelVec::scalar(e.y.get(k)) })
                    })
                    .collect::<Result<_>>()?;
                l.fit(&s)
            })
            .collect::<Result<Vec<_>>>()?;
        Predictor::concat(&parts)
    }

    fn domain(&self) -> &Arc<Domain> {
        self.learners[0].domain()
    }

    fn output_dim(&self) -> usize {
        self.learners.len()
    }

    /// `max_k m_k(eps/K, delta/K)`.
    fn sample_complexity(&self, eps: f64, delta: f64) -> Option<usize> {
        let k = self.learners.len() as f64;
        self.learners.iter().map(|l| l.sample_complexity(eps / k, delta / k)).try_fold(0, |a, m| m.map(|m| a.max(m)))
    }
}

/// Scalar learner for coordinate `k` built from a K-output learner by filling
/// the other coordinates with independent uniform signs.
#[derive(Clone)]
pub struct ExtractCls {
    multi: Arc<dyn BatchLearner>,
    k: usize,
    seed: SeedSpec,
}

impl ExtractCls {
    pub fn new(multi: Arc<dyn BatchLearner>, k: usize, seed: SeedSpec) -> Result<Self> {
        if k >= multi.output_dim() {
            return Err(MorError::CoordinateRange { k, dim: multi.output_dim() });
        }
        Ok(ExtractCls { multi, k, seed })
    }

    /// Sign fills for example `i`; one independent stream per (example, coordinate).
    pub fn fill(&self, i: usize) -> Vec<f64> {
        (0..self.multi.output_dim())
            .filter(|j| *j != self.k)
            .map(|j| {
                let mut rng = self.seed.child("augment").child(i).child(j).rng();
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    pub fn fit_with_fills(&self, sample: &[Example], fills: &[Vec<f64>]) -> Result<Predictor> {
        let aug = augment(sample, fills, self.k)?;
        self.multi.fit(&aug)?.coordinate(self.k)
    }
}

/// Places each scalar label at position `k` of its fill vector.
pub fn augment(sample: &[Example], fills: &[Vec<f64>], k: usize) -> Result<Vec<Example>> {
    if fills.len() != sample.len() {
        return Err(MorError::Parameter(format!("{} fills for {} examples", fills.len(), sample.len())));
    }
    sample
        .iter()
        .zip(fills)
        .map(|(e, f)| {
            if e.y.len() != 1 {
                return Err(MorError::Arity { expected: 1, found: e.y.len() });
            }
            Ok(Example { x: e.x, y: LabelVec::new(f.clone()).with_inserted(k, e.y.get(0)) })
        })
        .collect()
}

impl BatchLearner for ExtractCls {
    fn fit(&self, sample: &[Example]) -> Result<Predictor> {
        let fills: Vec<Vec<f64>> = (0..sample.len()).map(|i| self.fill(i)).collect();
        self.fit_with_fills(sample, &fills)
    }

    fn domain(&self) -> &Arc<Domain> {
        self.multi.domain()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn sample_complexity(&self, eps: f64, delta: f64) -> Option<usize> {
        self.multi.sample_complexity(eps, delta)
    }
}

/// `D_1` on coordinate `k` times independent uniform signs on the other
/// `dim - 1` coordinates.
pub fn product_distribution(d1: &FiniteDistribution, k: usize, dim: usize) -> Result<FiniteDistribution> {
    if k >= dim {
        return Err(MorError::CoordinateRange { k, dim });
    }
    let fills = crate::losses::grid(&[-1.0, 1.0], dim - 1);
    let w = 1.0 / fills.len() as f64;
    let mut pairs = Vec::new();
    for (e, p) in d1.iter() {
        for f in &fills {
            pairs.push((Example { x: e.x, y: f.with_inserted(k, e.y.get(0)) }, p * w));
        }
    }
    FiniteDistribution::from_weighted(pairs)
}

/// Output of the coordinate-extraction procedures that select among candidates.
#[derive(Clone, Debug)]
pub struct ExtractChoice {
    pub predictor: Predictor,
    pub augmentations: usize,
    pub candidates: usize,
}

/// `eps / (4 L K)`.
pub fn alg2_default_alpha(eps: f64, lipschitz: f64, k: usize) -> f64 {
    eps / (4.0 * lipschitz * k as f64)
}

/// Coordinate extraction for decomposable regression losses: augment `s` by
/// every behavior of the discretized other coordinates, fit `multi` on each,
/// keep coordinate `k`, and select on `s_tilde` with the coordinate loss.
pub fn extract_coordinate_regression(
    multi: &dyn BatchLearner,
    class: &FunctionClass,
    k: usize,
    alpha: f64,
    loss: &LossSpec,
    s: &[Example],
    s_tilde: &[Example],
) -> Result<ExtractChoice> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MorError::Parameter(format!("alpha = {alpha} is outside (0,1)")));
    }
    if class.kind() != LabelKind::Real {
        return Err(MorError::KindMismatch("regression extraction needs real labels".into()));
    }
    let coord_loss = loss
        .coordinate_loss(k)
        .ok_or_else(|| MorError::Parameter("loss does not decompose across coordinates".into()))?;
    let xs: Vec<InstanceId> = s.iter().map(|e| e.x).collect();
    let fills: Vec<Vec<Vec<f64>>> = match class.drop_coordinate(k)? {
        None => vec![vec![Vec::new(); s.len()]],
        Some(rest) => rest
            .discretize(alpha)?
            .behaviors(&xs)?
            .into_iter()
            .map(|b| b.labels.into_iter().map(|l| l.as_slice().to_vec()).collect())
            .collect(),
    };
    let fits = fills
        .iter()
        .map(|f| multi.fit(&augment(s, f, k)?)?.coordinate(k))
        .collect::<Result<Vec<_>>>()?;
    let candidates = dedup_predictors(fits);
    let chosen = select_erm(&candidates, s_tilde, &coord_loss)?;
    Ok(ExtractChoice { predictor: candidates[chosen].clone(), augmentations: fills.len(), candidates: candidates.len() })
}

/// `eps / (2K)`.
pub fn lp_default_alpha(eps: f64, k: usize) -> f64 {
    eps / (2.0 * k as f64)
}

/// ℓp agnostic learner from an ℓ1 agnostic learner: the ℓ1 learner serves as
/// a realizable learner for the discretized class under ℓp and is wrapped by
/// the realizable-to-agnostic conversion.
pub fn lp_agnostic(
    agnostic_l1: Arc<dyn BatchLearner>,
    class: &FunctionClass,
    p: PNorm,
    alpha: f64,
    s_u: &[InstanceId],
    s_l: &[Example],
) -> Result<CandidateChoice> {
    lp_alg1(agnostic_l1, class, p, alpha)?.run(s_u, s_l)
}

pub fn lp_alg1(agnostic_l1: Arc<dyn BatchLearner>, class: &FunctionClass, p: PNorm, alpha: f64) -> Result<Alg1> {
    if class.kind() != LabelKind::Real {
        return Err(MorError::KindMismatch("the lp reduction needs real labels".into()));
    }
    let disc = Arc::new(class.discretize(alpha)?);
    Alg1::new(agnostic_l1, disc, LossSpec::new(crate::losses::LossKind::Lp { p }))
}

/// `h(x) = +1` if `f(x) >= r(x)`, else `-1`.
pub fn threshold(pred: &Predictor, r: &BTreeMap<InstanceId, f64>) -> Result<Predictor> {
    let values = pred
        .domain()
        .ids()
        .iter()
        .zip(pred.values())
        .map(|(x, v)| {
            let t = r.get(x).ok_or(MorError::Domain(*x))?;
            Ok(LabelVec::scalar(if v.get(0) >= *t { 1.0 } else { -1.0 }))
        })
        .collect::<Result<Vec<_>>>()?;
    Predictor::new(pred.domain().clone(), values)
}

/// Binary learner from a ψ∘d1 learner: fit on every distinct discretized
/// labeling of `s_u`, threshold each fit at the witness map `r`, return the
/// empirical 0-1 minimizer on `s_l`.
pub fn threshold_binary_reduction(
    psi_learner: &dyn BatchLearner,
    class: &FunctionClass,
    r: &BTreeMap<InstanceId, f64>,
    alpha: f64,
    s_u: &[InstanceId],
    s_l: &[Example],
) -> Result<CandidateChoice> {
    for x in class.instances() {
        if !r.contains_key(x) {
            return Err(MorError::Domain(*x));
        }
    }
    let disc = class.discretize(alpha)?;
    let fits = disc
        .behaviors(s_u)?
        .iter()
        .map(|b| {
            let s: Vec<Example> = s_u.iter().zip(&b.labels).map(|(x, y)| Example { x: *x, y: y.clone() }).collect();
            threshold(&psi_learner.fit(&s)?, r)
        })
        .collect::<Result<Vec<_>>>()?;
    let candidates = dedup_predictors(fits);
    let chosen = select_erm(&candidates, s_l, &LossSpec::zero_one())?;
    Ok(CandidateChoice { predictor: candidates[chosen].clone(), candidates, chosen })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub n: usize,
    pub s_u: usize,
    pub s_l: usize,
    pub excess_risk: f64,
    pub success: bool,
}

/// Per-trial excess risks of a batch reduction against an (eps, delta) target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub eps: f64,
    pub delta: f64,
    pub rows: Vec<TrialRow>,
}

impl ReductionReport {
    pub fn new(eps: f64, delta: f64) -> Self {
        ReductionReport { eps, delta, rows: Vec::new() }
    }

    /// Records one trial. Improper predictors can beat the class, so the
    /// excess is kept as measured; only proper pipelines are floored at zero
    /// by the caller.
    pub fn push(&mut self, trial: usize, s_u: usize, s_l: usize, excess_risk: f64) -> Result<()> {
        if excess_risk.is_nan() {
            return Err(MorError::Protocol("excess risk is NaN".into()));
        }
        self.rows.push(TrialRow {
            trial,
            n: s_u + s_l,
            s_u,
            s_l,
            excess_risk,
            success: excess_risk <= self.eps,
        });
        Ok(())
    }

    pub fn trials(&self) -> usize {
        self.rows.len()
    }

    pub fn success_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len() as f64
    }

    pub fn mean_excess(&self) -> f64 {
        self.rows.iter().map(|r| r.excess_risk).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.success_rate() >= 1.0 - self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::Erm;
    use crate::domain::{best_risk, exact_risk};
    use crate::losses::Psi;

    fn binary_class() -> Arc<FunctionClass> {
        let rows = [[[1.0, 1.0], [1.0, -1.0]], [[1.0, -1.0], [-1.0, -1.0]], [[-1.0, 1.0], [-1.0, 1.0]]];
        Arc::new(
            FunctionClass::from_fn("b", vec![0, 1], LabelKind::Binary, 3, |f, x| rows[f][x as usize].to_vec()).unwrap(),
        )
    }

    #[test]
    fn alg1_single_behavior_ignores_labels() {
        let c = Arc::new(FunctionClass::from_fn("one", vec![0, 1], LabelKind::Binary, 2, |_, _| vec![1.0]).unwrap());
        let a = Alg1::new(Arc::new(Erm::new(c.clone(), LossSpec::zero_one())), c, LossSpec::zero_one()).unwrap();
        let out = a.run(&[0, 1], &[Example::new(0, vec![-1.0])]).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.predictor.values(), &[LabelVec::scalar(1.0), LabelVec::scalar(1.0)]);
    }

    #[test]
    fn alg1_rejects_degenerate_loss() {
        let c = binary_class();
        let img = c.image();
        let t = crate::losses::CustomTable::from_fn(img, |a, b| if a.get(0) == b.get(0) { 0.0 } else { 1.0 });
        let r = Alg1::new(Arc::new(Erm::new(c.clone(), LossSpec::hamming())), c, LossSpec::custom(t));
        assert!(matches!(r, Err(MorError::DegenerateLoss(_))));
    }

    #[test]
    fn alg1_candidates_bounded_by_behaviors() {
        let c = binary_class();
        let a = Alg1::new(Arc::new(Erm::new(c.clone(), LossSpec::hamming())), c.clone(), LossSpec::hamming()).unwrap();
        let s_u = [0, 0, 1];
        assert!(a.candidates(&s_u).unwrap().len() <= c.behaviors(&s_u).unwrap().len());
        assert!(a.candidates(&[]).unwrap().len() == 1);
    }

    #[test]
    fn concat_k1_matches_single() {
        let c = Arc::new(binary_class().restrict(0).unwrap());
        let erm: Arc<dyn BatchLearner> = Arc::new(Erm::new(c.clone(), LossSpec::zero_one()));
        let cat = Concat::new(vec![erm.clone()]).unwrap();
        let s = vec![Example::new(0, vec![-1.0]), Example::new(1, vec![-1.0])];
        assert_eq!(cat.fit(&s).unwrap(), erm.fit(&s).unwrap());
    }

    #[test]
    fn extract_cls_k1_passthrough() {
        let c = Arc::new(binary_class().restrict(1).unwrap());
        let erm: Arc<dyn BatchLearner> = Arc::new(Erm::new(c, LossSpec::hamming()));
        let ex = ExtractCls::new(erm.clone(), 0, SeedSpec::new(1)).unwrap();
        let s = vec![Example::new(0, vec![-1.0])];
        assert_eq!(ex.fit(&s).unwrap(), erm.fit(&s).unwrap());
        assert!(ex.fill(0).is_empty());
    }

    #[test]
    fn product_distribution_neutral_coordinates() {
        let d1 = FiniteDistribution::uniform(vec![Example::new(0, vec![1.0]), Example::new(1, vec![-1.0])]).unwrap();
        let d = product_distribution(&d1, 1, 3).unwrap();
        let c = binary_class();
        let pad = FunctionClass::from_fn("p", vec![0, 1], LabelKind::Binary, 1, |_, x| vec![1.0, -1.0, if x == 0 { 1.0 } else { -1.0 }]).unwrap();
        for k in [0usize, 2] {
            let m = d.marginal(k).unwrap();
            let r = exact_risk(&pad.predictor(0).coordinate(k).unwrap(), &m, &LossSpec::zero_one()).unwrap();
            assert!((r - 0.5).abs() < 1e-15);
        }
        assert!(c.len() == 3);
    }

    #[test]
    fn regression_k1_is_selection() {
        let c = Arc::new(FunctionClass::from_fn("r", vec![0], LabelKind::Real, 3, |f, _| vec![[0.1, 0.5, 0.9][f]]).unwrap());
        let loss = LossSpec::decomposable(vec![Psi::Identity]);
        let erm = Erm::agnostic(c.clone(), loss.clone());
        let s = vec![Example::new(0, vec![0.45])];
        let out = extract_coordinate_regression(&erm, &c, 0, 0.1, &loss, &s, &s).unwrap();
        assert_eq!((out.augmentations, out.candidates), (1, 1));
        assert_eq!(out.predictor.values()[0], LabelVec::scalar(0.5));
        assert!(extract_coordinate_regression(&erm, &c, 0, 1.5, &loss, &s, &s).is_err());
    }

    #[test]
    fn lp_pipeline_two_functions() {
        let c = FunctionClass::from_fn("r", vec![0, 1], LabelKind::Real, 2, |f, x| {
            vec![[0.2, 0.7][f], [0.6, 0.3][f] * (x as f64 + 1.0) / 2.0]
        })
        .unwrap();
        let d = FiniteDistribution::uniform(vec![Example::new(0, vec![0.25, 0.3]), Example::new(1, vec![0.2, 0.6])]).unwrap();
        let l1 = LossSpec::lp(1.0).unwrap();
        let erm: Arc<dyn BatchLearner> = Arc::new(Erm::agnostic(Arc::new(c.clone()), l1.clone()));
        let alpha = lp_default_alpha(0.1, 2);
        let mut rng = SeedSpec::new(5).rng();
        let s_u = d.sample_instances(50, &mut rng);
        let s_l = d.sample(2000, &mut rng);
        let out = lp_agnostic(erm, &c, PNorm::new(1.0).unwrap(), alpha, &s_u, &s_l).unwrap();
        let excess = exact_risk(&out.predictor, &d, &l1).unwrap() - best_risk(&c, &d, &l1).unwrap().0;
        assert!(excess <= 0.1, "{excess}");
    }

    #[test]
    fn threshold_examples() {
        let c = FunctionClass::from_fn("r", vec![0, 1], LabelKind::Real, 1, |_, _| vec![0.8]).unwrap();
        let r: BTreeMap<InstanceId, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        let h = threshold(&c.predictor(0), &r).unwrap();
        assert!(h.values().iter().all(|v| v.get(0) == 1.0));
        let erm = Erm::new(Arc::new(c.clone()), LossSpec::d1());
        let out = threshold_binary_reduction(&erm, &c, &r, 0.1, &[0, 1], &[Example::new(0, vec![-1.0])]).unwrap();
        assert_eq!(out.predictor, h);
        let missing: BTreeMap<InstanceId, f64> = [(0, 0.5)].into_iter().collect();
        assert!(matches!(threshold_binary_reduction(&erm, &c, &missing, 0.1, &[0], &[]), Err(MorError::Domain(1))));
    }
}
