use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{verify_bound, BoundFormula};
use super::config::{
    read_stream, BatchParams, BatchReduction, DimsParams, ExperimentConfig, OnlineParams, OnlineReduction, Pipeline,
    StreamSpec,
};
use super::stats::{fit_growth_exponent, mean_stderr, GrowthFit};
use crate::batch::{
    alg1_labeled_size, alg2_default_alpha, augment, extract_coordinate_regression, lp_alg1, lp_default_alpha,
    product_distribution, select_erm, threshold, threshold_binary_reduction, Alg1, BatchLearner, Concat, Erm,
    ExtractCls,
};
use crate::dimensions::{
    fat_shattering, littlestone, mc_littlestone, natarajan, seq_fat_shattering, vc, ShatterCertificate,
};
use crate::domain::{
    best_risk, exact_risk, Example, FiniteDistribution, FunctionClass, LabelKind, LabelVec, Stream,
};
use crate::error::{MorError, Result};
use crate::losses::{LossKind, LossSpec};
use crate::online::{
    bandit_conversion, class_experts, concat_online, extract_coordinate_online_regression, lp_online,
    lp_online_default_alpha, measured_regret_curve, realizable_to_agnostic_online, regression_default_alpha, run_game,
    shattered_tree_adversary, ConcaveMajorant, Exp4, ExtractClsOnline, GameTrace, LearnerFactory, Mcsoa, McsoaTable,
    OnlineLearner, Rewa, SubsampleOptions,
};
use crate::rng::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One pass/fail decision and the numbers it was made from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, limit: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= limit,
            Relation::AtLeast => value >= limit,
        };
        Check { name: name.into(), value, limit, relation, passed }
    }
}

/// Per-trial values of one horizon (online) or of the whole run (batch).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub horizon: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<BoundFormula>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl Group {
    fn new(horizon: usize, values: Vec<f64>) -> Self {
        let (mean, stderr) = mean_stderr(&values);
        Group { horizon, values, mean, stderr, params: BTreeMap::new(), formula: None, bound: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimRow {
    pub coordinate: usize,
    pub dimension: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub value: usize,
    pub truncated: bool,
    pub certificate: ShatterCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvFile {
    pub name: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub pipeline: String,
    pub groups: Vec<Group>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthFit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dims: Vec<DimRow>,
    #[serde(skip)]
    pub csv: Vec<CsvFile>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("scenario {} ({})\n", self.scenario, self.pipeline);
        for d in &self.dims {
            let g = d.gamma.map(|g| format!(" gamma={g}")).unwrap_or_default();
            let t = if d.truncated { " (search cap reached)" } else { "" };
            out += &format!("  coord {} {:<14}{g} = {}{t}\n", d.coordinate, d.dimension, d.value);
        }
        for g in &self.groups {
            out += &format!("  T/n={:<6} trials={:<4} mean={:.6} stderr={:.6}", g.horizon, g.values.len(), g.mean, g.stderr);
            if let Some(b) = g.bound {
                out += &format!(" bound={b:.6}");
            }
            out += "\n";
        }
        if let Some(f) = &self.growth {
            out += &format!("  growth exponent {:.4} [{:.4}, {:.4}]\n", f.exponent, f.ci_low, f.ci_high);
        }
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out += &format!("  [{tag}] {}: {:.6} {rel} {:.6}\n", c.name, c.value, c.limit);
        }
        out
    }

    /// Write the CSV files next to `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for f in &self.csv {
            let p = dir.join(&f.name);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&p, &f.content)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Run the configured pipeline and, when an output path is set, write its CSV.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let report = match &cfg.pipeline {
        Pipeline::Dims(p) => run_dims(cfg, p)?,
        Pipeline::Batch(p) => run_batch(cfg, p)?,
        Pipeline::Online(p) => run_online(cfg, p)?,
    };
    if cfg.output.csv.is_some() {
        report.write_csv(&cfg.base_dir)?;
    }
    Ok(report)
}

pub fn format_label(y: &LabelVec) -> String {
    y.as_slice().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| MorError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| MorError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_name(cfg: &ExperimentConfig, default: &str, horizon: Option<usize>) -> String {
    let base = cfg.output.csv.clone().unwrap_or_else(|| PathBuf::from(default));
    let Some(t) = horizon else {
        return base.to_string_lossy().into_owned();
    };
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    base.with_file_name(format!("{stem}_T{t}{ext}")).to_string_lossy().into_owned()
}

fn report(cfg: &ExperimentConfig, pipeline: &str) -> Report {
    Report {
        schema_version: super::config::SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        pipeline: pipeline.to_string(),
        groups: Vec::new(),
        checks: Vec::new(),
        growth: None,
        dims: Vec::new(),
        csv: Vec::new(),
    }
}

fn coordinates(class: &FunctionClass) -> Result<Vec<FunctionClass>> {
    if class.k() == 1 {
        return Ok(vec![class.clone()]);
    }
    (0..class.k()).map(|k| class.restrict(k)).collect()
}

fn run_dims(cfg: &ExperimentConfig, p: &DimsParams) -> Result<Report> {
    let class = cfg.load_class()?;
    let mut rep = report(cfg, "dims");
    for (k, c) in coordinates(&class)?.iter().enumerate() {
        let mut rows: Vec<(String, Option<f64>, usize, bool, ShatterCertificate)> = Vec::new();
        match class.kind() {
            LabelKind::Binary => {
                for (name, (v, cert)) in [
                    ("vc", vc(c)?),
                    ("natarajan", natarajan(c)?),
                    ("littlestone", littlestone(c)?),
                    ("mc_littlestone", mc_littlestone(c)?),
                ] {
                    rows.push((name.into(), None, v, false, cert));
                }
            }
            LabelKind::Real => {
                let (v, cert) = fat_shattering(c, p.gamma)?;
                rows.push(("fat".into(), Some(p.gamma), v, false, cert));
                let s = seq_fat_shattering(c, p.gamma, p.max_depth)?;
                rows.push(("seq_fat".into(), Some(p.gamma), s.value, s.truncated, s.certificate));
            }
        }
        for (dimension, gamma, value, truncated, certificate) in rows {
            let replayed = certificate.replay(c)? as f64;
            rep.checks.push(Check::new(
                format!("coord {k} {dimension} certificate replays"),
                replayed,
                Relation::AtLeast,
                value as f64,
            ));
            rep.dims.push(DimRow { coordinate: k, dimension, gamma, value, truncated, certificate });
        }
    }
    let rows = rep.dims.iter().map(|d| {
        vec![
            d.coordinate.to_string(),
            d.dimension.clone(),
            d.gamma.map(|g| g.to_string()).unwrap_or_else(|| "NA".into()),
            d.value.to_string(),
            d.truncated.to_string(),
        ]
    });
    let content = csv_text(&["coordinate", "dimension", "gamma", "value", "truncated"], rows)?;
    rep.csv.push(CsvFile { name: csv_name(cfg, "dims.csv", None), content });
    Ok(rep)
}

/// Outcome of one batch trial. `reference` is the quantity the excess is
/// compared against exactly (sum of coordinate excesses, or the multi
/// learner's excess on the product distribution).
#[derive(Clone, Debug, PartialEq)]
pub struct BatchTrial {
    pub n: usize,
    pub s_u: usize,
    pub s_l: usize,
    pub excess: f64,
    pub reference: Option<f64>,
}

fn excess(pred: &crate::domain::Predictor, class: &FunctionClass, d: &FiniteDistribution, loss: &LossSpec) -> Result<f64> {
    Ok(exact_risk(pred, d, loss)? - best_risk(class, d, loss)?.0)
}

fn scalar_view(d: &FiniteDistribution, k: usize) -> Result<FiniteDistribution> {
    if d.support()[0].y.len() == 1 {
        Ok(d.clone())
    } else {
        d.marginal(k)
    }
}

fn need_kind(class: &FunctionClass, kind: LabelKind, what: &str) -> Result<()> {
    if class.kind() != kind {
        return Err(MorError::KindMismatch(format!("{what} needs a {kind:?} class")));
    }
    Ok(())
}

fn sample_complexity(l: &dyn BatchLearner, eps: f64, delta: f64) -> Result<usize> {
    l.sample_complexity(eps, delta)
        .ok_or_else(|| MorError::Parameter("learner declares no sample complexity".into()))
}

/// One batch trial of the configured reduction.
pub fn batch_trial(
    p: &BatchParams,
    class: &Arc<FunctionClass>,
    dist: &FiniteDistribution,
    loss: &LossSpec,
    seed: &SeedSpec,
) -> Result<BatchTrial> {
    let (eps, delta) = (p.eps, p.delta);
    let mut rng = seed.child("sample").rng();
    match p.reduction {
        BatchReduction::Alg1 => {
            let alg = Alg1::new(Arc::new(Erm::new(class.clone(), loss.clone())), class.clone(), loss.clone())?;
            let m_u = alg.unlabeled_size(eps, delta).expect("ERM declares its sample complexity");
            let s_u = dist.sample_instances(m_u, &mut rng);
            let cands = alg.candidates(&s_u)?;
            let b = loss.bound(class.k(), class.kind());
            let s_l = dist.sample(alg1_labeled_size(b, eps, delta, cands.len()), &mut rng);
            let chosen = select_erm(&cands, &s_l, loss)?;
            let ex = excess(&cands[chosen], class, dist, loss)?;
            Ok(BatchTrial { n: s_u.len() + s_l.len(), s_u: s_u.len(), s_l: s_l.len(), excess: ex, reference: None })
        }
        BatchReduction::Concat => {
            let kk = class.k();
            let mut learners: Vec<Arc<dyn BatchLearner>> = Vec::new();
            let mut parts = Vec::new();
            let mut n = 0;
            for k in 0..kk {
                let ck = Arc::new(class.restrict(k)?.dedup());
                let lk = loss
                    .coordinate_loss(k)
                    .ok_or_else(|| MorError::Parameter("concatenation needs a decomposable loss".into()))?;
                let erm = Erm::agnostic(ck.clone(), lk.clone());
                n = n.max(sample_complexity(&erm, eps / kk as f64, delta / kk as f64)?);
                learners.push(Arc::new(erm));
                parts.push((ck, lk));
            }
            let s = dist.sample(n, &mut rng);
            let pred = Concat::new(learners)?.fit(&s)?;
            let mut reference = 0.0;
            for (k, (ck, lk)) in parts.iter().enumerate() {
                reference += excess(&pred.coordinate(k)?, ck, &dist.marginal(k)?, lk)?;
            }
            let ex = excess(&pred, class, dist, loss)?;
            Ok(BatchTrial { n, s_u: 0, s_l: n, excess: ex, reference: Some(reference) })
        }
        BatchReduction::ExtractCls => {
            need_kind(class, LabelKind::Binary, "coordinate extraction")?;
            let d1 = scalar_view(dist, p.k)?;
            let ham = LossSpec::hamming();
            let multi: Arc<dyn BatchLearner> = Arc::new(Erm::agnostic(class.clone(), ham.clone()));
            let ex = ExtractCls::new(multi.clone(), p.k, seed.child("fill"))?;
            let n = sample_complexity(multi.as_ref(), eps, delta)?;
            let s = d1.sample(n, &mut rng);
            let fills: Vec<Vec<f64>> = (0..n).map(|i| ex.fill(i)).collect();
            let h = multi.fit(&augment(&s, &fills, p.k)?)?;
            let hk = h.coordinate(p.k)?;
            let value = excess(&hk, &class.restrict(p.k)?, &d1, &LossSpec::zero_one())?;
            let prod = product_distribution(&d1, p.k, class.k())?;
            let reference = excess(&h, class, &prod, &ham)?;
            Ok(BatchTrial { n, s_u: 0, s_l: n, excess: value, reference: Some(reference) })
        }
        BatchReduction::ExtractReg => {
            need_kind(class, LabelKind::Real, "regression extraction")?;
            let lip = loss
                .lipschitz(LabelKind::Real)
                .ok_or_else(|| MorError::Parameter("regression extraction needs a Lipschitz loss".into()))?;
            let lk = loss
                .coordinate_loss(p.k)
                .ok_or_else(|| MorError::Parameter("regression extraction needs a decomposable loss".into()))?;
            let alpha = p.alpha.unwrap_or_else(|| alg2_default_alpha(eps, lip, class.k()));
            let dk = scalar_view(dist, p.k)?;
            let multi = Erm::agnostic(class.clone(), loss.clone());
            let n_s = sample_complexity(&multi, eps / 2.0, delta / 2.0)?;
            let s = dk.sample(n_s, &mut rng);
            let xs: Vec<_> = s.iter().map(|e| e.x).collect();
            let fills = match class.drop_coordinate(p.k)? {
                Some(rest) => rest.discretize(alpha)?.behaviors(&xs)?.len(),
                None => 1,
            };
            let n_t = alg1_labeled_size(lk.bound(1, LabelKind::Real), eps, delta, fills);
            let s_t = dk.sample(n_t, &mut rng);
            let out = extract_coordinate_regression(&multi, class, p.k, alpha, loss, &s, &s_t)?;
            let value = excess(&out.predictor, &class.restrict(p.k)?, &dk, &lk)?;
            Ok(BatchTrial { n: n_s + n_t, s_u: n_s, s_l: n_t, excess: value, reference: None })
        }
        BatchReduction::Lp => {
            need_kind(class, LabelKind::Real, "the lp reduction")?;
            let LossKind::Lp { p: norm } = loss.kind else {
                return Err(MorError::Parameter("the lp reduction needs an lp loss".into()));
            };
            let alpha = p.alpha.unwrap_or_else(|| lp_default_alpha(eps, class.k()));
            let l1: Arc<dyn BatchLearner> = Arc::new(Erm::agnostic(class.clone(), LossSpec::lp(1.0)?));
            let alg = lp_alg1(l1, class, norm, alpha)?;
            let m_u = alg.unlabeled_size(eps, delta).expect("ERM declares its sample complexity");
            let s_u = dist.sample_instances(m_u, &mut rng);
            let cands = alg.candidates(&s_u)?;
            let b = loss.bound(class.k(), LabelKind::Real);
            let s_l = dist.sample(alg1_labeled_size(b, eps, delta, cands.len()), &mut rng);
            let chosen = select_erm(&cands, &s_l, loss)?;
            let value = excess(&cands[chosen], class, dist, loss)?;
            Ok(BatchTrial { n: s_u.len() + s_l.len(), s_u: s_u.len(), s_l: s_l.len(), excess: value, reference: None })
        }
        BatchReduction::Threshold => {
            need_kind(class, LabelKind::Real, "the threshold reduction")?;
            let r = p
                .thresholds
                .as_ref()
                .ok_or_else(|| MorError::Parameter("the threshold reduction needs a `thresholds` map".into()))?;
            let alpha = p.alpha.unwrap_or(eps / 4.0);
            let psi = Erm::new(class.clone(), LossSpec::d1());
            let m_u = sample_complexity(&psi, eps / 2.0, delta / 2.0)?;
            let s_u = dist.sample_instances(m_u, &mut rng);
            let cands = class.discretize(alpha)?.behaviors(&s_u)?.len();
            let s_l = dist.sample(alg1_labeled_size(1.0, eps, delta, cands), &mut rng);
            let out = threshold_binary_reduction(&psi, class, r, alpha, &s_u, &s_l)?;
            let h = thresholded_class(class, r)?;
            let value = excess(&out.predictor, &h, dist, &LossSpec::zero_one())?;
            Ok(BatchTrial { n: s_u.len() + s_l.len(), s_u: s_u.len(), s_l: s_l.len(), excess: value, reference: None })
        }
    }
}

/// `{x -> 2 1{f(x) >= r(x)} - 1 : f in F}`.
pub fn thresholded_class(class: &FunctionClass, r: &BTreeMap<u64, f64>) -> Result<FunctionClass> {
    let table = (0..class.len())
        .map(|f| Ok(threshold(&class.predictor(f), r)?.values().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FunctionClass::with_domain(
        format!("{}>=r", class.name()),
        class.domain().clone(),
        LabelKind::Binary,
        class.names().to_vec(),
        table,
    )
}

fn run_batch(cfg: &ExperimentConfig, p: &BatchParams) -> Result<Report> {
    if !(p.eps > 0.0 && p.delta > 0.0 && p.delta < 1.0) || p.trials == 0 {
        return Err(MorError::Parameter("batch runs need eps > 0, delta in (0,1) and trials > 0".into()));
    }
    let class = Arc::new(cfg.load_class()?);
    let dist = cfg.require_distribution()?;
    let loss = match p.reduction {
        BatchReduction::ExtractCls => cfg.loss.clone().unwrap_or_else(LossSpec::hamming),
        BatchReduction::Threshold => cfg.loss.clone().unwrap_or_else(LossSpec::zero_one),
        _ => cfg.require_loss()?,
    };
    let root = SeedSpec::new(cfg.seed);
    let trials: Vec<BatchTrial> = (0..p.trials)
        .into_par_iter()
        .map(|i| batch_trial(p, &class, &dist, &loss, &root.child("trial").child(i)))
        .collect::<Result<_>>()?;
    let mut rep = report(cfg, "batch");
    let rows = trials.iter().enumerate().map(|(i, t)| {
        vec![
            i.to_string(),
            t.n.to_string(),
            t.s_u.to_string(),
            t.s_l.to_string(),
            t.excess.to_string(),
            (t.excess <= p.eps).to_string(),
            t.reference.map(|r| r.to_string()).unwrap_or_else(|| "NA".into()),
        ]
    });
    let content = csv_text(&["trial", "n", "s_u", "s_l", "excess_risk", "success", "reference"], rows)?;
    rep.csv.push(CsvFile { name: csv_name(cfg, "batch.csv", None), content });
    let values: Vec<f64> = trials.iter().map(|t| t.excess).collect();
    let success = values.iter().filter(|v| **v <= p.eps).count() as f64 / values.len() as f64;
    let mut g = Group::new(trials.iter().map(|t| t.n).max().unwrap_or(0), values);
    g.params.insert("eps".into(), p.eps);
    g.params.insert("delta".into(), p.delta);
    rep.groups.push(g);
    rep.checks.push(Check::new("success frequency", success, Relation::AtLeast, 1.0 - p.delta));
    if trials.iter().any(|t| t.reference.is_some()) {
        let gap = trials
            .iter()
            .filter_map(|t| t.reference.map(|r| t.excess - r))
            .fold(f64::NEG_INFINITY, f64::max);
        rep.checks.push(Check::new("excess minus reference, worst trial", gap, Relation::AtMost, 1e-12));
    }
    Ok(rep)
}

struct OnlineSetup {
    reduction: OnlineReduction,
    class: Arc<FunctionClass>,
    loss: LossSpec,
    comparator: FunctionClass,
    game_loss: LossSpec,
    project: Option<usize>,
    table: Option<Arc<McsoaTable>>,
    p: OnlineParams,
}

fn rewa_factory(class: Arc<FunctionClass>, loss: LossSpec, horizon: usize) -> LearnerFactory {
    Arc::new(move |seed: &SeedSpec| {
        let m = loss.bound(class.k(), class.kind());
        Ok(Box::new(Rewa::new(class_experts(&class), loss.clone(), m, horizon, seed)?) as Box<dyn OnlineLearner>)
    })
}

fn mcsoa_factory(table: Arc<McsoaTable>) -> LearnerFactory {
    Arc::new(move |_: &SeedSpec| Ok(Box::new(Mcsoa::new(table.clone())) as Box<dyn OnlineLearner>))
}

impl OnlineSetup {
    fn new(class: FunctionClass, loss: LossSpec, p: &OnlineParams) -> Result<Self> {
        let r = p.reduction;
        if let Some(f) = p.feedback {
            if f != r.feedback() {
                return Err(MorError::UnsupportedFeedback(format!("{r:?} runs with {:?} feedback", r.feedback())));
            }
        }
        let k = p.k;
        if k >= class.k() {
            return Err(MorError::CoordinateRange { k, dim: class.k() });
        }
        let (comparator, game_loss, project) = match r {
            OnlineReduction::ExtractCls => {
                need_kind(&class, LabelKind::Binary, "coordinate extraction")?;
                if !matches!(loss.kind, LossKind::Hamming) {
                    return Err(MorError::Parameter("classification extraction runs on the Hamming loss".into()));
                }
                (class.restrict(k)?, LossSpec::zero_one(), Some(k))
            }
            OnlineReduction::ExtractReg => {
                need_kind(&class, LabelKind::Real, "regression extraction")?;
                let LossKind::DecomposableSum { psis } = &loss.kind else {
                    return Err(MorError::Parameter("regression extraction needs a decomposable psi loss".into()));
                };
                if psis.len() != class.k() {
                    return Err(MorError::Arity { expected: class.k(), found: psis.len() });
                }
                (class.restrict(k)?, LossSpec::psi_d1(psis[k].clone()), Some(k))
            }
            OnlineReduction::Lp => {
                need_kind(&class, LabelKind::Real, "the lp conversion")?;
                if !matches!(loss.kind, LossKind::Lp { .. }) {
                    return Err(MorError::Parameter("the lp conversion needs an lp loss".into()));
                }
                (class.clone(), loss.clone(), None)
            }
            OnlineReduction::Concat => {
                if loss.coordinate_loss(0).is_none() {
                    return Err(MorError::Parameter("concatenation needs a decomposable loss".into()));
                }
                (class.clone(), loss.clone(), None)
            }
            _ => (class.clone(), loss.clone(), None),
        };
        let table = match r {
            OnlineReduction::Mcsoa | OnlineReduction::Convert | OnlineReduction::ConvertBandit => {
                Some(McsoaTable::new(&class)?)
            }
            _ => None,
        };
        Ok(OnlineSetup { reduction: r, class: Arc::new(class), loss, comparator, game_loss, project, table, p: p.clone() })
    }

    fn opts(&self, horizon: usize) -> SubsampleOptions {
        let mut o = SubsampleOptions::new(horizon, self.p.beta).with_cap(self.p.expert_cap);
        o.exploration = self.p.exploration;
        o
    }

    fn bound_scale(&self) -> f64 {
        self.loss.bound(self.class.k(), self.class.kind())
    }

    fn lipschitz(&self) -> f64 {
        self.loss.lipschitz(LabelKind::Real).unwrap_or(1.0)
    }

    fn lp_alpha(&self, horizon: usize) -> f64 {
        self.p.alpha.unwrap_or_else(|| lp_online_default_alpha(self.class.k(), horizon))
    }

    fn reg_alpha(&self, horizon: usize) -> f64 {
        self.p.alpha.unwrap_or_else(|| regression_default_alpha(self.class.k(), horizon, self.lipschitz()))
    }

    fn learner(&self, horizon: usize, seed: &SeedSpec) -> Result<Box<dyn OnlineLearner>> {
        let class = &self.class;
        let m = self.bound_scale();
        Ok(match self.reduction {
            OnlineReduction::Rewa => Box::new(Rewa::new(class_experts(class), self.loss.clone(), m, horizon, seed)?),
            OnlineReduction::Exp4 => Box::new(
                Exp4::new(class_experts(class), class.image(), self.loss.clone(), m, horizon, seed)?
                    .with_exploration(self.p.exploration)?,
            ),
            OnlineReduction::Mcsoa => Box::new(Mcsoa::new(self.table.clone().expect("table"))),
            OnlineReduction::Convert => Box::new(realizable_to_agnostic_online(
                mcsoa_factory(self.table.clone().expect("table")),
                class,
                self.loss.clone(),
                self.opts(horizon),
                seed,
            )?),
            OnlineReduction::ConvertBandit => Box::new(bandit_conversion(
                mcsoa_factory(self.table.clone().expect("table")),
                class,
                class.image(),
                self.loss.clone(),
                self.opts(horizon),
                seed,
            )?),
            OnlineReduction::Concat => {
                let mut parts: Vec<Box<dyn OnlineLearner>> = Vec::new();
                for k in 0..class.k() {
                    let ck = class.restrict(k)?.dedup();
                    let lk = self.loss.coordinate_loss(k).expect("checked in setup");
                    let mk = lk.bound(1, class.kind());
                    parts.push(Box::new(Rewa::new(
                        class_experts(&ck),
                        lk,
                        mk,
                        horizon,
                        &seed.child("coordinate").child(k),
                    )?));
                }
                Box::new(concat_online(parts)?)
            }
            OnlineReduction::ExtractCls => {
                let multi = Rewa::new(class_experts(class), self.loss.clone(), m, horizon, &seed.child("multi"))?;
                Box::new(ExtractClsOnline::new(Box::new(multi), self.p.k, class.k(), seed.child("fill"))?)
            }
            OnlineReduction::ExtractReg => {
                let LossKind::DecomposableSum { psis } = &self.loss.kind else { unreachable!("checked in setup") };
                Box::new(extract_coordinate_online_regression(
                    rewa_factory(class.clone(), self.loss.clone(), horizon),
                    class,
                    self.p.k,
                    self.reg_alpha(horizon),
                    psis[self.p.k].clone(),
                    self.opts(horizon),
                    seed,
                )?)
            }
            OnlineReduction::Lp => {
                let LossKind::Lp { p } = self.loss.kind else { unreachable!("checked in setup") };
                Box::new(lp_online(
                    rewa_factory(class.clone(), LossSpec::lp(1.0)?, horizon),
                    class,
                    p,
                    self.lp_alpha(horizon),
                    self.opts(horizon),
                    seed,
                )?)
            }
        })
    }

    fn view(&self, s: &Stream, horizon: usize) -> Stream {
        let rounds = s.rounds[..horizon].iter().map(|e| match self.project {
            Some(k) if e.y.len() > 1 => Example { x: e.x, y: LabelVec::scalar(e.y.get(k)) },
            _ => e.clone(),
        });
        Stream::new(rounds.collect())
    }

    /// Measured regret of the wrapped learner on realizable probe streams over
    /// the instances of `s`, majorized by a concave function and evaluated at
    /// `T^beta`.
    fn rbar(&self, s: &Stream, horizon: usize, seed: &SeedSpec) -> Result<f64> {
        let (factory, probe_class, probe_loss) = match self.reduction {
            OnlineReduction::Convert | OnlineReduction::ConvertBandit => {
                (mcsoa_factory(self.table.clone().expect("table")), (*self.class).clone(), self.loss.clone())
            }
            OnlineReduction::ExtractReg => {
                (rewa_factory(self.class.clone(), self.loss.clone(), horizon), (*self.class).clone(), self.loss.clone())
            }
            OnlineReduction::Lp => (
                rewa_factory(self.class.clone(), LossSpec::lp(1.0)?, horizon),
                self.class.discretize(self.lp_alpha(horizon))?,
                self.loss.clone(),
            ),
            _ => unreachable!("only conversions use a majorant"),
        };
        let xs: Vec<u64> = s.rounds[..horizon].iter().map(|e| e.x).collect();
        let mut probes = Vec::new();
        for f in 0..probe_class.len() {
            let rounds: Vec<Example> =
                xs.iter().map(|x| Ok(Example { x: *x, y: probe_class.value(f, *x)?.clone() })).collect::<Result<_>>()?;
            if self.reduction == OnlineReduction::ExtractReg {
                // the wrapped learner also sees the revealed coordinate
                let mixed = rounds
                    .iter()
                    .zip(&s.rounds)
                    .map(|(e, o)| {
                        let yk = if o.y.len() > 1 { o.y.get(self.p.k) } else { o.y.get(0) };
                        let mut v = e.y.as_slice().to_vec();
                        v[self.p.k] = yk;
                        Example { x: e.x, y: LabelVec::new(v) }
                    })
                    .collect();
                probes.push(Stream::new(mixed));
            }
            probes.push(Stream::new(rounds));
        }
        let seeds = if self.reduction == OnlineReduction::Convert || self.reduction == OnlineReduction::ConvertBandit {
            1
        } else {
            self.p.probe_seeds
        };
        let curve = measured_regret_curve(&factory, &probe_class, &probe_loss, &probes, seeds, seed)?;
        let hull = ConcaveMajorant::fit(&curve)?;
        Ok(hull.eval((horizon as f64).powf(self.p.beta)))
    }

    fn bound(
        &self,
        horizon: usize,
        streams: &[Stream],
        traces: &[GameTrace],
        seed: &SeedSpec,
    ) -> Result<Option<(BoundFormula, BTreeMap<String, f64>)>> {
        let class = &self.class;
        let t = horizon as f64;
        let mut p: BTreeMap<String, f64> = BTreeMap::new();
        p.insert("T".into(), t);
        let formula = match self.reduction {
            OnlineReduction::Rewa => {
                p.insert("M".into(), self.bound_scale());
                p.insert("N".into(), class.len() as f64);
                BoundFormula::Rewa
            }
            OnlineReduction::Exp4 => {
                p.insert("M".into(), self.bound_scale());
                p.insert("N".into(), class.len() as f64);
                p.insert("Y".into(), class.image().len() as f64);
                BoundFormula::Exp4
            }
            OnlineReduction::Mcsoa => {
                let realizable = traces.iter().all(|tr| tr.best_in_hindsight == 0.0);
                if !realizable || !matches!(self.loss.kind, LossKind::ZeroOne) {
                    return Ok(None);
                }
                p.insert("d".into(), self.table.as_ref().expect("table").dim() as f64);
                BoundFormula::Mistakes
            }
            OnlineReduction::Concat => {
                let mut n: usize = 0;
                let mut m: f64 = 0.0;
                for k in 0..class.k() {
                    n = n.max(class.restrict(k)?.dedup().len());
                    m = m.max(self.loss.coordinate_loss(k).expect("checked").bound(1, class.kind()));
                }
                p.insert("K".into(), class.k() as f64);
                p.insert("M".into(), m);
                p.insert("N".into(), n as f64);
                BoundFormula::RewaSum
            }
            OnlineReduction::ExtractCls => {
                p.insert("M".into(), class.k() as f64);
                p.insert("N".into(), class.len() as f64);
                BoundFormula::Rewa
            }
            OnlineReduction::Convert | OnlineReduction::ConvertBandit => {
                let labels = class.image();
                let c = if labels.len() < 2 { 1.0 } else { crate::losses::subadditivity_constant(&self.loss, &labels)? };
                p.insert("c".into(), c);
                p.insert("beta".into(), self.p.beta);
                p.insert("M".into(), self.bound_scale());
                p.insert("Rbar".into(), self.rbar(&streams[0], horizon, seed)?);
                if self.reduction == OnlineReduction::Convert {
                    p.insert("image".into(), labels.len() as f64);
                    BoundFormula::Conversion
                } else {
                    p.insert("Y".into(), labels.len() as f64);
                    BoundFormula::BanditConversion
                }
            }
            OnlineReduction::ExtractReg => {
                p.insert("beta".into(), self.p.beta);
                p.insert("K".into(), class.k() as f64);
                p.insert("L".into(), self.lipschitz());
                p.insert("alpha".into(), self.reg_alpha(horizon));
                p.insert("Rbar".into(), self.rbar(&streams[0], horizon, seed)?);
                BoundFormula::Regression
            }
            OnlineReduction::Lp => {
                p.insert("beta".into(), self.p.beta);
                p.insert("K".into(), class.k() as f64);
                p.insert("alpha".into(), self.lp_alpha(horizon));
                p.insert("Rbar".into(), self.rbar(&streams[0], horizon, seed)?);
                BoundFormula::LpOnline
            }
        };
        Ok(Some((formula, p)))
    }
}

fn make_streams(cfg: &ExperimentConfig, p: &OnlineParams, class: &FunctionClass, horizon: usize) -> Result<Vec<Stream>> {
    let root = SeedSpec::new(cfg.seed).child("stream");
    let shared = |s: Stream| -> Result<Vec<Stream>> {
        if s.horizon() < horizon {
            return Err(MorError::Parameter(format!("stream has {} rounds, horizon {horizon} needs more", s.horizon())));
        }
        Ok(vec![s; p.seeds])
    };
    match &p.stream {
        StreamSpec::Inline { rounds } => shared(Stream::new(rounds.iter().map(Example::from).collect())),
        StreamSpec::File { path } => shared(read_stream(&cfg.resolve(path))?),
        StreamSpec::Iid { distribution, per_seed } => {
            let d = match distribution {
                Some(src) => src.load(&cfg.base_dir)?.build()?,
                None => cfg.require_distribution()?,
            };
            if *per_seed {
                Ok((0..p.seeds).map(|s| Stream::new(d.sample(horizon, &mut root.child(s).rng()))).collect())
            } else {
                shared(Stream::new(d.sample(horizon, &mut root.rng())))
            }
        }
        StreamSpec::Tree => {
            let (_, cert) = littlestone(class)?;
            (0..p.seeds)
                .map(|s| Ok(shattered_tree_adversary(&cert, class, horizon, &root.child(s))?.stream))
                .collect()
        }
    }
}

fn trace_rows(seed: usize, tr: &GameTrace) -> Vec<Vec<String>> {
    tr.rows
        .iter()
        .map(|r| {
            vec![
                seed.to_string(),
                r.t.to_string(),
                r.x.to_string(),
                format_label(&r.yhat),
                if r.revealed { format_label(&r.y) } else { "NA".into() },
                r.loss.to_string(),
                r.cum_loss.to_string(),
                r.best_in_hindsight.to_string(),
                r.regret.to_string(),
            ]
        })
        .collect()
}

pub const TRACE_COLUMNS: [&str; 9] = ["seed", "t", "x", "yhat", "y", "loss", "cum_loss", "best_in_hindsight", "regret"];

fn run_online(cfg: &ExperimentConfig, p: &OnlineParams) -> Result<Report> {
    if p.horizons.is_empty() || p.horizons.contains(&0) || p.seeds == 0 {
        return Err(MorError::Parameter("online runs need positive horizons and at least one seed".into()));
    }
    let class = cfg.load_class()?;
    let loss = cfg.require_loss()?;
    let setup = OnlineSetup::new(class, loss, p)?;
    let tmax = *p.horizons.iter().max().expect("non-empty");
    let streams = make_streams(cfg, p, &setup.class, tmax)?;
    let root = SeedSpec::new(cfg.seed);
    let mut rep = report(cfg, "online");
    let feedback = p.reduction.feedback();
    for &horizon in &p.horizons {
        let views: Vec<Stream> = streams.iter().map(|s| setup.view(s, horizon)).collect();
        let traces: Vec<GameTrace> = views
            .par_iter()
            .enumerate()
            .map(|(s, stream)| {
                let mut learner = setup.learner(horizon, &root.child("T").child(horizon).child("trial").child(s))?;
                run_game(learner.as_mut(), stream, &setup.comparator, &setup.game_loss, feedback)
            })
            .collect::<Result<_>>()?;
        let rows = traces.iter().enumerate().flat_map(|(s, tr)| trace_rows(s, tr));
        let content = csv_text(&TRACE_COLUMNS, rows)?;
        let tag = if p.horizons.len() > 1 { Some(horizon) } else { None };
        rep.csv.push(CsvFile { name: csv_name(cfg, "trace.csv", tag), content });
        let mut g = Group::new(horizon, traces.iter().map(|t| t.regret).collect());
        if let Some((formula, params)) = setup.bound(horizon, &streams, &traces, &root.child("probe").child(horizon))? {
            let c = verify_bound(&format!("T={horizon}"), &g.values, formula, &params, p.tolerance)?;
            rep.checks.push(Check::new(
                format!("T={horizon} mean regret + 2 stderr vs {formula:?} bound"),
                c.mean + 2.0 * c.stderr,
                Relation::AtMost,
                c.bound + c.tolerance,
            ));
            g.params = params;
            g.formula = Some(formula);
            g.bound = Some(c.bound);
        }
        rep.groups.push(g);
    }
    if p.horizons.len() >= 3 {
        let pairs: Vec<(f64, f64)> = rep.groups.iter().map(|g| (g.horizon as f64, g.mean)).collect();
        match fit_growth_exponent(&pairs) {
            Ok(fit) => {
                if let Some(max) = p.max_exponent {
                    rep.checks.push(Check::new("growth exponent upper CI", fit.ci_high, Relation::AtMost, max));
                }
                rep.growth = Some(fit);
            }
            Err(e) if p.max_exponent.is_some() => return Err(e),
            Err(_) => {}
        }
    }
    Ok(rep)
}
