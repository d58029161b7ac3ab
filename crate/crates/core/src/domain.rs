//! Finite domains, vector-valued function classes, distributions and streams.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};
use crate::losses::LossSpec;

pub type InstanceId = u64;

/// Nudge applied before flooring in `discretize`.
pub const DISCRETIZE_NUDGE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Binary,
    Real,
}

impl LabelKind {
    pub fn check(self, v: f64) -> Result<()> {
        match self {
            LabelKind::Binary if v == 1.0 || v == -1.0 => Ok(()),
            LabelKind::Binary => Err(MorError::KindMismatch(format!("{v} is not a binary label"))),
            LabelKind::Real if (0.0..=1.0).contains(&v) => Ok(()),
            LabelKind::Real => Err(MorError::KindMismatch(format!("{v} is outside [0,1]"))),
        }
    }

    /// Largest per-coordinate distance between two labels of this kind.
    pub fn span(self) -> f64 {
        match self {
            LabelKind::Binary => 2.0,
            LabelKind::Real => 1.0,
        }
    }
}

/// A label vector. Equality, hashing and ordering are bitwise on the
/// components after `-0.0` is folded into `0.0`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVec(Vec<f64>);

impl LabelVec {
    pub fn new(components: Vec<f64>) -> Self {
        LabelVec(components.into_iter().map(|v| if v == 0.0 { 0.0 } else { v }).collect())
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(vec![v])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn check(&self, k: usize, kind: LabelKind) -> Result<()> {
        if self.0.len() != k {
            return Err(MorError::Arity { expected: k, found: self.0.len() });
        }
        for v in &self.0 {
            if v.is_nan() {
                return Err(MorError::KindMismatch("NaN label".into()));
            }
            kind.check(*v)?;
        }
        Ok(())
    }

    /// Copy with component `k` removed.
    pub fn without(&self, k: usize) -> LabelVec {
        let mut v = self.0.clone();
        v.remove(k);
        LabelVec(v)
    }

    /// Insert `v` at position `k`, shifting the rest right.
    pub fn with_inserted(&self, k: usize, v: f64) -> LabelVec {
        let mut c = self.0.clone();
        c.insert(k, v);
        LabelVec::new(c)
    }
}

impl PartialEq for LabelVec {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for LabelVec {}

impl Hash for LabelVec {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.len().hash(state);
        for v in &self.0 {
            v.to_bits().hash(state);
        }
    }
}

impl PartialOrd for LabelVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LabelVec {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl From<Vec<f64>> for LabelVec {
    fn from(v: Vec<f64>) -> Self {
        LabelVec::new(v)
    }
}

impl std::fmt::Display for LabelVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v}")).collect();
        write!(f, "({})", parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    ids: Vec<InstanceId>,
    index: HashMap<InstanceId, usize>,
}

impl Domain {
    pub fn new(ids: Vec<InstanceId>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, x) in ids.iter().enumerate() {
            if index.insert(*x, i).is_some() {
                return Err(MorError::InvalidClass(format!("duplicate instance {x}")));
            }
        }
        Ok(Domain { ids, index })
    }

    pub fn ids(&self) -> &[InstanceId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, x: InstanceId) -> Result<usize> {
        self.index.get(&x).copied().ok_or(MorError::Domain(x))
    }

    pub fn contains(&self, x: InstanceId) -> bool {
        self.index.contains_key(&x)
    }
}

/// A distinct labeling of a list of instances together with the lowest index
/// of a function realizing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Behavior {
    pub labels: Vec<LabelVec>,
    pub first: usize,
}

/// Explicit table of vector-valued functions over a finite domain.
#[derive(Debug, Clone)]
pub struct FunctionClass {
    name: String,
    domain: Arc<Domain>,
    k: usize,
    kind: LabelKind,
    names: Vec<String>,
    table: Vec<Vec<LabelVec>>,
}

impl FunctionClass {
    pub fn new(
        name: impl Into<String>,
        domain: Vec<InstanceId>,
        kind: LabelKind,
        names: Vec<String>,
        table: Vec<Vec<LabelVec>>,
    ) -> Result<Self> {
        let domain = Arc::new(Domain::new(domain)?);
        Self::with_domain(name, domain, kind, names, table)
    }

    pub fn with_domain(
        name: impl Into<String>,
        domain: Arc<Domain>,
        kind: LabelKind,
        names: Vec<String>,
        table: Vec<Vec<LabelVec>>,
    ) -> Result<Self> {
        if table.is_empty() {
            return Err(MorError::InvalidClass("class is empty".into()));
        }
        if names.len() != table.len() {
            return Err(MorError::InvalidClass(format!(
                "{} names for {} functions",
                names.len(),
                table.len()
            )));
        }
        let k = table[0].first().map(|y| y.len()).unwrap_or(0);
        for (f, row) in table.iter().enumerate() {
            if row.len() != domain.len() {
                return Err(MorError::InvalidClass(format!(
                    "function {} is defined on {} of {} instances",
                    names[f],
                    row.len(),
                    domain.len()
                )));
            }
            for y in row {
                y.check(k, kind)?;
            }
        }
        if k == 0 && !domain.is_empty() {
            return Err(MorError::InvalidClass("output dimension must be positive".into()));
        }
        Ok(FunctionClass { name: name.into(), domain, k, kind, names, table })
    }

    /// Build from closures `f(i, x) -> label`.
    pub fn from_fn(
        name: impl Into<String>,
        domain: Vec<InstanceId>,
        kind: LabelKind,
        n: usize,
        f: impl Fn(usize, InstanceId) -> Vec<f64>,
    ) -> Result<Self> {
        let names = (0..n).map(|i| format!("f{i}")).collect();
        let table = (0..n)
            .map(|i| domain.iter().map(|x| LabelVec::new(f(i, *x))).collect())
            .collect();
        Self::new(name, domain, kind, names, table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn instances(&self) -> &[InstanceId] {
        self.domain.ids()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, f: usize) -> &[LabelVec] {
        &self.table[f]
    }

    pub fn at(&self, f: usize, i: usize) -> &LabelVec {
        &self.table[f][i]
    }

    pub fn value(&self, f: usize, x: InstanceId) -> Result<&LabelVec> {
        Ok(&self.table[f][self.domain.index_of(x)?])
    }

    pub fn predictor(&self, f: usize) -> Predictor {
        Predictor { domain: self.domain.clone(), values: self.table[f].clone() }
    }

    fn check_coordinate(&self, k: usize) -> Result<()> {
        if k >= self.k {
            Err(MorError::CoordinateRange { k, dim: self.k })
        } else {
            Ok(())
        }
    }

    /// Scalar class of the `k`-th coordinate functions (0-based), deduplicated.
    pub fn restrict(&self, k: usize) -> Result<FunctionClass> {
        self.check_coordinate(k)?;
        let mut seen = HashMap::new();
        let mut names = Vec::new();
        let mut table = Vec::new();
        for (f, row) in self.table.iter().enumerate() {
            let r: Vec<LabelVec> = row.iter().map(|y| LabelVec::scalar(y.get(k))).collect();
            if seen.insert(r.clone(), f).is_none() {
                names.push(self.names[f].clone());
                table.push(r);
            }
        }
        Self::with_domain(format!("{}[{}]", self.name, k), self.domain.clone(), self.kind, names, table)
    }

    /// Class with coordinate `k` removed (the "other coordinates"), deduplicated.
    /// Returns `None` when K = 1.
    pub fn drop_coordinate(&self, k: usize) -> Result<Option<FunctionClass>> {
        self.check_coordinate(k)?;
        if self.k == 1 {
            return Ok(None);
        }
        let rows = self.table.iter().map(|row| row.iter().map(|y| y.without(k)).collect());
        Ok(Some(self.rebuild(format!("{}[-{}]", self.name, k), rows)?))
    }

    /// Coordinate-wise `floor(v/alpha)*alpha`.
    pub fn discretize(&self, alpha: f64) -> Result<FunctionClass> {
        if self.kind != LabelKind::Real {
            return Err(MorError::KindMismatch("discretize needs real-valued coordinates".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MorError::Parameter(format!("alpha = {alpha} is outside (0,1)")));
        }
        let rows: Vec<Vec<LabelVec>> = self
            .table
            .iter()
            .map(|row| {
                row.iter()
                    .map(|y| LabelVec::new(y.as_slice().iter().map(|v| snap(*v, alpha)).collect()))
                    .collect()
            })
            .collect();
        let names = self.names.clone();
        Self::with_domain(format!("{}^{alpha}", self.name), self.domain.clone(), self.kind, names, rows)
    }

    fn rebuild(
        &self,
        name: String,
        rows: impl Iterator<Item = Vec<LabelVec>>,
    ) -> Result<FunctionClass> {
        let mut seen = HashMap::new();
        let mut names = Vec::new();
        let mut table = Vec::new();
        for (f, r) in rows.enumerate() {
            if seen.insert(r.clone(), f).is_none() {
                names.push(self.names[f].clone());
                table.push(r);
            }
        }
        Self::with_domain(name, self.domain.clone(), self.kind, names, table)
    }

    /// The same class with identical tables merged (first occurrence kept).
    pub fn dedup(&self) -> FunctionClass {
        self.rebuild(self.name.clone(), self.table.iter().cloned())
            .expect("dedup of a valid class is valid")
    }

    pub fn subclass(&self, indices: &[usize]) -> Result<FunctionClass> {
        let names = indices.iter().map(|i| self.names[*i].clone()).collect();
        let table = indices.iter().map(|i| self.table[*i].clone()).collect();
        Self::with_domain(self.name.clone(), self.domain.clone(), self.kind, names, table)
    }

    /// Union of realized outputs, sorted.
    pub fn image(&self) -> Vec<LabelVec> {
        let set: BTreeSet<&LabelVec> = self.table.iter().flatten().collect();
        set.into_iter().cloned().collect()
    }

    /// Sorted realized values of coordinate `k`.
    pub fn coordinate_image(&self, k: usize) -> Result<Vec<f64>> {
        self.check_coordinate(k)?;
        let set: BTreeSet<LabelVec> =
            self.table.iter().flatten().map(|y| LabelVec::scalar(y.get(k))).collect();
        Ok(set.into_iter().map(|y| y.get(0)).collect())
    }

    /// Distinct labelings of `xs` in first-occurrence order.
    pub fn behaviors(&self, xs: &[InstanceId]) -> Result<Vec<Behavior>> {
        let idx: Vec<usize> = xs.iter().map(|x| self.domain.index_of(*x)).collect::<Result<_>>()?;
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for (f, row) in self.table.iter().enumerate() {
            let labels: Vec<LabelVec> = idx.iter().map(|i| row[*i].clone()).collect();
            if seen.insert(labels.clone(), ()).is_none() {
                out.push(Behavior { labels, first: f });
            }
        }
        Ok(out)
    }

    /// Number of distinct full tables.
    pub fn behavior_count(&self) -> usize {
        self.table.iter().collect::<std::collections::HashSet<_>>().len()
    }

    /// Functions consistent with every example.
    pub fn consistent(&self, sample: &[Example]) -> Result<Vec<usize>> {
        let idx: Vec<usize> =
            sample.iter().map(|e| self.domain.index_of(e.x)).collect::<Result<_>>()?;
        Ok((0..self.len())
            .filter(|f| sample.iter().zip(&idx).all(|(e, i)| self.table[*f][*i] == e.y))
            .collect())
    }
}

/// `floor(v/alpha)*alpha` with a small upward nudge before flooring. When the
/// nudge lands on a grid point a hair above `v`, `v` itself is returned so the
/// snapped value never exceeds the original.
pub fn snap(v: f64, alpha: f64) -> f64 {
    let s = (v / alpha + DISCRETIZE_NUDGE).floor() * alpha;
    let s = s.min(v).max(0.0);
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

/// Total map from the domain to labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    domain: Arc<Domain>,
    values: Vec<LabelVec>,
}

impl Predictor {
    pub fn new(domain: Arc<Domain>, values: Vec<LabelVec>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(MorError::InvalidClass(format!(
                "predictor has {} values for {} instances",
                values.len(),
                domain.len()
            )));
        }
        Ok(Predictor { domain, values })
    }

    pub fn from_fn(domain: Arc<Domain>, f: impl Fn(InstanceId) -> LabelVec) -> Self {
        let values = domain.ids().iter().map(|x| f(*x)).collect();
        Predictor { domain, values }
    }

    pub fn predict(&self, x: InstanceId) -> Result<&LabelVec> {
        Ok(&self.values[self.domain.index_of(x)?])
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[LabelVec] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn coordinate(&self, k: usize) -> Result<Predictor> {
        if k >= self.k() {
            return Err(MorError::CoordinateRange { k, dim: self.k() });
        }
        let values = self.values.iter().map(|y| LabelVec::scalar(y.get(k))).collect();
        Ok(Predictor { domain: self.domain.clone(), values })
    }

    /// Coordinate-wise concatenation of scalar-or-vector predictors.
    pub fn concat(parts: &[Predictor]) -> Result<Predictor> {
        let first = parts.first().ok_or_else(|| MorError::Parameter("nothing to concatenate".into()))?;
        for p in parts {
            if p.domain != first.domain {
                return Err(MorError::InvalidClass("predictors live on different domains".into()));
            }
        }
        let values = (0..first.values.len())
            .map(|i| {
                LabelVec::new(parts.iter().flat_map(|p| p.values[i].as_slice().to_vec()).collect())
            })
            .collect();
        Ok(Predictor { domain: first.domain.clone(), values })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub x: InstanceId,
    pub y: LabelVec,
}

impl Example {
    pub fn new(x: InstanceId, y: impl Into<LabelVec>) -> Self {
        Example { x, y: y.into() }
    }
}

/// Probability distribution with finite support on X × Y.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    support: Vec<Example>,
    weights: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(support: Vec<Example>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(MorError::InvalidDistribution(format!(
                "{} support points and {} weights",
                support.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(MorError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MorError::InvalidDistribution(format!("weights sum to {total}")));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &support {
            if !seen.insert(e) {
                return Err(MorError::InvalidDistribution(format!("duplicate support point at {}", e.x)));
            }
        }
        Ok(FiniteDistribution { support, weights })
    }

    pub fn uniform(support: Vec<Example>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(e: Example) -> Self {
        FiniteDistribution { support: vec![e], weights: vec![1.0] }
    }

    /// Merges duplicate support points and renormalizes rounding drift.
    pub fn from_weighted(pairs: Vec<(Example, f64)>) -> Result<Self> {
        let mut order: Vec<Example> = Vec::new();
        let mut acc: HashMap<Example, f64> = HashMap::new();
        for (e, w) in pairs {
            if !acc.contains_key(&e) {
                order.push(e.clone());
            }
            *acc.entry(e).or_insert(0.0) += w;
        }
        let weights: Vec<f64> = order.iter().map(|e| acc[e]).collect();
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MorError::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(order, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn support(&self) -> &[Example] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Example, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    /// Projection onto coordinate `k` with collided pairs merged.
    pub fn marginal(&self, k: usize) -> Result<FiniteDistribution> {
        let dim = self.support[0].y.len();
        if k >= dim {
            return Err(MorError::CoordinateRange { k, dim });
        }
        let pairs = self
            .iter()
            .map(|(e, w)| (Example { x: e.x, y: LabelVec::scalar(e.y.get(k)) }, w))
            .collect();
        Self::from_weighted(pairs)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Example> {
        let wi = WeightedIndex::new(&self.weights).expect("validated weights");
        (0..n).map(|_| self.support[wi.sample(rng)].clone()).collect()
    }

    pub fn sample_instances<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<InstanceId> {
        self.sample(n, rng).into_iter().map(|e| e.x).collect()
    }
}

/// Oblivious labeled sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub rounds: Vec<Example>,
}

impl Stream {
    pub fn new(rounds: Vec<Example>) -> Self {
        Stream { rounds }
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        for e in &self.rounds {
            domain.index_of(e.x)?;
        }
        Ok(())
    }
}

pub fn exact_risk(pred: &Predictor, dist: &FiniteDistribution, loss: &LossSpec) -> Result<f64> {
    let mut r = 0.0;
    for (e, w) in dist.iter() {
        r += w * loss.evaluate(pred.predict(e.x)?, &e.y)?;
    }
    Ok(r)
}

pub fn function_risk(class: &FunctionClass, f: usize, dist: &FiniteDistribution, loss: &LossSpec) -> Result<f64> {
    let mut r = 0.0;
    for (e, w) in dist.iter() {
        r += w * loss.evaluate(class.value(f, e.x)?, &e.y)?;
    }
    Ok(r)
}

/// Minimum exact risk over the class and the lowest index attaining it.
pub fn best_risk(class: &FunctionClass, dist: &FiniteDistribution, loss: &LossSpec) -> Result<(f64, usize)> {
    let mut best = (f64::INFINITY, 0);
    for f in 0..class.len() {
        let r = function_risk(class, f, dist, loss)?;
        if r < best.0 {
            best = (r, f);
        }
    }
    Ok(best)
}

/// Sum of losses of `pred` over a sample.
pub fn empirical_loss(pred: &Predictor, sample: &[Example], loss: &LossSpec) -> Result<f64> {
    let mut s = 0.0;
    for e in sample {
        s += loss.evaluate(pred.predict(e.x)?, &e.y)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;

    fn consts(k: Vec<Vec<f64>>, n_x: u64) -> FunctionClass {
        FunctionClass::from_fn("c", (0..n_x).collect(), LabelKind::Binary, k.len(), |i, _| k[i].clone()).unwrap()
    }

    #[test]
    fn restrict_dedups() {
        let f = consts(vec![vec![1.0, 1.0], vec![1.0, -1.0]], 1);
        assert_eq!(f.restrict(0).unwrap().len(), 1);
        assert_eq!(f.restrict(1).unwrap().len(), 2);
        assert!(matches!(f.restrict(2), Err(MorError::CoordinateRange { .. })));
        let g = consts(vec![vec![1.0], vec![-1.0], vec![1.0]], 2);
        assert_eq!(g.restrict(0).unwrap().len(), 2);
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(snap(0.9, 0.25), 0.75);
        assert_eq!(snap(1.0, 0.25), 1.0);
        assert_eq!(snap(0.3, 0.1), 0.3);
        assert_eq!(snap(0.0, 0.3), 0.0);
        let c = FunctionClass::from_fn("r", (0..5).collect(), LabelKind::Real, 1, |_, x| vec![x as f64 / 4.0]).unwrap();
        let d = c.discretize(0.25).unwrap();
        assert_eq!(d.coordinate_image(0).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let b = consts(vec![vec![1.0]], 1);
        assert!(matches!(b.discretize(0.5), Err(MorError::KindMismatch(_))));
        assert!(matches!(c.discretize(1.0), Err(MorError::Parameter(_))));
    }

    #[test]
    fn image_sizes() {
        assert_eq!(consts(vec![vec![1.0, 1.0], vec![-1.0, -1.0]], 1).image().len(), 2);
        let full = consts(vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]], 1);
        assert_eq!(full.image().len(), 4);
    }

    #[test]
    fn marginal_examples() {
        let d = FiniteDistribution::point_mass(Example::new(0, vec![1.0, -1.0]));
        let m = d.marginal(1).unwrap();
        assert_eq!(m.support(), &[Example::new(0, vec![-1.0])]);
        let u = FiniteDistribution::uniform(vec![Example::new(0, vec![1.0, 1.0]), Example::new(0, vec![1.0, -1.0])]).unwrap();
        let m = u.marginal(0).unwrap();
        assert_eq!(m.support().len(), 1);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn risk_examples() {
        let h = LossSpec::new(LossKind::Hamming);
        let f = consts(vec![vec![1.0, 1.0]], 2);
        let d = FiniteDistribution::point_mass(Example::new(0, vec![1.0, 1.0]));
        assert_eq!(exact_risk(&f.predictor(0), &d, &h).unwrap(), 0.0);
        let d2 = FiniteDistribution::uniform(vec![Example::new(0, vec![1.0, 1.0]), Example::new(1, vec![1.0, -1.0])]).unwrap();
        assert_eq!(exact_risk(&f.predictor(0), &d2, &h).unwrap(), 0.5);
        let d3 = FiniteDistribution::point_mass(Example::new(9, vec![1.0, 1.0]));
        assert!(matches!(exact_risk(&f.predictor(0), &d3, &h), Err(MorError::Domain(9))));
    }

    #[test]
    fn distribution_validation() {
        assert!(FiniteDistribution::new(vec![Example::new(0, vec![1.0])], vec![0.5]).is_err());
        assert!(FiniteDistribution::new(
            vec![Example::new(0, vec![1.0]), Example::new(0, vec![1.0])],
            vec![0.5, 0.5]
        )
        .is_err());
    }

    #[test]
    fn label_equality_folds_negative_zero() {
        assert_eq!(LabelVec::new(vec![-0.0]), LabelVec::new(vec![0.0]));
    }
}
