use std::sync::{Arc, Mutex};

use super::{Expert, OnlineLearner};
use crate::dimensions::{DimKind, FnSet, TreeOracle};
use crate::domain::{Domain, FunctionClass, InstanceId, LabelKind, LabelVec};
use crate::error::{MorError, Result};
use crate::rng::SeedSpec;

/// Precomputed label splits and a shared dimension oracle for one class.
#[derive(Debug)]
pub struct McsoaTable {
    domain: Arc<Domain>,
    labels: Vec<LabelVec>,
    /// `splits[i][l]`: functions taking label `l` at instance `i`.
    splits: Vec<Vec<FnSet>>,
    n: usize,
    dim: usize,
    oracle: Mutex<TreeOracle>,
}

impl McsoaTable {
    /// Works for any output dimension: each distinct label vector is one
    /// multiclass label.
    pub fn new(class: &FunctionClass) -> Result<Arc<Self>> {
        let labels = class.image();
        let m = labels.len() as f64;
        let n = class.len();
        let code = |y: &LabelVec| labels.binary_search(y).expect("label is in the image");
        let table = (0..n)
            .map(|f| class.row(f).iter().map(|y| LabelVec::scalar(code(y) as f64 / m)).collect())
            .collect();
        let encoded = FunctionClass::with_domain(
            class.name(),
            class.domain().clone(),
            LabelKind::Real,
            class.names().to_vec(),
            table,
        )?;
        let splits = (0..class.instances().len())
            .map(|i| {
                (0..labels.len())
                    .map(|l| FnSet::from_indices(n, (0..n).filter(|f| code(class.at(*f, i)) == l)))
                    .collect()
            })
            .collect();
        let mut oracle = TreeOracle::new(&encoded, DimKind::McLittlestone, 0.0);
        let full = oracle.full();
        let dim = oracle.dim(&full) as usize;
        Ok(Arc::new(McsoaTable { domain: class.domain().clone(), labels, splits, n, dim, oracle: Mutex::new(oracle) }))
    }

    /// Multiclass Littlestone dimension of the whole class.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[LabelVec] {
        &self.labels
    }

    fn version_dim(&self, v: &FnSet) -> i64 {
        self.oracle.lock().expect("oracle lock").dim(v)
    }
}

/// Multiclass standard optimal algorithm: predict the label whose version
/// space has the largest Littlestone dimension, ties to the smallest label.
#[derive(Clone, Debug)]
pub struct Mcsoa {
    table: Arc<McsoaTable>,
    version: FnSet,
}

impl Mcsoa {
    pub fn new(table: Arc<McsoaTable>) -> Self {
        let version = FnSet::full(table.n);
        Mcsoa { table, version }
    }

    pub fn version_space(&self) -> &FnSet {
        &self.version
    }
}

impl OnlineLearner for Mcsoa {
    fn predict(&mut self, x: InstanceId) -> Result<LabelVec> {
        let i = self.table.domain.index_of(x)?;
        let mut best: (i64, usize) = (i64::MIN, 0);
        for (l, s) in self.table.splits[i].iter().enumerate() {
            let d = self.table.version_dim(&self.version.and(s));
            if d > best.0 {
                best = (d, l);
            }
        }
        Ok(self.table.labels[best.1].clone())
    }

    fn update_full(&mut self, x: InstanceId, y: &LabelVec) -> Result<()> {
        let i = self.table.domain.index_of(x)?;
        self.version = match self.table.labels.binary_search(y) {
            Ok(l) => self.version.and(&self.table.splits[i][l]),
            Err(_) => FnSet::empty(self.table.n),
        };
        Ok(())
    }

    fn reset(&mut self, _seed: &SeedSpec) -> Result<()> {
        self.version = FnSet::full(self.table.n);
        Ok(())
    }
}

/// MCSOA fed with its own predictions, except at chosen rounds where the
/// prediction is replaced by a fixed label.
#[derive(Clone, Debug)]
pub struct CoverExpert {
    soa: Mcsoa,
    overrides: Vec<(usize, LabelVec)>,
    current: Option<(usize, InstanceId, LabelVec)>,
}

impl CoverExpert {
    pub fn new(table: Arc<McsoaTable>, overrides: Vec<(usize, LabelVec)>) -> Self {
        CoverExpert { soa: Mcsoa::new(table), overrides, current: None }
    }

    pub fn overrides(&self) -> &[(usize, LabelVec)] {
        &self.overrides
    }
}

impl Expert for CoverExpert {
    fn advise(&mut self, t: usize, x: InstanceId) -> Result<LabelVec> {
        if let Some((s, z, y)) = &self.current {
            if *s == t && *z == x {
                return Ok(y.clone());
            }
        }
        let y = match self.overrides.iter().find(|(s, _)| *s == t) {
            Some((_, y)) => y.clone(),
            None => self.soa.predict(x)?,
        };
        self.current = Some((t, x, y.clone()));
        Ok(y)
    }

    fn observe(&mut self, t: usize, x: InstanceId, _y: Option<&LabelVec>) -> Result<()> {
        let y = self.advise(t, x)?;
        self.soa.update_full(x, &y)?;
        self.current = None;
        Ok(())
    }

    fn reset(&mut self, seed: &SeedSpec) -> Result<()> {
        self.current = None;
        self.soa.reset(seed)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_{j<=d} C(T, j) |im|^j`.
pub fn cover_size(horizon: usize, d: usize, image: usize) -> f64 {
    (0..=d.min(horizon)).map(|j| binomial(horizon, j) * (image as f64).powi(j as i32)).sum()
}

/// Every MCSOA run with at most `d` overridden rounds on a length-`T` stream.
/// For any function in the class some expert reproduces it on every stream.
pub fn mcsoa_expert_cover(table: &Arc<McsoaTable>, horizon: usize, d: usize, cap: usize) -> Result<Vec<CoverExpert>> {
    let size = cover_size(horizon, d, table.labels.len());
    if size > cap as f64 {
        return Err(MorError::ExpertCap { requested: format!("{size}"), cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    for j in 0..=d.min(horizon) {
        let mut rounds: Vec<usize> = (0..j).collect();
        loop {
            let m = table.labels.len();
            for code in 0..m.pow(j as u32) {
                let overrides = rounds
                    .iter()
                    .enumerate()
                    .map(|(p, t)| (*t, table.labels[code / m.pow(p as u32) % m].clone()))
                    .collect();
                out.push(CoverExpert::new(table.clone(), overrides));
            }
            // next j-subset of 0..horizon in lexicographic order
            let mut p = j;
            while p > 0 && rounds[p - 1] == horizon - j + p - 1 {
                p -= 1;
            }
            if p == 0 {
                break;
            }
            rounds[p - 1] += 1;
            for q in p..j {
                rounds[q] = rounds[q - 1] + 1;
            }
        }
    }
    Ok(out)
}
