//! Exhaustive shattering searches shared by the set and tree dimensions.

use std::collections::{BTreeSet, HashMap};

use super::bitset::FnSet;
use super::certificate::{DimKind, PatternWitness, ShatterCertificate, TreeNode};
use crate::domain::{FunctionClass, InstanceId, LabelKind};
use crate::error::{MorError, Result};

/// One way to split the class at a point: a witness and the functions on each side.
#[derive(Clone, Debug)]
pub struct SplitOption {
    pub witness: [f64; 2],
    pub sides: [FnSet; 2],
}

pub fn require_scalar(class: &FunctionClass, kind: Option<LabelKind>) -> Result<()> {
    if class.k() != 1 {
        return Err(MorError::KindMismatch(format!("expected a scalar class, got K = {}", class.k())));
    }
    if let Some(kind) = kind {
        if class.kind() != kind {
            return Err(MorError::KindMismatch(format!("expected a {kind:?} class, got {:?}", class.kind())));
        }
    }
    Ok(())
}

fn values_at(class: &FunctionClass, i: usize) -> Vec<f64> {
    (0..class.len()).map(|f| class.at(f, i).get(0)).collect()
}

fn distinct(vals: &[f64]) -> Vec<f64> {
    let set: BTreeSet<u64> = vals.iter().map(|v| v.to_bits()).collect();
    let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Split options at every domain point for a dimension kind.
pub fn point_options(class: &FunctionClass, kind: DimKind, gamma: f64) -> Vec<Vec<SplitOption>> {
    let n = class.len();
    (0..class.instances().len())
        .map(|i| {
            let vals = values_at(class, i);
            let side = |w: [f64; 2], s: usize| {
                FnSet::from_indices(n, (0..n).filter(|f| kind.side_holds(w, gamma, vals[*f], s)))
            };
            let mut out = Vec::new();
            match kind {
                DimKind::Vc | DimKind::Littlestone => {
                    let w = [-1.0, 1.0];
                    out.push(SplitOption { witness: w, sides: [side(w, 0), side(w, 1)] });
                }
                DimKind::Natarajan | DimKind::McLittlestone => {
                    let d = distinct(&vals);
                    for a in 0..d.len() {
                        for b in a + 1..d.len() {
                            let w = [d[a], d[b]];
                            out.push(SplitOption { witness: w, sides: [side(w, 0), side(w, 1)] });
                        }
                    }
                }
                DimKind::Fat | DimKind::SeqFat => {
                    let d = distinct(&vals);
                    let mut cands = d.clone();
                    for a in 0..d.len() {
                        for b in a + 1..d.len() {
                            cands.push((d[a] + d[b]) / 2.0);
                        }
                    }
                    let cands = distinct(&cands);
                    let mut seen = BTreeSet::new();
                    for r in cands {
                        let w = [r, r];
                        let sides = [side(w, 0), side(w, 1)];
                        if sides[0].is_empty() || sides[1].is_empty() {
                            continue;
                        }
                        if seen.insert(sides.clone()) {
                            out.push(SplitOption { witness: w, sides });
                        }
                    }
                }
            }
            out.retain(|o| !o.sides[0].is_empty() && !o.sides[1].is_empty());
            out
        })
        .collect()
}

fn floor_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as usize
    }
}

/// Largest set shattered under `kind` together with its certificate.
pub fn largest_shattered_set(class: &FunctionClass, kind: DimKind, gamma: f64) -> (usize, ShatterCertificate) {
    let opts = point_options(class, kind, gamma);
    let n = class.len();
    let ub = floor_log2(class.behavior_count());
    let mut best: Option<(Vec<usize>, Vec<[f64; 2]>, Vec<FnSet>)> = None;
    let mut chosen = Vec::new();
    let mut witness = Vec::new();
    let start = vec![FnSet::full(n)];
    dfs_sets(&opts, 0, &start, &mut chosen, &mut witness, &mut best, ub);
    let (points, witness, cells) = best.unwrap_or((Vec::new(), Vec::new(), start));
    let ids: Vec<InstanceId> = points.iter().map(|i| class.instances()[*i]).collect();
    let patterns = cells
        .iter()
        .enumerate()
        .map(|(p, s)| {
            let f = s.first().expect("shattered cells are non-empty");
            PatternWitness { pattern: p as u64, function: f, name: class.names()[f].clone() }
        })
        .collect();
    let d = ids.len();
    (d, ShatterCertificate::Set { kind, gamma, points: ids, witness, patterns })
}

type Best = Option<(Vec<usize>, Vec<[f64; 2]>, Vec<FnSet>)>;

fn dfs_sets(
    opts: &[Vec<SplitOption>],
    start: usize,
    cells: &[FnSet],
    chosen: &mut Vec<usize>,
    witness: &mut Vec<[f64; 2]>,
    best: &mut Best,
    ub: usize,
) -> bool {
    let best_len = best.as_ref().map_or(0, |b| b.0.len());
    if chosen.len() > best_len || best.is_none() {
        *best = Some((chosen.clone(), witness.clone(), cells.to_vec()));
    }
    if chosen.len() >= ub {
        return true;
    }
    for i in start..opts.len() {
        let best_len = best.as_ref().map_or(0, |b| b.0.len());
        if chosen.len() + (opts.len() - i) <= best_len {
            break;
        }
        for o in &opts[i] {
            let j = chosen.len();
            let mut next = vec![FnSet::empty(0); cells.len() * 2];
            let mut ok = true;
            for (p, c) in cells.iter().enumerate() {
                let lo = c.and(&o.sides[0]);
                let hi = c.and(&o.sides[1]);
                if lo.is_empty() || hi.is_empty() {
                    ok = false;
                    break;
                }
                next[p] = lo;
                next[p | 1 << j] = hi;
            }
            if !ok {
                continue;
            }
            chosen.push(i);
            witness.push(o.witness);
            let done = dfs_sets(opts, i + 1, &next, chosen, witness, best, ub);
            chosen.pop();
            witness.pop();
            if done {
                return true;
            }
        }
    }
    false
}

#[derive(Clone, Copy, Debug)]
enum Memo {
    Exact(usize),
    AtLeast(usize),
}

/// Memoized game-tree search over version spaces. Serves Littlestone,
/// multiclass Littlestone and sequential fat-shattering depending on the
/// split options it is built with.
#[derive(Debug)]
pub struct TreeOracle {
    kind: DimKind,
    gamma: f64,
    ids: Vec<InstanceId>,
    names: Vec<String>,
    n: usize,
    opts: Vec<Vec<SplitOption>>,
    memo: HashMap<FnSet, Memo>,
}

impl TreeOracle {
    pub fn new(class: &FunctionClass, kind: DimKind, gamma: f64) -> Self {
        TreeOracle {
            kind,
            gamma,
            ids: class.instances().to_vec(),
            names: class.names().to_vec(),
            n: class.len(),
            opts: point_options(class, kind, gamma),
            memo: HashMap::new(),
        }
    }

    pub fn class_size(&self) -> usize {
        self.n
    }

    pub fn full(&self) -> FnSet {
        FnSet::full(self.n)
    }

    /// Dimension of the version space `v`; `-1` for the empty set.
    pub fn dim(&mut self, v: &FnSet) -> i64 {
        if v.is_empty() {
            -1
        } else {
            self.capped(v, usize::MAX) as i64
        }
    }

    /// `min(dim(v), budget)` for non-empty `v`.
    pub fn capped(&mut self, v: &FnSet, budget: usize) -> usize {
        if budget == 0 {
            return 0;
        }
        match self.memo.get(v) {
            Some(Memo::Exact(d)) => return (*d).min(budget),
            Some(Memo::AtLeast(d)) if *d >= budget => return budget,
            _ => {}
        }
        let limit = floor_log2(v.len()).min(budget);
        let mut best = 0;
        'outer: for i in 0..self.opts.len() {
            for o in 0..self.opts[i].len() {
                if best >= limit {
                    break 'outer;
                }
                let a = v.and(&self.opts[i][o].sides[0]);
                let b = v.and(&self.opts[i][o].sides[1]);
                if a.is_empty() || b.is_empty() {
                    continue;
                }
                let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
                let ds = self.capped(&small, budget - 1);
                if ds < best {
                    continue;
                }
                let dl = self.capped(&large, ds.min(budget - 1));
                best = best.max(1 + ds.min(dl));
            }
        }
        let entry = if best >= budget { Memo::AtLeast(best) } else { Memo::Exact(best) };
        self.memo.insert(v.clone(), entry);
        best
    }

    /// Witness tree of depth `min(dim(v), budget)`.
    pub fn tree(&mut self, v: &FnSet, budget: usize) -> TreeNode {
        let d = self.capped(v, budget);
        if d == 0 {
            let f = v.first().expect("non-empty version space");
            return TreeNode::Leaf { function: f, name: self.names[f].clone() };
        }
        for i in 0..self.opts.len() {
            for o in 0..self.opts[i].len() {
                let a = v.and(&self.opts[i][o].sides[0]);
                let b = v.and(&self.opts[i][o].sides[1]);
                if a.is_empty() || b.is_empty() {
                    continue;
                }
                if self.capped(&a, d - 1) >= d - 1 && self.capped(&b, d - 1) >= d - 1 {
                    let witness = self.opts[i][o].witness;
                    let left = self.tree(&a, d - 1);
                    let right = self.tree(&b, d - 1);
                    return TreeNode::Internal { x: self.ids[i], witness, children: Box::new([left, right]) };
                }
            }
        }
        unreachable!("a split achieving the memoized depth exists")
    }

    pub fn certificate(&mut self, budget: usize) -> ShatterCertificate {
        let full = self.full();
        ShatterCertificate::Tree { kind: self.kind, gamma: self.gamma, root: self.tree(&full, budget) }
    }
}
