#![allow(dead_code)]

//! Brute-force reference implementations and random fixtures shared by the
//! integration tests. Nothing here calls into the search code under test.

use std::collections::HashMap;

use mor_core::{FunctionClass, LabelKind};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random scalar class on `0..n_x` with values drawn from `values`.
pub fn random_class(rng: &mut ChaCha8Rng, kind: LabelKind, n_x: usize, n_f: usize, values: &[f64]) -> FunctionClass {
    let table: Vec<Vec<f64>> =
        (0..n_f).map(|_| (0..n_x).map(|_| *values.choose(rng).unwrap()).collect()).collect();
    FunctionClass::from_fn("random", (0..n_x as u64).collect(), kind, n_f, |f, x| vec![table[f][x as usize]]).unwrap()
}

/// Random multioutput class with `k` coordinates.
pub fn random_multi(rng: &mut ChaCha8Rng, kind: LabelKind, n_x: usize, n_f: usize, k: usize, values: &[f64]) -> FunctionClass {
    let table: Vec<Vec<Vec<f64>>> = (0..n_f)
        .map(|_| (0..n_x).map(|_| (0..k).map(|_| *values.choose(rng).unwrap()).collect()).collect())
        .collect();
    FunctionClass::from_fn("random", (0..n_x as u64).collect(), kind, n_f, |f, x| table[f][x as usize].clone()).unwrap()
}

pub fn random_sizes(rng: &mut ChaCha8Rng, max_x: usize, max_f: usize) -> (usize, usize) {
    (rng.gen_range(1..=max_x), rng.gen_range(1..=max_f))
}

/// `rows[f][x]` for a scalar class.
pub fn rows(class: &FunctionClass) -> Vec<Vec<f64>> {
    (0..class.len()).map(|f| class.row(f).iter().map(|y| y.get(0)).collect()).collect()
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == size).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Largest `S` such that every sign pattern on `S` appears among the rows.
pub fn vc_oracle(rows: &[Vec<f64>]) -> usize {
    let n = rows.first().map_or(0, Vec::len);
    (0..=n)
        .rev()
        .find(|&s| {
            subsets(n, s).iter().any(|set| {
                let seen: std::collections::HashSet<Vec<bool>> =
                    rows.iter().map(|r| set.iter().map(|&i| r[i] > 0.0).collect()).collect();
                seen.len() == 1 << s
            })
        })
        .unwrap_or(0)
}

/// Largest `S` with witnesses `f != g` on `S` such that every mix of them is realized.
pub fn natarajan_oracle(rows: &[Vec<f64>]) -> usize {
    let n = rows.first().map_or(0, Vec::len);
    for s in (1..=n).rev() {
        for set in subsets(n, s) {
            let pairs: Vec<Vec<(f64, f64)>> = set
                .iter()
                .map(|&i| {
                    let d = distinct(rows.iter().map(|r| r[i]).collect());
                    let mut p = Vec::new();
                    for a in 0..d.len() {
                        for b in a + 1..d.len() {
                            p.push((d[a], d[b]));
                        }
                    }
                    p
                })
                .collect();
            if product(&pairs, &mut Vec::new(), &mut |choice: &[(f64, f64)]| {
                (0u32..1 << s).all(|pat| {
                    rows.iter().any(|r| {
                        set.iter().enumerate().all(|(j, &i)| {
                            let want = if pat >> j & 1 == 1 { choice[j].1 } else { choice[j].0 };
                            r[i] == want
                        })
                    })
                })
            }) {
                return s;
            }
        }
    }
    0
}

/// Depth-first over the cartesian product; stops at the first accepted choice.
fn product<T: Clone>(options: &[Vec<T>], acc: &mut Vec<T>, accept: &mut impl FnMut(&[T]) -> bool) -> bool {
    if acc.len() == options.len() {
        return accept(acc);
    }
    for o in &options[acc.len()] {
        acc.push(o.clone());
        if product(options, acc, accept) {
            return true;
        }
        acc.pop();
    }
    false
}

/// Witness values for the margin oracles: a uniform grid of step 1/64, which
/// contains every midpoint of values on the 1/32 grid.
pub fn dense_witnesses() -> Vec<f64> {
    (0..=64).map(|i| i as f64 / 64.0).collect()
}

/// Largest `S` with some witness `r` on the dense grid such that every pattern
/// is realized with margin `gamma`.
pub fn fat_oracle(rows: &[Vec<f64>], gamma: f64) -> usize {
    let n = rows.first().map_or(0, Vec::len);
    let nf = rows.len();
    // per point, the distinct (below, above) splits the grid produces
    let splits: Vec<Vec<(u64, u64)>> = (0..n)
        .map(|i| {
            let mut v: Vec<(u64, u64)> = dense_witnesses()
                .into_iter()
                .map(|r| {
                    let lo = (0..nf).filter(|&f| rows[f][i] <= r - gamma + TOL).fold(0u64, |m, f| m | 1 << f);
                    let hi = (0..nf).filter(|&f| rows[f][i] >= r + gamma - TOL).fold(0u64, |m, f| m | 1 << f);
                    (lo, hi)
                })
                .filter(|(lo, hi)| *lo != 0 && *hi != 0)
                .collect();
            v.sort();
            v.dedup();
            v
        })
        .collect();
    for s in (1..=n).rev() {
        if 1usize << s > nf {
            continue;
        }
        for set in subsets(n, s) {
            let opts: Vec<Vec<(u64, u64)>> = set.iter().map(|&i| splits[i].clone()).collect();
            if product(&opts, &mut Vec::new(), &mut |choice: &[(u64, u64)]| {
                (0u32..1 << s).all(|pat| {
                    let m = choice
                        .iter()
                        .enumerate()
                        .fold(u64::MAX, |m, (j, (lo, hi))| m & if pat >> j & 1 == 1 { *hi } else { *lo });
                    m != 0
                })
            }) {
                return s;
            }
        }
    }
    0
}

/// Depth of the deepest complete tree whose every node splits the surviving
/// functions by a pair of distinct labels (`multiclass`) or by sign.
pub fn ldim_oracle(rows: &[Vec<f64>], multiclass: bool) -> usize {
    let mut memo = HashMap::new();
    let all = (0..rows.len()).fold(0u64, |m, f| m | 1 << f);
    tree_oracle(all, usize::MAX, &mut memo, &|v| {
        let n = rows[0].len();
        let mut out = Vec::new();
        for i in 0..n {
            let labels = distinct((0..rows.len()).filter(|f| v >> f & 1 == 1).map(|f| rows[f][i]).collect());
            let pairs: Vec<(f64, f64)> = if multiclass {
                labels.iter().flat_map(|a| labels.iter().filter(move |b| a < *b).map(move |b| (*a, *b))).collect()
            } else {
                vec![(-1.0, 1.0)]
            };
            for (a, b) in pairs {
                let side = |l: f64| (0..rows.len()).filter(|f| v >> f & 1 == 1 && rows[*f][i] == l).fold(0u64, |m, f| m | 1 << f);
                out.push((side(a), side(b)));
            }
        }
        out
    })
}

/// Sequential fat-shattering with witnesses on the dense grid, capped at `depth`.
pub fn seq_fat_oracle(rows: &[Vec<f64>], gamma: f64, depth: usize) -> usize {
    let mut memo = HashMap::new();
    let all = (0..rows.len()).fold(0u64, |m, f| m | 1 << f);
    tree_oracle(all, depth, &mut memo, &|v| {
        let mut out = Vec::new();
        for i in 0..rows[0].len() {
            for r in dense_witnesses() {
                let side = |below: bool| {
                    (0..rows.len())
                        .filter(|f| v >> f & 1 == 1)
                        .filter(|f| if below { rows[*f][i] <= r - gamma + TOL } else { rows[*f][i] >= r + gamma - TOL })
                        .fold(0u64, |m, f| m | 1 << f)
                };
                out.push((side(true), side(false)));
            }
        }
        out
    })
}

fn tree_oracle(
    v: u64,
    budget: usize,
    memo: &mut HashMap<(u64, usize), usize>,
    splits: &dyn Fn(u64) -> Vec<(u64, u64)>,
) -> usize {
    if budget == 0 {
        return 0;
    }
    if let Some(d) = memo.get(&(v, budget)) {
        return *d;
    }
    let mut best = 0;
    for (a, b) in splits(v) {
        if a == 0 || b == 0 {
            continue;
        }
        let d = 1 + tree_oracle(a, budget - 1, memo, splits).min(tree_oracle(b, budget - 1, memo, splits));
        best = best.max(d);
        if best == budget {
            break;
        }
    }
    memo.insert((v, budget), best);
    best
}
