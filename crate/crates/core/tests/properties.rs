mod common;

use std::sync::Arc;

use common::*;
use mor_core::batch::{Concat, Erm, BatchLearner};
use mor_core::dimensions::mc_littlestone;
use mor_core::harness::fit_growth_exponent;
use mor_core::losses::{
    check_identity_of_indiscernibles, grid, hamming_equivalence_constants, subadditivity_constant, CustomTable,
};
use mor_core::online::{
    class_experts, run_game, sample_subset, ConcaveMajorant, Expert, Feedback, FixedFunction, Mcsoa, McsoaTable,
    OnlineLearner, Rewa, SubsampledExpert,
};
use mor_core::{best_risk, exact_risk, Example, FiniteDistribution, LabelKind, LabelVec, LossSpec, Psi, SeedSpec, Stream};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

const GRID5: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn label(v: &[f64]) -> LabelVec {
    LabelVec::new(v.to_vec())
}

fn random_stream(r: &mut rand_chacha::ChaCha8Rng, class: &mor_core::FunctionClass, t: usize, values: &[f64]) -> Stream {
    let xs = class.instances().to_vec();
    Stream::new(
        (0..t)
            .map(|_| {
                let y: Vec<f64> = (0..class.k()).map(|_| *values.choose(r).unwrap()).collect();
                Example::new(*xs.choose(r).unwrap(), y)
            })
            .collect(),
    )
}

fn random_distribution(r: &mut rand_chacha::ChaCha8Rng, class: &mor_core::FunctionClass, n: usize, values: &[f64]) -> FiniteDistribution {
    let xs = class.instances().to_vec();
    let support: Vec<Example> = (0..n)
        .map(|_| {
            let y: Vec<f64> = (0..class.k()).map(|_| *values.choose(r).unwrap()).collect();
            Example::new(*xs.choose(r).unwrap(), y)
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
    let s: f64 = weights.iter().sum();
    FiniteDistribution::from_weighted(support.into_iter().zip(weights.into_iter().map(|w| w / s)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_chain(a in prop::collection::vec(0.0..=1.0f64, 1..=3), seed in any::<u64>()) {
        let mut r = rng(seed);
        let b: Vec<f64> = a.iter().map(|_| r.gen_range(0.0..=1.0)).collect();
        let (ya, yb) = (label(&a), label(&b));
        let k = a.len() as f64;
        let l1 = LossSpec::lp(1.0).unwrap().evaluate(&ya, &yb).unwrap();
        let mut prev = l1;
        for p in [1.5, 2.0, 3.0, f64::INFINITY] {
            let lp = if p.is_infinite() { LossSpec::linf() } else { LossSpec::lp(p).unwrap() };
            let v = lp.evaluate(&ya, &yb).unwrap();
            prop_assert!(v <= l1 + TOL);
            prop_assert!(l1 <= k * v + TOL);
            prop_assert!(v <= prev + TOL);
            prev = v;
        }
    }

    #[test]
    fn decomposable_sum_is_coordinate_sum(a in prop::collection::vec(0.0..=1.0f64, 3), b in prop::collection::vec(0.0..=1.0f64, 3)) {
        let psis = vec![Psi::Identity, Psi::Power { p: 2.0 }, Psi::Huber { delta: 0.3 }];
        let loss = LossSpec::decomposable(psis.clone());
        let want: f64 = psis.iter().zip(a.iter().zip(&b)).map(|(p, (u, v))| p.value((u - v).abs())).sum();
        prop_assert_eq!(loss.evaluate(&label(&a), &label(&b)).unwrap(), want);
    }

    #[test]
    fn subadditivity_is_minimal(seed in any::<u64>(), m in 2usize..=4) {
        let mut r = rng(seed);
        let labels: Vec<LabelVec> = (0..m).map(|i| LabelVec::scalar(i as f64)).collect();
        let vals: Vec<Vec<f64>> =
            (0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { r.gen_range(1..=5) as f64 }).collect()).collect();
        let loss = LossSpec::custom(CustomTable::from_fn(labels.clone(), |a, b| vals[a.get(0) as usize][b.get(0) as usize]));
        prop_assert!(check_identity_of_indiscernibles(&loss, &labels).unwrap());
        let c = subadditivity_constant(&loss, &labels).unwrap();
        let l = |a: &LabelVec, b: &LabelVec| loss.evaluate(a, b).unwrap();
        let mut violated_below = false;
        for a in &labels {
            for b in &labels {
                for y in &labels {
                    prop_assert!(l(a, b) <= c * l(a, y) + l(y, b) + 1e-9);
                    violated_below |= l(a, b) > (c - 1e-9) * l(a, y) + l(y, b);
                }
            }
        }
        prop_assert!(violated_below);
        let off: Vec<f64> = vals.iter().flatten().copied().filter(|v| *v > 0.0).collect();
        let ratio = off.iter().copied().fold(0.0, f64::max) / off.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(c <= ratio + 1e-12);
    }

    #[test]
    fn hamming_sandwich(k in 1usize..=3, p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let labels = grid(&GRID5, k);
        let loss = LossSpec::lp(p).unwrap();
        let (a, b) = hamming_equivalence_constants(&loss, &labels).unwrap();
        prop_assert!(a <= b);
        let h = LossSpec::hamming();
        for y1 in &labels {
            for y2 in &labels {
                let (v, hv) = (loss.evaluate(y1, y2).unwrap(), h.evaluate(y1, y2).unwrap());
                prop_assert!(a * hv <= v + TOL && v <= b * hv + TOL);
            }
        }
        prop_assert_eq!(subadditivity_constant(&loss, &labels).unwrap(), 1.0);
    }

    #[test]
    fn discretization(seed in any::<u64>(), alpha in 0.03..0.6f64) {
        let mut r = rng(seed);
        let values: Vec<f64> = (0..8).map(|_| r.gen_range(0.0..=1.0)).collect();
        let c = random_multi(&mut r, LabelKind::Real, 4, 6, 2, &values);
        let d = c.discretize(alpha).unwrap();
        for f in 0..c.len() {
            for (y, z) in c.row(f).iter().zip(d.row(f)) {
                for (u, v) in y.as_slice().iter().zip(z.as_slice()) {
                    prop_assert!(u - v >= -TOL && u - v <= alpha + TOL, "{} -> {}", u, v);
                }
            }
        }
        let dd = d.discretize(alpha).unwrap();
        for f in 0..d.len() {
            prop_assert_eq!(d.row(f), dd.row(f));
        }
        for k in 0..2 {
            prop_assert!(d.coordinate_image(k).unwrap().len() <= 1 + (1.0 / alpha).floor() as usize);
        }
    }

    #[test]
    fn games_replay_and_repeat(seed in any::<u64>(), t in 1usize..40) {
        let mut r = rng(seed);
        let (nx, nf) = random_sizes(&mut r, 4, 6);
        let c = random_class(&mut r, LabelKind::Binary, nx, nf, &[-1.0, 1.0]);
        let s = random_stream(&mut r, &c, t, &[-1.0, 1.0]);
        let loss = LossSpec::zero_one();
        let play = || {
            let mut l = Rewa::new(class_experts(&c), loss.clone(), 1.0, t, &SeedSpec::new(seed)).unwrap();
            run_game(&mut l, &s, &c, &loss, Feedback::Full).unwrap()
        };
        let (a, b) = (play(), play());
        prop_assert_eq!(&a.rows, &b.rows);
        a.replay(&c, &loss).unwrap();
        let last = a.rows.last().unwrap();
        prop_assert_eq!(last.regret, a.regret);
    }

    #[test]
    fn rewa_weights(seed in any::<u64>(), t in 1usize..60) {
        let mut r = rng(seed);
        let (nx, nf) = random_sizes(&mut r, 4, 8);
        let c = random_class(&mut r, LabelKind::Binary, nx, nf, &[-1.0, 1.0]);
        let s = random_stream(&mut r, &c, t, &[-1.0, 1.0]);
        let mut l = Rewa::new(class_experts(&c), LossSpec::zero_one(), 1.0, t, &SeedSpec::new(seed)).unwrap();
        for e in &s.rounds {
            l.predict(e.x).unwrap();
            l.update_full(e.x, &e.y).unwrap();
            let w = l.weights();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let cum = l.cumulative_losses();
            for i in 0..w.len() {
                for j in 0..w.len() {
                    if cum[i] < cum[j] {
                        prop_assert!(w[i] > w[j]);
                    } else if cum[i] == cum[j] {
                        prop_assert_eq!(w[i], w[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn subset_size_concentrates(seed in any::<u64>(), t in 16usize..2000, beta in 0.2..0.8f64) {
        let b = sample_subset(t, beta, &mut SeedSpec::new(seed).rng()).iter().filter(|v| **v).count() as f64;
        let p = (t as f64).powf(beta) / t as f64;
        let sd = (t as f64 * p * (1.0 - p)).sqrt();
        prop_assert!((b - (t as f64).powf(beta)).abs() <= 5.0 * sd, "|B| = {} at T = {} beta = {}", b, t, beta);
    }

    #[test]
    fn update_log_matches_subset(seed in any::<u64>(), t in 1usize..30) {
        let mut r = rng(seed);
        let c = random_class(&mut r, LabelKind::Binary, 3, 4, &[-1.0, 1.0]);
        let subset: Vec<bool> = (0..t).map(|_| r.gen()).collect();
        let phi: Vec<LabelVec> = subset.iter().filter(|b| **b).map(|_| LabelVec::scalar(if r.gen() { 1.0 } else { -1.0 })).collect();
        let xs: Vec<u64> = (0..t).map(|_| r.gen_range(0..3)).collect();
        let mut e = SubsampledExpert::plain(Box::new(FixedFunction::from_class(&c, 0)), Arc::new(subset.clone()), phi.clone());
        for (i, x) in xs.iter().enumerate() {
            e.advise(i, *x).unwrap();
            e.observe(i, *x, Some(&LabelVec::scalar(1.0))).unwrap();
        }
        let want: Vec<Example> = xs
            .iter()
            .zip(&subset)
            .filter(|(_, b)| **b)
            .zip(&phi)
            .map(|((x, _), y)| Example { x: *x, y: y.clone() })
            .collect();
        prop_assert_eq!(e.update_log(), want.as_slice());
    }

    #[test]
    fn concat_excess_is_bounded_by_coordinates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_multi(&mut r, LabelKind::Binary, 3, 5, 2, &[-1.0, 1.0]);
        let d = random_distribution(&mut r, &c, 6, &[-1.0, 1.0]);
        let ham = LossSpec::hamming();
        let parts: Vec<Arc<dyn BatchLearner>> = (0..2)
            .map(|k| Arc::new(Erm::agnostic(Arc::new(c.restrict(k).unwrap()), LossSpec::zero_one())) as Arc<dyn BatchLearner>)
            .collect();
        let sample = d.sample(r.gen_range(1..30), &mut r);
        let h = Concat::new(parts).unwrap().fit(&sample).unwrap();
        let excess = exact_risk(&h, &d, &ham).unwrap() - best_risk(&c, &d, &ham).unwrap().0;
        let mut sum = 0.0;
        for k in 0..2 {
            let (ck, dk, z) = (c.restrict(k).unwrap(), d.marginal(k).unwrap(), LossSpec::zero_one());
            sum += exact_risk(&h.coordinate(k).unwrap(), &dk, &z).unwrap() - best_risk(&ck, &dk, &z).unwrap().0;
        }
        prop_assert!(excess <= sum + TOL, "{} > {}", excess, sum);
    }

    #[test]
    fn majorant_dominates_and_is_concave(pts in prop::collection::vec((1.0..100.0f64, 0.0..50.0f64), 1..12)) {
        let m = ConcaveMajorant::fit(&pts).unwrap();
        for (t, r) in &pts {
            prop_assert!(m.eval(*t) >= r - 1e-9);
        }
        let k = m.knots();
        let slopes: Vec<f64> = k.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        prop_assert!(slopes.windows(2).all(|s| s[1] <= s[0] + 1e-9), "{:?}", slopes);
        for (t, r) in k {
            prop_assert!(pts.iter().any(|p| p.0 == *t && p.1 == *r));
        }
    }

    #[test]
    fn exponent_recovery(a in 0.1..1.5f64, scale in 0.01..100.0f64) {
        let pairs: Vec<(f64, f64)> = [16.0, 32.0, 64.0, 128.0].iter().map(|t: &f64| (*t, scale * t.powf(a))).collect();
        let fit = fit_growth_exponent(&pairs).unwrap();
        prop_assert!((fit.exponent - a).abs() < 1e-6);
        prop_assert!(fit.ci_low <= a + 1e-6 && a - 1e-6 <= fit.ci_high);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mcsoa_mistakes_bounded_on_every_realizable_stream(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nx = r.gen_range(1..=3usize);
        let nf = r.gen_range(1..=8usize);
        let c = random_class(&mut r, LabelKind::Real, nx, nf, &[0.0, 0.5, 1.0]);
        let d = mc_littlestone(&c).unwrap().0;
        let table = McsoaTable::new(&c).unwrap();
        prop_assert_eq!(table.dim(), d);
        let loss = LossSpec::zero_one();
        for depth in 1..=4u32 {
            for code in 0..(nx as u64).pow(depth) {
                let xs: Vec<u64> = (0..depth).map(|t| code / (nx as u64).pow(t) % nx as u64).collect();
                for f in 0..c.len() {
                    let s = Stream::new(xs.iter().map(|x| Example { x: *x, y: c.value(f, *x).unwrap().clone() }).collect());
                    let mut l = Mcsoa::new(table.clone());
                    let tr = run_game(&mut l, &s, &c, &loss, Feedback::Full).unwrap();
                    prop_assert!(tr.cum_loss <= d as f64, "{} mistakes with d = {}", tr.cum_loss, d);
                }
            }
        }
    }
}
