use rand::Rng as _;
use serde::Serialize;

use crate::dimensions::{DimKind, ShatterCertificate, TreeNode};
use crate::domain::{Example, FunctionClass, LabelVec, Stream};
use crate::error::{MorError, Result};
use crate::rng::SeedSpec;

/// One root-to-depth-`T` path through a shattered tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreePath {
    /// `true` when the path takes the upper branch.
    pub sigma: Vec<bool>,
    /// Label trees: the branch label. Margin trees: the value of the function
    /// at the leaf below the path.
    pub stream: Stream,
    /// `+1` for the upper branch, `-1` for the lower.
    pub signs: Vec<f64>,
    /// Witness along the path: `r_t` for margin trees, the midpoint of the two
    /// branch labels otherwise.
    pub thresholds: Vec<f64>,
    /// Function realizing the path.
    pub function: usize,
}

fn tree_root(cert: &ShatterCertificate, horizon: usize) -> Result<(DimKind, &TreeNode)> {
    match cert {
        ShatterCertificate::Tree { kind, root, .. } => {
            if root.depth() < horizon {
                return Err(MorError::Parameter(format!(
                    "tree of depth {} cannot drive {horizon} rounds",
                    root.depth()
                )));
            }
            Ok((*kind, root))
        }
        ShatterCertificate::Set { .. } => Err(MorError::Parameter("adversary needs a tree certificate".into())),
    }
}

fn walk(kind: DimKind, root: &TreeNode, class: &FunctionClass, sigma: &[bool]) -> Result<TreePath> {
    let mut node = root;
    let mut steps = Vec::with_capacity(sigma.len());
    for s in sigma {
        match node {
            TreeNode::Internal { x, witness, children } => {
                steps.push((*x, *witness, *s));
                node = &children[*s as usize];
            }
            TreeNode::Leaf { .. } => unreachable!("depth was checked"),
        }
    }
    let function = loop {
        match node {
            TreeNode::Internal { children, .. } => node = &children[0],
            TreeNode::Leaf { function, .. } => break *function,
        }
    };
    let margin = matches!(kind, DimKind::Fat | DimKind::SeqFat);
    let mut rounds = Vec::with_capacity(steps.len());
    let mut thresholds = Vec::with_capacity(steps.len());
    for (x, w, s) in &steps {
        let y = if margin { class.value(function, *x)?.get(0) } else { w[*s as usize] };
        rounds.push(Example { x: *x, y: LabelVec::scalar(y) });
        thresholds.push(if margin { w[0] } else { (w[0] + w[1]) / 2.0 });
    }
    Ok(TreePath {
        sigma: sigma.to_vec(),
        stream: Stream::new(rounds),
        signs: sigma.iter().map(|s| if *s { 1.0 } else { -1.0 }).collect(),
        thresholds,
        function,
    })
}

/// Stream along a uniformly random path of a shattered tree.
pub fn shattered_tree_adversary(
    cert: &ShatterCertificate,
    class: &FunctionClass,
    horizon: usize,
    seed: &SeedSpec,
) -> Result<TreePath> {
    let (kind, root) = tree_root(cert, horizon)?;
    let mut rng = seed.child("adversary").rng();
    let sigma: Vec<bool> = (0..horizon).map(|_| rng.gen()).collect();
    walk(kind, root, class, &sigma)
}

/// All `2^T` paths, in binary order of `sigma` (first round is the low bit).
pub fn tree_paths(cert: &ShatterCertificate, class: &FunctionClass, horizon: usize) -> Result<Vec<TreePath>> {
    let (kind, root) = tree_root(cert, horizon)?;
    if horizon > 20 {
        return Err(MorError::Parameter("path enumeration is limited to T <= 20".into()));
    }
    (0..1u32 << horizon)
        .map(|code| {
            let sigma: Vec<bool> = (0..horizon).map(|t| code >> t & 1 == 1).collect();
            walk(kind, root, class, &sigma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimensions::{littlestone, seq_fat_shattering};
    use crate::domain::LabelKind;
    use crate::losses::LossSpec;
    use crate::online::{expected_cumulative_loss, FixedFunction, Mcsoa, McsoaTable};

    fn full_binary(n: u64) -> FunctionClass {
        FunctionClass::from_fn("full", (0..n).collect(), LabelKind::Binary, 1 << n, |f, x| {
            vec![if f >> x & 1 == 1 { 1.0 } else { -1.0 }]
        })
        .unwrap()
    }

    #[test]
    fn one_round_expected_mistake_is_half() {
        let c = full_binary(1);
        let (_, cert) = littlestone(&c).unwrap();
        let paths = tree_paths(&cert, &c, 1).unwrap();
        for f in 0..c.len() {
            let total: f64 = paths
                .iter()
                .map(|p| expected_cumulative_loss(&mut FixedFunction::from_class(&c, f), &p.stream, &LossSpec::zero_one()).unwrap())
                .sum();
            assert_eq!(total / paths.len() as f64, 0.5);
        }
    }

    #[test]
    fn mcsoa_pays_half_per_round() {
        let c = full_binary(3);
        let (d, cert) = littlestone(&c).unwrap();
        assert_eq!(d, 3);
        let table = McsoaTable::new(&c).unwrap();
        let paths = tree_paths(&cert, &c, 3).unwrap();
        let mean: f64 = paths
            .iter()
            .map(|p| expected_cumulative_loss(&mut Mcsoa::new(table.clone()), &p.stream, &LossSpec::zero_one()).unwrap())
            .sum::<f64>()
            / 8.0;
        assert!(mean >= 1.5);
    }

    #[test]
    fn margin_paths_respect_witness() {
        let c = FunctionClass::from_fn("r", vec![0, 1], LabelKind::Real, 4, |f, x| {
            vec![if f >> x & 1 == 1 { 0.9 } else { 0.1 }]
        })
        .unwrap();
        let s = seq_fat_shattering(&c, 0.3, 2).unwrap();
        assert_eq!(s.value, 2);
        for p in tree_paths(&s.certificate, &c, 2).unwrap() {
            for ((e, r), sg) in p.stream.rounds.iter().zip(&p.thresholds).zip(&p.signs) {
                assert!(sg * (e.y.get(0) - r) >= 0.3 - 1e-12);
            }
        }
        assert!(shattered_tree_adversary(&s.certificate, &c, 3, &SeedSpec::new(0)).is_err());
    }
}
