use serde::{Deserialize, Serialize};

use crate::domain::{FunctionClass, InstanceId};
use crate::error::{MorError, Result};

/// Slack used when comparing a value against a witness margin.
pub const MARGIN_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimKind {
    Vc,
    Natarajan,
    Littlestone,
    McLittlestone,
    Fat,
    SeqFat,
}

impl DimKind {
    /// Does value `v` fall on `side` of the witness `w`?
    ///
    /// Label kinds compare against `w[side]` exactly; margin kinds need
    /// `v <= w[0] - gamma` (side 0) or `v >= w[1] + gamma` (side 1).
    pub fn side_holds(self, w: [f64; 2], gamma: f64, v: f64, side: usize) -> bool {
        match self {
            DimKind::Fat | DimKind::SeqFat => {
                if side == 0 {
                    v <= w[0] - gamma + MARGIN_EPS
                } else {
                    v >= w[1] + gamma - MARGIN_EPS
                }
            }
            _ => v == w[side],
        }
    }
}

/// One shattering pattern (bit i = side at point i) and a function realizing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternWitness {
    pub pattern: u64,
    pub function: usize,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal { x: InstanceId, witness: [f64; 2], children: Box<[TreeNode; 2]> },
    Leaf { function: usize, name: String },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { children, .. } => 1 + children[0].depth().min(children[1].depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShatterCertificate {
    Set {
        kind: DimKind,
        gamma: f64,
        points: Vec<InstanceId>,
        /// Per point: the two label values (label kinds) or `[r, r]` (margin kinds).
        witness: Vec<[f64; 2]>,
        patterns: Vec<PatternWitness>,
    },
    Tree { kind: DimKind, gamma: f64, root: TreeNode },
}

impl ShatterCertificate {
    pub fn kind(&self) -> DimKind {
        match self {
            ShatterCertificate::Set { kind, .. } | ShatterCertificate::Tree { kind, .. } => *kind,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ShatterCertificate::Set { points, .. } => points.len(),
            ShatterCertificate::Tree { root, .. } => root.depth(),
        }
    }

    /// Re-check the certificate against `class`. Returns the certified size.
    pub fn replay(&self, class: &FunctionClass) -> Result<usize> {
        let scalar = |f: usize, x: InstanceId| -> Result<f64> { Ok(class.value(f, x)?.get(0)) };
        match self {
            ShatterCertificate::Set { kind, gamma, points, witness, patterns } => {
                let d = points.len();
                if witness.len() != d {
                    return Err(MorError::Parameter("witness length differs from the set".into()));
                }
                if matches!(kind, DimKind::Natarajan | DimKind::Vc)
                    && witness.iter().any(|w| w[0] == w[1])
                {
                    return Err(MorError::Parameter("witness labels must differ".into()));
                }
                let mut seen = vec![false; 1usize << d];
                for p in patterns {
                    for (i, x) in points.iter().enumerate() {
                        let side = (p.pattern >> i & 1) as usize;
                        if !kind.side_holds(witness[i], *gamma, scalar(p.function, *x)?, side) {
                            return Err(MorError::Parameter(format!(
                                "function {} does not realize pattern {:b}",
                                p.name, p.pattern
                            )));
                        }
                    }
                    seen[p.pattern as usize] = true;
                }
                if seen.iter().all(|s| *s) {
                    Ok(d)
                } else {
                    Err(MorError::Parameter("some pattern has no realizing function".into()))
                }
            }
            ShatterCertificate::Tree { kind, gamma, root } => {
                let d = root.depth();
                replay_tree(*kind, *gamma, root, &mut Vec::new(), &scalar)?;
                Ok(d)
            }
        }
    }
}

fn replay_tree(
    kind: DimKind,
    gamma: f64,
    node: &TreeNode,
    path: &mut Vec<(InstanceId, [f64; 2], usize)>,
    value: &dyn Fn(usize, InstanceId) -> Result<f64>,
) -> Result<()> {
    match node {
        TreeNode::Leaf { function, name } => {
            for (x, w, side) in path.iter() {
                if !kind.side_holds(*w, gamma, value(*function, *x)?, *side) {
                    return Err(MorError::Parameter(format!("leaf function {name} leaves its path at {x}")));
                }
            }
            Ok(())
        }
        TreeNode::Internal { x, witness, children } => {
            if matches!(kind, DimKind::Littlestone | DimKind::McLittlestone) && witness[0] == witness[1] {
                return Err(MorError::Parameter("edge labels must differ".into()));
            }
            for (side, child) in children.iter().enumerate() {
                path.push((*x, *witness, side));
                replay_tree(kind, gamma, child, path, value)?;
                path.pop();
            }
            Ok(())
        }
    }
}
