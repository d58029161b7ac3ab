//! Combinatorial dimensions of finite scalar classes, computed exactly with
//! replayable certificates, plus a Monte-Carlo Rademacher estimator.
//!
//! Fat-shattering witnesses are searched on the grid of realized values and
//! their pairwise midpoints. Only the order of values against the witness
//! matters: if some `r` separates `L = {f <= r - gamma}` from
//! `U = {f >= r + gamma}`, then with `a` the largest realized value in `L` and
//! `b` the smallest in `U`, the midpoint `(a + b) / 2` keeps both sides at
//! least as large.

mod bitset;
mod certificate;
mod rademacher;
mod search;

pub use bitset::FnSet;
pub use certificate::{DimKind, PatternWitness, ShatterCertificate, TreeNode, MARGIN_EPS};
pub use rademacher::{empirical_rademacher_exact, rademacher_estimate, RademacherEstimate};
pub use search::{point_options, SplitOption, TreeOracle};

use serde::Serialize;

use crate::domain::{FunctionClass, LabelKind};
use crate::error::{MorError, Result};
use search::{largest_shattered_set, require_scalar};

/// Default depth cap for the sequential fat-shattering search.
pub const DEFAULT_SEQ_FAT_DEPTH: usize = 4;

pub fn vc(class: &FunctionClass) -> Result<(usize, ShatterCertificate)> {
    require_scalar(class, Some(LabelKind::Binary))?;
    Ok(largest_shattered_set(class, DimKind::Vc, 0.0))
}

pub fn natarajan(class: &FunctionClass) -> Result<(usize, ShatterCertificate)> {
    require_scalar(class, None)?;
    Ok(largest_shattered_set(class, DimKind::Natarajan, 0.0))
}

pub fn littlestone(class: &FunctionClass) -> Result<(usize, ShatterCertificate)> {
    require_scalar(class, Some(LabelKind::Binary))?;
    Ok(tree_dim(class, DimKind::Littlestone, 0.0, usize::MAX))
}

pub fn mc_littlestone(class: &FunctionClass) -> Result<(usize, ShatterCertificate)> {
    require_scalar(class, None)?;
    Ok(tree_dim(class, DimKind::McLittlestone, 0.0, usize::MAX))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(MorError::Parameter(format!("gamma = {gamma} is outside (0,1)")))
    }
}

pub fn fat_shattering(class: &FunctionClass, gamma: f64) -> Result<(usize, ShatterCertificate)> {
    require_scalar(class, Some(LabelKind::Real))?;
    check_gamma(gamma)?;
    Ok(largest_shattered_set(class, DimKind::Fat, gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeqFatResult {
    pub value: usize,
    pub truncated: bool,
    pub certificate: ShatterCertificate,
}

/// Sequential fat-shattering dimension, searched up to `max_depth`.
/// `truncated` is set when the search reached the cap.
pub fn seq_fat_shattering(class: &FunctionClass, gamma: f64, max_depth: usize) -> Result<SeqFatResult> {
    require_scalar(class, Some(LabelKind::Real))?;
    check_gamma(gamma)?;
    let (value, certificate) = tree_dim(class, DimKind::SeqFat, gamma, max_depth);
    Ok(SeqFatResult { value, truncated: value >= max_depth, certificate })
}

fn tree_dim(class: &FunctionClass, kind: DimKind, gamma: f64, budget: usize) -> (usize, ShatterCertificate) {
    let mut oracle = TreeOracle::new(class, kind, gamma);
    let full = oracle.full();
    let d = oracle.capped(&full, budget);
    debug_assert!(d as f64 <= (class.len() as f64).log2() + 1e-9);
    (d, oracle.certificate(budget))
}
