//! Losses on label vectors and their algebraic properties over finite label grids.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{LabelKind, LabelVec};
use crate::error::{MorError, Result};

/// Scalar link applied to `|y1 - y2|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "psi", rename_all = "snake_case")]
pub enum Psi {
    Identity,
    Power { p: f64 },
    Huber { delta: f64 },
}

impl Psi {
    pub fn value(&self, z: f64) -> f64 {
        let z = z.abs();
        match self {
            Psi::Identity => z,
            Psi::Power { p } => z.powf(*p),
            Psi::Huber { delta } => {
                if z <= *delta {
                    z * z / 2.0
                } else {
                    delta * (z - delta / 2.0)
                }
            }
        }
    }

    /// Lipschitz constant on `[0, span]`.
    pub fn lipschitz(&self, span: f64) -> f64 {
        match self {
            Psi::Identity => 1.0,
            Psi::Power { p } => p * span.powf(p - 1.0),
            Psi::Huber { delta } => delta.min(span),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Psi::Power { p } if !(*p >= 1.0) => {
                Err(MorError::Parameter(format!("power psi needs p >= 1, got {p}")))
            }
            Psi::Huber { delta } if !(*delta > 0.0) => {
                Err(MorError::Parameter(format!("huber delta must be positive, got {delta}")))
            }
            _ => Ok(()),
        }
    }

    /// Checks psi(0) = 0, the Lipschitz constant and monotonicity on `grid`.
    pub fn check_assumptions(&self, grid: &[f64], span: f64) -> PsiCheck {
        let l = self.lipschitz(span);
        let mut lipschitz_ok = true;
        let mut monotone = true;
        for a in grid {
            for b in grid {
                let (va, vb) = (self.value(*a), self.value(*b));
                if (va - vb).abs() > l * (a - b).abs() + 1e-12 {
                    lipschitz_ok = false;
                }
                if a < b && va > vb + 1e-15 {
                    monotone = false;
                }
            }
        }
        PsiCheck { zero_at_origin: self.value(0.0) == 0.0, lipschitz: l, lipschitz_ok, monotone }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiCheck {
    pub zero_at_origin: bool,
    pub lipschitz: f64,
    pub lipschitz_ok: bool,
    pub monotone: bool,
}

/// Exponent of an ℓp norm. `PNorm::INF` is the max-norm, never a large finite p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PNorm(f64);

impl PNorm {
    pub const INF: PNorm = PNorm(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(PNorm(p))
        } else {
            Err(MorError::Parameter(format!("p must be at least 1, got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    pub fn norm(self, diffs: impl Iterator<Item = f64>) -> f64 {
        if self.is_inf() {
            diffs.map(f64::abs).fold(0.0, f64::max)
        } else if self.0 == 1.0 {
            diffs.map(f64::abs).sum()
        } else {
            diffs.map(|d| d.abs().powf(self.0)).sum::<f64>().powf(1.0 / self.0)
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PNorm;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number >= 1 or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<PNorm, E> {
                PNorm::new(v).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<PNorm, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<PNorm, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<PNorm, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(PNorm::INF),
                    _ => v.parse::<f64>().map_err(E::custom).and_then(|p| self.visit_f64(p)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Loss given by an explicit table over a finite label set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomTable {
    pub labels: Vec<LabelVec>,
    pub values: Vec<Vec<f64>>,
}

impl CustomTable {
    pub fn from_fn(labels: Vec<LabelVec>, f: impl Fn(&LabelVec, &LabelVec) -> f64) -> Self {
        let values = labels.iter().map(|a| labels.iter().map(|b| f(a, b)).collect()).collect();
        CustomTable { labels, values }
    }

    fn position(&self, y: &LabelVec) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == y)
            .ok_or_else(|| MorError::Parameter(format!("label {y} is not in the custom loss table")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    Hamming,
    D1,
    Dp { p: f64 },
    PsiD1 {
        #[serde(flatten)]
        psi: Psi,
    },
    DecomposableSum { psis: Vec<Psi> },
    Lp { p: PNorm },
    Custom(CustomTable),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossSpec {
    pub kind: LossKind,
}

/// Properties of a loss verified on a finite label set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossProperties {
    pub bound: f64,
    pub identity_of_indiscernibles: bool,
    pub subadditivity_c: Option<f64>,
    pub hamming_equivalence: Option<(f64, f64)>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec { kind }
    }

    pub fn hamming() -> Self {
        Self::new(LossKind::Hamming)
    }

    pub fn zero_one() -> Self {
        Self::new(LossKind::ZeroOne)
    }

    pub fn d1() -> Self {
        Self::new(LossKind::D1)
    }

    pub fn lp(p: f64) -> Result<Self> {
        Ok(Self::new(LossKind::Lp { p: PNorm::new(p)? }))
    }

    pub fn linf() -> Self {
        Self::new(LossKind::Lp { p: PNorm::INF })
    }

    pub fn psi_d1(psi: Psi) -> Self {
        Self::new(LossKind::PsiD1 { psi })
    }

    pub fn decomposable(psis: Vec<Psi>) -> Self {
        Self::new(LossKind::DecomposableSum { psis })
    }

    pub fn custom(table: CustomTable) -> Self {
        Self::new(LossKind::Custom(table))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            LossKind::Dp { p } if !(*p >= 1.0) => {
                Err(MorError::Parameter(format!("d_p needs p >= 1, got {p}")))
            }
            LossKind::PsiD1 { psi } => psi.validate(),
            LossKind::DecomposableSum { psis } => psis.iter().try_for_each(Psi::validate),
            LossKind::Custom(t) => {
                if t.values.len() != t.labels.len() || t.values.iter().any(|r| r.len() != t.labels.len()) {
                    return Err(MorError::Parameter("custom loss table is not square".into()));
                }
                if t.values.iter().flatten().any(|v| !(*v >= 0.0)) {
                    return Err(MorError::Parameter("custom loss has negative entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, y1: &LabelVec, y2: &LabelVec) -> Result<f64> {
        if y1.len() != y2.len() {
            return Err(MorError::Arity { expected: y1.len(), found: y2.len() });
        }
        let a = y1.as_slice();
        let b = y2.as_slice();
        let scalar = |name: &str| -> Result<()> {
            if a.len() != 1 {
                Err(MorError::Parameter(format!("{name} is defined on scalar labels, got K = {}", a.len())))
            } else {
                Ok(())
            }
        };
        Ok(match &self.kind {
            LossKind::ZeroOne => (y1 != y2) as u8 as f64,
            LossKind::Hamming => a.iter().zip(b).filter(|(u, v)| u != v).count() as f64,
            LossKind::D1 => {
                scalar("d1")?;
                (a[0] - b[0]).abs()
            }
            LossKind::Dp { p } => {
                scalar("d_p")?;
                if !(*p >= 1.0) {
                    return Err(MorError::Parameter(format!("d_p needs p >= 1, got {p}")));
                }
                (a[0] - b[0]).abs().powf(*p)
            }
            LossKind::PsiD1 { psi } => {
                scalar("psi_d1")?;
                psi.value(a[0] - b[0])
            }
            LossKind::DecomposableSum { psis } => {
                if psis.len() != a.len() {
                    return Err(MorError::Arity { expected: psis.len(), found: a.len() });
                }
                psis.iter().zip(a.iter().zip(b)).map(|(psi, (u, v))| psi.value(u - v)).sum()
            }
            LossKind::Lp { p } => p.norm(a.iter().zip(b).map(|(u, v)| u - v)),
            LossKind::Custom(t) => t.values[t.position(y1)?][t.position(y2)?],
        })
    }

    /// Supremum of the loss over labels of dimension `k` and the given kind.
    pub fn bound(&self, k: usize, kind: LabelKind) -> f64 {
        let s = kind.span();
        match &self.kind {
            LossKind::ZeroOne => 1.0,
            LossKind::Hamming => k as f64,
            LossKind::D1 => s,
            LossKind::Dp { p } => s.powf(*p),
            LossKind::PsiD1 { psi } => psi.value(s),
            LossKind::DecomposableSum { psis } => psis.iter().map(|p| p.value(s)).sum(),
            LossKind::Lp { p } => p.norm(std::iter::repeat_n(s, k)),
            LossKind::Custom(t) => t.values.iter().flatten().copied().fold(0.0, f64::max),
        }
    }

    pub fn lipschitz(&self, kind: LabelKind) -> Option<f64> {
        match &self.kind {
            LossKind::D1 => Some(1.0),
            LossKind::PsiD1 { psi } => Some(psi.lipschitz(kind.span())),
            LossKind::DecomposableSum { psis } => {
                Some(psis.iter().map(|p| p.lipschitz(kind.span())).fold(0.0, f64::max))
            }
            _ => None,
        }
    }

    /// Kinds that are distances and therefore 1-subadditive.
    pub fn is_metric(&self) -> bool {
        matches!(self.kind, LossKind::ZeroOne | LossKind::Hamming | LossKind::D1 | LossKind::Lp { .. })
            || matches!(self.kind, LossKind::Dp { p } if p == 1.0)
    }

    /// Scalar loss on coordinate `k` for losses that split across coordinates.
    pub fn coordinate_loss(&self, k: usize) -> Option<LossSpec> {
        match &self.kind {
            LossKind::Hamming => Some(LossSpec::zero_one()),
            LossKind::DecomposableSum { psis } => psis.get(k).map(|p| LossSpec::psi_d1(p.clone())),
            LossKind::Lp { p } if p.value() == 1.0 => Some(LossSpec::d1()),
            _ => None,
        }
    }

    pub fn is_decomposable(&self) -> bool {
        matches!(self.kind, LossKind::Hamming | LossKind::DecomposableSum { .. })
            || matches!(self.kind, LossKind::Lp { p } if p.value() == 1.0)
    }

    pub fn properties(&self, labels: &[LabelVec]) -> Result<LossProperties> {
        let bound = max_off_diagonal(self, labels)?.unwrap_or(0.0);
        let ioi = check_identity_of_indiscernibles(self, labels)?;
        let c = if ioi { subadditivity_constant(self, labels).ok() } else { None };
        let ab = if ioi { hamming_equivalence_constants(self, labels).ok() } else { None };
        Ok(LossProperties { bound, identity_of_indiscernibles: ioi, subadditivity_c: c, hamming_equivalence: ab })
    }
}

fn max_off_diagonal(loss: &LossSpec, labels: &[LabelVec]) -> Result<Option<f64>> {
    let mut m: Option<f64> = None;
    for a in labels {
        for b in labels {
            if a != b {
                let v = loss.evaluate(a, b)?;
                m = Some(m.map_or(v, |m| m.max(v)));
            }
        }
    }
    Ok(m)
}

fn min_off_diagonal(loss: &LossSpec, labels: &[LabelVec]) -> Result<Option<f64>> {
    let mut m: Option<f64> = None;
    for a in labels {
        for b in labels {
            if a != b {
                let v = loss.evaluate(a, b)?;
                m = Some(m.map_or(v, |m| m.min(v)));
            }
        }
    }
    Ok(m)
}

/// True iff `loss(a, b) = 0` exactly when `a = b`, over all pairs of `labels`.
pub fn check_identity_of_indiscernibles(loss: &LossSpec, labels: &[LabelVec]) -> Result<bool> {
    for a in labels {
        for b in labels {
            if (loss.evaluate(a, b)? == 0.0) != (a == b) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn require_nondegenerate(loss: &LossSpec, labels: &[LabelVec]) -> Result<()> {
    if let Some(m) = min_off_diagonal(loss, labels)? {
        if m == 0.0 {
            return Err(MorError::DegenerateLoss(
                "the loss vanishes on a pair of distinct labels".into(),
            ));
        }
    }
    Ok(())
}

/// Smallest c with `l(y1,y2) <= c l(y1,y) + l(y,y2)` over all triples.
///
/// Metric kinds return 1 after a verification pass over every triple; other
/// kinds are searched exhaustively. With at most one label the value is 1.
pub fn subadditivity_constant(loss: &LossSpec, labels: &[LabelVec]) -> Result<f64> {
    require_nondegenerate(loss, labels)?;
    if loss.is_metric() && triangle_holds(loss, labels, 1.0)? {
        return Ok(1.0);
    }
    minimal_c(loss, labels)
}

fn triangle_holds(loss: &LossSpec, labels: &[LabelVec], c: f64) -> Result<bool> {
    for a in labels {
        for b in labels {
            let lab = loss.evaluate(a, b)?;
            for y in labels {
                if lab > c * loss.evaluate(a, y)? + loss.evaluate(y, b)? + 1e-12 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn minimal_c(loss: &LossSpec, labels: &[LabelVec]) -> Result<f64> {
    // y = y2 with y1 != y2 forces c >= 1
    let mut c: f64 = if labels.len() > 1 { 1.0 } else { 0.0 };
    for a in labels {
        for b in labels {
            let lab = loss.evaluate(a, b)?;
            for y in labels {
                if y == a {
                    continue;
                }
                let need = (lab - loss.evaluate(y, b)?) / loss.evaluate(a, y)?;
                c = c.max(need);
            }
        }
    }
    Ok(c)
}

/// Best `(a, b)` with `a l_H <= l <= b l_H` over distinct pairs of `labels`.
pub fn hamming_equivalence_constants(loss: &LossSpec, labels: &[LabelVec]) -> Result<(f64, f64)> {
    require_nondegenerate(loss, labels)?;
    let h = LossSpec::hamming();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for a in labels {
        for b in labels {
            if a == b {
                continue;
            }
            let r = loss.evaluate(a, b)? / h.evaluate(a, b)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if lo.is_infinite() {
        return Ok((1.0, 1.0));
    }
    Ok((lo, hi))
}

/// Every vector in `values^k`, lexicographic.
pub fn grid(values: &[f64], k: usize) -> Vec<LabelVec> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(LabelVec::new).collect()
}
