//! Belief-function machinery over small frames of discernment.
//!
//! Subsets of a frame with `n` singletons are encoded as `n`-bit masks, and a
//! [`MassFunction`] stores one mass per subset (dense, `2^n` entries). Frames
//! are capped at 16 singletons; everything here enumerates subsets exhaustively.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_SINGLETONS: usize = 16;

/// Normalization tolerance checked by the invariants.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Constructors renormalize sums within this distance of 1 and reject the rest.
pub const RENORM_TOLERANCE: f64 = 1e-6;

/// Scores closer than this are treated as tied by [`appriou_decide`].
const TIE_TOLERANCE: f64 = 1e-12;

/// A subset of a frame, as a bitmask over singleton indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subset(u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub const fn from_bits(bits: u32) -> Self {
        Subset(bits)
    }

    pub fn singleton(index: usize) -> Self {
        assert!(index < MAX_SINGLETONS, "singleton index {index} out of range");
        Subset(1 << index)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn cardinality(self) -> u32 {
        self.0.count_ones()
    }

    pub const fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub const fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub const fn intersects(self, other: Subset) -> bool {
        self.0 & other.0 != 0
    }

    pub const fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{:#b}}}", self.0)
    }
}

/// Frame of discernment: an ordered list of mutually exclusive hypotheses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    names: Vec<String>,
}

impl Frame {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() || names.len() > MAX_SINGLETONS {
            return Err(Error::InvalidArgument(format!(
                "frame must have between 1 and {MAX_SINGLETONS} singletons, got {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate singleton name '{name}'"
                )));
            }
        }
        Ok(Frame { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of subsets, `2^n`.
    pub fn power_set_size(&self) -> usize {
        1usize << self.names.len()
    }

    pub fn omega(&self) -> Subset {
        Subset(((1u64 << self.names.len()) - 1) as u32)
    }

    pub fn singleton_named(&self, name: &str) -> Option<Subset> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(Subset::singleton)
    }

    pub fn contains(&self, a: Subset) -> bool {
        a.is_subset_of(self.omega())
    }

    /// All subsets including the empty set, in bitmask order.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> {
        (0..self.power_set_size() as u32).map(Subset)
    }

    pub fn singletons(&self) -> impl Iterator<Item = Subset> {
        (0..self.names.len()).map(Subset::singleton)
    }

    fn check(&self, a: Subset) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "subset {a} is outside a frame of {} singletons",
                self.len()
            )))
        }
    }
}

/// A basic belief assignment over a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MassFunction {
    frame: Arc<Frame>,
    masses: Vec<f64>,
}

impl MassFunction {
    /// Builds a closed-world mass function from a dense mass vector indexed
    /// by subset bitmask.
    pub fn new(frame: Arc<Frame>, masses: Vec<f64>) -> Result<Self> {
        if masses.first().copied().unwrap_or(0.0) != 0.0 {
            return Err(Error::InvalidArgument(
                "closed world: mass of the empty set must be 0".into(),
            ));
        }
        Self::with_conflict(frame, masses)
    }

    /// Builds a mass function from `(subset, mass)` pairs; repeated subsets add up.
    pub fn from_focal(frame: Arc<Frame>, focal: &[(Subset, f64)]) -> Result<Self> {
        let mut masses = vec![0.0; frame.power_set_size()];
        for &(a, m) in focal {
            frame.check(a)?;
            masses[a.index()] += m;
        }
        Self::new(frame, masses)
    }

    /// Total ignorance: all mass on the whole frame.
    pub fn vacuous(frame: Arc<Frame>) -> Self {
        let mut masses = vec![0.0; frame.power_set_size()];
        masses[frame.omega().index()] = 1.0;
        MassFunction { frame, masses }
    }

    /// Like [`MassFunction::new`] but allows mass on the empty set.
    fn with_conflict(frame: Arc<Frame>, mut masses: Vec<f64>) -> Result<Self> {
        if masses.len() != frame.power_set_size() {
            return Err(Error::InvalidArgument(format!(
                "expected {} masses for a frame of {} singletons, got {}",
                frame.power_set_size(),
                frame.len(),
                masses.len()
            )));
        }
        if let Some(bad) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "masses must be finite and non-negative, got {bad}"
            )));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > RENORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "masses must sum to 1, got {total}"
            )));
        }
        if total != 1.0 {
            masses.iter_mut().for_each(|m| *m /= total);
        }
        Ok(MassFunction { frame, masses })
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn mass(&self, a: Subset) -> f64 {
        self.masses.get(a.index()).copied().unwrap_or(0.0)
    }

    /// Dense masses indexed by subset bitmask.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn conflict(&self) -> f64 {
        self.masses[0]
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = (Subset, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (Subset(i as u32), m))
    }

    fn same_frame(&self, other: &MassFunction) -> bool {
        Arc::ptr_eq(&self.frame, &other.frame) || self.frame == other.frame
    }
}

/// `Bel(A)`: total mass of the non-empty subsets of `a`.
pub fn belief(m: &MassFunction, a: Subset) -> Result<f64> {
    m.frame.check(a)?;
    Ok(m.focal_elements()
        .filter(|(x, _)| !x.is_empty() && x.is_subset_of(a))
        .map(|(_, v)| v)
        .sum())
}

/// `Pl(A)`: total mass of the subsets intersecting `a`.
pub fn plausibility(m: &MassFunction, a: Subset) -> Result<f64> {
    m.frame.check(a)?;
    Ok(m.focal_elements()
        .filter(|(x, _)| x.intersects(a))
        .map(|(_, v)| v)
        .sum())
}

/// Unnormalized conjunctive combination of two independent sources.
///
/// Conflict stays on the empty set.
pub fn combine_conjunctive(m1: &MassFunction, m2: &MassFunction) -> Result<MassFunction> {
    if !m1.same_frame(m2) {
        return Err(Error::FrameMismatch);
    }
    let mut out = vec![0.0; m1.masses.len()];
    for (x, a) in m1.focal_elements() {
        for (y, b) in m2.focal_elements() {
            out[x.intersection(y).index()] += a * b;
        }
    }
    MassFunction::with_conflict(Arc::clone(&m1.frame), out)
}

/// Average rule: per-subset arithmetic mean of the inputs.
pub fn combine_average(ms: &[MassFunction]) -> Result<MassFunction> {
    let first = ms
        .first()
        .ok_or_else(|| Error::InvalidArgument("average rule needs at least one source".into()))?;
    if ms.iter().any(|m| !first.same_frame(m)) {
        return Err(Error::FrameMismatch);
    }
    let scale = 1.0 / ms.len() as f64;
    let out = (0..first.masses.len())
        .map(|i| ms.iter().map(|m| m.masses[i]).sum::<f64>() * scale)
        .collect();
    MassFunction::with_conflict(Arc::clone(&first.frame), out)
}

/// Pignistic probability of `a`.
///
/// Each focal set spreads its mass evenly over its singletons, after
/// discarding the conflict on the empty set.
pub fn pignistic(m: &MassFunction, a: Subset) -> Result<f64> {
    m.frame.check(a)?;
    let keep = 1.0 - m.conflict();
    if keep <= 0.0 {
        return Err(Error::UndefinedDistribution);
    }
    let sum: f64 = m
        .focal_elements()
        .filter(|(b, _)| b.intersects(a))
        .map(|(b, v)| v * b.intersection(a).cardinality() as f64 / b.cardinality() as f64)
        .sum();
    Ok(sum / keep)
}

/// Parameters of the cardinality-weighted decision rule.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionParams {
    r: f64,
    k_d: f64,
    lambda: BTreeMap<Subset, f64>,
}

impl DecisionParams {
    pub fn new(r: f64, k_d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("r must lie in [0, 1], got {r}")));
        }
        if !(k_d.is_finite() && k_d > 0.0) {
            return Err(Error::InvalidArgument(format!("k_d must be positive, got {k_d}")));
        }
        Ok(DecisionParams {
            r,
            k_d,
            lambda: BTreeMap::new(),
        })
    }

    /// Overrides the weight `λ_X` of one subset (default 1).
    pub fn with_lambda(mut self, x: Subset, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {value}"
            )));
        }
        self.lambda.insert(x, value);
        Ok(self)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn k_d(&self) -> f64 {
        self.k_d
    }

    pub fn lambda(&self, x: Subset) -> f64 {
        self.lambda.get(&x).copied().unwrap_or(1.0)
    }

    /// Utility weight `k_d · λ_X / |X|^r`.
    pub fn weight(&self, x: Subset) -> f64 {
        self.k_d * self.lambda(x) / (x.cardinality() as f64).powf(self.r)
    }
}

impl Default for DecisionParams {
    fn default() -> Self {
        DecisionParams {
            r: 0.1,
            k_d: 1.0,
            lambda: BTreeMap::new(),
        }
    }
}

/// Weighted decision score of a subset, `weight(X) · betP(X)`.
pub fn decision_score(m: &MassFunction, x: Subset, p: &DecisionParams) -> Result<f64> {
    Ok(p.weight(x) * pignistic(m, x)?)
}

/// Appriou's rule: the non-empty subset maximizing `weight(X) · betP(X)`.
///
/// Ties go to the larger subset, then to the lowest bitmask.
pub fn appriou_decide(m: &MassFunction, p: &DecisionParams) -> Result<Subset> {
    let mut best: Option<(Subset, f64)> = None;
    for x in m.frame.subsets().skip(1) {
        let score = decision_score(m, x, p)?;
        best = match best {
            None => Some((x, score)),
            Some((bx, bs)) => {
                if score > bs + TIE_TOLERANCE
                    || ((score - bs).abs() <= TIE_TOLERANCE && x.cardinality() > bx.cardinality())
                {
                    Some((x, score))
                } else {
                    Some((bx, bs))
                }
            }
        };
    }
    best.map(|(x, _)| x).ok_or(Error::UndefinedDistribution)
}
