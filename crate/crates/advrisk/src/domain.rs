//! Core vocabulary shared by every other module: observations, datasets,
//! attack candidates, per-observation perturbation records, and the two
//! distance metrics.
//!
//! The central quantity is [`PerturbationSize`]: the smallest perturbation
//! magnitude for which a recorded attack flipped an observation, or
//! [`PerturbationSize::Infinite`] when no attack in the run succeeded on it.
//! Infinity is an explicit variant rather than a sentinel float so that
//! downstream code has to decide how to treat "no success" instead of
//! silently averaging it away.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Distance metric used for perturbation sizes. One run uses exactly one
/// metric; mixing metrics across record files is rejected at pooling time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Maximum absolute coordinate difference.
    Linf,
    /// Euclidean distance.
    L2,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Linf => write!(f, "linf"),
            Metric::L2 => write!(f, "l2"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" => Ok(Metric::Linf),
            "l2" => Ok(Metric::L2),
            other => Err(Error::invalid(format!(
                "unknown metric {other:?}, expected \"linf\" or \"l2\""
            ))),
        }
    }
}

/// Distance between two points of equal dimension.
///
/// Both inputs must consist of finite values; the result is always finite
/// and non-negative.
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("distance inputs must be finite"));
    }
    let d = match metric {
        Metric::Linf => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0_f64, f64::max),
        Metric::L2 => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    };
    Ok(d)
}

/// What counts as a successful attack on one observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuccessCriterion {
    /// Perturbed prediction differs from the prediction on the original
    /// input. Works without labels.
    PredictionChange,
    /// Perturbed prediction differs from the ground-truth label.
    GroundTruthDisagreement,
}

impl fmt::Display for SuccessCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuccessCriterion::PredictionChange => write!(f, "prediction-change"),
            SuccessCriterion::GroundTruthDisagreement => write!(f, "ground-truth"),
        }
    }
}

impl FromStr for SuccessCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prediction-change" => Ok(SuccessCriterion::PredictionChange),
            "ground-truth" => Ok(SuccessCriterion::GroundTruthDisagreement),
            other => Err(Error::invalid(format!(
                "unknown success criterion {other:?}, expected \"prediction-change\" or \"ground-truth\""
            ))),
        }
    }
}

/// Pure success predicate for one perturbed prediction.
pub fn evaluate_success(
    criterion: SuccessCriterion,
    original_label: usize,
    ground_truth: usize,
    perturbed_label: usize,
) -> bool {
    match criterion {
        SuccessCriterion::PredictionChange => perturbed_label != original_label,
        SuccessCriterion::GroundTruthDisagreement => perturbed_label != ground_truth,
    }
}

/// One labelled input point.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    id: String,
    features: Vec<f64>,
    label: usize,
}

impl Observation {
    /// Ids must be nonempty and free of tab, CR and LF so they can be
    /// embedded in the line-oriented file formats.
    pub fn new(id: impl Into<String>, features: Vec<f64>, label: usize) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("observation id must be nonempty"));
        }
        if id.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
            return Err(Error::invalid(format!(
                "observation id {id:?} contains tab or newline"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "observation {id}: features must be finite"
            )));
        }
        Ok(Observation {
            id,
            features,
            label,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> usize {
        self.label
    }
}

/// An immutable collection of observations with a fixed feature dimension
/// and class count. May be empty; estimation operations reject empty sets
/// themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::invalid("dataset needs at least 2 classes"));
        }
        let mut seen = HashSet::with_capacity(observations.len());
        for o in &observations {
            if o.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: o.features.len(),
                });
            }
            if o.label >= num_classes {
                return Err(Error::invalid(format!(
                    "observation {}: label {} out of range for {} classes",
                    o.id, o.label, num_classes
                )));
            }
            if !seen.insert(o.id.as_str()) {
                return Err(Error::DuplicateObservation(o.id.clone()));
            }
        }
        Ok(Dataset {
            observations,
            dim,
            num_classes,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Subset with the observations accepted by `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Observation) -> bool) -> Dataset {
        Dataset {
            observations: self
                .observations
                .iter()
                .filter(|o| keep(o))
                .cloned()
                .collect(),
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }
}

/// Output of one attack applied to one observation.
///
/// `success` is true only when the perturbed prediction meets the run's
/// success criterion *and* the candidate actually moved the input
/// (`distance > 0`). A candidate equal to the original point never counts
/// as a successful perturbation, which keeps every finite perturbation
/// size strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackCandidate {
    pub observation_id: String,
    pub attack_name: String,
    /// Attack parameters in canonical string form, e.g. "eps" -> "0.1".
    /// Kept as strings so candidate files round-trip without reformatting.
    pub params: BTreeMap<String, String>,
    pub perturbed_features: Vec<f64>,
    /// Distance from the original observation under the run's metric.
    pub distance: f64,
    pub success: bool,
}

impl AttackCandidate {
    /// Epsilon parameter, if present; used for deterministic tie-breaking.
    pub fn epsilon(&self) -> Option<f64> {
        self.params.get("eps").and_then(|s| s.parse().ok())
    }
}

/// Smallest recorded successful perturbation size for one observation, or
/// `Infinite` when every candidate failed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerturbationSize {
    Finite(f64),
    Infinite,
}

impl PerturbationSize {
    /// Finite sizes must be strictly positive: a zero-distance "success"
    /// would mean the unperturbed input already met the criterion, which
    /// the attack reduction never emits.
    pub fn finite(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::invalid(format!(
                "perturbation size must be finite and > 0, got {value}"
            )));
        }
        Ok(PerturbationSize::Finite(value))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, PerturbationSize::Finite(_))
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self {
            PerturbationSize::Finite(v) => Some(*v),
            PerturbationSize::Infinite => None,
        }
    }

    /// `d > tau`, with `Infinite` above every finite threshold.
    pub fn exceeds(&self, tau: f64) -> bool {
        match self {
            PerturbationSize::Finite(v) => *v > tau,
            PerturbationSize::Infinite => true,
        }
    }

    /// `d <= tau`, the attack-success-rate counting rule.
    pub fn at_most(&self, tau: f64) -> bool {
        match self {
            PerturbationSize::Finite(v) => *v <= tau,
            PerturbationSize::Infinite => false,
        }
    }

    fn valid(&self) -> bool {
        match self {
            PerturbationSize::Finite(v) => v.is_finite() && *v > 0.0,
            PerturbationSize::Infinite => true,
        }
    }
}

impl Eq for PerturbationSize {}

impl PartialOrd for PerturbationSize {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PerturbationSize {
    fn cmp(&self, other: &Self) -> Ordering {
        use PerturbationSize::*;
        match (self, other) {
            // Valid sizes are never NaN, so total_cmp agrees with the
            // numeric order here.
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (Finite(_), Infinite) => Ordering::Less,
            (Infinite, Finite(_)) => Ordering::Greater,
            (Infinite, Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for PerturbationSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationSize::Finite(v) => write!(f, "{v}"),
            PerturbationSize::Infinite => write!(f, "inf"),
        }
    }
}

/// Smallest successful perturbation size for one observation against one
/// model.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationRecord {
    pub observation_id: String,
    pub model_id: String,
    pub d_a: PerturbationSize,
}

impl PerturbationRecord {
    pub fn new(
        observation_id: impl Into<String>,
        model_id: impl Into<String>,
        d_a: PerturbationSize,
    ) -> Self {
        PerturbationRecord {
            observation_id: observation_id.into(),
            model_id: model_id.into(),
            d_a,
        }
    }
}

/// All perturbation records of one model over one observation sample:
/// exactly one record per observation id. Immutable after construction;
/// the sorted finite distances are cached because every estimator needs
/// them.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackOutcomeSet {
    model_id: String,
    records: Vec<PerturbationRecord>,
    sorted_finite: Vec<f64>,
}

impl AttackOutcomeSet {
    pub fn new(model_id: impl Into<String>, records: Vec<PerturbationRecord>) -> Result<Self> {
        let model_id = model_id.into();
        if model_id.is_empty() {
            return Err(Error::invalid("model id must be nonempty"));
        }
        if model_id.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
            return Err(Error::invalid(format!(
                "model id {model_id:?} contains tab or newline"
            )));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.model_id != model_id {
                return Err(Error::invalid(format!(
                    "record for {} carries model id {:?}, set is for {:?}",
                    r.observation_id, r.model_id, model_id
                )));
            }
            if !seen.insert(r.observation_id.as_str()) {
                return Err(Error::DuplicateObservation(r.observation_id.clone()));
            }
            if !r.d_a.valid() {
                return Err(Error::invalid(format!(
                    "record for {}: perturbation size must be finite and > 0 or inf",
                    r.observation_id
                )));
            }
        }
        let mut sorted_finite: Vec<f64> = records
            .iter()
            .filter_map(|r| r.d_a.finite_value())
            .collect();
        sorted_finite.sort_by(f64::total_cmp);
        Ok(AttackOutcomeSet {
            model_id,
            records,
            sorted_finite,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn records(&self) -> &[PerturbationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Finite perturbation sizes in ascending order.
    pub fn sorted_finite_distances(&self) -> &[f64] {
        &self.sorted_finite
    }

    /// Number of observations with no successful attack.
    pub fn infinite_count(&self) -> usize {
        self.records.len() - self.sorted_finite.len()
    }

    /// Observation ids in record order.
    pub fn observation_ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.observation_id.as_str())
    }

    /// Observation ids sorted lexicographically; this is the canonical
    /// order hashed into file headers and used to compare samples.
    pub fn sorted_observation_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.observation_ids().collect();
        ids.sort_unstable();
        ids
    }

    /// 64-bit FNV-1a hash over the newline-joined sorted observation ids.
    /// Outcome sets over the same sample hash identically regardless of
    /// record order.
    pub fn sample_hash(&self) -> u64 {
        crate::hash::sample_hash(self.sorted_observation_ids().iter().copied())
    }
}
