//! Domain types shared by every stage of the pipeline.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};
use crate::policy::CandidateSet;

/// A prompt with two candidate responses, each represented by a feature
/// vector. Distractors only widen the softmax normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceTuple {
    pub id: String,
    pub prompt_text: Option<String>,
    pub response_texts: [Option<String>; 2],
    pub feature_y1: Vec<f64>,
    pub feature_y2: Vec<f64>,
    pub distractor_features: Vec<Vec<f64>>,
}

impl PreferenceTuple {
    /// Tuple without display text or distractors.
    pub fn from_features(id: impl Into<String>, feature_y1: Vec<f64>, feature_y2: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            prompt_text: None,
            response_texts: [None, None],
            feature_y1,
            feature_y2,
            distractor_features: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_y1.len()
    }

    /// Candidate set in the order `[y1, y2, distractors...]`.
    pub fn candidates(&self) -> CandidateSet<'_> {
        let mut features = Vec::with_capacity(2 + self.distractor_features.len());
        features.push(self.feature_y1.as_slice());
        features.push(self.feature_y2.as_slice());
        features.extend(self.distractor_features.iter().map(Vec::as_slice));
        CandidateSet::new(features)
    }

    /// Same tuple with `y1` and `y2` exchanged.
    pub fn swapped(&self) -> Self {
        let mut t = self.clone();
        core::mem::swap(&mut t.feature_y1, &mut t.feature_y2);
        t.response_texts.swap(0, 1);
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tuples: Vec<PreferenceTuple>,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn new(tuples: Vec<PreferenceTuple>, feature_dim: usize) -> Self {
        Self { tuples, feature_dim }
    }

    /// Builds the dataset and rejects it if any invariant fails.
    pub fn validated(
        tuples: Vec<PreferenceTuple>,
        feature_dim: usize,
    ) -> core::result::Result<Self, Vec<Violation>> {
        let ds = Self::new(tuples, feature_dim);
        let violations = validate_dataset(&ds);
        if violations.is_empty() {
            Ok(ds)
        } else {
            Err(violations)
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PreferenceTuple> {
        self.tuples.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    ZeroDimension,
    DimensionMismatch { field: FeatureField, expected: usize, got: usize },
    NonFinite { field: FeatureField },
    DuplicateId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureField {
    Y1,
    Y2,
    Distractor(usize),
}

impl fmt::Display for FeatureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureField::Y1 => f.write_str("f1"),
            FeatureField::Y2 => f.write_str("f2"),
            FeatureField::Distractor(i) => write!(f, "distractors[{i}]"),
        }
    }
}

/// One broken dataset rule, tied to the tuple that broke it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub tuple_id: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::ZeroDimension => write!(f, "{}: feature dimension is zero", self.tuple_id),
            ViolationKind::DimensionMismatch { field, expected, got } => write!(
                f,
                "{}: {field} has dimension {got}, expected {expected}",
                self.tuple_id
            ),
            ViolationKind::NonFinite { field } => {
                write!(f, "{}: {field} has a non-finite entry", self.tuple_id)
            }
            ViolationKind::DuplicateId => write!(f, "{}: duplicate id", self.tuple_id),
        }
    }
}

/// Checks every dataset invariant. An empty result means the dataset is
/// well formed.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = dataset.feature_dim;
    let mut seen = BTreeSet::new();
    for t in &dataset.tuples {
        let push = |out: &mut Vec<Violation>, kind| {
            out.push(Violation { tuple_id: t.id.clone(), kind })
        };
        if d == 0 {
            push(&mut out, ViolationKind::ZeroDimension);
        }
        let fields = [(FeatureField::Y1, &t.feature_y1), (FeatureField::Y2, &t.feature_y2)]
            .into_iter()
            .chain(
                t.distractor_features
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (FeatureField::Distractor(i), f)),
            );
        for (field, f) in fields {
            if f.len() != d {
                push(
                    &mut out,
                    ViolationKind::DimensionMismatch { field, expected: d, got: f.len() },
                );
            }
            if f.iter().any(|x| !x.is_finite()) {
                push(&mut out, ViolationKind::NonFinite { field });
            }
        }
        if !seen.insert(t.id.as_str()) {
            push(&mut out, ViolationKind::DuplicateId);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { theta: alloc::vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }
}

/// Which of the two responses the annotator preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreferenceLabel {
    First,
    Second,
}

impl PreferenceLabel {
    /// Candidate index of the winner.
    pub fn winner_index(self) -> usize {
        match self {
            PreferenceLabel::First => 0,
            PreferenceLabel::Second => 1,
        }
    }

    pub fn loser_index(self) -> usize {
        1 - self.winner_index()
    }

    pub fn flipped(self) -> Self {
        match self {
            PreferenceLabel::First => PreferenceLabel::Second,
            PreferenceLabel::Second => PreferenceLabel::First,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PreferenceLabel::First => "First",
            PreferenceLabel::Second => "Second",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnnotationSource {
    SimulatedOracle,
    Human,
}

impl AnnotationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationSource::SimulatedOracle => "SimulatedOracle",
            AnnotationSource::Human => "Human",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedPair {
    pub tuple_id: String,
    pub label: PreferenceLabel,
    pub source: AnnotationSource,
    pub iteration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Acquisition {
    Sharp,
    WSharp,
    Random,
}

impl Acquisition {
    pub fn as_str(self) -> &'static str {
        match self {
            Acquisition::Sharp => "sharp",
            Acquisition::WSharp => "wsharp",
            Acquisition::Random => "random",
        }
    }
}

impl core::str::FromStr for Acquisition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sharp" => Ok(Acquisition::Sharp),
            "wsharp" | "w-sharp" => Ok(Acquisition::WSharp),
            "random" => Ok(Acquisition::Random),
            other => Err(Error::InvalidConfig(alloc::format!("unknown acquisition {other:?}"))),
        }
    }
}

/// Parameters of one active-learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// DPO temperature.
    pub beta: f64,
    /// Labels requested per iteration.
    pub batch_b: usize,
    /// Candidate pool is `batch_b * pool_multiplier_p` tuples.
    pub pool_multiplier_p: usize,
    pub iterations_n: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub acquisition: Acquisition,
    pub ema_decay: f64,
    /// Evaluation cadence, counted in labeled samples.
    pub eval_every: usize,
    /// Drop drawn-but-unselected tuples from the pool instead of returning them.
    pub discard_unselected: bool,
    /// Draw the candidate pool at random; when false, in dataset order.
    pub shuffle_pool: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            batch_b: 32,
            pool_multiplier_p: 6,
            iterations_n: 10,
            learning_rate: 10.0,
            seed: 0,
            acquisition: Acquisition::Sharp,
            ema_decay: 0.9,
            eval_every: 32,
            discard_unselected: false,
            shuffle_pool: true,
        }
    }
}

impl RunConfig {
    pub fn pool_size(&self) -> usize {
        self.batch_b * self.pool_multiplier_p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.batch_b == 0 {
            return bad("batch_b must be positive");
        }
        if self.pool_multiplier_p == 0 {
            return bad("pool_multiplier_p must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay must lie in (0, 1)");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        Ok(())
    }
}

/// Acquisition value on `[0, +inf]`. Infinity sorts above every finite
/// score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score(f64);

impl Score {
    pub const INFINITY: Score = Score(f64::INFINITY);

    /// Panics on NaN or negative input.
    pub fn new(v: f64) -> Self {
        assert!(v >= 0.0, "score must be in [0, +inf], got {v}");
        Score(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Per-tuple acquisition record.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionScore {
    pub tuple_id: String,
    /// `r̂(y2) - r̂(y1)`.
    pub delta: f64,
    pub gamma_norm: f64,
    pub score: Score,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tuple(id: &str, a: Vec<f64>, b: Vec<f64>) -> PreferenceTuple {
        PreferenceTuple::from_features(id, a, b)
    }

    #[test]
    fn well_formed_dataset_has_no_violations() {
        let ds = Dataset::new(
            vec![
                tuple("a", vec![1.0, 2.0], vec![0.0, 1.0]),
                tuple("b", vec![0.5, 0.5], vec![-1.0, 1.0]),
                tuple("c", vec![3.0, 0.0], vec![0.0, 0.0]),
            ],
            2,
        );
        assert!(validate_dataset(&ds).is_empty());
    }

    #[test]
    fn short_feature_is_one_dimension_violation() {
        let ds = Dataset::new(
            vec![
                tuple("a", vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0]),
                tuple("b", vec![1.0, 2.0, 3.0], vec![0.0, 1.0]),
            ],
            3,
        );
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tuple_id, "b");
        assert_eq!(
            v[0].kind,
            ViolationKind::DimensionMismatch { field: FeatureField::Y2, expected: 3, got: 2 }
        );
    }

    #[test]
    fn shared_id_is_one_duplicate_violation() {
        let ds = Dataset::new(
            vec![tuple("a", vec![1.0], vec![0.0]), tuple("a", vec![2.0], vec![1.0])],
            1,
        );
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::DuplicateId);
    }

    #[test]
    fn non_finite_and_distractor_dims_are_reported() {
        let mut t = tuple("x", vec![f64::NAN, 0.0], vec![0.0, 0.0]);
        t.distractor_features.push(vec![1.0]);
        let ds = Dataset::new(vec![t], 2);
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|x| x.kind == ViolationKind::NonFinite { field: FeatureField::Y1 }));
        assert!(v.iter().any(|x| matches!(
            x.kind,
            ViolationKind::DimensionMismatch { field: FeatureField::Distractor(0), .. }
        )));
    }

    #[test]
    fn validation_is_pure() {
        let ds = Dataset::new(vec![tuple("a", vec![1.0], vec![0.0, 1.0])], 1);
        assert_eq!(validate_dataset(&ds), validate_dataset(&ds));
    }

    #[test]
    fn infinite_score_orders_above_finite() {
        let mut v = vec![Score::new(3.0), Score::INFINITY, Score::new(1.0)];
        v.sort();
        assert_eq!(v, vec![Score::new(1.0), Score::new(3.0), Score::INFINITY]);
        assert_eq!(alloc::format!("{}", Score::INFINITY), "inf");
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let c = RunConfig { ema_decay: 1.0, ..RunConfig::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { batch_b: 0, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }
}
