//! Label sources: a simulated Bradley-Terry annotator driven by a hidden
//! linear reward, and the pending/received queue that human labels flow
//! through.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{AnnotatedPair, AnnotationSource, PreferenceLabel, PreferenceTuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Winner drawn from the Bradley-Terry probability.
    Stochastic,
    /// Winner is the higher-reward response; ties go to `First`.
    Deterministic,
}

/// Hidden reward `r*(y) = θ*·f(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthReward {
    pub theta_star: Vec<f64>,
    pub noise_mode: NoiseMode,
}

impl GroundTruthReward {
    pub fn reward(&self, features: &[f64]) -> f64 {
        math::dot(&self.theta_star, features)
    }

    /// `r*(y1) − r*(y2)`.
    pub fn margin(&self, tuple: &PreferenceTuple) -> Result<f64> {
        let d = self.theta_star.len();
        for f in [&tuple.feature_y1, &tuple.feature_y2] {
            if f.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: f.len() });
            }
        }
        Ok(self.reward(&tuple.feature_y1) - self.reward(&tuple.feature_y2))
    }

    pub fn with_mode(&self, noise_mode: NoiseMode) -> Self {
        Self { theta_star: self.theta_star.clone(), noise_mode }
    }
}

pub fn simulate_label<R: Rng + ?Sized>(
    oracle: &GroundTruthReward,
    tuple: &PreferenceTuple,
    rng: &mut R,
) -> Result<PreferenceLabel> {
    let margin = oracle.margin(tuple)?;
    let first = match oracle.noise_mode {
        NoiseMode::Stochastic => rng.random::<f64>() < math::sigmoid(margin),
        NoiseMode::Deterministic => margin >= 0.0,
    };
    Ok(if first { PreferenceLabel::First } else { PreferenceLabel::Second })
}

/// Tuples awaiting a label and the labels already received. An id moves
/// from `pending` to `received` exactly once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationQueue {
    pending: Vec<String>,
    received: BTreeMap<String, AnnotatedPair>,
}

impl AnnotationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> &[String] {
        &self.pending
    }

    pub fn received(&self) -> &BTreeMap<String, AnnotatedPair> {
        &self.received
    }

    pub fn is_pending(&self, id: &str) -> bool {
        self.pending.iter().any(|p| p == id)
    }

    /// Appends `ids` in order. Nothing is enqueued if any id is already
    /// known or repeated.
    pub fn enqueue<S: AsRef<str>>(&mut self, ids: &[S]) -> Result<()> {
        let mut fresh = BTreeSet::new();
        for id in ids {
            let id = id.as_ref();
            if self.is_pending(id) || self.received.contains_key(id) || !fresh.insert(id) {
                return Err(Error::DuplicateId(id.into()));
            }
        }
        self.pending.extend(ids.iter().map(|s| String::from(s.as_ref())));
        Ok(())
    }

    pub fn submit(
        &mut self,
        tuple_id: &str,
        label: PreferenceLabel,
        source: AnnotationSource,
        iteration: u64,
    ) -> Result<&AnnotatedPair> {
        let pos = self
            .pending
            .iter()
            .position(|p| p == tuple_id)
            .ok_or_else(|| Error::NotPending(tuple_id.into()))?;
        let id = self.pending.remove(pos);
        let pair = AnnotatedPair { tuple_id: id.clone(), label, source, iteration };
        Ok(self.received.entry(id).or_insert(pair))
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedPair> {
        self.received.get(id)
    }

    /// Withdraws every pending id, e.g. after an aborted round.
    pub fn clear_pending(&mut self) -> Vec<String> {
        core::mem::take(&mut self.pending)
    }
}
