//! Log-linear policy over a finite candidate set:
//! `log φ_θ(c) = θ·f_c − logsumexp_k θ·f_k`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::PolicyParams;

/// Feature vectors of every response the policy normalizes over.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<'a> {
    pub features: Vec<&'a [f64]>,
}

impl<'a> CandidateSet<'a> {
    pub fn new(features: Vec<&'a [f64]>) -> Self {
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn check(&self, params: &PolicyParams, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange { index, len: self.len() });
        }
        let d = params.dim();
        if let Some(f) = self.features.iter().find(|f| f.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: f.len() });
        }
        Ok(())
    }

    fn logits(&self, params: &PolicyParams) -> Vec<f64> {
        self.features.iter().map(|f| math::dot(&params.theta, f)).collect()
    }
}

pub fn log_prob(params: &PolicyParams, candidates: &CandidateSet<'_>, index: usize) -> Result<f64> {
    candidates.check(params, index)?;
    let logits = candidates.logits(params);
    Ok(logits[index] - math::logsumexp(&logits))
}

/// `f_index − Σ_c softmax_c · f_c`.
pub fn grad_log_prob(
    params: &PolicyParams,
    candidates: &CandidateSet<'_>,
    index: usize,
) -> Result<Vec<f64>> {
    candidates.check(params, index)?;
    let logits = candidates.logits(params);
    let lse = math::logsumexp(&logits);
    let mut grad = candidates.features[index].to_vec();
    for (f, z) in candidates.features.iter().zip(&logits) {
        let w = math::exp(z - lse);
        for (g, x) in grad.iter_mut().zip(f.iter()) {
            *g -= w * x;
        }
    }
    Ok(grad)
}
