//! Implicit reward, DPO loss and its closed-form gradient.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{PolicyParams, PreferenceLabel, PreferenceTuple};
use crate::policy::{grad_log_prob, log_prob};

/// `β · log(φ_θ / φ_ref)` for both responses. The partition term is
/// omitted; it cancels in every difference taken downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitRewardPair {
    pub r_hat_y1: f64,
    pub r_hat_y2: f64,
}

impl ImplicitRewardPair {
    /// `r̂(y2) − r̂(y1)`.
    pub fn delta(&self) -> f64 {
        self.r_hat_y2 - self.r_hat_y1
    }

    pub fn get(&self, index: usize) -> f64 {
        if index == 0 {
            self.r_hat_y1
        } else {
            self.r_hat_y2
        }
    }

    /// `r̂_winner − r̂_loser`.
    pub fn margin(&self, label: PreferenceLabel) -> f64 {
        self.get(label.winner_index()) - self.get(label.loser_index())
    }
}

pub fn implicit_reward(
    policy: &PolicyParams,
    reference: &PolicyParams,
    tuple: &PreferenceTuple,
    beta: f64,
) -> Result<ImplicitRewardPair> {
    if policy.dim() != reference.dim() {
        return Err(Error::DimensionMismatch { expected: policy.dim(), got: reference.dim() });
    }
    let cs = tuple.candidates();
    let r = |i| -> Result<f64> { Ok(beta * (log_prob(policy, &cs, i)? - log_prob(reference, &cs, i)?)) };
    Ok(ImplicitRewardPair { r_hat_y1: r(0)?, r_hat_y2: r(1)? })
}

/// `−ln σ(r̂_w − r̂_l)`, evaluated as a softplus.
pub fn dpo_loss(
    policy: &PolicyParams,
    reference: &PolicyParams,
    tuple: &PreferenceTuple,
    label: PreferenceLabel,
    beta: f64,
) -> Result<f64> {
    let rewards = implicit_reward(policy, reference, tuple, beta)?;
    Ok(math::softplus(-rewards.margin(label)))
}

/// `−β σ(r̂_l − r̂_w) · (∇log φ_θ(y_w) − ∇log φ_θ(y_l))`.
pub fn dpo_gradient(
    policy: &PolicyParams,
    reference: &PolicyParams,
    tuple: &PreferenceTuple,
    label: PreferenceLabel,
    beta: f64,
) -> Result<Vec<f64>> {
    let rewards = implicit_reward(policy, reference, tuple, beta)?;
    let cs = tuple.candidates();
    let gw = grad_log_prob(policy, &cs, label.winner_index())?;
    let gl = grad_log_prob(policy, &cs, label.loser_index())?;
    let k = -beta * math::sigmoid(-rewards.margin(label));
    Ok(gw.iter().zip(&gl).map(|(a, b)| k * (a - b)).collect())
}

/// One plain gradient step on the mean batch DPO loss.
pub fn sgd_step(
    policy: &PolicyParams,
    reference: &PolicyParams,
    batch: &[(&PreferenceTuple, PreferenceLabel)],
    learning_rate: f64,
    beta: f64,
) -> Result<PolicyParams> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut mean = alloc::vec![0.0; policy.dim()];
    for (tuple, label) in batch {
        let g = dpo_gradient(policy, reference, tuple, *label, beta)?;
        for (m, x) in mean.iter_mut().zip(g) {
            *m += x;
        }
    }
    let n = batch.len() as f64;
    let theta = policy
        .theta
        .iter()
        .zip(&mean)
        .map(|(t, g)| t - learning_rate * (g / n))
        .collect();
    Ok(PolicyParams::new(theta))
}

/// Mean DPO loss over a labeled batch.
pub fn mean_loss(
    policy: &PolicyParams,
    reference: &PolicyParams,
    batch: &[(&PreferenceTuple, PreferenceLabel)],
    beta: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for (t, l) in batch {
        total += dpo_loss(policy, reference, t, *l, beta)?;
    }
    Ok(total / batch.len() as f64)
}
