//! Closed-form Sharpe-ratio acquisition functions.
//!
//! Labeling a pair yields one of two DPO gradients, and the second is the
//! first scaled by `γ = 1 − 1/σ(Δ)` with `Δ = r̂(y2) − r̂(y1)`. The Sharpe
//! ratio of the two gradient norms therefore cancels `‖G1‖` and depends on
//! the pair only through `‖γ‖ = e^{−Δ}` and the preference prior.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::dpo::{implicit_reward, ImplicitRewardPair};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{Acquisition, AcquisitionScore, PolicyParams, PreferenceTuple, Score};

/// Below this the Sharpe denominator is treated as zero.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Preference probabilities `p1 = P(y1 ≻ y2)`, `p2 = P(y2 ≻ y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorProbs {
    pub p1: f64,
    pub p2: f64,
}

impl PriorProbs {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2) && (p1 + p2 - 1.0).abs() <= 1e-12;
        if ok {
            Ok(Self { p1, p2 })
        } else {
            Err(Error::InvalidConfig(alloc::format!("invalid prior ({p1}, {p2})")))
        }
    }

    /// No-prior case used by SHARP.
    pub const fn uniform() -> Self {
        Self { p1: 0.5, p2: 0.5 }
    }

    pub fn swapped(self) -> Self {
        Self { p1: self.p2, p2: self.p1 }
    }
}

/// Bradley-Terry preference probabilities from implicit rewards.
pub fn bt_prior(rewards: &ImplicitRewardPair) -> PriorProbs {
    let x = rewards.r_hat_y1 - rewards.r_hat_y2;
    PriorProbs { p1: math::sigmoid(x), p2: math::sigmoid(-x) }
}

/// `‖γ‖ = |1 − 1/σ(Δ)|`, which simplifies exactly to `e^{−Δ}`.
pub fn gamma_norm(rewards: &ImplicitRewardPair) -> f64 {
    math::exp(-rewards.delta())
}

/// SHARP: `(1 + γ) / |1 − γ|`, infinite when `γ = 1`.
pub fn sharp_score(gamma: f64) -> Score {
    debug_assert!(gamma >= 0.0);
    if gamma.is_infinite() {
        return Score::new(1.0);
    }
    let den = (1.0 - gamma).abs();
    if den < SINGULAR_TOL {
        Score::INFINITY
    } else {
        Score::new((1.0 + gamma) / den)
    }
}

/// W-SHARP: Sharpe ratio of the two-point gradient-norm distribution
/// weighted by `prior`, with `‖G1‖` cancelled.
pub fn wsharp_score(gamma: f64, prior: PriorProbs) -> Score {
    debug_assert!(gamma >= 0.0);
    let PriorProbs { p1, p2 } = prior;
    if gamma.is_infinite() {
        // m ≈ p2·γ and the deviation ≈ γ·sqrt(p1·p2)
        return if p1 == 0.0 { Score::INFINITY } else { Score::new(math::sqrt(p2 / p1)) };
    }
    let m = p1 + p2 * gamma;
    let den = math::sqrt(p1 * (1.0 - m) * (1.0 - m) + p2 * (gamma - m) * (gamma - m));
    if den <= SINGULAR_TOL * m || den == 0.0 {
        Score::INFINITY
    } else {
        Score::new(m / den)
    }
}

/// Scores every tuple of a candidate batch. The W-SHARP prior comes from
/// the current policy; `Random` draws a uniform score from `rng`, which is
/// untouched for the other kinds.
pub fn score_batch<R: Rng + ?Sized>(
    policy: &PolicyParams,
    reference: &PolicyParams,
    batch: &[&PreferenceTuple],
    kind: Acquisition,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<AcquisitionScore>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    batch
        .iter()
        .map(|tuple| {
            let rewards = implicit_reward(policy, reference, tuple, beta)?;
            let gamma = gamma_norm(&rewards);
            let score = match kind {
                Acquisition::Sharp => sharp_score(gamma),
                Acquisition::WSharp => wsharp_score(gamma, bt_prior(&rewards)),
                Acquisition::Random => Score::new(rng.random::<f64>()),
            };
            Ok(AcquisitionScore { tuple_id: tuple.id.clone(), delta: rewards.delta(), gamma_norm: gamma, score })
        })
        .collect()
}

/// Top-`b` ids by score, descending; ties go to the smaller id.
pub fn rank_and_select(scores: &[AcquisitionScore], b: usize) -> Result<Vec<String>> {
    if b > scores.len() {
        return Err(Error::SelectionTooLarge { requested: b, available: scores.len() });
    }
    let mut order: Vec<&AcquisitionScore> = scores.iter().collect();
    order.sort_by(|x, y| y.score.cmp(&x.score).then_with(|| x.tuple_id.cmp(&y.tuple_id)));
    Ok(order.into_iter().take(b).map(|s| s.tuple_id.clone()).collect())
}
