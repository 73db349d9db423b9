//! Brute-force Sharpe ratios from both explicit DPO gradients, used to
//! certify the closed forms in [`crate::acquisition`].

use alloc::string::String;
use alloc::vec::Vec;

use crate::acquisition::{bt_prior, score_batch, PriorProbs, SINGULAR_TOL};
use crate::dpo::{dpo_gradient, implicit_reward};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{Acquisition, PolicyParams, PreferenceLabel, PreferenceTuple, Score};
use crate::rng::{stream, Stream};

/// `(G1, G2)`: the DPO gradient if `y1` wins and if `y2` wins.
pub fn explicit_gradient_pair(
    policy: &PolicyParams,
    reference: &PolicyParams,
    tuple: &PreferenceTuple,
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        dpo_gradient(policy, reference, tuple, PreferenceLabel::First, beta)?,
        dpo_gradient(policy, reference, tuple, PreferenceLabel::Second, beta)?,
    ))
}

/// Sharpe ratio `E[G] / σ(G)` of the two-point distribution of gradient
/// norms. Zero variance (including two zero gradients) is `+inf`.
pub fn sharpe_from_gradients(g1: &[f64], g2: &[f64], prior: PriorProbs) -> Score {
    let (n1, n2) = (math::norm(g1), math::norm(g2));
    let PriorProbs { p1, p2 } = prior;
    let mean = p1 * n1 + p2 * n2;
    let var = p1 * (n1 - mean) * (n1 - mean) + p2 * (n2 - mean) * (n2 - mean);
    let sd = math::sqrt(var);
    if n1 == n2 || sd == 0.0 || sd < SINGULAR_TOL * mean {
        Score::INFINITY
    } else {
        Score::new(mean / sd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub tuple_id: String,
    pub closed_form: Score,
    pub explicit: Score,
    pub rel_err: f64,
}

/// Outcome of comparing closed-form scores against the explicit route.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub instances: usize,
    pub max_rel_err: f64,
    /// Instances where both sides were `+inf`.
    pub infinite_agreements: usize,
    /// Tuples whose two gradients are both zero.
    pub degenerate: Vec<String>,
    pub violations: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(mut self, other: VerifyReport) -> Self {
        self.instances += other.instances;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.infinite_agreements += other.infinite_agreements;
        self.degenerate.extend(other.degenerate);
        self.violations.extend(other.violations);
        self
    }
}

/// Compares [`score_batch`] against [`sharpe_from_gradients`] on each
/// tuple. SHARP uses the uniform prior, W-SHARP the Bradley-Terry prior.
pub fn verify_closed_form(
    policy: &PolicyParams,
    reference: &PolicyParams,
    tuples: &[&PreferenceTuple],
    kind: Acquisition,
    beta: f64,
    tolerance: f64,
) -> Result<VerifyReport> {
    if kind == Acquisition::Random {
        return Err(Error::InvalidConfig("random acquisition has no closed form".into()));
    }
    // Unused for SHARP/W-SHARP.
    let mut rng = stream(0, Stream::Scores);
    let closed = score_batch(policy, reference, tuples, kind, beta, &mut rng)?;
    let mut report = VerifyReport { instances: tuples.len(), ..VerifyReport::default() };
    for (tuple, cf) in tuples.iter().zip(closed) {
        let (g1, g2) = explicit_gradient_pair(policy, reference, tuple, beta)?;
        let prior = match kind {
            Acquisition::WSharp => bt_prior(&implicit_reward(policy, reference, tuple, beta)?),
            _ => PriorProbs::uniform(),
        };
        let explicit = sharpe_from_gradients(&g1, &g2, prior);
        if math::norm(&g1) == 0.0 && math::norm(&g2) == 0.0 {
            report.degenerate.push(tuple.id.clone());
        }
        let err = math::rel_err(cf.score.value(), explicit.value());
        if cf.score.is_infinite() && explicit.is_infinite() {
            report.infinite_agreements += 1;
        } else if err.is_finite() {
            report.max_rel_err = report.max_rel_err.max(err);
        }
        if err.is_nan() || err > tolerance {
            report.violations.push(Mismatch {
                tuple_id: tuple.id.clone(),
                closed_form: cf.score,
                explicit,
                rel_err: err,
            });
        }
    }
    Ok(report)
}
