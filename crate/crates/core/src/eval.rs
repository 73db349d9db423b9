//! Test-set metrics and smoothing.

use alloc::vec::Vec;

use crate::annotation::GroundTruthReward;
use crate::dpo::implicit_reward;
use crate::error::{Error, Result};
use crate::model::{PolicyParams, PreferenceLabel, PreferenceTuple};

/// 1 on a strictly positive margin, 0.5 on a tie.
fn credit(margin: f64) -> f64 {
    if margin > 0.0 {
        1.0
    } else if margin == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// Fraction of pairs whose implicit reward ranks the labeled winner
/// higher. Exact ties earn half credit.
pub fn implicit_reward_accuracy(
    policy: &PolicyParams,
    reference: &PolicyParams,
    test_pairs: &[(PreferenceTuple, PreferenceLabel)],
    beta: f64,
) -> Result<f64> {
    if test_pairs.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut total = 0.0;
    for (t, label) in test_pairs {
        total += credit(implicit_reward(policy, reference, t, beta)?.margin(*label));
    }
    Ok(total / test_pairs.len() as f64)
}

/// Agreement between the policy's implicit-reward preference and the
/// hidden reward's preference. A tie on either side earns half credit.
pub fn winrate_proxy(
    policy: &PolicyParams,
    reference: &PolicyParams,
    eval_tuples: &[PreferenceTuple],
    oracle: &GroundTruthReward,
    beta: f64,
) -> Result<f64> {
    if eval_tuples.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut total = 0.0;
    for t in eval_tuples {
        let r = implicit_reward(policy, reference, t, beta)?;
        let ours = r.r_hat_y1 - r.r_hat_y2;
        let truth = oracle.margin(t)?;
        total += if ours == 0.0 || truth == 0.0 {
            0.5
        } else if (ours > 0.0) == (truth > 0.0) {
            1.0
        } else {
            0.0
        };
    }
    Ok(total / eval_tuples.len() as f64)
}

/// `out[0] = x[0]`, `out[t] = decay·out[t−1] + (1−decay)·x[t]`.
pub fn ema(series: &[f64], decay: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut iter = series.iter();
    if let Some(&first) = iter.next() {
        out.push(first);
        let mut prev = first;
        for &x in iter {
            prev = decay * prev + (1.0 - decay) * x;
            out.push(prev);
        }
    }
    out
}
