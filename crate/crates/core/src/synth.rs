//! Seeded synthetic data: standard-normal features and a linear hidden
//! reward.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::annotation::{GroundTruthReward, NoiseMode};
use crate::model::{Dataset, PolicyParams, PreferenceTuple};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Standard deviation of each entry of `θ*`.
    pub theta_scale: f64,
    pub distractors: usize,
    pub noise_mode: NoiseMode,
}

impl SynthSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self { n, d, seed, theta_scale: 1.0, distractors: 0, noise_mode: NoiseMode::Stochastic }
    }
}

fn normal_vec<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Id of the `i`-th synthetic tuple; zero padded so that lexicographic
/// order is index order.
pub fn synth_id(i: usize, n: usize) -> alloc::string::String {
    let width = n.saturating_sub(1).max(1).ilog10() as usize + 1;
    format!("t{:0width$}", i, width = width.max(5))
}

/// Draws `θ*` first, then every tuple, from one seeded stream.
pub fn generate_synthetic(spec: &SynthSpec) -> (Dataset, GroundTruthReward) {
    let mut rng = stream(spec.seed, Stream::Data);
    let theta_star = normal_vec(&mut rng, spec.d, spec.theta_scale);
    let tuples = (0..spec.n)
        .map(|i| {
            let feature_y1 = normal_vec(&mut rng, spec.d, 1.0);
            let feature_y2 = normal_vec(&mut rng, spec.d, 1.0);
            let distractor_features = (0..spec.distractors).map(|_| normal_vec(&mut rng, spec.d, 1.0)).collect();
            PreferenceTuple {
                id: synth_id(i, spec.n),
                prompt_text: Some(format!("Synthetic prompt {i}")),
                response_texts: [Some(format!("Response A to prompt {i}")), Some(format!("Response B to prompt {i}"))],
                feature_y1,
                feature_y2,
                distractor_features,
            }
        })
        .collect();
    (
        Dataset::new(tuples, spec.d),
        GroundTruthReward { theta_star, noise_mode: spec.noise_mode },
    )
}

/// A random policy/reference pair and one tuple, for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub policy: PolicyParams,
    pub reference: PolicyParams,
    pub tuple: PreferenceTuple,
}

pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    distractors: usize,
    theta_scale: f64,
) -> RandomInstance {
    let policy = PolicyParams::new(normal_vec(rng, d, theta_scale));
    let reference = PolicyParams::new(normal_vec(rng, d, theta_scale));
    let mut tuple = PreferenceTuple::from_features("i", normal_vec(rng, d, 1.0), normal_vec(rng, d, 1.0));
    tuple.distractor_features = (0..distractors).map(|_| normal_vec(rng, d, 1.0)).collect();
    RandomInstance { policy, reference, tuple }
}

/// `count` seeded instances for closed-form verification. Every 25th has
/// identical responses and every 25th (offset by one) has
/// `policy == reference`, so both `Δ = 0` cases are covered.
pub fn oracle_suite(seed: u64, count: usize, d: usize) -> Vec<RandomInstance> {
    let mut rng = stream(seed, Stream::Instances);
    (0..count)
        .map(|i| {
            let distractors = i % 3;
            let mut inst = random_instance(&mut rng, d, distractors, 1.0);
            inst.tuple.id = format!("inst{i:05}");
            match i % 25 {
                0 => inst.tuple.feature_y2 = inst.tuple.feature_y1.clone(),
                1 => inst.reference = inst.policy.clone(),
                _ => {}
            }
            inst
        })
        .collect()
}
