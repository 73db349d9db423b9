//! Risk-aware active selection of preference pairs for direct preference
//! optimization.
//!
//! A pool of prompt/response pairs is scored by the Sharpe ratio of the two
//! DPO gradient magnitudes that could result from labeling it. The closed
//! form of that ratio depends on the pair only through the implicit reward
//! gap, so scoring needs no backward pass.
//!
//! The policy here is log-linear over a finite candidate set per prompt,
//! which keeps every log-probability and gradient exact. The [`oracle`]
//! module recomputes the ratio from explicit gradients to certify the
//! closed forms in [`acquisition`].
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod acquisition;
pub mod active_loop;
pub mod annotation;
pub mod dpo;
pub mod error;
pub mod eval;
pub mod math;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod synth;

pub use acquisition::{
    bt_prior, gamma_norm, rank_and_select, score_batch, sharp_score, wsharp_score, PriorProbs,
};
pub use active_loop::{
    draw_candidate_pool, run, run_from, run_iteration, Annotator, EvalPoint, EvalSet,
    IterationRecord, LabelRecord, LoopState, RunLog, SimulatedAnnotator,
};
pub use annotation::{simulate_label, AnnotationQueue, GroundTruthReward, NoiseMode};
pub use dpo::{dpo_gradient, dpo_loss, implicit_reward, sgd_step, ImplicitRewardPair};
pub use error::Error;
pub use eval::{ema, implicit_reward_accuracy, winrate_proxy};
pub use model::{
    validate_dataset, Acquisition, AcquisitionScore, AnnotatedPair, AnnotationSource, Dataset,
    PolicyParams, PreferenceLabel, PreferenceTuple, RunConfig, Score, Violation, ViolationKind,
};
pub use oracle::{explicit_gradient_pair, sharpe_from_gradients, verify_closed_form, VerifyReport};
pub use policy::{grad_log_prob, log_prob, CandidateSet};
pub use synth::{generate_synthetic, SynthSpec};
