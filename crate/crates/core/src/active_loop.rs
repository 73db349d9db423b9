//! The selection loop: draw a candidate pool, score it, label the top `b`,
//! take one DPO step, repeat.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::acquisition::{rank_and_select, score_batch};
use crate::annotation::{simulate_label, GroundTruthReward};
use crate::dpo::{mean_loss, sgd_step};
use crate::error::{Error, Result};
use crate::eval::{ema, implicit_reward_accuracy, winrate_proxy};
use crate::model::{
    validate_dataset, AcquisitionScore, AnnotatedPair, AnnotationSource, Dataset, PolicyParams,
    PreferenceLabel, PreferenceTuple, RunConfig,
};
use crate::rng::{stream, Stream, StreamRng};

/// Anything that can label a batch of selected tuples, in order.
pub trait Annotator {
    fn annotate(
        &mut self,
        iteration: u64,
        tuples: &[&PreferenceTuple],
    ) -> Result<Vec<(PreferenceLabel, AnnotationSource)>>;
}

/// Draws labels from a [`GroundTruthReward`] on its own seeded stream.
#[derive(Debug, Clone)]
pub struct SimulatedAnnotator {
    pub oracle: GroundTruthReward,
    rng: StreamRng,
    calls: usize,
}

impl SimulatedAnnotator {
    pub fn new(oracle: GroundTruthReward, seed: u64) -> Self {
        Self { oracle, rng: stream(seed, Stream::Annotator), calls: 0 }
    }

    /// Number of individual labels produced so far.
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Annotator for SimulatedAnnotator {
    fn annotate(
        &mut self,
        _iteration: u64,
        tuples: &[&PreferenceTuple],
    ) -> Result<Vec<(PreferenceLabel, AnnotationSource)>> {
        tuples
            .iter()
            .map(|t| {
                self.calls += 1;
                Ok((simulate_label(&self.oracle, t, &mut self.rng)?, AnnotationSource::SimulatedOracle))
            })
            .collect()
    }
}

/// Held-out data for periodic evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub test_pairs: Vec<(PreferenceTuple, PreferenceLabel)>,
    /// Enables the win-rate proxy over the same tuples.
    pub oracle: Option<GroundTruthReward>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub labeled_count: usize,
    pub accuracy: f64,
    pub accuracy_ema: f64,
    pub winrate: Option<f64>,
    pub winrate_ema: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub tuple_id: String,
    pub winner: PreferenceLabel,
    pub source: AnnotationSource,
}

/// Everything that happened in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub candidate_ids: Vec<String>,
    pub scores: Vec<AcquisitionScore>,
    pub selected_ids: Vec<String>,
    pub labels: Vec<LabelRecord>,
    pub pre_loss: f64,
    pub post_loss: f64,
    pub metrics: Option<EvalPoint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
}

impl RunLog {
    pub fn eval_points(&self) -> impl Iterator<Item = &EvalPoint> {
        self.records.iter().filter_map(|r| r.metrics.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct LoopState {
    pub iteration: u64,
    pub policy: PolicyParams,
    pub reference: PolicyParams,
    pub labeled_set: Vec<AnnotatedPair>,
    /// Dataset indices still unlabeled, ascending.
    pub remaining_pool: Vec<usize>,
    draw_rng: StreamRng,
    score_rng: StreamRng,
    accuracy_series: Vec<f64>,
    winrate_series: Vec<f64>,
}

impl LoopState {
    /// Fresh state; the reference is a frozen copy of `initial`.
    pub fn new(dataset: &Dataset, initial: PolicyParams, seed: u64) -> Self {
        Self {
            iteration: 0,
            reference: initial.clone(),
            policy: initial,
            labeled_set: Vec::new(),
            remaining_pool: (0..dataset.len()).collect(),
            draw_rng: stream(seed, Stream::Draw),
            score_rng: stream(seed, Stream::Scores),
            accuracy_series: Vec::new(),
            winrate_series: Vec::new(),
        }
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_set.len()
    }
}

fn draw_with(
    rng: &mut StreamRng,
    remaining: &[usize],
    dataset_len: usize,
    size: usize,
    shuffle: bool,
) -> Result<Vec<usize>> {
    if remaining.len() < size {
        return Err(Error::InsufficientPool { needed: size, available: remaining.len() });
    }
    if !shuffle {
        return Ok(remaining[..size].to_vec());
    }
    // A fresh permutation of the whole index range each iteration, filtered
    // to the remaining pool; the stream advances identically whatever the
    // pool holds.
    let mut perm: Vec<usize> = (0..dataset_len).collect();
    perm.shuffle(rng);
    Ok(perm.into_iter().filter(|i| remaining.binary_search(i).is_ok()).take(size).collect())
}

/// Uniform sample without replacement of `b·p` dataset indices from the
/// remaining pool, or its first `b·p` indices when `shuffle_pool` is off.
/// Advances the state's draw stream.
pub fn draw_candidate_pool(state: &mut LoopState, config: &RunConfig, dataset: &Dataset) -> Result<Vec<usize>> {
    draw_with(&mut state.draw_rng, &state.remaining_pool, dataset.len(), config.pool_size(), config.shuffle_pool)
}

/// Runs one full iteration and commits it to `state`. On error the state
/// is left as it was.
pub fn run_iteration<A: Annotator + ?Sized>(
    state: &mut LoopState,
    config: &RunConfig,
    dataset: &Dataset,
    annotator: &mut A,
    eval: Option<&EvalSet>,
) -> Result<IterationRecord> {
    let mut draw_rng = state.draw_rng.clone();
    let mut score_rng = state.score_rng.clone();
    let drawn = draw_with(&mut draw_rng, &state.remaining_pool, dataset.len(), config.pool_size(), config.shuffle_pool)?;
    let candidates: Vec<&PreferenceTuple> = drawn.iter().map(|&i| &dataset.tuples[i]).collect();

    let scores = score_batch(
        &state.policy,
        &state.reference,
        &candidates,
        config.acquisition,
        config.beta,
        &mut score_rng,
    )?;
    let selected_ids = rank_and_select(&scores, config.batch_b)?;
    let selected_idx: Vec<usize> = selected_ids
        .iter()
        .map(|id| {
            drawn
                .iter()
                .copied()
                .find(|&i| dataset.tuples[i].id == *id)
                .ok_or_else(|| Error::UnknownTuple(id.clone()))
        })
        .collect::<Result<_>>()?;
    let selected: Vec<&PreferenceTuple> = selected_idx.iter().map(|&i| &dataset.tuples[i]).collect();

    let labels = annotator.annotate(state.iteration, &selected)?;
    if labels.len() != selected.len() {
        return Err(Error::Annotator(alloc::format!(
            "expected {} labels, got {}",
            selected.len(),
            labels.len()
        )));
    }
    let batch: Vec<(&PreferenceTuple, PreferenceLabel)> =
        selected.iter().copied().zip(labels.iter().map(|l| l.0)).collect();

    let pre_loss = mean_loss(&state.policy, &state.reference, &batch, config.beta)?;
    let policy = sgd_step(&state.policy, &state.reference, &batch, config.learning_rate, config.beta)?;
    let post_loss = mean_loss(&policy, &state.reference, &batch, config.beta)?;

    let before = state.labeled_count();
    let after = before + selected.len();
    let mut accuracy_series = state.accuracy_series.clone();
    let mut winrate_series = state.winrate_series.clone();
    let metrics = match eval {
        Some(set) if after / config.eval_every > before / config.eval_every => {
            let acc = implicit_reward_accuracy(&policy, &state.reference, &set.test_pairs, config.beta)?;
            accuracy_series.push(acc);
            let winrate = match &set.oracle {
                Some(o) => {
                    let tuples: Vec<PreferenceTuple> = set.test_pairs.iter().map(|p| p.0.clone()).collect();
                    let w = winrate_proxy(&policy, &state.reference, &tuples, o, config.beta)?;
                    winrate_series.push(w);
                    Some(w)
                }
                None => None,
            };
            Some(EvalPoint {
                labeled_count: after,
                accuracy: acc,
                accuracy_ema: *ema(&accuracy_series, config.ema_decay).last().unwrap_or(&acc),
                winrate,
                winrate_ema: winrate.and_then(|_| ema(&winrate_series, config.ema_decay).last().copied()),
            })
        }
        _ => None,
    };

    // commit
    let record = IterationRecord {
        iteration: state.iteration,
        candidate_ids: candidates.iter().map(|t| t.id.clone()).collect(),
        scores,
        selected_ids,
        labels: selected
            .iter()
            .zip(&labels)
            .map(|(t, (l, s))| LabelRecord { tuple_id: t.id.clone(), winner: *l, source: *s })
            .collect(),
        pre_loss,
        post_loss,
        metrics,
    };
    state.labeled_set.extend(record.labels.iter().map(|l| AnnotatedPair {
        tuple_id: l.tuple_id.clone(),
        label: l.winner,
        source: l.source,
        iteration: state.iteration,
    }));
    if config.discard_unselected {
        state.remaining_pool.retain(|i| !drawn.contains(i));
    } else {
        state.remaining_pool.retain(|i| !selected_idx.contains(i));
    }
    state.policy = policy;
    state.draw_rng = draw_rng;
    state.score_rng = score_rng;
    state.accuracy_series = accuracy_series;
    state.winrate_series = winrate_series;
    state.iteration += 1;
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub policy: PolicyParams,
    pub reference: PolicyParams,
    pub labeled_set: Vec<AnnotatedPair>,
    pub log: RunLog,
}

/// Tuples a run of `config` needs in the dataset.
pub fn required_pool(config: &RunConfig) -> usize {
    let b = config.batch_b;
    let n = config.iterations_n;
    if n == 0 {
        0
    } else if config.discard_unselected {
        n * config.pool_size()
    } else {
        b * (n - 1) + config.pool_size()
    }
}

/// [`run_from`] starting at the zero policy.
pub fn run<A: Annotator + ?Sized>(
    config: &RunConfig,
    dataset: &Dataset,
    annotator: &mut A,
    eval: Option<&EvalSet>,
) -> Result<RunOutcome> {
    run_from(config, dataset, PolicyParams::zeros(dataset.feature_dim), annotator, eval)
}

/// `iterations_n` sequential iterations from `initial`, which also becomes
/// the frozen reference.
pub fn run_from<A: Annotator + ?Sized>(
    config: &RunConfig,
    dataset: &Dataset,
    initial: PolicyParams,
    annotator: &mut A,
    eval: Option<&EvalSet>,
) -> Result<RunOutcome> {
    config.validate()?;
    if let Some(v) = validate_dataset(dataset).first() {
        return Err(Error::InvalidConfig(alloc::format!("invalid dataset: {v}")));
    }
    if initial.dim() != dataset.feature_dim {
        return Err(Error::DimensionMismatch { expected: dataset.feature_dim, got: initial.dim() });
    }
    let needed = required_pool(config);
    if dataset.len() < needed {
        return Err(Error::InsufficientPool { needed, available: dataset.len() });
    }
    let mut state = LoopState::new(dataset, initial, config.seed);
    let mut log = RunLog::default();
    for _ in 0..config.iterations_n {
        log.records.push(run_iteration(&mut state, config, dataset, annotator, eval)?);
    }
    Ok(RunOutcome { policy: state.policy, reference: state.reference, labeled_set: state.labeled_set, log })
}
