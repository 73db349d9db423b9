//! Entry points behind the CLI subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sharp_core::rng::{stream, Stream};
use sharp_core::synth::oracle_suite;
use sharp_core::{
    ema, generate_synthetic, implicit_reward_accuracy, run, simulate_label, verify_closed_form, winrate_proxy,
    Acquisition, Dataset, EvalSet, GroundTruthReward, PreferenceLabel, PreferenceTuple, RunConfig,
    RunLog, SimulatedAnnotator, SynthSpec, VerifyReport,
};

use crate::formats::{save_checkpoint, save_dataset, save_oracle, Checkpoint};
use crate::runlog::{JsonlWriter, RunLogRecord, VerifyRecord};

/// Labels held-out tuples with the hidden reward on the test-label stream.
pub fn label_test_set(
    tuples: &[PreferenceTuple],
    oracle: &GroundTruthReward,
    seed: u64,
) -> anyhow::Result<Vec<(PreferenceTuple, PreferenceLabel)>> {
    let mut rng = stream(seed, Stream::TestLabels);
    tuples.iter().map(|t| Ok((t.clone(), simulate_label(oracle, t, &mut rng)?))).collect()
}

pub struct GenOutput {
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub oracle: GroundTruthReward,
}

/// Generates `spec.n` training tuples plus `test_n` held-out tuples from a
/// single draw, so both share the same hidden reward.
pub fn generate(spec: &SynthSpec, test_n: usize) -> GenOutput {
    let total = SynthSpec { n: spec.n + test_n, ..spec.clone() };
    let (mut all, oracle) = generate_synthetic(&total);
    let test_tuples = all.tuples.split_off(spec.n);
    let test = (test_n > 0).then(|| Dataset::new(test_tuples, spec.d));
    GenOutput { train: all, test, oracle }
}

pub fn write_generated(out: &GenOutput, train: &Path, test: Option<&Path>, oracle: &Path) -> anyhow::Result<()> {
    save_dataset(train, &out.train)?;
    if let (Some(path), Some(ds)) = (test, &out.test) {
        save_dataset(path, ds)?;
    }
    save_oracle(oracle, &out.oracle)?;
    Ok(())
}

pub struct RunOutputs {
    pub log: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub metrics_tsv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub acquisition: String,
    pub iterations: usize,
    pub labeled: usize,
    pub final_accuracy: Option<f64>,
    pub final_winrate: Option<f64>,
}

/// Closed-loop run with the simulated annotator.
pub fn run_simulated(
    config: &RunConfig,
    train: &Dataset,
    oracle: &GroundTruthReward,
    test: Option<&Dataset>,
    outputs: &RunOutputs,
) -> anyhow::Result<(RunSummary, RunLog)> {
    let eval = match test {
        Some(ds) => Some(EvalSet { test_pairs: label_test_set(&ds.tuples, oracle, config.seed)?, oracle: Some(oracle.clone()) }),
        None => None,
    };
    let mut annotator = SimulatedAnnotator::new(oracle.clone(), config.seed);
    let outcome = run(config, train, &mut annotator, eval.as_ref())?;
    if let Some(path) = &outputs.log {
        let mut w = JsonlWriter::create(path)?;
        for r in &outcome.log.records {
            w.write(&RunLogRecord::from(r))?;
        }
    }
    if let Some(path) = &outputs.checkpoint {
        save_checkpoint(path, &Checkpoint::new(&outcome.policy, &outcome.reference, config.beta))?;
    }
    if let Some(path) = &outputs.metrics_tsv {
        write_metrics_tsv(path, &outcome.log, config.ema_decay)?;
    }
    let (final_accuracy, final_winrate) = match &eval {
        Some(set) => (
            Some(implicit_reward_accuracy(&outcome.policy, &outcome.reference, &set.test_pairs, config.beta)?),
            Some(winrate_proxy(
                &outcome.policy,
                &outcome.reference,
                &set.test_pairs.iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
                oracle,
                config.beta,
            )?),
        ),
        None => (None, None),
    };
    let summary = RunSummary {
        acquisition: config.acquisition.as_str().into(),
        iterations: outcome.log.records.len(),
        labeled: outcome.labeled_set.len(),
        final_accuracy,
        final_winrate,
    };
    Ok((summary, outcome.log))
}

/// Columns: iteration, labeled_count, metric, raw, ema.
pub fn write_metrics_tsv(path: &Path, log: &RunLog, decay: f64) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| path.display().to_string())?);
    writeln!(f, "iteration\tlabeled_count\tmetric\traw\tema")?;
    let points: Vec<_> = log.records.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r.iteration, m))).collect();
    let acc: Vec<f64> = points.iter().map(|(_, m)| m.accuracy).collect();
    for ((it, m), e) in points.iter().zip(ema(&acc, decay)) {
        writeln!(f, "{it}\t{}\taccuracy\t{}\t{e}", m.labeled_count, m.accuracy)?;
    }
    let wr: Vec<(u64, usize, f64)> =
        points.iter().filter_map(|(it, m)| m.winrate.map(|w| (*it, m.labeled_count, w))).collect();
    let raw: Vec<f64> = wr.iter().map(|x| x.2).collect();
    for ((it, n, w), e) in wr.iter().zip(ema(&raw, decay)) {
        writeln!(f, "{it}\t{n}\twinrate\t{w}\t{e}")?;
    }
    f.flush()?;
    Ok(())
}

/// Gradient-oracle check of both closed forms on seeded random instances.
pub fn verify_suite(seed: u64, instances: usize, d: usize, beta: f64, tolerance: f64) -> anyhow::Result<Vec<VerifyRecord>> {
    let suite = oracle_suite(seed, instances, d);
    [Acquisition::Sharp, Acquisition::WSharp]
        .into_iter()
        .map(|kind| {
            let mut report = VerifyReport::default();
            for inst in &suite {
                report = report.merge(verify_closed_form(&inst.policy, &inst.reference, &[&inst.tuple], kind, beta, tolerance)?);
            }
            Ok(VerifyRecord::new(kind, tolerance, &report))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub tuples: usize,
    pub accuracy: f64,
    pub winrate: f64,
}

/// Metrics of a saved policy on `data`, labeled by `oracle`.
pub fn evaluate(ck: &Checkpoint, data: &Dataset, oracle: &GroundTruthReward, seed: u64) -> anyhow::Result<EvalSummary> {
    let pairs = label_test_set(&data.tuples, oracle, seed)?;
    let (policy, reference) = (ck.policy(), ck.reference());
    Ok(EvalSummary {
        tuples: data.len(),
        accuracy: implicit_reward_accuracy(&policy, &reference, &pairs, ck.beta)?,
        winrate: winrate_proxy(&policy, &reference, &data.tuples, oracle, ck.beta)?,
    })
}
