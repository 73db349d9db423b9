use sharp_core::{
    generate_synthetic, run, run_from, simulate_label, Acquisition, AnnotationSource,
    Annotator, EvalSet, NoiseMode, PolicyParams, PreferenceLabel, PreferenceTuple, RunConfig, SimulatedAnnotator,
    SynthSpec,
};
use sharp_core::rng::{stream, Stream};

fn split(seed: u64, mode: NoiseMode) -> (sharp_core::Dataset, EvalSet) {
    let mut spec = SynthSpec::new(1500, 8, seed);
    spec.noise_mode = mode;
    let (mut data, oracle) = generate_synthetic(&spec);
    let test = data.tuples.split_off(1000);
    let mut rng = stream(seed, Stream::TestLabels);
    let test_pairs = test.into_iter().map(|t| {
        let l = simulate_label(&oracle, &t, &mut rng).unwrap();
        (t, l)
    });
    (data, EvalSet { test_pairs: test_pairs.collect(), oracle: Some(oracle) })
}

#[test]
fn deterministic_labels_drive_accuracy_up() {
    let (data, eval) = split(21, NoiseMode::Deterministic);
    let oracle = eval.oracle.clone().unwrap();
    for acquisition in [Acquisition::Sharp, Acquisition::WSharp, Acquisition::Random] {
        let config = RunConfig { batch_b: 16, pool_multiplier_p: 4, iterations_n: 12, acquisition, eval_every: 16, ..RunConfig::default() };
        let mut ann = SimulatedAnnotator::new(oracle.clone(), 1);
        let out = run(&config, &data, &mut ann, Some(&eval)).unwrap();
        let curve: Vec<f64> = out.log.eval_points().map(|p| p.accuracy).collect();
        assert_eq!(curve.len(), 12);
        assert!(curve[11] > 0.85, "{acquisition:?}: {curve:?}");
        assert!(curve[11] > curve[0] - 0.02, "{acquisition:?}: {curve:?}");
        let ema: Vec<f64> = out.log.eval_points().map(|p| p.accuracy_ema).collect();
        assert!(ema.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(out.log.eval_points().all(|p| p.winrate.is_some()));
    }
}

#[test]
fn resuming_matches_a_single_run_budget() {
    let (data, eval) = split(5, NoiseMode::Stochastic);
    let oracle = eval.oracle.clone().unwrap();
    let config = RunConfig { batch_b: 8, pool_multiplier_p: 3, iterations_n: 3, ..RunConfig::default() };
    let mut ann = SimulatedAnnotator::new(oracle.clone(), 2);
    let first = run(&config, &data, &mut ann, None).unwrap();
    let mut ann = SimulatedAnnotator::new(oracle, 2);
    let second = run_from(&config, &data, first.policy.clone(), &mut ann, None).unwrap();
    assert_eq!(second.labeled_set.len(), 24);
    assert_eq!(second.reference, first.policy);
    assert_ne!(first.reference, first.policy);
    assert_eq!(first.reference, PolicyParams::zeros(8));
    assert_ne!(second.policy, first.policy);
}

struct PreferFirst;

impl Annotator for PreferFirst {
    fn annotate(
        &mut self,
        _iteration: u64,
        tuples: &[&PreferenceTuple],
    ) -> sharp_core::error::Result<Vec<(PreferenceLabel, AnnotationSource)>> {
        Ok(tuples.iter().map(|_| (PreferenceLabel::First, AnnotationSource::Human)).collect())
    }
}

#[test]
fn custom_annotators_plug_into_the_loop() {
    let (data, eval) = split(8, NoiseMode::Stochastic);
    let config = RunConfig { batch_b: 10, pool_multiplier_p: 2, iterations_n: 4, ..RunConfig::default() };
    let out = run(&config, &data, &mut PreferFirst, None).unwrap();
    assert!(out.labeled_set.iter().all(|p| p.label == PreferenceLabel::First && p.source == AnnotationSource::Human));
    for r in &out.log.records {
        assert!(r.labels.iter().all(|l| l.winner == PreferenceLabel::First));
        assert_eq!(r.labels.len(), 10);
    }
    assert!(eval.test_pairs.len() == 500);
}
