//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use sharp::commands::{generate, label_test_set, verify_suite};
use sharp::runlog::{read_run_log, JsonlWriter, RunLogRecord};
use sharp_core::math::{self, rel_err, sigmoid};
use sharp_core::rng::{stream, Stream};
use sharp_core::synth::{oracle_suite, random_instance};
use sharp_core::{
    bt_prior, dpo_gradient, dpo_loss, explicit_gradient_pair, gamma_norm, implicit_reward,
    implicit_reward_accuracy, run, score_batch, sharp_score, simulate_label, wsharp_score, Acquisition,
    EvalSet, GroundTruthReward, ImplicitRewardPair, NoiseMode, PreferenceLabel,
    PreferenceTuple, RunConfig, SimulatedAnnotator, SynthSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const BETA: f64 = 0.1;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn closed_form_equivalence() -> Outcome {
    let start = Instant::now();
    let records = verify_suite(20240, 1000, 20, BETA, 1e-7).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let suite = oracle_suite(20240, 1000, 20);
    let singular = suite
        .iter()
        .filter(|i| implicit_reward(&i.policy, &i.reference, &i.tuple, BETA).unwrap().delta() == 0.0)
        .count();
    let mut detail = Vec::new();
    for r in &records {
        ensure(r.instances == 1000, || format!("{} checked {} instances", r.acquisition, r.instances))?;
        ensure(r.violations.is_empty(), || {
            format!("{}: {} violations, first {:?}", r.acquisition, r.violations.len(), r.violations.first())
        })?;
        ensure(r.infinite_agreements >= singular && singular > 0, || {
            format!("{}: {} inf/inf agreements for {} Δ = 0 instances", r.acquisition, r.infinite_agreements, singular)
        })?;
        detail.push(format!("{} max rel err {:.2e}, {} inf/inf", r.acquisition, r.max_rel_err, r.infinite_agreements));
    }
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; Δ=0 instances {singular}; {:.2?}", detail.join("; "), elapsed))
}

fn gradient_relation() -> Outcome {
    let mut worst_comp: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for inst in oracle_suite(20240, 1000, 20) {
        let (g1, g2) = explicit_gradient_pair(&inst.policy, &inst.reference, &inst.tuple, BETA).unwrap();
        let r = implicit_reward(&inst.policy, &inst.reference, &inst.tuple, BETA).unwrap();
        let gamma = 1.0 - 1.0 / sigmoid(r.delta());
        for (a, b) in g1.iter().zip(&g2) {
            if *b == 0.0 && *a == 0.0 {
                continue;
            }
            worst_comp = worst_comp.max(rel_err(*b, gamma * a));
        }
        worst_norm = worst_norm.max(rel_err(math::norm(&g2), math::norm(&g1) * gamma_norm(&r)));
    }
    ensure(worst_comp <= 1e-9, || format!("componentwise rel err {worst_comp:.3e}"))?;
    ensure(worst_norm <= 1e-9, || format!("norm rel err {worst_norm:.3e}"))?;
    Ok(format!("componentwise {worst_comp:.2e}, norm {worst_norm:.2e}"))
}

fn dpo_gradient_correctness() -> Outcome {
    let mut rng = stream(31337, Stream::Instances);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let inst = random_instance(&mut rng, 20, i % 3, 1.0);
        let label = if i % 2 == 0 { PreferenceLabel::First } else { PreferenceLabel::Second };
        let g = dpo_gradient(&inst.policy, &inst.reference, &inst.tuple, label, BETA).unwrap();
        let fd: Vec<f64> = (0..20)
            .map(|k| {
                let mut up = inst.policy.clone();
                let mut dn = inst.policy.clone();
                up.theta[k] += h;
                dn.theta[k] -= h;
                let lu = dpo_loss(&up, &inst.reference, &inst.tuple, label, BETA).unwrap();
                let ld = dpo_loss(&dn, &inst.reference, &inst.tuple, label, BETA).unwrap();
                (lu - ld) / (2.0 * h)
            })
            .collect();
        worst = worst.max(math::norm(&math::sub(&g, &fd)) / math::norm(&g));
    }
    ensure(worst <= 1e-6, || format!("rel err {worst:.3e}"))?;
    Ok(format!("max rel err {worst:.2e} over 100 instances"))
}

/// Spearman correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn analytic_identities() -> Outcome {
    let mut worst_sharp: f64 = 0.0;
    let mut worst_wsharp: f64 = 0.0;
    let steps = 400;
    for k in 0..=steps {
        // log-spaced magnitudes on [1e-3, 10]
        let mag = 10f64.powf(-3.0 + 4.0 * k as f64 / steps as f64);
        for delta in [mag, -mag] {
            let r = ImplicitRewardPair { r_hat_y1: 0.0, r_hat_y2: delta };
            let g = gamma_norm(&r);
            let coth = 1.0 / (delta.abs() / 2.0).tanh();
            let csch = 1.0 / (delta.abs() / 2.0).sinh();
            worst_sharp = worst_sharp.max(rel_err(sharp_score(g).value(), coth));
            worst_wsharp = worst_wsharp.max(rel_err(wsharp_score(g, bt_prior(&r)).value(), csch));
        }
    }
    ensure(worst_sharp <= 1e-9, || format!("SHARP vs coth rel err {worst_sharp:.3e}"))?;
    ensure(worst_wsharp <= 1e-9, || format!("W-SHARP vs csch rel err {worst_wsharp:.3e}"))?;

    let mut rho_min: f64 = 1.0;
    let mut rng = stream(99, Stream::Instances);
    for batch_no in 0..5 {
        let base = random_instance(&mut rng, 20, 0, 1.0);
        let tuples: Vec<PreferenceTuple> = (0..200)
            .map(|i| {
                let mut t = random_instance(&mut rng, 20, i % 2, 1.0).tuple;
                t.id = format!("b{batch_no}-{i:03}");
                t
            })
            .collect();
        let refs: Vec<&PreferenceTuple> = tuples.iter().collect();
        let mut srng = stream(0, Stream::Scores);
        let s = score_batch(&base.policy, &base.reference, &refs, Acquisition::Sharp, BETA, &mut srng).unwrap();
        let w = score_batch(&base.policy, &base.reference, &refs, Acquisition::WSharp, BETA, &mut srng).unwrap();
        let (a, b): (Vec<f64>, Vec<f64>) = s
            .iter()
            .zip(&w)
            .filter(|(x, y)| !x.score.is_infinite() && !y.score.is_infinite())
            .map(|(x, y)| (x.score.value(), y.score.value()))
            .unzip();
        rho_min = rho_min.min(spearman(&a, &b));
    }
    ensure((rho_min - 1.0).abs() < 1e-12, || format!("Spearman {rho_min}"))?;
    Ok(format!("coth {worst_sharp:.2e}, csch {worst_wsharp:.2e}, min Spearman {rho_min}"))
}

fn swap_invariance() -> Outcome {
    let mut rng = stream(4242, Stream::Instances);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let inst = random_instance(&mut rng, 20, i % 3, 1.0);
        let swapped = inst.tuple.swapped();
        for kind in [Acquisition::Sharp, Acquisition::WSharp] {
            let mut srng = stream(0, Stream::Scores);
            let a = score_batch(&inst.policy, &inst.reference, &[&inst.tuple], kind, BETA, &mut srng).unwrap();
            let b = score_batch(&inst.policy, &inst.reference, &[&swapped], kind, BETA, &mut srng).unwrap();
            worst = worst.max(rel_err(a[0].score.value(), b[0].score.value()));
        }
    }
    ensure(worst <= 1e-9, || format!("rel err {worst:.3e}"))?;
    Ok(format!("max rel err {worst:.2e} over 500 instances"))
}

fn bookkeeping() -> Outcome {
    let spec = SynthSpec::new(2000, 20, 7);
    let data = generate(&spec, 0);
    let config = RunConfig { batch_b: 32, pool_multiplier_p: 6, iterations_n: 10, seed: 7, ..RunConfig::default() };
    let once = || {
        let mut ann = SimulatedAnnotator::new(data.oracle.clone(), config.seed);
        let out = run(&config, &data.train, &mut ann, None).unwrap();
        (out, ann.calls())
    };
    let (a, calls) = once();
    let (b, _) = once();
    ensure(a.labeled_set.len() == 320, || format!("|D_L| = {}", a.labeled_set.len()))?;
    ensure(calls == 320, || format!("{calls} annotator calls"))?;
    let mut ids: Vec<_> = a.labeled_set.iter().map(|p| p.tuple_id.clone()).collect();
    ids.sort();
    ids.dedup();
    ensure(ids.len() == 320, || "a tuple was labeled twice".into())?;
    for r in &a.log.records {
        ensure(r.candidate_ids.len() == 192, || format!("pool of {}", r.candidate_ids.len()))?;
        ensure(r.selected_ids.len() == 32, || format!("selected {}", r.selected_ids.len()))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str, log: &sharp_core::RunLog| {
        let p = dir.path().join(name);
        let mut w = JsonlWriter::create(&p).unwrap();
        for r in &log.records {
            w.write(&RunLogRecord::from(r)).unwrap();
        }
        p
    };
    let pa = write("a.jsonl", &a.log);
    let pb = write("b.jsonl", &b.log);
    let (ba, bb) = (std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    ensure(ba == bb, || "run logs differ between identical runs".into())?;
    for rec in read_run_log(&pa).map_err(|e| e.to_string())? {
        rec.check()?;
        let replayed = rec.replay_selection().map_err(|e| e.to_string())?;
        ensure(replayed == rec.selected_ids, || format!("replay diverged at iteration {}", rec.iteration))?;
    }
    Ok(format!("|D_L| = 320, pool = 192 per iteration, {} byte log replayed identically", ba.len()))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..150).collect();
    let kinds = [Acquisition::Sharp, Acquisition::WSharp, Acquisition::Random];
    let mut acc = vec![Vec::new(); 3];
    for &seed in &seeds {
        let data = generate(&SynthSpec::new(2000, 20, 1000 + seed), 500);
        let test = data.test.as_ref().unwrap();
        let pairs = label_test_set(&test.tuples, &data.oracle, seed).map_err(|e| e.to_string())?;
        let eval = EvalSet { test_pairs: pairs.clone(), oracle: Some(data.oracle.clone()) };
        for (k, kind) in kinds.iter().enumerate() {
            let config = RunConfig {
                batch_b: 32,
                pool_multiplier_p: 6,
                iterations_n: 10,
                acquisition: *kind,
                seed,
                ..RunConfig::default()
            };
            let mut ann = SimulatedAnnotator::new(data.oracle.clone(), seed);
            let out = run(&config, &data.train, &mut ann, Some(&eval)).map_err(|e| e.to_string())?;
            acc[k].push(implicit_reward_accuracy(&out.policy, &out.reference, &pairs, config.beta).unwrap());
        }
    }
    let n = seeds.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let paired_se = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let m = mean(&d);
        (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    };
    let (ms, mw, mr) = (mean(&acc[0]), mean(&acc[1]), mean(&acc[2]));
    let detail = format!(
        "acc SHARP {ms:.4} W-SHARP {mw:.4} Random {mr:.4}; gap SHARP-Random {:+.4} ± {:.4}, W-SHARP-Random {:+.4} ± {:.4} (SE, {} seeds); {:.2?}",
        ms - mr,
        paired_se(&acc[0], &acc[2]),
        mw - mr,
        paired_se(&acc[1], &acc[2]),
        seeds.len(),
        start.elapsed()
    );
    ensure(ms >= mr && mw >= mr, || format!("selection did not match Random: {detail}"))?;
    ensure([ms, mw, mr].iter().all(|m| *m >= 0.6), || format!("accuracy below 0.6: {detail}"))?;
    ensure(start.elapsed() < Duration::from_secs(300), || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn annotator_calibration() -> Outcome {
    let oracle = GroundTruthReward { theta_star: vec![1.0], noise_mode: NoiseMode::Stochastic };
    let mut lines = Vec::new();
    for (i, delta) in [0.0, 3f64.ln(), 10.0].into_iter().enumerate() {
        let t = PreferenceTuple::from_features("t", vec![delta], vec![0.0]);
        let mut rng = stream(500 + i as u64, Stream::Annotator);
        let draws = 10_000;
        let first = (0..draws)
            .filter(|_| simulate_label(&oracle, &t, &mut rng).unwrap() == PreferenceLabel::First)
            .count();
        let freq = first as f64 / draws as f64;
        let p = sigmoid(delta);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        ensure((freq - p).abs() <= 3.0 * se, || format!("Δ* = {delta}: freq {freq} vs {p} (3 SE = {})", 3.0 * se))?;
        lines.push(format!("Δ*={delta:.3}: {freq:.4} vs {p:.5}"));
    }
    Ok(lines.join(", "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed-form equivalence", closed_form_equivalence),
        ("gradient relation", gradient_relation),
        ("dpo gradient vs finite differences", dpo_gradient_correctness),
        ("analytic identities and rank coincidence", analytic_identities),
        ("swap invariance", swap_invariance),
        ("loop bookkeeping and replay", bookkeeping),
        ("end-to-end selection vs random", end_to_end),
        ("annotator calibration", annotator_calibration),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
