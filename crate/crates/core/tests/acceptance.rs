//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line and then asserts.
//!
//! cargo test --test acceptance -- --nocapture --test-threads 1

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use entail_rank::attention::{cross_attention_mass, AttentionTensor, SegmentClass, SegmentMap};
use entail_rank::data::{
    load_nli_corpus, load_sc_triples, CorpusDescriptor, CorpusFormat, Split, TripleDataset, TripleFormat,
};
use entail_rank::encoding::{encode_token_pair, SPECIAL_POSITIONS};
use entail_rank::finetune::{
    eval_nli, train_stage, CheckpointStore, StageConfig, StageInit, TrainConfig, TrainError, TINY_BASE,
};
use entail_rank::model::{NliEncoder, TinyEncoderSpec};
use entail_rank::nli::{EntailmentScore, SummaryTriple};
use entail_rank::rank_eval::{evaluate_sc, mine_failures, rank_candidates, ratio_histogram};
use entail_rank::scorer::{EntailmentScorer, LookupTable, ModelScorer};
use entail_rank::synth;
use entail_rank::tokenize::Tokenizer;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Score-sum tolerance for normalization.
const SUM_TOL: f64 = 1e-6;
/// Tolerance for cross-attention closed forms and oracles.
const ATTN_TOL: f64 = 1e-9;
/// Minimum relative drop of mean loss from the first to the last epoch.
const LOSS_DROP: f64 = 0.20;
/// Minimum dev accuracy of the desk-scale run.
const DEV_ACC: f64 = 0.40;

fn cases(n: u32) -> Config {
    Config {
        cases: n,
        failure_persistence: None,
        ..Config::default()
    }
}

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n:>2}: {} {name} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

fn score_with_entail(p: f64) -> EntailmentScore {
    EntailmentScore::new(p, (1.0 - p) / 2.0, (1.0 - p) / 2.0).unwrap()
}

/// Triples with a lookup table assigning each side the given entailment
/// probability.
fn table_for(triples: &[SummaryTriple], probs: &[(f64, f64)]) -> LookupTable {
    let mut table = LookupTable::default();
    for (t, &(plus, minus)) in triples.iter().zip(probs) {
        table.insert(&t.source, &t.correct, score_with_entail(plus));
        table.insert(&t.source, &t.incorrect, score_with_entail(minus));
    }
    table
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let plus: f64 = rng.random();
            // about one in eight triples is an exact tie
            let minus = if rng.random_bool(0.125) { plus } else { rng.random() };
            (plus, minus)
        })
        .collect()
}

#[test]
fn criterion_01_accuracy_matches_brute_force() {
    let start = Instant::now();
    let triples = synth::sc_triples(200, 101);
    let probs = random_probs(&mut ChaCha8Rng::seed_from_u64(2024), triples.len());
    let table = table_for(&triples, &probs);
    let dataset = TripleDataset::new("synthetic", triples).unwrap();
    let report = evaluate_sc(&table, &dataset, "lookup").unwrap();

    let mut brute = 0usize;
    for &(plus, minus) in &probs {
        if plus > minus {
            brute += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = report.n_correct == brute && report.n_examples == 200 && elapsed < 1.0;
    verdict(
        1,
        "pairwise accuracy equals brute-force count",
        pass,
        &format!(
            "{}/{} vs brute {brute}/200 in {elapsed:.3}s",
            report.n_correct, report.n_examples
        ),
    );
}

fn converted_release(dir: &Path) -> TripleDataset {
    let release = dir.join("sc_release.json");
    synth::write_sc_release(&release, &synth::sc_triples(373, 7)).unwrap();
    let converted = dir.join("sc.jsonl");
    let status = Command::new(env!("CARGO_BIN_EXE_entail-rank"))
        .args(["convert", "--format", "sc-release", "--input"])
        .arg(&release)
        .arg("--output")
        .arg(&converted)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    load_sc_triples(&converted, TripleFormat::CanonicalJsonl).unwrap()
}

#[test]
fn criterion_02_ties_count_as_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = converted_release(dir.path());
    let constant = LookupTable::new(score_with_entail(0.42));
    let tie = evaluate_sc(&constant, &dataset, "constant").unwrap();

    let mut perfect = LookupTable::default();
    for t in &dataset.triples {
        perfect.insert(&t.source, &t.correct, score_with_entail(1.0));
        perfect.insert(&t.source, &t.incorrect, score_with_entail(0.0));
    }
    let best = evaluate_sc(&perfect, &dataset, "oracle").unwrap();
    let pass = dataset.len() == 373
        && tie.summary_line() == "accuracy = 0.00% (0/373)"
        && best.summary_line() == "accuracy = 100.00% (373/373)";
    verdict(
        2,
        "constant scorer 0.00%, perfect scorer 100.00%",
        pass,
        &format!("{} / {}", tie.summary_line(), best.summary_line()),
    );
}

type Transform = (&'static str, fn(f64) -> f64);

fn monotone_transforms() -> Vec<Transform> {
    vec![
        ("square", |p| p * p),
        ("sqrt", f64::sqrt),
        ("exp", |p| (p.exp() - 1.0) / (1f64.exp() - 1.0)),
        ("affine", |p| 0.1 + 0.8 * p),
    ]
}

#[test]
fn criterion_03_monotone_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut mismatches = 0;
    let transforms = monotone_transforms();
    for run in 0..100 {
        let (name, f) = transforms[run % transforms.len()];
        let n = rng.random_range(5..40);
        let triples = synth::sc_triples(n, 1000 + run as u64);
        let probs = random_probs(&mut rng, n);
        let mapped: Vec<(f64, f64)> = probs.iter().map(|&(a, b)| (f(a), f(b))).collect();
        let dataset = TripleDataset::new("run", triples.clone()).unwrap();
        let before = evaluate_sc(&table_for(&triples, &probs), &dataset, "raw").unwrap();
        let after = evaluate_sc(&table_for(&triples, &mapped), &dataset, name).unwrap();
        if before
            .outcomes
            .iter()
            .zip(&after.outcomes)
            .any(|(a, b)| a.correct != b.correct)
        {
            mismatches += 1;
        }

        let k = rng.random_range(1..8);
        let doc = &triples[0].source;
        let cands: Vec<String> = (0..k).map(|i| format!("candidate {i}")).collect();
        let raw: Vec<f64> = (0..k).map(|_| (rng.random_range(0..20) as f64) / 20.0).collect();
        let mut t_raw = LookupTable::default();
        let mut t_mapped = LookupTable::default();
        for (c, &p) in cands.iter().zip(&raw) {
            t_raw.insert(doc, c, score_with_entail(p));
            t_mapped.insert(doc, c, score_with_entail(f(p)));
        }
        let a = rank_candidates(&t_raw, doc, &cands).unwrap();
        let b = rank_candidates(&t_mapped, doc, &cands).unwrap();
        if a.chosen_index != b.chosen_index {
            mismatches += 1;
        }
    }
    verdict(
        3,
        "strictly increasing transform keeps flags and choices",
        mismatches == 0,
        &format!("{mismatches} mismatching runs of 100"),
    );
}

#[test]
fn criterion_04_scores_are_normalized() {
    let texts: Vec<_> = synth::nli_examples(60, 4, "v")
        .into_iter()
        .flat_map(|e| [e.premise, e.hypothesis])
        .collect();
    let model = NliEncoder::init(&TinyEncoderSpec::default(), texts.iter().map(String::as_str), 5).unwrap();
    let words: Vec<String> = (0..model.vocab.len() as u32)
        .filter_map(|i| model.vocab.token(i).map(str::to_string))
        .chain(["zebra".to_string(), "quantum".to_string()])
        .collect();
    let scorer = ModelScorer::new(model, 128, 16, "tiny");

    let worst = std::cell::Cell::new(0.0f64);
    let mut runner = TestRunner::new(cases(500));
    let word = proptest::sample::select(words);
    let strategy = (
        proptest::collection::vec(word.clone(), 1..80),
        proptest::collection::vec(word, 1..80),
    );
    let model_result = runner.run(&strategy, |(p, h)| {
        let s = scorer.score_pair(&p.join(" "), &h.join(" ")).unwrap();
        let dev = (s.as_array().iter().sum::<f64>() - 1.0).abs();
        worst.set(worst.get().max(dev));
        prop_assert!(dev <= SUM_TOL);
        prop_assert!(s.as_array().iter().all(|v| (0.0..=1.0).contains(v)));
        Ok(())
    });

    let mut runner = TestRunner::new(cases(500));
    let lookup_result = runner.run(&(0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), |(a, b, c)| {
        let total = a + b + c + 1e-12;
        let mut table = LookupTable::default();
        table.insert(
            "d",
            "s",
            EntailmentScore::new(a / total, b / total, 1.0 - a / total - b / total).unwrap(),
        );
        let s = table.score_pair("d", "s").unwrap();
        let dev = (s.as_array().iter().sum::<f64>() - 1.0).abs();
        prop_assert!(dev <= SUM_TOL);
        Ok(())
    });
    let pass = model_result.is_ok() && lookup_result.is_ok();
    verdict(
        4,
        "1000 scorer outputs sum to 1",
        pass,
        &format!(
            "500 model + 500 lookup, worst model deviation {:.2e}, tolerance {SUM_TOL:e}",
            worst.get()
        ),
    );
}

#[test]
fn criterion_05_truncation_properties() {
    const MAX_LEN: usize = 128;
    let mut runner = TestRunner::new(cases(2000));
    let result = runner.run(&(1usize..400, 1usize..400), |(p, h)| {
        let premise: Vec<u32> = (0..p as u32).map(|i| 10 + i).collect();
        let hypothesis: Vec<u32> = (0..h as u32).map(|i| 1000 + i).collect();
        let enc = encode_token_pair(&premise, &hypothesis, MAX_LEN, 2, 3).unwrap();
        prop_assert!(enc.len() <= MAX_LEN);
        prop_assert!(enc.premise_len() >= 1 && enc.hypothesis_len() >= 1);
        // segments keep their heads
        prop_assert_eq!(&enc.token_ids[enc.premise_span.clone()], &premise[..enc.premise_len()]);
        prop_assert_eq!(
            &enc.token_ids[enc.hypothesis_span.clone()],
            &hypothesis[..enc.hypothesis_len()]
        );
        if p + h + SPECIAL_POSITIONS <= MAX_LEN {
            prop_assert_eq!((enc.premise_len(), enc.hypothesis_len()), (p, h));
        }
        Ok(())
    });
    verdict(
        5,
        "encodings fit max_len=128, keep both segments, leave fitting pairs alone",
        result.is_ok(),
        &format!(
            "2000 random length pairs: {}",
            result.as_ref().map_or_else(|e| e.to_string(), |_| "ok".into())
        ),
    );
}

#[test]
fn criterion_06_ratio_machinery() {
    let triples = synth::sc_triples(20, 66);
    // hand-picked probabilities covering ties, zeros and ratios on both
    // sides of the 0.1 threshold
    let probs: Vec<(f64, f64)> = vec![
        (0.9, 0.1),
        (0.05, 0.9),
        (0.5, 0.5),
        (0.0, 0.0),
        (0.0, 0.3),
        (0.2, 0.8),
        (0.09, 1.0),
        (0.1, 1.0),
        (0.3, 0.2),
        (0.01, 0.5),
        (0.7, 0.0),
        (0.45, 0.5),
        (0.02, 0.25),
        (0.6, 0.61),
        (0.33, 0.33),
        (0.08, 0.79),
        (0.95, 0.94),
        (0.001, 0.002),
        (0.4, 0.9),
        (0.011, 0.12),
    ];
    let table = table_for(&triples, &probs);
    let dataset = TripleDataset::new("twenty", triples.clone()).unwrap();
    let report = evaluate_sc(&table, &dataset, "lookup").unwrap();

    // hand computation: incorrect when minus >= plus, ratio plus / minus
    let mut expected: Vec<(f64, &str)> = Vec::new();
    let mut n_incorrect = 0;
    for (t, &(plus, minus)) in triples.iter().zip(&probs) {
        if minus >= plus {
            n_incorrect += 1;
            let ratio = if plus == 0.0 && minus == 0.0 { 1.0 } else { plus / minus };
            if ratio < 0.1 {
                expected.push((ratio, &t.id));
            }
        }
    }
    expected.sort_by(|a, b| a.0.total_cmp(&b.0));
    let expected_ids: Vec<String> = expected.iter().map(|(_, id)| id.to_string()).collect();
    let mined = mine_failures(&report.outcomes, 0.1).unwrap();

    let incorrect_ratios_ok = report.outcomes.iter().filter(|o| !o.correct).all(|o| o.ratio <= 1.0);
    let h_inc = ratio_histogram(&report.outcomes, 10, true).unwrap();
    let h_all = ratio_histogram(&report.outcomes, 10, false).unwrap();
    let sums_ok = h_inc.counts.iter().sum::<usize>() == n_incorrect
        && h_inc.total == n_incorrect
        && h_all.counts.iter().sum::<usize>() == 20;
    let pass = mined == expected_ids && incorrect_ratios_ok && sums_ok && !expected_ids.is_empty();
    verdict(
        6,
        "histogram conservation, incorrect ratios <= 1, exact failure mining",
        pass,
        &format!("{} incorrect, failures {:?}", n_incorrect, mined),
    );
}

/// Cross fraction per layer/head via indicator-vector products.
fn oracle_cross(attn: &[Vec<Array2<f64>>], classes: &[SegmentClass]) -> Vec<Vec<Option<f64>>> {
    let ind = |c: SegmentClass| Array1::from_iter(classes.iter().map(|x| if *x == c { 1.0 } else { 0.0 }));
    let (pi, hi) = (ind(SegmentClass::Premise), ind(SegmentClass::Hypothesis));
    let ni = &pi + &hi;
    attn.iter()
        .map(|heads| {
            heads
                .iter()
                .map(|a| {
                    let cross = pi.dot(&a.dot(&hi)) + hi.dot(&a.dot(&pi));
                    let total = ni.dot(&a.dot(&ni));
                    (total > 0.0).then(|| cross / total)
                })
                .collect()
        })
        .collect()
}

fn pair_segments(p: usize, h: usize) -> Vec<SegmentClass> {
    let mut s = vec![SegmentClass::Special];
    s.extend(std::iter::repeat_n(SegmentClass::Premise, p));
    s.push(SegmentClass::Special);
    s.extend(std::iter::repeat_n(SegmentClass::Hypothesis, h));
    s.push(SegmentClass::Special);
    s
}

#[test]
fn criterion_07_cross_attention_mass() {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (p, h) in [(4usize, 4usize), (8, 2), (16, 16)] {
        let n = p + h + 3;
        let uniform = Array2::from_elem((n, n), 1.0 / n as f64);
        let attn = AttentionTensor::broadcast(2, 3, &uniform).unwrap();
        let profile = cross_attention_mass(&attn, &SegmentMap(pair_segments(p, h))).unwrap();
        let closed = 2.0 * (p * h) as f64 / ((p + h) * (p + h)) as f64;
        for v in profile
            .per_layer_mean
            .iter()
            .chain(profile.cross_fraction.iter().flatten())
        {
            let d = (v.unwrap() - closed).abs();
            worst = worst.max(d);
            ok &= d <= ATTN_TOL;
        }

        let identity = AttentionTensor::broadcast(2, 3, &Array2::eye(n)).unwrap();
        let profile = cross_attention_mass(&identity, &SegmentMap(pair_segments(p, h))).unwrap();
        ok &= profile.per_layer_mean.iter().all(|v| *v == Some(0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let (p, h) = (rng.random_range(1..12), rng.random_range(1..12));
        let n = p + h + 3;
        let (layers, heads) = (rng.random_range(1..4), rng.random_range(1..4));
        let mats: Vec<Vec<Array2<f64>>> = (0..layers)
            .map(|_| {
                (0..heads)
                    .map(|_| {
                        let mut m = Array2::from_shape_fn((n, n), |_| rng.random::<f64>().powi(3));
                        for mut row in m.rows_mut() {
                            let s = row.sum();
                            row /= s;
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        let classes = pair_segments(p, h);
        let attn = AttentionTensor::from_matrices(&mats).unwrap();
        let got = cross_attention_mass(&attn, &SegmentMap(classes.clone())).unwrap();
        let want = oracle_cross(&mats, &classes);
        for (g, w) in got.cross_fraction.iter().flatten().zip(want.iter().flatten()) {
            let d = (g.unwrap() - w.unwrap()).abs();
            worst = worst.max(d);
            ok &= d <= ATTN_TOL;
        }
    }
    verdict(
        7,
        "uniform closed form, identity zero, random tensors match oracle",
        ok,
        &format!("max deviation {worst:.2e}, tolerance {ATTN_TOL:e}"),
    );
}

#[test]
fn criterion_08_desk_scale_training() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("mnli_train.tsv");
    let dev = dir.path().join("mnli_dev.tsv");
    synth::write_mnli_tsv(&train, &synth::nli_examples(2000, 11, "mnli"), None).unwrap();
    synth::write_mnli_tsv(&dev, &synth::nli_examples(300, 13, "dev"), None).unwrap();
    let config = TrainConfig {
        base_model_ref: TINY_BASE.into(),
        model: TinyEncoderSpec::default(),
        stages: vec![StageConfig {
            name: "mnli".into(),
            corpora: vec![CorpusDescriptor::new(
                "mnli",
                &train,
                CorpusFormat::MnliTsv,
                Split::Train,
            )],
            include_previous: false,
        }],
        learning_rate: 1e-3,
        epochs_per_stage: 3,
        batch_size: 16,
        max_len: 128,
        seed: 7,
        weight_decay: 0.01,
        max_grad_norm: 1.0,
        eval_corpus: CorpusDescriptor::new("dev", &dev, CorpusFormat::MnliTsv, Split::Dev),
    };
    assert!(config.model.layers <= 2);
    let store = CheckpointStore::open(dir.path().join("store")).unwrap();
    let ck = train_stage(&config, 0, StageInit::Base, &store).unwrap();

    let losses = &ck.metrics.epoch_mean_loss;
    let drop = 1.0 - losses[2] / losses[0];
    // re-evaluate the stored checkpoint independently of the training loop
    let dev_examples = load_nli_corpus(&config.eval_corpus).unwrap().examples;
    let counts = entail_rank::data::label_counts(&dev_examples);
    let scorer = ModelScorer::load(&store.dir(&ck.id), 128, 64).unwrap();
    let acc = eval_nli(&scorer, &dev_examples).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = losses.len() == 3 && drop >= LOSS_DROP && acc > DEV_ACC && counts == [100, 100, 100] && elapsed < 600.0;
    verdict(
        8,
        "tiny encoder on 2k MNLI, 3 epochs",
        pass,
        &format!(
            "epoch losses {:.3}/{:.3}/{:.3}, drop {:.1}%, dev accuracy {:.2}% on 300 balanced, {elapsed:.0}s",
            losses[0],
            losses[1],
            losses[2],
            drop * 100.0,
            acc * 100.0
        ),
    );
}

#[test]
fn criterion_09_full_scale_is_declared_not_reproduced() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/full_scale.toml");
    let text = std::fs::read_to_string(&path).unwrap();
    let config = TrainConfig::from_toml(&text).unwrap();
    let stages: Vec<_> = config.stages.iter().map(|s| s.name.as_str()).collect();
    let documented = text.contains("82.57") && text.contains("71.31") && text.contains("2 percentage points");

    // the desk build has no pretrained encoder to start from and refuses to
    // pretend otherwise
    let dir = tempfile::tempdir().unwrap();
    let store = CheckpointStore::open(dir.path()).unwrap();
    let refused = matches!(
        train_stage(&config, 0, StageInit::Base, &store),
        Err(TrainError::UnknownBase(_) | TrainError::Data(_))
    );
    let pass = stages == ["mnli", "anli"] && config.base_model_ref != TINY_BASE && documented && refused;
    verdict(
        9,
        "DECLARED NOT DESK-REPRODUCIBLE: full-scale config ships with documented targets, CI does not run it",
        pass,
        &format!("stages {stages:?}, base {:?}", config.base_model_ref),
    );
}

#[test]
fn criterion_10_cli_evaluate_fixture() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let output = Command::new(env!("CARGO_BIN_EXE_entail-rank"))
            .arg("evaluate")
            .arg("--triples")
            .arg(fixtures.join("four_triples.jsonl"))
            .arg("--table")
            .arg(fixtures.join("four_table.jsonl"))
            .arg("--output")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        (output.status.code(), String::from_utf8(output.stdout).unwrap())
    };
    let (code_a, stdout_a) = run("a.json");
    let (code_b, stdout_b) = run("b.json");
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    let pass = code_a == Some(0)
        && code_b == Some(0)
        && stdout_a == "accuracy = 75.00% (3/4)\n"
        && stdout_a == stdout_b
        && a == b;
    verdict(
        10,
        "CLI evaluate prints 75.00% (3/4), reruns are byte-identical",
        pass,
        &format!("stdout {:?}, reports identical: {}", stdout_a.trim(), a == b),
    );
}
