//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgt_detect::classifiers::{
    logreg_gradient, logreg_objective, tune_var_smoothing, Classifier, Dataset, FamilyConfig,
};
use mgt_detect::embeddings::{
    negative_sampling_gradient, negative_sampling_loss, train_skipgram, SkipGramConfig,
};
use mgt_detect::eval::{auroc, confusion, f1_score, metrics};
use mgt_detect::ingest::{Corpus, Document, Label, ParsedSentence};
use mgt_detect::stats::{
    corpus_report, flesch_kincaid_grade, mean_dependency_distance, mean_sentence_length,
    type_token_ratio, BinConfig, ClassParses,
};
use mgt_detect::zeroshot::{
    detect_gpt_score, single_revise_score, train_kn_lm, NGramLm, PerturbConfig, SubstitutionPool,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. AUROC rank statistic vs brute-force pairs.
const AUROC_MAX_ERR: f64 = 1e-12;
const AUROC_SETS: usize = 1000;
const AUROC_MAX_N: usize = 50;
const AUROC_TIME: Duration = Duration::from_secs(5);

fn pairwise_auroc(scores: &[f64], labels: &[Label]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, li) in labels.iter().enumerate() {
        if !li.is_machine() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_machine() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_err: f64 = 0.0;
    let mut ties = 0usize;
    for _ in 0..AUROC_SETS {
        let n = rng.random_range(2..=AUROC_MAX_N);
        let mut labels: Vec<Label> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Label::Machine } else { Label::Human })
            .collect();
        labels[0] = Label::Machine;
        labels[1] = Label::Human;
        // A coarse grid forces ties.
        let levels = rng.random_range(2..=10);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() < n {
            ties += 1;
        }
        let fast = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        max_err = max_err.max((fast - pairwise_auroc(&scores, &labels)).abs());
    }
    let elapsed = start.elapsed();
    check(
        max_err <= AUROC_MAX_ERR && elapsed < AUROC_TIME && ties > 0,
        format!("max abs error {max_err:.2e}, {ties} sets with ties, {elapsed:.2?}"),
    )
}

// 2. F1 at P = R = 0.97.
const PAPER_F1: f64 = 0.97;

fn criterion_2() -> Outcome {
    let direct = f1_score(0.97, 0.97);
    // 97 true positives, 3 false positives, 3 false negatives.
    let mut preds = vec![Label::Machine; 97];
    let mut labels = vec![Label::Machine; 97];
    preds.extend([Label::Machine; 3]);
    labels.extend([Label::Human; 3]);
    preds.extend([Label::Human; 3]);
    labels.extend([Label::Machine; 3]);
    preds.extend([Label::Human; 97]);
    labels.extend([Label::Human; 97]);
    let scores: Vec<f64> = preds.iter().map(|p| if p.is_machine() { 1.0 } else { 0.0 }).collect();
    let cm = confusion(&preds, &labels).map_err(|e| e.to_string())?;
    let report = metrics(&cm, &scores, &labels).map_err(|e| e.to_string())?;
    check(
        direct == PAPER_F1
            && report.precision == PAPER_F1
            && report.recall == PAPER_F1
            && report.f1 == PAPER_F1,
        format!(
            "f1_score = {direct}, report P/R/F1 = {}/{}/{}",
            report.precision, report.recall, report.f1
        ),
    )
}

// 3. Embedding classifiers on two synthetic sources.
const SEP_PER_CLASS: usize = 500;
const SEP_TIME: Duration = Duration::from_secs(60);
const SEP_MIN_F1: [(&str, f64); 4] = [
    ("svm", 0.90),
    ("logreg", 0.90),
    ("gnb", 0.80),
    ("random_forest", 0.85),
];

fn stratified_80_20(human: &[String], machine: &[String], seed: u64) -> (Corpus, Corpus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, texts, tag) in [(Label::Human, human, "h"), (Label::Machine, machine, "m")] {
        let mut idx: Vec<usize> = (0..texts.len()).collect();
        idx.shuffle(&mut rng);
        let n_test = texts.len() / 5;
        for (k, &i) in idx.iter().enumerate() {
            let doc = Document::new(format!("{tag}{i}"), &texts[i], label).unwrap();
            if k < n_test {
                test.push(doc);
            } else {
                train.push(doc);
            }
        }
    }
    (Corpus::new(train).unwrap(), Corpus::new(test).unwrap())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (human, machine) = common::two_source_documents(SEP_PER_CLASS, 3);
    let (train, test) = stratified_80_20(&human, &machine, 3);
    let config = SkipGramConfig {
        dim: 32,
        epochs: 5,
        min_count: 1,
        seed: 3,
        ..SkipGramConfig::default()
    };
    let emb = train_skipgram(train.iter().map(|d| d.body.as_str()), &config)
        .map_err(|e| e.to_string())?;
    let train_data = Dataset::from_corpus(&train, &emb).map_err(|e| e.to_string())?;
    let test_data = Dataset::from_corpus(&test, &emb).map_err(|e| e.to_string())?;

    let mut parts = Vec::new();
    let mut ok = true;
    for (family, min_f1) in SEP_MIN_F1 {
        let cfg: FamilyConfig =
            serde_json::from_value(serde_json::json!({ "family": family })).unwrap();
        let clf = Classifier::fit(&train_data, &cfg, 3).map_err(|e| e.to_string())?;
        let preds = test_data
            .features()
            .iter()
            .map(|x| clf.predict(x).map(|p| p.label))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let f1 = confusion(&preds, test_data.labels()).map_err(|e| e.to_string())?.f1();
        ok &= f1 >= min_f1;
        parts.push(format!("{family} {f1:.3} (min {min_f1})"));
    }
    let elapsed = start.elapsed();
    check(
        ok && elapsed < SEP_TIME,
        format!("test F1: {}; {elapsed:.2?}", parts.join(", ")),
    )
}

// 4 and 5. Curvature detectors on LM samples vs shuffled human text.
const LM_SENTENCES: usize = 2000;
const CURV_DOCS: usize = 200;
const CURV_K: usize = 20;
const DETECT_GPT_MIN_AUROC: f64 = 0.80;
const SINGLE_REVISE_MIN_AUROC: f64 = 0.70;
const MIN_SPEEDUP: f64 = 5.0;

struct CurvatureFixture {
    lm: NGramLm,
    pool: SubstitutionPool,
    docs: Vec<String>,
    labels: Vec<Label>,
}

fn curvature_fixture() -> CurvatureFixture {
    let (human_src, machine_src) = common::two_sources(4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sentences: Vec<String> = (0..LM_SENTENCES).map(|_| machine_src.sentence(&mut rng)).collect();
    let lm = train_kn_lm(&sentences, 3, 0.75).unwrap();
    let pool = SubstitutionPool::from_vocab(lm.vocab(), true).unwrap();
    let mut docs = Vec::with_capacity(2 * CURV_DOCS);
    let mut labels = Vec::with_capacity(2 * CURV_DOCS);
    for _ in 0..CURV_DOCS {
        let n = rng.random_range(2..=4);
        docs.push(lm.sample_document(&mut rng, n, 30));
        labels.push(Label::Machine);
    }
    for _ in 0..CURV_DOCS {
        let n = rng.random_range(2..=4);
        let doc = human_src.document(&mut rng, n);
        docs.push(common::shuffle_words(&doc, &mut rng));
        labels.push(Label::Human);
    }
    CurvatureFixture { lm, pool, docs, labels }
}

struct CurvatureRun {
    auroc: f64,
    mean_passes: f64,
    elapsed: Duration,
}

fn run_curvature(fx: &CurvatureFixture, single: bool) -> Result<CurvatureRun, String> {
    let cfg = PerturbConfig {
        k: if single { 1 } else { CURV_K },
        seed: 4,
        ..PerturbConfig::default()
    };
    fx.lm.reset_passes();
    let start = Instant::now();
    let scores = fx
        .docs
        .iter()
        .map(|d| {
            if single {
                single_revise_score(&fx.lm, &fx.pool, d, &cfg)
            } else {
                detect_gpt_score(&fx.lm, &fx.pool, d, &cfg)
            }
            .map(|s| s.d)
        })
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    Ok(CurvatureRun {
        auroc: auroc(&scores, &fx.labels).map_err(|e| e.to_string())?,
        mean_passes: fx.lm.scoring_passes() as f64 / fx.docs.len() as f64,
        elapsed,
    })
}

fn criterion_4(fx: &CurvatureFixture) -> Outcome {
    let r = run_curvature(fx, false)?;
    check(
        r.auroc >= DETECT_GPT_MIN_AUROC,
        format!("DetectGPT AUROC {:.4} (min {DETECT_GPT_MIN_AUROC})", r.auroc),
    )
}

fn criterion_5(fx: &CurvatureFixture) -> Outcome {
    let full = run_curvature(fx, false)?;
    let fast = run_curvature(fx, true)?;
    let speedup = full.elapsed.as_secs_f64() / fast.elapsed.as_secs_f64();
    check(
        fast.mean_passes == 2.0
            && full.mean_passes == (CURV_K + 1) as f64
            && speedup >= MIN_SPEEDUP
            && fast.auroc >= SINGLE_REVISE_MIN_AUROC,
        format!(
            "passes/doc {} vs {}, wall clock {:.2?} vs {:.2?} ({speedup:.1}x), Single-Revise AUROC {:.4}",
            fast.mean_passes, full.mean_passes, fast.elapsed, full.elapsed, fast.auroc
        ),
    )
}

// 6. Hand-computed corpus statistics.
const STATS_TOL: f64 = 1e-9;

struct StatsFixture {
    text: &'static str,
    ttr: f64,
    fkgl: f64,
    sentence_length: f64,
    heads: &'static [usize],
    dependency_distance: f64,
}

// FKGL = 0.39 * words/sentences + 11.8 * syllables/words - 15.59, with
// syllables counted as vowel groups (y included) minus a final silent e.
const STATS_FIXTURES: [StatsFixture; 10] = [
    // 3 words, 1 sentence, 3 syllables. Arcs 1->2, 2->3.
    StatsFixture {
        text: "The cat sat.",
        ttr: 1.0,
        fkgl: 0.39 * 3.0 + 11.8 - 15.59,
        sentence_length: 3.0,
        heads: &[2, 3, 0],
        dependency_distance: 1.0,
    },
    // 7 words (5 types), 2 sentences, 7 syllables. Distances 1, 2, 3.
    StatsFixture {
        text: "The dog saw the dog. It ran!",
        ttr: 5.0 / 7.0,
        fkgl: 0.39 * 3.5 + 11.8 - 15.59,
        sentence_length: 3.5,
        heads: &[0, 1, 1, 1],
        dependency_distance: 2.0,
    },
    // beau-ti-ful 3, el-e-phants 3, are 1, re-mar-ka-ble 3, crea-tu-res 3.
    // Distances 3, 2, 1, 1.
    StatsFixture {
        text: "Beautiful elephants are remarkable creatures.",
        ttr: 1.0,
        fkgl: 0.39 * 5.0 + 11.8 * 13.0 / 5.0 - 15.59,
        sentence_length: 5.0,
        heads: &[4, 4, 4, 0, 4],
        dependency_distance: 1.75,
    },
    // "Dr." does not end a sentence. dr 1, smith 1, ar-ri-ved 3, he 1,
    // smi-led 2. Distances 2, 1, 1, 1.
    StatsFixture {
        text: "Dr. Smith arrived. He smiled?",
        ttr: 1.0,
        fkgl: 0.39 * 2.5 + 11.8 * 8.0 / 5.0 - 15.59,
        sentence_length: 2.5,
        heads: &[3, 3, 0, 3, 4],
        dependency_distance: 1.25,
    },
    // "don't" is one word; 4 words, 3 types, 4 syllables.
    StatsFixture {
        text: "Don't stop, don't go.",
        ttr: 0.75,
        fkgl: 0.39 * 4.0 + 11.8 - 15.59,
        sentence_length: 4.0,
        heads: &[0, 1],
        dependency_distance: 1.0,
    },
    // No terminator: one sentence. Distances 4, 3, 2, 1.
    StatsFixture {
        text: "Yes yes yes yes yes",
        ttr: 0.2,
        fkgl: 0.39 * 5.0 + 11.8 - 15.59,
        sentence_length: 5.0,
        heads: &[5, 5, 5, 5, 0],
        dependency_distance: 2.5,
    },
    // "3" is a word with one syllable. i 1, ate 1, 3 1, ap-ples 2, to-day 2,
    // rea-lly 2. Five arcs of length 1.
    StatsFixture {
        text: "I ate 3 apples today. Really.",
        ttr: 1.0,
        fkgl: 0.39 * 3.0 + 11.8 * 9.0 / 6.0 - 15.59,
        sentence_length: 3.0,
        heads: &[2, 0, 2, 3, 4, 5],
        dependency_distance: 1.0,
    },
    // "ueue" is one vowel group. Distances 1, 2.
    StatsFixture {
        text: "Queue.",
        ttr: 1.0,
        fkgl: 0.39 + 11.8 - 15.59,
        sentence_length: 1.0,
        heads: &[0, 1, 1],
        dependency_distance: 1.5,
    },
    // Case folds to one type. Distances 2, 1.
    StatsFixture {
        text: "The the THE.",
        ttr: 1.0 / 3.0,
        fkgl: 0.39 * 3.0 + 11.8 - 15.59,
        sentence_length: 3.0,
        heads: &[3, 1, 0],
        dependency_distance: 1.5,
    },
    // The ellipsis ends a sentence only at its last period. Distances
    // 3, 2, 1, 4.
    StatsFixture {
        text: "Wait... what?",
        ttr: 1.0,
        fkgl: 0.39 + 11.8 - 15.59,
        sentence_length: 1.0,
        heads: &[0, 5, 5, 5, 1],
        dependency_distance: 2.5,
    },
];

fn criterion_6() -> Outcome {
    let mut max_err: f64 = 0.0;
    let mut worst = String::new();
    for (i, fx) in STATS_FIXTURES.iter().enumerate() {
        let doc = Document::new(format!("f{i}"), fx.text, Label::Human).unwrap();
        let tokens = (1..=fx.heads.len()).map(|k| format!("t{k}")).collect();
        let sent = ParsedSentence::new(tokens, fx.heads.to_vec())?;
        let got = [
            ("ttr", type_token_ratio(&doc).map_err(|e| e.to_string())?, fx.ttr),
            ("fkgl", flesch_kincaid_grade(&doc).map_err(|e| e.to_string())?, fx.fkgl),
            (
                "sentence_length",
                mean_sentence_length(&doc).map_err(|e| e.to_string())?,
                fx.sentence_length,
            ),
            (
                "dependency_distance",
                mean_dependency_distance(&sent).map_err(|e| e.to_string())?,
                fx.dependency_distance,
            ),
        ];
        for (name, value, expected) in got {
            let err = (value - expected).abs();
            if err > max_err || !err.is_finite() {
                max_err = if err.is_finite() { err } else { f64::INFINITY };
                worst = format!("fixture {i} {name}: {value} vs {expected}");
            }
        }
    }
    check(
        max_err <= STATS_TOL,
        format!("10 fixtures, max abs error {max_err:.2e}{}", if worst.is_empty() { String::new() } else { format!(" ({worst})") }),
    )
}

// 7. Orderings between a plain corpus and a long, polysyllabic one.
const PLAIN_WORDS: &[&str] = &[
    "we", "went", "to", "the", "shop", "and", "got", "milk", "it", "was", "cold", "out", "so", "I",
    "wore", "a", "coat", "my", "dog", "ran", "fast", "she", "sat", "by", "fire", "he", "ate",
    "bread", "they", "sang", "loud", "you", "read", "book", "sun", "set", "late", "rain", "fell",
];
const ELABORATE_WORDS: &[&str] = &[
    "furthermore", "consideration", "significantly", "organizational", "implementation",
    "comprehensive", "methodology", "accordingly", "infrastructure", "optimization",
];

fn plain_doc(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(2..=3))
        .map(|_| {
            let n = rng.random_range(4..=6);
            let ws: Vec<&str> = PLAIN_WORDS.choose_multiple(rng, n).copied().collect();
            format!("{}.", ws.join(" "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn elaborate_doc(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(4..=5))
        .map(|_| {
            let n = rng.random_range(14..=18);
            let ws: Vec<&str> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        *ELABORATE_WORDS.choose(rng).unwrap()
                    } else {
                        *PLAIN_WORDS[..8].choose(rng).unwrap()
                    }
                })
                .collect();
            format!("{}.", ws.join(" "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn chain_parse(len: usize, span: usize) -> ParsedSentence {
    // Token k attaches `span` positions to its right, clamped to the root.
    let root = len;
    let heads = (1..=len)
        .map(|k| if k == root { 0 } else { (k + span).min(root) })
        .collect();
    ParsedSentence::new((0..len).map(|k| format!("w{k}")).collect(), heads).unwrap()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut docs = Vec::new();
    for i in 0..40 {
        docs.push(Document::new(format!("h{i}"), &plain_doc(&mut rng), Label::Human).unwrap());
        docs.push(Document::new(format!("m{i}"), &elaborate_doc(&mut rng), Label::Machine).unwrap());
    }
    let corpus = Corpus::new(docs).map_err(|e| e.to_string())?;
    let parses = ClassParses {
        human: (0..40).map(|i| chain_parse(5 + i % 3, 1)).collect(),
        machine: (0..40).map(|i| chain_parse(15 + i % 5, 3)).collect(),
    };
    let report = corpus_report(&corpus, Some(&parses), &BinConfig::default())
        .map_err(|e| e.to_string())?;
    let h = report.class(Label::Human);
    let m = report.class(Label::Machine);
    let dd = |c: &mgt_detect::stats::ClassStats| c.dependency_distance.as_ref().unwrap().mean;
    let orderings = [
        ("answer length m>h", m.answer_length.mean > h.answer_length.mean),
        ("sentence length m>h", m.sentence_length.mean > h.sentence_length.mean),
        ("FKGL m>h", m.fkgl.mean > h.fkgl.mean),
        ("dependency distance m>h", dd(m) > dd(h)),
        ("TTR h>m", h.ttr.mean > m.ttr.mean),
    ];
    let failed: Vec<&str> = orderings.iter().filter(|o| !o.1).map(|o| o.0).collect();
    check(
        failed.is_empty(),
        format!(
            "length {:.1}/{:.1}, sentence {:.2}/{:.2}, FKGL {:.2}/{:.2}, dep {:.2}/{:.2}, TTR {:.3}/{:.3} (human/machine){}",
            h.answer_length.mean, m.answer_length.mean,
            h.sentence_length.mean, m.sentence_length.mean,
            h.fkgl.mean, m.fkgl.mean,
            dd(h), dd(m),
            h.ttr.mean, m.ttr.mean,
            if failed.is_empty() { String::new() } else { format!("; violated: {}", failed.join(", ")) }
        ),
    )
}

// 8. Analytic gradients vs central differences.
const FD_STEP: f64 = 1e-5;
const FD_MAX_REL: f64 = 1e-4;
const FD_INSTANCES: usize = 20;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_lr: f64 = 0.0;
    let mut worst_sg: f64 = 0.0;
    for _ in 0..FD_INSTANCES {
        let dim = rng.random_range(1..=5);
        let n = rng.random_range(4..=12);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels = (0..n)
            .map(|i| if i % 2 == 0 { Label::Machine } else { Label::Human })
            .collect();
        let data = Dataset::from_rows(features, labels).map_err(|e| e.to_string())?;
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..0.1);
        let (gw, gb) = logreg_gradient(&w, b, &data, l2);
        for k in 0..dim {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[k] += FD_STEP;
            m[k] -= FD_STEP;
            let fd = (logreg_objective(&p, b, &data, l2) - logreg_objective(&m, b, &data, l2))
                / (2.0 * FD_STEP);
            worst_lr = worst_lr.max(rel_err(fd, gw[k]));
        }
        let fd = (logreg_objective(&w, b + FD_STEP, &data, l2)
            - logreg_objective(&w, b - FD_STEP, &data, l2))
            / (2.0 * FD_STEP);
        worst_lr = worst_lr.max(rel_err(fd, gb));

        let n_neg = rng.random_range(1..=4);
        let mut vecs: Vec<Vec<f64>> = (0..2 + n_neg)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let loss = |vecs: &[Vec<f64>]| {
            let negs: Vec<&[f64]> = vecs[2..].iter().map(Vec::as_slice).collect();
            negative_sampling_loss(&vecs[0], &vecs[1], &negs)
        };
        let (gc, gx, gn) = {
            let negs: Vec<&[f64]> = vecs[2..].iter().map(Vec::as_slice).collect();
            negative_sampling_gradient(&vecs[0], &vecs[1], &negs)
        };
        let analytic: Vec<&[f64]> = [gc.as_slice(), gx.as_slice()]
            .into_iter()
            .chain(gn.iter().map(Vec::as_slice))
            .collect();
        for v in 0..vecs.len() {
            for k in 0..dim {
                let orig = vecs[v][k];
                vecs[v][k] = orig + FD_STEP;
                let up = loss(&vecs);
                vecs[v][k] = orig - FD_STEP;
                let down = loss(&vecs);
                vecs[v][k] = orig;
                let fd = (up - down) / (2.0 * FD_STEP);
                worst_sg = worst_sg.max(rel_err(fd, analytic[v][k]));
            }
        }
    }
    check(
        worst_lr < FD_MAX_REL && worst_sg < FD_MAX_REL,
        format!("max relative error: logistic {worst_lr:.2e}, skip-gram {worst_sg:.2e}"),
    )
}

// 9. LM normalization and training perplexity.
const NORM_TOL: f64 = 1e-6;
const NORM_CONTEXTS: usize = 100;

fn criterion_9() -> Outcome {
    let (_, machine_src) = common::two_sources(9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sentences: Vec<String> = (0..LM_SENTENCES).map(|_| machine_src.sentence(&mut rng)).collect();
    let lm = train_kn_lm(&sentences, 3, 0.75).map_err(|e| e.to_string())?;
    let n_pred = lm.predicted_len() as u32;
    let mut max_dev: f64 = 0.0;
    for _ in 0..NORM_CONTEXTS {
        // Histories mix BOS, seen, unseen and UNK ids.
        let history: Vec<u32> = (0..2)
            .map(|_| {
                if rng.random_bool(0.2) {
                    lm.bos_id()
                } else {
                    rng.random_range(0..n_pred)
                }
            })
            .collect();
        let total: f64 = (0..n_pred).map(|w| lm.prob_id(&history, w)).sum();
        max_dev = max_dev.max((total - 1.0).abs());
    }
    let ppl = lm.perplexity(&sentences).map_err(|e| e.to_string())?;
    let uniform = n_pred as f64;
    check(
        max_dev <= NORM_TOL && ppl < uniform,
        format!("max |sum - 1| {max_dev:.2e} over {NORM_CONTEXTS} contexts, perplexity {ppl:.2} vs uniform {uniform}"),
    )
}

// 10. Byte-identical pipeline outputs.
fn run_pipeline(config: &Path, out: &Path) -> Result<(), String> {
    for step in ["ingest", "train", "evaluate"] {
        let o = Command::new(env!("CARGO_BIN_EXE_mgt-detect"))
            .arg(step)
            .arg("--config")
            .arg(config)
            .arg("--output")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{step} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = common::write_run(dir.path(), 80, 10, r#"{"family": "random_forest", "n_trees": 20}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&config, &a)?;
    run_pipeline(&config, &b)?;
    let mut names: Vec<String> = fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut b_names: Vec<String> = fs::read_dir(&b)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    b_names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .collect();
    check(
        names == b_names && differing.is_empty() && !names.is_empty(),
        format!("{} files compared, differing: {differing:?}", names.len()),
    )
}

// 11. Tuning search vs exhaustive grid on planted peaks.
const BO_GRID: usize = 100;
const BO_RANGE: (f64, f64) = (-12.0, 0.0);
const BO_BUDGET: usize = 15;
const PLANTED_PEAKS: [f64; 5] = [-10.7, -7.3, -4.0, -2.2, -0.5];

fn criterion_11() -> Outcome {
    let step = (BO_RANGE.1 - BO_RANGE.0) / (BO_GRID - 1) as f64;
    let mut worst: f64 = 0.0;
    for (i, &peak) in PLANTED_PEAKS.iter().enumerate() {
        let f = |x: f64| (-(x - peak).powi(2) / 8.0).exp();
        let grid_best = (0..BO_GRID)
            .map(|k| BO_RANGE.0 + step * k as f64)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        let r = tune_var_smoothing(f, BO_BUDGET, 11 + i as u64).map_err(|e| e.to_string())?;
        let found = r.var_smoothing.log10();
        worst = worst.max((found - grid_best).abs());
    }
    check(
        worst <= step + 1e-9,
        format!("max distance to grid optimum {worst:.4} (one step = {step:.4}) over {} peaks", PLANTED_PEAKS.len()),
    )
}

fn main() {
    let mut fx: Option<CurvatureFixture> = None;
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(format!(
                "panicked: {}",
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )),
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {n:>2} {name}: {detail}");
        results.push((n, name, outcome));
    };

    record(1, "AUROC oracle equivalence", &mut criterion_1);
    record(2, "F1 at P = R = 0.97", &mut criterion_2);
    record(3, "synthetic separability", &mut criterion_3);
    record(4, "DetectGPT curvature detection", &mut || {
        let fx = fx.get_or_insert_with(curvature_fixture);
        criterion_4(fx)
    });
    record(5, "Single-Revise efficiency", &mut || {
        let fx = fx.get_or_insert_with(curvature_fixture);
        criterion_5(fx)
    });
    record(6, "corpus statistics exactness", &mut criterion_6);
    record(7, "contrastive statistic orderings", &mut criterion_7);
    record(8, "gradient checks", &mut criterion_8);
    record(9, "LM normalization", &mut criterion_9);
    record(10, "pipeline determinism", &mut criterion_10);
    record(11, "tuning search vs grid", &mut criterion_11);

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
