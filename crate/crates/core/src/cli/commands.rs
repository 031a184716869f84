use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{EmbeddingSource, Method, RunConfig};
use super::*;
use crate::classifiers::{Classifier, Dataset, EmbeddingClassifier};
use crate::embeddings::{load_vectors, parse_vectors, train_skipgram, EmbeddingMatrix};
use crate::eval::{evaluate_scores, robustness_report, youden_threshold, Detector, MetricsReport};
use crate::ingest::{load_conllu, normalize, parse_hc3, split, Corpus, Document, Label};
use crate::stats::{corpus_report, ClassParses};
use crate::zeroshot::{train_kn_lm, CurvatureDetector, CurvatureMethod, NGramLm, SubstitutionPool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplitManifest {
    seed: u64,
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Threshold {
    threshold: f64,
    youden_j: f64,
}

fn out(cfg: &RunConfig, name: &str) -> std::path::PathBuf {
    cfg.output_dir.join(name)
}

fn print_counts(name: &str, corpus: &Corpus) {
    let c = corpus.class_counts();
    println!("{name:<6} human={:<6} machine={:<6} total={}", c.human, c.machine, c.total());
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let mut docs = Vec::new();
    let multi = cfg.data.hc3.len() > 1;
    for (i, path) in cfg.data.hc3.iter().enumerate() {
        let text = read_input(path, "HC3 data")?;
        let corpus = parse_hc3(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        for mut d in corpus.into_documents() {
            if multi {
                d.id = format!("{i}:{}", d.id);
            }
            docs.push(d);
        }
    }
    let corpus = Corpus::new(docs)?;
    let splits = split(&corpus, &cfg.split_spec()?)?;
    let manifest = SplitManifest {
        seed: cfg.seed_for("split"),
        train: splits.train.ids().iter().map(|s| s.to_string()).collect(),
        val: splits.val.ids().iter().map(|s| s.to_string()).collect(),
        test: splits.test.ids().iter().map(|s| s.to_string()).collect(),
    };
    write_json(&out(cfg, CORPUS_FILE), &corpus)?;
    write_json(&out(cfg, SPLITS_FILE), &manifest)?;
    print_counts("all", &corpus);
    print_counts("train", &splits.train);
    print_counts("val", &splits.val);
    print_counts("test", &splits.test);
    Ok(())
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let path = out(cfg, CORPUS_FILE);
    let text = read_input(&path, "run `ingest` first")?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

struct SplitCorpora {
    train: Corpus,
    val: Corpus,
    test: Corpus,
}

fn load_splits(cfg: &RunConfig) -> Result<SplitCorpora, CliError> {
    let corpus = load_corpus(cfg)?;
    let path = out(cfg, SPLITS_FILE);
    let text = read_input(&path, "run `ingest` first")?;
    let m: SplitManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(SplitCorpora {
        train: corpus.subset(&m.train),
        val: corpus.subset(&m.val),
        test: corpus.subset(&m.test),
    })
}

pub fn stats(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let parses = match &cfg.data.conllu {
        Some(p) => Some(ClassParses {
            human: load_conllu(&p.human)?,
            machine: load_conllu(&p.machine)?,
        }),
        None => None,
    };
    let report = corpus_report(&corpus, parses.as_ref(), &cfg.bins)?;
    write_json(&out(cfg, STATS_FILE), &report)?;
    println!("{:<8} {:>12} {:>12} {:>8} {:>8} {:>8}", "class", "answer_len", "sentence_len", "ttr", "fkgl", "dep_dist");
    for (label, s) in &report.classes {
        let dep = s
            .dependency_distance
            .as_ref()
            .map(|d| format!("{:.3}", d.mean))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<8} {:>12.3} {:>12.3} {:>8.3} {:>8.3} {:>8}",
            label.as_str(),
            s.answer_length.mean,
            s.sentence_length.mean,
            s.ttr.mean,
            s.fkgl.mean,
            dep
        );
    }
    Ok(())
}

fn wants_zeroshot(cfg: &RunConfig) -> bool {
    cfg.methods.iter().any(|m| *m != Method::Classifier)
}

fn curvature_method(m: Method) -> Option<CurvatureMethod> {
    match m {
        Method::Classifier => None,
        Method::DetectGpt => Some(CurvatureMethod::DetectGpt),
        Method::SingleRevise => Some(CurvatureMethod::SingleRevise),
    }
}

fn scores_of<D: Detector + ?Sized>(det: &D, corpus: &Corpus) -> Result<Vec<f64>, CliError> {
    corpus
        .iter()
        .map(|d| det.score(d).map_err(|e| CliError::Data(e.to_string())))
        .collect()
}

fn print_metrics(method: &str, m: &MetricsReport) {
    println!(
        "{method:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
        m.precision, m.recall, m.f1, m.accuracy, m.auroc
    );
}

fn print_metrics_header(title: &str) {
    println!("{title}");
    println!(
        "{:<14} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "method", "precision", "recall", "f1", "accuracy", "auroc"
    );
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let splits = load_splits(cfg)?;
    for (name, c) in [("train", &splits.train), ("val", &splits.val)] {
        if !c.has_both_classes() {
            return Err(CliError::Data(format!("{name} split must contain both classes")));
        }
    }

    let embeddings = match (&cfg.embeddings, cfg.skipgram_config()) {
        (_, Some(sg)) => {
            info!("training skip-gram embeddings (dim {})", sg.dim);
            train_skipgram(splits.train.iter().map(|d| d.body.as_str()), &sg)?
        }
        (EmbeddingSource::Load { path }, None) => load_vectors(path)?,
        (EmbeddingSource::Train(_), None) => unreachable!("train source always has a config"),
    };
    write_file(&out(cfg, EMBEDDINGS_FILE), &embeddings.to_text())?;

    let train_set = Dataset::from_corpus(&splits.train, &embeddings)?;
    info!("training {} on {} documents", cfg.classifier.family(), train_set.len());
    let classifier = Classifier::fit(&train_set, &cfg.classifier, cfg.seed_for("classifier"))?;
    write_file(&out(cfg, MODEL_FILE), &classifier.to_json())?;

    let mut validation = BTreeMap::new();
    let det = EmbeddingClassifier {
        classifier: &classifier,
        embeddings: &embeddings,
    };
    let labels: Vec<Label> = splits.val.iter().map(|d| d.label).collect();
    let scores = scores_of(&det, &splits.val)?;
    validation.insert(det.method(), evaluate_scores(&scores, &labels, det.threshold())?);

    if wants_zeroshot(cfg) {
        let machine_train: Vec<&str> = splits
            .train
            .iter()
            .filter(|d| d.label.is_machine())
            .map(|d| d.body.as_str())
            .collect();
        info!("training order-{} LM on {} machine documents", cfg.zeroshot.order, machine_train.len());
        let lm = train_kn_lm(machine_train, cfg.zeroshot.order, cfg.zeroshot.discount)?;
        lm.save(out(cfg, LM_FILE)).map_err(|e| match e {
            crate::zeroshot::ZeroshotError::Io { path, source } => CliError::Io { path, source },
            other => other.into(),
        })?;
        let pool = SubstitutionPool::from_vocab(lm.vocab(), cfg.zeroshot.frequency_band)?;
        let mut thresholds = BTreeMap::new();
        for m in cfg.methods.iter().filter_map(|m| curvature_method(*m)) {
            let det = CurvatureDetector {
                lm: &lm,
                pool: &pool,
                config: cfg.perturb_config(),
                method: m,
                threshold: 0.0,
            };
            let scores = scores_of(&det, &splits.val)?;
            let (threshold, youden_j) = youden_threshold(&scores, &labels)?;
            thresholds.insert(m.to_string(), Threshold { threshold, youden_j });
            validation.insert(m.to_string(), evaluate_scores(&scores, &labels, threshold)?);
        }
        write_json(&out(cfg, THRESHOLDS_FILE), &thresholds)?;
    }
    write_json(&out(cfg, VALIDATION_FILE), &validation)?;
    print_metrics_header("validation");
    for (method, m) in &validation {
        print_metrics(method, m);
    }
    Ok(())
}

struct Artifacts {
    classifier: Option<(Classifier, EmbeddingMatrix)>,
    zeroshot: Option<(NGramLm, SubstitutionPool, BTreeMap<String, Threshold>)>,
}

fn missing(path: &Path) -> CliError {
    CliError::Data(format!("{} not found; run `train` first", path.display()))
}

fn load_artifacts(cfg: &RunConfig, methods: &[Method]) -> Result<Artifacts, CliError> {
    let mut a = Artifacts {
        classifier: None,
        zeroshot: None,
    };
    if methods.contains(&Method::Classifier) {
        let model_path = out(cfg, MODEL_FILE);
        let emb_path = out(cfg, EMBEDDINGS_FILE);
        for p in [&model_path, &emb_path] {
            if !p.is_file() {
                return Err(missing(p));
            }
        }
        let classifier = Classifier::from_json(&read_input(&model_path, "model")?)?;
        let embeddings = parse_vectors(&read_input(&emb_path, "embeddings")?)?;
        a.classifier = Some((classifier, embeddings));
    }
    if methods.iter().any(|m| *m != Method::Classifier) {
        let lm_path = out(cfg, LM_FILE);
        let th_path = out(cfg, THRESHOLDS_FILE);
        for p in [&lm_path, &th_path] {
            if !p.is_file() {
                return Err(missing(p));
            }
        }
        let lm = NGramLm::from_json(&read_input(&lm_path, "language model")?)?;
        let thresholds: BTreeMap<String, Threshold> =
            serde_json::from_str(&read_input(&th_path, "thresholds")?)
                .map_err(|e| CliError::Data(format!("{}: {e}", th_path.display())))?;
        let pool = SubstitutionPool::from_vocab(lm.vocab(), cfg.zeroshot.frequency_band)?;
        a.zeroshot = Some((lm, pool, thresholds));
    }
    Ok(a)
}

fn detector<'a>(cfg: &RunConfig, a: &'a Artifacts, m: Method) -> Result<Box<dyn Detector + 'a>, CliError> {
    match curvature_method(m) {
        None => {
            let (classifier, embeddings) = a.classifier.as_ref().expect("classifier loaded");
            Ok(Box::new(EmbeddingClassifier {
                classifier,
                embeddings,
            }))
        }
        Some(cm) => {
            let (lm, pool, thresholds) = a.zeroshot.as_ref().expect("LM loaded");
            let t = thresholds.get(cm.as_str()).ok_or_else(|| {
                CliError::Data(format!("no {cm} threshold in {THRESHOLDS_FILE}; retrain with {cm} in methods"))
            })?;
            Ok(Box::new(CurvatureDetector {
                lm,
                pool,
                config: cfg.perturb_config(),
                method: cm,
                threshold: t.threshold,
            }))
        }
    }
}

pub fn detect(cfg: &RunConfig, input: &Path, method: &str, report_passes: bool) -> Result<(), CliError> {
    let m = Method::parse(method).ok_or_else(|| {
        CliError::Config(format!(
            "unknown method `{method}` (expected classifier, detect_gpt or single_revise)"
        ))
    })?;
    let text = read_input(input, "detect input")?;
    let artifacts = load_artifacts(cfg, &[m])?;
    let det = detector(cfg, &artifacts, m)?;
    let lm = artifacts.zeroshot.as_ref().map(|z| &z.0);

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let io_err = |source| CliError::Io {
        path: "<stdout>".into(),
        source,
    };
    writeln!(w, "id,score,label,method").map_err(io_err)?;
    for (i, line) in text.lines().enumerate() {
        let id = (i + 1).to_string();
        let Ok(body) = normalize(line) else {
            continue;
        };
        if crate::text::words(&body).is_empty() {
            continue;
        }
        let doc = Document {
            id: id.clone(),
            body,
            label: Label::Human,
            source_question: None,
        };
        if let Some(lm) = lm {
            lm.reset_passes();
        }
        let (score, label) = det.classify(&doc).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(w, "{id},{score},{label},{}", det.method()).map_err(io_err)?;
        if report_passes {
            let passes = lm.map(|lm| lm.scoring_passes()).unwrap_or(0);
            eprintln!("id={id} lm_passes={passes}");
        }
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let splits = load_splits(cfg)?;
    if !splits.test.has_both_classes() {
        return Err(CliError::Data("test split must contain both classes".into()));
    }
    let artifacts = load_artifacts(cfg, &cfg.methods)?;
    let transforms = cfg.adversarial_transforms();
    let mut clean = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for &m in &cfg.methods {
        let det = detector(cfg, &artifacts, m)?;
        info!("evaluating {} on {} test documents", det.method(), splits.test.len());
        let report = robustness_report(det.as_ref(), &splits.test, &transforms)?;
        write_file(
            &out(cfg, &format!("robustness_{}.csv", report.method)),
            &report.to_csv(),
        )?;
        clean.insert(report.method.clone(), report.clean.clone());
        reports.insert(report.method.clone(), report);
    }
    write_json(&out(cfg, METRICS_FILE), &clean)?;
    write_json(&out(cfg, ROBUSTNESS_FILE), &reports)?;

    print_metrics_header("test");
    for (method, m) in &clean {
        print_metrics(method, m);
    }
    for r in reports.values() {
        for t in &r.transforms {
            println!(
                "{:<14} {:<24} delta f1 {:+.4} auroc {:+.4}",
                r.method, t.name, t.delta.f1, t.delta.auroc
            );
        }
    }
    Ok(())
}
