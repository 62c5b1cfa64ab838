use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use attrex::artifact::{load_model, save_model, ModelArtifact};
use attrex::corpus::{
    read_records, read_tagged, tokenize, write_records, CorpusRecord, Label, LabelAlphabet, Provenance, TaggedTitle,
    TokenizerConfig,
};
use attrex::eval::{
    ablate_features, comparison_jsonl, comparison_text, default_grid, threshold_curve, AblationTrainer, CvSummary,
    EvaluationReport, ScoredSequence,
};
use attrex::features::FeatureConfig;
use attrex::normalize::{
    apply_review_decision, batch_postprocess, read_decisions, Blacklist, FeedbackConfig, FeedbackState,
    NormalizationTable, Normalizer, Prediction,
};
use attrex::pipeline::{
    compare_models, cross_validate_model, evaluate_extractor, report_outputs, Canonicalizer, Extracted, Extractor,
    ModelSpec,
};
use attrex::synth::{generate_catalog, GeneratorConfig, TitleCount};
use attrex::weak_supervision::{
    fraction_at_most, label_frequency_histogram, select_training_records, CatalogRecord, SupervisionConfig,
};

#[derive(Parser)]
#[command(name = "attrex", version, about = "Attribute value extraction from product titles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split titles (one per line) into tokens.
    Tokenize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a tagged corpus from catalog records by locating each value in its title.
    Annotate {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        per_value_cap: usize,
        #[arg(long, default_value_t = 0)]
        unbranded: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model on a tagged corpus.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extract values, normalize them and queue frequent unknown values for review.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Records with at least a title; ids are taken from the file when present.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        normalization: Option<PathBuf>,
        #[arg(long)]
        blacklist: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Review a value once it occurs more than this many times.
        #[arg(long, default_value_t = 30)]
        frequency_threshold: usize,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score predictions against a gold corpus.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        normalization: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// k-fold cross-validation of one model.
    Cv {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        normalization: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Drop each feature template in turn and report the change in F1.
    Ablate {
        /// crf or sp.
        #[arg(long, default_value = "crf")]
        model: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Full template set; defaults to the model's own.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        normalization: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Cross-validate several models on the same folds.
    Compare {
        #[arg(long, default_value = "crf,sp,hmm,dict-max,dict-first,1nn,3nn")]
        models: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        normalization: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Apply analyst decisions to the normalization table, blacklist and training data.
    ReviewApply {
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        normalization: Option<PathBuf>,
        #[arg(long)]
        blacklist: Option<PathBuf>,
        /// Unresolved predictions written by `predict`.
        #[arg(long)]
        pending: Option<PathBuf>,
        #[arg(long, default_value = "brand")]
        attribute: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Value frequency histogram of a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Generate a synthetic catalog, its gold corpus and normalization table.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        values: usize,
        /// Mean titles per value (geometric).
        #[arg(long, default_value_t = 3.6)]
        mean_titles: f64,
        #[arg(long, default_value = "brand")]
        attribute: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// crf, sp, hmm, dict-max, dict-first, 1nn or 3nn.
    #[arg(long = "model")]
    name: String,
    /// Feature template file, one template name per line.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let mut spec = ModelSpec::parse(&self.name, self.seed)?;
        match &mut spec {
            ModelSpec::Sp(c) => {
                if let Some(n) = self.epochs {
                    c.epochs = n;
                }
            }
            ModelSpec::Crf(c) => {
                if let Some(l) = self.lambda {
                    c.lambda = l;
                }
                if let Some(n) = self.max_iterations {
                    c.max_iterations = n;
                }
            }
            _ => {}
        }
        Ok(spec)
    }

    fn features(&self) -> Result<Option<FeatureConfig>> {
        self.config.as_deref().map(read_feature_config).transpose()
    }
}

/// One line of a predictions file.
#[derive(Debug, Serialize, Deserialize)]
struct PredictionRecord {
    id: String,
    title: String,
    value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

#[derive(Serialize)]
struct AcceptedRecord<'a> {
    id: &'a str,
    value: &'a str,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn name(path: &Path) -> String {
    path.display().to_string()
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn read_feature_config(path: &Path) -> Result<FeatureConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(FeatureConfig::parse(&text, &name(path))?)
}

fn read_table(path: Option<&Path>) -> Result<NormalizationTable> {
    match path {
        Some(p) => Ok(NormalizationTable::read(open(p)?, &name(p))?),
        None => Ok(NormalizationTable::new()),
    }
}

fn read_blacklist(path: Option<&Path>) -> Result<Blacklist> {
    match path {
        Some(p) => Ok(Blacklist::read(open(p)?, &name(p))?),
        None => Ok(Blacklist::new()),
    }
}

struct Corpus {
    records: Vec<CorpusRecord>,
    titles: Vec<TaggedTitle>,
    alphabet: LabelAlphabet,
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let pairs = read_tagged(open(path)?, &name(path), &TokenizerConfig::default(), Provenance::Manual)?;
    ensure!(!pairs.is_empty(), "{} holds no records", path.display());
    let attribute = pairs[0].0.attribute.clone();
    if let Some((r, _)) = pairs.iter().find(|(r, _)| r.attribute != attribute) {
        bail!("{} mixes attributes {attribute:?} and {:?}", path.display(), r.attribute);
    }
    let (records, titles) = pairs.into_iter().unzip();
    Ok(Corpus {
        records,
        titles,
        alphabet: LabelAlphabet::new(attribute),
    })
}

fn record_id(record: &CorpusRecord, line: usize) -> String {
    record.id.clone().unwrap_or_else(|| format!("line-{line}"))
}

/// Prints `text` and, with an output directory, stores it with its JSON form.
fn emit_report(out_dir: Option<&Path>, stem: &str, text: &str, json: &str) -> Result<()> {
    print!("{text}");
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        fs::write(dir.join(format!("{stem}.txt")), text)?;
        fs::write(dir.join(format!("{stem}.jsonl")), json)?;
    }
    Ok(())
}

fn percent(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{:.2}", 100.0 * v))
}

fn report_text(r: &EvaluationReport) -> String {
    format!(
        "items {}  gold valued {}  predicted valued {}  correct {}\nprecision {}  recall {}  f1 {}  label accuracy {}\n",
        r.n,
        r.n_true_branded,
        r.n_predicted_branded,
        r.correct,
        percent(r.precision),
        percent(r.recall),
        percent(r.f1),
        percent(r.label_accuracy),
    )
}

fn cv_text(model: &str, cv: &CvSummary) -> String {
    let metric = |m: &Option<attrex::eval::MetricSummary>| {
        m.map_or_else(|| "NA".into(), |s| format!("{:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.margin))
    };
    let mut s = format!("{model}: {}-fold cross-validation, seed {}\n", cv.k, cv.seed);
    s += &format!("precision {}\nrecall {}\nf1 {}\nlabel accuracy {}\n", metric(&cv.precision), metric(&cv.recall), metric(&cv.f1), metric(&cv.label_accuracy));
    for (i, f) in cv.folds.iter().enumerate() {
        s += &format!("fold {i}: p {} r {} f1 {}\n", percent(f.precision), percent(f.recall), percent(f.f1));
    }
    s
}

fn parse_models(list: &str, seed: u64) -> Result<Vec<ModelSpec>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|n| Ok(ModelSpec::parse(n, seed)?))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tokenize { input, output } => {
            let cfg = TokenizerConfig::default();
            let mut lines = Vec::new();
            for line in open(&input)?.lines() {
                let line = line.with_context(|| format!("reading {}", input.display()))?;
                lines.push(tokenize(&line, &cfg));
            }
            match output {
                Some(p) => write_jsonl(&p, &lines)?,
                None => {
                    let mut out = std::io::stdout().lock();
                    for t in &lines {
                        serde_json::to_writer(&mut out, t)?;
                        writeln!(out)?;
                    }
                }
            }
        }

        Command::Annotate {
            catalog,
            output,
            per_value_cap,
            unbranded,
            seed,
        } => {
            let records = read_records(open(&catalog)?, &name(&catalog))?;
            let catalog_records: Vec<CatalogRecord> = records.iter().map(CatalogRecord::from).collect();
            let cfg = SupervisionConfig {
                per_value_cap,
                unbranded_sample_size: unbranded,
                rng_seed: seed,
            };
            let chosen = select_training_records(&catalog_records, &cfg, &TokenizerConfig::default())
                .with_context(|| format!("annotating {}", catalog.display()))?;
            let alphabet = LabelAlphabet::new(records[0].attribute.clone());
            let out: Vec<CorpusRecord> = chosen
                .iter()
                .map(|(i, t)| {
                    let mut r = CorpusRecord::from_tagged(t, &alphabet, t.value());
                    r.id = records[*i].id.clone();
                    r
                })
                .collect();
            let mut w = create(&output)?;
            write_records(&mut w, &out)?;
            w.flush()?;
            eprintln!("{} of {} catalog records annotated", out.len(), records.len());
        }

        Command::Train { model, corpus, output } => {
            let c = read_corpus(&corpus)?;
            let extractor = Extractor::train(&model.spec()?, &c.titles, model.features()?.as_ref(), &c.alphabet)?;
            let artifact = ModelArtifact::new(&c.alphabet, TokenizerConfig::default(), extractor);
            ensure_parent(&output)?;
            save_model(&artifact, &output).with_context(|| format!("writing {}", output.display()))?;
            eprintln!("trained {} on {} titles", artifact.kind(), c.titles.len());
        }

        Command::Predict {
            model,
            input,
            normalization,
            blacklist,
            out_dir,
            frequency_threshold,
            samples,
            seed,
        } => {
            let artifact = load_model(&model).with_context(|| format!("loading {}", model.display()))?;
            let records = read_records(open(&input)?, &name(&input))?;
            let normalizer = Normalizer::new(read_table(normalization.as_deref())?, read_blacklist(blacklist.as_deref())?)?;
            let alphabet = LabelAlphabet::new(artifact.attribute.clone());
            let mut out = Vec::with_capacity(records.len());
            for (i, r) in records.iter().enumerate() {
                let title = tokenize(&r.title, &artifact.tokenizer);
                let Extracted { value, labels, confidence } = if title.is_empty() {
                    Extracted { value: None, labels: Some(Vec::new()), confidence: None }
                } else {
                    artifact
                        .extractor
                        .extract(&title)
                        .with_context(|| format!("{}:{}", input.display(), i + 1))?
                };
                out.push(PredictionRecord {
                    id: record_id(r, i + 1),
                    title: r.title.clone(),
                    value,
                    labels: labels.as_ref().map(|l| alphabet.names(l)),
                    tokens: labels.map(|_| title.tokens.clone()),
                    confidence,
                });
            }
            let preds: Vec<Prediction> = out
                .iter()
                .map(|p| Prediction {
                    item_id: p.id.clone(),
                    title: p.title.clone(),
                    value: p.value.clone(),
                })
                .collect();
            let cfg = FeedbackConfig {
                frequency_threshold,
                sample_size: samples,
                rng_seed: seed,
            };
            let batch = batch_postprocess(&preds, &normalizer, &cfg);
            fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            write_jsonl(&out_dir.join("predictions.jsonl"), &out)?;
            write_jsonl(
                &out_dir.join("accepted.jsonl"),
                batch.accepted.iter().map(|(id, v)| AcceptedRecord { id, value: v }),
            )?;
            write_jsonl(&out_dir.join("review_queue.jsonl"), &batch.review_queue)?;
            write_jsonl(&out_dir.join("pending.jsonl"), &batch.pending)?;
            println!(
                "{} items: {} accepted, {} without value, {} blacklisted, {} unresolved, {} values queued for review",
                preds.len(),
                batch.accepted.len(),
                batch.unbranded.len(),
                batch.blacklisted.len(),
                batch.pending.len(),
                batch.review_queue.len()
            );
        }

        Command::Evaluate {
            gold,
            predictions,
            normalization,
            out_dir,
        } => {
            let g = read_corpus(&gold)?;
            let p: Vec<PredictionRecord> = read_jsonl(&predictions)?;
            ensure!(
                g.titles.len() == p.len(),
                "misaligned inputs: {} has {} records but {} has {}",
                gold.display(),
                g.titles.len(),
                predictions.display(),
                p.len()
            );
            let mut outputs = Vec::with_capacity(p.len());
            let mut scored = Vec::new();
            for (i, (rec, pr)) in g.records.iter().zip(&p).enumerate() {
                let id = record_id(rec, i + 1);
                ensure!(
                    id == pr.id,
                    "misaligned inputs at record {}: gold id {id:?} but prediction id {:?}",
                    i + 1,
                    pr.id
                );
                let labels = match &pr.labels {
                    Some(names) => {
                        let labels = names.iter().map(|n| g.alphabet.parse(n)).collect::<attrex::Result<Vec<Label>>>()?;
                        ensure!(
                            labels.len() == g.titles[i].labels.len(),
                            "misaligned inputs at record {}: {} gold tokens but {} predicted labels",
                            i + 1,
                            g.titles[i].labels.len(),
                            labels.len()
                        );
                        Some(labels)
                    }
                    None => None,
                };
                if let (Some(l), Some(c)) = (&labels, pr.confidence) {
                    scored.push(ScoredSequence {
                        gold: g.titles[i].labels.clone(),
                        predicted: l.clone(),
                        confidence: c,
                    });
                }
                outputs.push(Extracted {
                    value: pr.value.clone(),
                    labels,
                    confidence: pr.confidence,
                });
            }
            let canon = Canonicalizer::new(read_table(normalization.as_deref())?);
            let report = report_outputs(&g.titles, &outputs, &canon)?;
            let json = serde_json::to_string(&report)? + "\n";
            emit_report(out_dir.as_deref(), "evaluation", &report_text(&report), &json)?;
            if let Some(dir) = &out_dir {
                if scored.len() == p.len() {
                    let curve = threshold_curve(&scored, &default_grid())?;
                    write_jsonl(&dir.join("threshold_curve.jsonl"), &curve.points)?;
                }
            }
        }

        Command::Cv {
            model,
            corpus,
            folds,
            normalization,
            out_dir,
        } => {
            let c = read_corpus(&corpus)?;
            let canon = Canonicalizer::new(read_table(normalization.as_deref())?);
            let spec = model.spec()?;
            let features = model.features()?;
            let cv = cross_validate_model(&c.titles, &spec, features.as_ref(), &c.alphabet, &canon, folds, model.seed)?;
            let json = serde_json::to_string(&cv)? + "\n";
            emit_report(out_dir.as_deref(), "cv", &cv_text(&spec.name(), &cv), &json)?;
        }

        Command::Ablate {
            model,
            corpus,
            folds,
            config,
            normalization,
            seed,
            out_dir,
        } => {
            let c = read_corpus(&corpus)?;
            let canon = Canonicalizer::new(read_table(normalization.as_deref())?);
            let spec = ModelSpec::parse(&model, seed)?;
            ensure!(
                matches!(spec, ModelSpec::Crf(_) | ModelSpec::Sp(_)),
                "ablation needs a feature-based model (crf or sp), got {model:?}"
            );
            let full = match &config {
                Some(p) => read_feature_config(p)?,
                None => spec.default_features(),
            };
            let trainer = |features: &FeatureConfig, train: &[TaggedTitle], test: &[TaggedTitle]| {
                let m = Extractor::train(&spec, train, Some(features), &c.alphabet)?;
                evaluate_extractor(&m, test, &canon)
            };
            let models: [(String, AblationTrainer<'_, TaggedTitle>); 1] = [(spec.name(), &trainer)];
            let table = ablate_features(&c.titles, &full, full.templates(), &models, folds, seed)?;
            let json = serde_json::to_string(&table)? + "\n";
            emit_report(out_dir.as_deref(), "ablation", &table.to_text(), &json)?;
        }

        Command::Compare {
            models,
            corpus,
            folds,
            normalization,
            seed,
            out_dir,
        } => {
            let c = read_corpus(&corpus)?;
            let canon = Canonicalizer::new(read_table(normalization.as_deref())?);
            let specs = parse_models(&models, seed)?;
            let rows = compare_models(&c.titles, &specs, &c.alphabet, &canon, folds, seed)?;
            emit_report(out_dir.as_deref(), "comparison", &comparison_text(&rows), &comparison_jsonl(&rows)?)?;
        }

        Command::ReviewApply {
            decisions,
            normalization,
            blacklist,
            pending,
            attribute,
            out_dir,
        } => {
            let ds = read_decisions(open(&decisions)?, &name(&decisions))?;
            let normalizer = Normalizer::new(read_table(normalization.as_deref())?, read_blacklist(blacklist.as_deref())?)?;
            let mut state = FeedbackState::new(normalizer);
            if let Some(p) = &pending {
                state.pending = read_jsonl(p)?;
            }
            let tokenizer = TokenizerConfig::default();
            for (i, d) in ds.iter().enumerate() {
                apply_review_decision(d, &mut state, &tokenizer)
                    .with_context(|| format!("{}:{}", decisions.display(), i + 1))?;
            }
            fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            let mut w = create(&out_dir.join("normalization.tsv"))?;
            state.normalizer.table().write(&mut w)?;
            w.flush()?;
            let mut w = create(&out_dir.join("blacklist.txt"))?;
            state.normalizer.blacklist().write(&mut w)?;
            w.flush()?;
            write_jsonl(
                &out_dir.join("accepted.jsonl"),
                state.accepted.iter().map(|(id, v)| AcceptedRecord { id, value: v }),
            )?;
            write_jsonl(&out_dir.join("blacklisted.jsonl"), &state.blacklisted)?;
            write_jsonl(&out_dir.join("pending.jsonl"), &state.pending)?;
            let alphabet = LabelAlphabet::new(attribute);
            let additions: Vec<CorpusRecord> = state
                .training_additions
                .iter()
                .map(|t| CorpusRecord::from_tagged(t, &alphabet, t.value()))
                .collect();
            let mut w = create(&out_dir.join("training_additions.jsonl"))?;
            write_records(&mut w, &additions)?;
            w.flush()?;
            println!(
                "{} decisions: {} items accepted, {} blacklisted, {} still pending, {} training titles added",
                ds.len(),
                state.accepted.len(),
                state.blacklisted.len(),
                state.pending.len(),
                additions.len()
            );
        }

        Command::Stats { corpus } => {
            let c = read_corpus(&corpus)?;
            let hist = label_frequency_histogram(&c.titles);
            let valued = c.titles.iter().filter(|t| t.value().is_some()).count();
            println!("titles {}  with value {}  distinct values {}", c.titles.len(), valued, hist.values().sum::<usize>());
            println!("frequency\tvalues");
            for (n, count) in &hist {
                println!("{n}\t{count}");
            }
            println!("share of values seen at most 3 times: {}", percent(fraction_at_most(&hist, 3)));
        }

        Command::Synth {
            out_dir,
            values,
            mean_titles,
            attribute,
            seed,
        } => {
            let cfg = GeneratorConfig {
                attribute,
                num_values: values,
                titles_per_value: TitleCount::Geometric { mean: mean_titles },
                rng_seed: seed,
                ..Default::default()
            };
            let cat = generate_catalog(&cfg)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            let catalog: Vec<CorpusRecord> = cat
                .records
                .iter()
                .zip(&cat.canonical)
                .map(|(r, c)| CorpusRecord {
                    id: r.id.clone(),
                    title: r.title.clone(),
                    attribute: r.attribute.clone(),
                    value: c.clone(),
                    tokens: None,
                    labels: None,
                })
                .collect();
            let mut w = create(&out_dir.join("catalog.jsonl"))?;
            write_records(&mut w, &catalog)?;
            w.flush()?;
            let mut w = create(&out_dir.join("corpus.jsonl"))?;
            write_records(&mut w, &cat.records)?;
            w.flush()?;
            let mut w = create(&out_dir.join("normalization.tsv"))?;
            cat.table.write(&mut w)?;
            w.flush()?;
            let mut w = create(&out_dir.join("values.txt"))?;
            for v in &cat.values {
                writeln!(w, "{v}")?;
            }
            w.flush()?;
            println!("{} titles, {} values", cat.records.len(), cat.values.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
