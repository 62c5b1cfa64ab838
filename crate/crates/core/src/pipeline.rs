//! Model choice, training and held-out evaluation shared by the command line
//! and the benchmark tests.

use serde::{Deserialize, Serialize};

use crate::baselines::{dict_extract, knn_extract, DictStrategy, Lexicon, TfIdfIndex};
use crate::corpus::{decode_prediction, Label, LabelAlphabet, TaggedTitle, TokenizedTitle};
use crate::crf::{predict_with_confidence, train_crf, CrfConfig};
use crate::decode::{viterbi_decode, LinearModel, ModelKind};
use crate::error::{Error, Result};
use crate::eval::{
    compute_extraction_metrics, cross_validate, ComparisonRow, CvSummary, EvaluationReport, ScoredSequence,
};
use crate::features::{build_feature_index, FeatureConfig};
use crate::hmm::{hmm_decode, train_hmm, HmmConfig, HmmModel};
use crate::normalize::{key_form, NormalizationTable};
use crate::perceptron::{train_sp, PerceptronConfig};

/// A model family with its training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    Crf(CrfConfig),
    Sp(PerceptronConfig),
    Hmm(HmmConfig),
    DictMax,
    DictFirst,
    Knn { k: usize },
}

impl ModelSpec {
    /// Names accepted by [`ModelSpec::parse`].
    pub const NAMES: [&'static str; 7] = ["crf", "sp", "hmm", "dict-max", "dict-first", "1nn", "3nn"];

    /// Default settings for a model name; `seed` drives any randomness.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        Ok(match name {
            "crf" => ModelSpec::Crf(CrfConfig { rng_seed: seed, ..Default::default() }),
            "sp" => ModelSpec::Sp(PerceptronConfig { rng_seed: seed, ..Default::default() }),
            "hmm" => ModelSpec::Hmm(HmmConfig::default()),
            "dict-max" => ModelSpec::DictMax,
            "dict-first" => ModelSpec::DictFirst,
            "1nn" => ModelSpec::Knn { k: 1 },
            "3nn" => ModelSpec::Knn { k: 3 },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown model {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Crf(_) => "crf".into(),
            ModelSpec::Sp(_) => "sp".into(),
            ModelSpec::Hmm(_) => "hmm".into(),
            ModelSpec::DictMax => "dict-max".into(),
            ModelSpec::DictFirst => "dict-first".into(),
            ModelSpec::Knn { k } => format!("{k}nn"),
        }
    }

    /// Templates used when none are given explicitly.
    pub fn default_features(&self) -> FeatureConfig {
        match self {
            ModelSpec::Sp(_) => FeatureConfig::perceptron_set(),
            _ => FeatureConfig::crf_set(),
        }
    }
}

/// A trained extractor of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Extractor {
    Linear(LinearModel),
    Hmm(HmmModel),
    Dict { lexicon: Lexicon, strategy: DictStrategy },
    Knn { index: TfIdfIndex, k: usize },
}

/// Output for one title.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub value: Option<String>,
    /// Token labels, for models that tag tokens.
    pub labels: Option<Vec<Label>>,
    /// Probability of the label sequence, for the CRF.
    pub confidence: Option<f64>,
}

impl Extractor {
    pub fn train(
        spec: &ModelSpec,
        corpus: &[TaggedTitle],
        features: Option<&FeatureConfig>,
        alphabet: &LabelAlphabet,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let default_features = spec.default_features();
        let features = features.unwrap_or(&default_features);
        Ok(match spec {
            ModelSpec::Crf(cfg) => {
                let index = build_feature_index(corpus, features)?;
                Extractor::Linear(train_crf(corpus, cfg, features, &index, alphabet)?)
            }
            ModelSpec::Sp(cfg) => {
                let index = build_feature_index(corpus, features)?;
                Extractor::Linear(train_sp(corpus, cfg, features, &index, alphabet)?)
            }
            ModelSpec::Hmm(cfg) => Extractor::Hmm(train_hmm(corpus, cfg)?),
            ModelSpec::DictMax | ModelSpec::DictFirst => Extractor::Dict {
                lexicon: Lexicon::from_corpus(corpus),
                strategy: if *spec == ModelSpec::DictMax { DictStrategy::Max } else { DictStrategy::First },
            },
            ModelSpec::Knn { k } => {
                if *k == 0 {
                    return Err(Error::InvalidConfig("k must be at least 1".into()));
                }
                Extractor::Knn {
                    index: TfIdfIndex::build(corpus)?,
                    k: *k,
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            Extractor::Linear(m) if m.kind == ModelKind::Crf => "crf".into(),
            Extractor::Linear(_) => "sp".into(),
            Extractor::Hmm(_) => "hmm".into(),
            Extractor::Dict { strategy: DictStrategy::Max, .. } => "dict-max".into(),
            Extractor::Dict { .. } => "dict-first".into(),
            Extractor::Knn { k, .. } => format!("{k}nn"),
        }
    }

    pub fn tags_tokens(&self) -> bool {
        matches!(self, Extractor::Linear(_) | Extractor::Hmm(_))
    }

    pub fn extract(&self, title: &TokenizedTitle) -> Result<Extracted> {
        if title.is_empty() {
            return Err(Error::EmptyTitle);
        }
        let tagged = |labels: Vec<Label>, confidence| -> Result<Extracted> {
            Ok(Extracted {
                value: decode_prediction(title, &labels)?.value(),
                labels: Some(labels),
                confidence,
            })
        };
        match self {
            Extractor::Linear(m) if m.kind == ModelKind::Crf => {
                let (labels, p) = predict_with_confidence(title, m)?;
                tagged(labels, Some(p))
            }
            Extractor::Linear(m) => tagged(viterbi_decode(title, m)?.0, None),
            Extractor::Hmm(m) => tagged(hmm_decode(title, m)?, None),
            Extractor::Dict { lexicon, strategy } => Ok(Extracted {
                value: dict_extract(title, lexicon, *strategy).value(),
                labels: None,
                confidence: None,
            }),
            Extractor::Knn { index, k } => Ok(Extracted {
                value: knn_extract(title, index, *k)?,
                labels: None,
                confidence: None,
            }),
        }
    }
}

/// Maps surface values to the form compared during evaluation: the table's
/// canonical value when listed, otherwise the key form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Canonicalizer {
    pub table: NormalizationTable,
}

impl Canonicalizer {
    pub fn new(table: NormalizationTable) -> Self {
        Canonicalizer { table }
    }

    pub fn canonical(&self, value: &str) -> String {
        self.table.get(value).map_or_else(|| key_form(value), str::to_string)
    }
}

/// Item metrics of `extractor` on gold-tagged titles.
pub fn evaluate_extractor(
    extractor: &Extractor,
    test: &[TaggedTitle],
    canon: &Canonicalizer,
) -> Result<EvaluationReport> {
    let outputs = test.iter().map(|t| extractor.extract(&t.title)).collect::<Result<Vec<_>>>()?;
    report_outputs(test, &outputs, canon)
}

pub fn report_outputs(test: &[TaggedTitle], outputs: &[Extracted], canon: &Canonicalizer) -> Result<EvaluationReport> {
    let gold: Vec<Option<String>> = test.iter().map(|t| t.value().map(|v| canon.canonical(&v))).collect();
    let predicted: Vec<Option<String>> = outputs.iter().map(|o| o.value.as_deref().map(|v| canon.canonical(v))).collect();
    let labels: Option<Vec<Vec<Label>>> = outputs.iter().map(|o| o.labels.clone()).collect();
    match labels {
        Some(pl) => {
            let gl: Vec<Vec<Label>> = test.iter().map(|t| t.labels.clone()).collect();
            compute_extraction_metrics(&gold, &predicted, Some(&gl), Some(&pl))
        }
        None => compute_extraction_metrics(&gold, &predicted, None, None),
    }
}

/// Decoded sequences with confidences, for threshold curves.
pub fn scored_sequences(extractor: &Extractor, test: &[TaggedTitle]) -> Result<Vec<ScoredSequence>> {
    test.iter()
        .map(|t| {
            let out = extractor.extract(&t.title)?;
            match (out.labels, out.confidence) {
                (Some(predicted), Some(confidence)) => Ok(ScoredSequence {
                    gold: t.labels.clone(),
                    predicted,
                    confidence,
                }),
                _ => Err(Error::InvalidConfig(format!("{} does not report confidences", extractor.name()))),
            }
        })
        .collect()
}

/// k-fold cross-validation of one model family.
pub fn cross_validate_model(
    corpus: &[TaggedTitle],
    spec: &ModelSpec,
    features: Option<&FeatureConfig>,
    alphabet: &LabelAlphabet,
    canon: &Canonicalizer,
    k: usize,
    seed: u64,
) -> Result<CvSummary> {
    cross_validate(corpus, k, seed, |train, test| {
        let model = Extractor::train(spec, train, features, alphabet)?;
        evaluate_extractor(&model, test, canon)
    })
}

/// One cross-validated row per model, with the same folds for all.
pub fn compare_models(
    corpus: &[TaggedTitle],
    specs: &[ModelSpec],
    alphabet: &LabelAlphabet,
    canon: &Canonicalizer,
    k: usize,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    specs
        .iter()
        .map(|spec| {
            let cv = cross_validate_model(corpus, spec, None, alphabet, canon, k, seed)?;
            Ok(ComparisonRow::from_summary(spec.name(), &cv))
        })
        .collect()
}
