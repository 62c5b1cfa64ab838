//! Averaged structured perceptron.
//!
//! Each example is decoded with the current weights; on a mistake the weights
//! move by `F(x, gold) - F(x, predicted)`. After every example (mistake or
//! not) the current weights are added to a running sum, and the returned
//! model is that sum divided by the number of examples seen. The sum is kept
//! lazily with per-feature timestamps, which gives the same values as adding
//! the full weight vector after each example.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelAlphabet, TaggedTitle};
use crate::decode::{Lattice, LinearModel, ModelKind};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureIndex, FeatureVector, TitleFeatures};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptronConfig {
    pub epochs: usize,
    pub shuffle: bool,
    pub rng_seed: u64,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        PerceptronConfig {
            epochs: 10,
            shuffle: true,
            rng_seed: 0,
        }
    }
}

/// A training example compiled against the index.
#[derive(Debug, Clone)]
pub struct CompiledExample {
    pub features: TitleFeatures,
    pub gold: Vec<usize>,
}

impl CompiledExample {
    pub fn new(example: &TaggedTitle, config: &FeatureConfig, index: &FeatureIndex) -> Result<Self> {
        if example.labels.len() != example.title.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: example.title.len(),
                got: example.labels.len(),
            });
        }
        if example.title.is_empty() {
            return Err(Error::EmptyTitle);
        }
        Ok(CompiledExample {
            features: TitleFeatures::compile(&example.title, config, index),
            gold: example.labels.iter().map(|l| l.index()).collect(),
        })
    }
}

/// Weights, the lazily maintained running sum and the example counter.
#[derive(Debug, Clone)]
pub struct PerceptronState {
    weights: Vec<f64>,
    sum: Vec<f64>,
    stamp: Vec<u64>,
    seen: u64,
}

impl PerceptronState {
    pub fn new(d: usize) -> Self {
        PerceptronState {
            weights: vec![0.0; d],
            sum: vec![0.0; d],
            stamp: vec![0; d],
            seen: 0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn examples_seen(&self) -> u64 {
        self.seen
    }

    /// One inner-loop step. Returns whether the prediction was wrong.
    pub fn step(&mut self, example: &CompiledExample) -> bool {
        let lattice = Lattice::from_features(&example.features, &self.weights, &crate::corpus::Label::ALL);
        let (predicted, _) = lattice.viterbi();
        let mistake = predicted != example.gold;
        if mistake {
            let gold = lattice.labels_of(&example.gold);
            let pred = lattice.labels_of(&predicted);
            let delta = example.features.global(&gold).sub(&example.features.global(&pred));
            self.apply(&delta);
        }
        self.seen += 1;
        mistake
    }

    fn apply(&mut self, delta: &FeatureVector) {
        for &(id, v) in delta.entries() {
            let j = id as usize;
            // Weight w[j] has been in place for snapshots stamp[j]+1 ..= seen.
            self.sum[j] += self.weights[j] * (self.seen - self.stamp[j]) as f64;
            self.stamp[j] = self.seen;
            self.weights[j] += v;
        }
    }

    /// Mean of the weight vectors after each example so far.
    pub fn averaged(&self) -> Vec<f64> {
        if self.seen == 0 {
            return vec![0.0; self.weights.len()];
        }
        let n = self.seen as f64;
        self.sum
            .iter()
            .zip(&self.weights)
            .zip(&self.stamp)
            .map(|((&s, &w), &t)| (s + w * (self.seen - t) as f64) / n)
            .collect()
    }
}

/// Trains an averaged perceptron for `config.epochs` passes.
pub fn train_sp(
    corpus: &[TaggedTitle],
    config: &PerceptronConfig,
    features: &FeatureConfig,
    index: &FeatureIndex,
    alphabet: &LabelAlphabet,
) -> Result<LinearModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    let examples = corpus
        .iter()
        .map(|t| CompiledExample::new(t, features, index))
        .collect::<Result<Vec<_>>>()?;
    let mut state = PerceptronState::new(index.len());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    for _ in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            state.step(&examples[i]);
        }
    }
    LinearModel::new(
        state.averaged(),
        index.clone(),
        alphabet.clone(),
        features.clone(),
        ModelKind::Perceptron,
    )
}

/// Number of training examples the model labels incorrectly.
pub fn training_errors(model: &LinearModel, corpus: &[TaggedTitle]) -> Result<usize> {
    let mut errors = 0;
    for t in corpus {
        let (y, _) = crate::decode::viterbi_decode(&t.title, model)?;
        if y != t.labels {
            errors += 1;
        }
    }
    Ok(errors)
}
