//! Linear models over the label chain and exact argmax decoding.

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabelAlphabet, TokenizedTitle};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureIndex, TitleFeatures};

/// Longest title accepted by [`brute_force_decode`].
pub const MAX_ENUMERATION_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Perceptron,
    Crf,
}

/// Dense weights over a frozen feature index.
///
/// `candidates` is the label set searched by the decoders; it is the full
/// alphabet unless a model is deliberately restricted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub index: FeatureIndex,
    pub alphabet: LabelAlphabet,
    pub config: FeatureConfig,
    pub kind: ModelKind,
    pub candidates: Vec<Label>,
}

impl LinearModel {
    pub fn new(
        weights: Vec<f64>,
        index: FeatureIndex,
        alphabet: LabelAlphabet,
        config: FeatureConfig,
        kind: ModelKind,
    ) -> Result<Self> {
        let m = LinearModel {
            weights,
            index,
            alphabet,
            config,
            kind,
            candidates: Label::ALL.to_vec(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(index: FeatureIndex, alphabet: LabelAlphabet, config: FeatureConfig, kind: ModelKind) -> Self {
        let weights = vec![0.0; index.len()];
        LinearModel {
            weights,
            index,
            alphabet,
            config,
            kind,
            candidates: Label::ALL.to_vec(),
        }
    }

    /// Restricts decoding to a subset of labels.
    pub fn with_candidates(mut self, candidates: &[Label]) -> Result<Self> {
        let mut c = candidates.to_vec();
        c.sort();
        c.dedup();
        if c.is_empty() {
            return Err(Error::InvalidConfig("empty candidate label set".into()));
        }
        self.candidates = c;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.index.len() {
            return Err(Error::DimensionMismatch {
                model: self.weights.len(),
                index: self.index.len(),
            });
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::NonFiniteObjective(*w));
        }
        if self.candidates.is_empty() || self.candidates.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidConfig("candidate labels must be sorted and non-empty".into()));
        }
        Ok(())
    }

    pub fn compile(&self, x: &TokenizedTitle) -> TitleFeatures {
        TitleFeatures::compile(x, &self.config, &self.index)
    }

    pub fn lattice(&self, x: &TokenizedTitle) -> Lattice {
        Lattice::from_features(&self.compile(x), &self.weights, &self.candidates)
    }
}

/// Chain potentials for one title over `labels`: the score of a path is
/// `start[y0] + sum emit[i][yi] + sum trans[y(i-1)][yi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub labels: Vec<Label>,
    pub start: Vec<f64>,
    /// Row-major `labels.len() x labels.len()`, indexed `[prev][cur]`.
    pub trans: Vec<f64>,
    /// Row-major `len x labels.len()`.
    pub emit: Vec<f64>,
}

impl Lattice {
    pub fn from_features(features: &TitleFeatures, weights: &[f64], labels: &[Label]) -> Self {
        let k = labels.len();
        let w = |id: Option<u32>| id.map_or(0.0, |id| weights[id as usize]);
        let start = labels.iter().map(|&l| w(features.transition(None, l))).collect();
        let mut trans = Vec::with_capacity(k * k);
        for &p in labels {
            for &c in labels {
                trans.push(w(features.transition(Some(p), c)));
            }
        }
        let mut emit = Vec::with_capacity(features.len() * k);
        for obs in &features.observations {
            for &l in labels {
                emit.push(obs[l.index()].iter().map(|&id| weights[id as usize]).sum());
            }
        }
        Lattice {
            labels: labels.to_vec(),
            start,
            trans,
            emit,
        }
    }

    pub fn len(&self) -> usize {
        if self.labels.is_empty() {
            0
        } else {
            self.emit.len() / self.labels.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn emit(&self, i: usize, l: usize) -> f64 {
        self.emit[i * self.labels.len() + l]
    }

    #[inline]
    pub fn trans(&self, p: usize, c: usize) -> f64 {
        self.trans[p * self.labels.len() + c]
    }

    /// Exact argmax path as label positions into `labels`, with its score.
    /// Among equal scores the lexicographically smallest path wins.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let m = self.len();
        let k = self.num_labels();
        if m == 0 {
            return (Vec::new(), 0.0);
        }
        // suffix[i][l]: best score of positions i..m given label l at i,
        // excluding the transition into i. next[i][l]: smallest best label at i+1.
        let mut suffix = vec![0.0; m * k];
        let mut next = vec![0usize; m * k];
        for l in 0..k {
            suffix[(m - 1) * k + l] = self.emit(m - 1, l);
        }
        for i in (0..m - 1).rev() {
            for l in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for n in 0..k {
                    let s = self.trans(l, n) + suffix[(i + 1) * k + n];
                    if s > best {
                        best = s;
                        arg = n;
                    }
                }
                suffix[i * k + l] = self.emit(i, l) + best;
                next[i * k + l] = arg;
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut first = 0;
        for l in 0..k {
            let s = self.start[l] + suffix[l];
            if s > best {
                best = s;
                first = l;
            }
        }
        let mut path = Vec::with_capacity(m);
        path.push(first);
        for i in 0..m - 1 {
            let cur = *path.last().unwrap();
            path.push(next[i * k + cur]);
        }
        (path, best)
    }

    pub fn labels_of(&self, path: &[usize]) -> Vec<Label> {
        path.iter().map(|&p| self.labels[p]).collect()
    }

    /// Position of `label` in this lattice's label set.
    pub fn position(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}

/// `w^T F(x, y)`.
pub fn score(x: &TokenizedTitle, y: &[Label], model: &LinearModel) -> Result<f64> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(model.compile(x).global(y).dot(&model.weights))
}

/// Highest-scoring label sequence and its score.
pub fn viterbi_decode(x: &TokenizedTitle, model: &LinearModel) -> Result<(Vec<Label>, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyTitle);
    }
    let lattice = model.lattice(x);
    let (path, s) = lattice.viterbi();
    Ok((lattice.labels_of(&path), s))
}

/// Exhaustive argmax over all label sequences, same tie-break as Viterbi.
pub fn brute_force_decode(x: &TokenizedTitle, model: &LinearModel) -> Result<(Vec<Label>, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyTitle);
    }
    if x.len() > MAX_ENUMERATION_LEN {
        return Err(Error::TooLongForEnumeration {
            len: x.len(),
            limit: MAX_ENUMERATION_LEN,
        });
    }
    let mut best: Option<(Vec<Label>, f64)> = None;
    for y in enumerate_sequences(&model.candidates, x.len()) {
        let s = score(x, &y, model)?;
        if best.as_ref().is_none_or(|b| s > b.1) {
            best = Some((y, s));
        }
    }
    Ok(best.expect("at least one sequence"))
}

/// All sequences of length `m` over `labels`, in lexicographic order.
pub fn enumerate_sequences(labels: &[Label], m: usize) -> impl Iterator<Item = Vec<Label>> + '_ {
    let k = labels.len();
    let total = k.checked_pow(m as u32).unwrap_or(usize::MAX);
    (0..total).map(move |mut n| {
        let mut y = vec![labels[0]; m];
        for slot in y.iter_mut().rev() {
            *slot = labels[n % k];
            n /= k;
        }
        y
    })
}
