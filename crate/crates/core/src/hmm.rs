//! Second-order hidden Markov model.
//!
//! `Pr(x, y) = prod_{i=1}^{m+1} Pr(y_i | y_{i-2}, y_{i-1}) * prod_{i=1}^{m} Pr(x_i | y_i)`
//! with `y_{-1} = y_0 = START` and `y_{m+1} = STOP`. Tables are count
//! estimates with additive smoothing. Tokens seen fewer than `min_count`
//! times in training are replaced by a coarse shape class, both when counting
//! and when scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TaggedTitle, TokenizedTitle};
use crate::error::{Error, Result};

/// Token shape classes, tried in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorphClass {
    AllDigits,
    DigitAndLetter,
    AllUppercase,
    InitialUppercase,
    ContainsHyphen,
    AllLowercase,
    Other,
}

impl MorphClass {
    pub const ALL: [MorphClass; 7] = [
        MorphClass::AllDigits,
        MorphClass::DigitAndLetter,
        MorphClass::AllUppercase,
        MorphClass::InitialUppercase,
        MorphClass::ContainsHyphen,
        MorphClass::AllLowercase,
        MorphClass::Other,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

pub fn morph_class(token: &str) -> Result<MorphClass> {
    let Some(first) = token.chars().next() else {
        return Err(Error::Empty("token"));
    };
    let has_digit = token.chars().any(char::is_numeric);
    let has_letter = token.chars().any(char::is_alphabetic);
    Ok(if token.chars().all(char::is_numeric) {
        MorphClass::AllDigits
    } else if has_digit && has_letter {
        MorphClass::DigitAndLetter
    } else if token.chars().all(|c| c.is_alphabetic() && c.is_uppercase()) {
        MorphClass::AllUppercase
    } else if first.is_uppercase() {
        MorphClass::InitialUppercase
    } else if token.contains('-') {
        MorphClass::ContainsHyphen
    } else if token.chars().all(|c| c.is_alphabetic() && c.is_lowercase()) {
        MorphClass::AllLowercase
    } else {
        MorphClass::Other
    })
}

/// Context slot: a label or START.
const START: usize = 3;
/// Outcome slot: a label or STOP.
const STOP: usize = 3;
const CONTEXTS: usize = 4;
const OUTCOMES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub smoothing: f64,
    pub min_count: usize,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig {
            smoothing: 0.1,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    /// Vocabulary token -> symbol id. Symbols `vocab.len()..` are the shape
    /// classes in declaration order.
    vocab: BTreeMap<String, usize>,
    /// `transition[(a * 4 + b) * 4 + c] = Pr(c | a, b)`.
    transition: Vec<f64>,
    /// `emission[label][symbol]`.
    emission: Vec<Vec<f64>>,
    smoothing: f64,
}

fn ctx(l: Option<Label>) -> usize {
    l.map_or(START, Label::index)
}

impl HmmModel {
    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    fn num_symbols(&self) -> usize {
        self.vocab.len() + MorphClass::ALL.len()
    }

    fn symbol(&self, token: &str) -> Result<usize> {
        match self.vocab.get(token) {
            Some(&id) => Ok(id),
            None => Ok(self.vocab.len() + morph_class(token)?.index()),
        }
    }

    /// `Pr(next | prev2, prev1)`; `None` is START for the context and STOP
    /// for the outcome.
    pub fn transition_prob(&self, prev2: Option<Label>, prev1: Option<Label>, next: Option<Label>) -> f64 {
        self.transition[(ctx(prev2) * CONTEXTS + ctx(prev1)) * OUTCOMES + next.map_or(STOP, Label::index)]
    }

    /// `Pr(token | label)`, through the shape class for out-of-vocabulary tokens.
    pub fn emission_prob(&self, label: Label, token: &str) -> Result<f64> {
        Ok(self.emission[label.index()][self.symbol(token)?])
    }

    pub fn transition_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.transition.chunks(OUTCOMES)
    }

    pub fn emission_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.emission.iter().map(Vec::as_slice)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_row = |r: &[f64], width: usize| {
            r.len() == width && r.iter().all(|p| (0.0..=1.0).contains(p)) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9
        };
        if self.transition.len() != CONTEXTS * CONTEXTS * OUTCOMES
            || self.emission.len() != 3
            || !self.transition_rows().all(|r| ok_row(r, OUTCOMES))
            || !self.emission_rows().all(|r| ok_row(r, self.num_symbols()))
            || self.vocab.values().any(|&id| id >= self.vocab.len())
        {
            return Err(Error::InvalidConfig("malformed HMM tables".into()));
        }
        Ok(())
    }
}

fn normalize_row(counts: &[f64], k: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + k * counts.len() as f64;
    if total == 0.0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|c| (c + k) / total).collect()
}

pub fn train_hmm(corpus: &[TaggedTitle], config: &HmmConfig) -> Result<HmmModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if !(config.smoothing >= 0.0 && config.smoothing.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothing must be >= 0, got {}", config.smoothing)));
    }
    let mut token_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in corpus {
        if t.labels.len() != t.title.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: t.title.len(),
                got: t.labels.len(),
            });
        }
        for tok in &t.title.tokens {
            *token_counts.entry(tok).or_default() += 1;
        }
    }
    let vocab: BTreeMap<String, usize> = token_counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count.max(1))
        .enumerate()
        .map(|(id, (tok, _))| (tok.to_string(), id))
        .collect();
    let mut model = HmmModel {
        vocab,
        transition: Vec::new(),
        emission: Vec::new(),
        smoothing: config.smoothing,
    };

    let mut trans = vec![0.0; CONTEXTS * CONTEXTS * OUTCOMES];
    let mut emit = vec![vec![0.0; model.num_symbols()]; 3];
    for t in corpus {
        let (mut a, mut b) = (START, START);
        for (tok, &l) in t.title.tokens.iter().zip(&t.labels) {
            trans[(a * CONTEXTS + b) * OUTCOMES + l.index()] += 1.0;
            emit[l.index()][model.symbol(tok)?] += 1.0;
            (a, b) = (b, l.index());
        }
        trans[(a * CONTEXTS + b) * OUTCOMES + STOP] += 1.0;
    }
    model.transition = trans.chunks(OUTCOMES).flat_map(|r| normalize_row(r, config.smoothing)).collect();
    model.emission = emit.iter().map(|r| normalize_row(r, config.smoothing)).collect();
    Ok(model)
}

/// `ln Pr(x, y)`; negative infinity when some event has probability zero.
pub fn hmm_joint_log_prob(x: &TokenizedTitle, y: &[Label], model: &HmmModel) -> Result<f64> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut total = 0.0;
    let (mut a, mut b) = (None, None);
    for (tok, &l) in x.tokens.iter().zip(y) {
        total += model.transition_prob(a, b, Some(l)).ln() + model.emission_prob(l, tok)?.ln();
        (a, b) = (b, Some(l));
    }
    Ok(total + model.transition_prob(a, b, None).ln())
}

/// Most probable label sequence; ties go to the lexicographically smallest.
pub fn hmm_decode(x: &TokenizedTitle, model: &HmmModel) -> Result<Vec<Label>> {
    let m = x.len();
    if m == 0 {
        return Err(Error::EmptyTitle);
    }
    let ln = |p: f64| p.ln();
    let emit: Vec<[f64; 3]> = x
        .tokens
        .iter()
        .map(|tok| {
            let s = model.symbol(tok)?;
            Ok([0, 1, 2].map(|l| ln(model.emission[l][s])))
        })
        .collect::<Result<_>>()?;
    let trans = |a: usize, b: usize, c: usize| ln(model.transition[(a * CONTEXTS + b) * OUTCOMES + c]);

    // best[i][a][b]: best log score of positions i.. given y_{i-2} = a, y_{i-1} = b.
    let mut best = vec![[[f64::NEG_INFINITY; CONTEXTS]; CONTEXTS]; m + 1];
    let mut choice = vec![[[0usize; CONTEXTS]; CONTEXTS]; m];
    for a in 0..CONTEXTS {
        for b in 0..CONTEXTS {
            best[m][a][b] = trans(a, b, STOP);
        }
    }
    for i in (0..m).rev() {
        for a in 0..CONTEXTS {
            for b in 0..CONTEXTS {
                let mut top = (0, f64::NEG_INFINITY);
                for c in 0..3 {
                    let s = trans(a, b, c) + emit[i][c] + best[i + 1][b][c];
                    if c == 0 || s > top.1 {
                        top = (c, s);
                    }
                }
                choice[i][a][b] = top.0;
                best[i][a][b] = top.1;
            }
        }
    }
    if best[0][START][START] == f64::NEG_INFINITY {
        return Ok(vec![Label::B; m]);
    }
    let (mut a, mut b) = (START, START);
    let mut out = Vec::with_capacity(m);
    for step in &choice {
        let c = step[a][b];
        out.push(Label::from_index(c).expect("label slot"));
        (a, b) = (b, c);
    }
    Ok(out)
}
