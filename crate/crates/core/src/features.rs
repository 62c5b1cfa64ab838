//! Feature templates, the frozen feature index and sparse feature vectors.
//!
//! Every observation template produces at most one observation string per
//! position (e.g. `w0=Acme`). The string is conjoined with the label at that
//! position to form a feature name (`w0=Acme|B`). Label transitions are
//! carried by the separate `trans=<prev>><cur>` features, with `START` as the
//! previous label of the first position.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TaggedTitle, TokenizedTitle};
use crate::error::{Error, Result};

/// Observation templates. Names match the lines of a feature configuration
/// file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    /// Identity of the current token.
    Current,
    /// Identity of the preceding token.
    Previous,
    PrevCurrent,
    CurrentNext,
    PrevPrevPrev,
    CurrentLemma,
    PreviousLemma,
    NextStartsWithDigit,
    CurrentOnlyLetters,
    CurrentOnlyDigits,
    CurrentAllUppercase,
    CurrentStartsUppercase,
    CurrentAndNextStartUppercase,
    CurrentHasHyphen,
    CurrentCharCount,
    Position,
    /// Identity of the first token of the title, seen from every position.
    TitleFirstToken,
    CurrentIsFirst,
    PreviousIsBy,
    PreviousIsAnd,
    PreviousStartsUppercase,
    /// Fires at every position; conjoined with the label it is a per-label bias.
    Bias,
    /// Current token capitalized and the next token not capitalized.
    CapitalizationBoundary,
}

impl Template {
    pub const ALL: [Template; 23] = [
        Template::Current,
        Template::Previous,
        Template::PrevCurrent,
        Template::CurrentNext,
        Template::PrevPrevPrev,
        Template::CurrentLemma,
        Template::PreviousLemma,
        Template::NextStartsWithDigit,
        Template::CurrentOnlyLetters,
        Template::CurrentOnlyDigits,
        Template::CurrentAllUppercase,
        Template::CurrentStartsUppercase,
        Template::CurrentAndNextStartUppercase,
        Template::CurrentHasHyphen,
        Template::CurrentCharCount,
        Template::Position,
        Template::TitleFirstToken,
        Template::CurrentIsFirst,
        Template::PreviousIsBy,
        Template::PreviousIsAnd,
        Template::PreviousStartsUppercase,
        Template::Bias,
        Template::CapitalizationBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Current => "w0",
            Template::Previous => "w-1",
            Template::PrevCurrent => "w-1,w0",
            Template::CurrentNext => "w0,w1",
            Template::PrevPrevPrev => "w-2,w-1",
            Template::CurrentLemma => "w0.lemma",
            Template::PreviousLemma => "w-1.lemma",
            Template::NextStartsWithDigit => "w1[0].is_digit",
            Template::CurrentOnlyLetters => "w0.only_letters",
            Template::CurrentOnlyDigits => "w0.only_digits",
            Template::CurrentAllUppercase => "w0.is_uppercase",
            Template::CurrentStartsUppercase => "w0[0].is_uppercase",
            Template::CurrentAndNextStartUppercase => "w0[0],w1[0].are_uppercase",
            Template::CurrentHasHyphen => "w0.has_hyphen",
            Template::CurrentCharCount => "w0.char_count",
            Template::Position => "position",
            Template::TitleFirstToken => "title.first_token",
            Template::CurrentIsFirst => "w0.is_first",
            Template::PreviousIsBy => "w-1=by",
            Template::PreviousIsAnd => "w-1=and",
            Template::PreviousStartsUppercase => "w-1[0].is_uppercase",
            Template::Bias => "bias",
            Template::CapitalizationBoundary => "w0.cap,w1.not_cap",
        }
    }

    /// The observation this template reports at position `i`, if it fires.
    pub fn observe(self, tokens: &[String], i: usize) -> Option<String> {
        let tok = |offset: isize| -> &str {
            let j = i as isize + offset;
            if j < 0 {
                "<S>"
            } else if j as usize >= tokens.len() {
                "</S>"
            } else {
                &tokens[j as usize]
            }
        };
        let real = |offset: isize| -> Option<&str> {
            let j = i as isize + offset;
            (j >= 0 && (j as usize) < tokens.len()).then(|| tokens[j as usize].as_str())
        };
        let name = self.name();
        let flag = |b: bool| b.then(|| name.to_string());
        match self {
            Template::Current => Some(format!("{name}={}", tok(0))),
            Template::Previous => Some(format!("{name}={}", tok(-1))),
            Template::PrevCurrent => Some(format!("{name}={}|{}", tok(-1), tok(0))),
            Template::CurrentNext => Some(format!("{name}={}|{}", tok(0), tok(1))),
            Template::PrevPrevPrev => Some(format!("{name}={}|{}", tok(-2), tok(-1))),
            Template::CurrentLemma => Some(format!("{name}={}", lemma(tok(0)))),
            Template::PreviousLemma => Some(format!("{name}={}", real(-1).map_or("<S>".into(), lemma))),
            Template::NextStartsWithDigit => {
                flag(real(1).is_some_and(|w| w.chars().next().is_some_and(|c| c.is_ascii_digit())))
            }
            Template::CurrentOnlyLetters => flag(tok(0).chars().all(char::is_alphabetic)),
            Template::CurrentOnlyDigits => flag(tok(0).chars().all(|c| c.is_ascii_digit())),
            Template::CurrentAllUppercase => flag(is_all_uppercase(tok(0))),
            Template::CurrentStartsUppercase => flag(starts_uppercase(tok(0))),
            Template::CurrentAndNextStartUppercase => {
                flag(starts_uppercase(tok(0)) && real(1).is_some_and(starts_uppercase))
            }
            Template::CurrentHasHyphen => flag(tok(0).contains('-')),
            Template::CurrentCharCount => {
                let n = tok(0).chars().count();
                Some(if n >= 6 {
                    format!("{name}=6+")
                } else {
                    format!("{name}={n}")
                })
            }
            Template::Position => Some(if i >= 4 {
                format!("{name}=4+")
            } else {
                format!("{name}={i}")
            }),
            Template::TitleFirstToken => Some(format!("{name}={}", tokens[0])),
            Template::CurrentIsFirst => flag(i == 0),
            Template::PreviousIsBy => flag(real(-1).is_some_and(|w| w.eq_ignore_ascii_case("by"))),
            Template::PreviousIsAnd => flag(real(-1).is_some_and(|w| w.eq_ignore_ascii_case("and"))),
            Template::PreviousStartsUppercase => flag(real(-1).is_some_and(starts_uppercase)),
            Template::Bias => Some(name.to_string()),
            Template::CapitalizationBoundary => {
                flag(starts_uppercase(tok(0)) && real(1).is_some_and(|w| !starts_uppercase(w)))
            }
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTemplate(s.to_string()))
    }
}

fn starts_uppercase(w: &str) -> bool {
    w.chars().next().is_some_and(char::is_uppercase)
}

fn is_all_uppercase(w: &str) -> bool {
    w.chars().any(char::is_alphabetic) && !w.chars().any(char::is_lowercase)
}

/// Lowercases and strips one inflectional suffix when at least three
/// characters remain.
pub fn lemma(token: &str) -> String {
    let lower = token.to_lowercase();
    for suffix in ["ing", "es", "ed", "s"] {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if stem.chars().count() >= 3 {
                return stem.to_string();
            }
        }
    }
    lower
}

/// The active template set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureConfig {
    templates: Vec<Template>,
}

impl FeatureConfig {
    pub fn new(templates: impl IntoIterator<Item = Template>) -> Self {
        let mut seen = BTreeSet::new();
        FeatureConfig {
            templates: templates.into_iter().filter(|t| seen.insert(*t)).collect(),
        }
    }

    /// Templates used for the CRF model.
    pub fn crf_set() -> Self {
        use Template::*;
        FeatureConfig::new([
            PrevCurrent,
            CurrentNext,
            Current,
            PreviousLemma,
            PrevPrevPrev,
            NextStartsWithDigit,
            CurrentOnlyLetters,
            TitleFirstToken,
            Previous,
            CurrentHasHyphen,
            CurrentStartsUppercase,
            CurrentCharCount,
            PreviousIsBy,
            CurrentLemma,
            Position,
            CurrentAndNextStartUppercase,
            CurrentIsFirst,
            PreviousIsAnd,
            PreviousStartsUppercase,
            Bias,
        ])
    }

    /// Templates used for the perceptron model.
    pub fn perceptron_set() -> Self {
        use Template::*;
        FeatureConfig::new([
            PrevCurrent,
            CurrentNext,
            Current,
            PreviousLemma,
            PrevPrevPrev,
            NextStartsWithDigit,
            CurrentOnlyLetters,
            TitleFirstToken,
            Previous,
            CurrentStartsUppercase,
            CurrentCharCount,
            CurrentLemma,
            CurrentAndNextStartUppercase,
            CurrentOnlyDigits,
            CurrentAllUppercase,
            Bias,
        ])
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn contains(&self, t: Template) -> bool {
        self.templates.contains(&t)
    }

    pub fn without(&self, t: Template) -> Self {
        FeatureConfig::new(self.templates.iter().copied().filter(|&x| x != t))
    }

    /// Parses a configuration file: one template name per line, `#` starts a
    /// comment.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut templates = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let t = line
                .parse::<Template>()
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            templates.push(t);
        }
        Ok(FeatureConfig::new(templates))
    }

    pub fn to_text(&self) -> String {
        self.templates.iter().map(|t| format!("{t}\n")).collect()
    }

    /// Observation strings at position `i`.
    pub fn observations(&self, tokens: &[String], i: usize) -> Vec<String> {
        self.templates.iter().filter_map(|t| t.observe(tokens, i)).collect()
    }
}

impl Default for FeatureConfig {
    /// Every row of the brand feature table plus the label bias.
    fn default() -> Self {
        let mut t: Vec<Template> = FeatureConfig::crf_set().templates;
        t.extend(FeatureConfig::perceptron_set().templates);
        FeatureConfig::new(t)
    }
}

impl TryFrom<Vec<String>> for FeatureConfig {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Ok(FeatureConfig::new(
            names.iter().map(|n| n.parse()).collect::<Result<Vec<Template>>>()?,
        ))
    }
}

impl From<FeatureConfig> for Vec<String> {
    fn from(c: FeatureConfig) -> Self {
        c.templates.iter().map(|t| t.name().to_string()).collect()
    }
}

/// Name of the label-conjoined feature for an observation.
pub fn observation_feature(observation: &str, label: Label) -> String {
    format!("{observation}|{label}")
}

/// Name of the transition feature; `None` is the start of the title.
pub fn transition_feature(prev: Option<Label>, cur: Label) -> String {
    match prev {
        None => format!("trans=START>{cur}"),
        Some(p) => format!("trans={p}>{cur}"),
    }
}

/// Feature names firing at position `i` for the label pair.
pub fn position_feature_names(
    x: &TokenizedTitle,
    y_prev: Option<Label>,
    y_curr: Label,
    i: usize,
    config: &FeatureConfig,
) -> Result<Vec<String>> {
    if i >= x.len() {
        return Err(Error::PositionOutOfRange { position: i, len: x.len() });
    }
    let mut names: Vec<String> = config
        .observations(&x.tokens, i)
        .iter()
        .map(|o| observation_feature(o, y_curr))
        .collect();
    names.push(transition_feature(if i == 0 { None } else { y_prev }, y_curr));
    Ok(names)
}

/// Bijective map between feature names and dense ids, frozen after
/// construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl FeatureIndex {
    /// Builds an index over the given names, sorted and deduplicated.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        let names: Vec<String> = set.into_iter().collect();
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        FeatureIndex { names, ids }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl From<Vec<String>> for FeatureIndex {
    fn from(names: Vec<String>) -> Self {
        FeatureIndex::from_names(names)
    }
}

impl From<FeatureIndex> for Vec<String> {
    fn from(index: FeatureIndex) -> Self {
        index.names
    }
}

/// Registers every feature firing on a gold pair plus all transition
/// features.
pub fn build_feature_index(corpus: &[TaggedTitle], config: &FeatureConfig) -> Result<FeatureIndex> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut names = BTreeSet::new();
    for prev in [None, Some(Label::B), Some(Label::I), Some(Label::O)] {
        for cur in Label::ALL {
            names.insert(transition_feature(prev, cur));
        }
    }
    for t in corpus {
        for i in 0..t.title.len() {
            let prev = i.checked_sub(1).map(|j| t.labels[j]);
            names.extend(position_feature_names(&t.title, prev, t.labels[i], i, config)?);
        }
    }
    Ok(FeatureIndex::from_names(names))
}

/// Sparse feature vector with strictly increasing ids and nonzero values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn new() -> Self {
        FeatureVector::default()
    }

    /// Sums the given (id, value) pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (id, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == id => last.1 += v,
                _ => out.push((id, v)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        FeatureVector { entries: out }
    }

    /// Each id counts once per occurrence.
    pub fn from_ids(ids: impl IntoIterator<Item = u32>) -> Self {
        FeatureVector::from_pairs(ids.into_iter().map(|id| (id, 1.0)))
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(id, v)| weights[id as usize] * v).sum()
    }

    pub fn add(&self, other: &FeatureVector) -> FeatureVector {
        FeatureVector::from_pairs(self.entries.iter().chain(&other.entries).copied())
    }

    pub fn sub(&self, other: &FeatureVector) -> FeatureVector {
        FeatureVector::from_pairs(
            self.entries
                .iter()
                .copied()
                .chain(other.entries.iter().map(|&(id, v)| (id, -v))),
        )
    }

    /// `weights += scale * self`.
    pub fn add_to(&self, weights: &mut [f64], scale: f64) {
        for &(id, v) in &self.entries {
            weights[id as usize] += scale * v;
        }
    }
}

/// Per-position feature vector restricted to the index.
pub fn extract_position_features(
    x: &TokenizedTitle,
    y_prev: Option<Label>,
    y_curr: Label,
    i: usize,
    config: &FeatureConfig,
    index: &FeatureIndex,
) -> Result<FeatureVector> {
    let names = position_feature_names(x, y_prev, y_curr, i, config)?;
    Ok(FeatureVector::from_ids(names.iter().filter_map(|n| index.id(n))))
}

/// Index ids for one title, precomputed for every label.
#[derive(Debug, Clone)]
pub struct TitleFeatures {
    /// `observations[i][label]` lists the ids firing at position `i`.
    pub observations: Vec<[Vec<u32>; 3]>,
    /// `transitions[prev][cur]`, where `prev` 0 is START and `1 + label` otherwise.
    pub transitions: [[Option<u32>; 3]; 4],
}

impl TitleFeatures {
    pub fn compile(x: &TokenizedTitle, config: &FeatureConfig, index: &FeatureIndex) -> Self {
        let observations = (0..x.len())
            .map(|i| {
                let obs = config.observations(&x.tokens, i);
                Label::ALL.map(|l| {
                    obs.iter()
                        .filter_map(|o| index.id(&observation_feature(o, l)))
                        .collect()
                })
            })
            .collect();
        let mut transitions = [[None; 3]; 4];
        for (p, prev) in [None, Some(Label::B), Some(Label::I), Some(Label::O)].into_iter().enumerate() {
            for cur in Label::ALL {
                transitions[p][cur.index()] = index.id(&transition_feature(prev, cur));
            }
        }
        TitleFeatures {
            observations,
            transitions,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn transition(&self, prev: Option<Label>, cur: Label) -> Option<u32> {
        self.transitions[prev.map_or(0, |p| p.index() + 1)][cur.index()]
    }

    /// Ids firing for the label sequence `y`, with multiplicity.
    pub fn ids_for<'a>(&'a self, y: &'a [Label]) -> impl Iterator<Item = u32> + 'a {
        y.iter().enumerate().flat_map(move |(i, &l)| {
            let prev = i.checked_sub(1).map(|j| y[j]);
            self.observations[i][l.index()]
                .iter()
                .copied()
                .chain(self.transition(prev, l))
        })
    }

    pub fn global(&self, y: &[Label]) -> FeatureVector {
        FeatureVector::from_ids(self.ids_for(y))
    }
}

/// `F(x, y)`, the sum of the per-position vectors.
pub fn global_feature_vector(
    x: &TokenizedTitle,
    y: &[Label],
    config: &FeatureConfig,
    index: &FeatureIndex,
) -> Result<FeatureVector> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(TitleFeatures::compile(x, config, index).global(y))
}
