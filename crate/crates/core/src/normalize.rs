//! Value normalization: variation table, blacklist and the analyst feedback
//! loop that grows both.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeSpan, Provenance, TaggedTitle, TokenizerConfig};
use crate::error::{Error, Result};

/// Literal extraction output meaning the title carries no value.
pub const NO_VALUE: &str = "no-value";

const STRIPPED: [char; 5] = ['-', '\'', '&', '.', ','];

/// Lowercases, drops `- ' & . ,` and collapses whitespace runs to one space.
pub fn key_form(raw: &str) -> String {
    let cleaned: String = raw
        .chars()
        .filter(|c| !STRIPPED.contains(c))
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Variation key form -> canonical value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationTable {
    entries: BTreeMap<String, String>,
}

impl NormalizationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row. Re-adding the same mapping is a no-op; mapping a key to a
    /// second canonical value is a conflict.
    pub fn insert(&mut self, variation: &str, canonical: &str) -> Result<()> {
        let canonical = canonical.trim();
        if canonical.is_empty() {
            return Err(Error::InvalidConfig(format!("empty canonical value for {variation:?}")));
        }
        let key = key_form(variation);
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("variation {variation:?} has an empty key form")));
        }
        match self.entries.get(&key) {
            Some(existing) if existing != canonical => Err(Error::Conflict(format!(
                "{key:?} already maps to {existing:?}, not {canonical:?}"
            ))),
            _ => {
                self.entries.insert(key, canonical.to_string());
                Ok(())
            }
        }
    }

    pub fn get(&self, raw: &str) -> Option<&str> {
        self.entries.get(&key_form(raw)).map(String::as_str)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_canonical(&self, value: &str) -> bool {
        self.entries.values().any(|v| v == value)
    }

    /// Reads `variation<TAB>canonical` lines. Blank lines are skipped.
    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut table = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let Some((variation, canonical)) = line.split_once('\t') else {
                return Err(Error::parse(source_name, i + 1, "expected two tab-separated columns"));
            };
            if canonical.contains('\t') {
                return Err(Error::parse(source_name, i + 1, "more than two columns"));
            }
            table
                .insert(variation, canonical)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(writer, "{k}\t{v}")?;
        }
        Ok(())
    }
}

/// Key-form terms known not to be values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blacklist {
    terms: BTreeSet<String>,
}

impl Blacklist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: &str) -> bool {
        let key = key_form(term);
        !key.is_empty() && self.terms.insert(key)
    }

    pub fn contains(&self, raw: &str) -> bool {
        self.terms.contains(&key_form(raw))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// One term per line; blank lines are skipped.
    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut list = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if line.contains('\t') {
                return Err(Error::parse(source_name, i + 1, "blacklist terms cannot contain tabs"));
            }
            if key_form(&line).is_empty() {
                return Err(Error::parse(source_name, i + 1, "term has an empty key form"));
            }
            list.insert(&line);
        }
        Ok(list)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for t in &self.terms {
            writeln!(writer, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "value", rename_all = "kebab-case")]
pub enum NormalizationOutcome {
    Canonical(String),
    Unbranded,
    Blacklisted,
    Unresolved,
}

/// Table plus blacklist with a version counter bumped on every change.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Normalizer {
    table: NormalizationTable,
    blacklist: Blacklist,
    version: u64,
}

impl Normalizer {
    pub fn new(table: NormalizationTable, blacklist: Blacklist) -> Result<Self> {
        if let Some(term) = blacklist.iter().find(|t| table.contains_key(t)) {
            return Err(Error::Conflict(format!("{term:?} is both blacklisted and in the table")));
        }
        Ok(Normalizer {
            table,
            blacklist,
            version: 0,
        })
    }

    pub fn table(&self) -> &NormalizationTable {
        &self.table
    }

    pub fn blacklist(&self) -> &Blacklist {
        &self.blacklist
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn normalize(&self, raw: Option<&str>) -> NormalizationOutcome {
        normalize_value(raw, &self.table, &self.blacklist)
    }

    pub fn accept(&mut self, variation: &str, canonical: &str) -> Result<()> {
        if self.blacklist.contains(variation) {
            return Err(Error::Conflict(format!("{variation:?} is blacklisted")));
        }
        self.table.insert(variation, canonical)?;
        self.version += 1;
        Ok(())
    }

    pub fn reject(&mut self, term: &str) -> Result<()> {
        let key = key_form(term);
        if self.table.contains_key(&key) {
            return Err(Error::Conflict(format!("{term:?} is already in the table")));
        }
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("{term:?} has an empty key form")));
        }
        self.blacklist.insert(term);
        self.version += 1;
        Ok(())
    }
}

/// Many readers, one writer. Writers replace the whole normalizer so readers
/// see either the old or the new version.
#[derive(Debug, Default)]
pub struct SharedNormalizer {
    current: RwLock<Arc<Normalizer>>,
}

impl SharedNormalizer {
    pub fn new(normalizer: Normalizer) -> Self {
        SharedNormalizer {
            current: RwLock::new(Arc::new(normalizer)),
        }
    }

    pub fn snapshot(&self) -> Arc<Normalizer> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn update<T>(&self, f: impl FnOnce(&mut Normalizer) -> Result<T>) -> Result<T> {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let mut next = (**guard).clone();
        let out = f(&mut next)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}

/// `None` and the literal `no-value` mean unbranded.
pub fn normalize_value(raw: Option<&str>, table: &NormalizationTable, blacklist: &Blacklist) -> NormalizationOutcome {
    let Some(raw) = raw.filter(|r| r.trim() != NO_VALUE) else {
        return NormalizationOutcome::Unbranded;
    };
    if blacklist.contains(raw) {
        NormalizationOutcome::Blacklisted
    } else if let Some(c) = table.get(raw) {
        NormalizationOutcome::Canonical(c.to_string())
    } else {
        NormalizationOutcome::Unresolved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub frequency_threshold: usize,
    pub sample_size: usize,
    pub rng_seed: u64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            frequency_threshold: 30,
            sample_size: 5,
            rng_seed: 0,
        }
    }
}

/// One extraction to post-process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    pub title: String,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSample {
    pub item_id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEntry {
    /// Surface form of the first occurrence.
    pub value: String,
    pub frequency: usize,
    pub samples: Vec<ReviewSample>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchResult {
    /// `(item id, canonical value)`.
    pub accepted: Vec<(String, String)>,
    pub unbranded: Vec<String>,
    pub blacklisted: Vec<String>,
    pub review_queue: Vec<ReviewEntry>,
    /// Occurrences of each unresolved key form.
    pub frequency: BTreeMap<String, usize>,
    /// Unresolved predictions kept so that later decisions can resolve them.
    pub pending: Vec<Prediction>,
}

/// Routes each prediction to accepted, unbranded, blacklisted or the
/// frequency tracker, then queues every tracked value seen more than
/// `frequency_threshold` times for review with `sample_size` random samples.
pub fn batch_postprocess(predictions: &[Prediction], normalizer: &Normalizer, config: &FeedbackConfig) -> BatchResult {
    let mut out = BatchResult::default();
    let mut occurrences: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, p) in predictions.iter().enumerate() {
        match normalizer.normalize(p.value.as_deref()) {
            NormalizationOutcome::Canonical(c) => out.accepted.push((p.item_id.clone(), c)),
            NormalizationOutcome::Unbranded => out.unbranded.push(p.item_id.clone()),
            NormalizationOutcome::Blacklisted => out.blacklisted.push(p.item_id.clone()),
            NormalizationOutcome::Unresolved => {
                let key = key_form(p.value.as_deref().unwrap_or_default());
                occurrences.entry(key).or_default().push(i);
                out.pending.push(p.clone());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    for (key, idx) in &occurrences {
        out.frequency.insert(key.clone(), idx.len());
        if idx.len() <= config.frequency_threshold {
            continue;
        }
        let mut picks = sample(&mut rng, idx.len(), config.sample_size.min(idx.len())).into_vec();
        picks.sort_unstable();
        out.review_queue.push(ReviewEntry {
            value: predictions[idx[0]].value.clone().unwrap_or_default(),
            frequency: idx.len(),
            samples: picks
                .into_iter()
                .map(|j| {
                    let p = &predictions[idx[j]];
                    ReviewSample {
                        item_id: p.item_id.clone(),
                        title: p.title.clone(),
                    }
                })
                .collect(),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Accept { canonical: String },
    Blacklist,
    /// The corrected value span in `title`, inclusive token indices; no span
    /// means the title has no value.
    Relabel {
        title: String,
        span: Option<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub predicted_value: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

impl ReviewDecision {
    pub fn validate(&self) -> Result<()> {
        if let Verdict::Accept { canonical } = &self.verdict {
            if canonical.trim().is_empty() {
                return Err(Error::InvalidConfig("accept verdict needs a canonical value".into()));
            }
        }
        Ok(())
    }
}

/// One line per decision.
pub fn read_decisions<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<ReviewDecision>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: ReviewDecision =
            serde_json::from_str(&line).map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        d.validate().map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        out.push(d);
    }
    Ok(out)
}

/// Mutable state of the feedback loop.
#[derive(Debug, Clone, Default)]
pub struct FeedbackState {
    pub normalizer: Normalizer,
    pub accepted: Vec<(String, String)>,
    pub blacklisted: Vec<String>,
    pub pending: Vec<Prediction>,
    pub training_additions: Vec<TaggedTitle>,
}

impl FeedbackState {
    pub fn new(normalizer: Normalizer) -> Self {
        FeedbackState {
            normalizer,
            ..Default::default()
        }
    }

    pub fn absorb(&mut self, batch: BatchResult) {
        self.accepted.extend(batch.accepted);
        self.blacklisted.extend(batch.blacklisted);
        self.pending.extend(batch.pending);
    }

    fn take_pending(&mut self, key: &str) -> Vec<Prediction> {
        let (hit, keep) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|p| key_form(p.value.as_deref().unwrap_or_default()) == key);
        self.pending = keep;
        hit
    }
}

pub fn apply_review_decision(
    decision: &ReviewDecision,
    state: &mut FeedbackState,
    tokenizer: &TokenizerConfig,
) -> Result<()> {
    decision.validate()?;
    let key = key_form(&decision.predicted_value);
    match &decision.verdict {
        Verdict::Accept { canonical } => {
            state.normalizer.accept(&decision.predicted_value, canonical)?;
            let canonical = canonical.trim().to_string();
            for p in state.take_pending(&key) {
                state.accepted.push((p.item_id, canonical.clone()));
            }
        }
        Verdict::Blacklist => {
            state.normalizer.reject(&decision.predicted_value)?;
            for p in state.take_pending(&key) {
                state.blacklisted.push(p.item_id);
            }
        }
        Verdict::Relabel { title, span } => {
            let title = crate::corpus::tokenize(title, tokenizer);
            let span = span.map(|(s, e)| AttributeSpan::new(&title, s, e)).transpose()?;
            let tagged = TaggedTitle::from_span(title, span.as_ref(), Provenance::AnalystFeedback)?;
            state.training_additions.push(tagged);
        }
    }
    Ok(())
}
