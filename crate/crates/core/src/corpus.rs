//! Tokenization, the BIO label alphabet and the conversion between gold
//! spans and label sequences.
//!
//! A title is split into tokens on whitespace and on a configurable set of
//! separator characters. A single attribute (e.g. `brand`) is tagged per
//! title with the three labels `B-<attr>`, `I-<attr>` and `O`.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One BIO label. The derived order (`B < I < O`) is the tie-break order used
/// by every decoder in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    B,
    I,
    O,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::B, Label::I, Label::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    /// Short form without the attribute suffix.
    pub fn short(self) -> &'static str {
        match self {
            Label::B => "B",
            Label::I => "I",
            Label::O => "O",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// The three labels for one attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAlphabet {
    pub attribute: String,
}

impl LabelAlphabet {
    pub fn new(attribute: impl Into<String>) -> Self {
        LabelAlphabet {
            attribute: attribute.into(),
        }
    }

    pub fn labels(&self) -> [Label; 3] {
        Label::ALL
    }

    /// Full label name, e.g. `B-brand`.
    pub fn name(&self, label: Label) -> String {
        match label {
            Label::O => "O".to_string(),
            l => format!("{}-{}", l.short(), self.attribute),
        }
    }

    /// Parses `B-<attr>`, `I-<attr>` or `O`. Bare `B` and `I` are accepted too.
    pub fn parse(&self, name: &str) -> Result<Label> {
        match name {
            "O" => return Ok(Label::O),
            "B" => return Ok(Label::B),
            "I" => return Ok(Label::I),
            _ => {}
        }
        match name.split_once('-') {
            Some(("B", attr)) if attr == self.attribute => Ok(Label::B),
            Some(("I", attr)) if attr == self.attribute => Ok(Label::I),
            _ => Err(Error::UnknownLabel(name.to_string())),
        }
    }

    pub fn names(&self, labels: &[Label]) -> Vec<String> {
        labels.iter().map(|&l| self.name(l)).collect()
    }
}

/// Separator characters beyond whitespace. Separators split tokens and are
/// dropped from the output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub separators: Vec<char>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            separators: vec![',', '/', '(', ')', '"'],
        }
    }
}

impl TokenizerConfig {
    /// Whitespace-only tokenization.
    pub fn whitespace_only() -> Self {
        TokenizerConfig { separators: Vec::new() }
    }

    fn is_separator(&self, c: char) -> bool {
        c.is_whitespace() || self.separators.contains(&c)
    }
}

/// A title split into tokens. Offsets are byte ranges into `raw_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedTitle {
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub token_offsets: Vec<(usize, usize)>,
}

impl TokenizedTitle {
    /// Builds a title from pre-split tokens; `raw_text` is the tokens joined
    /// by single spaces.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut raw_text = String::new();
        let mut offsets = Vec::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                raw_text.push(' ');
            }
            let start = raw_text.len();
            raw_text.push_str(t.as_ref());
            offsets.push((start, raw_text.len()));
        }
        TokenizedTitle {
            raw_text,
            tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
            token_offsets: offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits `raw_text` into tokens.
pub fn tokenize(raw_text: &str, config: &TokenizerConfig) -> TokenizedTitle {
    let mut tokens = Vec::new();
    let mut offsets = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in raw_text.char_indices() {
        if config.is_separator(c) {
            if let Some(s) = start.take() {
                tokens.push(raw_text[s..i].to_string());
                offsets.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(raw_text[s..].to_string());
        offsets.push((s, raw_text.len()));
    }
    TokenizedTitle {
        raw_text: raw_text.to_string(),
        tokens,
        token_offsets: offsets,
    }
}

/// A contiguous, inclusive token range holding an attribute value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpan {
    pub start_token: usize,
    pub end_token: usize,
    pub surface: Vec<String>,
}

impl AttributeSpan {
    pub fn new(title: &TokenizedTitle, start_token: usize, end_token: usize) -> Result<Self> {
        if start_token > end_token || end_token >= title.len() {
            return Err(Error::SpanOutOfRange {
                start: start_token,
                end: end_token,
                len: title.len(),
            });
        }
        Ok(AttributeSpan {
            start_token,
            end_token,
            surface: title.tokens[start_token..=end_token].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.end_token - self.start_token + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Surface tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.surface.join(" ")
    }
}

/// The raw extraction for one title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    NoValue,
    Span(AttributeSpan),
}

impl Extraction {
    pub fn value(&self) -> Option<String> {
        match self {
            Extraction::NoValue => None,
            Extraction::Span(s) => Some(s.text()),
        }
    }

    pub fn span(&self) -> Option<&AttributeSpan> {
        match self {
            Extraction::NoValue => None,
            Extraction::Span(s) => Some(s),
        }
    }
}

/// Encodes an optional gold span as a label sequence.
pub fn encode_bio(title: &TokenizedTitle, span: Option<&AttributeSpan>) -> Result<Vec<Label>> {
    let mut labels = vec![Label::O; title.len()];
    if let Some(span) = span {
        if span.start_token > span.end_token || span.end_token >= title.len() {
            return Err(Error::SpanOutOfRange {
                start: span.start_token,
                end: span.end_token,
                len: title.len(),
            });
        }
        labels[span.start_token] = Label::B;
        for l in &mut labels[span.start_token + 1..=span.end_token] {
            *l = Label::I;
        }
    }
    Ok(labels)
}

/// Interprets a predicted label sequence.
///
/// Returns the first run that starts at a `B` and continues through
/// consecutive `I` labels. An `I` that does not follow `B` or `I` is read as
/// `O`.
pub fn decode_prediction(title: &TokenizedTitle, labels: &[Label]) -> Result<Extraction> {
    if labels.len() != title.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: title.len(),
            got: labels.len(),
        });
    }
    let Some(start) = labels.iter().position(|&l| l == Label::B) else {
        return Ok(Extraction::NoValue);
    };
    let end = labels[start + 1..]
        .iter()
        .take_while(|&&l| l == Label::I)
        .count()
        + start;
    Ok(Extraction::Span(AttributeSpan::new(title, start, end)?))
}

/// Checks the label grammar: no orphan `I`, at most one `B`.
pub fn validate_labels(labels: &[Label]) -> Result<()> {
    let mut prev = Label::O;
    let mut begins = 0;
    for (i, &l) in labels.iter().enumerate() {
        match l {
            Label::B => begins += 1,
            Label::I if prev == Label::O => {
                return Err(Error::InvalidLabels(format!(
                    "I label at position {i} does not continue a value"
                )))
            }
            _ => {}
        }
        prev = l;
    }
    if begins > 1 {
        return Err(Error::InvalidLabels(format!(
            "{begins} B labels in a single-valued sequence"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    DistantSupervision,
    AnalystFeedback,
    Synthetic,
    Manual,
}

/// A title with one gold label per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedTitle {
    pub title: TokenizedTitle,
    pub labels: Vec<Label>,
    pub provenance: Provenance,
}

impl TaggedTitle {
    pub fn new(title: TokenizedTitle, labels: Vec<Label>, provenance: Provenance) -> Result<Self> {
        if labels.len() != title.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: title.len(),
                got: labels.len(),
            });
        }
        validate_labels(&labels)?;
        Ok(TaggedTitle {
            title,
            labels,
            provenance,
        })
    }

    pub fn from_span(
        title: TokenizedTitle,
        span: Option<&AttributeSpan>,
        provenance: Provenance,
    ) -> Result<Self> {
        let labels = encode_bio(&title, span)?;
        Ok(TaggedTitle {
            title,
            labels,
            provenance,
        })
    }

    /// The gold raw extraction.
    pub fn extraction(&self) -> Extraction {
        decode_prediction(&self.title, &self.labels).expect("labels match title length")
    }

    pub fn value(&self) -> Option<String> {
        self.extraction().value()
    }
}

/// One line of a corpus or catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub title: String,
    pub attribute: String,
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl CorpusRecord {
    pub fn from_tagged(tagged: &TaggedTitle, alphabet: &LabelAlphabet, value: Option<String>) -> Self {
        CorpusRecord {
            id: None,
            title: tagged.title.raw_text.clone(),
            attribute: alphabet.attribute.clone(),
            value,
            tokens: Some(tagged.title.tokens.clone()),
            labels: Some(alphabet.names(&tagged.labels)),
        }
    }

    /// Tokenized title: the stored tokens when present (offsets then index
    /// their space-joined form), otherwise `tokenize`.
    pub fn tokenized(&self, config: &TokenizerConfig) -> TokenizedTitle {
        match &self.tokens {
            Some(tokens) => TokenizedTitle::from_tokens(tokens),
            None => tokenize(&self.title, config),
        }
    }

    /// Converts to a gold-tagged title. Missing labels are computed by
    /// matching `value` inside the title; an unmatched value is an error.
    pub fn to_tagged(&self, config: &TokenizerConfig, provenance: Provenance) -> Result<TaggedTitle> {
        let alphabet = LabelAlphabet::new(self.attribute.clone());
        let title = self.tokenized(config);
        match (&self.labels, &self.value) {
            (Some(names), _) => {
                let labels = names
                    .iter()
                    .map(|n| alphabet.parse(n))
                    .collect::<Result<Vec<_>>>()?;
                TaggedTitle::new(title, labels, provenance)
            }
            (None, None) => TaggedTitle::from_span(title, None, provenance),
            (None, Some(v)) => match crate::weak_supervision::match_value_in_title(&title, v) {
                Some(span) => TaggedTitle::from_span(title, Some(&span), provenance),
                None => Err(Error::InvalidLabels(format!(
                    "value {v:?} does not occur in title {:?}",
                    self.title
                ))),
            },
        }
    }
}

/// Reads one JSON record per line. Blank lines are skipped.
pub fn read_records<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        if let (Some(tokens), Some(labels)) = (&record.tokens, &record.labels) {
            if tokens.len() != labels.len() {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    format!("{} tokens but {} labels", tokens.len(), labels.len()),
                ));
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut writer: W, records: &[CorpusRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads records and converts each to a tagged title, naming the offending
/// line on failure.
pub fn read_tagged<R: BufRead>(
    reader: R,
    source_name: &str,
    config: &TokenizerConfig,
    provenance: Provenance,
) -> Result<Vec<(CorpusRecord, TaggedTitle)>> {
    let records = read_records(reader, source_name)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let t = r
                .to_tagged(config, provenance)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            Ok((r, t))
        })
        .collect()
}
