//! Non-sequential baselines: lexicon lookup and tf-idf nearest neighbors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, AttributeSpan, Extraction, TaggedTitle, TokenizedTitle, TokenizerConfig};
use crate::error::{Error, Result};

fn lower(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

/// Known values as lowercased token sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeSet<Vec<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_tokens(&mut self, tokens: &[String]) -> bool {
        !tokens.is_empty() && self.entries.insert(lower(tokens))
    }

    pub fn insert(&mut self, value: &str, tokenizer: &TokenizerConfig) -> bool {
        self.insert_tokens(&tokenize(value, tokenizer).tokens)
    }

    /// Gold values of a tagged corpus.
    pub fn from_corpus(corpus: &[TaggedTitle]) -> Self {
        let mut lex = Self::new();
        for t in corpus {
            if let Some(span) = t.extraction().span() {
                lex.insert_tokens(&span.surface);
            }
        }
        lex
    }

    /// One value per line.
    pub fn read<R: BufRead>(reader: R, tokenizer: &TokenizerConfig) -> Result<Self> {
        let mut lex = Self::new();
        for line in reader.lines() {
            lex.insert(&line?, tokenizer);
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.entries.contains(tokens)
    }

    pub fn iter(&self) -> impl Iterator<Item = String> + '_ {
        self.entries.iter().map(|e| e.join(" "))
    }

    fn max_len(&self) -> usize {
        self.entries.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DictStrategy {
    /// Most characters; then earliest; then alphabetical.
    Max,
    /// Earliest start; then most characters; then alphabetical.
    First,
}

/// Picks one lexicon match in the title. The returned span keeps the title's
/// original casing.
pub fn dict_extract(title: &TokenizedTitle, lexicon: &Lexicon, strategy: DictStrategy) -> Extraction {
    let tokens = lower(&title.tokens);
    let max_len = lexicon.max_len();
    let mut best: Option<(usize, usize, usize, String)> = None;
    for start in 0..tokens.len() {
        for end in start..tokens.len().min(start + max_len) {
            let window = &tokens[start..=end];
            if !lexicon.contains(window) {
                continue;
            }
            let text = window.join(" ");
            let cand = (start, end, text.chars().count(), text);
            let better = match &best {
                None => true,
                Some(b) => match strategy {
                    DictStrategy::Max => (std::cmp::Reverse(cand.2), cand.0, &cand.3) < (std::cmp::Reverse(b.2), b.0, &b.3),
                    DictStrategy::First => (cand.0, std::cmp::Reverse(cand.2), &cand.3) < (b.0, std::cmp::Reverse(b.2), &b.3),
                },
            };
            if better {
                best = Some(cand);
            }
        }
    }
    match best {
        Some((s, e, _, _)) => Extraction::Span(AttributeSpan::new(title, s, e).expect("window inside title")),
        None => Extraction::NoValue,
    }
}

/// Training titles and their gold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Documents {
    titles: Vec<Vec<String>>,
    labels: Vec<Option<String>>,
}

/// Unit-length tf-idf vectors of training titles with an inverted index.
/// Term frequency is the raw count; idf is `ln(N / df)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Documents", into = "Documents")]
pub struct TfIdfIndex {
    docs: Documents,
    vocab: BTreeMap<String, u32>,
    idf: Vec<f64>,
    vectors: Vec<Vec<(u32, f64)>>,
    postings: Vec<Vec<(u32, f64)>>,
}

impl From<TfIdfIndex> for Documents {
    fn from(index: TfIdfIndex) -> Self {
        index.docs
    }
}

impl TryFrom<Documents> for TfIdfIndex {
    type Error = Error;

    fn try_from(docs: Documents) -> Result<Self> {
        if docs.titles.len() != docs.labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: docs.titles.len(),
                got: docs.labels.len(),
            });
        }
        Self::from_documents(docs)
    }
}

/// `term id -> count`, in term id order.
fn term_counts(vocab: &BTreeMap<String, u32>, tokens: &[String]) -> BTreeMap<u32, f64> {
    let mut tf = BTreeMap::new();
    for t in tokens {
        if let Some(&id) = vocab.get(&t.to_lowercase()) {
            *tf.entry(id).or_default() += 1.0;
        }
    }
    tf
}

/// Weighted and scaled to unit length; empty when every weight is zero.
fn unit_vector(tf: BTreeMap<u32, f64>, idf: &[f64]) -> Vec<(u32, f64)> {
    let weighted: Vec<(u32, f64)> = tf
        .into_iter()
        .map(|(id, c)| (id, c * idf[id as usize]))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    weighted.into_iter().map(|(id, w)| (id, w / norm)).collect()
}

impl TfIdfIndex {
    pub fn build(corpus: &[TaggedTitle]) -> Result<Self> {
        Self::from_documents(Documents {
            titles: corpus.iter().map(|t| t.title.tokens.clone()).collect(),
            labels: corpus.iter().map(TaggedTitle::value).collect(),
        })
    }

    fn from_documents(docs: Documents) -> Result<Self> {
        if docs.titles.is_empty() {
            return Err(Error::Empty("nearest-neighbor index"));
        }
        let mut vocab = BTreeMap::new();
        for title in &docs.titles {
            for t in title {
                vocab.entry(t.to_lowercase()).or_insert(0);
            }
        }
        for (id, slot) in vocab.values_mut().enumerate() {
            *slot = id as u32;
        }
        let mut df = vec![0usize; vocab.len()];
        let counts: Vec<BTreeMap<u32, f64>> = docs.titles.iter().map(|t| term_counts(&vocab, t)).collect();
        for tf in &counts {
            for &id in tf.keys() {
                df[id as usize] += 1;
            }
        }
        let n = docs.titles.len() as f64;
        let idf: Vec<f64> = df.iter().map(|&d| (n / d as f64).ln()).collect();
        let vectors: Vec<Vec<(u32, f64)>> = counts.into_iter().map(|tf| unit_vector(tf, &idf)).collect();
        let mut postings = vec![Vec::new(); vocab.len()];
        for (doc, v) in vectors.iter().enumerate() {
            for &(id, w) in v {
                postings[id as usize].push((doc as u32, w));
            }
        }
        Ok(TfIdfIndex {
            docs,
            vocab,
            idf,
            vectors,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.titles.is_empty()
    }

    pub fn label(&self, doc: usize) -> Option<&str> {
        self.docs.labels[doc].as_deref()
    }

    /// Unit vector of a query; words unseen in training are dropped.
    pub fn vectorize(&self, tokens: &[String]) -> Vec<(u32, f64)> {
        unit_vector(term_counts(&self.vocab, tokens), &self.idf)
    }

    pub fn stored_vector(&self, doc: usize) -> &[(u32, f64)] {
        &self.vectors[doc]
    }

    /// Cosine similarity to every training title.
    pub fn similarities(&self, tokens: &[String]) -> Vec<f64> {
        let mut sims = vec![0.0; self.len()];
        for (id, q) in self.vectorize(tokens) {
            for &(doc, w) in &self.postings[id as usize] {
                sims[doc as usize] += q * w;
            }
        }
        sims
    }

    /// The `k` most similar training titles, most similar first; equal
    /// similarities keep training order.
    pub fn nearest(&self, tokens: &[String], k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self.similarities(tokens).into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

/// Label by majority among the `k` nearest titles. Without a strict majority
/// winner, the label of the closest title among the tied labels wins, which
/// for three distinct labels is the nearest neighbor's.
pub fn knn_extract(title: &TokenizedTitle, index: &TfIdfIndex, k: usize) -> Result<Option<String>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if index.is_empty() {
        return Err(Error::Empty("nearest-neighbor index"));
    }
    let neighbors = index.nearest(&title.tokens, k);
    let mut votes: HashMap<Option<&str>, (usize, usize)> = HashMap::new();
    for (rank, &(doc, _)) in neighbors.iter().enumerate() {
        let e = votes.entry(index.label(doc)).or_insert((0, rank));
        e.0 += 1;
    }
    let winner = votes
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(label, _)| label.map(str::to_string))
        .expect("at least one neighbor");
    Ok(winner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use proptest::prelude::*;

    fn title(s: &str) -> TokenizedTitle {
        tokenize(s, &TokenizerConfig::default())
    }

    fn lexicon(values: &[&str]) -> Lexicon {
        let mut l = Lexicon::new();
        for v in values {
            l.insert(v, &TokenizerConfig::default());
        }
        l
    }

    fn tagged(s: &str, value: Option<(usize, usize)>) -> TaggedTitle {
        let t = title(s);
        let span = value.map(|(a, b)| AttributeSpan::new(&t, a, b).unwrap());
        TaggedTitle::from_span(t, span.as_ref(), Provenance::Manual).unwrap()
    }

    #[test]
    fn dict_examples() {
        let lex = lexicon(&["sea gull", "Sea Gull Lighting"]);
        let e = dict_extract(&title("Sea Gull Lighting Parkfield 3 light"), &lex, DictStrategy::Max);
        assert_eq!(e.value().as_deref(), Some("Sea Gull Lighting"));
        let e = dict_extract(&title("sea gull lighting parkfield 3 light"), &lex, DictStrategy::First);
        assert_eq!(e.value().as_deref(), Some("sea gull lighting"));

        let lex = lexicon(&["samsung", "straight talk"]);
        let t = title("straight talk samsung galaxy s3");
        assert_eq!(dict_extract(&t, &lex, DictStrategy::First).value().as_deref(), Some("straight talk"));
        assert_eq!(dict_extract(&t, &lex, DictStrategy::Max).value().as_deref(), Some("straight talk"));
        assert_eq!(dict_extract(&title("galaxy s3"), &lex, DictStrategy::Max), Extraction::NoValue);
    }

    #[test]
    fn dict_residual_ties() {
        let lex = lexicon(&["zeta", "alfa"]);
        let t = title("alfa zeta");
        assert_eq!(dict_extract(&t, &lex, DictStrategy::Max).value().as_deref(), Some("alfa"));
        let t = title("zeta alfa");
        assert_eq!(dict_extract(&t, &lex, DictStrategy::Max).value().as_deref(), Some("zeta"));
    }

    #[test]
    fn lexicon_from_file_and_corpus() {
        let lex = Lexicon::read("Sea Gull\n\nsea  gull\nACME\n".as_bytes(), &TokenizerConfig::default()).unwrap();
        assert_eq!(lex.iter().collect::<Vec<_>>(), ["acme", "sea gull"]);
        let lex = Lexicon::from_corpus(&[tagged("Acme Pro widget", Some((0, 1))), tagged("plain", None)]);
        assert_eq!(lex.iter().collect::<Vec<_>>(), ["acme pro"]);
    }

    fn knn_corpus() -> Vec<TaggedTitle> {
        vec![
            tagged("Acme red widget", Some((0, 0))),
            tagged("Acme blue widget", Some((0, 0))),
            tagged("Zed red lamp", Some((0, 0))),
            tagged("Bolt green lamp", Some((0, 0))),
            tagged("plain socks", None),
        ]
    }

    #[test]
    fn knn_self_match() {
        let corpus = knn_corpus();
        let index = TfIdfIndex::build(&corpus).unwrap();
        for (i, t) in corpus.iter().enumerate() {
            let near = index.nearest(&t.title.tokens, 1);
            assert_eq!(near[0].0, i);
            assert!((near[0].1 - 1.0).abs() < 1e-12);
            assert_eq!(knn_extract(&t.title, &index, 1).unwrap(), t.value());
        }
        for v in &index.vectors {
            let n: f64 = v.iter().map(|(_, w)| w * w).sum();
            assert!((n - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn knn_voting() {
        let index = TfIdfIndex::build(&knn_corpus()).unwrap();
        let q = title("Acme red");
        assert_eq!(knn_extract(&q, &index, 3).unwrap().as_deref(), Some("Acme"));
        let corpus = vec![
            tagged("Zed lamp", Some((0, 0))),
            tagged("Bolt lamp shade", Some((0, 0))),
            tagged("Kilo lamp shade base", Some((0, 0))),
            tagged("other", None),
        ];
        let index = TfIdfIndex::build(&corpus).unwrap();
        let q = title("Zed lamp");
        let near = index.nearest(&q.tokens, 3);
        assert_eq!(near.iter().map(|n| n.0).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(knn_extract(&q, &index, 3).unwrap(), knn_extract(&q, &index, 1).unwrap());
    }

    #[test]
    fn knn_ties_keep_training_order() {
        let corpus = vec![tagged("Acme cup", Some((0, 0))), tagged("Zed cup", Some((0, 0))), tagged("x", None)];
        let index = TfIdfIndex::build(&corpus).unwrap();
        assert_eq!(knn_extract(&title("cup"), &index, 1).unwrap().as_deref(), Some("Acme"));
        assert_eq!(knn_extract(&title("unseen words"), &index, 1).unwrap().as_deref(), Some("Acme"));
    }

    #[test]
    fn knn_errors() {
        assert!(TfIdfIndex::build(&[]).is_err());
        let index = TfIdfIndex::build(&knn_corpus()).unwrap();
        assert!(knn_extract(&title("x"), &index, 0).is_err());
    }

    #[test]
    fn index_serde_round_trip() {
        let index = TfIdfIndex::build(&knn_corpus()).unwrap();
        let json = serde_json::to_string(&index).unwrap();
        let back: TfIdfIndex = serde_json::from_str(&json).unwrap();
        assert_eq!(back, index);
    }

    #[test]
    fn singleton_label_unreachable_when_held_out() {
        let corpus = knn_corpus();
        let held = &corpus[2];
        let index = TfIdfIndex::build(&[&corpus[..2], &corpus[3..]].concat()).unwrap();
        for k in [1, 3] {
            assert_ne!(knn_extract(&held.title, &index, k).unwrap(), held.value());
        }
    }

    proptest! {
        #[test]
        fn max_is_never_shorter_than_first(words in proptest::collection::vec(0usize..6, 1..10)) {
            let vocab = ["sea", "gull", "lighting", "acme", "pro", "x"];
            let lex = lexicon(&["sea gull", "sea gull lighting", "gull lighting", "acme", "acme pro", "pro"]);
            let toks: Vec<&str> = words.iter().map(|&w| vocab[w]).collect();
            let t = TokenizedTitle::from_tokens(&toks);
            let (m, f) = (dict_extract(&t, &lex, DictStrategy::Max), dict_extract(&t, &lex, DictStrategy::First));
            if let (Some(m), Some(f)) = (m.value(), f.value()) {
                prop_assert!(m.chars().count() >= f.chars().count());
            }
            prop_assert_eq!(m.value().is_some(), f.value().is_some());
        }

        #[test]
        fn scaling_stored_vectors_keeps_neighbors(exp in -8i32..8, q in 0usize..5) {
            let scale = 2f64.powi(exp);
            let corpus = knn_corpus();
            let index = TfIdfIndex::build(&corpus).unwrap();
            let mut scaled = index.clone();
            for list in &mut scaled.postings {
                for p in list.iter_mut() {
                    p.1 *= scale;
                }
            }
            let query = &corpus[q].title;
            let a: Vec<usize> = index.nearest(&query.tokens, 3).into_iter().map(|n| n.0).collect();
            let b: Vec<usize> = scaled.nearest(&query.tokens, 3).into_iter().map(|n| n.0).collect();
            prop_assert_eq!(a, b);
        }
    }
}
