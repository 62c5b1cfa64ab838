//! Distant supervision: tag catalog titles by locating the listed value.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeSpan, CorpusRecord, Provenance, TaggedTitle, TokenizedTitle, TokenizerConfig};
use crate::error::{Error, Result};
use crate::normalize::key_form;

/// One catalog listing for a single attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub title: String,
    #[serde(rename = "attribute")]
    pub attribute_name: String,
    #[serde(default)]
    pub value: Option<String>,
}

impl From<&CorpusRecord> for CatalogRecord {
    fn from(r: &CorpusRecord) -> Self {
        CatalogRecord {
            title: r.title.clone(),
            attribute_name: r.attribute.clone(),
            value: r.value.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionConfig {
    pub per_value_cap: usize,
    pub unbranded_sample_size: usize,
    pub rng_seed: u64,
}

impl Default for SupervisionConfig {
    fn default() -> Self {
        SupervisionConfig {
            per_value_cap: 3,
            unbranded_sample_size: 0,
            rng_seed: 0,
        }
    }
}

fn compact(s: &str) -> String {
    key_form(s).replace(' ', "")
}

/// Leftmost token span whose text equals `value` ignoring case, whitespace
/// and the characters `- ' & . ,`. Spans never start or end on a token that
/// consists only of those characters.
pub fn match_value_in_title(title: &TokenizedTitle, value: &str) -> Option<AttributeSpan> {
    let target = compact(value);
    if target.is_empty() {
        return None;
    }
    let keys: Vec<String> = title.tokens.iter().map(|t| compact(t)).collect();
    for start in 0..keys.len() {
        if keys[start].is_empty() || !target.starts_with(&keys[start]) {
            continue;
        }
        let mut acc = String::new();
        for end in start..keys.len() {
            acc.push_str(&keys[end]);
            if !target.starts_with(&acc) {
                break;
            }
            if acc.len() == target.len() && !keys[end].is_empty() {
                return AttributeSpan::new(title, start, end).ok();
            }
        }
    }
    None
}

/// Tagged training titles with the index of the catalog record each came
/// from, in catalog order.
pub fn select_training_records(
    catalog: &[CatalogRecord],
    config: &SupervisionConfig,
    tokenizer: &TokenizerConfig,
) -> Result<Vec<(usize, TaggedTitle)>> {
    let Some(first) = catalog.first() else {
        return Err(Error::Empty("catalog"));
    };
    if config.per_value_cap == 0 {
        return Err(Error::InvalidConfig("per-value cap must be at least 1".into()));
    }
    if let Some(other) = catalog.iter().find(|r| r.attribute_name != first.attribute_name) {
        return Err(Error::MixedAttributes(first.attribute_name.clone(), other.attribute_name.clone()));
    }

    let mut groups: Vec<Vec<(usize, TaggedTitle)>> = Vec::new();
    let mut group_of: HashMap<String, usize> = HashMap::new();
    let mut unbranded = Vec::new();
    for (i, r) in catalog.iter().enumerate() {
        let title = crate::corpus::tokenize(&r.title, tokenizer);
        if title.is_empty() {
            continue;
        }
        match r.value.as_deref().filter(|v| !v.trim().is_empty()) {
            None => unbranded.push((i, TaggedTitle::from_span(title, None, Provenance::DistantSupervision)?)),
            Some(v) => {
                let Some(span) = match_value_in_title(&title, v) else {
                    continue;
                };
                let tagged = TaggedTitle::from_span(title, Some(&span), Provenance::DistantSupervision)?;
                let g = *group_of.entry(key_form(v)).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push((i, tagged));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut chosen = Vec::new();
    for g in groups {
        chosen.extend(sample_up_to(g, config.per_value_cap, &mut rng));
    }
    chosen.extend(sample_up_to(unbranded, config.unbranded_sample_size, &mut rng));
    chosen.sort_by_key(|(i, _)| *i);
    Ok(chosen)
}

fn sample_up_to<T>(items: Vec<T>, n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if items.len() <= n {
        return items;
    }
    let mut picks = sample(rng, items.len(), n).into_vec();
    picks.sort_unstable();
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    picks.into_iter().filter_map(|j| slots[j].take()).collect()
}

pub fn build_training_set(
    catalog: &[CatalogRecord],
    config: &SupervisionConfig,
    tokenizer: &TokenizerConfig,
) -> Result<Vec<TaggedTitle>> {
    Ok(select_training_records(catalog, config, tokenizer)?
        .into_iter()
        .map(|(_, t)| t)
        .collect())
}

/// Number of distinct values (by key form) occurring exactly `n` times, per `n`.
pub fn label_frequency_histogram(corpus: &[TaggedTitle]) -> BTreeMap<usize, usize> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in corpus {
        if let Some(v) = t.value() {
            *counts.entry(key_form(&v)).or_default() += 1;
        }
    }
    let mut hist = BTreeMap::new();
    for c in counts.into_values() {
        *hist.entry(c).or_default() += 1;
    }
    hist
}

/// Share of distinct values occurring at most `n` times. `None` when there
/// are no values.
pub fn fraction_at_most(histogram: &BTreeMap<usize, usize>, n: usize) -> Option<f64> {
    let total: usize = histogram.values().sum();
    (total > 0).then(|| histogram.range(..=n).map(|(_, c)| c).sum::<usize>() as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{decode_prediction, encode_bio, tokenize, Label};
    use proptest::prelude::*;

    fn title(s: &str) -> TokenizedTitle {
        tokenize(s, &TokenizerConfig::default())
    }

    fn record(t: &str, v: Option<&str>) -> CatalogRecord {
        CatalogRecord {
            title: t.into(),
            attribute_name: "brand".into(),
            value: v.map(str::to_string),
        }
    }

    #[test]
    fn matching_examples() {
        let t = title("Kimberly-Clark Nitrile Xtra Exam Medium Gloves in Purple");
        let s = match_value_in_title(&t, "Kimberly-Clark").unwrap();
        assert_eq!((s.start_token, s.end_token), (0, 0));
        let t = title("Barnett Single Friction Plate Fits 76-79 Yamaha RD400");
        assert!(match_value_in_title(&t, "Barnett Crossbows").is_none());
        let t = title("chenillekraft brush set");
        assert_eq!(match_value_in_title(&t, "ChenilleKraft").unwrap().start_token, 0);
    }

    #[test]
    fn special_characters_and_spacing() {
        let t = title("J & C Pet Supply dog bowl");
        let s = match_value_in_title(&t, "J&C").unwrap();
        assert_eq!((s.start_token, s.end_token), (0, 2));
        let t = title("JC leash by J & C");
        assert_eq!(match_value_in_title(&t, "J&C").unwrap().start_token, 0);
        let t = title("Levis 501 jeans");
        assert_eq!(match_value_in_title(&t, "Levi's").unwrap().surface, ["Levis"]);
        let t = title("gift from Acme & Co. store");
        let s = match_value_in_title(&t, "acme & co").unwrap();
        assert_eq!(s.text(), "Acme & Co.");
    }

    #[test]
    fn partial_tokens_do_not_match() {
        assert!(match_value_in_title(&title("Acmeware cup"), "Acme").is_none());
        assert!(match_value_in_title(&title("cup"), "-").is_none());
    }

    #[test]
    fn leftmost_match_wins() {
        let s = match_value_in_title(&title("Acme mug with Acme logo"), "acme").unwrap();
        assert_eq!(s.start_token, 0);
    }

    #[test]
    fn cap_and_unbranded() {
        let mut catalog: Vec<_> = (0..10).map(|i| record(&format!("Acme widget {i}"), Some("Acme"))).collect();
        catalog.push(record("Zed lamp", Some("Zed")));
        catalog.push(record("Zed lamp two", Some("ZED")));
        catalog.push(record("Barnett plate", Some("Barnett Crossbows")));
        catalog.push(record("plain socks", None));
        let cfg = SupervisionConfig {
            unbranded_sample_size: 5,
            ..Default::default()
        };
        let out = build_training_set(&catalog, &cfg, &TokenizerConfig::default()).unwrap();
        let acme = out.iter().filter(|t| t.value().as_deref() == Some("Acme")).count();
        let zed = out.iter().filter(|t| t.value().is_some_and(|v| v.eq_ignore_ascii_case("zed"))).count();
        assert_eq!((acme, zed), (3, 2));
        let plain: Vec<_> = out.iter().filter(|t| t.value().is_none()).collect();
        assert_eq!(plain.len(), 1);
        assert!(plain[0].labels.iter().all(|&l| l == Label::O));
        assert_eq!(out.len(), 6);
        assert_eq!(out, build_training_set(&catalog, &cfg, &TokenizerConfig::default()).unwrap());
    }

    #[test]
    fn errors() {
        let t = TokenizerConfig::default();
        assert!(matches!(build_training_set(&[], &SupervisionConfig::default(), &t), Err(Error::Empty(_))));
        let mixed = [record("a", None), CatalogRecord { attribute_name: "color".into(), ..record("b", None) }];
        assert!(matches!(
            build_training_set(&mixed, &SupervisionConfig::default(), &t),
            Err(Error::MixedAttributes(..))
        ));
    }

    #[test]
    fn histogram() {
        let t = TokenizerConfig::default();
        let catalog = [record("A x", Some("A")), record("a y", Some("A")), record("B z", Some("B"))];
        let corpus = build_training_set(&catalog, &SupervisionConfig::default(), &t).unwrap();
        let h = label_frequency_histogram(&corpus);
        assert_eq!(h, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(fraction_at_most(&h, 1), Some(0.5));
        assert_eq!(fraction_at_most(&BTreeMap::new(), 3), None);
    }

    proptest! {
        #[test]
        fn emitted_titles_round_trip(
            values in proptest::collection::vec(0usize..5, 1..60),
            cap in 1usize..4,
            seed in any::<u64>(),
        ) {
            let names = ["Acme", "J & C", "Levi's", "Zed Co", "Kimberly-Clark"];
            let catalog: Vec<_> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| record(&format!("item {i} {} thing", names[v]), Some(names[v])))
                .collect();
            let cfg = SupervisionConfig { per_value_cap: cap, unbranded_sample_size: 0, rng_seed: seed };
            let out = build_training_set(&catalog, &cfg, &TokenizerConfig::default()).unwrap();
            let h = label_frequency_histogram(&out);
            prop_assert!(h.keys().all(|&k| k <= cap));
            for t in &out {
                let span = t.extraction().span().cloned();
                prop_assert_eq!(&encode_bio(&t.title, span.as_ref()).unwrap(), &t.labels);
                let v = decode_prediction(&t.title, &t.labels).unwrap().value().unwrap();
                prop_assert!(names.iter().any(|n| compact(n) == compact(&v)));
            }
            prop_assert_eq!(out, build_training_set(&catalog, &cfg, &TokenizerConfig::default()).unwrap());
        }
    }
}
