use attrex::artifact::ModelArtifact;
use attrex::baselines::{knn_extract, TfIdfIndex};
use attrex::corpus::{decode_prediction, encode_bio, AttributeSpan, Label, LabelAlphabet, TokenizedTitle, TokenizerConfig};
use attrex::features::{build_feature_index, FeatureConfig, TitleFeatures};
use attrex::normalize::{batch_postprocess, key_form, Blacklist, FeedbackConfig, Normalizer, Prediction};
use attrex::pipeline::{Extractor, ModelSpec};
use attrex::synth::{generate_catalog, GeneratorConfig, TitleCount};
use proptest::prelude::*;

fn small_catalog(seed: u64, values: usize) -> attrex::synth::SyntheticCatalog {
    generate_catalog(&GeneratorConfig {
        num_values: values,
        rng_seed: seed,
        abbreviation_rate: 0.3,
        special_char_rate: 0.3,
        ..Default::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_spans_decode_to_variants(seed in 0u64..1000) {
        let cat = small_catalog(seed, 30);
        for (t, canonical) in cat.titles.iter().zip(&cat.canonical) {
            let span = t.extraction();
            let relabeled = encode_bio(&t.title, span.span()).unwrap();
            prop_assert_eq!(&relabeled, &t.labels);
            match (t.value(), canonical) {
                (Some(v), Some(c)) => prop_assert_eq!(cat.table.get(&v), Some(c.as_str())),
                (None, None) => {}
                (v, c) => prop_assert!(false, "value {:?} with canonical {:?}", v, c),
            }
        }
    }

    #[test]
    fn spans_round_trip_without_outside_tokens(n in 1usize..12, a in 0usize..12, b in 0usize..12) {
        let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let title = TokenizedTitle::from_tokens(&tokens);
        let (s, e) = (a.min(b) % n, a.max(b) % n);
        let (s, e) = (s.min(e), s.max(e));
        let span = AttributeSpan::new(&title, s, e).unwrap();
        let labels = encode_bio(&title, Some(&span)).unwrap();
        let back = decode_prediction(&title, &labels).unwrap();
        prop_assert_eq!(back.span(), Some(&span));
        prop_assert!(labels[s..=e].iter().all(|&l| l != Label::O));
    }

    #[test]
    fn accepted_values_are_canonical(picks in proptest::collection::vec(0usize..8, 1..120), seed in 0u64..50) {
        let cat = small_catalog(seed, 8);
        let norm = Normalizer::new(cat.table.clone(), Blacklist::new()).unwrap();
        let variants: Vec<&str> = cat.table.iter().map(|(k, _)| k).collect();
        let preds: Vec<Prediction> = picks
            .iter()
            .enumerate()
            .map(|(i, &p)| Prediction {
                item_id: i.to_string(),
                title: String::new(),
                value: variants.get(p % (variants.len() + 2)).map(|v| v.to_string()),
            })
            .collect();
        let r = batch_postprocess(&preds, &norm, &FeedbackConfig::default());
        for (_, c) in &r.accepted {
            prop_assert!(cat.table.is_canonical(c), "{} is not canonical", c);
        }
    }
}

#[test]
fn frozen_index_ignores_unseen_tokens() {
    let cat = small_catalog(3, 20);
    let cfg = FeatureConfig::default();
    let index = build_feature_index(&cat.titles, &cfg).unwrap();
    let before = index.clone();
    let x = TokenizedTitle::from_tokens(&["Qwxyzzy", "never-seen", "9000", "ZZZ"]);
    let f = TitleFeatures::compile(&x, &cfg, &index);
    assert!(f.observations.iter().flatten().flatten().all(|&id| (id as usize) < index.len()));
    assert_eq!(index, before);
}

#[test]
fn three_nn_cannot_recover_a_held_out_singleton() {
    let cat = generate_catalog(&GeneratorConfig {
        num_values: 60,
        titles_per_value: TitleCount::Geometric { mean: 2.0 },
        rng_seed: 4,
        ..Default::default()
    })
    .unwrap();
    let mut checked = 0;
    for (i, t) in cat.titles.iter().enumerate() {
        let Some(v) = t.value() else { continue };
        let key = key_form(&v);
        if cat.titles.iter().filter(|o| o.value().map(|w| key_form(&w)) == Some(key.clone())).count() != 1 {
            continue;
        }
        let rest: Vec<_> = cat.titles.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t.clone()).collect();
        let index = TfIdfIndex::build(&rest).unwrap();
        let got = knn_extract(&t.title, &index, 3).unwrap();
        assert_ne!(got.map(|g| key_form(&g)), Some(key));
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn every_family_survives_a_file_round_trip() {
    let cat = small_catalog(5, 25);
    let alphabet = LabelAlphabet::new("brand");
    let dir = tempfile::tempdir().unwrap();
    for name in ModelSpec::NAMES {
        let spec = ModelSpec::parse(name, 5).unwrap();
        let model = Extractor::train(&spec, &cat.titles, None, &alphabet).unwrap();
        let art = ModelArtifact::new(&alphabet, TokenizerConfig::default(), model);
        let path = dir.path().join(format!("{name}.json"));
        attrex::artifact::save_model(&art, &path).unwrap();
        let back = attrex::artifact::load_model(&path).unwrap();
        assert_eq!(back, art, "{name}");
        assert_eq!(back.to_json().unwrap(), std::fs::read_to_string(&path).unwrap());
        for t in cat.titles.iter().take(30) {
            assert_eq!(back.extractor.extract(&t.title).unwrap(), art.extractor.extract(&t.title).unwrap());
        }
    }
}
