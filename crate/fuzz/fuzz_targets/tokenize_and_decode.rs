#![no_main]

use attrex::corpus::{decode_prediction, tokenize, Label, TokenizerConfig};
use attrex::decode::{viterbi_decode, LinearModel, ModelKind};
use attrex::corpus::LabelAlphabet;
use attrex::features::{FeatureConfig, FeatureIndex};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let title = tokenize(&text, &TokenizerConfig::default());
    for t in &title.tokens {
        assert!(!t.is_empty());
    }
    if title.is_empty() {
        return;
    }
    let labels: Vec<Label> = data.iter().take(title.len()).map(|b| Label::ALL[*b as usize % 3]).collect();
    if labels.len() == title.len() {
        let _ = decode_prediction(&title, &labels);
    }
    let index = FeatureIndex::from_names(["bias|O", "w0[0].is_uppercase|B", "trans=B>I"]);
    let mut model = LinearModel::zeros(index, LabelAlphabet::new("brand"), FeatureConfig::crf_set(), ModelKind::Crf);
    model.weights = vec![1.0, 2.0, 0.5];
    let (y, _) = viterbi_decode(&title, &model).unwrap();
    assert_eq!(y.len(), title.len());
});
