#![no_main]

use attrex::corpus::TokenizerConfig;
use attrex::normalize::{apply_review_decision, read_decisions, FeedbackState};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(decisions) = read_decisions(data, "fuzz.jsonl") {
        let mut state = FeedbackState::default();
        for d in &decisions {
            let _ = apply_review_decision(d, &mut state, &TokenizerConfig::default());
        }
    }
});
