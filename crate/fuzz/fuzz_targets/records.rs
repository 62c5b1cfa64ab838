#![no_main]

use attrex::corpus::{read_records, read_tagged, Provenance, TokenizerConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_records(data, "fuzz.jsonl");
    if let Ok(tagged) = read_tagged(data, "fuzz.jsonl", &TokenizerConfig::default(), Provenance::Manual) {
        for (_, t) in tagged {
            assert_eq!(t.labels.len(), t.title.len());
        }
    }
});
