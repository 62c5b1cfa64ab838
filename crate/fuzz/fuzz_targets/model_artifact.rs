#![no_main]

use attrex::artifact::ModelArtifact;
use attrex::corpus::tokenize;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ModelArtifact::from_json(text) {
        let title = tokenize("Acme Nitrile Gloves by Zorb 12 ct", &model.tokenizer);
        let _ = model.extractor.extract(&title);
    }
});
