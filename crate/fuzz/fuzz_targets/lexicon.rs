#![no_main]

use attrex::baselines::{dict_extract, DictStrategy, Lexicon};
use attrex::corpus::{tokenize, TokenizerConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let tok = TokenizerConfig::default();
    if let Ok(lex) = Lexicon::read(data, &tok) {
        let text = String::from_utf8_lossy(data);
        let title = tokenize(&text, &tok);
        for s in [DictStrategy::Max, DictStrategy::First] {
            let _ = dict_extract(&title, &lex, s);
        }
    }
});
