#![no_main]

use attrex::features::FeatureConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = FeatureConfig::parse(text, "fuzz.cfg") {
        assert_eq!(FeatureConfig::parse(&cfg.to_text(), "again.cfg").unwrap(), cfg);
    }
});
