#![no_main]

use attrex::normalize::Blacklist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(list) = Blacklist::read(data, "fuzz.txt") {
        for term in list.iter() {
            assert!(list.contains(term));
        }
    }
});
