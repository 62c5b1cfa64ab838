#![no_main]

use attrex::normalize::NormalizationTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = NormalizationTable::read(data, "fuzz.tsv") {
        let mut out = Vec::new();
        table.write(&mut out).unwrap();
        assert_eq!(NormalizationTable::read(out.as_slice(), "again.tsv").unwrap(), table);
    }
});
