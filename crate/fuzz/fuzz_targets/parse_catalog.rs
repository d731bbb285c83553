#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::catalog::{parse_catalog, write_catalog};

fuzz_target!(|data: &[u8]| {
    if let Ok(cat) = parse_catalog(data) {
        let mut out = Vec::new();
        write_catalog(&cat, &mut out).expect("write accepted catalog");
        let again = parse_catalog(out.as_slice()).expect("reparse written catalog");
        assert_eq!(again.records.len(), cat.records.len());
    }
});
