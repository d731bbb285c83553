#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::config::parse_key_values;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_key_values(text);
    }
});
