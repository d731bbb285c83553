#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::panorama::parse_metadata;

fuzz_target!(|data: &[u8]| {
    let _ = parse_metadata(data);
});
