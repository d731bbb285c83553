#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::panorama::parse_mock_manifest;

fuzz_target!(|data: &[u8]| {
    let _ = parse_mock_manifest(data);
});
