#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::feed::parse_snapshot;

fuzz_target!(|data: &[u8]| {
    let _ = parse_snapshot(data);
});
