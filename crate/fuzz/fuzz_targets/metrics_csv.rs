#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::metrics::{read_pairs_csv, read_summary_csv};

fuzz_target!(|data: &[u8]| {
    let _ = read_pairs_csv(data);
    let _ = read_summary_csv(data);
});
