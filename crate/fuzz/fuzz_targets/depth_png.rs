#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::stylize::DepthMap;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = DepthMap::from_png(data) {
        assert_eq!(DepthMap::from_png(&d.to_png()).expect("round trip"), d);
    }
});
