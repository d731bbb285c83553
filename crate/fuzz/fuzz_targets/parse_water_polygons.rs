#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::geo::GeoCoordinate;
use ncity_core::panorama::{parse_water_polygons, TerrainClassifier};

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = parse_water_polygons(data) {
        for lat in [-90.0, 0.0, 60.17, 90.0] {
            let _ = c.classify(GeoCoordinate { lat, lon: 24.94 });
        }
    }
});
