#![no_main]

use libfuzzer_sys::fuzz_target;
use ncity_core::catalog::{decode_embeddings, encode_embeddings, peek_dim};

fuzz_target!(|data: &[u8]| {
    let Ok(dim) = peek_dim(data) else { return };
    if let Ok(map) = decode_embeddings(data, dim) {
        // anything accepted must survive a round trip
        let bytes = encode_embeddings(&map, dim).expect("re-encode");
        assert_eq!(decode_embeddings(&bytes, dim).expect("re-decode"), map);
    }
});
