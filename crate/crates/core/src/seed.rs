//! One root seed, fanned out per stage by hashing the stage name.

use sha2::{Digest, Sha256};

/// First 8 bytes (LE) of SHA-256 over the given parts, each length-prefixed.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn derive_seed(root: u64, stage: &str) -> u64 {
    stable_hash(&[&root.to_le_bytes(), stage.as_bytes()])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
