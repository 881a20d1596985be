//! Deterministic seed derivation.
//!
//! Per-token and per-stage RNG seeds are derived from a single base seed via
//! FNV-1a. The standard library hasher is not stable across releases, so a
//! fixed hash is spelled out here to keep sampled vectors reproducible
//! everywhere.

/// Domain tag for per-token OOV vector seeds.
pub const DOMAIN_OOV: u8 = 0;
/// Domain tag for the reserved UNK vector seed.
pub const DOMAIN_UNK: u8 = 1;
/// Domain tag for per-epoch shuffle streams.
pub const DOMAIN_SHUFFLE: u8 = 2;
/// Domain tag for the dropout mask stream of one training run.
pub const DOMAIN_DROPOUT: u8 = 3;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derives a seed from a base seed, a domain tag and a string key.
pub fn derive_seed(base: u64, domain: u8, key: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in std::iter::once(&domain).chain(base.to_le_bytes().iter()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    for &b in key.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derives a seed from a base seed, a domain tag and a numeric key.
pub fn derive_seed_n(base: u64, domain: u8, key: u64) -> u64 {
    let mut buf = [0u8; 16];
    buf[..8].copy_from_slice(&base.to_le_bytes());
    buf[8..].copy_from_slice(&key.to_le_bytes());
    let mut h = fnv1a(&buf);
    h ^= u64::from(domain);
    h = h.wrapping_mul(FNV_PRIME);
    h
}
