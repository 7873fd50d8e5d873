//! FNV-1a hashing, used for two unrelated jobs that both need a stable,
//! dependency-free 64-bit hash: sample fingerprints in file headers and
//! derivation of named RNG substreams from one user-facing seed.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// 64-bit FNV-1a over a byte string.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash of an observation sample: FNV-1a over the newline-joined,
/// lexicographically sorted observation ids.
pub fn sample_hash<'a>(sorted_ids: impl Iterator<Item = &'a str>) -> u64 {
    let mut h = FNV_OFFSET;
    let mut first = true;
    for id in sorted_ids {
        if !first {
            h ^= u64::from(b'\n');
            h = h.wrapping_mul(FNV_PRIME);
        }
        first = false;
        for &b in id.as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Derives a child seed from a base seed and a stream label, e.g.
/// `derive_seed(seed, "attack")`. Streams with different labels are
/// independent of each other and of evaluation order.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + label.len());
    bytes.extend_from_slice(&base.to_le_bytes());
    bytes.extend_from_slice(label.as_bytes());
    fnv1a_64(&bytes)
}

/// Child seed additionally keyed by an index, for per-item streams such as
/// one detector draw per observation or one resample per `(n, rep)` pair.
pub fn derive_indexed_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut bytes = Vec::with_capacity(16 + label.len());
    bytes.extend_from_slice(&base.to_le_bytes());
    bytes.extend_from_slice(label.as_bytes());
    bytes.extend_from_slice(&index.to_le_bytes());
    fnv1a_64(&bytes)
}
