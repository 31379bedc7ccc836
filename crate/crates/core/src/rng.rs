//! Seeded random streams.
//!
//! Every random choice in the simulator goes through a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`) seeded with `seed_from_u64`. Uniform reals
//! and bounded integers are derived here from raw `next_u64` output rather
//! than through `rand`'s distribution layer, so the exact draw sequence is
//! pinned by this file:
//!
//! * `unit_f64`: the top 53 bits of one `next_u64`, scaled to `[0, 1)`.
//! * `uniform_below(n)`: rejection sampling on `next_u64` against the largest
//!   multiple of `n` below `2^64`, then `value % n`.
//! * `shuffle`: Fisher–Yates from the last index down, using `uniform_below`.
//!
//! Sub-seeds are derived from one master seed with SHA-256 over the
//! little-endian seed bytes followed by the UTF-8 tag; the first eight digest
//! bytes, read little-endian, form the derived seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform real in `[0, 1)` with 53 bits of resolution.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n`. Panics if `n == 0`.
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "uniform_below: empty range");
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_below(rng, i + 1);
        items.swap(i, j);
    }
}

pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Hex-encoded SHA-256 of arbitrary bytes.
pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
