//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha20 keystream (RFC 8439 block function, 20 rounds,
//! 64-bit block counter starting at 0, nonce 0) keyed by a 32-byte key:
//!
//! * root key: `SHA-256("fiesta/root" || seed.to_le_bytes())`
//! * child key: `SHA-256(parent_key || 0x00 || label_utf8)`
//!
//! Forking depends only on the parent's key, never on how many values the
//! parent has already produced. Uniform doubles take the top 53 bits of the
//! next little-endian `u64` word: `(w >> 11) * 2^-53`, giving `[0, 1)`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

const ROOT_DOMAIN: &[u8] = b"fiesta/root";

#[derive(Clone)]
pub struct RngStream {
    key: [u8; 32],
    rng: ChaCha20Rng,
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream").field("key", &hex_prefix(&self.key)).finish()
    }
}

fn hex_prefix(key: &[u8; 32]) -> String {
    key[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(ROOT_DOMAIN);
        hasher.update(seed.to_le_bytes());
        Self::from_key(hasher.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        RngStream { key, rng: ChaCha20Rng::from_seed(key) }
    }

    /// Derives an independent child stream.
    ///
    /// Panics if `label` is empty.
    pub fn fork(&self, label: &str) -> RngStream {
        assert!(!label.is_empty(), "rng fork label must be nonempty");
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update([0u8]);
        hasher.update(label.as_bytes());
        Self::from_key(hasher.finalize().into())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Normal draw truncated to `mean ± bound * sd` by rejection.
    ///
    /// Each attempt consumes two uniforms `u1, u2` and uses the Box-Muller
    /// cosine branch `z = sqrt(-2 ln(1 - u1)) cos(2 pi u2)`.
    pub fn truncated_normal(&mut self, mean: f64, sd: f64, bound: f64) -> f64 {
        loop {
            let u1 = self.uniform();
            let u2 = self.uniform();
            let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            if z.abs() <= bound {
                return mean + sd * z;
            }
        }
    }
}
