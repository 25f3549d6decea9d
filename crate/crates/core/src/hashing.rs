//! Platform-independent hashing and pseudorandom vector generation.
//!
//! Both are pinned at the bit level so that OOV vectors computed on one
//! machine can be reproduced exactly on another:
//!
//! * `hash32` is xxHash32 with seed 0.
//! * `SplitMix64` is the standard splitmix64 generator; a 32-bit hash seeds
//!   it after zero-extension.
//! * Each generated value is `2 · (next >> 11) / 2^53 − 1`, so it lies in
//!   `[−1, 1)` and is exactly representable in `f64`.

pub fn hash32(bytes: &[u8]) -> u32 {
    xxhash_rust::xxh32::xxh32(bytes, 0)
}

/// Section checksums.
pub(crate) fn checksum64(bytes: &[u8]) -> u64 {
    xxhash_rust::xxh64::xxh64(bytes, 0)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[−1, 1)`.
    #[inline]
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }

    /// Uniform integer in `0..n` (`n > 0`), via Lemire's multiply-shift.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Pseudorandom vector of `d` values in `[−1, 1)` fully determined by `seed`.
pub fn prvg(seed: u32, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d);
    prvg_into(seed, &mut out, d);
    out
}

pub(crate) fn prvg_into(seed: u32, out: &mut Vec<f64>, d: usize) {
    let mut rng = SplitMix64::new(seed as u64);
    out.clear();
    out.extend((0..d).map(|_| rng.next_signed()));
}

/// Adds `prvg(seed, acc.len())` into `acc` without allocating.
pub(crate) fn prvg_accumulate(seed: u32, acc: &mut [f64]) {
    let mut rng = SplitMix64::new(seed as u64);
    for a in acc.iter_mut() {
        *a += rng.next_signed();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xxh32_published_vectors() {
        assert_eq!(hash32(b""), 0x02CC_5D05);
        assert_eq!(hash32(b"a"), 0x550D_7456);
        assert_eq!(hash32(b"abc"), 0x32D1_53FF);
        assert_eq!(
            hash32(b"Nobody inspects the spammish repetition"),
            0xE229_3B2F
        );
    }

    #[test]
    fn splitmix_reference_sequence() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
        let mut r = SplitMix64::new(1_234_567);
        assert_eq!(r.next_u64(), 0x599E_D017_FB08_FC85);
    }

    #[test]
    fn prvg_deterministic() {
        assert_eq!(prvg(42, 300), prvg(42, 300));
        assert_ne!(prvg(42, 8), prvg(43, 8));
        // A shorter vector is a prefix of a longer one.
        assert_eq!(prvg(7, 5)[..], prvg(7, 10)[..5]);
    }

    #[test]
    fn prvg_range_and_mean() {
        let mut sum = 0.0;
        let n = 1_000_000usize;
        let mut count = 0;
        for seed in 0..1000u32 {
            for v in prvg(seed.wrapping_mul(2_654_435_761), n / 1000) {
                assert!((-1.0..1.0).contains(&v));
                sum += v;
                count += 1;
            }
        }
        assert_eq!(count, n);
        let mean = sum / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = SplitMix64::new(9);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[r.below(7)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
