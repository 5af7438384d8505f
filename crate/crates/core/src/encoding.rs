//! Min-Hash encoding of string features over character n-grams.
//!
//! Each output component is the minimum, over the string's shingle set, of one
//! member of a seeded universal hash family, scaled to `[0, 1]`. Two strings
//! agree on a component with probability equal to the Jaccard similarity of
//! their shingle sets. The encoder needs no training data.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Mersenne prime 2^61 - 1; modulus of the hash family.
const PRIME: u64 = (1 << 61) - 1;
const MAX_HASH: f64 = (PRIME - 1) as f64;

pub const DEFAULT_COMPONENTS: usize = 128;
pub const DEFAULT_NGRAM: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashEncoder {
    seed: u64,
    n_components: usize,
    ngram_size: usize,
    /// `(multiplier, offset)` per component; multipliers are odd and non-zero mod p.
    hash_params: Vec<(u64, u64)>,
}

impl MinHashEncoder {
    pub fn new(seed: u64, n_components: usize, ngram_size: usize) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::param("min-hash needs at least one component"));
        }
        if ngram_size == 0 {
            return Err(Error::param("n-gram size must be at least 1"));
        }
        let mut rng = rng::stream(seed, 0);
        let hash_params = (0..n_components)
            .map(|_| {
                let a = (rng.random::<u64>() % (PRIME - 2) + 1) | 1;
                let b = rng.random::<u64>() % PRIME;
                (a, b)
            })
            .collect();
        Ok(MinHashEncoder {
            seed,
            n_components,
            ngram_size,
            hash_params,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn ngram_size(&self) -> usize {
        self.ngram_size
    }

    /// Checks a deserialised encoder against what its seed would generate.
    pub fn verify(&self) -> Result<()> {
        let fresh = MinHashEncoder::new(self.seed, self.n_components, self.ngram_size)?;
        if fresh.hash_params != self.hash_params {
            return Err(Error::CorruptModel(
                "min-hash parameters do not match their seed".into(),
            ));
        }
        Ok(())
    }

    pub fn encode(&self, s: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.n_components];
        self.encode_into(Some(s), &mut out);
        out
    }

    /// Writes the encoding of `s` into `out`; `None` or a blank string yields
    /// the all-ones sentinel.
    pub fn encode_into(&self, s: Option<&str>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_components);
        let fps: Vec<u64> = match s {
            Some(s) if !s.trim().is_empty() => shingle(s, self.ngram_size)
                .iter()
                .map(|g| fingerprint(g) % PRIME)
                .collect(),
            _ => {
                out.fill(1.0);
                return;
            }
        };
        for (o, &(a, b)) in out.iter_mut().zip(&self.hash_params) {
            let min = fps
                .iter()
                .map(|&x| universal_hash(a, b, x))
                .min()
                .expect("shingle set is never empty");
            *o = min as f64 / MAX_HASH;
        }
    }
}

pub fn fit_minhash(seed: u64, n_components: usize, ngram_size: usize) -> Result<MinHashEncoder> {
    MinHashEncoder::new(seed, n_components, ngram_size)
}

pub fn encode_string(enc: &MinHashEncoder, s: &str) -> Vec<f64> {
    enc.encode(s)
}

#[inline]
fn universal_hash(a: u64, b: u64, x: u64) -> u64 {
    ((u128::from(a) * u128::from(x) + u128::from(b)) % u128::from(PRIME)) as u64
}

/// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn fingerprint(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in s.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercase and collapse runs of whitespace to single spaces.
pub fn normalise(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Contiguous character n-grams of the normalised string. Strings shorter than
/// `ngram_size` give a single shingle, right-padded with spaces.
pub fn shingle(s: &str, ngram_size: usize) -> BTreeSet<String> {
    let n = ngram_size.max(1);
    let chars: Vec<char> = normalise(s).chars().collect();
    if chars.len() < n {
        let mut padded: String = chars.iter().collect();
        padded.extend(std::iter::repeat_n(' ', n - chars.len()));
        return BTreeSet::from([padded]);
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Fraction of components on which two encodings agree.
pub fn estimate_jaccard(va: &[f64], vb: &[f64]) -> Result<f64> {
    if va.len() != vb.len() {
        return Err(Error::shape(format!(
            "min-hash vectors of length {} and {}",
            va.len(),
            vb.len()
        )));
    }
    if va.is_empty() {
        return Ok(1.0);
    }
    let same = va.iter().zip(vb).filter(|(a, b)| a == b).count();
    Ok(same as f64 / va.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shingle_examples() {
        assert_eq!(shingle("abc", 3), BTreeSet::from(["abc".to_string()]));
        assert_eq!(
            shingle("abcd", 3),
            BTreeSet::from(["abc".to_string(), "bcd".to_string()])
        );
        assert_eq!(shingle("ab", 3), BTreeSet::from(["ab ".to_string()]));
        assert_eq!(shingle("  AB   Cd ", 3), shingle("ab cd", 3));
    }

    #[test]
    fn same_seed_same_vectors() {
        let a = fit_minhash(5, 64, 3).unwrap();
        let b = fit_minhash(5, 64, 3).unwrap();
        for s in ["boots", "Red Leather Boots", "x", ""] {
            assert_eq!(a.encode(s), b.encode(s));
        }
    }

    #[test]
    fn different_seeds_differ_on_boots() {
        let a = fit_minhash(1, 128, 3).unwrap();
        let b = fit_minhash(2, 128, 3).unwrap();
        assert_ne!(a.encode("boots"), b.encode("boots"));
    }

    #[test]
    fn output_width() {
        let e = fit_minhash(0, 128, 3).unwrap();
        assert_eq!(e.encode("sandals").len(), 128);
        assert!(e.encode("sandals").iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn empty_and_missing_give_sentinel() {
        let e = fit_minhash(0, 16, 3).unwrap();
        assert_eq!(e.encode(""), vec![1.0; 16]);
        assert_eq!(e.encode("   "), vec![1.0; 16]);
        let mut out = vec![0.0; 16];
        e.encode_into(None, &mut out);
        assert_eq!(out, vec![1.0; 16]);
    }

    #[test]
    fn whitespace_variants_collide() {
        let e = fit_minhash(9, 128, 3).unwrap();
        assert_eq!(shingle("ab cd", 3), shingle("ab  cd", 3));
        assert_eq!(e.encode("ab cd"), e.encode("ab  cd"));
        assert_eq!(e.encode("AB cd"), e.encode("ab cd"));
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(fit_minhash(0, 0, 3).is_err());
        assert!(fit_minhash(0, 8, 0).is_err());
    }

    #[test]
    fn jaccard_estimates() {
        let e = fit_minhash(3, 128, 3).unwrap();
        let v = e.encode("leather boots");
        assert_eq!(estimate_jaccard(&v, &v).unwrap(), 1.0);
        // no 3-gram in common
        let (a, b) = ("abcdefgh", "uvwxyz12");
        assert!(shingle(a, 3).is_disjoint(&shingle(b, 3)));
        assert!(estimate_jaccard(&e.encode(a), &e.encode(b)).unwrap() < 0.1);
        assert!(estimate_jaccard(&[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn verify_detects_tampering() {
        let mut e = fit_minhash(3, 8, 3).unwrap();
        e.verify().unwrap();
        e.hash_params[2].1 ^= 1;
        assert!(e.verify().is_err());
    }

    proptest! {
        #[test]
        fn shingle_count_bound(s in "[a-z ]{0,40}") {
            let n = normalise(&s).chars().count();
            prop_assert!(shingle(&s, 3).len() <= n.saturating_sub(2).max(1));
        }

        #[test]
        fn equal_shingle_sets_encode_equally(s in "[a-c]{1,12}", t in "[a-c]{1,12}") {
            let e = fit_minhash(17, 32, 3).unwrap();
            if shingle(&s, 3) == shingle(&t, 3) {
                prop_assert_eq!(e.encode(&s), e.encode(&t));
            }
        }
    }
}
