//! Cryptographic building blocks: symmetric encryption, signatures,
//! public-key encryption, keyed hashing, and the bilinear group.

pub mod group;
pub mod hash;
pub mod pke;
pub mod se;
pub mod sig;

use alloc::vec::Vec;

pub use group::{pair, hash_gt, hash_to_g1, G1, Gt, GroupHash, Scalar, GROUP_ORDER};
pub use hash::{crhf_hash, expand, HashKey};
pub use pke::{pke_dec, pke_enc, PkeError, PkeKeypair};
pub use se::{se_dec, se_enc, SeError};
pub use sig::{verify, SigKeypair};

/// Which scheme a piece of key material belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Scheme {
    Se,
    Sig,
    Pke,
}

/// Sampled key material. `public` is absent for the symmetric scheme.
#[derive(Clone)]
pub struct KeyMaterial {
    pub scheme: Scheme,
    pub public: Option<Vec<u8>>,
    pub secret: Vec<u8>,
}

/// Sample fresh keys for `scheme`, deterministically in `seed`.
pub fn sample_keys(scheme: Scheme, seed: u64) -> KeyMaterial {
    match scheme {
        Scheme::Se => KeyMaterial {
            scheme,
            public: None,
            secret: expand(b"covenant/se/seed", &seed.to_be_bytes(), 32),
        },
        Scheme::Sig => {
            let kp = SigKeypair::from_seed_u64(seed);
            KeyMaterial {
                scheme,
                public: Some(kp.public().to_vec()),
                secret: expand(b"covenant/sig/seed", &seed.to_be_bytes(), 32),
            }
        }
        Scheme::Pke => {
            let kp = PkeKeypair::from_seed_u64(seed);
            KeyMaterial {
                scheme,
                public: Some(kp.public().to_vec()),
                secret: expand(b"covenant/pke/seed", &seed.to_be_bytes(), 32),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn se_sampling_is_deterministic() {
        let a = sample_keys(Scheme::Se, 7);
        let b = sample_keys(Scheme::Se, 7);
        assert_eq!(a.secret, b.secret);
        assert!(a.public.is_none());
    }

    #[test]
    fn pke_material_has_distinct_halves() {
        let km = sample_keys(Scheme::Pke, 3);
        assert_ne!(km.public.as_deref().unwrap(), km.secret.as_slice());
    }

    #[test]
    fn thousand_signature_keys_are_distinct() {
        let mut seen = HashSet::new();
        for seed in 0..1000u64 {
            let km = sample_keys(Scheme::Sig, seed);
            assert!(seen.insert(km.public.unwrap()));
        }
    }
}
