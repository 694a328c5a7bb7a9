//! Public-key encryption with explicit randomness.
//!
//! X25519-based hybrid encryption. The encryptor's randomness `r` is an
//! explicit input because the registration scheme hardwires it into
//! encryption programs: the same `(pk, m, r)` must always produce the same
//! ciphertext bytes.
//!
//! Layout: `ct = ephemeral_pk(32) ‖ masked_msg ‖ tag(32)`.

use alloc::vec::Vec;

use sha2::{Digest as _, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::primitives::hash::expand;

pub const PKE_PUBLIC_LEN: usize = 32;
pub const PKE_TAG_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("public-key decryption failed: {0}")]
pub struct PkeError(pub &'static str);

#[derive(Clone)]
pub struct PkeKeypair {
    secret: StaticSecret,
    public: PublicKey,
}

impl PkeKeypair {
    pub fn from_seed(seed: &[u8; 32]) -> PkeKeypair {
        let secret = StaticSecret::from(*seed);
        let public = PublicKey::from(&secret);
        PkeKeypair { secret, public }
    }

    pub fn from_seed_u64(seed: u64) -> PkeKeypair {
        let bytes: [u8; 32] = expand(b"covenant/pke/seed", &seed.to_be_bytes(), 32)
            .try_into()
            .unwrap();
        PkeKeypair::from_seed(&bytes)
    }

    pub fn public(&self) -> [u8; PKE_PUBLIC_LEN] {
        self.public.to_bytes()
    }
}

fn mask_and_tag(shared: &[u8; 32], eph_pk: &[u8; 32], msg: &[u8]) -> (Vec<u8>, [u8; 32]) {
    let mut seed = Vec::with_capacity(64);
    seed.extend_from_slice(shared);
    seed.extend_from_slice(eph_pk);
    let ks = expand(b"covenant/pke/stream", &seed, msg.len());
    let masked: Vec<u8> = msg.iter().zip(ks.iter()).map(|(m, k)| m ^ k).collect();
    let mut h = Sha256::new();
    h.update(b"covenant/pke/tag");
    h.update(shared);
    h.update(eph_pk);
    h.update(msg);
    (masked, h.finalize().into())
}

/// Encrypt `msg` to the 32-byte public key, deterministically in `r`.
pub fn pke_enc(public: &[u8], msg: &[u8], r: &[u8; 32]) -> Result<Vec<u8>, PkeError> {
    let pk_bytes: [u8; PKE_PUBLIC_LEN] = public
        .try_into()
        .map_err(|_| PkeError("public key must be 32 bytes"))?;
    let eph_seed: [u8; 32] = expand(b"covenant/pke/eph", r, 32).try_into().unwrap();
    let eph_secret = StaticSecret::from(eph_seed);
    let eph_pk = PublicKey::from(&eph_secret).to_bytes();
    let shared = eph_secret.diffie_hellman(&PublicKey::from(pk_bytes)).to_bytes();
    let (masked, tag) = mask_and_tag(&shared, &eph_pk, msg);
    let mut ct = Vec::with_capacity(PKE_PUBLIC_LEN + masked.len() + PKE_TAG_LEN);
    ct.extend_from_slice(&eph_pk);
    ct.extend_from_slice(&masked);
    ct.extend_from_slice(&tag);
    Ok(ct)
}

/// Decrypt; returns the failure symbol on malformed input, a tampered
/// ciphertext, or the wrong secret key.
pub fn pke_dec(keys: &PkeKeypair, ct: &[u8]) -> Result<Vec<u8>, PkeError> {
    if ct.len() < PKE_PUBLIC_LEN + PKE_TAG_LEN {
        return Err(PkeError("ciphertext too short"));
    }
    let eph_pk: [u8; 32] = ct[..PKE_PUBLIC_LEN].try_into().unwrap();
    let body = &ct[PKE_PUBLIC_LEN..ct.len() - PKE_TAG_LEN];
    let tag = &ct[ct.len() - PKE_TAG_LEN..];
    let shared = keys
        .secret
        .diffie_hellman(&PublicKey::from(eph_pk))
        .to_bytes();
    let mut seed = Vec::with_capacity(64);
    seed.extend_from_slice(&shared);
    seed.extend_from_slice(&eph_pk);
    let ks = expand(b"covenant/pke/stream", &seed, body.len());
    let msg: Vec<u8> = body.iter().zip(ks.iter()).map(|(c, k)| c ^ k).collect();
    let (_, expect) = mask_and_tag(&shared, &eph_pk, &msg);
    if expect.as_slice() != tag {
        return Err(PkeError("authentication tag mismatch"));
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    #[test]
    fn round_trip() {
        let kp = PkeKeypair::from_seed_u64(1);
        let ct = pke_enc(&kp.public(), b"hello", &[4u8; 32]).unwrap();
        assert_eq!(pke_dec(&kp, &ct).unwrap(), b"hello");
    }

    #[test]
    fn deterministic_under_fixed_randomness() {
        let kp = PkeKeypair::from_seed_u64(2);
        let a = pke_enc(&kp.public(), b"msg", &[7u8; 32]).unwrap();
        let b = pke_enc(&kp.public(), b"msg", &[7u8; 32]).unwrap();
        assert_eq!(a, b);
        let c = pke_enc(&kp.public(), b"msg", &[8u8; 32]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_secret_key_fails_hundred_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for i in 0..100u64 {
            let enc_to = PkeKeypair::from_seed_u64(1000 + i);
            let wrong = PkeKeypair::from_seed_u64(5000 + i);
            let mut r = [0u8; 32];
            rng.fill_bytes(&mut r);
            let ct = pke_enc(&enc_to.public(), b"secret", &r).unwrap();
            assert!(pke_dec(&wrong, &ct).is_err());
        }
    }

    #[test]
    fn malformed_ciphertext_fails() {
        let kp = PkeKeypair::from_seed_u64(3);
        assert!(pke_dec(&kp, b"short").is_err());
        let mut ct = pke_enc(&kp.public(), b"payload", &[1u8; 32]).unwrap();
        let last = ct.len() - 1;
        ct[last] ^= 1;
        assert!(pke_dec(&kp, &ct).is_err());
    }
}
