//! Symmetric authenticated encryption.
//!
//! Deterministic SIV-style construction over SHA-256: the tag is a keyed
//! digest of the plaintext and doubles as the keystream nonce, so encryption
//! needs no external randomness and any ciphertext tampering is caught at
//! decryption.

use alloc::vec::Vec;

use sha2::{Digest as _, Sha256};

use crate::primitives::hash::expand;

pub const SE_KEY_LEN: usize = 32;
pub const SE_TAG_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("symmetric decryption failed: {0}")]
pub struct SeError(pub &'static str);

fn siv_tag(key: &[u8; SE_KEY_LEN], msg: &[u8]) -> [u8; SE_TAG_LEN] {
    let mut h = Sha256::new();
    h.update(b"covenant/se/tag");
    h.update(key);
    h.update(msg);
    h.finalize().into()
}

fn keystream(key: &[u8; SE_KEY_LEN], tag: &[u8; SE_TAG_LEN], n: usize) -> Vec<u8> {
    let mut seed = Vec::with_capacity(SE_KEY_LEN + SE_TAG_LEN);
    seed.extend_from_slice(key);
    seed.extend_from_slice(tag);
    expand(b"covenant/se/stream", &seed, n)
}

/// Encrypt: `ct = tag ‖ (m ⊕ keystream(key, tag))`.
pub fn se_enc(key: &[u8; SE_KEY_LEN], msg: &[u8]) -> Vec<u8> {
    let tag = siv_tag(key, msg);
    let ks = keystream(key, &tag, msg.len());
    let mut ct = Vec::with_capacity(SE_TAG_LEN + msg.len());
    ct.extend_from_slice(&tag);
    ct.extend(msg.iter().zip(ks.iter()).map(|(m, k)| m ^ k));
    ct
}

/// Decrypt and authenticate; any modified byte fails.
pub fn se_dec(key: &[u8; SE_KEY_LEN], ct: &[u8]) -> Result<Vec<u8>, SeError> {
    if ct.len() < SE_TAG_LEN {
        return Err(SeError("ciphertext shorter than tag"));
    }
    let (tag, body) = ct.split_at(SE_TAG_LEN);
    let tag: [u8; SE_TAG_LEN] = tag.try_into().unwrap();
    let ks = keystream(key, &tag, body.len());
    let msg: Vec<u8> = body.iter().zip(ks.iter()).map(|(c, k)| c ^ k).collect();
    if siv_tag(key, &msg) != tag {
        return Err(SeError("authentication tag mismatch"));
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    #[test]
    fn empty_message_round_trip() {
        let key = [9u8; 32];
        let ct = se_enc(&key, b"");
        assert_eq!(se_dec(&key, &ct).unwrap(), b"");
    }

    #[test]
    fn random_messages_up_to_one_mebibyte() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let key = [1u8; 32];
        for case in 0..100 {
            // Case 0 pins the 1 MiB boundary; the rest sample sizes below it.
            let len = if case == 0 {
                1 << 20
            } else {
                (rng.next_u64() % (1 << 14)) as usize
            };
            let mut msg = vec![0u8; len];
            rng.fill_bytes(&mut msg);
            let ct = se_enc(&key, &msg);
            assert_eq!(se_dec(&key, &ct).unwrap(), msg);
        }
    }

    #[test]
    fn every_flipped_bit_position_rejects() {
        let key = [7u8; 32];
        let ct = se_enc(&key, b"authenticated payload");
        for i in 0..ct.len() {
            let mut bad = ct.clone();
            bad[i] ^= 0x01;
            assert!(se_dec(&key, &bad).is_err(), "byte {i} flip accepted");
        }
    }
}
