//! Transaction signatures (Ed25519).

use alloc::vec::Vec;

use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};

use crate::primitives::hash::expand;

pub const SIG_PUBLIC_LEN: usize = 32;
pub const SIG_LEN: usize = 64;

/// A signing key pair. The secret half never appears in any serialized
/// artifact; only `public()` bytes travel.
#[derive(Clone)]
pub struct SigKeypair {
    signing: SigningKey,
}

impl SigKeypair {
    pub fn from_seed(seed: &[u8; 32]) -> SigKeypair {
        SigKeypair {
            signing: SigningKey::from_bytes(seed),
        }
    }

    pub fn from_seed_u64(seed: u64) -> SigKeypair {
        let bytes: [u8; 32] = expand(b"covenant/sig/seed", &seed.to_be_bytes(), 32)
            .try_into()
            .unwrap();
        SigKeypair::from_seed(&bytes)
    }

    pub fn public(&self) -> [u8; SIG_PUBLIC_LEN] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        self.signing.sign(msg).to_bytes().to_vec()
    }
}

/// Verify `sig` over `msg` under the 32-byte verification key.
/// Malformed keys or signatures simply verify to false.
pub fn verify(public: &[u8], sig: &[u8], msg: &[u8]) -> bool {
    let Ok(key_bytes): Result<[u8; SIG_PUBLIC_LEN], _> = public.try_into() else {
        return false;
    };
    let Ok(vk) = VerifyingKey::from_bytes(&key_bytes) else {
        return false;
    };
    let Ok(sig_bytes): Result<[u8; SIG_LEN], _> = sig.try_into() else {
        return false;
    };
    vk.verify(msg, &Signature::from_bytes(&sig_bytes)).is_ok()
}
