//! Registration-based encryption with the contract as transparent Key
//! Curator.
//!
//! Users generate their own PKE key pairs and register `(id, pk)` on chain;
//! the curator compresses registrations into the Merkle forest and publishes
//! `pp = ((hk_1 … hk_λ), (rt_1, d_1), …)`. Encryption builds one program per
//! forest root; a program releases `PKE.Enc(pk, m; r)` only for a verifying
//! opening of the target identity under its hardwired root. Obfuscation is a
//! transparent pass-through: programs carry their hardwired values in the
//! clear and are honestly evaluated, which is sufficient for the correctness
//! and transparency properties under test (hiding the message from the
//! program evaluator is out of scope).

pub mod curator;
pub mod forest;

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::primitives::hash::HashKey;
use crate::primitives::pke::{pke_dec, pke_enc, PkeKeypair};

pub use curator::{
    identity_verify, key_curator_program, register_tx, InitAux, RegisterAux, KEY_CURATOR_PROGRAM,
};
pub use forest::{
    leaf_hash, node_hash, verify_path, Direction, LeafPair, MerkleForest, MerkleOpening,
    PathLevel, RbeError, Tree,
};

/// Compressed public parameters: the hash keys and one (root, depth) pair
/// per tree, depths strictly decreasing.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PublicParams {
    pub hks: Vec<HashKey>,
    pub roots: Vec<(Digest, u32)>,
}

impl PublicParams {
    /// η: the number of trees.
    pub fn tree_count(&self) -> usize {
        self.roots.len()
    }

    pub fn contains_root(&self, root: &Digest) -> bool {
        self.roots.iter().any(|(rt, _)| rt == root)
    }

    /// Structural invariants: strictly decreasing depths, η ≤ λ.
    pub fn well_formed(&self) -> bool {
        self.roots.len() <= self.hks.len()
            && self.roots.windows(2).all(|w| w[0].1 > w[1].1)
            && self.roots.iter().all(|(_, d)| *d as usize <= self.hks.len())
    }
}

impl Canon for PublicParams {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.list_len(self.hks.len());
        for hk in &self.hks {
            enc.bytes(&hk.key).u64(hk.index);
        }
        enc.list_len(self.roots.len());
        for (rt, d) in &self.roots {
            enc.digest(rt).u32(*d);
        }
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let nk = dec.list_len()?;
        let mut hks = Vec::with_capacity(nk);
        for _ in 0..nk {
            let key: [u8; 32] = dec
                .bytes()?
                .try_into()
                .map_err(|_| CodecError::BadValue("hash key"))?;
            hks.push(HashKey {
                key,
                index: dec.u64()?,
            });
        }
        let nr = dec.list_len()?;
        let mut roots = Vec::with_capacity(nr);
        for _ in 0..nr {
            roots.push((dec.digest()?, dec.u32()?));
        }
        Ok(PublicParams { hks, roots })
    }
}

/// System setup output: the common random string, the initial parameters
/// (λ hash keys, no roots yet), and an empty forest.
#[derive(Clone, Debug)]
pub struct RbeSetup {
    pub crs: Digest,
    pub pp: PublicParams,
    pub forest: MerkleForest,
}

/// Deterministic system setup: λ keyed-hash instances derived from the seed.
pub fn rbe_setup(lambda: usize, seed: u64) -> RbeSetup {
    let master: [u8; 32] = crate::primitives::hash::expand(
        b"covenant/rbe/setup",
        &seed.to_be_bytes(),
        32,
    )
    .try_into()
    .unwrap();
    let hks = (1..=lambda as u64)
        .map(|i| HashKey::derive(&master, i))
        .collect();
    let crs = Digest::of(&crate::primitives::hash::expand(
        b"covenant/rbe/crs",
        &master,
        32,
    ));
    RbeSetup {
        crs,
        pp: PublicParams {
            hks,
            roots: Vec::new(),
        },
        forest: MerkleForest::new(),
    }
}

/// Client key generation: an ordinary PKE key pair; the secret key never
/// leaves the client.
pub fn rbe_keygen(rng: &mut impl RngCore) -> PkeKeypair {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    PkeKeypair::from_seed(&seed)
}

/// One encryption program, hardwiring `(rt_i, d_i, hk_1…hk_{d_i}, m, id, r)`.
/// The crs rides along as a domain tag.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EncProgram {
    pub root: Digest,
    pub depth: u32,
    pub hks: Vec<HashKey>,
    pub msg: Vec<u8>,
    pub id: Vec<u8>,
    pub randomness: [u8; 32],
    pub crs: Digest,
}

/// What a program evaluation yields. Both rejection flavors print as ⊥ to
/// the caller; the distinction lets decryption tell a stale opening (root no
/// longer present) from a bogus one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ProgramOutput {
    Encrypted(Vec<u8>),
    RootMismatch,
    Rejected,
}

/// Evaluate a program on an opening:
/// output `PKE.Enc(h_0^1, m; r)` iff the opening verifies under the
/// hardwired root for the hardwired identity, else ⊥.
pub fn eval_program(program: &EncProgram, opening: &MerkleOpening) -> ProgramOutput {
    if opening.root != program.root {
        return ProgramOutput::RootMismatch;
    }
    if opening.leaf.id != program.id {
        return ProgramOutput::Rejected;
    }
    if opening.claimed_depth() != program.depth {
        return ProgramOutput::Rejected;
    }
    if !verify_path(opening, &program.root, &program.hks) {
        return ProgramOutput::Rejected;
    }
    match pke_enc(&opening.leaf.pk, &program.msg, &program.randomness) {
        Ok(ct) => ProgramOutput::Encrypted(ct),
        Err(_) => ProgramOutput::Rejected,
    }
}

impl Canon for EncProgram {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.digest(&self.root).u32(self.depth);
        enc.list_len(self.hks.len());
        for hk in &self.hks {
            enc.bytes(&hk.key).u64(hk.index);
        }
        enc.bytes(&self.msg).bytes(&self.id).bytes(&self.randomness);
        enc.digest(&self.crs);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let root = dec.digest()?;
        let depth = dec.u32()?;
        let nk = dec.list_len()?;
        let mut hks = Vec::with_capacity(nk);
        for _ in 0..nk {
            let key: [u8; 32] = dec
                .bytes()?
                .try_into()
                .map_err(|_| CodecError::BadValue("hash key"))?;
            hks.push(HashKey {
                key,
                index: dec.u64()?,
            });
        }
        Ok(EncProgram {
            root,
            depth,
            hks,
            msg: dec.bytes()?,
            id: dec.bytes()?,
            randomness: dec
                .bytes()?
                .try_into()
                .map_err(|_| CodecError::BadValue("randomness"))?,
            crs: dec.digest()?,
        })
    }
}

/// `ct = (pp, P_1, …, P_η)`, one program per tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RbeCiphertext {
    pub pp: PublicParams,
    pub programs: Vec<EncProgram>,
}

impl Canon for RbeCiphertext {
    fn encode_into(&self, enc: &mut Encoder) {
        self.pp.encode_into(enc);
        enc.list_len(self.programs.len());
        for p in &self.programs {
            p.encode_into(enc);
        }
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let pp = PublicParams::decode_from(dec)?;
        let n = dec.list_len()?;
        let mut programs = Vec::with_capacity(n);
        for _ in 0..n {
            programs.push(EncProgram::decode_from(dec)?);
        }
        Ok(RbeCiphertext { pp, programs })
    }
}

/// Encrypt to `id` under a public-parameter snapshot, deterministically in
/// the shared randomness `r`.
pub fn rbe_enc(
    crs: &Digest,
    pp: &PublicParams,
    id: &[u8],
    msg: &[u8],
    r: &[u8; 32],
) -> RbeCiphertext {
    let programs = pp
        .roots
        .iter()
        .map(|(rt, d)| EncProgram {
            root: *rt,
            depth: *d,
            hks: pp.hks[..*d as usize].to_vec(),
            msg: msg.to_vec(),
            id: id.to_vec(),
            randomness: *r,
            crs: *crs,
        })
        .collect();
    RbeCiphertext {
        pp: pp.clone(),
        programs,
    }
}

/// Decryption verdict.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DecOutcome {
    Message(Vec<u8>),
    /// The opening was valid once but its root is gone from the snapshot:
    /// re-run state read and update, then retry.
    GetUpd,
    /// Syntax error or a bogus opening.
    Bottom,
}

/// Decrypt by evaluating every program on the opening and unwrapping the
/// first PKE ciphertext that decrypts under `keys`.
pub fn rbe_dec(keys: &PkeKeypair, opening: &MerkleOpening, ct: &RbeCiphertext) -> DecOutcome {
    if ct.programs.len() != ct.pp.tree_count() || !ct.pp.well_formed() {
        return DecOutcome::Bottom;
    }
    for program in &ct.programs {
        if let ProgramOutput::Encrypted(pke_ct) = eval_program(program, opening) {
            if let Ok(msg) = pke_dec(keys, &pke_ct) {
                return DecOutcome::Message(msg);
            }
        }
    }
    // Every program rejected. If the opening is self-consistent but its root
    // is absent from the snapshot, the caller's view is stale.
    if !ct.pp.contains_root(&opening.root) && verify_path(opening, &opening.root, &ct.pp.hks) {
        return DecOutcome::GetUpd;
    }
    DecOutcome::Bottom
}

/// Decrypt from ciphertext bytes; malformed bytes are a syntax error (⊥).
pub fn rbe_dec_bytes(keys: &PkeKeypair, opening: &MerkleOpening, bytes: &[u8]) -> DecOutcome {
    match RbeCiphertext::decode(bytes) {
        Ok(ct) => rbe_dec(keys, opening, &ct),
        Err(_) => DecOutcome::Bottom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    #[test]
    fn setup_yields_lambda_keys_and_no_roots() {
        let setup = rbe_setup(128, 0);
        assert_eq!(setup.pp.hks.len(), 128);
        assert!(setup.pp.roots.is_empty());
        assert!(setup.forest.is_empty());
        // Deterministic under the seed.
        let again = rbe_setup(128, 0);
        assert_eq!(again.crs, setup.crs);
        assert_eq!(again.pp, setup.pp);
        assert_ne!(rbe_setup(128, 1).crs, setup.crs);
    }

    #[test]
    fn setup_serialization_round_trips() {
        let setup = rbe_setup(16, 3);
        let decoded = PublicParams::decode(&setup.pp.canon_bytes()).unwrap();
        assert_eq!(decoded, setup.pp);
    }

    #[test]
    fn keygen_produces_distinct_working_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut publics = std::collections::HashSet::new();
        for _ in 0..100 {
            let kp = rbe_keygen(&mut rng);
            assert_eq!(kp.public().len(), 32);
            assert!(publics.insert(kp.public()));
            let ct = pke_enc(&kp.public(), b"ping", &[9u8; 32]).unwrap();
            assert_eq!(pke_dec(&kp, &ct).unwrap(), b"ping");
        }
    }

    #[test]
    fn program_count_tracks_tree_count() {
        let setup = rbe_setup(16, 7);
        let mut forest = MerkleForest::new();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for i in 0..7u8 {
            let kp = rbe_keygen(&mut rng);
            forest
                .register(&[b'u', i], &kp.public(), &setup.pp.hks)
                .unwrap();
        }
        let pp = PublicParams {
            hks: setup.pp.hks.clone(),
            roots: forest.roots(),
        };
        assert!(pp.well_formed());
        let ct = rbe_enc(&setup.crs, &pp, b"u\x03", b"msg", &[1u8; 32]);
        // popcount(7) = 3 trees, 3 programs.
        assert_eq!(ct.programs.len(), 3);
        // Bit-identical under the same randomness.
        let again = rbe_enc(&setup.crs, &pp, b"u\x03", b"msg", &[1u8; 32]);
        assert_eq!(ct.canon_bytes(), again.canon_bytes());
        assert_eq!(RbeCiphertext::decode(&ct.canon_bytes()).unwrap(), ct);
    }
}
