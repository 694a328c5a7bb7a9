//! The Key Curator as an on-chain program.
//!
//! `init` seeds the published parameters (crs and hash keys) once;
//! `register` runs identity verification, appends the new depth-1 tree, and
//! performs the compression merges, storing the updated forest and
//! parameters in contract state.

use alloc::vec::Vec;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::contract::{Bytecode, ContractState, GuardFailure, OpMetrics, OpcodeEntry, TxView};
use crate::ledger::tx::{Transaction, TxCall};
use crate::primitives::hash::HashKey;
use crate::primitives::pke::PKE_PUBLIC_LEN;
use crate::primitives::sig::SigKeypair;
use crate::rbe::forest::MerkleForest;
use crate::rbe::PublicParams;

pub const KEY_CURATOR_PROGRAM: &str = "key-curator";

/// `init` payload: the published crs and hash keys.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InitAux {
    pub crs: Digest,
    pub hks: Vec<HashKey>,
}

impl Canon for InitAux {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.digest(&self.crs);
        enc.list_len(self.hks.len());
        for hk in &self.hks {
            enc.bytes(&hk.key).u64(hk.index);
        }
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let crs = dec.digest()?;
        let n = dec.list_len()?;
        let mut hks = Vec::with_capacity(n);
        for _ in 0..n {
            let key: [u8; 32] = dec
                .bytes()?
                .try_into()
                .map_err(|_| CodecError::BadValue("hash key"))?;
            hks.push(HashKey {
                key,
                index: dec.u64()?,
            });
        }
        Ok(InitAux { crs, hks })
    }
}

/// `register` payload: the identity and its self-generated public key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RegisterAux {
    pub id: Vec<u8>,
    pub pk: Vec<u8>,
}

impl Canon for RegisterAux {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.id).bytes(&self.pk);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(RegisterAux {
            id: dec.bytes()?,
            pk: dec.bytes()?,
        })
    }
}

/// Reject ids that already appear in the registration order; comparison is
/// exact bytes.
pub fn identity_verify(forest: &MerkleForest, id: &[u8]) -> bool {
    !forest.contains(id)
}

pub(crate) fn load_forest(state: &ContractState) -> Result<(MerkleForest, Vec<HashKey>), GuardFailure> {
    let hks_bytes = state
        .get(b"hks")
        .ok_or_else(|| GuardFailure::new("curator-uninitialized"))?;
    let init = InitAux::decode(hks_bytes).map_err(|_| GuardFailure::new("corrupt-params"))?;
    let forest = match state.get(b"forest") {
        Some(bytes) => {
            let mut f =
                MerkleForest::decode(bytes).map_err(|_| GuardFailure::new("corrupt-forest"))?;
            f.rebuild(&init.hks)
                .map_err(|_| GuardFailure::new("corrupt-forest"))?;
            f
        }
        None => MerkleForest::new(),
    };
    Ok((forest, init.hks))
}

fn init_guard(state: &ContractState, view: &TxView<'_>) -> Result<(), GuardFailure> {
    if state.get(b"hks").is_some() {
        return Err(GuardFailure::new("already-initialized"));
    }
    let aux = InitAux::decode(view.aux).map_err(|_| GuardFailure::new("malformed-init"))?;
    if aux.hks.is_empty() {
        return Err(GuardFailure::new("no-hash-keys"));
    }
    Ok(())
}

fn init_op(state: &mut ContractState, view: &TxView<'_>) -> Result<OpMetrics, GuardFailure> {
    state.set(b"hks".to_vec(), view.aux.to_vec());
    let aux = InitAux::decode(view.aux).expect("guard decoded init");
    let pp = PublicParams {
        hks: aux.hks,
        roots: Vec::new(),
    };
    state.set(b"pp".to_vec(), pp.canon_bytes());
    Ok(Vec::new())
}

fn register_guard(state: &ContractState, view: &TxView<'_>) -> Result<(), GuardFailure> {
    let aux = RegisterAux::decode(view.aux).map_err(|_| GuardFailure::new("malformed-registration"))?;
    if aux.id.is_empty() {
        return Err(GuardFailure::new("empty-id"));
    }
    if aux.pk.len() != PKE_PUBLIC_LEN {
        return Err(GuardFailure::new("bad-key-length"));
    }
    let (forest, _) = load_forest(state)?;
    if !identity_verify(&forest, &aux.id) {
        return Err(GuardFailure::new("already-registered"));
    }
    Ok(())
}

fn register_op(state: &mut ContractState, view: &TxView<'_>) -> Result<OpMetrics, GuardFailure> {
    let aux = RegisterAux::decode(view.aux).expect("guard decoded registration");
    let (mut forest, hks) = load_forest(state)?;
    let merges = forest
        .register(&aux.id, &aux.pk, &hks)
        .map_err(|e| GuardFailure::new(alloc::format!("registration-failed: {e}")))?;
    state.set(b"forest".to_vec(), forest.canon_bytes());
    let pp = PublicParams {
        hks,
        roots: forest.roots(),
    };
    state.set(b"pp".to_vec(), pp.canon_bytes());
    Ok(alloc::vec![("merge", merges)])
}

/// The Key Curator program: `init` then any number of `register` calls.
pub fn key_curator_program() -> Bytecode {
    Bytecode {
        name: KEY_CURATOR_PROGRAM,
        entries: alloc::vec![
            OpcodeEntry {
                name: "init",
                req: init_guard,
                op: init_op,
            },
            OpcodeEntry {
                name: "register",
                req: register_guard,
                op: register_op,
            },
        ],
    }
}

/// Build a signed registration transaction carrying `(id, pk)`.
pub fn register_tx(
    keys: &SigKeypair,
    nonce: u64,
    contract: Digest,
    id: &[u8],
    pk: &[u8],
) -> Transaction {
    let aux = RegisterAux {
        id: id.to_vec(),
        pk: pk.to_vec(),
    };
    Transaction::create(
        keys,
        nonce,
        &TxCall::Call {
            contract,
            op: "register".into(),
        },
        aux.canon_bytes(),
    )
}

/// Decode the confirmed public parameters from contract state.
pub fn params_from_state(state: &ContractState) -> Option<PublicParams> {
    PublicParams::decode(state.get(b"pp")?).ok()
}

/// Decode (and rebuild) the confirmed forest from contract state.
pub fn forest_from_state(state: &ContractState) -> Option<MerkleForest> {
    load_forest(state).ok().map(|(forest, _)| forest)
}

/// The published crs from contract state.
pub fn crs_from_state(state: &ContractState) -> Option<Digest> {
    InitAux::decode(state.get(b"hks")?).ok().map(|i| i.crs)
}
