//! Transactions: signed, nonce-protected payloads that drive every state
//! change on the simulated chain.

use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::primitives::sig::SigKeypair;

/// Identifier of a verification key: digest of the raw key bytes.
pub fn signer_id(verification_key: &[u8]) -> Digest {
    let mut enc = Encoder::new();
    enc.bytes(b"covenant/signer").bytes(verification_key);
    enc.digest_value()
}

/// The opaque payload of a transaction: `metadata ‖ aux`.
///
/// `metadata` names what the transaction does (deploy or contract call);
/// `aux` carries the operation-specific request data.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxPayload {
    pub metadata: Vec<u8>,
    pub aux: Vec<u8>,
}

impl Canon for TxPayload {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.metadata).bytes(&self.aux);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(TxPayload {
            metadata: dec.bytes()?,
            aux: dec.bytes()?,
        })
    }
}

/// What a transaction asks the chain to do, decoded from `metadata`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TxCall {
    /// Deploy a registered program; the new instance id is the tx digest.
    Deploy { program: String },
    /// Invoke a named opcode entry of a deployed instance.
    Call { contract: Digest, op: String },
}

impl Canon for TxCall {
    fn encode_into(&self, enc: &mut Encoder) {
        match self {
            TxCall::Deploy { program } => {
                enc.u8(1).bytes(program.as_bytes());
            }
            TxCall::Call { contract, op } => {
                enc.u8(2).digest(contract).bytes(op.as_bytes());
            }
        }
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            1 => Ok(TxCall::Deploy {
                program: String::from_utf8(dec.bytes()?)
                    .map_err(|_| CodecError::BadValue("program"))?,
            }),
            2 => Ok(TxCall::Call {
                contract: dec.digest()?,
                op: String::from_utf8(dec.bytes()?).map_err(|_| CodecError::BadValue("op"))?,
            }),
            _ => Err(CodecError::BadValue("call kind")),
        }
    }
}

/// A signed transaction. `id` is the digest of all preceding fields.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub payload: TxPayload,
    pub signature: Vec<u8>,
    pub signer: Digest,
    pub nonce: u64,
    pub id: Digest,
}

impl Transaction {
    /// The bytes the signature covers: payload, signer, and nonce.
    pub fn signing_bytes(payload: &TxPayload, signer: &Digest, nonce: u64) -> Vec<u8> {
        let mut enc = Encoder::new();
        payload.encode_into(&mut enc);
        enc.digest(signer).u64(nonce);
        enc.finish()
    }

    fn compute_id(payload: &TxPayload, signature: &[u8], signer: &Digest, nonce: u64) -> Digest {
        let mut enc = Encoder::new();
        payload.encode_into(&mut enc);
        enc.bytes(signature).digest(signer).u64(nonce);
        enc.digest_value()
    }

    /// Sign and assemble a transaction.
    pub fn create(keys: &SigKeypair, nonce: u64, call: &TxCall, aux: Vec<u8>) -> Transaction {
        let payload = TxPayload {
            metadata: call.canon_bytes(),
            aux,
        };
        let signer = signer_id(&keys.public());
        let signature = keys.sign(&Self::signing_bytes(&payload, &signer, nonce));
        let id = Self::compute_id(&payload, &signature, &signer, nonce);
        Transaction {
            payload,
            signature,
            signer,
            nonce,
            id,
        }
    }

    /// Assemble a transaction with an arbitrary (possibly bogus) signature.
    pub fn with_signature(
        signer: Digest,
        nonce: u64,
        call: &TxCall,
        aux: Vec<u8>,
        signature: Vec<u8>,
    ) -> Transaction {
        let payload = TxPayload {
            metadata: call.canon_bytes(),
            aux,
        };
        let id = Self::compute_id(&payload, &signature, &signer, nonce);
        Transaction {
            payload,
            signature,
            signer,
            nonce,
            id,
        }
    }

    /// `id` must equal the digest of the serialized fields.
    pub fn well_formed(&self) -> bool {
        self.id == Self::compute_id(&self.payload, &self.signature, &self.signer, self.nonce)
    }

    pub fn verify_signature(&self, verification_key: &[u8]) -> bool {
        crate::primitives::sig::verify(
            verification_key,
            &self.signature,
            &Self::signing_bytes(&self.payload, &self.signer, self.nonce),
        )
    }

    pub fn call(&self) -> Result<TxCall, CodecError> {
        TxCall::decode(&self.payload.metadata)
    }
}

impl Canon for Transaction {
    fn encode_into(&self, enc: &mut Encoder) {
        self.payload.encode_into(enc);
        enc.bytes(&self.signature).digest(&self.signer).u64(self.nonce);
        enc.digest(&self.id);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let payload = TxPayload::decode_from(dec)?;
        let signature = dec.bytes()?;
        let signer = dec.digest()?;
        let nonce = dec.u64()?;
        let id = dec.digest()?;
        let tx = Transaction {
            payload,
            signature,
            signer,
            nonce,
            id,
        };
        if !tx.well_formed() {
            return Err(CodecError::BadValue("tx id"));
        }
        Ok(tx)
    }
}

/// A client-side account: signing keys plus a nonce counter.
pub struct Account {
    pub keys: SigKeypair,
    pub signer: Digest,
    next_nonce: u64,
}

impl Account {
    pub fn from_seed(seed: u64) -> Account {
        let keys = SigKeypair::from_seed_u64(seed);
        let signer = signer_id(&keys.public());
        Account {
            keys,
            signer,
            next_nonce: 0,
        }
    }

    pub fn verification_key(&self) -> [u8; 32] {
        self.keys.public()
    }

    pub fn next_nonce(&mut self) -> u64 {
        let n = self.next_nonce;
        self.next_nonce += 1;
        n
    }

    /// Sign a transaction with the next fresh nonce.
    pub fn sign_tx(&mut self, call: &TxCall, aux: Vec<u8>) -> Transaction {
        let nonce = self.next_nonce();
        Transaction::create(&self.keys, nonce, call, aux)
    }
}
