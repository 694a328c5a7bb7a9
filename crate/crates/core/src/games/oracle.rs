//! The blockchain and honest-user oracles the adversary interacts with.
//!
//! Both are pure caches: a response depends only on the backing state and
//! the query, never on query order, and every response is recorded so the
//! game's win conditions can refer to "answers the adversary already
//! holds".

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::codec::{Canon, Digest};
use crate::contract::StateSnapshot;
use crate::ledger::tx::{Transaction, TxCall};
use crate::ledger::{Ledger, LedgerError};
use crate::primitives::sig::SigKeypair;

/// Blockchain oracle: cached `ReadState` (L1) and `ReadTx` (L2) access.
#[derive(Default)]
pub struct BlockchainOracle {
    l1: BTreeMap<Digest, StateSnapshot>,
    l2: BTreeMap<Digest, Transaction>,
}

impl BlockchainOracle {
    pub fn new() -> BlockchainOracle {
        BlockchainOracle::default()
    }

    /// `(ReadState; Tx)`: cached state lookup.
    pub fn read_state(
        &mut self,
        ledger: &Ledger,
        tx: &Digest,
    ) -> Result<StateSnapshot, LedgerError> {
        if let Some(s) = self.l1.get(tx) {
            return Ok(s.clone());
        }
        let s = ledger.read_state(tx)?;
        self.l1.insert(*tx, s.clone());
        Ok(s)
    }

    /// `(ReadTx; state)`: cached trigger lookup, keyed by snapshot digest.
    pub fn read_tx(
        &mut self,
        ledger: &Ledger,
        snapshot: &StateSnapshot,
    ) -> Result<Transaction, LedgerError> {
        let key = snapshot.digest();
        if let Some(tx) = self.l2.get(&key) {
            return Ok(tx.clone());
        }
        let tx = ledger.read_tx(snapshot)?;
        self.l2.insert(key, tx.clone());
        Ok(tx)
    }

    pub fn l1_len(&self) -> usize {
        self.l1.len()
    }

    pub fn l2_len(&self) -> usize {
        self.l2.len()
    }

    /// Digests of all states handed out so far.
    pub fn l1_state_digests(&self) -> Vec<Digest> {
        self.l1.values().map(|s| s.digest()).collect()
    }

    /// Ids of all trigger transactions handed out so far.
    pub fn l2_tx_ids(&self) -> Vec<Digest> {
        self.l2.values().map(|t| t.id).collect()
    }

    pub fn l1_entries(&self) -> impl Iterator<Item = (&Digest, &StateSnapshot)> {
        self.l1.iter()
    }
}

/// Honest-user oracle: returns signed transactions for adversary-chosen
/// metadata, recording everything it signs in `Set(Tx)`.
pub struct UserOracle {
    keys: SigKeypair,
    pub signer: Digest,
    next_nonce: u64,
    set: BTreeMap<Vec<u8>, Transaction>,
}

impl UserOracle {
    /// Wrap the honest user's signing keys. `nonce_start` keeps the oracle's
    /// nonce space disjoint from the user's own transactions.
    pub fn new(keys: SigKeypair, nonce_start: u64) -> UserOracle {
        let signer = crate::ledger::tx::signer_id(&keys.public());
        UserOracle {
            keys,
            signer,
            next_nonce: nonce_start,
            set: BTreeMap::new(),
        }
    }

    /// `(Sign; metadata)`: cached signing, keyed by the metadata bytes.
    pub fn sign(&mut self, call: &TxCall, aux: Vec<u8>) -> Transaction {
        let key = call.canon_bytes();
        if let Some(tx) = self.set.get(&key) {
            return tx.clone();
        }
        let nonce = self.next_nonce;
        self.next_nonce += 1;
        let tx = Transaction::create(&self.keys, nonce, call, aux);
        self.set.insert(key, tx.clone());
        tx
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn contains_tx(&self, id: &Digest) -> bool {
        self.set.values().any(|t| t.id == *id)
    }

    pub fn tx_ids(&self) -> Vec<Digest> {
        self.set.values().map(|t| t.id).collect()
    }

    pub fn verification_key(&self) -> [u8; 32] {
        self.keys.public()
    }
}
