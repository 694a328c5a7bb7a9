//! Replicated smart-contract state machine.
//!
//! A contract is a named set of deterministic state-transition procedures
//! (`opcode`), each gated by a predicate (`reqcode`). State is a flat
//! key→value byte map whose digest is the hash of the sorted entries.
//! Procedures run natively; there is no interpreted VM.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::ledger::tx::{Transaction, TxCall};

/// Flat key→value byte map; the only storage a contract has.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ContractState {
    entries: BTreeMap<Vec<u8>, Vec<u8>>,
}

impl ContractState {
    pub fn new() -> ContractState {
        ContractState::default()
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries.get(key).map(|v| v.as_slice())
    }

    pub fn set(&mut self, key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u8>, &Vec<u8>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Digest of the sorted (key, value) pairs under canonical serialization.
    pub fn digest(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.list_len(self.entries.len());
        for (k, v) in &self.entries {
            enc.bytes(k).bytes(v);
        }
        enc.digest_value()
    }
}

/// Guard rejection: the transition was not allowed in the current state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GuardFailure {
    pub reason: String,
}

impl GuardFailure {
    pub fn new(reason: impl Into<String>) -> GuardFailure {
        GuardFailure {
            reason: reason.into(),
        }
    }
}

/// The transaction as seen by guards and procedures.
pub struct TxView<'a> {
    pub tx: &'a Transaction,
    pub aux: &'a [u8],
}

/// Per-operation counters a procedure may report (consumed by gas
/// accounting), e.g. how many tree merges a registration triggered.
pub type OpMetrics = Vec<(&'static str, u64)>;

pub type GuardFn = fn(&ContractState, &TxView<'_>) -> Result<(), GuardFailure>;
pub type OpFn = fn(&mut ContractState, &TxView<'_>) -> Result<OpMetrics, GuardFailure>;

/// One named transition with its guard.
#[derive(Clone)]
pub struct OpcodeEntry {
    pub name: &'static str,
    pub req: GuardFn,
    pub op: OpFn,
}

/// A deployable program: the ordered opcode entries with their guards.
#[derive(Clone)]
pub struct Bytecode {
    pub name: &'static str,
    pub entries: Vec<OpcodeEntry>,
}

impl Bytecode {
    pub fn entry(&self, op: &str) -> Option<&OpcodeEntry> {
        self.entries.iter().find(|e| e.name == op)
    }
}

/// Programs that deploy transactions may reference by name.
#[derive(Clone, Default)]
pub struct ProgramRegistry {
    programs: BTreeMap<&'static str, Bytecode>,
}

impl ProgramRegistry {
    pub fn new() -> ProgramRegistry {
        ProgramRegistry::default()
    }

    pub fn register(&mut self, code: Bytecode) {
        self.programs.insert(code.name, code);
    }

    pub fn get(&self, name: &str) -> Option<&Bytecode> {
        self.programs.get(name)
    }
}

/// Execution verdict for one transaction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Outcome {
    Applied,
    GuardFailed(String),
    Error(String),
}

impl Outcome {
    pub fn is_applied(&self) -> bool {
        matches!(self, Outcome::Applied)
    }
}

/// Per-transaction execution record, stored at every player.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Receipt {
    pub tx: Digest,
    pub contract: Digest,
    pub outcome: Outcome,
    pub pre_state_digest: Digest,
    pub post_state_digest: Digest,
    /// Opcode entry name for calls; "deploy" for deployments.
    pub op: String,
    pub metrics: Vec<(String, u64)>,
}

impl Canon for Receipt {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.digest(&self.tx).digest(&self.contract);
        match &self.outcome {
            Outcome::Applied => {
                enc.u8(0).bytes(b"");
            }
            Outcome::GuardFailed(r) => {
                enc.u8(1).bytes(r.as_bytes());
            }
            Outcome::Error(r) => {
                enc.u8(2).bytes(r.as_bytes());
            }
        }
        enc.digest(&self.pre_state_digest)
            .digest(&self.post_state_digest)
            .bytes(self.op.as_bytes());
        enc.list_len(self.metrics.len());
        for (k, v) in &self.metrics {
            enc.bytes(k.as_bytes()).u64(*v);
        }
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let tx = dec.digest()?;
        let contract = dec.digest()?;
        let kind = dec.u8()?;
        let reason =
            String::from_utf8(dec.bytes()?).map_err(|_| CodecError::BadValue("reason"))?;
        let outcome = match kind {
            0 => Outcome::Applied,
            1 => Outcome::GuardFailed(reason),
            2 => Outcome::Error(reason),
            _ => return Err(CodecError::BadValue("outcome")),
        };
        let pre_state_digest = dec.digest()?;
        let post_state_digest = dec.digest()?;
        let op = String::from_utf8(dec.bytes()?).map_err(|_| CodecError::BadValue("op"))?;
        let n = dec.list_len()?;
        let mut metrics = Vec::with_capacity(n);
        for _ in 0..n {
            let k = String::from_utf8(dec.bytes()?).map_err(|_| CodecError::BadValue("metric"))?;
            let v = dec.u64()?;
            metrics.push((k, v));
        }
        Ok(Receipt {
            tx,
            contract,
            outcome,
            pre_state_digest,
            post_state_digest,
            op,
            metrics,
        })
    }
}

/// A labeled snapshot of one contract's state right after a transaction
/// executed. The triggering transaction id is part of the snapshot, so every
/// confirmed state maps back to exactly one transaction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StateSnapshot {
    pub contract: Digest,
    pub tx: Digest,
    pub entries: Vec<(Vec<u8>, Vec<u8>)>,
}

impl StateSnapshot {
    pub fn digest(&self) -> Digest {
        self.canon_digest()
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries
            .binary_search_by(|(k, _)| k.as_slice().cmp(key))
            .ok()
            .map(|i| self.entries[i].1.as_slice())
    }

    pub fn to_state(&self) -> ContractState {
        let mut state = ContractState::new();
        for (k, v) in &self.entries {
            state.set(k.clone(), v.clone());
        }
        state
    }
}

impl Canon for StateSnapshot {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.digest(&self.contract).digest(&self.tx);
        enc.list_len(self.entries.len());
        for (k, v) in &self.entries {
            enc.bytes(k).bytes(v);
        }
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let contract = dec.digest()?;
        let tx = dec.digest()?;
        let n = dec.list_len()?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            entries.push((dec.bytes()?, dec.bytes()?));
        }
        Ok(StateSnapshot {
            contract,
            tx,
            entries,
        })
    }
}

/// A deployed contract instance at one player.
#[derive(Clone)]
pub struct Instance {
    pub id: Digest,
    pub program: String,
    pub state: ContractState,
    pub deploy_tx: Digest,
}

/// One player's replica: its deployed instances, executed-nonce set, and
/// receipt log.
#[derive(Clone, Default)]
pub struct Replica {
    pub instances: BTreeMap<Digest, Instance>,
    seen_nonces: BTreeSet<(Digest, u64)>,
    pub receipts: Vec<Receipt>,
    receipt_by_tx: BTreeMap<Digest, usize>,
}

impl Replica {
    pub fn new() -> Replica {
        Replica::default()
    }

    /// Digest over all instance states; the block `state_root`.
    pub fn state_root(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.list_len(self.instances.len());
        for (id, inst) in &self.instances {
            enc.digest(id).digest(&inst.state.digest());
        }
        enc.digest_value()
    }

    pub fn receipt_for(&self, tx: &Digest) -> Option<&Receipt> {
        self.receipt_by_tx.get(tx).map(|&i| &self.receipts[i])
    }

    /// Snapshot of the instance a transaction touched, in its current state.
    pub fn snapshot_for(&self, tx: &Digest, contract: &Digest) -> StateSnapshot {
        let entries = self
            .instances
            .get(contract)
            .map(|inst| {
                inst.state
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            })
            .unwrap_or_default();
        StateSnapshot {
            contract: *contract,
            tx: *tx,
            entries,
        }
    }

    /// Execute one in-block transaction and record its receipt.
    /// Returns the receipt index.
    pub fn execute(&mut self, registry: &ProgramRegistry, tx: &Transaction) -> usize {
        let receipt = self.run(registry, tx);
        self.seen_nonces.insert((tx.signer, tx.nonce));
        let idx = self.receipts.len();
        self.receipt_by_tx.insert(tx.id, idx);
        self.receipts.push(receipt);
        idx
    }

    fn run(&mut self, registry: &ProgramRegistry, tx: &Transaction) -> Receipt {
        let call = match tx.call() {
            Ok(call) => call,
            Err(_) => {
                return Receipt {
                    tx: tx.id,
                    contract: Digest::ZERO,
                    outcome: Outcome::Error("malformed-metadata".into()),
                    pre_state_digest: Digest::ZERO,
                    post_state_digest: Digest::ZERO,
                    op: "".into(),
                    metrics: Vec::new(),
                }
            }
        };

        // Replay protection at the machine level: a (signer, nonce) pair that
        // already executed can never transition state again.
        if self.seen_nonces.contains(&(tx.signer, tx.nonce)) {
            let contract = match &call {
                TxCall::Deploy { .. } => Digest::ZERO,
                TxCall::Call { contract, .. } => *contract,
            };
            let pre = self
                .instances
                .get(&contract)
                .map(|i| i.state.digest())
                .unwrap_or(Digest::ZERO);
            return Receipt {
                tx: tx.id,
                contract,
                outcome: Outcome::GuardFailed("replayed-nonce".into()),
                pre_state_digest: pre,
                post_state_digest: pre,
                op: "".into(),
                metrics: Vec::new(),
            };
        }

        match call {
            TxCall::Deploy { program } => {
                let empty = ContractState::new();
                let pre = empty.digest();
                if registry.get(&program).is_none() {
                    return Receipt {
                        tx: tx.id,
                        contract: tx.id,
                        outcome: Outcome::Error("unknown-program".into()),
                        pre_state_digest: pre,
                        post_state_digest: pre,
                        op: "deploy".into(),
                        metrics: Vec::new(),
                    };
                }
                self.instances.insert(
                    tx.id,
                    Instance {
                        id: tx.id,
                        program,
                        state: empty,
                        deploy_tx: tx.id,
                    },
                );
                Receipt {
                    tx: tx.id,
                    contract: tx.id,
                    outcome: Outcome::Applied,
                    pre_state_digest: pre,
                    post_state_digest: pre,
                    op: "deploy".into(),
                    metrics: Vec::new(),
                }
            }
            TxCall::Call { contract, op } => {
                let Some(inst) = self.instances.get_mut(&contract) else {
                    return Receipt {
                        tx: tx.id,
                        contract,
                        outcome: Outcome::Error("unknown-instance".into()),
                        pre_state_digest: Digest::ZERO,
                        post_state_digest: Digest::ZERO,
                        op: op.clone(),
                        metrics: Vec::new(),
                    };
                };
                let pre = inst.state.digest();
                let code = registry
                    .get(&inst.program)
                    .expect("deployed instance references registered program");
                let Some(entry) = code.entry(&op) else {
                    return Receipt {
                        tx: tx.id,
                        contract,
                        outcome: Outcome::Error("unknown-opcode".into()),
                        pre_state_digest: pre,
                        post_state_digest: pre,
                        op: op.clone(),
                        metrics: Vec::new(),
                    };
                };
                let view = TxView {
                    tx,
                    aux: &tx.payload.aux,
                };
                if let Err(failure) = (entry.req)(&inst.state, &view) {
                    return Receipt {
                        tx: tx.id,
                        contract,
                        outcome: Outcome::GuardFailed(failure.reason),
                        pre_state_digest: pre,
                        post_state_digest: pre,
                        op: op.clone(),
                        metrics: Vec::new(),
                    };
                }
                let mut next = inst.state.clone();
                match (entry.op)(&mut next, &view) {
                    Ok(metrics) => {
                        inst.state = next;
                        Receipt {
                            tx: tx.id,
                            contract,
                            outcome: Outcome::Applied,
                            pre_state_digest: pre,
                            post_state_digest: inst.state.digest(),
                            op: op.clone(),
                            metrics: metrics
                                .into_iter()
                                .map(|(k, v)| (k.to_owned(), v))
                                .collect(),
                        }
                    }
                    Err(failure) => Receipt {
                        tx: tx.id,
                        contract,
                        outcome: Outcome::GuardFailed(failure.reason),
                        pre_state_digest: pre,
                        post_state_digest: pre,
                        op: op.clone(),
                        metrics: Vec::new(),
                    },
                }
            }
        }
    }
}

use crate::ledger::{Ledger, LedgerError, PlayerId};

/// Materialize a confirmed deployment: the instance id (the deploy tx
/// digest) and the empty initial state.
pub fn deploy(ledger: &Ledger, deploy_tx: &Digest) -> Result<(Digest, ContractState), LedgerError> {
    if !ledger.is_confirmed(deploy_tx) {
        return Err(LedgerError::NotConfirmed);
    }
    let honest = ledger.first_honest();
    let view = ledger.player(honest)?;
    let replica = view.confirmed_replica();
    let receipt = replica.receipt_for(deploy_tx).ok_or(LedgerError::NotConfirmed)?;
    if receipt.op != "deploy" || !receipt.outcome.is_applied() {
        return Err(LedgerError::UnknownInstance);
    }
    Ok((*deploy_tx, ContractState::new()))
}

/// Result of a confirmed transfer: the post state and its receipt.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TransferResult {
    pub state: ContractState,
    pub receipt: Receipt,
}

/// Surface the replicated result of a confirmed call transaction.
pub fn transfer(
    ledger: &Ledger,
    instance: &Digest,
    tx: &Digest,
) -> Result<TransferResult, LedgerError> {
    if !ledger.is_confirmed(tx) {
        return Err(LedgerError::NotConfirmed);
    }
    let honest = ledger.first_honest();
    let replica = ledger.player(honest)?.confirmed_replica();
    if !replica.instances.contains_key(instance) {
        return Err(LedgerError::UnknownInstance);
    }
    let receipt = replica.receipt_for(tx).ok_or(LedgerError::NotConfirmed)?.clone();
    if receipt.outcome == Outcome::Error("unknown-opcode".into()) {
        return Err(LedgerError::UnknownOpcode);
    }
    if receipt.outcome == Outcome::Error("unknown-instance".into()) {
        return Err(LedgerError::UnknownInstance);
    }
    let state = ledger
        .read_state_at(honest, tx)
        .map(|snap| snap.to_state())
        .unwrap_or_default();
    Ok(TransferResult { state, receipt })
}

/// One player's confirmed state of an instance (an unauthenticated read).
pub fn access_at(
    ledger: &Ledger,
    player: PlayerId,
    instance: &Digest,
) -> Result<ContractState, LedgerError> {
    let replica = ledger.player(player)?.confirmed_replica();
    replica
        .instances
        .get(instance)
        .map(|inst| inst.state.clone())
        .ok_or(LedgerError::UnknownInstance)
}

/// Robust read of an instance's confirmed state: the plurality answer over
/// all players, which must exceed the ε acceptance fraction.
pub fn access(ledger: &Ledger, instance: &Digest) -> Result<ContractState, LedgerError> {
    let mut counts: BTreeMap<Digest, (usize, ContractState)> = BTreeMap::new();
    for p in 0..ledger.config().total_players {
        if let Ok(state) = access_at(ledger, p, instance) {
            counts.entry(state.digest()).or_insert_with(|| (0, state)).0 += 1;
        }
    }
    let (count, state) = counts
        .into_iter()
        .max_by_key(|(d, (c, _))| (*c, core::cmp::Reverse(*d)))
        .map(|(_, v)| v)
        .ok_or(LedgerError::UnknownInstance)?;
    let (num, den) = ledger.config().epsilon;
    if (count as u64) * (den as u64) <= (num as u64) * (ledger.config().total_players as u64) {
        return Err(LedgerError::UnknownInstance);
    }
    Ok(state)
}

/// Public legality of a transfer; see [`Ledger::inspect`].
pub fn inspect(ledger: &Ledger, tx: &Digest) -> bool {
    ledger.inspect(tx)
}

/// Test program: stores `aux` under a counter key, guard admits everything.
#[cfg(test)]
pub(crate) fn kv_test_program() -> Bytecode {
    fn guard(_: &ContractState, _: &TxView<'_>) -> Result<(), GuardFailure> {
        Ok(())
    }
    fn put(state: &mut ContractState, view: &TxView<'_>) -> Result<OpMetrics, GuardFailure> {
        let n = state.len() as u64;
        state.set(n.to_be_bytes().to_vec(), view.aux.to_vec());
        Ok(Vec::new())
    }
    Bytecode {
        name: "kv-test",
        entries: alloc::vec![OpcodeEntry {
            name: "put",
            req: guard,
            op: put,
        }],
    }
}
