//! Deterministic multi-player simulated blockchain.
//!
//! Consensus is an idealized round-based quorum: every honest player
//! includes all pending transactions in canonical (nonce, id) order each
//! round, so honest chains are bit-identical by construction. Adversary
//! players run one of three scripted strategies — withholding blocks,
//! censoring transactions from their own blocks, or serving divergent
//! states to queries. Robustness-breaking faults can be injected to check
//! that the audits and security games notice.

pub mod trace;
pub mod tx;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::contract::{ProgramRegistry, Replica, StateSnapshot};
use crate::primitives::hash::expand;
use trace::{Confirmation, ExecOp, RoundRow, Submission, Trace};
use tx::{Transaction, TxCall};

pub type PlayerId = u32;

/// Scripted adversary behaviors; exactly the capabilities the misbehavior
/// events in the security arguments require.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AdversaryMode {
    /// Stop extending the local chain.
    Withhold,
    /// Extend the chain but leave all pending transactions out.
    Censor,
    /// Maintain an honest chain but lie when queried for states or triggers.
    Equivocate,
}

/// Robustness assumptions that can be switched off (negative controls).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct FaultSet {
    /// Honest players adopt adversary-claimed post-states instead of
    /// replicating execution independently.
    pub replication_disabled: bool,
    /// Depth-k confirmation is skipped and reads trust any single player.
    pub confirmation_disabled: bool,
    /// Signature verification accepts everything.
    pub signature_check_disabled: bool,
}

impl FaultSet {
    pub const NONE: FaultSet = FaultSet {
        replication_disabled: false,
        confirmation_disabled: false,
        signature_check_disabled: false,
    };

    pub fn any(&self) -> bool {
        self.replication_disabled || self.confirmation_disabled || self.signature_check_disabled
    }
}

/// Ledger parameters. `epsilon` is the acceptance-fraction threshold as an
/// exact rational (numerator, denominator); the default is 1/2.
#[derive(Clone, Debug)]
pub struct LedgerConfig {
    pub total_players: u32,
    pub adversaries: BTreeMap<PlayerId, AdversaryMode>,
    /// Confirmation depth in blocks.
    pub k: u64,
    /// Liveness bound in rounds.
    pub delta: u64,
    pub epsilon: (u32, u32),
    pub seed: u64,
}

impl LedgerConfig {
    pub fn honest(total_players: u32, k: u64, delta: u64, seed: u64) -> LedgerConfig {
        LedgerConfig {
            total_players,
            adversaries: BTreeMap::new(),
            k,
            delta,
            epsilon: (1, 2),
            seed,
        }
    }

    pub fn with_adversaries(
        mut self,
        players: &[PlayerId],
        mode: AdversaryMode,
    ) -> LedgerConfig {
        for p in players {
            self.adversaries.insert(*p, mode);
        }
        self
    }

    pub fn is_adversary(&self, player: PlayerId) -> bool {
        self.adversaries.contains_key(&player)
    }

    /// Whether the honest-behavior precondition |adversaries|/total < ε holds.
    pub fn adversary_fraction_ok(&self) -> bool {
        let (num, den) = self.epsilon;
        (self.adversaries.len() as u64) * (den as u64) < (num as u64) * (self.total_players as u64)
    }

    fn validate(&self) -> Result<(), LedgerError> {
        if self.total_players == 0 {
            return Err(LedgerError::InvalidConfig("total_players must be positive"));
        }
        if self.k == 0 || self.delta == 0 {
            return Err(LedgerError::InvalidConfig("k and delta must be at least 1"));
        }
        if self.epsilon.1 == 0 || self.epsilon.0 > self.epsilon.1 {
            return Err(LedgerError::InvalidConfig("epsilon must lie in [0, 1]"));
        }
        if self.adversaries.keys().any(|p| *p >= self.total_players) {
            return Err(LedgerError::InvalidConfig("adversary id out of range"));
        }
        if self.adversaries.len() as u32 >= self.total_players {
            return Err(LedgerError::InvalidConfig("at least one honest player required"));
        }
        Ok(())
    }
}

/// A block in one player's chain.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub height: u64,
    pub parent: Digest,
    pub txs: Vec<Transaction>,
    pub state_root: Digest,
}

impl Canon for Block {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.height).digest(&self.parent);
        enc.list_len(self.txs.len());
        for tx in &self.txs {
            tx.encode_into(enc);
        }
        enc.digest(&self.state_root);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let height = dec.u64()?;
        let parent = dec.digest()?;
        let n = dec.list_len()?;
        let mut txs = Vec::with_capacity(n);
        for _ in 0..n {
            txs.push(Transaction::decode_from(dec)?);
        }
        Ok(Block {
            height,
            parent,
            txs,
            state_root: dec.digest()?,
        })
    }
}

impl Block {
    pub fn digest(&self) -> Digest {
        self.canon_digest()
    }
}

/// One player's local view: chain, mempool, and replicas.
pub struct PlayerView {
    pub player: PlayerId,
    pub chain: Vec<Block>,
    pub pending: BTreeMap<(u64, Digest), Transaction>,
    block_digests: Vec<Digest>,
    /// Chained digest over block digests: prefix[h] covers heights 0..=h.
    prefix_digests: Vec<Digest>,
    /// Executes at inclusion; provides each new block's state root.
    tip_replica: Replica,
    /// Lags `k` blocks behind; all queries are answered from here.
    confirmed_replica: Replica,
    tx_heights: BTreeMap<Digest, u64>,
    /// Per confirmed tx: (contract, post-state snapshot digest).
    confirmed_posts: BTreeMap<Digest, (Digest, Digest)>,
    confirmed_order: Vec<Digest>,
}

impl PlayerView {
    fn new(player: PlayerId, genesis: Block) -> PlayerView {
        let genesis_digest = genesis.digest();
        PlayerView {
            player,
            chain: alloc::vec![genesis],
            pending: BTreeMap::new(),
            block_digests: alloc::vec![genesis_digest],
            prefix_digests: alloc::vec![genesis_digest],
            tip_replica: Replica::new(),
            confirmed_replica: Replica::new(),
            tx_heights: BTreeMap::new(),
            confirmed_posts: BTreeMap::new(),
            confirmed_order: Vec::new(),
        }
    }

    pub fn tip_height(&self) -> u64 {
        (self.chain.len() - 1) as u64
    }

    pub fn tip_digest(&self) -> Digest {
        *self.block_digests.last().unwrap()
    }

    pub fn confirmed_replica(&self) -> &Replica {
        &self.confirmed_replica
    }

    fn push_block(&mut self, block: Block) {
        let d = block.digest();
        let mut enc = Encoder::new();
        enc.digest(self.prefix_digests.last().unwrap()).digest(&d);
        self.prefix_digests.push(enc.digest_value());
        self.block_digests.push(d);
        for tx in &block.txs {
            self.tx_heights.insert(tx.id, block.height);
        }
        self.chain.push(block);
    }

    /// Digest of the confirmed prefix (heights ≤ tip − depth).
    fn confirmed_prefix_digest(&self, depth: u64) -> Digest {
        let tip = self.tip_height();
        let h = tip.saturating_sub(depth);
        self.prefix_digests[h as usize]
    }
}

/// Outcome of submitting a transaction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SubmitOutcome {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RejectReason {
    BadSignature,
    ReplayedNonce,
    Malformed,
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("invalid ledger configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("transaction is not confirmed")]
    NotConfirmed,
    #[error("no confirmed transaction produced this state")]
    UnknownState,
    #[error("unknown player")]
    UnknownPlayer,
    #[error("unknown contract instance")]
    UnknownInstance,
    #[error("transaction names no opcode entry of the instance")]
    UnknownOpcode,
}

struct SubmittedTx {
    tx: Transaction,
    round: u64,
}

/// The simulated blockchain: all player views plus shared bookkeeping.
pub struct Ledger {
    config: LedgerConfig,
    registry: ProgramRegistry,
    players: Vec<PlayerView>,
    round: u64,
    accounts: BTreeMap<Digest, Vec<u8>>,
    adversary_accounts: BTreeSet<Digest>,
    used_nonces: BTreeSet<(Digest, u64)>,
    submitted: BTreeMap<Digest, SubmittedTx>,
    snapshots: BTreeMap<Digest, StateSnapshot>,
    trace: Trace,
    faults: FaultSet,
    #[allow(dead_code)]
    rng: ChaCha20Rng,
}

impl Ledger {
    pub fn new(config: LedgerConfig, registry: ProgramRegistry) -> Result<Ledger, LedgerError> {
        config.validate()?;
        let genesis = Block {
            height: 0,
            parent: Digest::ZERO,
            txs: Vec::new(),
            state_root: Replica::new().state_root(),
        };
        let players = (0..config.total_players)
            .map(|p| PlayerView::new(p, genesis.clone()))
            .collect();
        let rng = ChaCha20Rng::seed_from_u64(config.seed);
        Ok(Ledger {
            config,
            registry,
            players,
            round: 0,
            accounts: BTreeMap::new(),
            adversary_accounts: BTreeSet::new(),
            used_nonces: BTreeSet::new(),
            submitted: BTreeMap::new(),
            snapshots: BTreeMap::new(),
            trace: Trace::default(),
            faults: FaultSet::NONE,
            rng,
        })
    }

    pub fn with_faults(mut self, faults: FaultSet) -> Ledger {
        self.faults = faults;
        self
    }

    pub fn faults(&self) -> FaultSet {
        self.faults
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn registry(&self) -> &ProgramRegistry {
        &self.registry
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn current_round(&self) -> u64 {
        self.round
    }

    pub fn player(&self, player: PlayerId) -> Result<&PlayerView, LedgerError> {
        self.players
            .get(player as usize)
            .ok_or(LedgerError::UnknownPlayer)
    }

    pub fn players(&self) -> impl Iterator<Item = &PlayerView> {
        self.players.iter()
    }

    /// Lowest-indexed honest player; the canonical replica for queries that
    /// need a single honest reference.
    pub fn first_honest(&self) -> PlayerId {
        (0..self.config.total_players)
            .find(|p| !self.config.is_adversary(*p))
            .expect("config guarantees at least one honest player")
    }

    pub fn transaction(&self, tx: &Digest) -> Option<&Transaction> {
        self.submitted.get(tx).map(|s| &s.tx)
    }

    pub fn snapshot(&self, digest: &Digest) -> Option<&StateSnapshot> {
        self.snapshots.get(digest)
    }

    fn confirm_depth(&self) -> u64 {
        if self.faults.confirmation_disabled {
            0
        } else {
            self.config.k
        }
    }

    /// Register an account so submitted transactions can be verified.
    pub fn register_account(&mut self, verification_key: &[u8], honest: bool) -> Digest {
        let id = tx::signer_id(verification_key);
        self.accounts.insert(id, verification_key.to_vec());
        if !honest {
            self.adversary_accounts.insert(id);
        }
        id
    }

    /// Submit a transaction to every player's pending set.
    pub fn submit(&mut self, tx: &Transaction) -> SubmitOutcome {
        if !tx.well_formed() {
            return SubmitOutcome::Rejected(RejectReason::Malformed);
        }
        if !self.faults.signature_check_disabled {
            let Some(vk) = self.accounts.get(&tx.signer) else {
                return SubmitOutcome::Rejected(RejectReason::BadSignature);
            };
            if !tx.verify_signature(vk) {
                return SubmitOutcome::Rejected(RejectReason::BadSignature);
            }
        }
        if self.used_nonces.contains(&(tx.signer, tx.nonce)) {
            return SubmitOutcome::Rejected(RejectReason::ReplayedNonce);
        }
        self.used_nonces.insert((tx.signer, tx.nonce));
        let honest = !self.adversary_accounts.contains(&tx.signer);
        self.submitted.insert(
            tx.id,
            SubmittedTx {
                tx: tx.clone(),
                round: self.round,
            },
        );
        self.trace.submissions.insert(
            tx.id,
            Submission {
                round: self.round,
                signer: tx.signer,
                honest,
            },
        );
        for view in &mut self.players {
            view.pending.insert((tx.nonce, tx.id), tx.clone());
        }
        SubmitOutcome::Accepted
    }

    /// Whether the replication fault actively poisons state this run.
    fn poison_active(&self) -> bool {
        self.faults.replication_disabled && !self.config.adversaries.is_empty()
    }

    /// The poisoned-state variant a player adopts when replication is
    /// disabled: adversaries and even honest players echo claim A, odd
    /// honest players receive claim B.
    fn poison_variant(&self, player: PlayerId) -> u8 {
        if self.config.is_adversary(player) || player % 2 == 0 {
            0
        } else {
            1
        }
    }

    fn poison_value(height: u64, variant: u8, tx: &Digest) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(height).u8(variant).digest(tx);
        expand(b"covenant/poison", &enc.finish(), 16)
    }

    fn execute_into(
        replica: &mut Replica,
        registry: &ProgramRegistry,
        txs: &[Transaction],
        poison: Option<(u64, u8)>,
    ) {
        for tx in txs {
            replica.execute(registry, tx);
            if let (Some((height, variant)), Ok(TxCall::Call { contract, .. })) =
                (poison, tx.call())
            {
                if let Some(inst) = replica.instances.get_mut(&contract) {
                    inst.state
                        .set(b"!claimed-state".to_vec(), Self::poison_value(height, variant, &tx.id));
                }
            }
        }
    }

    /// Advance one round: every non-withholding player appends a block and
    /// the confirmation pipeline catches up. Returns each player's new block.
    pub fn advance_round(&mut self) -> Vec<(PlayerId, Option<Block>)> {
        self.round += 1;
        let depth = self.confirm_depth();
        let poison = self.poison_active();
        let mut out = Vec::with_capacity(self.players.len());

        for idx in 0..self.players.len() {
            let player = idx as PlayerId;
            let mode = self.config.adversaries.get(&player).copied();

            if mode == Some(AdversaryMode::Withhold) {
                out.push((player, None));
                continue;
            }

            let height = self.players[idx].tip_height() + 1;
            let txs: Vec<Transaction> = if mode == Some(AdversaryMode::Censor) {
                // Censored transactions stay pending forever at this player.
                Vec::new()
            } else {
                let drained: Vec<_> = core::mem::take(&mut self.players[idx].pending)
                    .into_values()
                    .collect();
                drained
            };

            let poison_cfg = poison.then(|| (height, self.poison_variant(player)));
            let view = &mut self.players[idx];
            Self::execute_into(&mut view.tip_replica, &self.registry, &txs, poison_cfg);
            let block = Block {
                height,
                parent: view.tip_digest(),
                txs,
                state_root: view.tip_replica.state_root(),
            };
            view.push_block(block.clone());
            out.push((player, Some(block)));
        }

        // Confirmation pipeline: execute the block that just reached depth k
        // into the confirmed replica and record attested confirmations.
        for idx in 0..self.players.len() {
            let player = idx as PlayerId;
            let mode = self.config.adversaries.get(&player).copied();
            if mode == Some(AdversaryMode::Withhold) {
                continue;
            }
            let tip = self.players[idx].tip_height();
            if tip < depth {
                continue;
            }
            let confirm_height = tip - depth;
            if confirm_height == 0 {
                continue; // genesis carries no transactions
            }
            let txs = self.players[idx].chain[confirm_height as usize].txs.clone();
            let poison_cfg = poison.then(|| (confirm_height, self.poison_variant(player)));
            let equivocating =
                mode == Some(AdversaryMode::Equivocate) && !self.faults.replication_disabled;

            for tx in &txs {
                let view = &mut self.players[idx];
                view.confirmed_replica.execute(&self.registry, tx);
                if let (Some((h, variant)), Ok(TxCall::Call { contract, .. })) =
                    (poison_cfg, tx.call())
                {
                    if let Some(inst) = view.confirmed_replica.instances.get_mut(&contract) {
                        inst.state
                            .set(b"!claimed-state".to_vec(), Self::poison_value(h, variant, &tx.id));
                    }
                }
                let contract = view
                    .confirmed_replica
                    .receipt_for(&tx.id)
                    .map(|r| r.contract)
                    .unwrap_or(Digest::ZERO);
                let snap = view.confirmed_replica.snapshot_for(&tx.id, &contract);
                let true_digest = snap.digest();
                view.confirmed_posts.insert(tx.id, (contract, true_digest));
                view.confirmed_order.push(tx.id);
                self.snapshots.insert(true_digest, snap.clone());

                let attested = if equivocating {
                    let mutated = Self::equivocated_snapshot(player, &snap);
                    let d = mutated.digest();
                    self.snapshots.insert(d, mutated);
                    d
                } else {
                    true_digest
                };
                self.trace
                    .confirmations
                    .entry(tx.id)
                    .or_default()
                    .insert(player, Confirmation { round: self.round, snapshot: attested });

                // Canonical execution metrics come from the first honest player.
                if player == self.first_honest() {
                    if let Some(receipt) = self.players[idx].confirmed_replica.receipt_for(&tx.id)
                    {
                        if receipt.outcome.is_applied() {
                            self.trace.exec_ops.push(ExecOp {
                                height: confirm_height,
                                tx: tx.id,
                                kind: receipt.op.clone(),
                                count: 1,
                            });
                            for (k, v) in &receipt.metrics {
                                self.trace.exec_ops.push(ExecOp {
                                    height: confirm_height,
                                    tx: tx.id,
                                    kind: k.clone(),
                                    count: *v,
                                });
                            }
                        }
                    }
                }
            }
        }

        for view in &self.players {
            self.trace.rounds.push(RoundRow {
                round: self.round,
                player: view.player,
                tip: view.tip_digest(),
                confirmed_prefix: view.confirmed_prefix_digest(depth),
            });
        }

        out
    }

    /// Run enough rounds for anything pending to confirm: k + 1.
    pub fn advance_until_confirmed(&mut self) {
        for _ in 0..=self.config.k {
            self.advance_round();
        }
    }

    fn equivocated_snapshot(player: PlayerId, snap: &StateSnapshot) -> StateSnapshot {
        let mut mutated = snap.clone();
        let mut enc = Encoder::new();
        enc.u32(player).digest(&snap.tx);
        let forged = expand(b"covenant/equivocation", &enc.finish(), 16);
        let key = b"!equivocation".to_vec();
        match mutated
            .entries
            .binary_search_by(|(k, _)| k.as_slice().cmp(key.as_slice()))
        {
            Ok(i) => mutated.entries[i].1 = forged,
            Err(i) => mutated.entries.insert(i, (key, forged)),
        }
        mutated
    }

    /// Whether `tx` sits at least `depth` blocks deep at `player`.
    pub fn depth_reached(&self, player: PlayerId, tx: &Digest, depth: u64) -> bool {
        let Ok(view) = self.player(player) else {
            return false;
        };
        match view.tx_heights.get(tx) {
            Some(h) => view.tip_height() >= h + depth,
            None => false,
        }
    }

    pub fn is_confirmed_at(&self, player: PlayerId, tx: &Digest) -> bool {
        self.depth_reached(player, tx, self.confirm_depth())
            && self
                .player(player)
                .map(|v| v.confirmed_posts.contains_key(tx))
                .unwrap_or(false)
    }

    /// Quorum confirmation: more than an ε fraction of players hold the
    /// transaction k deep (any single player suffices when confirmation is
    /// disabled by fault injection).
    pub fn is_confirmed(&self, tx: &Digest) -> bool {
        let holders = (0..self.config.total_players)
            .filter(|p| self.is_confirmed_at(*p, tx))
            .count();
        if self.faults.confirmation_disabled {
            holders >= 1
        } else {
            self.fraction_exceeds(holders)
        }
    }

    fn fraction_exceeds(&self, count: usize) -> bool {
        let (num, den) = self.config.epsilon;
        (count as u64) * (den as u64) > (num as u64) * (self.config.total_players as u64)
    }

    /// The state snapshot `player` serves for `tx` — diverged if the player
    /// is an equivocator.
    pub fn read_state_at(
        &self,
        player: PlayerId,
        tx: &Digest,
    ) -> Result<StateSnapshot, LedgerError> {
        let view = self.player(player)?;
        if !self.is_confirmed_at(player, tx) {
            return Err(LedgerError::NotConfirmed);
        }
        let (_, digest) = view.confirmed_posts.get(tx).ok_or(LedgerError::NotConfirmed)?;
        let snap = self.snapshots.get(digest).ok_or(LedgerError::NotConfirmed)?;
        if self.config.adversaries.get(&player) == Some(&AdversaryMode::Equivocate)
            && !self.faults.replication_disabled
        {
            Ok(Self::equivocated_snapshot(player, snap))
        } else {
            Ok(snap.clone())
        }
    }

    /// Robust read: the plurality answer among confirming players, required
    /// to exceed the ε fraction (first answer wins when confirmation is
    /// disabled by fault injection).
    pub fn read_state(&self, tx: &Digest) -> Result<StateSnapshot, LedgerError> {
        let mut counts: BTreeMap<Digest, usize> = BTreeMap::new();
        let mut first: Option<StateSnapshot> = None;
        for p in 0..self.config.total_players {
            if let Ok(snap) = self.read_state_at(p, tx) {
                *counts.entry(snap.digest()).or_default() += 1;
                if first.is_none() {
                    first = Some(snap);
                }
            }
        }
        if self.faults.confirmation_disabled {
            return first.ok_or(LedgerError::NotConfirmed);
        }
        let (digest, count) = counts
            .iter()
            .max_by_key(|(d, c)| (**c, core::cmp::Reverse(**d)))
            .map(|(d, c)| (*d, *c))
            .ok_or(LedgerError::NotConfirmed)?;
        if !self.fraction_exceeds(count) {
            return Err(LedgerError::NotConfirmed);
        }
        Ok(self.snapshots.get(&digest).unwrap().clone())
    }

    /// The transaction `player` claims triggered `snapshot`. Honest players
    /// verify the snapshot against their own confirmed history; equivocators
    /// answer with a decoy when they can.
    pub fn read_tx_at(
        &self,
        player: PlayerId,
        snapshot: &StateSnapshot,
    ) -> Result<Transaction, LedgerError> {
        let view = self.player(player)?;
        let digest = snapshot.digest();
        let (_, true_digest) = view
            .confirmed_posts
            .get(&snapshot.tx)
            .ok_or(LedgerError::UnknownState)?;
        let equivocating = self.config.adversaries.get(&player)
            == Some(&AdversaryMode::Equivocate)
            && !self.faults.replication_disabled;
        let recognized = digest == *true_digest
            || (equivocating && {
                let base = self.snapshots.get(true_digest).unwrap();
                Self::equivocated_snapshot(player, base).digest() == digest
            });
        if !recognized {
            return Err(LedgerError::UnknownState);
        }
        if equivocating {
            // Latest confirmed transaction other than the true trigger.
            if let Some(decoy) = view
                .confirmed_order
                .iter()
                .rev()
                .find(|t| **t != snapshot.tx)
            {
                return Ok(self.submitted.get(decoy).unwrap().tx.clone());
            }
        }
        Ok(self.submitted.get(&snapshot.tx).unwrap().tx.clone())
    }

    /// Robust inverse read: plurality + quorum over players' answers.
    pub fn read_tx(&self, snapshot: &StateSnapshot) -> Result<Transaction, LedgerError> {
        let mut counts: BTreeMap<Digest, (usize, Transaction)> = BTreeMap::new();
        let mut first: Option<Transaction> = None;
        for p in 0..self.config.total_players {
            if let Ok(tx) = self.read_tx_at(p, snapshot) {
                counts.entry(tx.id).or_insert_with(|| (0, tx.clone())).0 += 1;
                if first.is_none() {
                    first = Some(tx);
                }
            }
        }
        if self.faults.confirmation_disabled {
            return first.ok_or(LedgerError::UnknownState);
        }
        let best = counts
            .iter()
            .max_by_key(|(d, (c, _))| (*c, core::cmp::Reverse(**d)))
            .map(|(_, (c, tx))| (*c, tx.clone()))
            .ok_or(LedgerError::UnknownState)?;
        if !self.fraction_exceeds(best.0) {
            return Err(LedgerError::UnknownState);
        }
        Ok(best.1)
    }

    /// Would the (possibly fault-weakened) ledger accept `digest` as the
    /// confirmed state for `tx`?
    pub fn accept_state(&self, tx: &Digest, digest: &Digest) -> bool {
        let attesting = (0..self.config.total_players)
            .filter(|p| {
                self.read_state_at(*p, tx)
                    .map(|s| s.digest() == *digest)
                    .unwrap_or(false)
            })
            .count();
        if self.faults.confirmation_disabled {
            attesting >= 1
        } else {
            self.fraction_exceeds(attesting)
        }
    }

    /// Would the ledger accept `candidate` as the trigger of `snapshot`?
    pub fn accept_tx_link(&self, snapshot: &StateSnapshot, candidate: &Digest) -> bool {
        let attesting = (0..self.config.total_players)
            .filter(|p| {
                self.read_tx_at(*p, snapshot)
                    .map(|t| t.id == *candidate)
                    .unwrap_or(false)
            })
            .count();
        if self.faults.confirmation_disabled {
            attesting >= 1
        } else {
            self.fraction_exceeds(attesting)
        }
    }

    /// Players whose chains hold `tx` at least `k` deep within `delta`
    /// rounds of its submission.
    pub fn find_player(&self, tx: &Digest, k: u64, delta: u64) -> Vec<PlayerId> {
        let Some(sub) = self.submitted.get(tx) else {
            return Vec::new();
        };
        let deadline = sub.round + delta;
        (0..self.config.total_players)
            .filter(|p| {
                let view = &self.players[*p as usize];
                match view.tx_heights.get(tx) {
                    // Height h reaches depth k when the chain tip reaches
                    // h + k; tips grow one block per round.
                    Some(h) => view.tip_height() >= h + k && h + k <= deadline,
                    None => false,
                }
            })
            .collect()
    }

    /// All transactions at least `k` deep in `player`'s view.
    pub fn find_tx(&self, player: PlayerId, k: u64) -> Result<Vec<Transaction>, LedgerError> {
        let view = self.player(player)?;
        let tip = view.tip_height();
        let mut out = Vec::new();
        for block in &view.chain {
            if block.height + k <= tip {
                out.extend(block.txs.iter().cloned());
            }
        }
        Ok(out)
    }

    /// Public legality of a transfer: quorum-confirmed, signature valid, and
    /// the guard held at application time per the recorded receipt.
    pub fn inspect(&self, tx: &Digest) -> bool {
        let Some(sub) = self.submitted.get(tx) else {
            return false;
        };
        if !self.is_confirmed(tx) {
            return false;
        }
        if !self.faults.signature_check_disabled {
            let Some(vk) = self.accounts.get(&sub.tx.signer) else {
                return false;
            };
            if !sub.tx.verify_signature(vk) {
                return false;
            }
        }
        let honest = self.first_honest();
        self.players[honest as usize]
            .confirmed_replica
            .receipt_for(tx)
            .map(|r| r.outcome.is_applied())
            .unwrap_or(false)
    }

    /// Re-execute a player's chain from genesis on a fresh replica; the
    /// determinism check for replicated state.
    pub fn replay_chain(&self, player: PlayerId) -> Result<Replica, LedgerError> {
        let view = self.player(player)?;
        let mut replica = Replica::new();
        for block in &view.chain {
            for tx in &block.txs {
                replica.execute(&self.registry, tx);
            }
        }
        Ok(replica)
    }

    /// Honest local execution: replay the player's chain up to and
    /// including `tx` and snapshot the contract it touched. This is the
    /// expected state independent of any replica poisoning.
    pub fn replay_snapshot(
        &self,
        player: PlayerId,
        tx: &Digest,
    ) -> Result<StateSnapshot, LedgerError> {
        let view = self.player(player)?;
        let mut replica = Replica::new();
        for block in &view.chain {
            for t in &block.txs {
                replica.execute(&self.registry, t);
                if t.id == *tx {
                    let contract = replica
                        .receipt_for(tx)
                        .map(|r| r.contract)
                        .unwrap_or(Digest::ZERO);
                    return Ok(replica.snapshot_for(tx, &contract));
                }
            }
        }
        Err(LedgerError::NotConfirmed)
    }

    /// Record a read operation in the trace (gas accounting).
    pub fn record_read(&mut self, tx: &Digest) {
        self.trace.exec_ops.push(ExecOp {
            height: self.players[self.first_honest() as usize].tip_height(),
            tx: *tx,
            kind: String::from("read"),
            count: 1,
        });
    }
}
