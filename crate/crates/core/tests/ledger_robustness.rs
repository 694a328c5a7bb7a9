//! End-to-end checks of the simulated ledger: submission, confirmation,
//! robust reads, player/transaction lookups, and the persistence/liveness
//! audits under every built-in adversary strategy.

use covenant_core::codec::Digest;
use covenant_core::contract::{
    Bytecode, ContractState, GuardFailure, OpMetrics, OpcodeEntry, ProgramRegistry, StateSnapshot,
    TxView,
};
use covenant_core::ledger::trace::{audit_liveness, audit_persistence};
use covenant_core::ledger::tx::{Account, TxCall};
use covenant_core::ledger::{
    AdversaryMode, FaultSet, Ledger, LedgerConfig, LedgerError, RejectReason, SubmitOutcome,
};

fn kv_program() -> Bytecode {
    fn guard(_: &ContractState, _: &TxView<'_>) -> Result<(), GuardFailure> {
        Ok(())
    }
    fn put(state: &mut ContractState, view: &TxView<'_>) -> Result<OpMetrics, GuardFailure> {
        let n = state.len() as u64;
        state.set(n.to_be_bytes().to_vec(), view.aux.to_vec());
        Ok(Vec::new())
    }
    Bytecode {
        name: "kv",
        entries: vec![OpcodeEntry {
            name: "put",
            req: guard,
            op: put,
        }],
    }
}

fn registry() -> ProgramRegistry {
    let mut r = ProgramRegistry::new();
    r.register(kv_program());
    r
}

struct World {
    ledger: Ledger,
    account: Account,
    contract: Digest,
}

/// A five-player world (or fewer) with a deployed kv contract.
fn world(config: LedgerConfig) -> World {
    let mut ledger = Ledger::new(config, registry()).unwrap();
    let mut account = Account::from_seed(7);
    ledger.register_account(&account.verification_key(), true);
    let deploy = account.sign_tx(
        &TxCall::Deploy {
            program: "kv".into(),
        },
        Vec::new(),
    );
    assert_eq!(ledger.submit(&deploy), SubmitOutcome::Accepted);
    ledger.advance_until_confirmed();
    World {
        ledger,
        account,
        contract: deploy.id,
    }
}

fn put_tx(world: &mut World, value: &[u8]) -> Digest {
    let tx = world.account.sign_tx(
        &TxCall::Call {
            contract: world.contract,
            op: "put".into(),
        },
        value.to_vec(),
    );
    assert_eq!(world.ledger.submit(&tx), SubmitOutcome::Accepted);
    tx.id
}

fn five_player_config(seed: u64) -> LedgerConfig {
    LedgerConfig::honest(5, 3, 6, seed)
}

#[test]
fn honest_tx_accepted_and_confirmed_after_k_plus_one_rounds() {
    let mut w = world(LedgerConfig::honest(3, 3, 6, 0));
    let tx = put_tx(&mut w, b"v");
    for _ in 0..=3 {
        w.ledger.advance_round();
    }
    for p in 0..3 {
        assert!(w.ledger.depth_reached(p, &tx, 3), "player {p}");
        assert!(w.ledger.is_confirmed_at(p, &tx));
    }
}

#[test]
fn flipped_signature_byte_is_rejected() {
    let mut w = world(five_player_config(0));
    let mut tx = w.account.sign_tx(
        &TxCall::Call {
            contract: w.contract,
            op: "put".into(),
        },
        b"v".to_vec(),
    );
    tx.signature[5] ^= 1;
    // Re-derive the id so the transaction is well-formed but mis-signed.
    let tx = covenant_core::ledger::tx::Transaction::with_signature(
        tx.signer,
        tx.nonce,
        &tx.call().unwrap(),
        tx.payload.aux.clone(),
        tx.signature.clone(),
    );
    assert_eq!(
        w.ledger.submit(&tx),
        SubmitOutcome::Rejected(RejectReason::BadSignature)
    );
}

#[test]
fn replay_oracle_rejects_every_accepted_tx() {
    let mut w = world(five_player_config(1));
    let mut accepted = Vec::new();
    for i in 0..20u8 {
        let tx = w.account.sign_tx(
            &TxCall::Call {
                contract: w.contract,
                op: "put".into(),
            },
            vec![i],
        );
        assert_eq!(w.ledger.submit(&tx), SubmitOutcome::Accepted);
        accepted.push(tx);
        if i % 5 == 0 {
            w.ledger.advance_round();
        }
    }
    w.ledger.advance_until_confirmed();
    for tx in &accepted {
        assert_eq!(
            w.ledger.submit(tx),
            SubmitOutcome::Rejected(RejectReason::ReplayedNonce)
        );
    }
}

#[test]
fn empty_round_appends_blocks_without_new_confirmations() {
    let mut w = world(five_player_config(2));
    let confirmed_root_before = w
        .ledger
        .player(0)
        .unwrap()
        .confirmed_replica()
        .state_root();
    let confirmations_before = w.ledger.trace().confirmations.len();
    let blocks = w.ledger.advance_round();
    assert!(blocks.iter().all(|(_, b)| b.as_ref().unwrap().txs.is_empty()));
    assert_eq!(
        w.ledger
            .player(0)
            .unwrap()
            .confirmed_replica()
            .state_root(),
        confirmed_root_before
    );
    assert_eq!(w.ledger.trace().confirmations.len(), confirmations_before);
}

#[test]
fn withholding_minority_never_breaks_honest_prefix_agreement() {
    for seed in 0..100u64 {
        let config = five_player_config(seed).with_adversaries(&[3, 4], AdversaryMode::Withhold);
        let mut w = world(config);
        for i in 0..6u8 {
            put_tx(&mut w, &[seed as u8, i]);
            w.ledger.advance_round();
        }
        w.ledger.advance_until_confirmed();
        // Adversary views diverge (stalled tips)...
        assert!(
            w.ledger.player(3).unwrap().tip_height() < w.ledger.player(0).unwrap().tip_height()
        );
        // ...but honest chains agree block for block.
        let honest: Vec<_> = (0..3).map(|p| w.ledger.player(p).unwrap()).collect();
        for pair in honest.windows(2) {
            assert_eq!(pair[0].tip_digest(), pair[1].tip_digest(), "seed {seed}");
            let min_tip = pair[0].tip_height().min(pair[1].tip_height());
            for h in 0..=min_tip.saturating_sub(3) {
                assert_eq!(
                    pair[0].chain[h as usize].digest(),
                    pair[1].chain[h as usize].digest()
                );
            }
        }
    }
}

#[test]
fn read_state_identical_across_honest_players() {
    let mut w = world(five_player_config(3));
    let tx = put_tx(&mut w, b"payload");
    w.ledger.advance_until_confirmed();
    let snaps: Vec<StateSnapshot> = (0..5)
        .map(|p| w.ledger.read_state_at(p, &tx).unwrap())
        .collect();
    for pair in snaps.windows(2) {
        assert_eq!(pair[0].canon_bytes_eq(&pair[1]), true);
    }
}

// Byte-level equality helper so the assertion really is "byte-identical".
trait CanonEq {
    fn canon_bytes_eq(&self, other: &Self) -> bool;
}

impl CanonEq for StateSnapshot {
    fn canon_bytes_eq(&self, other: &Self) -> bool {
        use covenant_core::codec::Canon;
        self.canon_bytes() == other.canon_bytes()
    }
}

#[test]
fn unconfirmed_tx_reads_not_confirmed() {
    let mut w = world(five_player_config(4));
    let tx = put_tx(&mut w, b"v");
    // One round is not enough to reach depth k = 3.
    w.ledger.advance_round();
    assert_eq!(w.ledger.read_state(&tx), Err(LedgerError::NotConfirmed));
}

#[test]
fn read_tx_inverts_read_state_over_fifty_random_txs() {
    let mut w = world(five_player_config(5));
    let mut txs = Vec::new();
    for i in 0..50u8 {
        txs.push(put_tx(&mut w, &[i, i ^ 0x5a]));
        if i % 7 == 0 {
            w.ledger.advance_round();
        }
    }
    w.ledger.advance_until_confirmed();
    for tx in &txs {
        let snap = w.ledger.read_state(tx).unwrap();
        let round_trip = w.ledger.read_tx(&snap).unwrap();
        assert_eq!(round_trip.id, *tx);
        // And the other direction: the snapshot of the recovered tx is the
        // same snapshot.
        let again = w.ledger.read_state(&round_trip.id).unwrap();
        assert_eq!(again.digest(), snap.digest());
    }
}

#[test]
fn fabricated_state_bytes_are_unknown() {
    let mut w = world(five_player_config(6));
    let tx = put_tx(&mut w, b"v");
    w.ledger.advance_until_confirmed();
    let mut snap = w.ledger.read_state(&tx).unwrap();
    snap.entries.push((b"zzz-forged".to_vec(), b"x".to_vec()));
    assert_eq!(w.ledger.read_tx(&snap), Err(LedgerError::UnknownState));
    let unrelated = StateSnapshot {
        contract: Digest::of(b"nope"),
        tx: Digest::of(b"ghost"),
        entries: Vec::new(),
    };
    assert_eq!(w.ledger.read_tx(&unrelated), Err(LedgerError::UnknownState));
}

#[test]
fn confirmed_reads_are_monotonic() {
    let mut w = world(five_player_config(7));
    let tx = put_tx(&mut w, b"fixed");
    w.ledger.advance_until_confirmed();
    let first = w.ledger.read_state(&tx).unwrap();
    for _ in 0..10 {
        w.ledger.advance_round();
        assert_eq!(w.ledger.read_state(&tx).unwrap().digest(), first.digest());
    }
}

#[test]
fn find_player_lists_all_when_fully_honest() {
    let mut w = world(five_player_config(8));
    let tx = put_tx(&mut w, b"v");
    w.ledger.advance_until_confirmed();
    assert_eq!(w.ledger.find_player(&tx, 3, 6), vec![0, 1, 2, 3, 4]);
}

#[test]
fn find_player_with_every_two_adversary_subset() {
    // Enumerate all C(5,2) withholding pairs: always exactly the three
    // honest players remain, and 3/5 exceeds ε = 1/2.
    for a in 0..5u32 {
        for b in (a + 1)..5 {
            let config = five_player_config(9).with_adversaries(&[a, b], AdversaryMode::Withhold);
            let mut w = world(config);
            let tx = put_tx(&mut w, b"v");
            w.ledger.advance_until_confirmed();
            let players = w.ledger.find_player(&tx, 3, 6);
            assert_eq!(players.len(), 3, "adversaries {a},{b}");
            assert!(!players.contains(&a) && !players.contains(&b));
            let (num, den) = w.ledger.config().epsilon;
            assert!(players.len() as u32 * den > num * 5);
        }
    }
}

#[test]
fn find_player_of_unknown_tx_is_empty() {
    let w = world(five_player_config(10));
    assert!(w.ledger.find_player(&Digest::of(b"never"), 3, 6).is_empty());
}

#[test]
fn find_tx_matches_brute_force_chain_scan() {
    let mut w = world(five_player_config(11));
    assert_eq!(w.ledger.find_tx(9, 3), Err(LedgerError::UnknownPlayer));

    let fresh = world(five_player_config(12));
    // Fresh ledger: only the deploy tx is confirmed.
    assert_eq!(fresh.ledger.find_tx(0, 3).unwrap().len(), 1);

    for i in 0..12u8 {
        put_tx(&mut w, &[i]);
        w.ledger.advance_round();
    }
    w.ledger.advance_until_confirmed();

    for p in 0..5 {
        let found = w.ledger.find_tx(p, 3).unwrap();
        // Independent oracle: linear scan over the player's blocks.
        let view = w.ledger.player(p).unwrap();
        let tip = view.tip_height();
        let mut expect = Vec::new();
        for block in &view.chain {
            if tip - block.height >= 3 {
                expect.extend(block.txs.iter().map(|t| t.id));
            }
        }
        assert_eq!(found.iter().map(|t| t.id).collect::<Vec<_>>(), expect);
    }
}

#[test]
fn audits_pass_for_hundred_seeds_under_each_strategy() {
    for mode in [
        AdversaryMode::Withhold,
        AdversaryMode::Censor,
        AdversaryMode::Equivocate,
    ] {
        for seed in 0..100u64 {
            let config = five_player_config(seed).with_adversaries(&[3, 4], mode);
            let mut w = world(config);
            for i in 0..4u8 {
                put_tx(&mut w, &[seed as u8, i]);
                w.ledger.advance_round();
            }
            w.ledger.advance_until_confirmed();
            audit_persistence(w.ledger.config(), w.ledger.trace())
                .unwrap_or_else(|e| panic!("persistence {mode:?} seed {seed}: {e}"));
            audit_liveness(w.ledger.config(), w.ledger.trace())
                .unwrap_or_else(|e| panic!("liveness {mode:?} seed {seed}: {e}"));
        }
    }
}

#[test]
fn hand_edited_trace_fails_persistence() {
    let mut w = world(five_player_config(13));
    let tx = put_tx(&mut w, b"v");
    w.ledger.advance_until_confirmed();
    let mut trace = w.ledger.trace().clone();
    trace
        .confirmations
        .get_mut(&tx)
        .unwrap()
        .get_mut(&1)
        .unwrap()
        .snapshot = Digest::of(b"edited");
    let violation = audit_persistence(w.ledger.config(), &trace).unwrap_err();
    assert_eq!(violation.tx, tx);
}

#[test]
fn liveness_holds_at_delta_k_plus_two_and_fails_at_zero() {
    let mut config = five_player_config(14);
    config.delta = config.k + 2;
    let mut w = world(config);
    put_tx(&mut w, b"v");
    w.ledger.advance_until_confirmed();
    audit_liveness(w.ledger.config(), w.ledger.trace()).unwrap();

    let mut trace = w.ledger.trace().clone();
    let mut zero_delta = w.ledger.config().clone();
    zero_delta.delta = 1;
    // δ = 1 < k + 1 rounds to confirmation: every tx violates.
    assert!(audit_liveness(&zero_delta, &trace).is_err());
    // Degenerate δ = 0 cannot confirm anything either.
    zero_delta.delta = 0;
    trace.submissions.values_mut().for_each(|s| s.round += 0);
    assert!(audit_liveness(&zero_delta, &trace).is_err());
}

#[test]
fn censoring_minority_cannot_stall_liveness() {
    for seed in 0..25u64 {
        let config = five_player_config(seed).with_adversaries(&[1, 3], AdversaryMode::Censor);
        let mut w = world(config);
        put_tx(&mut w, b"targeted");
        w.ledger.advance_until_confirmed();
        audit_liveness(w.ledger.config(), w.ledger.trace()).unwrap();
    }
}

#[test]
fn disabled_replication_fails_audits_within_ten_seeds() {
    let mut failed = false;
    for seed in 0..10u64 {
        let config = five_player_config(seed).with_adversaries(&[3, 4], AdversaryMode::Equivocate);
        let mut ledger = Ledger::new(config, registry())
            .unwrap()
            .with_faults(FaultSet {
                replication_disabled: true,
                ..FaultSet::NONE
            });
        let mut account = Account::from_seed(7);
        ledger.register_account(&account.verification_key(), true);
        let deploy = account.sign_tx(
            &TxCall::Deploy {
                program: "kv".into(),
            },
            Vec::new(),
        );
        ledger.submit(&deploy);
        ledger.advance_until_confirmed();
        let tx = account.sign_tx(
            &TxCall::Call {
                contract: deploy.id,
                op: "put".into(),
            },
            b"v".to_vec(),
        );
        ledger.submit(&tx);
        ledger.advance_until_confirmed();
        if audit_persistence(ledger.config(), ledger.trace()).is_err() {
            failed = true;
            break;
        }
    }
    assert!(failed, "broken replication must be caught");
}
