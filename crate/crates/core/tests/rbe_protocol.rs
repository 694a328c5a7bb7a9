//! Transparent key-curator registration, end to end: forest shape, on-chain
//! registration, openings, encryption programs, stale-view recovery, and
//! soundness against forged openings.

use std::collections::BTreeSet;

use covenant_core::codec::{Canon, Digest};
use covenant_core::contract::{self, Outcome};
use covenant_core::ledger::LedgerConfig;
use covenant_core::primitives::hash::HashKey;
use covenant_core::rbe::{
    eval_program, identity_verify, rbe_dec, rbe_dec_bytes, rbe_enc, rbe_keygen, rbe_setup,
    verify_path, DecOutcome, Direction, LeafPair, MerkleForest, MerkleOpening, ProgramOutput,
    PublicParams, RbeError,
};
use covenant_core::scenario::{RbeScenario, RbeWorld};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

fn hks(n: u64) -> Vec<HashKey> {
    (1..=n).map(|i| HashKey::derive(&[3u8; 32], i)).collect()
}

fn world(users: u32, seed: u64) -> RbeWorld {
    RbeWorld::build(RbeScenario::simple(
        LedgerConfig::honest(5, 3, 6, seed),
        users,
        seed,
    ))
}

#[test]
fn forest_shape_follows_binary_representation_up_to_256() {
    let hks = hks(16);
    let mut forest = MerkleForest::new();
    for n in 1u32..=256 {
        let id = format!("u{n}").into_bytes();
        forest.register(&id, &[0u8; 32], &hks).unwrap();
        let depths: BTreeSet<u32> = forest.depths().into_iter().collect();
        let expected: BTreeSet<u32> = (0..32).filter(|j| n >> j & 1 == 1).map(|j| j + 1).collect();
        assert_eq!(depths, expected, "n = {n}");
        // Depths are strictly decreasing in forest order.
        assert!(forest.depths().windows(2).all(|w| w[0] > w[1]));
        // Total merges: n − popcount(n).
        assert_eq!(forest.merges, (n - n.count_ones()) as u64, "n = {n}");
    }
}

#[test]
fn root_changes_per_id_stay_within_log_bound_over_1024_registrations() {
    let hks = hks(16);
    let mut forest = MerkleForest::new();
    let mut root_of: std::collections::HashMap<Vec<u8>, Digest> = Default::default();
    let mut changes: std::collections::HashMap<Vec<u8>, u32> = Default::default();
    for n in 0u32..1024 {
        let id = format!("u{n}").into_bytes();
        forest.register(&id, &[0u8; 32], &hks).unwrap();
        for tree in &forest.trees {
            let root = tree.root();
            for leaf in &tree.leaves {
                let prev = root_of.insert(leaf.id.clone(), root);
                // The registration itself assigns the first root; only
                // subsequent re-rootings count as changes.
                if prev.is_some() && prev != Some(root) {
                    *changes.entry(leaf.id.clone()).or_default() += 1;
                }
            }
        }
    }
    let max = changes.values().copied().max().unwrap();
    assert!(max <= 10, "max root changes {max} exceeds log2(1024)");
}

#[test]
fn on_chain_registrations_build_the_documented_shapes() {
    let mut w = world(3, 0);
    w.register(0);
    assert_eq!(w.forest().depths(), vec![1]);
    w.register(1);
    assert_eq!(w.forest().depths(), vec![2]);
    w.register(2);
    assert_eq!(w.forest().depths(), vec![2, 1]);
    let pp = w.pp();
    assert!(pp.well_formed());
    assert_eq!(pp.tree_count(), 2);
}

#[test]
fn duplicate_identity_guard_fails_onchain() {
    let mut w = world(2, 41);
    w.register(0);
    assert!(!identity_verify(&w.forest(), b"id-0"));
    assert!(identity_verify(&w.forest(), b"id-1"));

    // Second registration of the same id with a fresh key still guard-fails.
    let user = &mut w.users[0];
    let nonce = user.account.next_nonce();
    let replay = covenant_core::rbe::register_tx(
        &user.account.keys,
        nonce,
        w.contract,
        b"id-0",
        &[9u8; 32],
    );
    w.ledger.submit(&replay);
    w.ledger.advance_until_confirmed();
    let result = contract::transfer(&w.ledger, &w.contract, &replay.id).unwrap();
    assert_eq!(
        result.receipt.outcome,
        Outcome::GuardFailed("already-registered".into())
    );
    assert!(!w.ledger.inspect(&replay.id));
}

#[test]
fn openings_from_chain_verify_and_mutations_reject() {
    let mut w = world(16, 1);
    for i in 0..16 {
        w.register(i);
    }
    let pp = w.pp();
    for i in 0..16usize {
        let id = w.users[i].id.clone();
        let opening = w.opening(&id).unwrap();
        assert!(verify_path(&opening, &opening.root, &pp.hks), "user {i}");

        // Flip every path byte position; all mutations must reject.
        for level in 0..opening.path.len() {
            for side in 0..2 {
                let mut bad = opening.clone();
                let digest = if side == 0 {
                    &mut bad.path[level].left
                } else {
                    &mut bad.path[level].right
                };
                digest.0[0] ^= 1;
                assert!(!verify_path(&bad, &bad.root, &pp.hks));
            }
            let mut flipped = opening.clone();
            flipped.path[level].dir = match flipped.path[level].dir {
                Direction::Left => Direction::Right,
                Direction::Right => Direction::Left,
            };
            assert!(!verify_path(&flipped, &flipped.root, &pp.hks));
        }
        let mut wrong_leaf = opening.clone();
        wrong_leaf.leaf.pk[0] ^= 1;
        assert!(!verify_path(&wrong_leaf, &wrong_leaf.root, &pp.hks));
        let mut wrong_root = opening.clone();
        wrong_root.root.0[31] ^= 1;
        assert!(!verify_path(&wrong_root, &wrong_root.root, &pp.hks));
    }
}

#[test]
fn unknown_id_has_no_opening() {
    let mut w = world(2, 2);
    w.register(0);
    assert_eq!(w.opening(b"ghost").unwrap_err(), RbeError::UnknownId);
}

#[test]
fn program_evaluation_round_trips_and_rejects() {
    let mut w = world(4, 3);
    for i in 0..4 {
        w.register(i);
    }
    let pp = w.pp();
    let crs = w.crs;
    let msg = b"registered mail";
    let ct = rbe_enc(&crs, &pp, b"id-2", msg, &[5u8; 32]);
    assert_eq!(ct.programs.len(), pp.tree_count());

    let opening = w.opening(b"id-2").unwrap();
    let outputs: Vec<ProgramOutput> = ct
        .programs
        .iter()
        .map(|p| eval_program(p, &opening))
        .collect();
    let encrypted: Vec<_> = outputs
        .iter()
        .filter_map(|o| match o {
            ProgramOutput::Encrypted(ct) => Some(ct.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(encrypted.len(), 1);
    assert_eq!(
        covenant_core::primitives::pke::pke_dec(&w.users[2].keys, &encrypted[0]).unwrap(),
        msg
    );

    // An opening for a different registered id hits the id check.
    let other = w.opening(b"id-1").unwrap();
    assert!(ct
        .programs
        .iter()
        .all(|p| !matches!(eval_program(p, &other), ProgramOutput::Encrypted(_))));
}

#[test]
fn stale_opening_yields_getupd_then_succeeds_after_update() {
    let mut w = world(16, 4);
    // Register the first user and capture the opening while the forest is a
    // single depth-1 tree.
    w.register(0);
    let stale = w.opening(b"id-0").unwrap();
    // More registrations force merges; id-0's containing root changes.
    for i in 1..16 {
        w.register(i);
    }
    let pp = w.pp();
    assert!(!pp.contains_root(&stale.root));

    let ct = rbe_enc(&w.crs, &pp, b"id-0", b"catch up", &[8u8; 32]);
    assert_eq!(rbe_dec(&w.users[0].keys, &stale, &ct), DecOutcome::GetUpd);

    let fresh = w.opening(b"id-0").unwrap();
    assert_eq!(
        rbe_dec(&w.users[0].keys, &fresh, &ct),
        DecOutcome::Message(b"catch up".to_vec())
    );
}

#[test]
fn end_to_end_sixteen_users_hundred_messages() {
    let mut w = world(16, 5);
    for i in 0..16 {
        w.register(i);
    }
    let pp = w.pp();
    let crs = w.crs;
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    for case in 0..100u32 {
        let i = (case % 16) as usize;
        let id = w.users[i].id.clone();
        let mut msg = vec![0u8; 1 + (case as usize % 64)];
        rng.fill_bytes(&mut msg);
        let mut r = [0u8; 32];
        rng.fill_bytes(&mut r);
        let ct = rbe_enc(&crs, &pp, &id, &msg, &r);
        let opening = w.opening(&id).unwrap();
        assert_eq!(
            rbe_dec(&w.users[i].keys, &opening, &ct),
            DecOutcome::Message(msg),
            "case {case}"
        );
    }
}

#[test]
fn garbage_ciphertext_bytes_are_a_syntax_error() {
    let mut w = world(2, 6);
    w.register(0);
    let opening = w.opening(b"id-0").unwrap();
    assert_eq!(
        rbe_dec_bytes(&w.users[0].keys, &opening, b"not a ciphertext"),
        DecOutcome::Bottom
    );
    // Internally inconsistent ciphertext: program count != tree count.
    let pp = w.pp();
    let mut ct = rbe_enc(&w.crs, &pp, b"id-0", b"m", &[1u8; 32]);
    ct.programs.clear();
    assert_eq!(rbe_dec(&w.users[0].keys, &opening, &ct), DecOutcome::Bottom);
}

#[test]
fn forged_openings_never_verify_for_unregistered_ids() {
    let setup = rbe_setup(16, 9);
    let mut forest = MerkleForest::new();
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    for i in 0..16u8 {
        let kp = rbe_keygen(&mut rng);
        forest
            .register(format!("user-{i}").as_bytes(), &kp.public(), &setup.pp.hks)
            .unwrap();
    }
    let pp = PublicParams {
        hks: setup.pp.hks.clone(),
        roots: forest.roots(),
    };

    // Soundness: exactly the registered ids have verifying openings.
    for id in forest.ids() {
        let opening = forest.opening(id).unwrap();
        assert!(verify_path(&opening, &opening.root, &pp.hks));
    }

    // 10^4 forged paths for an unregistered id, derived by mutating honest
    // openings and by sampling random paths: all must reject.
    let base = forest.opening(b"user-3").unwrap();
    let mut rejected = 0u32;
    for trial in 0..10_000u32 {
        let mut forged: MerkleOpening = base.clone();
        forged.leaf.id = b"mallory".to_vec();
        match trial % 4 {
            0 => {} // only the id swapped
            1 => {
                let lvl = (trial as usize / 4) % forged.path.len();
                let mut d = [0u8; 32];
                rng.fill_bytes(&mut d);
                forged.path[lvl].left = Digest(d);
            }
            2 => {
                let mut d = [0u8; 32];
                rng.fill_bytes(&mut d);
                forged.root = Digest(d);
            }
            _ => {
                let mut pk = vec![0u8; 32];
                rng.fill_bytes(&mut pk);
                forged.leaf.pk = pk;
                for level in &mut forged.path {
                    let mut d = [0u8; 32];
                    rng.fill_bytes(&mut d);
                    level.right = Digest(d);
                }
            }
        }
        let verifies_somewhere = pp
            .roots
            .iter()
            .any(|(rt, _)| verify_path(&forged, rt, &pp.hks));
        if !verifies_somewhere {
            rejected += 1;
        }
    }
    assert_eq!(rejected, 10_000);
}

#[test]
fn replaying_registration_txs_reproduces_pp_bit_exactly() {
    let mut w = world(9, 7);
    let mut reg_txs = Vec::new();
    for i in 0..9 {
        reg_txs.push(w.register(i));
    }
    let pp_live = w.pp();

    // Replay the confirmed chain on a fresh replica and decode pp from it.
    let replica = w.ledger.replay_chain(0).unwrap();
    let state = &replica.instances.get(&w.contract).unwrap().state;
    let pp_replayed = covenant_core::rbe::curator::params_from_state(state).unwrap();
    assert_eq!(pp_replayed.canon_bytes(), pp_live.canon_bytes());

    // Transparency: every pp change maps to an inspectable transaction.
    for tx in &reg_txs {
        assert!(w.ledger.inspect(tx));
        let snap = w.ledger.read_state(tx).unwrap();
        assert_eq!(w.ledger.read_tx(&snap).unwrap().id, *tx);
    }
}

#[test]
fn opening_canon_round_trips() {
    let mut w = world(5, 8);
    for i in 0..5 {
        w.register(i);
    }
    let opening = w.opening(b"id-3").unwrap();
    let decoded = MerkleOpening::decode(&opening.canon_bytes()).unwrap();
    assert_eq!(decoded, opening);

    let leaf = LeafPair {
        id: b"a".to_vec(),
        pk: b"bc".to_vec(),
    };
    let other = LeafPair {
        id: b"ab".to_vec(),
        pk: b"c".to_vec(),
    };
    assert_ne!(leaf.canon_bytes(), other.canon_bytes());
}
