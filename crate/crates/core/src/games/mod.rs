//! Executable adversarial games: non-equivocation, non-repudiation, and
//! non-frameability, runnable against both protocol instantiations.
//!
//! Each trial builds a fresh seeded world, drives the protocol pipeline
//! (setup, key generation, signing, on-chain operation, encryption, state
//! read, decryption), lets a capability-bounded adversary produce its
//! candidate, and records a win iff the game's return conjunction holds.
//! Under a robust ledger the win rate is zero; switching one robustness
//! assumption off (the negative controls) makes the corresponding game
//! record wins whose witnesses re-verify.

pub mod oracle;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cbe::{self, day_from_civil};
use crate::codec::{Canon, Digest, Encoder};
use crate::ledger::tx::{Transaction, TxCall};
use crate::ledger::{AdversaryMode, FaultSet, LedgerConfig, PlayerId};
use crate::primitives::hash::expand;
use crate::rbe;
use crate::scenario::{CbeScenario, CbeWorld, RbeScenario, RbeWorld};

pub use oracle::{BlockchainOracle, UserOracle};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GameKind {
    NonEquivocation,
    NonRepudiation,
    NonFrameability,
}

impl GameKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GameKind::NonEquivocation => "neqv",
            GameKind::NonRepudiation => "nrep",
            GameKind::NonFrameability => "nfrm",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Protocol {
    Cbe,
    Rbe,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Cbe => "cbe",
            Protocol::Rbe => "rbe",
        }
    }
}

/// What an adversary script is allowed to do.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct CapabilitySet {
    pub control_minority_players: bool,
    pub serve_divergent_state: bool,
    pub mutate_transactions: bool,
    pub random_forge_signatures: bool,
}

/// A named adversary script with its capability envelope.
#[derive(Clone, Debug)]
pub struct AdversaryStrategy {
    pub name: &'static str,
    pub capabilities: CapabilitySet,
    /// Ledger-level behavior of controlled players, if any.
    pub ledger_mode: Option<AdversaryMode>,
}

impl AdversaryStrategy {
    /// The built-in strategy each game is played against.
    pub fn builtin(game: GameKind) -> AdversaryStrategy {
        match game {
            GameKind::NonEquivocation => AdversaryStrategy {
                name: "serve-divergent-state",
                capabilities: CapabilitySet {
                    control_minority_players: true,
                    serve_divergent_state: true,
                    ..CapabilitySet::default()
                },
                ledger_mode: Some(AdversaryMode::Equivocate),
            },
            GameKind::NonRepudiation => AdversaryStrategy {
                name: "divergent-trigger",
                capabilities: CapabilitySet {
                    control_minority_players: true,
                    serve_divergent_state: true,
                    ..CapabilitySet::default()
                },
                ledger_mode: Some(AdversaryMode::Equivocate),
            },
            GameKind::NonFrameability => AdversaryStrategy {
                name: "random-forge",
                capabilities: CapabilitySet {
                    random_forge_signatures: true,
                    ..CapabilitySet::default()
                },
                ledger_mode: None,
            },
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum GameError {
    #[error("configuration error: {0}")]
    Configuration(String),
}

/// A winning trial, recorded with everything needed to re-evaluate the
/// game's return conjunction offline.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Witness {
    pub game: GameKind,
    pub trial: u64,
    /// The transaction whose legality the conjunction inspects.
    pub inspected_tx: Digest,
    /// The adversary's output: a state digest (neqv) or a transaction id
    /// (nrep, nfrm).
    pub candidate: Digest,
    /// The honest reference the candidate must differ from, when the game
    /// has one.
    pub reference: Option<Digest>,
    /// Digests the relevant oracle log held when the adversary returned.
    pub oracle_log: Vec<Digest>,
    /// The ledger-validity leg: the (possibly fault-weakened) ledger
    /// accepted the candidate as confirmed.
    pub accepted_by_ledger: bool,
    pub inspect_ok: bool,
}

impl Witness {
    pub fn digest(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.bytes(self.game.as_str().as_bytes())
            .u64(self.trial)
            .digest(&self.inspected_tx)
            .digest(&self.candidate);
        match &self.reference {
            Some(r) => enc.u8(1).digest(r),
            None => enc.u8(0),
        };
        enc.list_len(self.oracle_log.len());
        for d in &self.oracle_log {
            enc.digest(d);
        }
        enc.u8(self.accepted_by_ledger as u8).u8(self.inspect_ok as u8);
        enc.digest_value()
    }
}

/// Independently re-evaluate the return conjunction a witness claims.
pub fn recheck_witness(w: &Witness) -> bool {
    w.accepted_by_ledger
        && w.inspect_ok
        && !w.oracle_log.contains(&w.candidate)
        && w.reference.map_or(true, |r| r != w.candidate)
}

/// Outcome of a full game run.
#[derive(Clone, Debug)]
pub struct GameTranscript {
    pub game: GameKind,
    pub protocol: Protocol,
    pub strategy: &'static str,
    pub trials: u64,
    pub wins: u64,
    pub witnesses: Vec<Witness>,
}

impl GameTranscript {
    pub fn win_rate_is_zero(&self) -> bool {
        self.wins == 0
    }
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut enc = Encoder::new();
    enc.u64(seed).u64(trial);
    u64::from_be_bytes(enc.digest_value().as_bytes()[..8].try_into().unwrap())
}

fn trial_randomness(seed: u64, trial: u64, domain: &[u8]) -> [u8; 32] {
    let mut enc = Encoder::new();
    enc.u64(seed).u64(trial).bytes(domain);
    expand(b"covenant/game/rand", &enc.finish(), 32)
        .try_into()
        .unwrap()
}

const GAME_PLAYERS: u32 = 5;
const GAME_ADVERSARIES: [PlayerId; 2] = [3, 4];
const GAME_K: u64 = 2;
const GAME_DELTA: u64 = 4;

fn ledger_config(strategy: &AdversaryStrategy, seed: u64) -> LedgerConfig {
    let mut config = LedgerConfig::honest(GAME_PLAYERS, GAME_K, GAME_DELTA, seed);
    if let Some(mode) = strategy.ledger_mode {
        config = config.with_adversaries(&GAME_ADVERSARIES, mode);
    }
    config
}

fn validate(strategy: &AdversaryStrategy, config: &LedgerConfig) -> Result<(), GameError> {
    if strategy.ledger_mode.is_some() && !strategy.capabilities.control_minority_players {
        return Err(GameError::Configuration(
            "strategy controls players without the control-minority capability".into(),
        ));
    }
    if strategy.ledger_mode == Some(AdversaryMode::Equivocate)
        && !strategy.capabilities.serve_divergent_state
    {
        return Err(GameError::Configuration(
            "equivocation requires the serve-divergent-state capability".into(),
        ));
    }
    if !config.adversary_fraction_ok() {
        return Err(GameError::Configuration(format!(
            "adversary fraction {}/{} is not below the epsilon threshold",
            config.adversaries.len(),
            config.total_players
        )));
    }
    Ok(())
}

/// Run `trials` independent trials of a game against one protocol.
pub fn run_game(
    game: GameKind,
    protocol: Protocol,
    strategy: &AdversaryStrategy,
    trials: u64,
    seed: u64,
) -> Result<GameTranscript, GameError> {
    run_game_with_faults(game, protocol, strategy, trials, seed, FaultSet::NONE)
}

/// Same, with robustness faults injected (the negative controls).
pub fn run_game_with_faults(
    game: GameKind,
    protocol: Protocol,
    strategy: &AdversaryStrategy,
    trials: u64,
    seed: u64,
    faults: FaultSet,
) -> Result<GameTranscript, GameError> {
    validate(strategy, &ledger_config(strategy, seed))?;
    let mut wins = 0;
    let mut witnesses = Vec::new();
    for trial in 0..trials {
        let outcome = match protocol {
            Protocol::Cbe => cbe_trial(game, strategy, faults, seed, trial),
            Protocol::Rbe => rbe_trial(game, strategy, faults, seed, trial),
        };
        if let Some(witness) = outcome {
            wins += 1;
            witnesses.push(witness);
        }
    }
    Ok(GameTranscript {
        game,
        protocol,
        strategy: strategy.name,
        trials,
        wins,
        witnesses,
    })
}

/// The state-facing games (neqv, nrep) share their pipeline; `target_tx` is
/// the honest on-chain operation under attack and `decoy_tx` a distinct
/// legal confirmed transaction the adversary controls.
struct StateGameContext<'a> {
    ledger: &'a crate::ledger::Ledger,
    target_tx: Digest,
    decoy_tx: Option<Digest>,
    expected: crate::contract::StateSnapshot,
}

fn play_neqv(
    ctx: &StateGameContext<'_>,
    oracle: &mut BlockchainOracle,
    deploy_tx: &Digest,
    game: GameKind,
    trial: u64,
) -> Option<Witness> {
    // Fill L1 with an unrelated canonical answer first.
    let _ = oracle.read_state(ctx.ledger, deploy_tx);
    let l1 = oracle.l1_state_digests();
    let expected_digest = ctx.expected.digest();

    for p in GAME_ADVERSARIES {
        let Ok(candidate) = ctx.ledger.read_state_at(p, &ctx.target_tx) else {
            continue;
        };
        let digest = candidate.digest();
        let accepted = ctx.ledger.accept_state(&ctx.target_tx, &digest);
        let inspect_ok = ctx.ledger.inspect(&ctx.target_tx);
        let win = accepted && !l1.contains(&digest) && digest != expected_digest && inspect_ok;
        if win {
            return Some(Witness {
                game,
                trial,
                inspected_tx: ctx.target_tx,
                candidate: digest,
                reference: Some(expected_digest),
                oracle_log: l1,
                accepted_by_ledger: accepted,
                inspect_ok,
            });
        }
    }
    None
}

fn play_nrep(
    ctx: &StateGameContext<'_>,
    oracle: &mut BlockchainOracle,
    game: GameKind,
    trial: u64,
) -> Option<Witness> {
    // The challenger's State Read, then the oracle caches the canonical
    // trigger in L2.
    let s_prime = ctx.ledger.read_state(&ctx.target_tx).ok()?;
    let _ = oracle.read_tx(ctx.ledger, &s_prime);
    let l2 = oracle.l2_tx_ids();
    let _ = ctx.decoy_tx; // the decoy is already confirmed on chain

    for p in GAME_ADVERSARIES {
        let Ok(candidate) = ctx.ledger.read_tx_at(p, &s_prime) else {
            continue;
        };
        if candidate.id == ctx.target_tx {
            continue;
        }
        let accepted = ctx.ledger.accept_tx_link(&s_prime, &candidate.id);
        let inspect_ok = ctx.ledger.inspect(&candidate.id);
        let win = accepted && !l2.contains(&candidate.id) && inspect_ok;
        if win {
            return Some(Witness {
                game,
                trial,
                inspected_tx: candidate.id,
                candidate: candidate.id,
                reference: Some(ctx.target_tx),
                oracle_log: l2,
                accepted_by_ledger: accepted,
                inspect_ok,
            });
        }
    }
    None
}

/// Forge-and-submit for the non-frameability game: `oracle_call` is queried
/// (and recorded) but never submitted; the forged transaction imitates the
/// honest signer with random signature bytes.
fn play_nfrm(
    ledger: &mut crate::ledger::Ledger,
    user_oracle: &mut UserOracle,
    oracle_call: (TxCall, Vec<u8>),
    forged_call: (TxCall, Vec<u8>),
    seed: u64,
    trial: u64,
) -> Option<Witness> {
    // Query the user oracle (twice, to exercise the cache) without
    // submitting its outputs.
    let oracle_tx = user_oracle.sign(&oracle_call.0, oracle_call.1.clone());
    let again = user_oracle.sign(&oracle_call.0, oracle_call.1);
    debug_assert_eq!(oracle_tx, again);

    // Replaying an oracle output can never win: it is in Set(Tx).
    debug_assert!(user_oracle.contains_tx(&oracle_tx.id));

    // The forgery: the honest user's signer id, a fresh nonce, random bytes
    // for a signature.
    let signature = expand(
        b"covenant/game/forged-sig",
        &trial_randomness(seed, trial, b"sig"),
        64,
    );
    let forged = Transaction::with_signature(
        user_oracle.signer,
        1_000_000 + trial,
        &forged_call.0,
        forged_call.1,
        signature,
    );
    ledger.submit(&forged);
    ledger.advance_until_confirmed();

    let set_tx = user_oracle.tx_ids();
    let inspect_ok = ledger.inspect(&forged.id);
    let win = !set_tx.contains(&forged.id) && inspect_ok;
    if win {
        return Some(Witness {
            game: GameKind::NonFrameability,
            trial,
            inspected_tx: forged.id,
            candidate: forged.id,
            reference: None,
            oracle_log: set_tx,
            accepted_by_ledger: ledger.is_confirmed(&forged.id),
            inspect_ok,
        });
    }
    None
}

fn cbe_trial(
    game: GameKind,
    strategy: &AdversaryStrategy,
    faults: FaultSet,
    seed: u64,
    trial: u64,
) -> Option<Witness> {
    let ts = trial_seed(seed, trial);
    let mut scenario = CbeScenario::simple(ledger_config(strategy, ts), 3, ts);
    scenario.tree_depth = 3;
    scenario.periods = 2;
    scenario.faults = faults;
    let mut world = CbeWorld::build(scenario);
    // user 2 is adversary-controlled.
    let adversary_vk = world.users[2].account.verification_key();
    world.ledger.register_account(&adversary_vk, false);

    let request_day = day_from_civil(2021, 11, 1);

    match game {
        GameKind::NonFrameability => {
            let victim = &world.users[1];
            let oracle_keys = victim.account.keys.clone();
            let call = TxCall::Call {
                contract: world.contract,
                op: "revoke".into(),
            };
            let aux = cbe::RevokeAux {
                user: victim.label.clone(),
                expiry: victim.expiry,
                request_day,
            }
            .canon_bytes();
            let mut user_oracle = UserOracle::new(oracle_keys, 500_000);
            play_nfrm(
                &mut world.ledger,
                &mut user_oracle,
                (call.clone(), aux.clone()),
                (call, aux),
                seed,
                trial,
            )
        }
        _ => {
            // The honest pipeline: Bob (user 1) revokes his certificate.
            let target_tx = world.revoke(1, request_day);
            let expected = world
                .ledger
                .replay_snapshot(world.ledger.first_honest(), &target_tx)
                .expect("target tx is on the honest chain");

            // Encryption/decryption legs: Alice (user 0) stays valid.
            if !faults.any() {
                let cert = world.issue_cert(1, 0).expect("alice is valid");
                let params = world.authority.params();
                let recipient = world.users[0].keys.recipient();
                let r = crate::primitives::group::Scalar::new(ts | 1);
                let ct = cbe::cbe_enc(&params, &recipient, 1, b"pipeline probe", r);
                let got = cbe::cbe_dec(&world.users[0].keys, &cert, params.x_pub, &ct);
                debug_assert_eq!(got.as_deref(), Some(&b"pipeline probe"[..]));
            }

            let decoy_tx = if game == GameKind::NonRepudiation {
                // Carol (user 2) revokes her own certificate: a distinct,
                // legal, confirmed transaction.
                Some(world.revoke(2, request_day))
            } else {
                None
            };

            let ctx = StateGameContext {
                ledger: &world.ledger,
                target_tx,
                decoy_tx,
                expected,
            };
            let mut oracle = BlockchainOracle::new();
            match game {
                GameKind::NonEquivocation => {
                    play_neqv(&ctx, &mut oracle, &world.deploy_tx, game, trial)
                }
                GameKind::NonRepudiation => play_nrep(&ctx, &mut oracle, game, trial),
                GameKind::NonFrameability => unreachable!(),
            }
        }
    }
}

fn rbe_trial(
    game: GameKind,
    strategy: &AdversaryStrategy,
    faults: FaultSet,
    seed: u64,
    trial: u64,
) -> Option<Witness> {
    let ts = trial_seed(seed, trial);
    let mut scenario = RbeScenario::simple(ledger_config(strategy, ts), 3, ts);
    scenario.lambda = 8;
    scenario.faults = faults;
    let mut world = RbeWorld::build(scenario);
    let adversary_vk = world.users[2].account.verification_key();
    world.ledger.register_account(&adversary_vk, false);

    match game {
        GameKind::NonFrameability => {
            // Framing: attribute a registration of the victim's identity,
            // but under an adversary-chosen key, to the victim's account.
            let victim = &world.users[1];
            let oracle_keys = victim.account.keys.clone();
            let call = TxCall::Call {
                contract: world.contract,
                op: "register".into(),
            };
            let honest_aux = rbe::RegisterAux {
                id: victim.id.clone(),
                pk: victim.keys.public().to_vec(),
            }
            .canon_bytes();
            let forged_aux = rbe::RegisterAux {
                id: victim.id.clone(),
                pk: trial_randomness(seed, trial, b"mallory-pk").to_vec(),
            }
            .canon_bytes();
            let mut user_oracle = UserOracle::new(oracle_keys, 500_000);
            play_nfrm(
                &mut world.ledger,
                &mut user_oracle,
                (call.clone(), honest_aux),
                (call, forged_aux),
                seed,
                trial,
            )
        }
        _ => {
            // The honest pipeline: user 0 registers.
            let target_tx = world.register(0);
            let expected = world
                .ledger
                .replay_snapshot(world.ledger.first_honest(), &target_tx)
                .expect("target tx is on the honest chain");

            if !faults.any() {
                let pp = world.pp();
                let crs = world.crs;
                let id = world.users[0].id.clone();
                let r = trial_randomness(seed, trial, b"enc");
                let ct = cbe_rbe_probe(&crs, &pp, &id, &r);
                let opening = world.opening(&id).expect("registered");
                debug_assert_eq!(
                    rbe::rbe_dec(&world.users[0].keys, &opening, &ct),
                    rbe::DecOutcome::Message(b"pipeline probe".to_vec())
                );
            }

            let decoy_tx = if game == GameKind::NonRepudiation {
                Some(world.register(2))
            } else {
                None
            };

            let ctx = StateGameContext {
                ledger: &world.ledger,
                target_tx,
                decoy_tx,
                expected,
            };
            let mut oracle = BlockchainOracle::new();
            match game {
                GameKind::NonEquivocation => {
                    play_neqv(&ctx, &mut oracle, &world.deploy_tx, game, trial)
                }
                GameKind::NonRepudiation => play_nrep(&ctx, &mut oracle, game, trial),
                GameKind::NonFrameability => unreachable!(),
            }
        }
    }
}

fn cbe_rbe_probe(
    crs: &Digest,
    pp: &rbe::PublicParams,
    id: &[u8],
    r: &[u8; 32],
) -> rbe::RbeCiphertext {
    rbe::rbe_enc(crs, pp, id, b"pipeline probe", r)
}
