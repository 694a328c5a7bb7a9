//! Execution traces and the persistence/liveness audits.
//!
//! The ledger records everything needed to audit a run after the fact: one
//! row per (round, player) with the tip and confirmed-prefix digests, the
//! submission round of every accepted transaction, and each player's
//! attested confirmation of each transaction. Audits are pure functions of
//! the trace, so a trace can be checked offline (and tests can corrupt a
//! copy to confirm the audits notice).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::ledger::{LedgerConfig, PlayerId};

/// One per (round, player): chain head and confirmed prefix.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RoundRow {
    pub round: u64,
    pub player: PlayerId,
    pub tip: Digest,
    pub confirmed_prefix: Digest,
}

impl Canon for RoundRow {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.round)
            .u32(self.player)
            .digest(&self.tip)
            .digest(&self.confirmed_prefix);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(RoundRow {
            round: dec.u64()?,
            player: dec.u32()?,
            tip: dec.digest()?,
            confirmed_prefix: dec.digest()?,
        })
    }
}

/// When and by whom a transaction was submitted.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Submission {
    pub round: u64,
    pub signer: Digest,
    pub honest: bool,
}

/// A player's attested confirmation of one transaction: the round its depth
/// reached `k` at that player and the state snapshot digest the player
/// vouches for. A lying player attests a diverged digest here.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Confirmation {
    pub round: u64,
    pub snapshot: Digest,
}

/// One executed operation on the canonical chain, for gas accounting.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExecOp {
    /// Block height the operation executed in.
    pub height: u64,
    pub tx: Digest,
    pub kind: String,
    pub count: u64,
}

impl Canon for ExecOp {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.height)
            .digest(&self.tx)
            .bytes(self.kind.as_bytes())
            .u64(self.count);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(ExecOp {
            height: dec.u64()?,
            tx: dec.digest()?,
            kind: String::from_utf8(dec.bytes()?).map_err(|_| CodecError::BadValue("kind"))?,
            count: dec.u64()?,
        })
    }
}

/// Recorded execution trace of one ledger run.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub rounds: Vec<RoundRow>,
    pub submissions: BTreeMap<Digest, Submission>,
    pub confirmations: BTreeMap<Digest, BTreeMap<PlayerId, Confirmation>>,
    pub exec_ops: Vec<ExecOp>,
}

/// A failed audit, naming the violating transaction.
#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("audit violation on tx {tx}: {reason}")]
pub struct AuditViolation {
    pub tx: Digest,
    pub reason: String,
}

fn fraction_exceeds(count: usize, total: usize, epsilon: (u32, u32)) -> bool {
    // count/total > num/den, in exact integer arithmetic
    (count as u64) * (epsilon.1 as u64) > (epsilon.0 as u64) * (total as u64)
}

/// The reference digest for a transaction: what the earliest honest
/// confirmation attested (ties broken by player id).
fn honest_reference(
    config: &LedgerConfig,
    confs: &BTreeMap<PlayerId, Confirmation>,
) -> Option<Digest> {
    confs
        .iter()
        .filter(|(p, _)| !config.is_adversary(**p))
        .min_by_key(|(p, c)| (c.round, **p))
        .map(|(_, c)| c.snapshot)
}

/// Persistence: once any honest player holds a transaction `k` deep, every
/// honest player must attest the same snapshot for it, and the fraction of
/// all players attesting that snapshot must exceed ε within the trace.
pub fn audit_persistence(config: &LedgerConfig, trace: &Trace) -> Result<(), AuditViolation> {
    let total = config.total_players as usize;
    for (tx, confs) in &trace.confirmations {
        let Some(reference) = honest_reference(config, confs) else {
            continue; // no honest player accepted it; nothing to hold
        };
        for player in 0..config.total_players {
            if config.is_adversary(player) {
                continue;
            }
            match confs.get(&player) {
                Some(c) if c.snapshot == reference => {}
                Some(_) => {
                    return Err(AuditViolation {
                        tx: *tx,
                        reason: format!("honest player {player} attests a diverged state"),
                    })
                }
                None => {
                    return Err(AuditViolation {
                        tx: *tx,
                        reason: format!("honest player {player} never accepted the transaction"),
                    })
                }
            }
        }
        let accepting = confs.values().filter(|c| c.snapshot == reference).count();
        if !fraction_exceeds(accepting, total, config.epsilon) {
            return Err(AuditViolation {
                tx: *tx,
                reason: format!("acceptance fraction {accepting}/{total} not above threshold"),
            });
        }
    }
    Ok(())
}

/// Liveness: every transaction submitted by an honest account reaches an
/// acceptance fraction above ε within δ rounds of submission.
pub fn audit_liveness(config: &LedgerConfig, trace: &Trace) -> Result<(), AuditViolation> {
    let total = config.total_players as usize;
    for (tx, sub) in &trace.submissions {
        if !sub.honest {
            continue;
        }
        let deadline = sub.round + config.delta;
        let confs = trace.confirmations.get(tx);
        let reference = confs.and_then(|c| honest_reference(config, c));
        let accepting = match (confs, reference) {
            (Some(confs), Some(reference)) => confs
                .values()
                .filter(|c| c.snapshot == reference && c.round <= deadline)
                .count(),
            _ => 0,
        };
        if !fraction_exceeds(accepting, total, config.epsilon) {
            return Err(AuditViolation {
                tx: *tx,
                reason: format!(
                    "only {accepting}/{total} players accepted within {} rounds",
                    config.delta
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> LedgerConfig {
        LedgerConfig::honest(3, 2, 3, 0)
    }

    fn trace_with_one_tx() -> (Trace, Digest) {
        let tx = Digest::of(b"tx");
        let snap = Digest::of(b"snap");
        let mut trace = Trace::default();
        trace.submissions.insert(
            tx,
            Submission {
                round: 1,
                signer: Digest::of(b"alice"),
                honest: true,
            },
        );
        let mut confs = BTreeMap::new();
        for p in 0..3 {
            confs.insert(p, Confirmation { round: 4, snapshot: snap });
        }
        trace.confirmations.insert(tx, confs);
        (trace, tx)
    }

    #[test]
    fn clean_trace_passes_both_audits() {
        let (trace, _) = trace_with_one_tx();
        audit_persistence(&config(), &trace).unwrap();
        audit_liveness(&config(), &trace).unwrap();
    }

    #[test]
    fn hand_edited_state_fails_persistence() {
        let (mut trace, tx) = trace_with_one_tx();
        trace
            .confirmations
            .get_mut(&tx)
            .unwrap()
            .get_mut(&1)
            .unwrap()
            .snapshot = Digest::of(b"tampered");
        let err = audit_persistence(&config(), &trace).unwrap_err();
        assert_eq!(err.tx, tx);
    }

    #[test]
    fn zero_delta_fails_liveness() {
        let (trace, _) = trace_with_one_tx();
        let mut cfg = config();
        cfg.delta = 0;
        assert!(audit_liveness(&cfg, &trace).is_err());
    }
}
