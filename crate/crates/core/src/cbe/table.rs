//! The on-chain certificate table and the revocation contract program.
//!
//! The table holds one row per user: (number, user id, state, expiry date).
//! Rows are created by CA-signed `enroll` transactions; user-signed `revoke`
//! transactions flip a row from valid to revoked once the guard checks pass
//! (requester owns the certificate, the certificate is inside its expiry
//! window, and the row is still valid).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cbe::tree::BitPrefix;
use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::contract::{Bytecode, ContractState, GuardFailure, OpMetrics, OpcodeEntry, TxView};
use crate::ledger::tx::Transaction;
use crate::primitives::sig::SigKeypair;

pub const REVOCATION_PROGRAM: &str = "revocation";

/// Days since the Unix epoch; rendered month-year in reports.
pub type Day = u32;

/// Day count for a civil date (valid for dates from 1970 on).
pub fn day_from_civil(year: i32, month: u32, day: u32) -> Day {
    let y = if month <= 2 { year as i64 - 1 } else { year as i64 };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let mp = ((month + 9) % 12) as u64;
    let doy = (153 * mp + 2) / 5 + day as u64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    (era * 146097 + doe as i64 - 719468) as Day
}

/// (year, month) of a day count; the report rendering granularity.
pub fn month_year(day: Day) -> (i32, u32) {
    let z = day as i64 + 719468;
    let era = z / 146097;
    let doe = (z - era * 146097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    ((if m <= 2 { y + 1 } else { y }) as i32, m)
}

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

pub fn render_month_year(day: Day) -> String {
    let (y, m) = month_year(day);
    format!("{}, {}", MONTHS[(m - 1) as usize], y)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CertState {
    Valid,
    Revoked,
}

impl CertState {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertState::Valid => "valid",
            CertState::Revoked => "revoked",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TableRow {
    pub number: u64,
    pub user: Vec<u8>,
    pub state: CertState,
    pub expiry: Day,
}

/// Decoded view of the on-chain certificate table.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RevocationTable {
    pub rows: Vec<TableRow>,
    sns: BTreeMap<Vec<u8>, BitPrefix>,
}

impl RevocationTable {
    pub fn row(&self, user: &[u8]) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.user == user)
    }

    pub fn serial(&self, user: &[u8]) -> Option<BitPrefix> {
        self.sns.get(user).copied()
    }

    /// Leaf indices of all revoked users.
    pub fn revoked_leaves(&self) -> BTreeSet<u32> {
        self.rows
            .iter()
            .filter(|r| r.state == CertState::Revoked)
            .filter_map(|r| self.sns.get(&r.user).map(|sn| sn.bits))
            .collect()
    }

    /// One record per row, matching the on-chain table columns.
    pub fn export_lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{}\t{}\t{}\t{}",
                    r.number,
                    String::from_utf8_lossy(&r.user),
                    r.state.as_str(),
                    render_month_year(r.expiry)
                )
            })
            .collect()
    }

    /// Decode the table from raw contract state.
    pub fn from_state(state: &ContractState) -> RevocationTable {
        let mut rows = Vec::new();
        let mut sns = BTreeMap::new();
        for (key, value) in state.iter() {
            if let Some(user) = key.strip_prefix(b"row:".as_slice()) {
                if let Ok(row) = decode_row(user, value) {
                    rows.push(row);
                }
            } else if let Some(user) = key.strip_prefix(b"sn:".as_slice()) {
                if let Ok(sn) = decode_sn(value) {
                    sns.insert(user.to_vec(), sn);
                }
            }
        }
        rows.sort_by_key(|r| r.number);
        RevocationTable { rows, sns }
    }
}

fn encode_row(row: &TableRow) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.u64(row.number)
        .u8(match row.state {
            CertState::Valid => 0,
            CertState::Revoked => 1,
        })
        .u32(row.expiry);
    enc.finish()
}

fn decode_row(user: &[u8], bytes: &[u8]) -> Result<TableRow, CodecError> {
    let mut dec = Decoder::new(bytes);
    let number = dec.u64()?;
    let state = match dec.u8()? {
        0 => CertState::Valid,
        1 => CertState::Revoked,
        _ => return Err(CodecError::BadValue("state")),
    };
    let expiry = dec.u32()?;
    dec.finish()?;
    Ok(TableRow {
        number,
        user: user.to_vec(),
        state,
        expiry,
    })
}

fn decode_sn(bytes: &[u8]) -> Result<BitPrefix, CodecError> {
    let mut dec = Decoder::new(bytes);
    let len = dec.u8()?;
    let bits = dec.u32()?;
    dec.finish()?;
    Ok(BitPrefix { len, bits })
}

/// `enroll` request: the CA binds a user id to its transaction-signing key,
/// serial number, and certificate expiry.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EnrollAux {
    pub user: Vec<u8>,
    pub owner: Digest,
    pub sn: BitPrefix,
    pub expiry: Day,
}

impl Canon for EnrollAux {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.user)
            .digest(&self.owner)
            .u8(self.sn.len)
            .u32(self.sn.bits)
            .u32(self.expiry);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(EnrollAux {
            user: dec.bytes()?,
            owner: dec.digest()?,
            sn: BitPrefix {
                len: dec.u8()?,
                bits: dec.u32()?,
            },
            expiry: dec.u32()?,
        })
    }
}

/// `revoke` request: `[user:revoked]` plus the certificate expiry it claims
/// and the day the request was made.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RevokeAux {
    pub user: Vec<u8>,
    pub expiry: Day,
    pub request_day: Day,
}

impl RevokeAux {
    /// The request rendered the way the table records it.
    pub fn marker(&self) -> String {
        format!("[{}:revoked]", String::from_utf8_lossy(&self.user))
    }
}

impl Canon for RevokeAux {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.user)
            .bytes(b"revoked")
            .u32(self.expiry)
            .u32(self.request_day);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let user = dec.bytes()?;
        let state = dec.bytes()?;
        if state != b"revoked" {
            return Err(CodecError::BadValue("state marker"));
        }
        Ok(RevokeAux {
            user,
            expiry: dec.u32()?,
            request_day: dec.u32()?,
        })
    }
}

fn enroll_guard(state: &ContractState, view: &TxView<'_>) -> Result<(), GuardFailure> {
    let aux = EnrollAux::decode(view.aux).map_err(|_| GuardFailure::new("malformed-enroll"))?;
    if let Some(ca) = state.get(b"ca") {
        if ca != view.tx.signer.as_bytes() {
            return Err(GuardFailure::new("not-certificate-authority"));
        }
    }
    let mut row_key = b"row:".to_vec();
    row_key.extend_from_slice(&aux.user);
    if state.get(&row_key).is_some() {
        return Err(GuardFailure::new("already-enrolled"));
    }
    Ok(())
}

fn enroll_op(state: &mut ContractState, view: &TxView<'_>) -> Result<OpMetrics, GuardFailure> {
    let aux = EnrollAux::decode(view.aux).map_err(|_| GuardFailure::new("malformed-enroll"))?;
    // First enroller claims the CA role for the instance.
    if state.get(b"ca").is_none() {
        state.set(b"ca".to_vec(), view.tx.signer.as_bytes().to_vec());
    }
    let seq = state
        .get(b"seq")
        .map(|v| u64::from_be_bytes(v.try_into().unwrap()))
        .unwrap_or(0)
        + 1;
    state.set(b"seq".to_vec(), seq.to_be_bytes().to_vec());

    let row = TableRow {
        number: seq,
        user: aux.user.clone(),
        state: CertState::Valid,
        expiry: aux.expiry,
    };
    let mut key = b"row:".to_vec();
    key.extend_from_slice(&aux.user);
    state.set(key, encode_row(&row));

    let mut key = b"owner:".to_vec();
    key.extend_from_slice(&aux.user);
    state.set(key, aux.owner.as_bytes().to_vec());

    let mut key = b"sn:".to_vec();
    key.extend_from_slice(&aux.user);
    let mut enc = Encoder::new();
    enc.u8(aux.sn.len).u32(aux.sn.bits);
    state.set(key, enc.finish());
    Ok(Vec::new())
}

fn revoke_guard(state: &ContractState, view: &TxView<'_>) -> Result<(), GuardFailure> {
    let aux = RevokeAux::decode(view.aux).map_err(|_| GuardFailure::new("malformed-request"))?;

    let mut row_key = b"row:".to_vec();
    row_key.extend_from_slice(&aux.user);
    let row_bytes = state
        .get(&row_key)
        .ok_or_else(|| GuardFailure::new("unknown-user"))?;
    let row = decode_row(&aux.user, row_bytes).map_err(|_| GuardFailure::new("corrupt-row"))?;

    // Identity authenticity: the requester must own the certificate.
    let mut owner_key = b"owner:".to_vec();
    owner_key.extend_from_slice(&aux.user);
    let owner = state
        .get(&owner_key)
        .ok_or_else(|| GuardFailure::new("unknown-user"))?;
    if owner != view.tx.signer.as_bytes() {
        return Err(GuardFailure::new("wrong-signer"));
    }

    if row.state == CertState::Revoked {
        return Err(GuardFailure::new("already-revoked"));
    }
    // Expiry window: the request must name the certificate's expiry and
    // arrive before it lapses.
    if aux.expiry != row.expiry {
        return Err(GuardFailure::new("expiry-mismatch"));
    }
    if aux.request_day > row.expiry {
        return Err(GuardFailure::new("certificate-expired"));
    }
    Ok(())
}

fn revoke_op(state: &mut ContractState, view: &TxView<'_>) -> Result<OpMetrics, GuardFailure> {
    let aux = RevokeAux::decode(view.aux).map_err(|_| GuardFailure::new("malformed-request"))?;
    let mut row_key = b"row:".to_vec();
    row_key.extend_from_slice(&aux.user);
    let row_bytes = state.get(&row_key).expect("guard checked row");
    let mut row = decode_row(&aux.user, row_bytes).expect("guard checked row");
    row.state = CertState::Revoked;
    state.set(row_key, encode_row(&row));
    Ok(Vec::new())
}

/// The revocation program: `enroll` and `revoke`.
pub fn revocation_program() -> Bytecode {
    Bytecode {
        name: REVOCATION_PROGRAM,
        entries: alloc::vec![
            OpcodeEntry {
                name: "enroll",
                req: enroll_guard,
                op: enroll_op,
            },
            OpcodeEntry {
                name: "revoke",
                req: revoke_guard,
                op: revoke_op,
            },
        ],
    }
}

/// Build a signed revocation-request transaction for `user`.
pub fn revocation_request(
    keys: &SigKeypair,
    nonce: u64,
    contract: Digest,
    user: &[u8],
    expiry: Day,
    request_day: Day,
) -> Transaction {
    let aux = RevokeAux {
        user: user.to_vec(),
        expiry,
        request_day,
    };
    Transaction::create(
        keys,
        nonce,
        &crate::ledger::tx::TxCall::Call {
            contract,
            op: "revoke".into(),
        },
        aux.canon_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn civil_day_round_trips_table_dates() {
        for (y, m) in [(2021, 12), (2022, 1), (2022, 6), (2022, 11), (2022, 12)] {
            let day = day_from_civil(y, m, 15);
            assert_eq!(month_year(day), (y, m));
        }
        assert_eq!(render_month_year(day_from_civil(2021, 12, 1)), "Dec, 2021");
    }

    #[test]
    fn revoke_aux_round_trips_and_reads_as_marker() {
        let aux = RevokeAux {
            user: b"bob".to_vec(),
            expiry: day_from_civil(2021, 12, 31),
            request_day: day_from_civil(2021, 6, 1),
        };
        let decoded = RevokeAux::decode(&aux.canon_bytes()).unwrap();
        assert_eq!(decoded, aux);
        assert_eq!(decoded.marker(), "[bob:revoked]");
    }

    #[test]
    fn enroll_aux_round_trips() {
        let aux = EnrollAux {
            user: b"alice".to_vec(),
            owner: Digest::of(b"alice-key"),
            sn: BitPrefix { len: 3, bits: 5 },
            expiry: day_from_civil(2022, 12, 31),
        };
        assert_eq!(EnrollAux::decode(&aux.canon_bytes()).unwrap(), aux);
    }
}
