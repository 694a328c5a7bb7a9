//! Certificate-based encryption with contract-transparent revocation.
//!
//! The certificate authority keeps a master secret `s_C` (with `Q = s_C·P`
//! published) and a blinding secret `x` (with `x·P` published). Users hold
//! `(s_B, p_B = s_B·P)` plus an m-bit serial number placing them in the
//! revocation tree. Each period the CA reads the confirmed revocation table
//! from the chain and issues reconfirmation certificates
//! `Cert_i = s_C·T_i + x·P_k` on the subtree covering each still-valid user.
//! Decryption needs both the user secret and a current-period certificate,
//! so a confirmed revocation silently disables the user from that period on.

pub mod table;
pub mod tree;

use alloc::vec::Vec;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::primitives::group::{hash_gt, hash_to_g1, pair, G1, GroupHash, Gt, Scalar};
use rand_core::RngCore;

pub use table::{
    day_from_civil, month_year, render_month_year, revocation_program, revocation_request,
    CertState, Day, EnrollAux, RevocationTable, RevokeAux, TableRow, REVOCATION_PROGRAM,
};
pub use tree::{cover_leaves, cover_strings, subset_cover, BitPrefix};

/// Digest length of the integrity tag carried inside every plaintext so
/// decryption failure is decidable.
pub const MSG_TAG_LEN: usize = 32;

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum CbeError {
    #[error("serial-number tree is full")]
    TreeFull,
}

/// Public system parameters: generator and hash functions are fixed by the
/// group module; `q_pub = s_C·P` and `x_pub = x·P` are published at setup.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CbeParams {
    pub q_pub: G1,
    pub x_pub: G1,
    /// Depth m of the serial-number tree (capacity 2^m users).
    pub tree_depth: u8,
    pub n_periods: u32,
}

impl Canon for CbeParams {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.q_pub.to_be_bytes())
            .bytes(&self.x_pub.to_be_bytes())
            .u8(self.tree_depth)
            .u32(self.n_periods);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let q_bytes: [u8; 8] = dec
            .bytes()?
            .try_into()
            .map_err(|_| CodecError::BadValue("q_pub"))?;
        let x_bytes: [u8; 8] = dec
            .bytes()?
            .try_into()
            .map_err(|_| CodecError::BadValue("x_pub"))?;
        Ok(CbeParams {
            q_pub: G1::from_be_bytes(q_bytes),
            x_pub: G1::from_be_bytes(x_bytes),
            tree_depth: dec.u8()?,
            n_periods: dec.u32()?,
        })
    }
}

/// The CA's secrets together with the published parameters.
#[derive(Clone)]
pub struct CaKeys {
    pub msk: Scalar,
    pub x: Scalar,
    pub params: CbeParams,
}

/// A user's key material and tree position.
#[derive(Clone, Debug)]
pub struct UserKeys {
    pub secret: Scalar,
    pub public: G1,
    pub info: Vec<u8>,
    pub sn: BitPrefix,
}

impl UserKeys {
    /// What a message sender learns from the user's initial certificate.
    pub fn recipient(&self) -> Recipient {
        Recipient {
            info: self.info.clone(),
            public: self.public,
            sn: self.sn,
        }
    }
}

/// Public recipient data a sender encrypts against.
#[derive(Clone)]
pub struct Recipient {
    pub info: Vec<u8>,
    pub public: G1,
    pub sn: BitPrefix,
}

/// Period certificate on the cover node `node` (prefix length `level`).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ReconfirmationCert {
    pub period: u32,
    pub cert: G1,
    pub level: u8,
    pub node: BitPrefix,
}

/// `ct = [rP, rP_1 … rP_m, V]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CbeCiphertext {
    pub period: u32,
    pub r_p: G1,
    pub r_pj: Vec<G1>,
    pub v: Vec<u8>,
}

impl Canon for CbeCiphertext {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u32(self.period).bytes(&self.r_p.to_be_bytes());
        enc.list_len(self.r_pj.len());
        for p in &self.r_pj {
            enc.bytes(&p.to_be_bytes());
        }
        enc.bytes(&self.v);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let period = dec.u32()?;
        let g1 = |dec: &mut Decoder<'_>| -> Result<G1, CodecError> {
            let bytes: [u8; 8] = dec
                .bytes()?
                .try_into()
                .map_err(|_| CodecError::BadValue("g1"))?;
            Ok(G1::from_be_bytes(bytes))
        };
        let r_p = g1(dec)?;
        let n = dec.list_len()?;
        let mut r_pj = Vec::with_capacity(n);
        for _ in 0..n {
            r_pj.push(g1(dec)?);
        }
        Ok(CbeCiphertext {
            period,
            r_p,
            r_pj,
            v: dec.bytes()?,
        })
    }
}

/// `T_i = H5(Q ‖ i)`: the period point.
pub fn period_point(q_pub: G1, period: u32) -> G1 {
    let mut enc = Encoder::new();
    enc.bytes(&q_pub.to_be_bytes()).u32(period);
    hash_to_g1(GroupHash::H5, &enc.finish())
}

/// `P_k = H1(b_1 … b_k)`: the tree-node point.
pub fn node_point(node: &BitPrefix) -> G1 {
    hash_to_g1(GroupHash::H1, &node.to_bit_string())
}

/// `P_B' = H1(info)`: the identity point.
pub fn info_point(info: &[u8]) -> G1 {
    hash_to_g1(GroupHash::H1, info)
}

/// The CA: key material plus the serial-number allocator.
pub struct CbeAuthority {
    pub keys: CaKeys,
    next_leaf: u32,
}

/// Generate CA keys and published parameters.
pub fn cbe_setup(seed: u64, n_periods: u32, tree_depth: u8) -> CbeAuthority {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let msk = Scalar::random(&mut rng);
    let x = Scalar::random(&mut rng);
    CbeAuthority {
        keys: CaKeys {
            msk,
            x,
            params: CbeParams {
                q_pub: G1::GENERATOR.scalar_mul(msk),
                x_pub: G1::GENERATOR.scalar_mul(x),
                tree_depth,
                n_periods,
            },
        },
        next_leaf: 0,
    }
}

use rand_chacha::rand_core::SeedableRng as _;

impl CbeAuthority {
    pub fn params(&self) -> CbeParams {
        self.keys.params
    }

    /// Generate a user key pair and assign the next free leaf of the
    /// m-level tree as its serial number.
    pub fn keygen(&mut self, info: &[u8], rng: &mut impl RngCore) -> Result<UserKeys, CbeError> {
        let capacity = 1u32 << self.keys.params.tree_depth;
        if self.next_leaf >= capacity {
            return Err(CbeError::TreeFull);
        }
        let sn = BitPrefix::leaf(self.keys.params.tree_depth, self.next_leaf);
        self.next_leaf += 1;
        let secret = Scalar::random(rng);
        Ok(UserKeys {
            secret,
            public: G1::GENERATOR.scalar_mul(secret),
            info: info.to_vec(),
            sn,
        })
    }
}

/// Issue the period-`i` reconfirmation certificate for `user` against the
/// confirmed table, or `None` if the user is revoked or unknown.
///
/// The certificate is bound to the complete-subtree cover node containing
/// the user's leaf. When nothing is revoked the cover is the tree root,
/// whose level-0 point cannot be paired with the ciphertext's `rP_1 … rP_m`
/// vector, so issuance descends to the user's depth-1 prefix (still a fully
/// non-revoked subtree).
pub fn cbe_cert(
    keys: &CaKeys,
    period: u32,
    user: &[u8],
    table: &RevocationTable,
) -> Option<ReconfirmationCert> {
    let row = table.row(user)?;
    if row.state == CertState::Revoked {
        return None;
    }
    let sn = table.serial(user)?;
    let cover = subset_cover(keys.params.tree_depth, &table.revoked_leaves());
    let mut node = *cover.iter().find(|n| n.is_prefix_of(&sn))?;
    if node.len == 0 {
        node = sn.truncate(1);
    }
    let t_i = period_point(keys.params.q_pub, period);
    let p_k = node_point(&node);
    Some(ReconfirmationCert {
        period,
        cert: t_i.scalar_mul(keys.msk).add(p_k.scalar_mul(keys.x)),
        level: node.len,
        node,
    })
}

fn masked_payload_len(msg_len: usize) -> usize {
    msg_len + MSG_TAG_LEN
}

fn msg_tag(msg: &[u8]) -> Digest {
    let mut enc = Encoder::new();
    enc.bytes(b"covenant/cbe/tag").bytes(msg);
    enc.digest_value()
}

/// Encrypt `msg` to a recipient for period `i` with explicit randomness.
pub fn cbe_enc(
    params: &CbeParams,
    recipient: &Recipient,
    period: u32,
    msg: &[u8],
    r: Scalar,
) -> CbeCiphertext {
    let t_i = period_point(params.q_pub, period);
    let p_b_prime = info_point(&recipient.info);
    // g = ê(Q, T_i) · ê(p_B, P_B')
    let g = pair(params.q_pub, t_i).mul(pair(recipient.public, p_b_prime));
    let g_r = g.pow(r);

    let mut payload = Vec::with_capacity(masked_payload_len(msg.len()));
    payload.extend_from_slice(msg);
    payload.extend_from_slice(msg_tag(msg).as_bytes());
    let mask = hash_gt(g_r, payload.len());
    let v: Vec<u8> = payload.iter().zip(mask.iter()).map(|(p, m)| p ^ m).collect();

    let r_pj = (1..=recipient.sn.len)
        .map(|j| node_point(&recipient.sn.truncate(j)).scalar_mul(r))
        .collect();
    CbeCiphertext {
        period,
        r_p: G1::GENERATOR.scalar_mul(r),
        r_pj,
        v,
    }
}

/// Decrypt with the user secret and a period certificate. Any mismatch —
/// wrong period, revoked cover node, tampered bytes — fails the integrity
/// tag and yields `None`.
pub fn cbe_dec(
    user: &UserKeys,
    cert: &ReconfirmationCert,
    x_pub: G1,
    ct: &CbeCiphertext,
) -> Option<Vec<u8>> {
    if ct.v.len() < MSG_TAG_LEN {
        return None;
    }
    let level = cert.level as usize;
    if level == 0 || level > ct.r_pj.len() {
        return None;
    }
    let r_pk = ct.r_pj[level - 1];
    let p_b_prime = info_point(&user.info);
    // M = V ⊗ H2( ê(rP, Cert_i + s_B·P_B') / ê(xP, rP_k) )
    let numerator = pair(ct.r_p, cert.cert.add(p_b_prime.scalar_mul(user.secret)));
    let denominator = pair(x_pub, r_pk);
    let mask = hash_gt(numerator.div(denominator), ct.v.len());
    let payload: Vec<u8> = ct.v.iter().zip(mask.iter()).map(|(c, m)| c ^ m).collect();

    let msg_len = payload.len() - MSG_TAG_LEN;
    let (msg, tag) = payload.split_at(msg_len);
    if msg_tag(msg).as_bytes() != tag {
        return None;
    }
    Some(msg.to_vec())
}

/// The decryption gt-element computed the encryptor's way; exposed for the
/// algebraic identity checks.
pub fn encryption_mask_base(params: &CbeParams, recipient: &Recipient, period: u32, r: Scalar) -> Gt {
    let t_i = period_point(params.q_pub, period);
    pair(params.q_pub, t_i)
        .mul(pair(recipient.public, info_point(&recipient.info)))
        .pow(r)
}
