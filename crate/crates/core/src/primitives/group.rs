//! Symmetric bilinear group used by the certificate scheme.
//!
//! This is the *mock* instantiation: the source group is Z_q additive, the
//! target group is written multiplicatively but stored as an exponent of a
//! fixed generator, and `pair(a·P, b·P) = g^(a·b)`. Bilinearity and
//! non-degeneracy hold exactly; discrete logs are trivial, so it offers no
//! secrecy whatsoever. The algebraic identities the protocol relies on are
//! the test target, and every consumer goes through this module's API so a
//! genuine pairing curve can be slotted in behind it.
//!
//! `q = 2^61 - 1` (a Mersenne prime), so u128 intermediates never overflow.

use rand_core::RngCore;

use crate::codec::Digest;
use crate::primitives::hash::expand;

/// Prime order of both groups.
pub const GROUP_ORDER: u64 = (1u64 << 61) - 1;

fn reduce(v: u128) -> u64 {
    (v % GROUP_ORDER as u128) as u64
}

/// A scalar in Z/qZ.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Scalar(u64);

impl Scalar {
    pub const ZERO: Scalar = Scalar(0);
    pub const ONE: Scalar = Scalar(1);

    pub fn new(v: u64) -> Scalar {
        Scalar(v % GROUP_ORDER)
    }

    /// Uniform scalar via rejection sampling on the low 61 bits.
    pub fn random(rng: &mut impl RngCore) -> Scalar {
        loop {
            let v = rng.next_u64() >> 3;
            if v < GROUP_ORDER {
                return Scalar(v);
            }
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn add(self, other: Scalar) -> Scalar {
        Scalar(reduce(self.0 as u128 + other.0 as u128))
    }

    pub fn mul(self, other: Scalar) -> Scalar {
        Scalar(reduce(self.0 as u128 * other.0 as u128))
    }

    pub fn to_be_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }
}

/// An element of the source group G1 (written additively).
///
/// The element `s·P` is represented by `s mod q`; the generator `P` is `1`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct G1(u64);

impl G1 {
    pub const IDENTITY: G1 = G1(0);
    /// The fixed generator P.
    pub const GENERATOR: G1 = G1(1);

    pub fn add(self, other: G1) -> G1 {
        G1(reduce(self.0 as u128 + other.0 as u128))
    }

    pub fn scalar_mul(self, s: Scalar) -> G1 {
        G1(reduce(self.0 as u128 * s.0 as u128))
    }

    /// Fixed-width big-endian encoding.
    pub fn to_be_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }

    pub fn from_be_bytes(bytes: [u8; 8]) -> G1 {
        G1(u64::from_be_bytes(bytes) % GROUP_ORDER)
    }
}

/// An element of the target group G2, stored as the exponent of the fixed
/// generator `g = pair(P, P)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Gt(u64);

impl Gt {
    pub const IDENTITY: Gt = Gt(0);

    pub fn mul(self, other: Gt) -> Gt {
        Gt(reduce(self.0 as u128 + other.0 as u128))
    }

    pub fn div(self, other: Gt) -> Gt {
        Gt(reduce(self.0 as u128 + (GROUP_ORDER - other.0) as u128))
    }

    pub fn pow(self, s: Scalar) -> Gt {
        Gt(reduce(self.0 as u128 * s.0 as u128))
    }

    pub fn to_be_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }
}

/// The symmetric pairing `ê: G1 × G1 → G2`.
pub fn pair(a: G1, b: G1) -> Gt {
    Gt(reduce(a.0 as u128 * b.0 as u128))
}

/// Tags selecting which hash-to-group function is applied.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GroupHash {
    /// `H1 : {0,1}* → G1`
    H1,
    /// `H5 : {0,1}* → G1`
    H5,
}

/// Hash an arbitrary byte string to a G1 element.
pub fn hash_to_g1(tag: GroupHash, msg: &[u8]) -> G1 {
    let domain: &[u8] = match tag {
        GroupHash::H1 => b"covenant/g1/h1",
        GroupHash::H5 => b"covenant/g1/h5",
    };
    let bytes = expand(domain, msg, 8);
    G1::from_be_bytes(bytes.try_into().unwrap())
}

/// `H2 : G2 → {0,1}^(8·n_bytes)` — mask derivation from a target-group
/// element; output length equals the payload being masked.
pub fn hash_gt(g: Gt, n_bytes: usize) -> alloc::vec::Vec<u8> {
    expand(b"covenant/gt/h2", &g.to_be_bytes(), n_bytes)
}

/// Digest of a G1 element's canonical encoding, for transcripts.
pub fn g1_digest(p: G1) -> Digest {
    Digest::of(&p.to_be_bytes())
}
