//! The m-level binary tree of certificate serial numbers and the
//! complete-subtree cover of non-revoked leaves.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A node of the serial-number tree, identified by the bit path from the
/// root: `b_1 … b_len` (MSB first). `len = 0` is the root; `len = m` is a
/// leaf, i.e. a serial number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct BitPrefix {
    pub len: u8,
    pub bits: u32,
}

impl BitPrefix {
    pub const ROOT: BitPrefix = BitPrefix { len: 0, bits: 0 };

    /// The m-bit serial number of leaf `index`.
    pub fn leaf(m: u8, index: u32) -> BitPrefix {
        debug_assert!(index < (1u32 << m));
        BitPrefix { len: m, bits: index }
    }

    /// Bit `b_j` for `j` in `1..=len`.
    pub fn bit(&self, j: u8) -> bool {
        debug_assert!(j >= 1 && j <= self.len);
        (self.bits >> (self.len - j)) & 1 == 1
    }

    pub fn child(&self, right: bool) -> BitPrefix {
        BitPrefix {
            len: self.len + 1,
            bits: (self.bits << 1) | right as u32,
        }
    }

    /// The length-`j` prefix `b_1 … b_j`.
    pub fn truncate(&self, j: u8) -> BitPrefix {
        debug_assert!(j <= self.len);
        BitPrefix {
            len: j,
            bits: self.bits >> (self.len - j),
        }
    }

    pub fn is_prefix_of(&self, other: &BitPrefix) -> bool {
        self.len <= other.len && other.truncate(self.len) == *self
    }

    /// ASCII bit string `b"b_1…b_len"`; what the hash-to-group functions
    /// consume. Empty for the root.
    pub fn to_bit_string(&self) -> Vec<u8> {
        (1..=self.len)
            .map(|j| if self.bit(j) { b'1' } else { b'0' })
            .collect()
    }

    /// Leaf range `[lo, hi)` this node covers in an m-level tree.
    fn leaf_range(&self, m: u8) -> (u32, u32) {
        let span = 1u32 << (m - self.len);
        let lo = self.bits << (m - self.len);
        (lo, lo + span)
    }
}

impl fmt::Display for BitPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str("root");
        }
        for j in 1..=self.len {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Minimal complete-subtree cover of the non-revoked leaves: the maximal
/// subtrees containing no revoked serial number.
///
/// `revoked` holds leaf indices in `0..2^m`.
pub fn subset_cover(m: u8, revoked: &BTreeSet<u32>) -> BTreeSet<BitPrefix> {
    let mut cover = BTreeSet::new();
    descend(m, BitPrefix::ROOT, revoked, &mut cover);
    cover
}

fn descend(m: u8, node: BitPrefix, revoked: &BTreeSet<u32>, cover: &mut BTreeSet<BitPrefix>) {
    let (lo, hi) = node.leaf_range(m);
    let any_revoked = revoked.range(lo..hi).next().is_some();
    if !any_revoked {
        cover.insert(node);
        return;
    }
    if node.len == m {
        return; // a revoked leaf contributes nothing
    }
    descend(m, node.child(false), revoked, cover);
    descend(m, node.child(true), revoked, cover);
}

/// Expand a cover to the exact set of leaf indices it spans.
pub fn cover_leaves(m: u8, cover: &BTreeSet<BitPrefix>) -> BTreeSet<u32> {
    let mut leaves = BTreeSet::new();
    for node in cover {
        let (lo, hi) = node.leaf_range(m);
        leaves.extend(lo..hi);
    }
    leaves
}

/// Render for reports: the bit strings of the cover nodes.
pub fn cover_strings(cover: &BTreeSet<BitPrefix>) -> Vec<String> {
    cover
        .iter()
        .map(|n| {
            if n.len == 0 {
                String::from("root")
            } else {
                String::from_utf8(n.to_bit_string()).unwrap()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefix(s: &str) -> BitPrefix {
        let mut p = BitPrefix::ROOT;
        for c in s.chars() {
            p = p.child(c == '1');
        }
        p
    }

    #[test]
    fn empty_revocation_covers_with_root() {
        let cover = subset_cover(3, &BTreeSet::new());
        assert_eq!(cover, BTreeSet::from([BitPrefix::ROOT]));
    }

    #[test]
    fn full_revocation_has_empty_cover() {
        let revoked: BTreeSet<u32> = (0..8).collect();
        assert!(subset_cover(3, &revoked).is_empty());
    }

    #[test]
    fn revoking_leaf_000_leaves_three_subtrees() {
        let cover = subset_cover(3, &BTreeSet::from([0]));
        assert_eq!(
            cover,
            BTreeSet::from([prefix("1"), prefix("01"), prefix("001")])
        );
    }

    /// Independent oracle: a node belongs to the minimal complete-subtree
    /// cover iff it is clean (no revoked leaf below) and its parent is not.
    fn oracle_cover(m: u8, revoked: &BTreeSet<u32>) -> BTreeSet<BitPrefix> {
        let clean = |node: &BitPrefix| {
            let (lo, hi) = node.leaf_range(m);
            revoked.range(lo..hi).next().is_none()
        };
        let mut all_nodes = alloc_nodes(m);
        all_nodes.retain(|node| {
            clean(node)
                && (node.len == 0 || {
                    let parent = node.truncate(node.len - 1);
                    !clean(&parent)
                })
        });
        all_nodes.into_iter().collect()
    }

    fn alloc_nodes(m: u8) -> Vec<BitPrefix> {
        let mut out = Vec::new();
        for len in 0..=m {
            for bits in 0..(1u32 << len) {
                out.push(BitPrefix { len, bits });
            }
        }
        out
    }

    #[test]
    fn exhaustive_depth_three_cover_matches_oracle_and_complement() {
        let all: BTreeSet<u32> = (0..8).collect();
        for mask in 0u32..256 {
            let revoked: BTreeSet<u32> = (0..8).filter(|i| mask >> i & 1 == 1).collect();
            let cover = subset_cover(3, &revoked);
            assert_eq!(cover, oracle_cover(3, &revoked), "mask {mask:#010b}");
            let covered = cover_leaves(3, &cover);
            let complement: BTreeSet<u32> = all.difference(&revoked).copied().collect();
            assert_eq!(covered, complement, "mask {mask:#010b}");
        }
    }
}
