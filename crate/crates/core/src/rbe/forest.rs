//! The Merkle forest that compresses registered (id, pk) pairs.
//!
//! Every tree is a full binary tree over leaf pairs. A depth-1 tree holds a
//! single pair with root `Hash(hk_1, id‖pk)`; two depth-d trees merge into a
//! depth-(d+1) tree with root `Hash(hk_{d+1}, rt_L‖rt_R)`, always taking the
//! earlier-registered tree as the left subtree. Node height j hashes with
//! key `hk_j`, so a depth-d tree holds `2^(d-1)` users and its root sits at
//! height d. After n registrations the multiset of tree depths mirrors the
//! binary representation of n.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::codec::{Canon, CodecError, Decoder, Digest, Encoder};
use crate::primitives::hash::{crhf_hash, HashKey};

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum RbeError {
    #[error("identity is not registered")]
    UnknownId,
    #[error("identity is already registered")]
    DuplicateId,
    #[error("forest depth exceeds the available hash keys")]
    OutOfHashKeys,
    #[error("malformed input")]
    Malformed,
}

/// A registered (id, pk) leaf pair: `(h_0^0, h_0^1)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LeafPair {
    pub id: Vec<u8>,
    pub pk: Vec<u8>,
}

impl Canon for LeafPair {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.id).bytes(&self.pk);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(LeafPair {
            id: dec.bytes()?,
            pk: dec.bytes()?,
        })
    }
}

/// `Hash(hk_1, id‖pk)` with the length-prefixed leaf encoding.
pub fn leaf_hash(hk1: &HashKey, leaf: &LeafPair) -> Digest {
    crhf_hash(hk1, &leaf.canon_bytes())
}

/// `Hash(hk_h, left‖right)` with fixed-width digest concatenation.
pub fn node_hash(hk: &HashKey, left: &Digest, right: &Digest) -> Digest {
    let mut bytes = [0u8; 64];
    bytes[..32].copy_from_slice(left.as_bytes());
    bytes[32..].copy_from_slice(right.as_bytes());
    crhf_hash(hk, &bytes)
}

/// A full binary tree over leaf pairs, with every level cached.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tree {
    pub leaves: Vec<LeafPair>,
    /// `levels[h-1]` holds the height-h nodes; the last level is the root.
    levels: Vec<Vec<Digest>>,
}

impl Tree {
    /// Build a tree over `leaves` (whose length must be a power of two).
    /// Needs `hks[0..depth]`.
    pub fn build(leaves: Vec<LeafPair>, hks: &[HashKey]) -> Result<Tree, RbeError> {
        if leaves.is_empty() || !leaves.len().is_power_of_two() {
            return Err(RbeError::Malformed);
        }
        let depth = leaves.len().trailing_zeros() as usize + 1;
        if hks.len() < depth {
            return Err(RbeError::OutOfHashKeys);
        }
        let mut levels = Vec::with_capacity(depth);
        levels.push(leaves.iter().map(|l| leaf_hash(&hks[0], l)).collect::<Vec<_>>());
        for h in 2..=depth {
            let below: &Vec<Digest> = levels.last().unwrap();
            let level: Vec<Digest> = below
                .chunks(2)
                .map(|pair| node_hash(&hks[h - 1], &pair[0], &pair[1]))
                .collect();
            levels.push(level);
        }
        Ok(Tree { leaves, levels })
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn root(&self) -> Digest {
        self.levels.last().unwrap()[0]
    }

    pub fn position_of(&self, id: &[u8]) -> Option<usize> {
        self.leaves.iter().position(|l| l.id == id)
    }
}

/// Which sibling of a path level is the path node itself.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    Left,
    Right,
}

/// One interior level of an opening: both height-h siblings and which of
/// them lies on the path.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PathLevel {
    pub left: Digest,
    pub right: Digest,
    pub dir: Direction,
}

/// A Merkle opening `[(h_0^0, h_0^1), (h_1^0, h_1^1, b_1), …, rt]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MerkleOpening {
    pub leaf: LeafPair,
    pub path: Vec<PathLevel>,
    pub root: Digest,
    pub tree_index: u32,
}

impl MerkleOpening {
    pub fn claimed_depth(&self) -> u32 {
        self.path.len() as u32 + 1
    }
}

impl Canon for MerkleOpening {
    fn encode_into(&self, enc: &mut Encoder) {
        self.leaf.encode_into(enc);
        enc.list_len(self.path.len());
        for level in &self.path {
            enc.digest(&level.left).digest(&level.right).u8(match level.dir {
                Direction::Left => 0,
                Direction::Right => 1,
            });
        }
        enc.digest(&self.root).u32(self.tree_index);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let leaf = LeafPair::decode_from(dec)?;
        let n = dec.list_len()?;
        let mut path = Vec::with_capacity(n);
        for _ in 0..n {
            path.push(PathLevel {
                left: dec.digest()?,
                right: dec.digest()?,
                dir: match dec.u8()? {
                    0 => Direction::Left,
                    1 => Direction::Right,
                    _ => return Err(CodecError::BadValue("direction")),
                },
            });
        }
        Ok(MerkleOpening {
            leaf,
            path,
            root: dec.digest()?,
            tree_index: dec.u32()?,
        })
    }
}

/// Check the level equations of an opening against a root:
/// `h_j^{b_j} = Hash(hk_j, h_{j-1}^0 ‖ h_{j-1}^1)` for interior levels and
/// `rt = Hash(hk_d, h_{d-1}^0 ‖ h_{d-1}^1)` at the top.
pub fn verify_path(opening: &MerkleOpening, root: &Digest, hks: &[HashKey]) -> bool {
    let depth = opening.claimed_depth() as usize;
    if hks.len() < depth {
        return false;
    }
    let mut cur = leaf_hash(&hks[0], &opening.leaf);
    for (idx, level) in opening.path.iter().enumerate() {
        let on_path = match level.dir {
            Direction::Left => &level.left,
            Direction::Right => &level.right,
        };
        if *on_path != cur {
            return false;
        }
        // Parent sits at height idx + 2 and hashes with hk_{idx+2}.
        cur = node_hash(&hks[idx + 1], &level.left, &level.right);
    }
    cur == *root
}

/// The auxiliary forest: trees in creation order plus the registration
/// order of all identities.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MerkleForest {
    pub trees: Vec<Tree>,
    pub order: Vec<Vec<u8>>,
    /// Total number of merges performed since the forest was empty.
    pub merges: u64,
}

impl MerkleForest {
    pub fn new() -> MerkleForest {
        MerkleForest::default()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: &[u8]) -> bool {
        self.order.iter().any(|o| o == id)
    }

    /// Tree depths, in forest order (strictly decreasing once merged).
    pub fn depths(&self) -> Vec<u32> {
        self.trees.iter().map(|t| t.depth()).collect()
    }

    /// Roots and depths, the `(rt_i, d_i)` part of the public parameters.
    pub fn roots(&self) -> Vec<(Digest, u32)> {
        self.trees.iter().map(|t| (t.root(), t.depth())).collect()
    }

    pub fn find(&self, id: &[u8]) -> Option<(usize, usize)> {
        self.trees
            .iter()
            .enumerate()
            .find_map(|(ti, tree)| tree.position_of(id).map(|li| (ti, li)))
    }

    /// Append a new depth-1 tree for the pair and run compression.
    /// Returns the number of merges performed.
    pub fn register(
        &mut self,
        id: &[u8],
        pk: &[u8],
        hks: &[HashKey],
    ) -> Result<u64, RbeError> {
        if self.contains(id) {
            return Err(RbeError::DuplicateId);
        }
        let leaf = LeafPair {
            id: id.to_vec(),
            pk: pk.to_vec(),
        };
        self.trees.push(Tree::build(alloc::vec![leaf], hks)?);
        self.order.push(id.to_vec());
        let merged = self.merge(hks)?;
        self.merges += merged;
        Ok(merged)
    }

    /// Merge trees of equal depth (earlier-registered tree on the left)
    /// until all depths are distinct. Returns the number of merges.
    pub fn merge(&mut self, hks: &[HashKey]) -> Result<u64, RbeError> {
        let mut merged = 0u64;
        loop {
            let mut pair: Option<(usize, usize)> = None;
            'scan: for i in 0..self.trees.len() {
                for j in (i + 1)..self.trees.len() {
                    if self.trees[i].depth() == self.trees[j].depth() {
                        pair = Some((i, j));
                        break 'scan;
                    }
                }
            }
            let Some((i, j)) = pair else {
                return Ok(merged);
            };
            let right = self.trees.remove(j);
            let left = core::mem::replace(
                &mut self.trees[i],
                Tree {
                    leaves: Vec::new(),
                    levels: Vec::new(),
                },
            );
            let mut leaves = left.leaves;
            leaves.extend(right.leaves);
            self.trees[i] = Tree::build(leaves, hks)?;
            merged += 1;
        }
    }

    /// The Merkle opening proving `id`'s membership. The forest must
    /// have its levels built (decoded forests need `rebuild` first).
    pub fn opening(&self, id: &[u8]) -> Result<MerkleOpening, RbeError> {
        let (tree_index, leaf_index) = self.find(id).ok_or(RbeError::UnknownId)?;
        let tree = &self.trees[tree_index];
        let depth = tree.depth() as usize;
        let mut path = Vec::with_capacity(depth - 1);
        for h in 1..depth {
            let node_idx = leaf_index >> (h - 1);
            let parent_idx = node_idx >> 1;
            let level = &tree.levels[h - 1];
            path.push(PathLevel {
                left: level[2 * parent_idx],
                right: level[2 * parent_idx + 1],
                dir: if node_idx & 1 == 0 {
                    Direction::Left
                } else {
                    Direction::Right
                },
            });
        }
        Ok(MerkleOpening {
            leaf: tree.leaves[leaf_index].clone(),
            path,
            root: tree.root(),
            tree_index: tree_index as u32,
        })
    }

    /// All ids, registration order.
    pub fn ids(&self) -> &[Vec<u8>] {
        &self.order
    }

    /// Ids as a set, for soundness comparisons.
    pub fn id_set(&self) -> BTreeSet<Vec<u8>> {
        self.order.iter().cloned().collect()
    }
}

impl Canon for MerkleForest {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.list_len(self.trees.len());
        for tree in &self.trees {
            enc.list_len(tree.leaves.len());
            for leaf in &tree.leaves {
                leaf.encode_into(enc);
            }
        }
        enc.list_len(self.order.len());
        for id in &self.order {
            enc.bytes(id);
        }
        enc.u64(self.merges);
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        // Trees round-trip as leaves only; levels are recomputed lazily via
        // `rebuild` because decoding has no access to the hash keys.
        let nt = dec.list_len()?;
        let mut raw_trees = Vec::with_capacity(nt);
        for _ in 0..nt {
            let nl = dec.list_len()?;
            let mut leaves = Vec::with_capacity(nl);
            for _ in 0..nl {
                leaves.push(LeafPair::decode_from(dec)?);
            }
            raw_trees.push(leaves);
        }
        let no = dec.list_len()?;
        let mut order = Vec::with_capacity(no);
        for _ in 0..no {
            order.push(dec.bytes()?);
        }
        let merges = dec.u64()?;
        Ok(MerkleForest {
            trees: raw_trees
                .into_iter()
                .map(|leaves| Tree {
                    leaves,
                    levels: Vec::new(),
                })
                .collect(),
            order,
            merges,
        })
    }
}

impl MerkleForest {
    /// Recompute all tree levels after decoding.
    pub fn rebuild(&mut self, hks: &[HashKey]) -> Result<(), RbeError> {
        for tree in &mut self.trees {
            *tree = Tree::build(core::mem::take(&mut tree.leaves), hks)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hks(n: u64) -> Vec<HashKey> {
        (1..=n).map(|i| HashKey::derive(&[7u8; 32], i)).collect()
    }

    fn forest_with(n: usize, hks: &[HashKey]) -> MerkleForest {
        let mut f = MerkleForest::new();
        for i in 0..n {
            let id = alloc::format!("id-{i}").into_bytes();
            let pk = [i as u8; 32];
            f.register(&id, &pk, hks).unwrap();
        }
        f
    }

    #[test]
    fn two_depth_one_trees_merge_into_depth_two() {
        let hks = hks(8);
        let f = forest_with(2, &hks);
        assert_eq!(f.depths(), vec![2]);
        assert_eq!(f.merges, 1);
    }

    #[test]
    fn distinct_depths_are_a_merge_fixpoint() {
        let hks = hks(8);
        let mut f = forest_with(3, &hks); // depths (2, 1)
        let before = f.roots();
        assert_eq!(f.merge(&hks).unwrap(), 0);
        assert_eq!(f.roots(), before);
    }

    #[test]
    fn seven_then_eight_registrations_follow_popcount() {
        let hks = hks(8);
        let f7 = forest_with(7, &hks);
        assert_eq!(f7.depths(), vec![3, 2, 1]);
        let f8 = forest_with(8, &hks);
        assert_eq!(f8.depths(), vec![4]);
    }

    #[test]
    fn duplicate_registration_is_rejected() {
        let hks = hks(8);
        let mut f = forest_with(3, &hks);
        assert_eq!(
            f.register(b"id-1", &[9u8; 32], &hks),
            Err(RbeError::DuplicateId)
        );
    }

    #[test]
    fn depth_one_opening_is_leaf_and_root_only() {
        let hks = hks(8);
        let f = forest_with(1, &hks);
        let opening = f.opening(b"id-0").unwrap();
        assert!(opening.path.is_empty());
        assert_eq!(opening.root, leaf_hash(&hks[0], &opening.leaf));
        assert!(verify_path(&opening, &opening.root, &hks));
    }

    #[test]
    fn every_opening_verifies_for_sixteen_users() {
        let hks = hks(8);
        let f = forest_with(16, &hks);
        assert_eq!(f.depths(), vec![5]);
        for i in 0..16 {
            let id = alloc::format!("id-{i}").into_bytes();
            let opening = f.opening(&id).unwrap();
            assert!(verify_path(&opening, &opening.root, &hks), "user {i}");
            assert_eq!(opening.leaf.id, id);
        }
        assert!(matches!(
            f.opening(b"ghost"),
            Err(RbeError::UnknownId)
        ));
    }

    #[test]
    fn forest_canon_round_trips_and_rebuilds_identical_roots() {
        let hks = hks(8);
        let f = forest_with(11, &hks);
        let mut decoded = MerkleForest::decode(&f.canon_bytes()).unwrap();
        decoded.rebuild(&hks).unwrap();
        assert_eq!(decoded.roots(), f.roots());
        assert_eq!(decoded.merges, f.merges);
        assert_eq!(decoded.canon_bytes(), f.canon_bytes());
    }
}
