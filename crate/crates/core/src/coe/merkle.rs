use sha2::{Digest, Sha256};

use super::{PathNode, Side};

/// Head preceding round 0.
pub const GENESIS_HEAD: [u8; 32] = [0u8; 32];

/// Receipts with longer paths are rejected (2^40 leaves per round is far beyond any real batch).
pub const MAX_AUDIT_PATH: usize = 40;

const NODE_PREFIX: u8 = 0x01;

pub fn node_hash(left: &[u8], right: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([NODE_PREFIX]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// `head_n = H(head_{n-1} || root_n)`.
pub fn chain_head(prev_head: &[u8; 32], root: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(prev_head);
    h.update(root);
    h.finalize().into()
}

/// All tree levels, leaves first. Odd levels pair their last node with itself.
pub fn merkle_levels(leaves: &[[u8; 32]]) -> Vec<Vec<[u8; 32]>> {
    assert!(!leaves.is_empty(), "merkle tree needs at least one leaf");
    let mut levels = vec![leaves.to_vec()];
    while levels.last().expect("non-empty").len() > 1 {
        let cur = levels.last().expect("non-empty");
        let next = cur
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => node_hash(l, r),
                [only] => node_hash(only, only),
                _ => unreachable!(),
            })
            .collect();
        levels.push(next);
    }
    levels
}

pub(super) fn audit_path(levels: &[Vec<[u8; 32]>], mut index: usize) -> Vec<PathNode> {
    let mut path = Vec::with_capacity(levels.len().saturating_sub(1));
    for level in &levels[..levels.len() - 1] {
        let (side, sibling) = if index % 2 == 0 {
            (Side::Right, level.get(index + 1).unwrap_or(&level[index]))
        } else {
            (Side::Left, &level[index - 1])
        };
        path.push(PathNode { side, digest: sibling.to_vec() });
        index /= 2;
    }
    path
}

/// Folds an audit path from a leaf digest up to the root.
///
/// Returns `None` when a sibling digest has the wrong length, a side
/// disagrees with the leaf index, or the index has bits beyond the path.
pub fn fold_audit_path(leaf: &[u8; 32], leaf_index: u64, path: &[PathNode]) -> Option<[u8; 32]> {
    if path.len() > MAX_AUDIT_PATH || (path.len() < 64 && leaf_index >> path.len() != 0) {
        return None;
    }
    let mut node = *leaf;
    for (level, step) in path.iter().enumerate() {
        if step.digest.len() != 32 {
            return None;
        }
        let expected = if (leaf_index >> level) & 1 == 0 { Side::Right } else { Side::Left };
        if step.side != expected {
            return None;
        }
        node = match step.side {
            Side::Right => node_hash(&node, &step.digest),
            Side::Left => node_hash(&step.digest, &node),
        };
    }
    Some(node)
}
