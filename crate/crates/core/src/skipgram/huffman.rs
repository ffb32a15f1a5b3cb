//! Huffman coding tree over the vocabulary, for hierarchical softmax.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Binary tree with one leaf per vocabulary word, built by repeatedly
/// merging the two lowest-count nodes. Each of the |V| - 1 inner nodes owns
/// one row of the model's context matrix; a leaf's probability is the
/// product of branch sigmoids along its root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    /// Per leaf: inner-node parameter indices from the root down.
    paths: Vec<Vec<u32>>,
    /// Per leaf: branch taken at each path node (true = second child).
    codes: Vec<Vec<bool>>,
    inner_count: usize,
}

impl HuffmanTree {
    /// Build from vocabulary counts (indexed as in the vocabulary).
    ///
    /// Ties pick the node created earliest: leaves in vocabulary order,
    /// then merged nodes in creation order, so the tree is deterministic.
    pub fn build(counts: &[u64]) -> Result<Self> {
        let n = counts.len();
        if n < 2 {
            return Err(Error::VocabularyTooSmall(n));
        }
        // Node ids: 0..n leaves, n..2n-1 merged (inner) nodes.
        let mut parent = vec![0u32; 2 * n - 1];
        let mut branch = vec![false; 2 * n - 1];
        let mut heap: BinaryHeap<Reverse<(u64, u32)>> =
            (0..n).map(|i| Reverse((counts[i], i as u32))).collect();
        for next_id in n as u32..(2 * n - 1) as u32 {
            let Reverse((ca, a)) = heap.pop().expect("heap holds >= 2 nodes");
            let Reverse((cb, b)) = heap.pop().expect("heap holds >= 2 nodes");
            parent[a as usize] = next_id;
            branch[a as usize] = false;
            parent[b as usize] = next_id;
            branch[b as usize] = true;
            heap.push(Reverse((ca + cb, next_id)));
        }
        let root = (2 * n - 2) as u32;
        let mut paths = Vec::with_capacity(n);
        let mut codes = Vec::with_capacity(n);
        for leaf in 0..n as u32 {
            let mut path = Vec::new();
            let mut code = Vec::new();
            let mut node = leaf;
            while node != root {
                code.push(branch[node as usize]);
                node = parent[node as usize];
                path.push(node - n as u32); // inner parameter index
            }
            path.reverse();
            code.reverse();
            paths.push(path);
            codes.push(code);
        }
        Ok(HuffmanTree {
            paths,
            codes,
            inner_count: n - 1,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.paths.len()
    }

    pub fn inner_count(&self) -> usize {
        self.inner_count
    }

    /// Root-to-leaf inner-node indices and branch directions for one leaf.
    pub fn path(&self, leaf: usize) -> (&[u32], &[bool]) {
        (&self.paths[leaf], &self.codes[leaf])
    }

    pub fn code_len(&self, leaf: usize) -> usize {
        self.codes[leaf].len()
    }

    /// Weighted total code length; the quantity Huffman coding minimizes.
    pub fn weighted_code_length(&self, counts: &[u64]) -> u64 {
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c * self.code_len(i) as u64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaves_code_length_one() {
        let t = HuffmanTree::build(&[1, 1]).unwrap();
        assert_eq!(t.code_len(0), 1);
        assert_eq!(t.code_len(1), 1);
        assert_eq!(t.inner_count(), 1);
        // both paths consist of the single root node
        assert_eq!(t.path(0).0, &[0]);
        assert_eq!(t.path(1).0, &[0]);
        assert_ne!(t.path(0).1, t.path(1).1);
    }

    #[test]
    fn skewed_counts_give_known_lengths() {
        let t = HuffmanTree::build(&[4, 1, 1]).unwrap();
        assert_eq!(t.code_len(0), 1);
        assert_eq!(t.code_len(1), 2);
        assert_eq!(t.code_len(2), 2);
    }

    #[test]
    fn single_leaf_rejected() {
        assert!(matches!(
            HuffmanTree::build(&[5]),
            Err(Error::VocabularyTooSmall(1))
        ));
    }

    #[test]
    fn higher_count_never_longer_code() {
        let counts = [40, 20, 20, 10, 5, 3, 1, 1];
        let t = HuffmanTree::build(&counts).unwrap();
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] > counts[j] {
                    assert!(t.code_len(i) <= t.code_len(j));
                }
            }
        }
    }

    #[test]
    fn paths_end_at_distinct_leaves() {
        let t = HuffmanTree::build(&[7, 3, 3, 2, 1]).unwrap();
        // no leaf's (path, code) may prefix another's: codes are prefix-free
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let (pi, ci) = t.path(i);
                let (pj, cj) = t.path(j);
                let shared = pi
                    .iter()
                    .zip(pj)
                    .zip(ci.iter().zip(cj))
                    .take_while(|((a, b), _)| a == b)
                    .map(|(_, (x, y))| (x, y))
                    .collect::<Vec<_>>();
                assert!(
                    shared.iter().any(|(x, y)| x != y),
                    "codes of leaves {i} and {j} must diverge on their shared prefix"
                );
            }
        }
    }

    /// Minimum weighted code length over every binary tree shape, by
    /// splitting the leaf set into two nonempty parts recursively.
    fn optimal_cost(counts: &[u64]) -> u64 {
        fn go(mask: u32, counts: &[u64], memo: &mut Vec<Option<u64>>) -> u64 {
            if mask.count_ones() <= 1 {
                return 0;
            }
            if let Some(v) = memo[mask as usize] {
                return v;
            }
            let total: u64 = (0..counts.len())
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| counts[i])
                .sum();
            let mut best = u64::MAX;
            // iterate proper nonempty submasks; halve by fixing the lowest bit
            let low = mask & mask.wrapping_neg();
            let mut sub = (mask - 1) & mask;
            while sub != 0 {
                if sub & low != 0 {
                    let rest = mask ^ sub;
                    if rest != 0 {
                        let cost = go(sub, counts, memo) + go(rest, counts, memo);
                        best = best.min(cost);
                    }
                }
                sub = (sub - 1) & mask;
            }
            let v = total + best;
            memo[mask as usize] = Some(v);
            v
        }
        let full = (1u32 << counts.len()) - 1;
        let mut memo = vec![None; (full + 1) as usize];
        go(full, counts, &mut memo)
    }

    #[test]
    fn weighted_length_is_optimal_for_small_vocabularies() {
        let cases: Vec<Vec<u64>> = vec![
            vec![1, 1],
            vec![4, 1, 1],
            vec![5, 4, 3, 2],
            vec![10, 7, 3, 2, 1],
            vec![2, 2, 2, 2, 2],
            vec![13, 1, 1, 1, 1],
        ];
        for counts in cases {
            let t = HuffmanTree::build(&counts).unwrap();
            assert_eq!(
                t.weighted_code_length(&counts),
                optimal_cost(&counts),
                "counts {counts:?}"
            );
        }
    }
}
