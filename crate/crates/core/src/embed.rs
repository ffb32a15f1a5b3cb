//! Normalized embeddings and exact k-nearest-neighbor search.
//!
//! The k-d tree is exact: backtracking visits every subtree that could hold
//! a closer point, so results equal a brute-force scan by construction, and
//! [`brute_force_knn`] stays available as the reference route. Ties in
//! distance are broken by user id ascending.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::skipgram::{EmbeddingModel, RawEmbeddings};

/// Unit-length user vectors, rows sorted by user id.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEmbeddings {
    dim: usize,
    users: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, u32>,
}

impl NormalizedEmbeddings {
    /// Normalize each vector to unit length. Zero-norm vectors cannot be
    /// normalized and are dropped; the second return value counts them.
    pub fn from_raw(raw: &RawEmbeddings) -> (Self, usize) {
        let mut entries: Vec<(&str, Vec<f64>)> = Vec::with_capacity(raw.len());
        let mut dropped = 0usize;
        for (user, vector) in &raw.vectors {
            let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                dropped += 1;
                continue;
            }
            entries.push((user, vector.iter().map(|x| x / norm).collect()));
        }
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let users: Vec<String> = entries.iter().map(|(u, _)| u.to_string()).collect();
        let mut data = Vec::with_capacity(entries.len() * raw.dim);
        for (_, v) in &entries {
            data.extend_from_slice(v);
        }
        let index = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32))
            .collect();
        (
            NormalizedEmbeddings {
                dim: raw.dim,
                users,
                data,
                index,
            },
            dropped,
        )
    }

    pub fn from_model(model: &EmbeddingModel) -> (Self, usize) {
        let raw = RawEmbeddings {
            dim: model.dim(),
            vectors: (0..model.vocab().len())
                .map(|i| {
                    (
                        model.vocab().word(i).to_string(),
                        model.input_row(i).to_vec(),
                    )
                })
                .collect(),
        };
        Self::from_raw(&raw)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn contains(&self, user: &str) -> bool {
        self.index.contains_key(user)
    }

    pub fn get(&self, user: &str) -> Option<&[f64]> {
        self.index.get(user).map(|&i| self.row(i as usize))
    }

    pub fn user(&self, row: usize) -> &str {
        &self.users[row]
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        (0..self.len()).map(|i| (self.user(i), self.row(i)))
    }

    /// Persistable form (unit vectors, user order).
    pub fn to_raw(&self) -> RawEmbeddings {
        RawEmbeddings {
            dim: self.dim,
            vectors: self
                .iter()
                .map(|(u, v)| (u.to_string(), v.to_vec()))
                .collect(),
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Candidate ordering: by squared distance, then by row (user id order).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    row: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.row.cmp(&other.row))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact k-NN reference scan. Same contract as [`NeighborIndex::knn`].
pub fn brute_force_knn(
    embeddings: &NormalizedEmbeddings,
    query: &[f64],
    k: usize,
    exclude: &BTreeSet<String>,
) -> Result<Vec<(String, f64)>> {
    if embeddings.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if query.len() != embeddings.dim() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.dim(),
            got: query.len(),
        });
    }
    let mut candidates: Vec<Candidate> = (0..embeddings.len() as u32)
        .filter(|&row| !exclude.contains(embeddings.user(row as usize)))
        .map(|row| Candidate {
            d2: squared_distance(embeddings.row(row as usize), query),
            row,
        })
        .collect();
    candidates.sort_unstable();
    candidates.truncate(k);
    Ok(candidates
        .into_iter()
        .map(|c| (embeddings.user(c.row as usize).to_string(), c.d2.sqrt()))
        .collect())
}

struct TreeNode {
    point: u32,
    axis: u16,
    left: i32,
    right: i32,
}

/// k-d tree over normalized embeddings. Splits on the axis of largest
/// spread; queries backtrack whenever the splitting plane is at least as
/// close as the current worst candidate, so no admissible point is missed.
pub struct NeighborIndex<'a> {
    emb: &'a NormalizedEmbeddings,
    nodes: Vec<TreeNode>,
    root: i32,
}

impl<'a> NeighborIndex<'a> {
    pub fn build(emb: &'a NormalizedEmbeddings) -> Result<Self> {
        if emb.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut rows: Vec<u32> = (0..emb.len() as u32).collect();
        let mut nodes = Vec::with_capacity(emb.len());
        let root = build_subtree(emb, &mut rows, &mut nodes);
        Ok(NeighborIndex { emb, nodes, root })
    }

    pub fn embeddings(&self) -> &NormalizedEmbeddings {
        self.emb
    }

    /// The `min(k, available)` nearest neighbors of `query`, ascending by
    /// distance with ties broken by user id; `exclude`d users never appear.
    pub fn knn(
        &self,
        query: &[f64],
        k: usize,
        exclude: &BTreeSet<String>,
    ) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if query.len() != self.emb.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.emb.dim(),
                got: query.len(),
            });
        }
        let excluded_rows: BTreeSet<u32> = exclude
            .iter()
            .filter_map(|u| self.emb.index.get(u).copied())
            .collect();
        // max-heap on (d2, row): the root is the current worst keeper
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &excluded_rows, &mut heap);
        let mut sorted = heap.into_vec();
        sorted.sort_unstable();
        Ok(sorted
            .into_iter()
            .map(|c| (self.emb.user(c.row as usize).to_string(), c.d2.sqrt()))
            .collect())
    }

    fn search(
        &self,
        node: i32,
        query: &[f64],
        k: usize,
        excluded: &BTreeSet<u32>,
        heap: &mut std::collections::BinaryHeap<Candidate>,
    ) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        if !excluded.contains(&n.point) {
            let c = Candidate {
                d2: squared_distance(self.emb.row(n.point as usize), query),
                row: n.point,
            };
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().expect("heap nonempty when full") {
                heap.pop();
                heap.push(c);
            }
        }
        let split = self.emb.row(n.point as usize)[n.axis as usize];
        let delta = query[n.axis as usize] - split;
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, query, k, excluded, heap);
        // the far half-space begins at delta^2 from the query; a tie there
        // could still beat the worst keeper's user-id rank
        let must_visit = heap.len() < k || delta * delta <= heap.peek().unwrap().d2;
        if must_visit {
            self.search(far, query, k, excluded, heap);
        }
    }
}

fn build_subtree(emb: &NormalizedEmbeddings, rows: &mut [u32], nodes: &mut Vec<TreeNode>) -> i32 {
    if rows.is_empty() {
        return -1;
    }
    // axis of largest spread among these points
    let mut axis = 0usize;
    let mut best_spread = f64::NEG_INFINITY;
    for a in 0..emb.dim() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows.iter() {
            let x = emb.row(r as usize)[a];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            axis = a;
        }
    }
    let mid = rows.len() / 2;
    rows.select_nth_unstable_by(mid, |&a, &b| {
        emb.row(a as usize)[axis]
            .total_cmp(&emb.row(b as usize)[axis])
            .then_with(|| a.cmp(&b))
    });
    let point = rows[mid];
    let (left_rows, rest) = rows.split_at_mut(mid);
    let left = build_subtree(emb, left_rows, nodes);
    let right = build_subtree(emb, &mut rest[1..], nodes);
    nodes.push(TreeNode {
        point,
        axis: axis as u16,
        left,
        right,
    });
    (nodes.len() - 1) as i32
}
