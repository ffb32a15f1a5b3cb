//! How embedding-space neighborhoods relate to follower-network ones:
//! Jaccard overlap between a user's followers and their nearest neighbors,
//! the co-adoption likelihood p_u under either neighborhood definition,
//! and a PCA export for external 2-D visualization.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embed::{NeighborIndex, NormalizedEmbeddings};
use crate::error::{Error, Result};
use crate::ingest::{AdoptionSequence, FollowerNetwork, GeoLabels};
use crate::rng::SeedDerive;
use crate::skipgram::RawEmbeddings;

/// First-adoption view of the log: which topics each user adopted and
/// which users each topic reached. Repeat adoptions collapse.
#[derive(Debug, Clone, Default)]
pub struct AdoptionMap {
    by_user: BTreeMap<String, BTreeSet<String>>,
    by_topic: BTreeMap<String, BTreeSet<String>>,
}

impl AdoptionMap {
    pub fn new(sequences: &[AdoptionSequence]) -> Self {
        let mut map = AdoptionMap::default();
        for seq in sequences {
            for user in seq.first_adopters() {
                map.by_user
                    .entry(user.to_string())
                    .or_default()
                    .insert(seq.topic_id.clone());
                map.by_topic
                    .entry(seq.topic_id.clone())
                    .or_default()
                    .insert(user.to_string());
            }
        }
        map
    }

    pub fn topics_of(&self, user: &str) -> Option<&BTreeSet<String>> {
        self.by_user.get(user)
    }

    pub fn adopters_of(&self, topic: &str) -> Option<&BTreeSet<String>> {
        self.by_topic.get(topic)
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(|s| s.as_str())
    }

    pub fn user_count(&self) -> usize {
        self.by_user.len()
    }
}

/// |a ∩ b| / |a ∪ b|; 1.0 when both sets are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    }
}

/// Overlap between a user's followers and their k nearest embedding
/// neighbors, with k equal to the follower count. `None` when the user has
/// no followers or no embedding (excluded from averages).
pub fn jaccard_neighborhood_overlap(
    user: &str,
    network: &FollowerNetwork,
    index: &NeighborIndex,
) -> Result<Option<f64>> {
    let Some(followers) = network.followers(user) else {
        return Ok(None);
    };
    if followers.is_empty() {
        return Ok(None);
    }
    let Some(vector) = index.embeddings().get(user) else {
        return Ok(None);
    };
    let exclude: BTreeSet<String> = [user.to_string()].into();
    let knn: BTreeSet<String> = index
        .knn(vector, followers.len(), &exclude)?
        .into_iter()
        .map(|(u, _)| u)
        .collect();
    Ok(Some(jaccard(followers, &knn)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JaccardSummary {
    pub mean: f64,
    /// Users with both followers and an embedding.
    pub evaluated: usize,
    /// Sampled users skipped for lacking either.
    pub excluded: usize,
}

/// Mean overlap across a seeded sample of network users.
pub fn mean_jaccard_overlap(
    network: &FollowerNetwork,
    index: &NeighborIndex,
    sample_size: Option<usize>,
    seed: u64,
) -> Result<JaccardSummary> {
    let mut users: Vec<String> = network.users().map(|u| u.to_string()).collect();
    if let Some(size) = sample_size {
        let mut rng = SeedDerive::new(seed).text("jaccard-sample").rng();
        users.shuffle(&mut rng);
        users.truncate(size);
        users.sort();
    }
    let mut total = 0.0;
    let mut evaluated = 0;
    let mut excluded = 0;
    for user in &users {
        match jaccard_neighborhood_overlap(user, network, index)? {
            Some(j) => {
                total += j;
                evaluated += 1;
            }
            None => excluded += 1,
        }
    }
    let mean = if evaluated == 0 {
        0.0
    } else {
        total / evaluated as f64
    };
    Ok(JaccardSummary {
        mean,
        evaluated,
        excluded,
    })
}

/// Which definition of N(u) a statistic was computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborKind {
    Network,
    VectorSpace,
}

impl std::fmt::Display for NeighborKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NeighborKind::Network => "network",
            NeighborKind::VectorSpace => "vector",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoAdoptionStats {
    pub user_id: String,
    /// Fraction of (neighbor, topic) pairs that co-adopted.
    pub p: f64,
    pub kind: NeighborKind,
    pub neighbor_count: usize,
    pub topic_count: usize,
}

/// p_u = Σ_{w∈N(u)} Σ_{t∈T(u)} I(w adopted t) / (|N(u)|·|T(u)|).
pub fn coadoption_likelihood(
    user: &str,
    neighbors: &BTreeSet<String>,
    kind: NeighborKind,
    map: &AdoptionMap,
) -> Result<CoAdoptionStats> {
    let topics = map.topics_of(user).filter(|t| !t.is_empty());
    let (Some(topics), false) = (topics, neighbors.is_empty()) else {
        return Err(Error::CoAdoptionUndefined {
            user: user.to_string(),
        });
    };
    let mut co_adoptions = 0usize;
    for w in neighbors {
        if let Some(their_topics) = map.topics_of(w) {
            co_adoptions += topics.intersection(their_topics).count();
        }
    }
    let pairs = neighbors.len() * topics.len();
    Ok(CoAdoptionStats {
        user_id: user.to_string(),
        p: co_adoptions as f64 / pairs as f64,
        kind,
        neighbor_count: neighbors.len(),
        topic_count: topics.len(),
    })
}

/// One sampled user's p_u under both neighborhood definitions, with the
/// vector-space k matched to the follower count.
#[derive(Debug, Clone, PartialEq)]
pub struct CoAdoptionPair {
    pub user_id: String,
    pub network_p: f64,
    pub vector_p: f64,
    pub neighbor_count: usize,
    pub topic_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoAdoptionComparison {
    pub pairs: Vec<CoAdoptionPair>,
    pub network_mean: f64,
    pub vector_mean: f64,
    /// Sampled users skipped (no followers, no embedding, or no topics).
    pub excluded: usize,
}

impl CoAdoptionComparison {
    /// Paired scatter table plus `#` summary lines.
    pub fn write_scatter(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut out = || -> std::io::Result<()> {
            writeln!(w, "user_id\tnetwork_p\tvector_p\tneighbors\ttopics")?;
            for p in &self.pairs {
                writeln!(
                    w,
                    "{}\t{:.6}\t{:.6}\t{}\t{}",
                    p.user_id, p.network_p, p.vector_p, p.neighbor_count, p.topic_count
                )?;
            }
            writeln!(w, "# network_mean\t{:.6}", self.network_mean)?;
            writeln!(w, "# vector_mean\t{:.6}", self.vector_mean)?;
            writeln!(w, "# evaluated\t{}", self.pairs.len())?;
            writeln!(w, "# excluded\t{}", self.excluded)?;
            w.flush()
        };
        out().map_err(|e| Error::io(path, e))
    }
}

/// For each sampled user with followers, topics, and an embedding, compute
/// p_u over the follower set and over the same-size nearest-neighbor set.
pub fn compare_neighborhood_coadoption(
    map: &AdoptionMap,
    network: &FollowerNetwork,
    index: &NeighborIndex,
    sample_size: Option<usize>,
    seed: u64,
) -> Result<CoAdoptionComparison> {
    let emb = index.embeddings();
    let mut users: Vec<String> = network.users().map(|u| u.to_string()).collect();
    if let Some(size) = sample_size {
        let mut rng = SeedDerive::new(seed).text("coadoption-sample").rng();
        users.shuffle(&mut rng);
        users.truncate(size);
        users.sort();
    }
    let mut pairs = Vec::new();
    let mut excluded = 0;
    for user in &users {
        let followers = network.followers(user).filter(|f| !f.is_empty());
        let topics = map.topics_of(user).filter(|t| !t.is_empty());
        let vector = emb.get(user);
        let (Some(followers), Some(_), Some(vector)) = (followers, topics, vector) else {
            excluded += 1;
            continue;
        };
        let exclude: BTreeSet<String> = [user.to_string()].into();
        let knn: BTreeSet<String> = index
            .knn(vector, followers.len(), &exclude)?
            .into_iter()
            .map(|(u, _)| u)
            .collect();
        let network_stats = coadoption_likelihood(user, followers, NeighborKind::Network, map)?;
        let vector_stats = coadoption_likelihood(user, &knn, NeighborKind::VectorSpace, map)?;
        pairs.push(CoAdoptionPair {
            user_id: user.clone(),
            network_p: network_stats.p,
            vector_p: vector_stats.p,
            neighbor_count: followers.len(),
            topic_count: network_stats.topic_count,
        });
    }
    let count = pairs.len().max(1) as f64;
    let network_mean = pairs.iter().map(|p| p.network_p).sum::<f64>() / count;
    let vector_mean = pairs.iter().map(|p| p.vector_p).sum::<f64>() / count;
    Ok(CoAdoptionComparison {
        pairs,
        network_mean,
        vector_mean,
        excluded,
    })
}

/// Top principal components of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal directions, highest variance first.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component.
    pub variances: Vec<f64>,
}

impl Pca {
    /// Coordinates of `point` in the component basis.
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(point)
                    .zip(&self.mean)
                    .map(|((ci, xi), mi)| ci * (xi - mi))
                    .sum()
            })
            .collect()
    }
}

/// Covariance-times-vector without forming the covariance matrix.
fn covariance_apply(centered: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let n = centered.len();
    let mut out = vec![0.0; d];
    for row in centered {
        let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, &r) in out.iter_mut().zip(row) {
            *o += dot * r;
        }
    }
    for o in &mut out {
        *o /= (n - 1) as f64;
    }
    out
}

/// Power iteration with deflation. The covariance is positive
/// semi-definite, so plain iteration converges to the leading eigenpair;
/// deflation then removes it for the next component.
pub fn principal_components(points: &[&[f64]], count: usize, seed: u64) -> Result<Pca> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidConfig("PCA needs at least 2 points".into()));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: points.iter().find(|p| p.len() != d).unwrap().len(),
        });
    }
    if count == 0 || count > d {
        return Err(Error::InvalidConfig(format!(
            "component count must be in 1..={d}, got {count}"
        )));
    }
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, &x) in mean.iter_mut().zip(*p) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut rng = SeedDerive::new(seed).text("pca-init").rng();
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut variances = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthonormalize(&mut v, &components);
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let mut w = covariance_apply(&centered, &v);
            // deflate before reading the Rayleigh quotient off the image
            for b in &components {
                let dot: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= dot * bi;
                }
            }
            lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().max(0.0);
            let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-15 {
                // zero-variance direction; keep the current unit vector
                lambda = 0.0;
                break;
            }
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            let drift: f64 = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            v = w;
            if drift < 1e-13 {
                break;
            }
        }
        variances.push(lambda);
        components.push(v);
    }
    Ok(Pca {
        mean,
        components,
        variances,
    })
}

/// Remove projections onto `basis` and rescale to unit length; zero-norm
/// leftovers fall back to a deterministic axis direction.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= dot * bi;
        }
    }
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        // degenerate direction: pick the first axis not spanned yet
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = if i == basis.len() { 1.0 } else { 0.0 };
        }
        let mut axis = v.to_vec();
        orthonormalize_once(&mut axis, basis);
        v.copy_from_slice(&axis);
    } else {
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }
}

fn orthonormalize_once(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= dot * bi;
        }
    }
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }
}

/// A seeded sample of users projected onto the top-2 principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub users: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub pca: Pca,
}

/// Sample users and compute their 2-D PCA coordinates.
pub fn project_sample(
    embeddings: &NormalizedEmbeddings,
    sample_size: Option<usize>,
    seed: u64,
) -> Result<Projection> {
    let mut users: Vec<String> = embeddings.users().to_vec();
    if let Some(size) = sample_size {
        if size > users.len() {
            return Err(Error::SampleTooLarge {
                requested: size,
                available: users.len(),
            });
        }
        let mut rng = SeedDerive::new(seed).text("projection-sample").rng();
        users.shuffle(&mut rng);
        users.truncate(size);
        users.sort();
    }
    let points: Vec<&[f64]> = users
        .iter()
        .map(|u| embeddings.get(u).expect("user came from the store"))
        .collect();
    let pca = principal_components(&points, 2, seed)?;
    let coords = points
        .iter()
        .map(|p| {
            let c = pca.project(p);
            [c[0], c[1]]
        })
        .collect();
    Ok(Projection { users, coords, pca })
}

/// Write `user \t x \t y` plus optional metadata columns (geo label,
/// adopter flag for a chosen topic's adopter set), and the raw sampled
/// vectors alongside for external projection tools.
pub fn write_projection(
    projection: &Projection,
    embeddings: &NormalizedEmbeddings,
    geo: Option<&GeoLabels>,
    adopters: Option<&BTreeSet<String>>,
    coords_path: impl AsRef<Path>,
    raw_path: impl AsRef<Path>,
) -> Result<()> {
    let path = coords_path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut out = || -> std::io::Result<()> {
        write!(w, "user_id\tx\ty")?;
        if geo.is_some() {
            write!(w, "\tgeo")?;
        }
        if adopters.is_some() {
            write!(w, "\tadopter")?;
        }
        writeln!(w)?;
        for (user, coord) in projection.users.iter().zip(&projection.coords) {
            write!(w, "{user}\t{:.6}\t{:.6}", coord[0], coord[1])?;
            if let Some(labels) = geo {
                write!(w, "\t{}", labels.get(user).unwrap_or("?"))?;
            }
            if let Some(set) = adopters {
                write!(w, "\t{}", u8::from(set.contains(user)))?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    out().map_err(|e| Error::io(path, e))?;

    let raw = RawEmbeddings {
        dim: embeddings.dim(),
        vectors: projection
            .users
            .iter()
            .map(|u| {
                (
                    u.clone(),
                    embeddings
                        .get(u)
                        .expect("user came from the store")
                        .to_vec(),
                )
            })
            .collect(),
    };
    raw.save_text(raw_path)
}
