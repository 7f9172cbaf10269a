//! Maximum inner product search over record embeddings.
//!
//! Two modes share one scoring routine: `Exact` scans every stored vector,
//! `Clustered` ranks spherical k-means centroids by inner product with the
//! query and scans only the members of the best `probes` clusters. Clustering
//! runs on normalized copies while the stored vectors keep their magnitude,
//! so scores are always raw inner products.

mod format;
pub mod kmeans;
mod recall;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use format::{FORMAT_VERSION, MAGIC};
pub use recall::{doubling_probes, exact_top_k, probe_sweep, recall_at_k, ProbeStats};

use crate::domain::{check_finite, dot, KnowledgeRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    Exact,
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexHeader {
    pub format_version: u16,
    pub dim: usize,
    pub mode: IndexMode,
    pub normalize: bool,
    pub count: usize,
    pub build_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Unit-norm direction.
    pub centroid: Vec<f32>,
    /// Row indices into the vector table, ascending.
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterParams {
    pub n_clusters: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl ClusterParams {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        ClusterParams {
            n_clusters,
            seed,
            max_iters: 25,
        }
    }

    /// `round(sqrt(n))`, at least 1.
    pub fn auto_clusters(n_records: usize) -> usize {
        ((n_records as f64).sqrt().round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: Vec<f64>,
    pub k: usize,
    /// Clusters to visit; `None` means `ceil(sqrt(cluster count))`. Values
    /// above the cluster count are exhaustive. Ignored in exact mode.
    pub probes: Option<usize>,
}

impl SearchRequest {
    pub fn new(query: Vec<f64>, k: usize) -> Self {
        SearchRequest { query, k, probes: None }
    }

    pub fn with_probes(mut self, probes: usize) -> Self {
        self.probes = Some(probes);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub clip_id: String,
    pub score: f64,
    pub rank: usize,
}

pub fn default_probes(n_clusters: usize) -> usize {
    ((n_clusters as f64).sqrt().ceil() as usize).max(1)
}

/// Score-descending order with ascending row (hence clip id) as tie-break.
fn hit_order(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

fn normalize_f32(v: &mut [f32]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleIndex {
    header: IndexHeader,
    ids: Vec<String>,
    vectors: Vec<f32>,
    clusters: Vec<Cluster>,
}

impl StyleIndex {
    pub fn build_exact(records: &[KnowledgeRecord]) -> Result<StyleIndex> {
        Self::build_exact_from(entries_of(records), false)
    }

    pub fn build_clustered(records: &[KnowledgeRecord], params: &ClusterParams) -> Result<StyleIndex> {
        Self::build_clustered_from(entries_of(records), params, false)
    }

    /// Exact index over raw `(clip_id, vector)` pairs. With `normalize`, the
    /// stored vectors are L2-normalized first (off by default: it changes
    /// inner-product rankings).
    pub fn build_exact_from(entries: Vec<(String, Vec<f32>)>, normalize: bool) -> Result<StyleIndex> {
        let (dim, ids, vectors) = table(entries, normalize)?;
        Ok(StyleIndex {
            header: IndexHeader {
                format_version: FORMAT_VERSION,
                dim,
                mode: IndexMode::Exact,
                normalize,
                count: ids.len(),
                build_seed: 0,
            },
            ids,
            vectors,
            clusters: Vec::new(),
        })
    }

    pub fn build_clustered_from(
        entries: Vec<(String, Vec<f32>)>,
        params: &ClusterParams,
        normalize: bool,
    ) -> Result<StyleIndex> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("index records"));
        }
        if params.n_clusters == 0 {
            return Err(Error::InvalidArgument("n_clusters must be at least 1".into()));
        }
        if params.n_clusters > entries.len() {
            return Err(Error::TooManyClusters {
                requested: params.n_clusters,
                available: entries.len(),
            });
        }
        let (dim, ids, vectors) = table(entries, normalize)?;
        let points: Vec<Vec<f64>> = vectors
            .chunks_exact(dim)
            .map(|v| kmeans::normalized(&v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>()))
            .collect();
        let result = kmeans::spherical_kmeans(&points, params.n_clusters, params.seed, params.max_iters);

        let mut clusters: Vec<Cluster> = result
            .centroids
            .iter()
            .map(|c| {
                let mut centroid: Vec<f32> = c.iter().map(|&x| x as f32).collect();
                normalize_f32(&mut centroid);
                Cluster {
                    centroid,
                    members: Vec::new(),
                }
            })
            .collect();
        for (row, &a) in result.assignments.iter().enumerate() {
            clusters[a].members.push(row as u32);
        }
        Ok(StyleIndex {
            header: IndexHeader {
                format_version: FORMAT_VERSION,
                dim,
                mode: IndexMode::Clustered,
                normalize,
                count: ids.len(),
                build_seed: params.seed,
            },
            ids,
            vectors,
            clusters,
        })
    }

    pub fn header(&self) -> &IndexHeader {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn mode(&self) -> IndexMode {
        self.header.mode
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn contains(&self, clip_id: &str) -> bool {
        self.row_of(clip_id).is_some()
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        let d = self.header.dim;
        &self.vectors[row * d..(row + 1) * d]
    }

    pub fn vector_of(&self, clip_id: &str) -> Option<&[f32]> {
        self.row_of(clip_id).map(|r| self.vector(r))
    }

    fn row_of(&self, clip_id: &str) -> Option<usize> {
        self.ids.binary_search_by(|id| id.as_str().cmp(clip_id)).ok()
    }

    /// Number of clusters a request will visit.
    pub fn effective_probes(&self, probes: Option<usize>) -> usize {
        let c = self.clusters.len();
        probes.unwrap_or_else(|| default_probes(c)).clamp(1, c.max(1))
    }

    pub fn search(&self, request: &SearchRequest) -> Result<Vec<RetrievalHit>> {
        if request.query.len() != self.header.dim {
            return Err(Error::DimensionMismatch {
                expected: self.header.dim,
                actual: request.query.len(),
            });
        }
        if request.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if request.probes == Some(0) {
            return Err(Error::InvalidArgument("probes must be at least 1".into()));
        }
        check_finite(&request.query, "query")?;
        let q = &request.query;

        let mut scored: Vec<(f64, u32)> = match self.header.mode {
            IndexMode::Exact => (0..self.len()).map(|r| (dot(q, self.vector(r)), r as u32)).collect(),
            IndexMode::Clustered => {
                let mut order: Vec<(f64, u32)> = self
                    .clusters
                    .iter()
                    .enumerate()
                    .map(|(c, cl)| (dot(q, &cl.centroid), c as u32))
                    .collect();
                order.sort_by(hit_order);
                let probes = self.effective_probes(request.probes);
                order
                    .iter()
                    .take(probes)
                    .flat_map(|&(_, c)| self.clusters[c as usize].members.iter())
                    .map(|&r| (dot(q, self.vector(r as usize)), r))
                    .collect()
            }
        };

        let k = request.k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, hit_order);
            scored.truncate(k);
        }
        scored.sort_by(hit_order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, row))| RetrievalHit {
                clip_id: self.ids[row as usize].clone(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    pub fn insert(&mut self, record: &KnowledgeRecord) -> Result<()> {
        self.insert_vector(record.clip.clip_id.clone(), record.embedding.to_storage())
    }

    /// Adds one vector. In clustered mode it joins its max-cosine cluster;
    /// centroids are not recomputed.
    pub fn insert_vector(&mut self, clip_id: String, mut vector: Vec<f32>) -> Result<()> {
        let d = self.header.dim;
        if vector.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: vector.len(),
            });
        }
        check_finite(&vector, "record embedding")?;
        if clip_id.is_empty() {
            return Err(Error::InvalidArgument("empty clip id".into()));
        }
        let row = match self.ids.binary_search(&clip_id) {
            Ok(_) => return Err(Error::DuplicateClipId(clip_id)),
            Err(pos) => pos,
        };
        if self.header.normalize {
            normalize_f32(&mut vector);
        }
        for cl in &mut self.clusters {
            for m in cl.members.iter_mut() {
                if *m as usize >= row {
                    *m += 1;
                }
            }
        }
        if !self.clusters.is_empty() {
            let best = self
                .clusters
                .iter()
                .enumerate()
                .map(|(c, cl)| (dot(&vector, &cl.centroid), c as u32))
                .min_by(hit_order)
                .map(|(_, c)| c as usize)
                .expect("clusters non-empty");
            let members = &mut self.clusters[best].members;
            let at = members.partition_point(|&m| (m as usize) < row);
            members.insert(at, row as u32);
        }
        self.ids.insert(row, clip_id);
        self.vectors.splice(row * d..row * d, vector);
        self.header.count = self.ids.len();
        Ok(())
    }

    pub fn remove(&mut self, clip_id: &str) -> Result<()> {
        let row = self
            .row_of(clip_id)
            .ok_or_else(|| Error::UnknownClipId(clip_id.to_string()))?;
        let d = self.header.dim;
        self.ids.remove(row);
        self.vectors.drain(row * d..(row + 1) * d);
        for cl in &mut self.clusters {
            cl.members.retain(|&m| m as usize != row);
            for m in cl.members.iter_mut() {
                if *m as usize > row {
                    *m -= 1;
                }
            }
        }
        self.header.count = self.ids.len();
        Ok(())
    }

    /// Structural invariants; used after load and in tests.
    pub fn check_invariants(&self) -> Result<()> {
        let d = self.header.dim;
        let corrupt = |m: &str| Err(Error::CorruptFile(m.to_string()));
        if d == 0 {
            return corrupt("zero dimension");
        }
        if self.header.count != self.ids.len() || self.vectors.len() != self.ids.len() * d {
            return corrupt("count does not match stored vectors");
        }
        if self.ids.windows(2).any(|w| w[0] >= w[1]) {
            return corrupt("clip ids not strictly ascending");
        }
        match self.header.mode {
            IndexMode::Exact if !self.clusters.is_empty() => return corrupt("exact index with clusters"),
            IndexMode::Clustered => {
                let mut seen = vec![false; self.ids.len()];
                for cl in &self.clusters {
                    if cl.centroid.len() != d {
                        return corrupt("centroid dimension");
                    }
                    let norm = dot(&cl.centroid, &cl.centroid).sqrt();
                    if (norm - 1.0).abs() > 1e-4 {
                        return corrupt("centroid not unit norm");
                    }
                    for &m in &cl.members {
                        match seen.get_mut(m as usize) {
                            Some(s) if !*s => *s = true,
                            _ => return corrupt("cluster membership is not a partition"),
                        }
                    }
                }
                if !seen.iter().all(|&s| s) {
                    return corrupt("record missing from clusters");
                }
            }
            IndexMode::Exact => {}
        }
        Ok(())
    }

    /// The same vectors re-indexed from scratch.
    pub fn entries(&self) -> Vec<(String, Vec<f32>)> {
        (0..self.len())
            .map(|r| (self.ids[r].clone(), self.vector(r).to_vec()))
            .collect()
    }
}

fn entries_of(records: &[KnowledgeRecord]) -> Vec<(String, Vec<f32>)> {
    records
        .iter()
        .map(|r| (r.clip.clip_id.clone(), r.embedding.to_storage()))
        .collect()
}

type Table = (usize, Vec<String>, Vec<f32>);

fn table(mut entries: Vec<(String, Vec<f32>)>, normalize: bool) -> Result<Table> {
    if entries.is_empty() {
        return Err(Error::EmptyInput("index records"));
    }
    let dim = entries[0].1.len();
    if dim == 0 {
        return Err(Error::EmptyInput("embedding values"));
    }
    for (_, v) in &entries {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        check_finite(v, "record embedding")?;
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateClipId(w[0].0.clone()));
    }
    if entries.iter().any(|(id, _)| id.is_empty()) {
        return Err(Error::InvalidArgument("empty clip id".into()));
    }
    let mut ids = Vec::with_capacity(entries.len());
    let mut vectors = Vec::with_capacity(entries.len() * dim);
    for (id, mut v) in entries {
        if normalize {
            normalize_f32(&mut v);
        }
        ids.push(id);
        vectors.extend_from_slice(&v);
    }
    Ok((dim, ids, vectors))
}
