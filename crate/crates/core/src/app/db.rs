//! Database directory operations shared by the CLI and the service.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{AppConfig, CLIPS_FILE, INDEX_FILE, RECORDS_FILE, REPORT_FILE, SEGMENTS_FILE};
use crate::domain::KnowledgeRecord;
use crate::error::{Error, Result};
use crate::index::{ClusterParams, IndexMode, StyleIndex};
use crate::ingest::{write_jsonl, ChunkPolicy, CorpusManifest, IngestionReport, Pipeline, Processors, RecordStore};
use crate::retrieval::{Database, Retriever};
use crate::script::Script;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub mode: IndexMode,
    pub count: usize,
    pub n_clusters: usize,
    pub build_seed: u64,
}

/// `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub manifest: PathBuf,
    pub embedder_seed: u64,
    pub index: IndexSummary,
    #[serde(flatten)]
    pub ingestion: IngestionReport,
}

pub fn build_index(records: &[KnowledgeRecord], config: &AppConfig) -> Result<StyleIndex> {
    match config.index_mode {
        IndexMode::Exact => StyleIndex::build_exact(records),
        IndexMode::Clustered => {
            let n = config
                .n_clusters
                .unwrap_or_else(|| ClusterParams::auto_clusters(records.len()));
            StyleIndex::build_clustered(records, &ClusterParams::new(n, config.seed))
        }
    }
}

fn summary(index: &StyleIndex) -> IndexSummary {
    IndexSummary {
        mode: index.mode(),
        count: index.len(),
        n_clusters: index.n_clusters(),
        build_seed: index.header().build_seed,
    }
}

/// Ingests a manifest into `out`: segments, clips, records, index and report.
pub fn build_db(config: &AppConfig, manifest_path: &Path, out: &Path) -> Result<BuildReport> {
    let manifest = CorpusManifest::load(manifest_path)?;
    let locators = config.processors.apply(&manifest.processors);
    let processors = Processors::from_locators(&locators, config.embedder_timeout_ms)?;
    let policy = ChunkPolicy {
        quality_threshold: config.quality_threshold,
        ..ChunkPolicy::default()
    };
    let embedders = config.embedder_set(config.dim)?;
    let pipeline = Pipeline::new(policy, config.dim, embedders, processors);
    let report = pipeline.run(&manifest)?;
    tracing::info!(
        accepted = report.totals.accepted,
        rejected = report.totals.rejected,
        failed_entries = report.totals.entries_failed,
        "ingestion finished"
    );

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_jsonl(&out.join(SEGMENTS_FILE), &report.segments)?;
    let clips: Vec<_> = report.accepted.iter().map(|r| r.clip.clone()).collect();
    write_jsonl(&out.join(CLIPS_FILE), &clips)?;
    RecordStore::save(&report.accepted, &out.join(RECORDS_FILE))?;

    let index = if report.accepted.is_empty() {
        None
    } else {
        let index = build_index(&report.accepted, config)?;
        index.save(&out.join(INDEX_FILE))?;
        Some(index)
    };
    let build = BuildReport {
        manifest: manifest_path.to_path_buf(),
        embedder_seed: config.seed,
        index: index.as_ref().map(summary).unwrap_or(IndexSummary {
            mode: config.index_mode,
            count: 0,
            n_clusters: 0,
            build_seed: config.seed,
        }),
        ingestion: report,
    };
    let json = serde_json::to_vec_pretty(&build)?;
    let path = out.join(REPORT_FILE);
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(build)
}

/// Rebuilds `index.asrx` from `records.jsonl`, e.g. after many incremental
/// inserts have drifted the clustering.
pub fn rebuild_index(config: &AppConfig) -> Result<IndexSummary> {
    let store = RecordStore::load(&config.records_path())?;
    if store.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let records: Vec<KnowledgeRecord> = store.sorted().into_iter().cloned().collect();
    let index = build_index(&records, config)?;
    index.save(&config.index_path())?;
    Ok(summary(&index))
}

/// Index plus the `records.jsonl` next to it.
pub fn load_database(index_path: &Path) -> Result<Database> {
    let index = StyleIndex::load(index_path)?;
    let records = index_path.with_file_name(RECORDS_FILE);
    Database::new(index, RecordStore::load(&records)?)
}

pub fn open_retriever(config: &AppConfig, index_path: &Path) -> Result<Retriever> {
    let db = load_database(index_path)?;
    let embedders = config.embedder_set(db.index.dim())?;
    Retriever::new(db, embedders)
}

/// Scripts known to the service, by id.
#[derive(Debug, Default)]
pub struct ScriptRegistry {
    scripts: RwLock<HashMap<String, Arc<Script>>>,
}

impl ScriptRegistry {
    /// Every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let reg = ScriptRegistry::default();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            reg.insert(Script::load(&p)?);
        }
        Ok(reg)
    }

    pub fn insert(&self, script: Script) {
        self.scripts.write().insert(script.script_id.clone(), Arc::new(script));
    }

    pub fn get(&self, id: &str) -> Result<Arc<Script>> {
        self.scripts
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownScript(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.scripts.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.read().is_empty()
    }
}

/// Reads one query vector per line, as a JSON array.
pub fn read_query_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Seeded probe queries: a random stored vector plus Gaussian noise with
/// standard deviation `noise` per coordinate.
pub fn sample_query_vectors(index: &StyleIndex, n: usize, noise: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if index.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let row = rng.random_range(0..index.len());
            index
                .vector(row)
                .iter()
                .map(|&x| f64::from(x) + normal.sample(&mut rng))
                .collect()
        })
        .collect())
}
