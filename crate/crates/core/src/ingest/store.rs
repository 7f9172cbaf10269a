//! JSON-lines stores: `segments.jsonl`, `clips.jsonl`, `records.jsonl`.
//!
//! Every line is one object carrying a `schema_version` field next to the
//! payload fields.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{KnowledgeRecord, SpeechClip, StyleEmbedding};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Line<T> {
    schema_version: u32,
    #[serde(flatten)]
    item: T,
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(
            &mut w,
            &Line {
                schema_version: SCHEMA_VERSION,
                item,
            },
        )?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line<T> = serde_json::from_str(&line)?;
        if parsed.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}:{}: schema_version {} not supported",
                path.display(),
                n + 1,
                parsed.schema_version
            )));
        }
        out.push(parsed.item);
    }
    Ok(out)
}

/// On-disk form of a record; the embedding is kept at storage precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub clip: SpeechClip,
    #[serde(default)]
    pub source_tags: Vec<String>,
    pub dim: usize,
    pub embedding: Vec<f32>,
}

impl From<&KnowledgeRecord> for StoredRecord {
    fn from(r: &KnowledgeRecord) -> Self {
        StoredRecord {
            clip: r.clip.clone(),
            source_tags: r.source_tags.clone(),
            dim: r.embedding.dim(),
            embedding: r.embedding.to_storage(),
        }
    }
}

impl TryFrom<StoredRecord> for KnowledgeRecord {
    type Error = Error;

    fn try_from(s: StoredRecord) -> Result<Self> {
        if s.embedding.len() != s.dim {
            return Err(Error::DimensionMismatch {
                expected: s.dim,
                actual: s.embedding.len(),
            });
        }
        Ok(KnowledgeRecord {
            clip: s.clip,
            embedding: StyleEmbedding::from_values(s.embedding.into_iter().map(f64::from).collect())?,
            source_tags: s.source_tags,
        })
    }
}

/// Clip lookup by id.
#[derive(Debug, Clone, Default)]
pub struct RecordStore {
    records: HashMap<String, KnowledgeRecord>,
}

impl RecordStore {
    pub fn new(records: impl IntoIterator<Item = KnowledgeRecord>) -> Self {
        RecordStore {
            records: records.into_iter().map(|r| (r.clip.clip_id.clone(), r)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let stored: Vec<StoredRecord> = read_jsonl(path)?;
        let records = stored
            .into_iter()
            .map(KnowledgeRecord::try_from)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(records))
    }

    pub fn save(records: &[KnowledgeRecord], path: &Path) -> Result<()> {
        let stored: Vec<StoredRecord> = records.iter().map(StoredRecord::from).collect();
        write_jsonl(path, &stored)
    }

    pub fn get(&self, clip_id: &str) -> Option<&KnowledgeRecord> {
        self.records.get(clip_id)
    }

    pub fn clip(&self, clip_id: &str) -> Result<&SpeechClip> {
        self.get(clip_id)
            .map(|r| &r.clip)
            .ok_or_else(|| Error::UnknownClipId(clip_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, record: KnowledgeRecord) {
        self.records.insert(record.clip.clip_id.clone(), record);
    }

    pub fn remove(&mut self, clip_id: &str) -> Option<KnowledgeRecord> {
        self.records.remove(clip_id)
    }

    /// Records sorted by clip id.
    pub fn sorted(&self) -> Vec<&KnowledgeRecord> {
        let mut v: Vec<&KnowledgeRecord> = self.records.values().collect();
        v.sort_by(|a, b| a.clip.clip_id.cmp(&b.clip.clip_id));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let rec = KnowledgeRecord {
            clip: SpeechClip {
                clip_id: "abc".into(),
                audio_uri: "file:///x.wav#t=0.000-6.000".into(),
                duration_s: 6.0,
                speaker_id: "s".into(),
                language: "en".into(),
                transcript: "hi".into(),
                quality_score: 0.8,
            },
            embedding: StyleEmbedding::from_values(vec![0.1f32 as f64, -2.5, 1e-7f32 as f64]).unwrap(),
            source_tags: vec!["t".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        RecordStore::save(std::slice::from_ref(&rec), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"schema_version\":1,"));
        let store = RecordStore::load(&path).unwrap();
        assert_eq!(store.get("abc"), Some(&rec));
        assert!(matches!(store.clip("zzz"), Err(Error::UnknownClipId(_))));
    }

    #[test]
    fn wrong_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"schema_version\":7,\"a\":1}\n").unwrap();
        #[derive(Deserialize)]
        struct A {
            #[allow(dead_code)]
            a: u32,
        }
        assert!(read_jsonl::<A>(&path).is_err());
    }
}
