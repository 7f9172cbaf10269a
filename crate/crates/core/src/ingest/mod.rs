//! Corpus ingestion: denoise → diarize → VAD → quality gate → chunk → ASR →
//! style embedding → admission.

mod chunk;
mod processors;
mod store;
pub mod synthetic;

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chunk::{chunk_segments, clip_id, ChunkPolicy, ClipDraft, Piece, ShortSegmentRule};
pub use processors::{
    denoise, diarize, transcribe, vad, ProcessRequest, ProcessorLocators, Processors, Stage, StageClient,
};
pub use store::{read_jsonl, write_jsonl, RecordStore, StoredRecord, SCHEMA_VERSION};

use crate::domain::{compose_style_embedding, validate_record, KnowledgeRecord, Rejection, SpeechClip};
use crate::embedders::{build_context_window, embed_emotion, EmbedderSet, ProfileCache, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::retrieval::{QueryRewriter, TemplateRewriter};
use crate::script::{Script, Utterance};

pub const MANIFEST_VERSION: u32 = 1;

/// A diarized speaker turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSegment {
    pub source_uri: String,
    pub start_s: f64,
    pub end_s: f64,
    pub speaker_id: String,
    pub vad_score: f64,
    #[serde(default)]
    pub transcript: Option<String>,
    /// Absolute times of pauses inside the segment, preferred split points.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub silences: Vec<f64>,
}

impl RawSegment {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A segment declared inline in a manifest (pre-diarized corpora).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub speaker_id: String,
    pub vad_score: f64,
    #[serde(default)]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub silences: Vec<f64>,
}

impl DeclaredSegment {
    pub fn into_raw(self, source_uri: &str) -> RawSegment {
        RawSegment {
            source_uri: source_uri.to_string(),
            start_s: self.start_s,
            end_s: self.end_s,
            speaker_id: self.speaker_id,
            vad_score: self.vad_score,
            transcript: self.transcript,
            silences: self.silences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub audio_uri: String,
    pub language: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<DeclaredSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: u32,
    #[serde(default)]
    pub processors: ProcessorLocators,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::InvalidArgument(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyInput("manifest entries"));
        }
        if let Some(e) = self.entries.iter().find(|e| e.audio_uri.trim().is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "entry with empty audio_uri ({:?})",
                e.language
            )));
        }
        Processors::from_locators_default_timeout(&self.processors).map(|_| ())
    }

    pub fn load(path: &Path) -> Result<CorpusManifest> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let m: CorpusManifest = serde_json::from_slice(&bytes)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDraft {
    pub draft: ClipDraft,
    pub reason: Rejection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryError {
    pub audio_uri: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestionTotals {
    pub entries: usize,
    pub entries_failed: usize,
    pub segments: usize,
    pub segment_duration_s: f64,
    pub drafts: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub accepted_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub dim: usize,
    pub policy: ChunkPolicy,
    pub totals: IngestionTotals,
    pub rejected: Vec<RejectedDraft>,
    pub entry_errors: Vec<EntryError>,
    #[serde(skip)]
    pub accepted: Vec<KnowledgeRecord>,
    /// Post-VAD segments of every successfully processed entry.
    #[serde(skip)]
    pub segments: Vec<RawSegment>,
}

struct EntryOutcome {
    segments: Vec<RawSegment>,
    accepted: Vec<KnowledgeRecord>,
    rejected: Vec<RejectedDraft>,
}

/// Database construction with pluggable processors and embedders.
pub struct Pipeline {
    pub policy: ChunkPolicy,
    pub dim: usize,
    pub embedders: EmbedderSet,
    pub processors: Processors,
    pub window: usize,
    pub rewriter: Arc<dyn QueryRewriter>,
    profiles: ProfileCache,
}

impl Pipeline {
    pub fn new(policy: ChunkPolicy, dim: usize, embedders: EmbedderSet, processors: Processors) -> Self {
        Pipeline {
            policy,
            dim,
            embedders,
            processors,
            window: DEFAULT_WINDOW,
            rewriter: Arc::new(TemplateRewriter),
            profiles: ProfileCache::new(),
        }
    }

    pub fn run(&self, manifest: &CorpusManifest) -> Result<IngestionReport> {
        manifest.validate()?;
        self.policy.validate()?;
        self.embedders.check_dim(self.dim)?;

        let outcomes: Vec<Result<EntryOutcome>> = manifest
            .entries
            .par_iter()
            .map(|entry| self.process_entry(entry))
            .collect();

        let mut report = IngestionReport {
            dim: self.dim,
            policy: self.policy,
            totals: IngestionTotals {
                entries: manifest.entries.len(),
                ..Default::default()
            },
            rejected: Vec::new(),
            entry_errors: Vec::new(),
            accepted: Vec::new(),
            segments: Vec::new(),
        };
        let mut seen = HashSet::new();
        for (entry, outcome) in manifest.entries.iter().zip(outcomes) {
            match outcome {
                Ok(o) => {
                    report.segments.extend(o.segments);
                    report.rejected.extend(o.rejected);
                    for rec in o.accepted {
                        if seen.insert(rec.clip.clip_id.clone()) {
                            report.accepted.push(rec);
                        } else {
                            report.rejected.push(RejectedDraft {
                                draft: draft_of(&rec),
                                reason: Rejection::DuplicateClipId,
                            });
                        }
                    }
                }
                Err(e) => {
                    tracing::warn!(audio_uri = %entry.audio_uri, error = %e, "entry failed");
                    report.entry_errors.push(EntryError {
                        audio_uri: entry.audio_uri.clone(),
                        code: e.code().to_string(),
                        message: e.to_string(),
                    });
                }
            }
        }
        let t = &mut report.totals;
        t.entries_failed = report.entry_errors.len();
        t.segments = report.segments.len();
        t.segment_duration_s = report.segments.iter().map(RawSegment::duration_s).sum();
        t.accepted = report.accepted.len();
        t.rejected = report.rejected.len();
        t.drafts = t.accepted + t.rejected;
        t.accepted_duration_s = report.accepted.iter().map(|r| r.clip.duration_s).sum();
        Ok(report)
    }

    fn process_entry(&self, entry: &ManifestEntry) -> Result<EntryOutcome> {
        let p = &self.processors;
        let cleaned = denoise(&p.denoise, &entry.audio_uri)?;
        let segments = diarize(&p.diarize, entry, &cleaned)?;
        let segments = vad(&p.vad, &cleaned, segments)?;

        let mut rejected = Vec::new();
        let mut kept = Vec::new();
        for s in &segments {
            if s.vad_score > self.policy.quality_threshold {
                kept.push(s.clone());
            } else {
                rejected.push(RejectedDraft {
                    draft: ClipDraft::from_segment(s),
                    reason: Rejection::QualityBelowThreshold,
                });
            }
        }
        let drafts = chunk_segments(&kept, &self.policy)?;

        let mut transcribed = Vec::with_capacity(drafts.len());
        for d in drafts {
            match transcribe(&p.asr, &d) {
                Ok(text) => transcribed.push((d, text)),
                Err(Error::EmptyTranscript) => rejected.push(RejectedDraft {
                    draft: d,
                    reason: Rejection::EmptyTranscript,
                }),
                Err(e) => return Err(e),
            }
        }

        // The corpus side is embedded exactly like a query: the source is the
        // script, user preference is absent.
        let script = Script::new(
            entry.audio_uri.clone(),
            transcribed
                .iter()
                .map(|(d, t)| Utterance::new(d.speaker_id.clone(), t.clone()))
                .collect(),
        );
        let zero_user = vec![0.0; self.dim];
        let mut accepted = Vec::new();
        for (i, (draft, text)) in transcribed.into_iter().enumerate() {
            let profile = self
                .profiles
                .get_or_compute(&script, &draft.speaker_id, self.embedders.profile.as_ref())?;
            let context = build_context_window(&script.utterances, i, self.window)?;
            let rewritten = self.rewriter.rewrite(&text, &profile.profile, None);
            let emotion = embed_emotion(self.embedders.emotion.as_ref(), &rewritten, &profile.profile, &context)?;
            let embedding = compose_style_embedding(&profile.vector, &emotion, &zero_user)?.into_stored();
            let record = KnowledgeRecord {
                clip: SpeechClip {
                    clip_id: draft.clip_id.clone(),
                    audio_uri: draft.audio_uri(),
                    duration_s: draft.duration_s,
                    speaker_id: draft.speaker_id.clone(),
                    language: entry.language.clone(),
                    transcript: text,
                    quality_score: draft.quality_score,
                },
                embedding,
                source_tags: entry.tags.clone(),
            };
            match validate_record(&record, self.dim, self.policy.quality_threshold) {
                Ok(()) => accepted.push(record),
                Err(reason) => rejected.push(RejectedDraft { draft, reason }),
            }
        }
        Ok(EntryOutcome {
            segments,
            accepted,
            rejected,
        })
    }
}

fn draft_of(rec: &KnowledgeRecord) -> ClipDraft {
    ClipDraft {
        clip_id: rec.clip.clip_id.clone(),
        source_uri: rec.clip.audio_uri.split('#').next().unwrap_or_default().to_string(),
        speaker_id: rec.clip.speaker_id.clone(),
        pieces: Vec::new(),
        duration_s: rec.clip.duration_s,
        quality_score: rec.clip.quality_score,
        transcript: Some(rec.clip.transcript.clone()),
    }
}

/// Runs the pipeline with processors taken from the manifest.
pub fn run_pipeline(
    manifest: &CorpusManifest,
    policy: &ChunkPolicy,
    embedders: &EmbedderSet,
    db_dim: usize,
) -> Result<IngestionReport> {
    manifest.validate()?;
    let processors = Processors::from_locators_default_timeout(&manifest.processors)?;
    Pipeline::new(*policy, db_dim, embedders.clone(), processors).run(manifest)
}
