//! Style selection: gate, rewrite, compose, search, bundle.

mod rewrite;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

pub use rewrite::{needs_retrieval, rewrite_query, QueryRewriter, RetrievalGate, StructuralGate, TemplateRewriter};

use crate::domain::{compose_style_embedding, SpeechClip, StyleQuery, DEFAULT_K};
use crate::embedders::{build_context_window, embed_emotion, embed_user, EmbedderSet, ProfileCache, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::index::{RetrievalHit, SearchRequest, StyleIndex};
use crate::ingest::RecordStore;
use crate::script::Script;

/// Which components enter the query vector. The user component is governed
/// separately by [`RetrievalConfig::include_user`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    #[default]
    #[serde(alias = "profile+emotion")]
    ProfilePlusEmotion,
    #[serde(alias = "only-profile", alias = "profile")]
    OnlyProfile,
    #[serde(alias = "only-emotion", alias = "emotion")]
    OnlyEmotion,
}

impl EmbeddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::ProfilePlusEmotion => "profile+emotion",
            EmbeddingMode::OnlyProfile => "only-profile",
            EmbeddingMode::OnlyEmotion => "only-emotion",
        }
    }

    pub fn uses_profile(self) -> bool {
        self != EmbeddingMode::OnlyEmotion
    }

    pub fn uses_emotion(self) -> bool {
        self != EmbeddingMode::OnlyProfile
    }
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "profile+emotion" | "profile-plus-emotion" => Ok(EmbeddingMode::ProfilePlusEmotion),
            "only-profile" | "profile" => Ok(EmbeddingMode::OnlyProfile),
            "only-emotion" | "emotion" => Ok(EmbeddingMode::OnlyEmotion),
            other => Err(Error::InvalidArgument(format!("unknown embedding mode {other:?}"))),
        }
    }
}

/// Cluster probes per search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probes {
    /// `ceil(sqrt(cluster count))`.
    #[default]
    Default,
    Exhaustive,
    Count(usize),
}

impl Probes {
    fn resolve(self, index: &StyleIndex) -> Option<usize> {
        match self {
            Probes::Default => None,
            Probes::Exhaustive => Some(index.n_clusters().max(1)),
            Probes::Count(n) => Some(n),
        }
    }
}

impl FromStr for Probes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "default" => Ok(Probes::Default),
            "exhaustive" | "all" => Ok(Probes::Exhaustive),
            n => match n.parse::<usize>() {
                Ok(0) | Err(_) => Err(Error::InvalidArgument(format!(
                    "probes must be a positive integer, 'default' or 'exhaustive', got {n:?}"
                ))),
                Ok(v) => Ok(Probes::Count(v)),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Front-end default for queries that do not carry their own k.
    pub k: usize,
    pub embedding_mode: EmbeddingMode,
    pub probes: Probes,
    /// `None`: include the user component whenever the query has a preference.
    pub include_user: Option<bool>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: DEFAULT_K,
            embedding_mode: EmbeddingMode::ProfilePlusEmotion,
            probes: Probes::Default,
            include_user: None,
        }
    }
}

impl RetrievalConfig {
    pub fn with_mode(mut self, mode: EmbeddingMode) -> Self {
        self.embedding_mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylePrompt {
    pub clip: SpeechClip,
    pub score: f64,
}

/// Retrieved clips in the order they are concatenated for the synthesizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylePromptBundle {
    pub prompts: Vec<StylePrompt>,
    pub concatenation_manifest: Vec<String>,
    pub total_duration_s: f64,
}

impl StylePromptBundle {
    fn from_prompts(prompts: Vec<StylePrompt>) -> Self {
        StylePromptBundle {
            concatenation_manifest: prompts.iter().map(|p| p.clip.clip_id.clone()).collect(),
            total_duration_s: prompts.iter().map(|p| p.clip.duration_s).sum(),
            prompts,
        }
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn clip_uris(&self) -> Vec<String> {
        self.prompts.iter().map(|p| p.clip.audio_uri.clone()).collect()
    }
}

/// Resolves hits to clips, keeping hit order.
pub fn assemble_prompts(hits: &[RetrievalHit], store: &RecordStore) -> Result<StylePromptBundle> {
    if hits.is_empty() {
        return Err(Error::EmptyBundle);
    }
    let prompts = hits
        .iter()
        .map(|h| {
            Ok(StylePrompt {
                clip: store.clip(&h.clip_id)?.clone(),
                score: h.score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StylePromptBundle::from_prompts(prompts))
}

/// Index and records swapped together on reload.
#[derive(Debug)]
pub struct Database {
    pub index: StyleIndex,
    pub store: RecordStore,
}

impl Database {
    pub fn new(index: StyleIndex, store: RecordStore) -> Result<Self> {
        if let Some(missing) = index.clip_ids().iter().find(|id| store.get(id).is_none()) {
            return Err(Error::UnknownClipId(missing.clone()));
        }
        Ok(Database { index, store })
    }
}

/// The three vectors behind one query, after mode masking.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryComponents {
    pub profile: Vec<f64>,
    pub emotion: Vec<f64>,
    pub user: Vec<f64>,
}

pub struct Retriever {
    db: RwLock<Arc<Database>>,
    embedders: EmbedderSet,
    profiles: ProfileCache,
    gate: Arc<dyn RetrievalGate>,
    rewriter: Arc<dyn QueryRewriter>,
    window: usize,
    searches: AtomicU64,
}

impl Retriever {
    pub fn new(db: Database, embedders: EmbedderSet) -> Result<Self> {
        embedders.check_dim(db.index.dim())?;
        Ok(Retriever {
            db: RwLock::new(Arc::new(db)),
            embedders,
            profiles: ProfileCache::new(),
            gate: Arc::new(StructuralGate),
            rewriter: Arc::new(TemplateRewriter),
            window: DEFAULT_WINDOW,
            searches: AtomicU64::new(0),
        })
    }

    pub fn with_gate(mut self, gate: Arc<dyn RetrievalGate>) -> Self {
        self.gate = gate;
        self
    }

    pub fn with_rewriter(mut self, rewriter: Arc<dyn QueryRewriter>) -> Self {
        self.rewriter = rewriter;
        self
    }

    pub fn database(&self) -> Arc<Database> {
        Arc::clone(&self.db.read())
    }

    /// Replaces index and records at once. Requests already running keep the
    /// snapshot they started with.
    pub fn swap(&self, db: Database) -> Result<()> {
        self.embedders.check_dim(db.index.dim())?;
        *self.db.write() = Arc::new(db);
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        self.db.read().index.len()
    }

    /// Number of index searches issued so far.
    pub fn search_count(&self) -> u64 {
        self.searches.load(Ordering::Relaxed)
    }

    pub fn embedders(&self) -> &EmbedderSet {
        &self.embedders
    }

    /// Query vectors for `query` under `config`; masked components are zero.
    pub fn query_components(
        &self,
        query: &StyleQuery,
        config: &RetrievalConfig,
        script: &Script,
    ) -> Result<QueryComponents> {
        query.validate(script.len())?;
        if query.script_id != script.script_id {
            return Err(Error::InvalidArgument(format!(
                "query refers to script {:?} but {:?} was supplied",
                query.script_id, script.script_id
            )));
        }
        let dim = self.embedders.dim();
        let speaker = &script.utterances[query.position].speaker_id;
        let cached = self
            .profiles
            .get_or_compute(script, speaker, self.embedders.profile.as_ref())?;
        let pref = query.user_pref.as_ref().filter(|p| !p.is_empty());
        let include_user = config.include_user.unwrap_or(pref.is_some());
        let pref = pref.filter(|_| include_user);

        let profile = if config.embedding_mode.uses_profile() {
            cached.vector.clone()
        } else {
            vec![0.0; dim]
        };
        let emotion = if config.embedding_mode.uses_emotion() {
            let text = self.rewriter.rewrite(&query.utterance_text, &cached.profile, pref);
            let context = build_context_window(&script.utterances, query.position, self.window)?;
            embed_emotion(self.embedders.emotion.as_ref(), &text, &cached.profile, &context)?
        } else {
            vec![0.0; dim]
        };
        let user = match pref {
            Some(p) => embed_user(self.embedders.user.as_ref(), p)?,
            None => vec![0.0; dim],
        };
        Ok(QueryComponents { profile, emotion, user })
    }

    pub fn retrieve(&self, query: &StyleQuery, config: &RetrievalConfig, script: &Script) -> Result<StylePromptBundle> {
        if !self.gate.needs_retrieval(query) {
            query.validate(script.len())?;
            let clip = query.explicit_style_clip.clone().ok_or(Error::EmptyBundle)?;
            tracing::info!(gate = "skip", clip_id = %clip.clip_id, "explicit style clip");
            return Ok(StylePromptBundle::from_prompts(vec![StylePrompt { clip, score: 0.0 }]));
        }
        let db = self.database();
        if db.index.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let c = self.query_components(query, config, script)?;
        let composed = compose_style_embedding(&c.profile, &c.emotion, &c.user)?;
        let request = SearchRequest {
            query: composed.values().to_vec(),
            k: query.k,
            probes: config.probes.resolve(&db.index),
        };
        self.searches.fetch_add(1, Ordering::Relaxed);
        let hits = db.index.search(&request)?;
        tracing::info!(
            gate = "retrieve",
            mode = %config.embedding_mode,
            k = query.k,
            probes = db.index.effective_probes(request.probes),
            hits = hits.len(),
            top = hits.first().map(|h| h.clip_id.as_str()).unwrap_or(""),
            "style retrieval"
        );
        assemble_prompts(&hits, &db.store)
    }
}
