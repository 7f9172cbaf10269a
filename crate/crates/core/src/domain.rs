//! Value types shared across the crate and the style-embedding arithmetic.
//!
//! A style embedding is the unweighted sum of three component vectors: the
//! character profile, the situational emotion and the user preference. Query
//! embeddings are kept in `f64`; anything written to disk (records, index) is
//! rounded to `f32` first, see [`StyleEmbedding::to_storage`].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default embedding dimension of a database.
pub const DEFAULT_DIM: usize = 256;
/// Shortest clip admitted to the database, in seconds.
pub const CLIP_MIN_S: f64 = 5.0;
/// Longest clip admitted to the database, in seconds.
pub const CLIP_MAX_S: f64 = 10.0;
/// Default number of style prompts retrieved per query.
pub const DEFAULT_K: usize = 3;

/// The three additive parts of a style embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleComponents {
    pub profile: Vec<f64>,
    pub emotion: Vec<f64>,
    pub user: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmbedding", into = "RawEmbedding")]
pub struct StyleEmbedding {
    values: Vec<f64>,
    components: Option<StyleComponents>,
}

#[derive(Serialize, Deserialize)]
struct RawEmbedding {
    dim: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<StyleComponents>,
}

impl TryFrom<RawEmbedding> for StyleEmbedding {
    type Error = Error;

    fn try_from(raw: RawEmbedding) -> Result<Self> {
        if raw.values.len() != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                actual: raw.values.len(),
            });
        }
        match raw.components {
            Some(c) => {
                let composed = compose_style_embedding(&c.profile, &c.emotion, &c.user)?;
                if composed.values != raw.values {
                    return Err(Error::InvalidArgument(
                        "embedding values are not the sum of their components".into(),
                    ));
                }
                Ok(composed)
            }
            None => StyleEmbedding::from_values(raw.values),
        }
    }
}

impl From<StyleEmbedding> for RawEmbedding {
    fn from(e: StyleEmbedding) -> Self {
        RawEmbedding {
            dim: e.values.len(),
            values: e.values,
            components: e.components,
        }
    }
}

impl StyleEmbedding {
    /// Wraps a bare vector with no component breakdown.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding values"));
        }
        check_finite(&values, "embedding")?;
        Ok(StyleEmbedding {
            values,
            components: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn components(&self) -> Option<&StyleComponents> {
        self.components.as_ref()
    }

    /// Values rounded to the 32-bit storage representation.
    pub fn to_storage(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }

    /// Rounds to storage precision and drops the component breakdown, which
    /// would no longer sum exactly to the rounded values.
    pub fn into_stored(self) -> StyleEmbedding {
        StyleEmbedding {
            values: self.to_storage().into_iter().map(f64::from).collect(),
            components: None,
        }
    }
}

/// `E_style = E_profile + E_emotion + E_user`, without normalization.
///
/// Each coordinate is summed in a canonical order (ascending by total order of
/// the three terms), so the result is bit-identical for any permutation of the
/// arguments.
pub fn compose_style_embedding(profile: &[f64], emotion: &[f64], user: &[f64]) -> Result<StyleEmbedding> {
    let dim = profile.len();
    if dim == 0 {
        return Err(Error::EmptyInput("style components"));
    }
    for other in [emotion.len(), user.len()] {
        if other != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: other,
            });
        }
    }
    check_finite(profile, "profile component")?;
    check_finite(emotion, "emotion component")?;
    check_finite(user, "user component")?;

    let values: Vec<f64> = (0..dim)
        .map(|i| canonical_sum3(profile[i], emotion[i], user[i]))
        .collect();
    check_finite(&values, "composed embedding")?;
    Ok(StyleEmbedding {
        values,
        components: Some(StyleComponents {
            profile: profile.to_vec(),
            emotion: emotion.to_vec(),
            user: user.to_vec(),
        }),
    })
}

fn canonical_sum3(a: f64, b: f64, c: f64) -> f64 {
    let mut terms = [a, b, c];
    terms.sort_by(f64::total_cmp);
    terms[0] + terms[1] + terms[2]
}

/// `Σ a[i]·b[i]`, accumulated in `f64` in ascending index order.
pub fn inner_product<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(dot(a, b))
}

#[inline]
pub(crate) fn dot<A, B>(a: &[A], b: &[B]) -> f64
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        acc += x.into() * y.into();
    }
    acc
}

pub(crate) fn check_finite<T: Copy + Into<f64>>(values: &[T], what: &'static str) -> Result<()> {
    if values.iter().all(|&v| v.into().is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(what))
    }
}

/// A short speech clip usable as a style prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechClip {
    pub clip_id: String,
    /// Locator of the audio. Clips assembled from several pieces of a source
    /// carry a `#t=start-end,...` fragment.
    pub audio_uri: String,
    pub duration_s: f64,
    pub speaker_id: String,
    pub language: String,
    pub transcript: String,
    pub quality_score: f64,
}

/// One database entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub clip: SpeechClip,
    pub embedding: StyleEmbedding,
    #[serde(default)]
    pub source_tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeBand {
    Child,
    Teen,
    YoungAdult,
    Adult,
    Senior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl AgeBand {
    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Child => "child",
            AgeBand::Teen => "teen",
            AgeBand::YoungAdult => "young_adult",
            AgeBand::Adult => "adult",
            AgeBand::Senior => "senior",
        }
    }
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        }
    }
}

/// What the listener asked for. Every field may be absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserPreference {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_band: Option<AgeBand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

impl UserPreference {
    pub fn is_empty(&self) -> bool {
        self.age_band.is_none() && self.gender.is_none() && self.region.is_none() && self.free_text.is_none()
    }
}

/// A request to pick style prompts for one utterance of a script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleQuery {
    pub utterance_text: String,
    pub script_id: String,
    pub position: usize,
    #[serde(default)]
    pub user_pref: Option<UserPreference>,
    #[serde(default)]
    pub explicit_style_clip: Option<SpeechClip>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    DEFAULT_K
}

impl StyleQuery {
    pub fn new(script_id: impl Into<String>, position: usize, utterance_text: impl Into<String>) -> Self {
        StyleQuery {
            utterance_text: utterance_text.into(),
            script_id: script_id.into(),
            position,
            user_pref: None,
            explicit_style_clip: None,
            k: DEFAULT_K,
        }
    }

    pub fn validate(&self, script_len: usize) -> Result<()> {
        if self.utterance_text.trim().is_empty() {
            return Err(Error::EmptyInput("utterance text"));
        }
        if self.position >= script_len {
            return Err(Error::PositionOutOfRange {
                position: self.position,
                len: script_len,
            });
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why a record was refused admission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    EmptyClipId,
    DurationOutOfRange,
    QualityBelowThreshold,
    DimensionMismatch,
    EmptyTranscript,
    DuplicateClipId,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Admission rule for the knowledge database. The quality score must be
/// strictly above the threshold.
pub fn validate_record(
    record: &KnowledgeRecord,
    db_dim: usize,
    quality_threshold: f64,
) -> std::result::Result<(), Rejection> {
    let clip = &record.clip;
    if clip.clip_id.is_empty() {
        return Err(Rejection::EmptyClipId);
    }
    if !(CLIP_MIN_S..=CLIP_MAX_S).contains(&clip.duration_s) {
        return Err(Rejection::DurationOutOfRange);
    }
    if clip.quality_score.partial_cmp(&quality_threshold) != Some(Ordering::Greater) {
        return Err(Rejection::QualityBelowThreshold);
    }
    if record.embedding.dim() != db_dim {
        return Err(Rejection::DimensionMismatch);
    }
    Ok(())
}
