//! Embedder slots for the three style components.
//!
//! Each slot is an [`Embedder`]: either the in-process [`ReferenceEmbedder`]
//! (keyed-hash expansion, deterministic, no model) or an [`HttpEmbedder`]
//! speaking the `POST /embed` contract. The free functions `embed_profile`,
//! `embed_emotion` and `embed_user` wrap a slot and enforce the output
//! contract (kind, dimension, finiteness).

mod context;
mod http;
mod profile;
mod reference;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use context::{build_context_window, ContextWindow, DEFAULT_WINDOW};
pub use http::{EmbedRequest, EmbedResponse, HttpEmbedder};
pub use profile::{summarize_profile, CachedProfile, CharacterProfile, ProfileCache, ProfileSource};
pub use reference::{canonical_payload, embed_reference, ReferenceEmbedder, DEFAULT_SEED};

use crate::domain::{check_finite, UserPreference};
use crate::error::{Error, Result};
use crate::script::Utterance;
use crate::transport::{is_http, DEFAULT_TIMEOUT_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Profile,
    Emotion,
    User,
}

impl EmbedderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedderKind::Profile => "profile",
            EmbedderKind::Emotion => "emotion",
            EmbedderKind::User => "user",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    InProcessReference,
    HttpClient,
}

/// Where and how a component embedder is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderEndpoint {
    pub kind: EmbedderKind,
    pub transport: Transport,
    pub address: Option<String>,
    pub timeout_ms: u64,
    pub dim: usize,
    /// Seed of the reference transport; ignored over HTTP.
    pub seed: u64,
}

impl EmbedderEndpoint {
    pub fn reference(kind: EmbedderKind, dim: usize, seed: u64) -> Self {
        EmbedderEndpoint {
            kind,
            transport: Transport::InProcessReference,
            address: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            dim,
            seed,
        }
    }

    pub fn http(kind: EmbedderKind, address: impl Into<String>, dim: usize, timeout_ms: u64) -> Self {
        EmbedderEndpoint {
            kind,
            transport: Transport::HttpClient,
            address: Some(address.into()),
            timeout_ms,
            dim,
            seed: 0,
        }
    }

    /// Parses a locator: `reference` or an `http(s)://` base address.
    pub fn from_locator(kind: EmbedderKind, locator: &str, dim: usize, seed: u64, timeout_ms: u64) -> Result<Self> {
        if locator == "reference" {
            Ok(Self::reference(kind, dim, seed))
        } else if is_http(locator) {
            Ok(Self::http(kind, locator, dim, timeout_ms))
        } else {
            Err(Error::InvalidArgument(format!(
                "embedder locator must be 'reference' or an http(s) URL, got {locator:?}"
            )))
        }
    }

    pub fn connect(&self) -> Result<Arc<dyn Embedder>> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("embedder dim must be positive".into()));
        }
        Ok(match self.transport {
            Transport::InProcessReference => Arc::new(ReferenceEmbedder::new(self.kind, self.dim, self.seed)),
            Transport::HttpClient => {
                let address = self
                    .address
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("http embedder without address".into()))?;
                Arc::new(HttpEmbedder::new(self.kind, address, self.dim, self.timeout_ms))
            }
        })
    }
}

/// Inputs of one embedding call, as sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmbedPayload {
    Profile {
        script_text: String,
        speaker_id: String,
    },
    Emotion {
        utterance_text: String,
        profile_text: String,
        context: Vec<Utterance>,
    },
    User {
        pref: UserPreference,
    },
}

impl EmbedPayload {
    pub fn kind(&self) -> EmbedderKind {
        match self {
            EmbedPayload::Profile { .. } => EmbedderKind::Profile,
            EmbedPayload::Emotion { .. } => EmbedderKind::Emotion,
            EmbedPayload::User { .. } => EmbedderKind::User,
        }
    }
}

/// A component embedder. Implementations must be safe to call concurrently.
pub trait Embedder: Send + Sync {
    fn kind(&self) -> EmbedderKind;
    fn dim(&self) -> usize;
    fn embed(&self, payload: &EmbedPayload) -> Result<Vec<f64>>;
}

/// The profile, emotion and user slots used together for one database.
#[derive(Clone)]
pub struct EmbedderSet {
    pub profile: Arc<dyn Embedder>,
    pub emotion: Arc<dyn Embedder>,
    pub user: Arc<dyn Embedder>,
}

impl EmbedderSet {
    pub fn reference(dim: usize, seed: u64) -> Self {
        EmbedderSet {
            profile: Arc::new(ReferenceEmbedder::new(EmbedderKind::Profile, dim, seed)),
            emotion: Arc::new(ReferenceEmbedder::new(EmbedderKind::Emotion, dim, seed)),
            user: Arc::new(ReferenceEmbedder::new(EmbedderKind::User, dim, seed)),
        }
    }

    pub fn from_endpoints(
        profile: &EmbedderEndpoint,
        emotion: &EmbedderEndpoint,
        user: &EmbedderEndpoint,
    ) -> Result<Self> {
        let set = EmbedderSet {
            profile: profile.connect()?,
            emotion: emotion.connect()?,
            user: user.connect()?,
        };
        set.check_dim(profile.dim)?;
        Ok(set)
    }

    /// All three slots must emit the database dimension.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        for e in [&self.profile, &self.emotion, &self.user] {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }
}

fn checked(embedder: &dyn Embedder, expected: EmbedderKind, payload: &EmbedPayload) -> Result<Vec<f64>> {
    if embedder.kind() != expected {
        return Err(Error::InvalidArgument(format!(
            "{} embedder used in the {} slot",
            embedder.kind().as_str(),
            expected.as_str()
        )));
    }
    let v = embedder.embed(payload)?;
    if v.len() != embedder.dim() {
        return Err(Error::DimensionMismatch {
            expected: embedder.dim(),
            actual: v.len(),
        });
    }
    check_finite(&v, "embedder output")?;
    Ok(v)
}

pub fn embed_profile(embedder: &dyn Embedder, full_script_text: &str, speaker_id: &str) -> Result<Vec<f64>> {
    if full_script_text.is_empty() {
        return Err(Error::EmptyInput("script text"));
    }
    let payload = EmbedPayload::Profile {
        script_text: full_script_text.to_string(),
        speaker_id: speaker_id.to_string(),
    };
    checked(embedder, EmbedderKind::Profile, &payload)
}

pub fn embed_emotion(
    embedder: &dyn Embedder,
    utterance_text: &str,
    profile: &CharacterProfile,
    context: &ContextWindow,
) -> Result<Vec<f64>> {
    let payload = EmbedPayload::Emotion {
        utterance_text: utterance_text.to_string(),
        profile_text: profile.profile_text.clone(),
        context: context.utterances.clone(),
    };
    checked(embedder, EmbedderKind::Emotion, &payload)
}

/// A preference with every field absent maps to the zero vector without
/// consulting the embedder.
pub fn embed_user(embedder: &dyn Embedder, pref: &UserPreference) -> Result<Vec<f64>> {
    if pref.is_empty() {
        return Ok(vec![0.0; embedder.dim()]);
    }
    let payload = EmbedPayload::User { pref: pref.clone() };
    checked(embedder, EmbedderKind::User, &payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Gender;

    struct Broken;

    impl Embedder for Broken {
        fn kind(&self) -> EmbedderKind {
            EmbedderKind::Profile
        }
        fn dim(&self) -> usize {
            4
        }
        fn embed(&self, _: &EmbedPayload) -> Result<Vec<f64>> {
            Ok(vec![1.0; 3])
        }
    }

    #[test]
    fn profile_deterministic_and_speaker_sensitive() {
        let e = ReferenceEmbedder::new(EmbedderKind::Profile, 32, DEFAULT_SEED);
        let script = "alice: hi\nbob: hello\n";
        let a1 = embed_profile(&e, script, "alice").unwrap();
        let a2 = embed_profile(&e, script, "alice").unwrap();
        let b = embed_profile(&e, script, "bob").unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert!(embed_profile(&e, "", "alice").is_err());
    }

    #[test]
    fn emotion_depends_on_context() {
        let e = ReferenceEmbedder::new(EmbedderKind::Emotion, 32, DEFAULT_SEED);
        let profile = CharacterProfile {
            script_id: "s".into(),
            speaker_id: "alice".into(),
            profile_text: "a cheerful narrator".into(),
            source: ProfileSource::Provided,
        };
        let ctx = |t: &str| ContextWindow {
            center_index: 2,
            window_size: 5,
            utterances: vec![Utterance::new("bob", "hey"), Utterance::new("alice", t)],
        };
        let v1 = embed_emotion(&e, "ok", &profile, &ctx("fine")).unwrap();
        let v2 = embed_emotion(&e, "ok", &profile, &ctx("fine")).unwrap();
        let v3 = embed_emotion(&e, "ok", &profile, &ctx("awful")).unwrap();
        assert_eq!(v1, v2);
        assert_ne!(v1, v3);

        let empty = ContextWindow {
            center_index: 0,
            window_size: 5,
            utterances: vec![],
        };
        assert_eq!(embed_emotion(&e, "ok", &profile, &empty).unwrap().len(), 32);
    }

    #[test]
    fn user_absent_is_zero() {
        let e = ReferenceEmbedder::new(EmbedderKind::User, 16, DEFAULT_SEED);
        assert_eq!(embed_user(&e, &UserPreference::default()).unwrap(), vec![0.0; 16]);

        let north = UserPreference {
            region: Some("north".into()),
            ..Default::default()
        };
        assert_eq!(embed_user(&e, &north).unwrap(), embed_user(&e, &north).unwrap());

        let f = UserPreference {
            gender: Some(Gender::Female),
            ..Default::default()
        };
        let m = UserPreference {
            gender: Some(Gender::Male),
            ..Default::default()
        };
        assert_ne!(embed_user(&e, &f).unwrap(), embed_user(&e, &m).unwrap());
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(matches!(
            embed_profile(&Broken, "x", "y"),
            Err(Error::DimensionMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn wrong_slot_is_rejected() {
        let e = ReferenceEmbedder::new(EmbedderKind::User, 4, 0);
        assert!(embed_profile(&e, "x", "y").is_err());
    }

    #[test]
    fn locator_parsing() {
        let r = EmbedderEndpoint::from_locator(EmbedderKind::User, "reference", 8, 1, 100).unwrap();
        assert_eq!(r.transport, Transport::InProcessReference);
        let h = EmbedderEndpoint::from_locator(EmbedderKind::User, "http://127.0.0.1:9", 8, 1, 100).unwrap();
        assert_eq!(h.transport, Transport::HttpClient);
        assert!(EmbedderEndpoint::from_locator(EmbedderKind::User, "grpc://x", 8, 1, 100).is_err());
    }

    #[test]
    fn http_unreachable() {
        // Port 9 (discard) is closed on the loopback interface in the sandbox.
        let e = HttpEmbedder::new(EmbedderKind::Profile, "http://127.0.0.1:9", 8, 200);
        assert!(matches!(
            embed_profile(&e, "a: b\n", "a"),
            Err(Error::EndpointUnavailable { .. })
        ));
    }
}
