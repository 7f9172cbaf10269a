//! Hand-off to the synthesizer: the language-model input layout and the
//! synthesis client.

mod sequence;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use sequence::{construct_llm_sequence, LlmInputSequence, SequenceElement};

use crate::domain::SpeechClip;
use crate::error::{Error, Result};
use crate::retrieval::StylePromptBundle;
use crate::transport::{is_http, JsonClient};

/// Text, the timbre clip chosen by the user, and the retrieved style clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRequest {
    pub text: String,
    pub timbre_prompt: SpeechClip,
    pub style_bundle: StylePromptBundle,
}

impl SynthesisRequest {
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        if self.style_bundle.is_empty() {
            return Err(Error::EmptyBundle);
        }
        Ok(())
    }

    pub fn wire(&self) -> SynthesizeBody {
        SynthesizeBody {
            text: self.text.clone(),
            timbre_clip_uri: self.timbre_prompt.audio_uri.clone(),
            style_clip_uris: self.style_bundle.clip_uris(),
        }
    }
}

/// Body of `POST /synthesize`. Timbre and style travel in separate fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizeBody {
    pub text: String,
    pub timbre_clip_uri: String,
    pub style_clip_uris: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisDescriptor {
    pub text: String,
    pub timbre_clip_uri: String,
    pub style_clip_uris: Vec<String>,
    #[serde(rename = "K_style_clips")]
    pub k_style_clips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub audio_uri: String,
    pub descriptor: SynthesisDescriptor,
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, request: &SynthesisRequest) -> Result<SynthesisResult>;
}

/// Offline stand-in: echoes what it received and names a placeholder
/// output derived from the request.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockSynthesizer;

impl MockSynthesizer {
    pub fn respond(body: &SynthesizeBody) -> SynthesisResult {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(body).unwrap_or_default());
        SynthesisResult {
            audio_uri: format!("mock://synth/{}.wav", hex::encode(&h.finalize()[..8])),
            descriptor: SynthesisDescriptor {
                text: body.text.clone(),
                timbre_clip_uri: body.timbre_clip_uri.clone(),
                style_clip_uris: body.style_clip_uris.clone(),
                k_style_clips: body.style_clip_uris.len(),
            },
        }
    }
}

impl Synthesizer for MockSynthesizer {
    fn synthesize(&self, request: &SynthesisRequest) -> Result<SynthesisResult> {
        request.validate()?;
        Ok(Self::respond(&request.wire()))
    }
}

#[derive(Debug, Clone)]
pub struct HttpSynthesizer {
    client: JsonClient,
}

impl HttpSynthesizer {
    pub fn new(address: impl Into<String>, timeout_ms: u64) -> Self {
        HttpSynthesizer {
            client: JsonClient::new(address, timeout_ms),
        }
    }
}

impl Synthesizer for HttpSynthesizer {
    fn synthesize(&self, request: &SynthesisRequest) -> Result<SynthesisResult> {
        request.validate()?;
        self.client.post("/synthesize", &request.wire())
    }
}

/// `mock` or an http(s) base URL.
pub fn synthesizer_from_locator(locator: &str, timeout_ms: u64) -> Result<Arc<dyn Synthesizer>> {
    if locator == "mock" {
        Ok(Arc::new(MockSynthesizer))
    } else if is_http(locator) {
        Ok(Arc::new(HttpSynthesizer::new(locator, timeout_ms)))
    } else {
        Err(Error::InvalidArgument(format!(
            "synthesizer locator must be 'mock' or an http(s) URL, got {locator:?}"
        )))
    }
}

pub fn synthesize(synth: &dyn Synthesizer, request: &SynthesisRequest) -> Result<SynthesisResult> {
    synth.synthesize(request)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::assemble_prompts;

    fn clip(id: &str) -> SpeechClip {
        SpeechClip {
            clip_id: id.into(),
            audio_uri: format!("file:///{id}.wav"),
            duration_s: 6.0,
            speaker_id: "s".into(),
            language: "en".into(),
            transcript: "t".into(),
            quality_score: 0.9,
        }
    }

    fn request(ids: &[&str]) -> SynthesisRequest {
        let store = crate::ingest::RecordStore::new(ids.iter().map(|id| crate::domain::KnowledgeRecord {
            clip: clip(id),
            embedding: crate::domain::StyleEmbedding::from_values(vec![1.0]).unwrap(),
            source_tags: vec![],
        }));
        let hits: Vec<_> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| crate::index::RetrievalHit {
                clip_id: id.to_string(),
                score: 1.0 / (i + 1) as f64,
                rank: i + 1,
            })
            .collect();
        SynthesisRequest {
            text: "Good morning.".into(),
            timbre_prompt: clip("timbre"),
            style_bundle: assemble_prompts(&hits, &store).unwrap(),
        }
    }

    #[test]
    fn mock_echoes_manifest() {
        let req = request(&["c", "a", "b"]);
        let out = MockSynthesizer.synthesize(&req).unwrap();
        assert_eq!(
            out.descriptor.style_clip_uris,
            vec!["file:///c.wav", "file:///a.wav", "file:///b.wav"]
        );
        assert_eq!(out.descriptor.k_style_clips, 3);
        assert_eq!(out.descriptor.timbre_clip_uri, "file:///timbre.wav");
        assert_eq!(out, MockSynthesizer.synthesize(&req).unwrap());
        let json = serde_json::to_value(&out).unwrap();
        assert_eq!(json["descriptor"]["K_style_clips"], 3);
    }

    #[test]
    fn request_checks() {
        let mut req = request(&["a"]);
        req.text = " ".into();
        assert!(matches!(MockSynthesizer.synthesize(&req), Err(Error::EmptyText)));
        let mut req = request(&["a"]);
        req.style_bundle.prompts.clear();
        assert!(matches!(MockSynthesizer.synthesize(&req), Err(Error::EmptyBundle)));
    }

    #[test]
    fn unreachable_synthesizer() {
        let s = synthesizer_from_locator("http://127.0.0.1:9", 200).unwrap();
        assert!(matches!(
            s.synthesize(&request(&["a"])),
            Err(Error::EndpointUnavailable { .. })
        ));
        assert!(synthesizer_from_locator("grpc://x", 10).is_err());
    }
}
