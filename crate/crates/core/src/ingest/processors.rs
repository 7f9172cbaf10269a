//! Clients for the external corpus processors (denoise, diarize, VAD, ASR).
//!
//! Every stage is either `passthrough` or an HTTP service answering
//! `POST /process` with `{stage, audio_uri, params}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ClipDraft, ManifestEntry, RawSegment};
use crate::error::{Error, Result};
use crate::transport::{is_http, JsonClient, DEFAULT_TIMEOUT_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Denoise,
    Diarize,
    Vad,
    Asr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessRequest {
    pub stage: Stage,
    pub audio_uri: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone)]
pub enum StageClient {
    Passthrough,
    Http(JsonClient),
}

impl StageClient {
    pub fn from_locator(locator: &str, timeout_ms: u64) -> Result<Self> {
        if locator == "passthrough" {
            Ok(StageClient::Passthrough)
        } else if is_http(locator) {
            Ok(StageClient::Http(JsonClient::new(locator, timeout_ms)))
        } else {
            Err(Error::InvalidArgument(format!(
                "processor locator must be 'passthrough' or an http(s) URL, got {locator:?}"
            )))
        }
    }

    fn call<R: serde::de::DeserializeOwned>(
        client: &JsonClient,
        stage: Stage,
        audio_uri: &str,
        params: Value,
    ) -> Result<R> {
        client.post(
            "/process",
            &ProcessRequest {
                stage,
                audio_uri: audio_uri.to_string(),
                params,
            },
        )
    }
}

#[derive(Deserialize)]
struct DenoiseResponse {
    audio_uri: String,
}

#[derive(Deserialize)]
struct SegmentsResponse {
    segments: Vec<RawSegment>,
}

#[derive(Deserialize)]
struct AsrResponse {
    transcript: String,
}

/// Locators of the four processor stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessorLocators {
    #[serde(default = "passthrough")]
    pub denoise: String,
    #[serde(default = "passthrough")]
    pub diarize: String,
    #[serde(default = "passthrough")]
    pub vad: String,
    #[serde(default = "passthrough")]
    pub asr: String,
}

fn passthrough() -> String {
    "passthrough".into()
}

impl Default for ProcessorLocators {
    fn default() -> Self {
        ProcessorLocators {
            denoise: passthrough(),
            diarize: passthrough(),
            vad: passthrough(),
            asr: passthrough(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Processors {
    pub denoise: StageClient,
    pub diarize: StageClient,
    pub vad: StageClient,
    pub asr: StageClient,
}

impl Processors {
    pub fn passthrough() -> Self {
        Processors {
            denoise: StageClient::Passthrough,
            diarize: StageClient::Passthrough,
            vad: StageClient::Passthrough,
            asr: StageClient::Passthrough,
        }
    }

    pub fn from_locators(l: &ProcessorLocators, timeout_ms: u64) -> Result<Self> {
        Ok(Processors {
            denoise: StageClient::from_locator(&l.denoise, timeout_ms)?,
            diarize: StageClient::from_locator(&l.diarize, timeout_ms)?,
            vad: StageClient::from_locator(&l.vad, timeout_ms)?,
            asr: StageClient::from_locator(&l.asr, timeout_ms)?,
        })
    }

    pub fn from_locators_default_timeout(l: &ProcessorLocators) -> Result<Self> {
        Self::from_locators(l, DEFAULT_TIMEOUT_MS)
    }
}

/// Returns the locator of the cleaned audio.
pub fn denoise(client: &StageClient, audio_uri: &str) -> Result<String> {
    match client {
        StageClient::Passthrough => Ok(audio_uri.to_string()),
        StageClient::Http(c) => {
            let r: DenoiseResponse = StageClient::call(c, Stage::Denoise, audio_uri, json!({}))?;
            Ok(r.audio_uri)
        }
    }
}

/// Speaker turns of one source. Passthrough uses the segments declared in
/// the manifest entry.
pub fn diarize(client: &StageClient, entry: &ManifestEntry, audio_uri: &str) -> Result<Vec<RawSegment>> {
    let mut segments = match client {
        StageClient::Passthrough => {
            if entry.segments.is_empty() {
                return Err(Error::EmptyInput(
                    "manifest entry has no segments for passthrough diarization",
                ));
            }
            entry
                .segments
                .iter()
                .map(|s| s.clone().into_raw(&entry.audio_uri))
                .collect()
        }
        StageClient::Http(c) => {
            let r: SegmentsResponse = StageClient::call(c, Stage::Diarize, audio_uri, json!({}))?;
            r.segments
        }
    };
    // clip ids hash the manifest locator, not the denoised copy
    for s in &mut segments {
        s.source_uri = entry.audio_uri.clone();
    }
    segments.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(segments)
}

/// VAD trimming and scoring.
pub fn vad(client: &StageClient, audio_uri: &str, segments: Vec<RawSegment>) -> Result<Vec<RawSegment>> {
    match client {
        StageClient::Passthrough => Ok(segments),
        StageClient::Http(c) => {
            let source = segments.first().map(|s| s.source_uri.clone());
            let r: SegmentsResponse = StageClient::call(c, Stage::Vad, audio_uri, json!({ "segments": segments }))?;
            let mut out = r.segments;
            if let Some(src) = source {
                for s in &mut out {
                    s.source_uri = src.clone();
                }
            }
            Ok(out)
        }
    }
}

/// ASR for one draft. An empty result is `EmptyTranscript`.
pub fn transcribe(client: &StageClient, draft: &ClipDraft) -> Result<String> {
    let text = match client {
        StageClient::Passthrough => draft.transcript.clone().unwrap_or_default(),
        StageClient::Http(c) => {
            let r: AsrResponse = StageClient::call(
                c,
                Stage::Asr,
                &draft.audio_uri(),
                json!({
                    "speaker_id": draft.speaker_id,
                    "pieces": draft.pieces,
                    "hint": draft.transcript,
                }),
            )?;
            r.transcript
        }
    };
    let text = text.trim();
    if text.is_empty() {
        Err(Error::EmptyTranscript)
    } else {
        Ok(text.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Piece;

    fn draft(transcript: Option<&str>) -> ClipDraft {
        ClipDraft {
            clip_id: "x".into(),
            source_uri: "file:///a.wav".into(),
            speaker_id: "s".into(),
            pieces: vec![Piece {
                start_s: 0.0,
                end_s: 6.0,
            }],
            duration_s: 6.0,
            quality_score: 0.9,
            transcript: transcript.map(str::to_string),
        }
    }

    #[test]
    fn passthrough_echoes_transcript() {
        assert_eq!(
            transcribe(&StageClient::Passthrough, &draft(Some("hello"))).unwrap(),
            "hello"
        );
    }

    #[test]
    fn empty_transcript() {
        assert!(matches!(
            transcribe(&StageClient::Passthrough, &draft(Some("  "))),
            Err(Error::EmptyTranscript)
        ));
        assert!(matches!(
            transcribe(&StageClient::Passthrough, &draft(None)),
            Err(Error::EmptyTranscript)
        ));
    }

    #[test]
    fn unreachable_asr() {
        let c = StageClient::from_locator("http://127.0.0.1:9", 200).unwrap();
        assert!(matches!(
            transcribe(&c, &draft(Some("hi"))),
            Err(Error::EndpointUnavailable { .. })
        ));
    }

    #[test]
    fn locators() {
        assert!(StageClient::from_locator("ftp://x", 10).is_err());
        assert!(matches!(
            StageClient::from_locator("passthrough", 10).unwrap(),
            StageClient::Passthrough
        ));
    }
}
