use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use super::{embed_profile, Embedder};
use crate::error::{Error, Result};
use crate::script::Script;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    ExternalModel,
    Provided,
    Reference,
}

/// Global description of one speaker in one script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub script_id: String,
    pub speaker_id: String,
    pub profile_text: String,
    pub source: ProfileSource,
}

/// Offline profile summary: line share, word count and the speaker's opening line.
pub fn summarize_profile(script: &Script, speaker_id: &str) -> Result<CharacterProfile> {
    let lines: Vec<&str> = script
        .utterances
        .iter()
        .filter(|u| u.speaker_id == speaker_id)
        .map(|u| u.text.as_str())
        .collect();
    if lines.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "speaker {speaker_id:?} has no lines in script {:?}",
            script.script_id
        )));
    }
    let words: usize = lines.iter().map(|l| l.split_whitespace().count()).sum();
    let opening: String = lines[0].chars().take(80).collect();
    Ok(CharacterProfile {
        script_id: script.script_id.clone(),
        speaker_id: speaker_id.to_string(),
        profile_text: format!(
            "{speaker_id} speaks {} of {} lines ({words} words); opens with \"{opening}\"",
            lines.len(),
            script.len()
        ),
        source: ProfileSource::Reference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedProfile {
    pub profile: CharacterProfile,
    pub vector: Vec<f64>,
    script_text: String,
}

/// Per-(script, speaker) cache of profile text and profile vector.
///
/// Concurrent fills of the same key may both compute; the values are
/// deterministic so whichever insert lands last is equivalent.
#[derive(Debug, Default)]
pub struct ProfileCache {
    entries: DashMap<(String, String), Arc<CachedProfile>>,
}

impl ProfileCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get_or_compute(
        &self,
        script: &Script,
        speaker_id: &str,
        embedder: &dyn Embedder,
    ) -> Result<Arc<CachedProfile>> {
        let key = (script.script_id.clone(), speaker_id.to_string());
        let script_text = script.full_text();
        if let Some(hit) = self.entries.get(&key) {
            // a script re-registered under the same id invalidates the entry
            if hit.script_text == script_text {
                return Ok(Arc::clone(&hit));
            }
        }
        let profile = match script.profiles.get(speaker_id) {
            Some(text) if !text.trim().is_empty() => CharacterProfile {
                script_id: script.script_id.clone(),
                speaker_id: speaker_id.to_string(),
                profile_text: text.clone(),
                source: ProfileSource::Provided,
            },
            _ => summarize_profile(script, speaker_id)?,
        };
        let vector = embed_profile(embedder, &script_text, speaker_id)?;
        let entry = Arc::new(CachedProfile {
            profile,
            vector,
            script_text,
        });
        self.entries.insert(key, Arc::clone(&entry));
        Ok(entry)
    }
}
