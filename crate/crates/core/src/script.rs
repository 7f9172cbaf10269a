//! Scripts: the ordered utterances a synthesis job walks through.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: String,
    pub text: String,
}

impl Utterance {
    pub fn new(speaker_id: impl Into<String>, text: impl Into<String>) -> Self {
        Utterance {
            speaker_id: speaker_id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub script_id: String,
    pub utterances: Vec<Utterance>,
    /// Character profiles supplied by the author, keyed by speaker.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, String>,
}

impl Script {
    pub fn new(script_id: impl Into<String>, utterances: Vec<Utterance>) -> Self {
        Script {
            script_id: script_id.into(),
            utterances,
            profiles: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Canonical flattening of the whole script, the input of profile extraction.
    pub fn full_text(&self) -> String {
        full_text(&self.utterances)
    }

    pub fn load(path: &Path) -> Result<Script> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let script: Script = serde_json::from_slice(&bytes)?;
        if script.is_empty() {
            return Err(Error::EmptyInput("script utterances"));
        }
        Ok(script)
    }
}

/// One `speaker: text` line per utterance.
pub fn full_text(utterances: &[Utterance]) -> String {
    let mut out = String::new();
    for u in utterances {
        out.push_str(&u.speaker_id);
        out.push_str(": ");
        out.push_str(&u.text);
        out.push('\n');
    }
    out
}
