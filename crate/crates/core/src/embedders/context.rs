use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::script::Utterance;

/// Number of preceding utterances handed to the emotion embedder.
pub const DEFAULT_WINDOW: usize = 5;

/// The dialogue immediately preceding one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub center_index: usize,
    pub window_size: usize,
    /// Up to `window_size` utterances strictly before `center_index`, in
    /// script order.
    pub utterances: Vec<Utterance>,
}

pub fn build_context_window(script: &[Utterance], position: usize, w: usize) -> Result<ContextWindow> {
    if position >= script.len() {
        return Err(Error::PositionOutOfRange {
            position,
            len: script.len(),
        });
    }
    if w == 0 {
        return Err(Error::InvalidArgument("context window size must be at least 1".into()));
    }
    let start = position.saturating_sub(w);
    Ok(ContextWindow {
        center_index: position,
        window_size: w,
        utterances: script[start..position].to_vec(),
    })
}
