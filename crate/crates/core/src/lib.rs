//! Retrieval-based style prompt selection for expressive text-to-speech.
//!
//! A knowledge database of short speech clips is keyed by style embeddings,
//! each the sum of a character-profile vector, a situational-emotion vector
//! and a user-preference vector. Queries are composed the same way and
//! matched by maximum inner product search; the best clips are bundled as
//! style prompts for a downstream synthesizer.

pub mod app;
pub mod domain;
pub mod embedders;
pub mod error;
pub mod index;
pub mod ingest;
pub mod retrieval;
pub mod script;
pub mod transport;
pub mod tts;

pub use error::{Error, Result};
