//! Deterministic stand-in for the neural embedders.
//!
//! Output coordinate `j` of `embed_reference(salt, payload, dim, seed)` is
//! derived from block `j / 4` of
//!
//! ```text
//! SHA-256( u64le(len(salt)) ‖ salt ‖ u64le(len(payload)) ‖ payload ‖ u64le(seed) ‖ u32le(block) )
//! ```
//!
//! by reading the 8-byte little-endian word `j % 4`, keeping its top 53 bits
//! as `m`, and returning `2·m/2^53 − 1`, a value in `[-1, 1)`. This layout is
//! pinned by a golden file in the test suite.

use sha2::{Digest, Sha256};

use super::{EmbedPayload, Embedder, EmbedderKind};
use crate::domain::UserPreference;
use crate::error::Result;
use crate::script::Utterance;

pub const DEFAULT_SEED: u64 = 0x5EED_51A7;

const UNIT_SEP: char = '\u{1f}';
const RECORD_SEP: char = '\u{1e}';

pub fn embed_reference(salt: &str, payload: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    let mut block = 0u32;
    while out.len() < dim {
        let mut h = Sha256::new();
        h.update((salt.len() as u64).to_le_bytes());
        h.update(salt.as_bytes());
        h.update((payload.len() as u64).to_le_bytes());
        h.update(payload.as_bytes());
        h.update(seed.to_le_bytes());
        h.update(block.to_le_bytes());
        let digest = h.finalize();
        for word in digest.chunks_exact(8) {
            if out.len() == dim {
                break;
            }
            let bits = u64::from_le_bytes(word.try_into().expect("8-byte chunk")) >> 11;
            out.push(2.0 * (bits as f64) / (1u64 << 53) as f64 - 1.0);
        }
        block += 1;
    }
    out
}

/// Canonical string form of a payload: fields joined by U+001F in a fixed
/// order, context utterances separated by U+001E.
///
/// * profile: `speaker_id ␟ script_text`
/// * emotion: `utterance_text ␟ profile_text ␟ (speaker ␟ text) ␞ ...`
/// * user: `age=… ␟ gender=… ␟ region=… ␟ free_text=…` (absent fields empty)
pub fn canonical_payload(payload: &EmbedPayload) -> String {
    match payload {
        EmbedPayload::Profile {
            script_text,
            speaker_id,
        } => {
            format!("{speaker_id}{UNIT_SEP}{script_text}")
        }
        EmbedPayload::Emotion {
            utterance_text,
            profile_text,
            context,
        } => {
            let ctx: Vec<String> = context.iter().map(utterance_field).collect();
            format!(
                "{utterance_text}{UNIT_SEP}{profile_text}{UNIT_SEP}{}",
                ctx.join(&RECORD_SEP.to_string())
            )
        }
        EmbedPayload::User { pref } => user_field(pref),
    }
}

fn utterance_field(u: &Utterance) -> String {
    format!("{}{UNIT_SEP}{}", u.speaker_id, u.text)
}

fn user_field(p: &UserPreference) -> String {
    format!(
        "age={}{UNIT_SEP}gender={}{UNIT_SEP}region={}{UNIT_SEP}free_text={}",
        p.age_band.map(|a| a.as_str()).unwrap_or(""),
        p.gender.map(|g| g.as_str()).unwrap_or(""),
        p.region.as_deref().unwrap_or(""),
        p.free_text.as_deref().unwrap_or(""),
    )
}

#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    kind: EmbedderKind,
    dim: usize,
    seed: u64,
}

impl ReferenceEmbedder {
    pub fn new(kind: EmbedderKind, dim: usize, seed: u64) -> Self {
        ReferenceEmbedder { kind, dim, seed }
    }
}

impl Embedder for ReferenceEmbedder {
    fn kind(&self) -> EmbedderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, payload: &EmbedPayload) -> Result<Vec<f64>> {
        Ok(embed_reference(
            payload.kind().as_str(),
            &canonical_payload(payload),
            self.dim,
            self.seed,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deterministic() {
        let a = embed_reference("emotion", "hello", 10, 7);
        let b = embed_reference("emotion", "hello", 10, 7);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dim_one() {
        let v = embed_reference("user", "", 1, 0);
        assert_eq!(v.len(), 1);
        assert!((-1.0..=1.0).contains(&v[0]));
    }

    #[test]
    fn prefix_consistency() {
        let long = embed_reference("p", "x", 9, 3);
        let short = embed_reference("p", "x", 5, 3);
        assert_eq!(&long[..5], &short[..]);
    }

    #[test]
    fn salt_and_seed_matter() {
        assert_ne!(embed_reference("a", "x", 4, 0), embed_reference("b", "x", 4, 0));
        assert_ne!(embed_reference("a", "x", 4, 0), embed_reference("a", "x", 4, 1));
        // length prefixes keep the salt/payload split unambiguous
        assert_ne!(embed_reference("ab", "c", 4, 0), embed_reference("a", "bc", 4, 0));
    }

    proptest! {
        #[test]
        fn range(salt in ".{0,8}", payload in ".{0,64}", dim in 1usize..70, seed: u64) {
            let v = embed_reference(&salt, &payload, dim, seed);
            prop_assert_eq!(v.len(), dim);
            prop_assert!(v.iter().all(|x| x.is_finite() && (-1.0..=1.0).contains(x)));
        }
    }
}
