//! Seeded synthetic corpora for offline builds and scale tests.
//!
//! Every source is a pre-diarized dialogue between a few speakers drawn from
//! a fixed cast. Most turns already fall in the 5–10 s window; a minority
//! are long (with a pause marker), short, or below the quality threshold so
//! that every branch of the pipeline is exercised.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusManifest, DeclaredSegment, ManifestEntry, ProcessorLocators, MANIFEST_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub speakers: usize,
    pub sources: usize,
    pub segments_per_source: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 30 speakers, 2200 turns; ingests to a little over 2000 clips.
    fn default() -> Self {
        SyntheticSpec {
            speakers: 30,
            sources: 55,
            segments_per_source: 40,
            seed: 2024,
        }
    }
}

impl SyntheticSpec {
    pub fn small() -> Self {
        SyntheticSpec {
            speakers: 4,
            sources: 2,
            segments_per_source: 8,
            seed: 7,
        }
    }
}

const OPENERS: &[&str] = &[
    "well", "listen", "honestly", "look", "oh", "wait", "so", "hey", "right", "no",
];
const SUBJECTS: &[&str] = &[
    "the harbor",
    "your brother",
    "that letter",
    "the old mill",
    "our plan",
    "the storm",
    "the captain",
    "this house",
    "the market",
    "my sister",
    "the train",
    "the garden",
];
const VERBS: &[&str] = &[
    "is waiting for",
    "never trusted",
    "will ruin",
    "reminds me of",
    "belongs to",
    "was hiding",
    "cannot replace",
    "keeps calling",
    "found",
    "forgot",
];
const OBJECTS: &[&str] = &[
    "the truth",
    "everyone here",
    "a second chance",
    "the key",
    "my mother",
    "the last boat",
    "our money",
    "the night shift",
    "that promise",
    "the whole village",
];
const TAILS: &[&str] = &[
    "and you know it",
    "I swear",
    "believe me",
    "again tonight",
    "before dawn",
    "if we are lucky",
    "whatever they say",
    "for the last time",
];
const SCENARIOS: &[&str] = &["drama", "comedy", "thriller", "romance", "documentary"];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let mut s = format!(
        "{} {} {} {}",
        OPENERS.choose(rng).unwrap(),
        SUBJECTS.choose(rng).unwrap(),
        VERBS.choose(rng).unwrap(),
        OBJECTS.choose(rng).unwrap()
    );
    if rng.random_bool(0.5) {
        s.push(' ');
        s.push_str(TAILS.choose(rng).unwrap());
    }
    s
}

fn ms(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn generate_manifest(spec: &SyntheticSpec) -> CorpusManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cast: Vec<String> = (0..spec.speakers.max(1)).map(|i| format!("spk{i:02}")).collect();
    let mut entries = Vec::with_capacity(spec.sources);
    for src in 0..spec.sources {
        // rotate through the cast so every speaker appears
        let n_speakers = rng.random_range(2..=3).min(cast.len());
        let mut speakers: Vec<&String> = (0..n_speakers).map(|j| &cast[(src * 2 + j * 7) % cast.len()]).collect();
        speakers.dedup();
        let mut t = rng.random_range(0.0..1.5);
        let mut segments = Vec::with_capacity(spec.segments_per_source);
        let mut turn = 0usize;
        while segments.len() < spec.segments_per_source {
            let speaker = speakers[turn % speakers.len()].clone();
            turn += 1;
            let roll: f64 = rng.random();
            let (len, vad_score, silences) = if roll < 0.04 {
                // long turn with a pause, split by the chunker
                let len = ms(rng.random_range(12.0..18.5));
                let pause = ms(t + rng.random_range(5.5..len - 5.5));
                (len, rng.random_range(0.7..0.98), vec![pause])
            } else if roll < 0.07 {
                // low quality
                (ms(rng.random_range(5.5..9.0)), rng.random_range(0.2..0.6), Vec::new())
            } else if roll < 0.10 {
                // two short same-speaker turns that merge
                let a = ms(rng.random_range(2.5..4.0));
                let b = ms(rng.random_range(2.5..4.0));
                let v = rng.random_range(0.7..0.98);
                segments.push(DeclaredSegment {
                    start_s: ms(t),
                    end_s: ms(t + a),
                    speaker_id: speaker.clone(),
                    vad_score: v,
                    transcript: Some(sentence(&mut rng)),
                    silences: Vec::new(),
                });
                t = ms(t + a + 0.2);
                (b, v, Vec::new())
            } else {
                (ms(rng.random_range(5.2..9.6)), rng.random_range(0.65..0.99), Vec::new())
            };
            let start = ms(t);
            let end = ms(start + len);
            let words = (len * 2.2).round() as usize;
            let mut text = sentence(&mut rng);
            while text.split_whitespace().count() < words {
                text.push(' ');
                text.push_str(&sentence(&mut rng));
            }
            segments.push(DeclaredSegment {
                start_s: start,
                end_s: end,
                speaker_id: speaker,
                vad_score: (vad_score * 1000.0_f64).round() / 1000.0,
                transcript: Some(text),
                silences,
            });
            t = ms(end + rng.random_range(0.1..0.8));
        }
        segments.truncate(spec.segments_per_source);
        let mut tags = vec!["synthetic".to_string()];
        tags.push(SCENARIOS[src % SCENARIOS.len()].to_string());
        entries.push(ManifestEntry {
            audio_uri: format!("synthetic://corpus-{:x}/source{src:03}.wav", spec.seed),
            language: "en".into(),
            tags,
            segments,
        });
    }
    CorpusManifest {
        version: MANIFEST_VERSION,
        processors: ProcessorLocators::default(),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic_and_valid() {
        let a = generate_manifest(&SyntheticSpec::default());
        let b = generate_manifest(&SyntheticSpec::default());
        assert_eq!(a, b);
        a.validate().unwrap();
        let speakers: BTreeSet<&str> = a
            .entries
            .iter()
            .flat_map(|e| e.segments.iter().map(|s| s.speaker_id.as_str()))
            .collect();
        assert_eq!(speakers.len(), 30);
        let n: usize = a.entries.iter().map(|e| e.segments.len()).sum();
        assert_eq!(n, 55 * 40);
        for e in &a.entries {
            for w in e.segments.windows(2) {
                assert!(w[0].end_s < w[1].start_s);
            }
        }
    }
}
