//! Cutting diarized segments into 5–10 s clip drafts.
//!
//! Timing is done in integer microseconds so that durations sum exactly and
//! a draft accepted by the chunker is never pushed out of range by rounding.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RawSegment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortSegmentRule {
    /// Merge with adjacent same-speaker audio while the result fits `max_s`;
    /// drop whatever still falls short.
    MergeSameSpeaker,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkPolicy {
    pub min_s: f64,
    pub max_s: f64,
    pub short_segment_rule: ShortSegmentRule,
    pub quality_threshold: f64,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        ChunkPolicy {
            min_s: 5.0,
            max_s: 10.0,
            short_segment_rule: ShortSegmentRule::MergeSameSpeaker,
            quality_threshold: 0.6,
        }
    }
}

impl ChunkPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_s > 0.0 && self.min_s < self.max_s && self.max_s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "chunk bounds must satisfy 0 < min_s < max_s, got {} and {}",
                self.min_s, self.max_s
            )));
        }
        if !(0.0..=1.0).contains(&self.quality_threshold) {
            return Err(Error::InvalidArgument("quality threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A contiguous stretch of source audio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start_s: f64,
    pub end_s: f64,
}

/// A clip candidate before transcription and embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipDraft {
    pub clip_id: String,
    pub source_uri: String,
    pub speaker_id: String,
    pub pieces: Vec<Piece>,
    /// Sum of piece durations.
    pub duration_s: f64,
    /// Lowest VAD score among the contributing segments.
    pub quality_score: f64,
    /// Transcript carried over from the segments, if they had one.
    pub transcript: Option<String>,
}

impl ClipDraft {
    pub fn start_s(&self) -> f64 {
        self.pieces.first().map_or(0.0, |p| p.start_s)
    }

    pub fn end_s(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.end_s)
    }

    /// `source#t=a-b,c-d` with millisecond precision.
    pub fn audio_uri(&self) -> String {
        let spans: Vec<String> = self
            .pieces
            .iter()
            .map(|p| format!("{:.3}-{:.3}", p.start_s, p.end_s))
            .collect();
        format!("{}#t={}", self.source_uri, spans.join(","))
    }

    /// Draft standing for a whole segment, used when a segment is rejected
    /// before chunking.
    pub fn from_segment(seg: &RawSegment) -> ClipDraft {
        let duration = us_to_s(to_us(seg.end_s) - to_us(seg.start_s));
        ClipDraft {
            clip_id: clip_id(&seg.source_uri, seg.start_s, seg.end_s),
            source_uri: seg.source_uri.clone(),
            speaker_id: seg.speaker_id.clone(),
            pieces: vec![Piece {
                start_s: seg.start_s,
                end_s: seg.end_s,
            }],
            duration_s: duration,
            quality_score: seg.vad_score,
            transcript: seg.transcript.clone(),
        }
    }
}

/// Content hash of `(source_uri, start_s, end_s)`: 128 bits of SHA-256, hex.
pub fn clip_id(source_uri: &str, start_s: f64, end_s: f64) -> String {
    let mut h = Sha256::new();
    h.update(source_uri.as_bytes());
    h.update([0x1f]);
    h.update(start_s.to_le_bytes());
    h.update(end_s.to_le_bytes());
    hex::encode(&h.finalize()[..16])
}

fn to_us(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

fn us_to_s(us: i64) -> f64 {
    us as f64 / 1e6
}

#[derive(Debug, Clone)]
struct Span {
    seg: usize,
    start: i64,
    end: i64,
    transcript: Option<String>,
}

impl Span {
    fn len(&self) -> i64 {
        self.end - self.start
    }
}

/// Words of `text` falling in `[a, b)` of the segment timeline, split
/// proportionally to time.
fn slice_words(text: &str, seg_start: i64, seg_end: i64, a: i64, b: i64) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let n = words.len() as i128;
    let total = (seg_end - seg_start) as i128;
    let lo = (n * (a - seg_start) as i128 / total) as usize;
    let hi = (n * (b - seg_start) as i128 / total) as usize;
    words[lo..hi.min(words.len())].join(" ")
}

fn split_segment(idx: usize, seg: &RawSegment, min_us: i64, max_us: i64) -> Vec<Span> {
    let start = to_us(seg.start_s);
    let end = to_us(seg.end_s);
    let mut markers: Vec<i64> = seg
        .silences
        .iter()
        .map(|&m| to_us(m))
        .filter(|&m| m > start && m < end)
        .collect();
    markers.sort_unstable();

    let mut cuts = vec![start];
    let mut cur = start;
    while end - cur > max_us {
        // latest silence that keeps the head within [min, max]
        let cut = markers
            .iter()
            .copied()
            .rfind(|&m| m - cur >= min_us && m - cur <= max_us)
            .unwrap_or(cur + max_us);
        cuts.push(cut);
        cur = cut;
    }
    cuts.push(end);

    cuts.windows(2)
        .map(|w| Span {
            seg: idx,
            start: w[0],
            end: w[1],
            transcript: seg.transcript.as_ref().map(|t| {
                if w[0] == start && w[1] == end {
                    t.clone()
                } else {
                    slice_words(t, start, end, w[0], w[1])
                }
            }),
        })
        .collect()
}

/// Splits long segments, merges short same-speaker neighbours and emits drafts
/// whose durations lie in `[min_s, max_s]`. Drafts never mix speakers.
pub fn chunk_segments(segments: &[RawSegment], policy: &ChunkPolicy) -> Result<Vec<ClipDraft>> {
    policy.validate()?;
    for (i, s) in segments.iter().enumerate() {
        if !(s.start_s.is_finite() && s.end_s.is_finite()) || s.end_s <= s.start_s {
            return Err(Error::InvalidArgument(format!("segment {i} has end_s <= start_s")));
        }
        if i > 0 {
            let prev = &segments[i - 1];
            if s.start_s < prev.start_s {
                return Err(Error::UnorderedInput(i));
            }
            if s.start_s < prev.end_s {
                return Err(Error::OverlappingSegments(i));
            }
            if s.source_uri != prev.source_uri {
                return Err(Error::InvalidArgument("segments from more than one source".into()));
            }
        }
    }
    let min_us = to_us(policy.min_s);
    let max_us = to_us(policy.max_s);
    let merge = policy.short_segment_rule == ShortSegmentRule::MergeSameSpeaker;

    let spans = segments
        .iter()
        .enumerate()
        .flat_map(|(i, s)| split_segment(i, s, min_us, max_us));

    let mut groups: Vec<Vec<Span>> = Vec::new();
    let mut pending: Vec<Span> = Vec::new();
    for span in spans {
        if let Some(last) = pending.last() {
            let total: i64 = pending.iter().map(Span::len).sum();
            let same_speaker = segments[last.seg].speaker_id == segments[span.seg].speaker_id;
            if merge && same_speaker && (total < min_us || span.len() < min_us) && total + span.len() <= max_us {
                pending.push(span);
                continue;
            }
            groups.push(std::mem::take(&mut pending));
        }
        pending.push(span);
    }
    if !pending.is_empty() {
        groups.push(pending);
    }

    Ok(groups
        .into_iter()
        .filter_map(|g| {
            let total: i64 = g.iter().map(Span::len).sum();
            if total < min_us || total > max_us {
                return None;
            }
            let first = &segments[g[0].seg];
            let source = &first.source_uri;
            let start = us_to_s(g[0].start);
            let end = us_to_s(g[g.len() - 1].end);
            let transcript = if g.iter().all(|s| s.transcript.is_some()) {
                let parts: Vec<&str> = g
                    .iter()
                    .filter_map(|s| s.transcript.as_deref())
                    .filter(|t| !t.is_empty())
                    .collect();
                Some(parts.join(" "))
            } else {
                None
            };
            Some(ClipDraft {
                clip_id: clip_id(source, start, end),
                source_uri: source.clone(),
                speaker_id: first.speaker_id.clone(),
                pieces: g
                    .iter()
                    .map(|s| Piece {
                        start_s: us_to_s(s.start),
                        end_s: us_to_s(s.end),
                    })
                    .collect(),
                duration_s: us_to_s(total),
                quality_score: g
                    .iter()
                    .map(|s| segments[s.seg].vad_score)
                    .fold(f64::INFINITY, f64::min),
                transcript,
            })
        })
        .collect())
}
