use crate::domain::{StyleQuery, UserPreference};
use crate::embedders::CharacterProfile;

/// Decides whether a query goes to the database at all.
pub trait RetrievalGate: Send + Sync {
    fn needs_retrieval(&self, query: &StyleQuery) -> bool;
}

/// Skips retrieval exactly when the caller supplied a style clip.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructuralGate;

impl RetrievalGate for StructuralGate {
    fn needs_retrieval(&self, query: &StyleQuery) -> bool {
        query.explicit_style_clip.is_none()
    }
}

pub fn needs_retrieval(query: &StyleQuery) -> bool {
    StructuralGate.needs_retrieval(query)
}

/// Expands the utterance text with what is known about the speaker and the
/// listener before it is embedded.
pub trait QueryRewriter: Send + Sync {
    fn rewrite(&self, text: &str, profile: &CharacterProfile, pref: Option<&UserPreference>) -> String;
}

/// Line-oriented template:
///
/// ```text
/// <utterance text>
/// [profile] <profile text>
/// [age] <band>
/// [gender] <label>
/// [region] <tag>
/// [note] <free text>
/// ```
///
/// Absent preference fields are left out; the order above is fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateRewriter;

impl QueryRewriter for TemplateRewriter {
    fn rewrite(&self, text: &str, profile: &CharacterProfile, pref: Option<&UserPreference>) -> String {
        let mut out = String::with_capacity(text.len() + profile.profile_text.len() + 64);
        out.push_str(text);
        out.push_str("\n[profile] ");
        out.push_str(&profile.profile_text);
        if let Some(p) = pref {
            let fields = [
                ("age", p.age_band.map(|a| a.as_str().to_string())),
                ("gender", p.gender.map(|g| g.as_str().to_string())),
                ("region", p.region.clone()),
                ("note", p.free_text.clone()),
            ];
            for (tag, value) in fields {
                if let Some(v) = value {
                    out.push_str("\n[");
                    out.push_str(tag);
                    out.push_str("] ");
                    out.push_str(&v);
                }
            }
        }
        out
    }
}

/// Template rewrite of a query using its own preference.
pub fn rewrite_query(query: &StyleQuery, profile: &CharacterProfile) -> String {
    TemplateRewriter.rewrite(&query.utterance_text, profile, query.user_pref.as_ref())
}
