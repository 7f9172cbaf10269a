use serde::Deserialize;

use stylerag::embedders::{
    canonical_payload, embed_reference, EmbedPayload, Embedder, EmbedderKind, ReferenceEmbedder,
};
use stylerag::script::Utterance;

#[derive(Deserialize)]
struct Case {
    salt: String,
    payload: String,
    dim: usize,
    seed: u64,
    vector: Vec<f64>,
}

fn cases() -> Vec<Case> {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/reference_vectors.json"
    ))
    .unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn matches_golden_vectors_bit_for_bit() {
    for c in cases() {
        let got = embed_reference(&c.salt, &c.payload, c.dim, c.seed);
        let got: Vec<u64> = got.iter().map(|x| x.to_bits()).collect();
        let want: Vec<u64> = c.vector.iter().map(|x| x.to_bits()).collect();
        assert_eq!(got, want, "salt {:?} dim {}", c.salt, c.dim);
    }
}

#[test]
fn embedder_uses_kind_as_salt() {
    let payload = EmbedPayload::Emotion {
        utterance_text: "I know. I am sorry.".into(),
        profile_text: "spk02: calm".into(),
        context: vec![Utterance::new("spk01", "You promised you would call me.")],
    };
    let canonical = canonical_payload(&payload);
    let golden = cases()
        .into_iter()
        .find(|c| c.salt == "emotion" && c.dim == 33)
        .unwrap();
    assert_eq!(canonical, golden.payload);
    let v = ReferenceEmbedder::new(EmbedderKind::Emotion, 33, golden.seed)
        .embed(&payload)
        .unwrap();
    assert_eq!(v, golden.vector);
}

#[test]
fn prefix_of_longer_output() {
    let long = embed_reference("profile", "abc", 64, 3);
    for dim in [1, 4, 5, 31, 64] {
        assert_eq!(embed_reference("profile", "abc", dim, 3), long[..dim]);
    }
}
