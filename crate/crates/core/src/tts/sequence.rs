use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One slot of the language-model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum SequenceElement {
    Start,
    Speaker(Vec<f64>),
    Text(u32),
    Transition,
    Speech(u32),
    End,
}

/// `[S, v, t_1..t_I, T, x_1..x_K, E]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SequenceElement>", into = "Vec<SequenceElement>")]
pub struct LlmInputSequence {
    elements: Vec<SequenceElement>,
    text_count: usize,
}

pub fn construct_llm_sequence(v: &[f64], text_tokens: &[u32], speech_tokens: &[u32]) -> Result<LlmInputSequence> {
    if text_tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut elements = Vec::with_capacity(text_tokens.len() + speech_tokens.len() + 4);
    elements.push(SequenceElement::Start);
    elements.push(SequenceElement::Speaker(v.to_vec()));
    elements.extend(text_tokens.iter().map(|&t| SequenceElement::Text(t)));
    elements.push(SequenceElement::Transition);
    elements.extend(speech_tokens.iter().map(|&x| SequenceElement::Speech(x)));
    elements.push(SequenceElement::End);
    Ok(LlmInputSequence {
        elements,
        text_count: text_tokens.len(),
    })
}

impl LlmInputSequence {
    /// Checks the layout of a flat element list.
    pub fn parse(elements: Vec<SequenceElement>) -> Result<Self> {
        use SequenceElement as E;
        let bad = |msg: &str| Error::InvalidArgument(format!("malformed input sequence: {msg}"));
        let n = elements.len();
        if n < 5 {
            return Err(bad("shorter than five elements"));
        }
        if elements[0] != E::Start {
            return Err(bad("does not begin with the start mark"));
        }
        if !matches!(elements[1], E::Speaker(_)) {
            return Err(bad("second element is not the speaker vector"));
        }
        if elements[n - 1] != E::End {
            return Err(bad("does not end with the end mark"));
        }
        let t = elements
            .iter()
            .position(|e| *e == E::Transition)
            .ok_or_else(|| bad("no transition mark"))?;
        if !elements[2..t].iter().all(|e| matches!(e, E::Text(_))) {
            return Err(bad("non-text element before the transition mark"));
        }
        if !elements[t + 1..n - 1].iter().all(|e| matches!(e, E::Speech(_))) {
            return Err(bad("non-speech element after the transition mark"));
        }
        let text_count = t - 2;
        if text_count == 0 {
            return Err(Error::EmptyText);
        }
        Ok(LlmInputSequence { elements, text_count })
    }

    pub fn elements(&self) -> &[SequenceElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// I.
    pub fn text_count(&self) -> usize {
        self.text_count
    }

    /// K.
    pub fn speech_count(&self) -> usize {
        self.elements.len() - self.text_count - 4
    }

    pub fn transition_index(&self) -> usize {
        self.text_count + 2
    }

    pub fn speaker_vector(&self) -> &[f64] {
        match &self.elements[1] {
            SequenceElement::Speaker(v) => v,
            _ => unreachable!("layout checked on construction"),
        }
    }

    pub fn text_tokens(&self) -> Vec<u32> {
        self.tokens(|e| match e {
            SequenceElement::Text(t) => Some(*t),
            _ => None,
        })
    }

    pub fn speech_tokens(&self) -> Vec<u32> {
        self.tokens(|e| match e {
            SequenceElement::Speech(x) => Some(*x),
            _ => None,
        })
    }

    fn tokens(&self, f: impl Fn(&SequenceElement) -> Option<u32>) -> Vec<u32> {
        self.elements.iter().filter_map(f).collect()
    }
}

impl TryFrom<Vec<SequenceElement>> for LlmInputSequence {
    type Error = Error;

    fn try_from(v: Vec<SequenceElement>) -> Result<Self> {
        LlmInputSequence::parse(v)
    }
}

impl From<LlmInputSequence> for Vec<SequenceElement> {
    fn from(s: LlmInputSequence) -> Self {
        s.elements
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SequenceElement as E;

    #[test]
    fn two_text_three_speech() {
        let s = construct_llm_sequence(&[0.5, -1.0], &[10, 11], &[7, 8, 9]).unwrap();
        assert_eq!(
            s.elements(),
            &[
                E::Start,
                E::Speaker(vec![0.5, -1.0]),
                E::Text(10),
                E::Text(11),
                E::Transition,
                E::Speech(7),
                E::Speech(8),
                E::Speech(9),
                E::End
            ]
        );
        assert_eq!(s.len(), 9);
    }

    #[test]
    fn no_speech_tokens() {
        let s = construct_llm_sequence(&[1.0], &[3], &[]).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.elements()[3], E::Transition);
        assert_eq!(s.speech_count(), 0);
    }

    #[test]
    fn empty_text() {
        assert!(matches!(
            construct_llm_sequence(&[1.0], &[], &[1]),
            Err(Error::EmptyText)
        ));
    }

    #[test]
    fn parse_rejects_bad_layouts() {
        let good = construct_llm_sequence(&[1.0], &[1, 2], &[3]).unwrap();
        let mut swapped = good.elements().to_vec();
        swapped.swap(2, 5);
        assert!(LlmInputSequence::parse(swapped).is_err());
        let mut no_end = good.elements().to_vec();
        no_end.pop();
        assert!(LlmInputSequence::parse(no_end).is_err());
        assert!(matches!(
            LlmInputSequence::parse(vec![E::Start, E::Speaker(vec![]), E::Transition, E::Speech(1), E::End]),
            Err(Error::EmptyText)
        ));
    }

    #[test]
    fn json_round_trip() {
        let s = construct_llm_sequence(&[0.25], &[1], &[2, 3]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with("[{\"type\":\"start\"}"));
        let back: LlmInputSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn round_trip(
            v in proptest::collection::vec(-1e6f64..1e6, 0..8),
            text in proptest::collection::vec(any::<u32>(), 1..40),
            speech in proptest::collection::vec(any::<u32>(), 0..40),
        ) {
            let s = construct_llm_sequence(&v, &text, &speech).unwrap();
            prop_assert_eq!(s.len(), text.len() + speech.len() + 4);
            let p = LlmInputSequence::parse(s.elements().to_vec()).unwrap();
            prop_assert_eq!(p.text_count(), text.len());
            prop_assert_eq!(p.speech_count(), speech.len());
            prop_assert_eq!(p.speaker_vector(), &v[..]);
            prop_assert_eq!(p.text_tokens(), text);
            prop_assert_eq!(p.speech_tokens(), speech);
        }
    }
}
